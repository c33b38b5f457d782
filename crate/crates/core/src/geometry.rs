//! Small helpers on points stored as coordinate slices.

use crate::scalar::Scalar;

pub type Point<T> = Vec<T>;

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Point<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

pub fn lerp<T: Scalar>(a: &[T], b: &[T], t: T) -> Point<T> {
    a.iter().zip(b).map(|(&x, &y)| x + (y - x) * t).collect()
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_dist<T: Scalar>(p: &[T], a: &[T], b: &[T]) -> T {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2: T = ab.iter().map(|&x| x * x).sum();
    if len2 <= T::zero() {
        return norm(&ap);
    }
    let t = ab.iter().zip(&ap).map(|(&u, &v)| u * v).sum::<T>() / len2;
    let t = t.max(T::zero()).min(T::one());
    dist(p, &lerp(a, b, t))
}

/// Axis-aligned bounding box `(lo, hi)` of a non-empty point set.
pub fn bounding_box<'a, T: Scalar, I>(points: I, dim: usize) -> (Point<T>, Point<T>)
where
    I: IntoIterator<Item = &'a [T]>,
{
    let mut lo = vec![T::infinity(); dim];
    let mut hi = vec![T::neg_infinity(); dim];
    for p in points {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// Largest pairwise distance of a point set.
pub fn diameter<T: Scalar>(points: &[&[T]]) -> T {
    let mut best = T::zero();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(dist(a, b));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let a = [0.0, 0.0];
        let b = [1.0, 0.0];
        assert_eq!(point_segment_dist(&[0.5, 0.3], &a, &b), 0.3);
        assert_eq!(point_segment_dist(&[2.0, 0.0], &a, &b), 1.0);
        assert_eq!(point_segment_dist(&[0.0, 2.0], &a, &a), 2.0);
    }
}
