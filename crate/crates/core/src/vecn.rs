//! Fixed-size vector helpers on `[f64; D]`.
//!
//! Points, vectors and covectors are plain arrays; the ray tracer and the
//! convexity checker are generic over the dimension `D` (2 or 3).

#[inline]
pub fn dot<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm<const D: usize>(a: &[f64; D]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn add<const D: usize>(a: &[f64; D], b: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|i| a[i] + b[i])
}

#[inline]
pub fn sub<const D: usize>(a: &[f64; D], b: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn scale<const D: usize>(a: &[f64; D], s: f64) -> [f64; D] {
    std::array::from_fn(|i| a[i] * s)
}

/// `a + s * b`
#[inline]
pub fn axpy<const D: usize>(a: &[f64; D], s: f64, b: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|i| a[i] + s * b[i])
}

#[inline]
pub fn normalize<const D: usize>(a: &[f64; D]) -> [f64; D] {
    scale(a, 1.0 / norm(a))
}

pub fn dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    norm(&sub(a, b))
}

/// Counter-clockwise rotation of a planar vector.
pub fn rotate2(v: &[f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Signed angle from `from` to `to`, counter-clockwise positive, in (-pi, pi].
pub fn signed_angle2(from: &[f64; 2], to: &[f64; 2]) -> f64 {
    let cross = from[0] * to[1] - from[1] * to[0];
    cross.atan2(dot(from, to))
}

/// An orthonormal basis of the complement of the unit vector `n`.
pub fn tangent_basis<const D: usize>(n: &[f64; D]) -> Vec<[f64; D]> {
    let mut basis: Vec<[f64; D]> = Vec::with_capacity(D - 1);
    for axis in 0..D {
        let mut e = [0.0; D];
        e[axis] = 1.0;
        let mut v = axpy(&e, -dot(&e, n), n);
        for b in &basis {
            v = axpy(&v, -dot(&v, b), b);
        }
        let len = norm(&v);
        if len > 1e-6 {
            basis.push(scale(&v, 1.0 / len));
            if basis.len() == D - 1 {
                break;
            }
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tangent_basis_is_orthonormal() {
        let n = normalize(&[1.0, -2.0, 0.5]);
        let b = tangent_basis(&n);
        assert_eq!(b.len(), 2);
        for v in &b {
            assert!((norm(v) - 1.0).abs() < 1e-14);
            assert!(dot(v, &n).abs() < 1e-14);
        }
        assert!(dot(&b[0], &b[1]).abs() < 1e-14);
    }

    #[test]
    fn signed_angle_round_trip() {
        let v = [0.3, -0.7];
        let w = rotate2(&v, 0.4);
        assert!((signed_angle2(&v, &w) - 0.4).abs() < 1e-14);
    }
}
