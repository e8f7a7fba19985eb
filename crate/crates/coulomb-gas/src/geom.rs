//! Small vector helpers for points on T³ = (R/Z)³ and in R³.

pub type Point3 = [f64; 3];

#[inline]
pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Point3, c: f64) -> Point3 {
    [c * a[0], c * a[1], c * a[2]]
}

#[inline]
pub fn norm2(a: Point3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Point3) -> f64 {
    norm2(a).sqrt()
}

/// Reduce to the centered fundamental cell [-1/2, 1/2]³ (nearest image of 0).
#[inline]
pub fn reduce(x: Point3) -> Point3 {
    [x[0] - x[0].round(), x[1] - x[1].round(), x[2] - x[2].round()]
}

/// Wrap to [0, 1)³.
#[inline]
pub fn wrap01(x: Point3) -> Point3 {
    [
        x[0] - x[0].floor(),
        x[1] - x[1].floor(),
        x[2] - x[2].floor(),
    ]
}

/// Squared distance on the torus (minimum over images).
#[inline]
pub fn torus_dist2(a: Point3, b: Point3) -> f64 {
    norm2(reduce(sub(a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_is_nearest_image() {
        assert_eq!(reduce([0.75, -0.75, 2.25]), [-0.25, 0.25, 0.25]);
        let x = reduce([0.5, -0.5, 0.0]);
        assert!(x[0].abs() == 0.5 && x[1].abs() == 0.5 && x[2] == 0.0);
    }

    #[test]
    fn torus_metric_wraps() {
        let d2 = torus_dist2([0.95, 0.0, 0.0], [0.05, 0.0, 0.0]);
        assert!((d2 - 0.01).abs() < 1e-15);
    }
}
