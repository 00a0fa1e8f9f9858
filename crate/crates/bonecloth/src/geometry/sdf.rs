//! Analytic signed distance to a union of capsules, standing in for the body
//! surface. Negative inside.

use nalgebra::{Point3, Vector3};

use crate::error::GeometryError;

#[derive(Debug, Clone, Copy)]
pub struct Capsule {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
    pub radius: f64,
}

impl Capsule {
    /// Exact signed distance to this capsule.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.closest_axis_point(p).0 - self.radius
    }

    /// (distance to axis segment, closest point on the segment).
    fn closest_axis_point(&self, p: &Point3<f64>) -> (f64, Point3<f64>) {
        let ab = self.b - self.a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 { ((p - self.a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let q = self.a + ab * t;
        ((p - q).norm(), q)
    }
}

/// Union of capsules in a given pose; the minimum over parts is exact for the
/// union shape.
#[derive(Debug, Clone, Default)]
pub struct BodySdf {
    capsules: Vec<Capsule>,
}

impl BodySdf {
    pub fn new(capsules: Vec<Capsule>) -> Result<Self, GeometryError> {
        for c in &capsules {
            if c.radius <= 0.0 {
                return Err(GeometryError::NonPositiveRadius(c.radius));
            }
        }
        Ok(Self { capsules })
    }

    pub fn capsules(&self) -> &[Capsule] {
        &self.capsules
    }

    pub fn is_empty(&self) -> bool {
        self.capsules.is_empty()
    }

    /// Signed distance (meters, negative inside) to the capsule union.
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.capsules
            .iter()
            .map(|c| c.signed_distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Signed distance and its gradient (the unit outward direction from the
    /// closest capsule axis). On the axis itself the gradient is zero.
    pub fn distance_and_gradient(&self, p: &Point3<f64>) -> (f64, Vector3<f64>) {
        let mut best = f64::INFINITY;
        let mut grad = Vector3::zeros();
        for c in &self.capsules {
            let (axis_dist, q) = c.closest_axis_point(p);
            let d = axis_dist - c.radius;
            if d < best {
                best = d;
                grad = if axis_dist > 1e-12 { (p - q) / axis_dist } else { Vector3::zeros() };
            }
        }
        (best, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_capsule() -> BodySdf {
        BodySdf::new(vec![Capsule {
            a: Point3::new(-1.0, 0.0, 0.0),
            b: Point3::new(1.0, 0.0, 0.0),
            radius: 0.25,
        }])
        .unwrap()
    }

    #[test]
    fn point_at_twice_radius_from_axis() {
        let sdf = one_capsule();
        let d = sdf.signed_distance(&Point3::new(0.0, 0.5, 0.0));
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn point_on_axis_is_minus_radius() {
        let sdf = one_capsule();
        let d = sdf.signed_distance(&Point3::new(0.3, 0.0, 0.0));
        assert!((d + 0.25).abs() < 1e-12);
    }

    #[test]
    fn union_takes_minimum() {
        let sdf = BodySdf::new(vec![
            Capsule { a: Point3::new(0.0, 0.0, 0.0), b: Point3::new(0.0, 1.0, 0.0), radius: 0.1 },
            Capsule { a: Point3::new(2.0, 0.0, 0.0), b: Point3::new(2.0, 1.0, 0.0), radius: 0.5 },
        ])
        .unwrap();
        // Closer to the second, fatter capsule.
        let d = sdf.signed_distance(&Point3::new(1.6, 0.5, 0.0));
        assert!((d - (0.4 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_rejected() {
        let err = BodySdf::new(vec![Capsule {
            a: Point3::origin(),
            b: Point3::new(1.0, 0.0, 0.0),
            radius: 0.0,
        }]);
        assert!(matches!(err, Err(GeometryError::NonPositiveRadius(_))));
    }

    #[test]
    fn matches_triangulated_surface_oracle() {
        // Min distance to a finely triangulated capsule surface as an
        // independent oracle; the tessellation sagitta bounds the gap.
        let cap = Capsule {
            a: Point3::new(-0.4, 0.1, 0.0),
            b: Point3::new(0.6, 0.3, 0.2),
            radius: 0.3,
        };
        let sdf = BodySdf::new(vec![cap]).unwrap();
        let (verts, faces) = crate::assets::tessellate_capsule(&cap, 96, 48);

        let mut rng = 0x12345u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) as f64 / (1u64 << 31) as f64) * 2.0 - 1.0
        };
        for _ in 0..60 {
            let p = Point3::new(next() * 1.2, next() * 1.2, next() * 1.2);
            let exact = sdf.signed_distance(&p);
            let sampled = faces
                .iter()
                .map(|f| point_triangle_distance(&p, &verts[f[0]], &verts[f[1]], &verts[f[2]]))
                .fold(f64::INFINITY, f64::min);
            assert!(
                (exact.abs() - sampled).abs() <= 1e-3,
                "|{exact}| vs triangulated {sampled}"
            );
        }
    }

    fn point_triangle_distance(
        p: &Point3<f64>,
        a: &Point3<f64>,
        b: &Point3<f64>,
        c: &Point3<f64>,
    ) -> f64 {
        let ab = b - a;
        let ac = c - a;
        let ap = p - a;
        let d1 = ab.dot(&ap);
        let d2 = ac.dot(&ap);
        if d1 <= 0.0 && d2 <= 0.0 {
            return (p - a).norm();
        }
        let bp = p - b;
        let d3 = ab.dot(&bp);
        let d4 = ac.dot(&bp);
        if d3 >= 0.0 && d4 <= d3 {
            return (p - b).norm();
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            let v = d1 / (d1 - d3);
            return (p - (a + ab * v)).norm();
        }
        let cp = p - c;
        let d5 = ab.dot(&cp);
        let d6 = ac.dot(&cp);
        if d6 >= 0.0 && d5 <= d6 {
            return (p - c).norm();
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            let w = d2 / (d2 - d6);
            return (p - (a + ac * w)).norm();
        }
        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            return (p - (b + (c - b) * w)).norm();
        }
        let denom = 1.0 / (va + vb + vc);
        let v = vb * denom;
        let w = vc * denom;
        (p - (a + ab * v + ac * w)).norm()
    }
}
