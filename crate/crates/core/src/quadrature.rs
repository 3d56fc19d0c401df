//! Degree-5 quadrature on triangles.

use crate::scalar::Real;

/// Symmetric rule on the reference triangle: barycentric points with weights
/// normalized to sum to one (multiply by the triangle area to integrate).
#[derive(Debug, Clone)]
pub struct SurfaceQuadrature<T> {
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
}

impl<T: Real> SurfaceQuadrature<T> {
    /// The 7-point Radon rule, exact for polynomials of total degree <= 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let b1 = (9.0 + 2.0 * s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let a2 = (6.0 + s15) / 21.0;
        let b2 = (9.0 - 2.0 * s15) / 21.0;
        let w2 = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        let raw: [([f64; 3], f64); 7] = [
            ([third, third, third], 9.0 / 40.0),
            ([b1, a1, a1], w1),
            ([a1, b1, a1], w1),
            ([a1, a1, b1], w1),
            ([b2, a2, a2], w2),
            ([a2, b2, a2], w2),
            ([a2, a2, b2], w2),
        ];
        SurfaceQuadrature {
            points: raw.iter().map(|(p, _)| p.map(T::lit)).collect(),
            weights: raw.iter().map(|(_, w)| T::lit(*w)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Integral over a triangle of area `area` of a function of barycentric coordinates.
    pub fn integrate<F: FnMut(&[T; 3]) -> T>(&self, area: T, mut f: F) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w * f(p))
            .sum::<T>()
            * area
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of l1^a l2^b l3^c over a triangle of area 1/2.
    fn monomial_exact(a: u32, b: u32, c: u32) -> f64 {
        factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
    }

    #[test]
    fn weights_positive_and_normalized() {
        let q = SurfaceQuadrature::<f64>::degree5();
        assert_eq!(q.len(), 7);
        assert!(q.weights.iter().all(|&w| w > 0.0));
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for p in &q.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_through_degree_five() {
        let q = SurfaceQuadrature::<f64>::degree5();
        assert!((q.integrate(0.5, |_| 1.0) - 0.5).abs() < 1e-15);
        let v = q.integrate(0.5, |l| l[1].powi(2) * l[2].powi(3));
        assert!((v - 1.0 / 420.0).abs() < 1e-16, "{v}");
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                for c in 0..=(5 - a - b) {
                    let v = q.integrate(0.5, |l| {
                        l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)
                    });
                    assert!((v - monomial_exact(a, b, c)).abs() < 1e-15, "{a} {b} {c}");
                }
            }
        }
    }

    #[test]
    fn degree_six_is_not_exact() {
        let q = SurfaceQuadrature::<f64>::degree5();
        let exact = monomial_exact(6, 0, 0);
        let err = (q.integrate(0.5, |l| l[0].powi(6)) - exact).abs();
        assert!(err > 1e-8 && err < 0.1 * exact, "{err}");
    }
}
