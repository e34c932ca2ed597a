//! `[P_p]² = G_p ⊕ G⊥_p` with `G_p = ∇P_{p+1}` and a rotated-monomial completion.

use super::{dim, exponents, index, ScaledMonomialSpace};
use crate::error::{Result, VemError};
use nalgebra::DMatrix;

/// A vector polynomial `(u_x, u_y)`, both components in the scaled monomial
/// basis of degree `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPoly {
    pub degree: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorPoly {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            x: vec![0.0; dim(degree as i64)],
            y: vec![0.0; dim(degree as i64)],
        }
    }

    /// `h ∇m_(a,b)`, dimensionless.
    pub fn scaled_gradient(a: usize, b: usize, degree: usize) -> Self {
        let mut v = Self::zero(degree);
        if a > 0 {
            v.x[index(a - 1, b)] = a as f64;
        }
        if b > 0 {
            v.y[index(a, b - 1)] = b as f64;
        }
        v
    }

    /// `m_(a,b) · (Y, -X)` with `(X, Y)` the scaled local coordinates.
    pub fn rotated(a: usize, b: usize, degree: usize) -> Self {
        let mut v = Self::zero(degree);
        v.x[index(a, b + 1)] = 1.0;
        v.y[index(a + 1, b)] = -1.0;
        v
    }

    pub fn axpy(&mut self, alpha: f64, other: &VectorPoly) {
        for (s, o) in self.x.iter_mut().zip(&other.x) {
            *s += alpha * o;
        }
        for (s, o) in self.y.iter_mut().zip(&other.y) {
            *s += alpha * o;
        }
    }

    /// Physical divergence coefficients (degree `degree - 1`).
    pub fn divergence(&self, h: f64) -> Vec<f64> {
        if self.degree == 0 {
            return vec![0.0];
        }
        let mut out = vec![0.0; dim(self.degree as i64 - 1)];
        for (k, (a, b)) in exponents(self.degree).into_iter().enumerate() {
            if a > 0 {
                out[index(a - 1, b)] += a as f64 * self.x[k] / h;
            }
            if b > 0 {
                out[index(a, b - 1)] += b as f64 * self.y[k] / h;
            }
        }
        out
    }

    /// `(u, v)_{0,K}` using exact monomial integrals.
    pub fn inner(&self, other: &VectorPoly, space: &ScaledMonomialSpace) -> f64 {
        let (ea, eb) = (exponents(self.degree), exponents(other.degree));
        let mut s = 0.0;
        for (i, (a, b)) in ea.iter().enumerate() {
            for (j, (c, d)) in eb.iter().enumerate() {
                let m = self.x[i] * other.x[j] + self.y[i] * other.y[j];
                if m != 0.0 {
                    s += m * space.integral(a + c, b + d);
                }
            }
        }
        s
    }
}

/// Bases of `G_p(K)` and `G⊥_p(K)`.
#[derive(Debug, Clone)]
pub struct VectorPolyDecomposition {
    pub degree: usize,
    /// `h ∇m_α`, `1 ≤ |α| ≤ p+1`, in graded order. The first `dim P_p - 1`
    /// entries span `G_{p-1}`.
    pub gradients: Vec<VectorPoly>,
    /// `m_β (Y, -X)`, `|β| ≤ p-1`.
    pub completion: Vec<VectorPoly>,
}

impl VectorPolyDecomposition {
    pub fn g_dim(&self) -> usize {
        self.gradients.len()
    }

    pub fn g_perp_dim(&self) -> usize {
        self.completion.len()
    }

    /// Gradients followed by completion fields.
    pub fn union(&self) -> impl Iterator<Item = &VectorPoly> {
        self.gradients.iter().chain(&self.completion)
    }

    /// Mass Gram matrix of the union basis.
    pub fn gram(&self, space: &ScaledMonomialSpace) -> DMatrix<f64> {
        let all: Vec<&VectorPoly> = self.union().collect();
        let n = all.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = all[i].inner(all[j], space);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

/// Build the decomposition of `[P_p(K)]²`, verifying full rank of the union.
pub fn build_decomposition(space: &ScaledMonomialSpace, p: usize) -> Result<VectorPolyDecomposition> {
    let gradients = exponents(p + 1)
        .into_iter()
        .skip(1)
        .map(|(a, b)| VectorPoly::scaled_gradient(a, b, p))
        .collect();
    let completion = if p == 0 {
        Vec::new()
    } else {
        exponents(p - 1).into_iter().map(|(a, b)| VectorPoly::rotated(a, b, p)).collect()
    };
    let dec = VectorPolyDecomposition {
        degree: p,
        gradients,
        completion,
    };
    if dec.gram(space).cholesky().is_none() {
        return Err(VemError::SingularLocal {
            element: space.element_id,
            what: format!("vector polynomial Gram at degree {p} is rank deficient"),
        });
    }
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Point;

    #[test]
    fn dimension_counts() {
        let sq = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let s = ScaledMonomialSpace::new(0, &sq, 4);
        for (p, g, gp) in [(0, 2, 0), (1, 5, 1), (2, 9, 3), (3, 14, 6)] {
            let d = build_decomposition(&s, p).unwrap();
            assert_eq!(d.g_dim(), g);
            assert_eq!(d.g_perp_dim(), gp);
            assert_eq!(g + gp, (p + 1) * (p + 2));
        }
    }

    #[test]
    fn gradient_fields_are_curl_free_and_divergence_matches() {
        // h∇m_(2,1) = (2XY, X²); div = (2Y + 0)/h
        let v = VectorPoly::scaled_gradient(2, 1, 2);
        let d = v.divergence(0.5);
        assert!((d[index(0, 1)] - 4.0).abs() < 1e-15);
        // only the constant-weight rotation is solenoidal
        let r = VectorPoly::rotated(0, 0, 3);
        assert!(r.divergence(0.3).iter().all(|c| c.abs() < 1e-15));
        let r = VectorPoly::rotated(1, 0, 3);
        assert!(r.divergence(0.3).iter().any(|c| c.abs() > 1.0));
    }
}
