//! Scaled monomial bases, vector-polynomial decompositions and quadrature.
//!
//! On an element `K` with centroid `x_K` and diameter `h_K` the scalar basis is
//! `m_(a,b)(x) = ((x - x_K)/h_K)^a ((y - y_K)/h_K)^b`, enumerated in graded
//! lexicographic order: degree by degree, and within degree `d` by increasing
//! `b`. All integrals of products of these monomials are computed exactly from
//! boundary integrals, so Gram matrices do not depend on an area quadrature.

pub mod decomposition;
pub mod quadrature;

use crate::mesh::Point;
use nalgebra::DMatrix;

pub use decomposition::{VectorPoly, VectorPolyDecomposition};
pub use quadrature::{edge_quadrature, polygon_quadrature, EdgeFamily, QuadratureRule};

/// `dim P_p = (p+1)(p+2)/2`; zero for negative degrees.
pub fn dim(p: i64) -> usize {
    if p < 0 {
        0
    } else {
        let p = p as usize;
        (p + 1) * (p + 2) / 2
    }
}

/// Graded-lexicographic position of the exponent pair `(a, b)`.
#[inline]
pub fn index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Exponent pairs of all monomials up to degree `p`.
pub fn exponents(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim(p as i64));
    for d in 0..=p {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Translation/dilation frame of an element: centroid and diameter.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub center: Point,
    pub h: f64,
}

impl Frame {
    #[inline]
    pub fn local(&self, x: &Point) -> (f64, f64) {
        ((x.x - self.center.x) / self.h, (x.y - self.center.y) / self.h)
    }

    /// Values of all monomials up to degree `p` at `x`.
    pub fn eval_basis(&self, p: usize, x: &Point) -> Vec<f64> {
        let (u, v) = self.local(x);
        eval_basis_local(p, u, v)
    }

    /// Physical gradients of all monomials up to degree `p` at `x`.
    pub fn grad_basis(&self, p: usize, x: &Point) -> Vec<[f64; 2]> {
        let (u, v) = self.local(x);
        let pu = powers(u, p);
        let pv = powers(v, p);
        exponents(p)
            .into_iter()
            .map(|(a, b)| {
                let gx = if a > 0 { a as f64 * pu[a - 1] * pv[b] } else { 0.0 };
                let gy = if b > 0 { b as f64 * pu[a] * pv[b - 1] } else { 0.0 };
                [gx / self.h, gy / self.h]
            })
            .collect()
    }

    pub fn eval(&self, coeffs: &[f64], x: &Point) -> f64 {
        let p = degree_of_len(coeffs.len());
        self.eval_basis(p, x).iter().zip(coeffs).map(|(m, c)| m * c).sum()
    }

    pub fn grad(&self, coeffs: &[f64], x: &Point) -> [f64; 2] {
        let p = degree_of_len(coeffs.len());
        self.grad_basis(p, x)
            .iter()
            .zip(coeffs)
            .fold([0.0, 0.0], |acc, (g, c)| [acc[0] + c * g[0], acc[1] + c * g[1]])
    }
}

fn powers(u: f64, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p + 1);
    let mut acc = 1.0;
    for _ in 0..=p {
        out.push(acc);
        acc *= u;
    }
    out
}

pub(crate) fn eval_basis_local(p: usize, u: f64, v: f64) -> Vec<f64> {
    let pu = powers(u, p);
    let pv = powers(v, p);
    exponents(p).into_iter().map(|(a, b)| pu[a] * pv[b]).collect()
}

/// Largest `p` with `dim(p) == len`. Panics on lengths that are not a `dim`.
pub fn degree_of_len(len: usize) -> usize {
    let mut p = 0;
    while dim(p as i64) < len {
        p += 1;
    }
    assert_eq!(dim(p as i64), len.max(1), "coefficient length {len} is not dim P_p");
    p
}

/// Coefficients of the Laplacian of a degree-`p` polynomial (degree `p-2` result,
/// empty when `p < 2`).
pub fn laplacian(coeffs: &[f64], h: f64) -> Vec<f64> {
    let p = degree_of_len(coeffs.len());
    if p < 2 {
        return Vec::new();
    }
    let mut out = vec![0.0; dim(p as i64 - 2)];
    for (k, (a, b)) in exponents(p).into_iter().enumerate() {
        if a >= 2 {
            out[index(a - 2, b)] += (a * (a - 1)) as f64 * coeffs[k];
        }
        if b >= 2 {
            out[index(a, b - 2)] += (b * (b - 1)) as f64 * coeffs[k];
        }
    }
    out.iter_mut().for_each(|c| *c /= h * h);
    out
}

/// Product of two polynomials expressed in the same frame.
pub fn multiply(f: &[f64], g: &[f64]) -> Vec<f64> {
    if f.is_empty() || g.is_empty() {
        return Vec::new();
    }
    let (pf, pg) = (degree_of_len(f.len()), degree_of_len(g.len()));
    let mut out = vec![0.0; dim((pf + pg) as i64)];
    let (ef, eg) = (exponents(pf), exponents(pg));
    for (i, (a, b)) in ef.iter().enumerate() {
        if f[i] == 0.0 {
            continue;
        }
        for (j, (c, d)) in eg.iter().enumerate() {
            out[index(a + c, b + d)] += f[i] * g[j];
        }
    }
    out
}

/// Pad or truncate coefficient vector to `dim(p)`.
pub fn resize(coeffs: &[f64], p: i64) -> Vec<f64> {
    let mut out = vec![0.0; dim(p)];
    for (o, c) in out.iter_mut().zip(coeffs) {
        *o = *c;
    }
    out
}

/// Per-element scaled monomial space with cached exact monomial integrals.
#[derive(Debug, Clone)]
pub struct ScaledMonomialSpace {
    pub element_id: usize,
    pub frame: Frame,
    pub area: f64,
    pub degree: usize,
    /// `∫_K m_γ dx` for all `|γ| ≤ 2·degree + 2`.
    integrals: Vec<f64>,
    max_integral_degree: usize,
}

impl ScaledMonomialSpace {
    pub fn new(element_id: usize, vertices: &[Point], degree: usize) -> Self {
        let area = quadrature::signed_area(vertices);
        let center = quadrature::area_centroid(vertices);
        let h = diameter(vertices);
        let frame = Frame { center, h };
        let max_integral_degree = 2 * degree + 4;
        let integrals = monomial_integrals(vertices, &frame, max_integral_degree);
        Self {
            element_id,
            frame,
            area,
            degree,
            integrals,
            max_integral_degree,
        }
    }

    pub fn h(&self) -> f64 {
        self.frame.h
    }

    /// `∫_K m_(a,b)`.
    #[inline]
    pub fn integral(&self, a: usize, b: usize) -> f64 {
        assert!(a + b <= self.max_integral_degree, "monomial integral degree {} not cached", a + b);
        self.integrals[index(a, b)]
    }

    /// `(m_α, m_β)_{0,K}` for `|α| ≤ p`, `|β| ≤ q`.
    pub fn mass(&self, p: i64, q: i64) -> DMatrix<f64> {
        let (ep, eq) = (exponents(p.max(0) as usize), exponents(q.max(0) as usize));
        DMatrix::from_fn(dim(p), dim(q), |i, j| {
            let (a, b) = ep[i];
            let (c, d) = eq[j];
            self.integral(a + c, b + d)
        })
    }

    /// `(∇m_α, ∇m_β)_{0,K}` for `|α|, |β| ≤ p`.
    pub fn stiffness(&self, p: usize) -> DMatrix<f64> {
        let e = exponents(p);
        let s = 1.0 / (self.h() * self.h());
        DMatrix::from_fn(dim(p as i64), dim(p as i64), |i, j| {
            let (a, b) = e[i];
            let (c, d) = e[j];
            let mut v = 0.0;
            if a > 0 && c > 0 {
                v += (a * c) as f64 * self.integral(a + c - 2, b + d);
            }
            if b > 0 && d > 0 {
                v += (b * d) as f64 * self.integral(a + c, b + d - 2);
            }
            v * s
        })
    }

    /// `∫_K m_α` for `|α| ≤ p`.
    pub fn means(&self, p: i64) -> Vec<f64> {
        exponents(p.max(0) as usize)
            .into_iter()
            .take(dim(p))
            .map(|(a, b)| self.integral(a, b))
            .collect()
    }

    /// L² projection of a callable onto `P_p(K)`.
    pub fn project(&self, vertices: &[Point], p: usize, f: impl Fn(&Point) -> f64, extra_degree: usize) -> Vec<f64> {
        let rule = polygon_quadrature(vertices, 2 * p + extra_degree);
        let mut rhs = vec![0.0; dim(p as i64)];
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            let fx = f(x) * w;
            for (r, m) in rhs.iter_mut().zip(self.frame.eval_basis(p, x)) {
                *r += fx * m;
            }
        }
        let mass = self.mass(p as i64, p as i64);
        let sol = mass
            .cholesky()
            .expect("monomial mass matrix is SPD")
            .solve(&nalgebra::DVector::from_vec(rhs));
        sol.as_slice().to_vec()
    }
}

pub fn diameter(vertices: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in vertices.iter().enumerate() {
        for q in &vertices[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

/// Exact `∫_K m_γ` for `|γ| ≤ deg`, via `∫_K X^a Y^b = h²/(a+1) ∮ X^{a+1} Y^b n_x ds / h`.
pub fn monomial_integrals(vertices: &[Point], frame: &Frame, deg: usize) -> Vec<f64> {
    let n = vertices.len();
    let mut out = vec![0.0; dim(deg as i64)];
    let npts = deg / 2 + 2;
    let (t, w) = quadrature::unit_interval(npts, EdgeFamily::Gauss);
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        let d = b - a;
        // n_x ds = d_y dt
        let nx_ds = d.y;
        if nx_ds == 0.0 {
            continue;
        }
        for (ti, wi) in t.iter().zip(&w) {
            let x = a + d * *ti;
            let (u, v) = frame.local(&x);
            let pu = powers(u, deg + 1);
            let pv = powers(v, deg);
            for (k, (ea, eb)) in exponents(deg).into_iter().enumerate() {
                out[k] += wi * nx_ds * pu[ea + 1] * pv[eb] / (ea as f64 + 1.0);
            }
        }
    }
    // ∫_K X^a Y^b dx = h ∮ X^{a+1}Y^b/(a+1) n_x ds  (d/dx X^{a+1} = (a+1) X^a / h)
    out.iter_mut().for_each(|v| *v *= frame.h);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point> {
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]
    }

    #[test]
    fn dimensions_and_ordering() {
        assert_eq!(dim(0), 1);
        assert_eq!(dim(3), 10);
        assert_eq!(dim(-1), 0);
        let e = exponents(2);
        assert_eq!(e, vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for (k, (a, b)) in exponents(6).into_iter().enumerate() {
            assert_eq!(index(a, b), k);
        }
    }

    #[test]
    fn exact_integrals_on_square() {
        let sq = square();
        let s = ScaledMonomialSpace::new(0, &sq, 3);
        assert!((s.area - 1.0).abs() < 1e-15);
        assert!((s.h() - 2f64.sqrt()).abs() < 1e-15);
        // ∫ m_(2,0) = ∫ (x-1/2)^2 / h^2 = (1/12)/2
        assert!((s.integral(2, 0) - 1.0 / 24.0).abs() < 1e-15);
        assert!(s.integral(1, 0).abs() < 1e-15);
        let m = s.mass(3, 3);
        assert!(m.clone().cholesky().is_some());
        assert!((&m - m.transpose()).amax() < 1e-15);
    }

    #[test]
    fn scale_invariance_of_gram() {
        let sq = square();
        let moved: Vec<Point> = sq.iter().map(|p| p * 3.0 + Point::new(-7.0, 2.5)).collect();
        let a = ScaledMonomialSpace::new(0, &sq, 3);
        let b = ScaledMonomialSpace::new(0, &moved, 3);
        let (ma, mb) = (a.mass(3, 3) / a.area, b.mass(3, 3) / b.area);
        assert!((&ma - &mb).amax() <= 1e-12 * ma.amax());
        let (sa, sb) = (a.stiffness(3), b.stiffness(3));
        assert!((&sa - &sb).amax() <= 1e-12 * sa.amax());
    }

    #[test]
    fn laplacian_and_product() {
        // m_(2,0) - m_(0,2) is harmonic
        let mut c = vec![0.0; dim(2)];
        c[index(2, 0)] = 1.0;
        c[index(0, 2)] = -1.0;
        assert!(laplacian(&c, 0.7).iter().all(|v| v.abs() < 1e-15));
        let f = vec![1.0, 2.0, 0.0];
        let g = vec![0.0, 1.0, 1.0];
        let fg = multiply(&f, &g);
        let frame = Frame {
            center: Point::new(0.1, 0.2),
            h: 0.5,
        };
        let x = Point::new(0.3, -0.4);
        assert!((frame.eval(&fg, &x) - frame.eval(&f, &x) * frame.eval(&g, &x)).abs() < 1e-14);
    }
}
