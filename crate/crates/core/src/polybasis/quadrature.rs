//! Gauss-type rules on intervals, triangles and simple polygons.

use crate::mesh::Point;
use std::f64::consts::PI;

/// Points and positive weights, with the polynomial degree integrated exactly.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFamily {
    Gauss,
    GaussLobatto,
}

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // endpoint value of P_n'
        let nf = n as f64;
        let s = if x > 0.0 {
            1.0
        } else if n.is_multiple_of(2) {
            -1.0
        } else {
            1.0
        };
        s * nf * (nf + 1.0) / 2.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Lobatto-Legendre nodes and weights on [-1, 1], ascending, endpoints included.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "gauss-lobatto rule needs at least two points");
    let m = n - 1;
    let mf = m as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    x[0] = -1.0;
    x[m] = 1.0;
    // interior nodes are roots of P_m'; Newton on P_m' using the Legendre ODE
    for i in 1..m {
        let mut z = -(PI * i as f64 / mf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, z);
            // (1 - z^2) P'' = 2 z P' - m(m+1) P
            let d2p = (2.0 * z * dp - mf * (mf + 1.0) * p) / (1.0 - z * z);
            let dz = dp / d2p;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
    }
    for i in 0..n {
        let (p, _) = legendre(m, x[i]);
        w[i] = 2.0 / (mf * (mf + 1.0) * p * p);
    }
    // symmetrize against round-off
    for i in 0..n / 2 {
        let a = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -a;
        x[n - 1 - i] = a;
        let ww = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = ww;
        w[n - 1 - i] = ww;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Rule on the unit interval [0, 1].
pub fn unit_interval(n: usize, family: EdgeFamily) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = match family {
        EdgeFamily::Gauss => gauss_legendre(n),
        EdgeFamily::GaussLobatto => gauss_lobatto(n),
    };
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
}

/// Rule on the segment a-b with `n_points` nodes, ordered from a to b.
pub fn edge_quadrature(a: &Point, b: &Point, n_points: usize, family: EdgeFamily) -> QuadratureRule {
    let (t, w) = unit_interval(n_points, family);
    let len = (b - a).norm();
    QuadratureRule {
        points: t.iter().map(|s| a + (b - a) * *s).collect(),
        weights: w.iter().map(|v| v * len).collect(),
        exactness: match family {
            EdgeFamily::Gauss => 2 * n_points - 1,
            EdgeFamily::GaussLobatto => 2 * n_points - 3,
        },
    }
}

/// Collapsed-tensor Gauss rule on a triangle, exact for the given degree.
pub fn triangle_quadrature(a: &Point, b: &Point, c: &Point, degree: usize) -> QuadratureRule {
    let n = degree / 2 + 1;
    let (t, w) = unit_interval(n, EdgeFamily::Gauss);
    // one extra point in the collapsed direction for the Jacobian factor s
    let ns = degree.div_ceil(2) + 1;
    let (s, ws) = unit_interval(ns, EdgeFamily::Gauss);
    let det = ((b - a).x * (c - a).y - (b - a).y * (c - a).x).abs();
    let mut points = Vec::with_capacity(n * ns);
    let mut weights = Vec::with_capacity(n * ns);
    for (si, wsi) in s.iter().zip(&ws) {
        for (ti, wti) in t.iter().zip(&w) {
            // x = a + s (b - a) + s t (c - b)
            points.push(a + (b - a) * *si + (c - b) * (si * ti));
            weights.push(wsi * wti * si * det);
        }
    }
    QuadratureRule {
        points,
        weights,
        exactness: degree,
    }
}

/// Triangle rule resolving a point singularity at vertex `a` by geometric
/// grading of the collapsed coordinate.
pub fn graded_triangle_quadrature(a: &Point, b: &Point, c: &Point, order: usize, levels: usize, ratio: f64) -> QuadratureRule {
    let (t, w) = unit_interval(order, EdgeFamily::Gauss);
    // the angular factor of a radial singularity is analytic but not polynomial
    let (ta, wa) = unit_interval(2 * order, EdgeFamily::Gauss);
    let det = ((b - a).x * (c - a).y - (b - a).y * (c - a).x).abs();
    let mut breaks = vec![1.0];
    let mut r = 1.0;
    for _ in 0..levels {
        r *= ratio;
        breaks.push(r);
    }
    breaks.push(0.0);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for k in 0..breaks.len() - 1 {
        let (hi, lo) = (breaks[k], breaks[k + 1]);
        for (si, wsi) in t.iter().zip(&w) {
            let s = lo + (hi - lo) * si;
            let ws = wsi * (hi - lo);
            for (ti, wti) in ta.iter().zip(&wa) {
                points.push(a + (b - a) * s + (c - b) * (s * ti));
                weights.push(ws * wti * s * det);
            }
        }
    }
    QuadratureRule {
        points,
        weights,
        exactness: 2 * order - 2,
    }
}

pub(crate) fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        * 0.5
}

pub(crate) fn area_centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut a = 0.0;
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let cr = p.x * q.y - q.x * p.y;
        a += cr;
        cx += (p.x + q.x) * cr;
        cy += (p.y + q.y) * cr;
    }
    Point::new(cx / (3.0 * a), cy / (3.0 * a))
}

/// Fan triangulation from `center`, or `None` if some fan triangle is not
/// positively oriented.
pub(crate) fn fan_triangles(poly: &[Point], center: &Point) -> Option<Vec<[Point; 3]>> {
    let n = poly.len();
    let scale = signed_area(poly).abs();
    let mut tris = Vec::with_capacity(n);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let a = 0.5 * ((p - center).x * (q - center).y - (p - center).y * (q - center).x);
        if a <= 1e-14 * scale {
            return None;
        }
        tris.push([*center, p, q]);
    }
    Some(tris)
}

/// Ear-clipping triangulation of a simple CCW polygon.
pub(crate) fn ear_clip(poly: &[Point]) -> Vec<[Point; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::new();
    let cross = |o: &Point, a: &Point, b: &Point| (a - o).x * (b - o).y - (a - o).y * (b - o).x;
    let scale = signed_area(poly).abs();
    let mut guard = 0;
    while idx.len() > 3 && guard < 10 * poly.len() * poly.len() {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (i0, i1, i2) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[i0], poly[i1], poly[i2]);
            if cross(&a, &b, &c) <= 1e-14 * scale {
                continue;
            }
            let contains = idx.iter().any(|&j| {
                if j == i0 || j == i1 || j == i2 {
                    return false;
                }
                let p = poly[j];
                cross(&a, &b, &p) >= 0.0 && cross(&b, &c, &p) >= 0.0 && cross(&c, &a, &p) >= 0.0
            });
            if contains {
                continue;
            }
            tris.push([a, b, c]);
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            // only collinear remnants left
            break;
        }
    }
    if idx.len() == 3 {
        let (a, b, c) = (poly[idx[0]], poly[idx[1]], poly[idx[2]]);
        if cross(&a, &b, &c) > 1e-14 * scale {
            tris.push([a, b, c]);
        }
    }
    tris
}

/// Triangulation used for quadrature: centroid fan when valid, ear clipping otherwise.
pub fn triangulate(poly: &[Point]) -> Vec<[Point; 3]> {
    let c = area_centroid(poly);
    fan_triangles(poly, &c).unwrap_or_else(|| ear_clip(poly))
}

/// Rule exact up to `degree` on a simple CCW polygon.
pub fn polygon_quadrature(poly: &[Point], degree: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for [a, b, c] in triangulate(poly) {
        let r = triangle_quadrature(&a, &b, &c, degree);
        points.extend(r.points);
        weights.extend(r.weights);
    }
    QuadratureRule {
        points,
        weights,
        exactness: degree,
    }
}

/// Polygon rule that grades towards `singular` when it is a polygon vertex,
/// and otherwise refines the fan once before applying a degree-`degree` rule.
pub fn polygon_error_quadrature(poly: &[Point], degree: usize, singular: Option<&Point>) -> QuadratureRule {
    let tris = triangulate(poly);
    let diam = poly
        .iter()
        .flat_map(|p| poly.iter().map(move |q| (p - q).norm()))
        .fold(0.0, f64::max);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for [a, b, c] in tris {
        let tri = [a, b, c];
        let hit = singular.and_then(|s| tri.iter().position(|v| (v - s).norm() <= 1e-12 * diam));
        let r = match hit {
            Some(k) => {
                let (p, q, r) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                graded_triangle_quadrature(&p, &q, &r, (degree / 2 + 2).max(10), 48, 0.5)
            }
            None => {
                // one level of midpoint subdivision
                let (ab, bc, ca) = ((a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5);
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for [x, y, z] in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
                    let r = triangle_quadrature(&x, &y, &z, degree);
                    pts.extend(r.points);
                    wts.extend(r.weights);
                }
                QuadratureRule {
                    points: pts,
                    weights: wts,
                    exactness: degree,
                }
            }
        };
        points.extend(r.points);
        weights.extend(r.weights);
    }
    QuadratureRule {
        points,
        weights,
        exactness: degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn gauss_two_point_on_unit_edge() {
        let r = edge_quadrature(&p(0.0, 0.0), &p(1.0, 0.0), 2, EdgeFamily::Gauss);
        let d = 1.0 / (2.0 * 3f64.sqrt());
        assert!((r.points[0].x - (0.5 - d)).abs() < 1e-15);
        assert!((r.points[1].x - (0.5 + d)).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15 && (r.weights[1] - 0.5).abs() < 1e-15);
        let i = r.integrate(|x| x.x.powi(3));
        assert!((i - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lobatto_three_points_on_length_two_edge() {
        let r = edge_quadrature(&p(0.0, 0.0), &p(2.0, 0.0), 3, EdgeFamily::GaussLobatto);
        let xs: Vec<f64> = r.points.iter().map(|q| q.x).collect();
        assert!((xs[0]).abs() < 1e-15 && (xs[1] - 1.0).abs() < 1e-15 && (xs[2] - 2.0).abs() < 1e-15);
        for (w, e) in r.weights.iter().zip([1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0]) {
            assert!((w - e).abs() < 1e-14);
        }
    }

    #[test]
    fn interval_rules_are_exact_to_their_degree() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "gauss n={n} k={k}");
            }
        }
        for n in 2..12 {
            let (x, w) = gauss_lobatto(n);
            for k in 0..=2 * n - 3 {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "lobatto n={n} k={k}");
            }
        }
    }

    #[test]
    fn unit_square_moments() {
        let sq = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let r = polygon_quadrature(&sq, 2);
        assert!((r.integrate(|x| x.x * x.x) - 1.0 / 3.0).abs() < 1e-14);
        let r = polygon_quadrature(&sq, 6);
        assert!((r.integrate(|x| (x.x * x.y).powi(3)) - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn nonconvex_hexagon_area_by_ear_clipping() {
        let l = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(-1.0, 1.0), p(-1.0, -1.0), p(0.0, -1.0)];
        let r = polygon_quadrature(&l, 0);
        assert!((r.total_weight() - 3.0).abs() < 1e-13);
        assert!(r.weights.iter().all(|w| *w > 0.0));
        // ∫ x over the L-shape: 2 * (1/2) * ... by decomposition into unit squares
        let exact = 0.5 + -0.5 + -0.5;
        assert!((r.integrate(|q| q.x) - exact).abs() < 1e-13);
    }

    #[test]
    fn graded_rule_integrates_corner_singularity() {
        // ∫ over triangle (0,0),(1,0),(0,1) of r^{-2/3}: polar integral
        // ∫_0^{π/2} ∫_0^{1/(cos t + sin t)} r^{1/3} dr dt
        let r = graded_triangle_quadrature(&p(0.0, 0.0), &p(1.0, 0.0), &p(0.0, 1.0), 10, 48, 0.5);
        let val = r.integrate(|q| q.norm().powf(-2.0 / 3.0));
        let (t, w) = unit_interval(40, EdgeFamily::Gauss);
        let exact: f64 = t
            .iter()
            .zip(&w)
            .map(|(t, w)| {
                let th = t * std::f64::consts::FRAC_PI_2;
                let rmax = 1.0 / (th.cos() + th.sin());
                w * std::f64::consts::FRAC_PI_2 * 0.75 * rmax.powf(4.0 / 3.0)
            })
            .sum();
        assert!((val - exact).abs() < 1e-13 * exact, "{val} vs {exact}");
    }
}
