//! Seeded random polygons for property checks.

use super::Point;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolygonKind {
    Triangle,
    Quad,
    Hexagon,
    /// Perturbed square with one hanging (collinear) midpoint vertex.
    HangingPentagon,
}

impl PolygonKind {
    pub const ALL: [PolygonKind; 4] = [Self::Triangle, Self::Quad, Self::Hexagon, Self::HangingPentagon];
}

/// Convex polygon with jittered angles and radii, or a hanging-node pentagon.
pub fn random_polygon<R: Rng>(rng: &mut R, kind: PolygonKind) -> Vec<Point> {
    let scale = 10f64.powf(rng.random_range(-1.5..0.5));
    let center = Point::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let n = match kind {
        PolygonKind::Triangle => 3,
        PolygonKind::Quad | PolygonKind::HangingPentagon => 4,
        PolygonKind::Hexagon => 6,
    };
    let step = 2.0 * PI / n as f64;
    let start = rng.random_range(0.0..2.0 * PI);
    let mut pts: Vec<Point> = (0..n)
        .map(|i| {
            let a = start + step * (i as f64 + rng.random_range(-0.2..0.2));
            let r = scale * rng.random_range(0.8..1.2);
            center + Point::new(a.cos(), a.sin()) * r
        })
        .collect();
    if kind == PolygonKind::HangingPentagon {
        let t = rng.random_range(0.35..0.65);
        let m = pts[0] + (pts[1] - pts[0]) * t;
        pts.insert(1, m);
    }
    pts
}

/// `count` polygons cycling through every kind.
pub fn random_polygons(seed: u64, count: usize) -> Vec<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| random_polygon(&mut rng, PolygonKind::ALL[i % 4])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signed_area(p: &[Point]) -> f64 {
        (0..p.len()).map(|i| p[i].perp(&p[(i + 1) % p.len()])).sum::<f64>() / 2.0
    }

    #[test]
    fn polygons_are_counterclockwise_and_convex() {
        for poly in random_polygons(7, 40) {
            assert!(signed_area(&poly) > 0.0);
            let n = poly.len();
            for i in 0..n {
                let (a, b, c) = (poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
                assert!((b - a).perp(&(c - b)) >= -1e-12 * (b - a).norm() * (c - b).norm());
            }
        }
        assert_eq!(random_polygons(3, 8), random_polygons(3, 8));
    }
}
