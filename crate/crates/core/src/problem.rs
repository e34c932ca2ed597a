//! Builtin problems: load, exact solution and its gradient, initial mesh.

use crate::error::{Result, VemError};
use crate::mesh::{Point, PolygonalMesh};
use std::f64::consts::PI;

type Scalar = Box<dyn Fn(&Point) -> f64 + Send + Sync>;
type Vector = Box<dyn Fn(&Point) -> [f64; 2] + Send + Sync>;

pub struct Problem {
    pub name: String,
    pub mesh: PolygonalMesh,
    pub f: Scalar,
    pub u: Scalar,
    pub grad: Vector,
    /// Point where the gradient is singular (graded error quadrature there).
    pub singular: Option<Point>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("cells", &self.mesh.n_cells())
            .finish()
    }
}

/// Polar angle in `[-π/2, 3π/2)`; the cut lies along the removed quadrant.
fn lshape_angle(x: &Point) -> f64 {
    let t = x.y.atan2(x.x);
    if t < -0.5 * PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// `u = r^{2/3} sin(2θ/3)`.
pub fn lshape_solution(x: &Point) -> f64 {
    let r = x.norm();
    if r == 0.0 {
        return 0.0;
    }
    r.powf(2.0 / 3.0) * (2.0 * lshape_angle(x) / 3.0).sin()
}

pub fn lshape_gradient(x: &Point) -> [f64; 2] {
    let r = x.norm();
    let t = lshape_angle(x);
    let c = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
    [-c * (t / 3.0).sin(), c * (t / 3.0).cos()]
}

fn cpow(re: f64, im: f64, k: usize) -> (f64, f64) {
    let (mut a, mut b) = (1.0, 0.0);
    for _ in 0..k {
        (a, b) = (a * re - b * im, a * im + b * re);
    }
    (a, b)
}

impl Problem {
    /// `lshape-r23`, `patch-q{k}` or `square-sin`.
    pub fn builtin(name: &str) -> Result<Self> {
        if name == "lshape-r23" {
            return Ok(Self {
                name: name.into(),
                mesh: PolygonalMesh::lshape(2),
                f: Box::new(|_| 0.0),
                u: Box::new(lshape_solution),
                grad: Box::new(lshape_gradient),
                singular: Some(Point::new(0.0, 0.0)),
            });
        }
        if name == "square-sin" {
            return Ok(Self {
                name: name.into(),
                mesh: PolygonalMesh::square(4),
                f: Box::new(|x| 2.0 * PI * PI * (PI * x.x).sin() * (PI * x.y).sin()),
                u: Box::new(|x| (PI * x.x).sin() * (PI * x.y).sin()),
                grad: Box::new(|x| [PI * (PI * x.x).cos() * (PI * x.y).sin(), PI * (PI * x.x).sin() * (PI * x.y).cos()]),
                singular: None,
            });
        }
        if let Some(k) = name.strip_prefix("patch-q") {
            let k: usize = k.parse().map_err(|_| VemError::Config(format!("bad patch degree in '{name}'")))?;
            if k == 0 {
                return Err(VemError::Config("patch degree must be at least 1".into()));
            }
            // u = Re(1 + z + w z^k), w = 1 + i/2
            let (wr, wi) = (1.0, 0.5);
            return Ok(Self {
                name: name.into(),
                mesh: PolygonalMesh::square(4),
                f: Box::new(|_| 0.0),
                u: Box::new(move |x| {
                    let (a, b) = cpow(x.x, x.y, k);
                    1.0 + x.x + wr * a - wi * b
                }),
                grad: Box::new(move |x| {
                    let (a, b) = cpow(x.x, x.y, k - 1);
                    let kf = k as f64;
                    let (dr, di) = (1.0 + kf * (wr * a - wi * b), kf * (wr * b + wi * a));
                    [dr, -di]
                }),
                singular: None,
            });
        }
        Err(VemError::Config(format!("unknown problem '{name}'")))
    }
}
