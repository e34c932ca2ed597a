//! hp-adaptive virtual element solver for the Poisson problem on polygonal
//! meshes, with hybridized equilibrated-flux a posteriori error estimators.

pub mod adapt;
pub mod cli;
pub mod error;
pub mod flux;
pub mod mesh;
pub mod mixed;
pub mod polybasis;
pub mod primal;
pub mod problem;
pub mod sparse;
pub mod verify;

pub use error::{Result, VemError};
pub use mesh::{Point, PolygonalMesh};
