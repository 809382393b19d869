//! Cut-cell finite volume discretization of variable-coefficient elliptic
//! interface problems in two dimensions.

pub mod basis;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod stencil;
pub mod system;

pub use error::{Error, Result};
pub use geometry::{ImplicitFunction, Point};
pub use harness::{run_suite, GeometryName, SuiteOutput, TestConfig, TestKind};
pub use mesh::{Boundary, BoundarySpec, Domain, Mesh};
pub use system::{LinearSystem, SolveOptions, SolverKind};
