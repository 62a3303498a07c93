//! Constrained Canham–Helfrich energy minimization on closed oriented
//! triangle meshes.
//!
//! The crate is organised by task:
//!
//! - [`mesh`], [`io`], [`shapes`]: closed oriented meshes, file formats and
//!   procedural test surfaces.
//! - [`curvature`]: cotangent mean curvature, angle-defect Gauss curvature,
//!   Helfrich and Willmore energies.
//! - [`varifold`]: oriented sample clouds, the winding-number volume
//!   representative and first variations of area and volume.
//! - [`correction`]: two-parameter bump-field flows that restore prescribed
//!   area and volume by a Newton solve with a guaranteed radius.
//! - [`biharmonic`]: clamped biharmonic graph solves and patch replacement.
//! - [`minimize`]: projected gradient descent with exact constraint
//!   restoration.
//! - [`diagnostics`]: density ratios, tilt and height excess, good points.

mod autodiff;
pub mod correction;
pub mod biharmonic;
pub mod curvature;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod mesh;
pub mod minimize;
pub mod plane;
pub mod shapes;
pub mod varifold;

pub use error::{Error, Result};
pub use mesh::{Constraints, TriMesh, Vec3};
