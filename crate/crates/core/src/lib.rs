//! Sparse hierarchical hp-FEM for Helmholtz-type equations on disks, annuli and cylinders.
//!
//! The continuous basis on a mesh of concentric cells is built from hat functions
//! (supported on two neighbouring cells) and bubble functions (weighted Zernike or
//! Zernike annular polynomials supported on a single cell). Every rotationally invariant
//! operator decouples into one block per Fourier mode, each block is a sparse
//! B³-arrowhead matrix, and all blocks are assembled from banded connection matrices
//! between orthogonal polynomial families instead of quadrature.
//!
//! Layering, bottom to top:
//!
//! * [`jacobi`]: classical Jacobi and Chebyshev machinery, Gauss rules, Clenshaw.
//! * [`semiclassical`]: semiclassical Jacobi families on (0,1) and their raising matrices.
//! * [`zernike`]: Zernike and Zernike annular polynomials, Laplacian and r² matrices.
//! * [`fem`]: meshes, hats and bubbles, DOF layout, analysis and synthesis.
//! * [`assembly`]: mass, stiffness, weighted mass and load matrices per Fourier mode.
//! * [`linalg`]: B³-arrowhead storage, reverse Cholesky, UL, sparse LU.
//! * [`cylinder`]: interval p-FEM basis and the ADI Sylvester solver on cylinders.
//! * [`experiments`]: drivers for the model problems and CSV/JSON output.

pub mod assembly;
pub mod banded;
pub mod cylinder;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod jacobi;
pub mod linalg;
pub mod semiclassical;
pub mod zernike;

pub use error::{Error, Result};
