//! Poisson on the unit disk with a two-cell mesh: `-Δu = f`, `u = (1 - r²) cos(3θ) r³`.
//!
//!     cargo run --release --example poisson_disk

use diskfem::experiments::{linf_error, solve_rotational, Method, RotationalProblem};
use diskfem::fem::{AnalysisOptions, RadialMesh};

fn main() -> diskfem::Result<()> {
    let mesh = RadialMesh::new(vec![0.0, 0.5, 1.0])?;
    // u = (1 - r²) Re (x + iy)³, so Δu = -16 Re (x + iy)³
    let cube = |x: f64, y: f64| x * x * x - 3.0 * x * y * y;
    let exact = move |x: f64, y: f64| (1.0 - x * x - y * y) * cube(x, y);
    let rhs = move |x: f64, y: f64| 16.0 * cube(x, y);
    for np in [4, 6, 8] {
        let sol = solve_rotational(&RotationalProblem {
            mesh: &mesh,
            np,
            diffusion: 1.0,
            lambda: None,
            rhs: &rhs,
            analysis: AnalysisOptions::default(),
            method: Method::Cholesky,
            modes: None,
        })?;
        let err = linf_error(&sol.field.to_discontinuous()?, &exact, np)?;
        println!("N_p = {np:2}  dofs = {:4}  max error = {err:.2e}", sol.field.layout.total_len());
    }
    Ok(())
}
