//! Helmholtz with a discontinuous coefficient and a plane-wave manufactured solution.
//!
//!     cargo run --release --example plane_wave

use diskfem::experiments::{run_plane_wave, ExperimentConfig};

fn main() -> diskfem::Result<()> {
    let mut cfg = ExperimentConfig::new("plane-wave")?;
    cfg.np = vec![20, 40, 60];
    let out = run_plane_wave(&cfg)?;
    for r in &out.convergence["convergence"] {
        println!("N_p = {:3}  dofs = {:6}  max error = {:.2e}  ({:.0} ms)", r.np, r.dofs, r.linf_error, r.wall_ms);
    }
    Ok(())
}
