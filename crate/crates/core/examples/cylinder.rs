//! Screened Poisson on a cylinder: disk FEM in (r, θ) times interval FEM in z, solved
//! mode by mode with ADI.
//!
//!     cargo run --release --example cylinder

use diskfem::experiments::{run_cylinder, ExperimentConfig};

fn main() -> diskfem::Result<()> {
    let mut cfg = ExperimentConfig::new("cylinder")?;
    cfg.np = vec![8, 12, 16];
    cfg.set("np_discontinuous", "0")?;
    let out = run_cylinder(&cfg)?;
    for (r, adi) in out.convergence["convergence"].iter().zip(&out.adi) {
        println!("N_p = {:2}  dofs = {:6}  max error = {:.2e}  ADI steps mean {:.1} max {}", r.np, r.dofs, r.linf_error, adi.mean_l_max, adi.max_l_max);
    }
    Ok(())
}
