//! Indefinite Helmholtz with discontinuous wavenumber and data, solved by UL;
//! errors are measured against a higher-degree reference.
//!
//!     cargo run --release --example high_frequency

use diskfem::experiments::{run_high_frequency, ExperimentConfig};

fn main() -> diskfem::Result<()> {
    let mut cfg = ExperimentConfig::new("high-frequency")?;
    cfg.np = vec![20, 40];
    cfg.set("np_ref", "60")?;
    let out = run_high_frequency(&cfg)?;
    for r in &out.convergence["convergence"] {
        println!("N_p = {:3}  difference to N_p = 60: {:.2e}", r.np, r.linf_error);
    }
    Ok(())
}
