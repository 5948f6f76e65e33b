//! Time-dependent Schrödinger equation for the 2D harmonic oscillator with
//! Crank–Nicolson, starting from an eigenstate.
//!
//!     cargo run --release --example schrodinger

use diskfem::experiments::{linf_error, oscillator_energy, oscillator_mesh, oscillator_state, Oscillator};
use num_complex::Complex64;

fn main() -> diskfem::Result<()> {
    let (n, m, np) = (1, 2, 30);
    let psi = move |x: f64, y: f64| oscillator_state(n, m, x, y);
    let osc = Oscillator::new(&oscillator_mesh(8.0, 5)?, np)?;
    let u0 = osc.project(&psi)?;
    let energy = oscillator_energy(n, m);
    println!("E = {energy}, eigen-residual of the projection: {:.1e}", osc.eigen_residual(&u0, energy));
    let t_final = 0.5;
    for steps in [25, 50, 100] {
        let (u, drift) = osc.crank_nicolson(&u0, t_final / steps as f64, steps)?;
        let phase = Complex64::new(0.0, -energy * t_final).exp();
        let err = linf_error(&u.to_discontinuous()?, &|x, y| phase * psi(x, y), np)?;
        println!("{steps:4} steps: max error {err:.2e}, norm drift {:.1e}", drift.last().unwrap());
    }
    Ok(())
}
