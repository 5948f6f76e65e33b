//! `-Δu - k² x u = f` on an annulus: the x factor couples neighbouring Fourier modes, so
//! the system is solved as one sparse matrix.
//!
//!     cargo run --release --example anisotropic

use diskfem::experiments::solve_anisotropic;
use diskfem::fem::RadialMesh;

fn main() -> diskfem::Result<()> {
    let mesh = RadialMesh::new(vec![0.2, 0.5, 0.75, 1.0])?;
    let rhs = |x: f64, y: f64| (4.0 * x).sin() + y * y;
    let (coarse, _) = solve_anisotropic(&mesh, 16, -100.0, &rhs)?;
    let (fine, res) = solve_anisotropic(&mesh, 24, -100.0, &rhs)?;
    println!("relative residual at N_p = 24: {res:.1e}");
    let pts = [(0.3, 0.0), (0.0, 0.6), (-0.9, 0.1)];
    let (a, b) = (coarse.synthesize(&pts)?, fine.synthesize(&pts)?);
    for ((p, u), v) in pts.iter().zip(a).zip(b) {
        println!("u{p:?}: N_p=16 {u:+.10}  N_p=24 {v:+.10}");
    }
    Ok(())
}
