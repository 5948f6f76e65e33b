//! Reverse Cholesky and UL on B³-arrowhead blocks: linear cost in the number of cells.
//!
//!     cargo run --release --example factorization

use diskfem::assembly::assemble_global;
use diskfem::fem::RadialMesh;
use diskfem::linalg::{reverse_cholesky, ul_factorize};
use std::time::Instant;

fn main() -> diskfem::Result<()> {
    let np = 30;
    println!("cells    dim   chol_ms   ul_ms   residual(UL)");
    for cells in [20, 40, 80, 160] {
        let sys = assemble_global(&RadialMesh::uniform(cells)?, np, None, true)?;
        let md = sys.layout.modes()[0];
        let (a, m) = (sys.stiffness.block(md), sys.mass.block(md));
        // indefinite Helmholtz block A - k² M
        let h = a.combine(1.0, m, -2500.0)?;
        let t = Instant::now();
        let chol = reverse_cholesky(a)?;
        let chol_ms = t.elapsed().as_secs_f64() * 1e3;
        let t = Instant::now();
        let ul = ul_factorize(&h)?;
        let ul_ms = t.elapsed().as_secs_f64() * 1e3;
        let b = vec![1.0; h.dim()];
        let x = ul.solve(&b)?;
        let res = h.matvec(&x).iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let _ = chol.solve(&b)?;
        println!("{cells:5}  {:5}  {chol_ms:8.3}  {ul_ms:6.3}   {res:.1e}", h.dim());
    }
    Ok(())
}
