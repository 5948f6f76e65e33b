//! `-Δu = r^{-3/2}`: a single cell converges algebraically, a mesh graded towards the
//! origin recovers fast convergence at the same number of radial unknowns.
//!
//!     cargo run --release --example singular_source

use diskfem::experiments::solve_singular;
use diskfem::fem::RadialMesh;

fn main() -> diskfem::Result<()> {
    println!(" N   graded (N_p=12)        single cell");
    for big_n in 1..=6 {
        let (_, e_graded, dofs) = solve_singular(&RadialMesh::graded(big_n)?, 12)?;
        let (_, e_single, _) = solve_singular(&RadialMesh::new(vec![0.0, 1.0])?, 2 * dofs)?;
        println!("{big_n:2}   {e_graded:.2e} ({dofs:3} dofs)   {e_single:.2e}");
    }
    Ok(())
}
