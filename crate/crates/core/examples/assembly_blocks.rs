//! Assembling mass and stiffness per Fourier mode and inspecting the block structure.
//!
//!     cargo run --release --example assembly_blocks

use diskfem::assembly::{assemble_global, RadialCoefficient};
use diskfem::fem::RadialMesh;

fn main() -> diskfem::Result<()> {
    let mesh = RadialMesh::new(vec![0.0, 0.25, 0.5, 0.75, 1.0])?;
    let lambda = RadialCoefficient::function(|s| 1.0 + s);
    let sys = assemble_global(&mesh, 12, Some(&lambda), true)?;
    println!("{} modes, {} coefficients", sys.layout.modes().len(), sys.layout.total_len());
    println!("mode      dim   nnz(M)  nnz(A)  nnz(M_λ)");
    let nnz = |d: nalgebra::DMatrix<f64>| d.iter().filter(|v| v.abs() > 1e-15).count();
    for md in sys.layout.modes().into_iter().filter(|md| md.j == 1 && md.m % 4 == 0) {
        let weighted = sys.weighted_mass.as_ref().map(|w| nnz(w.block(md).to_dense())).unwrap_or(0);
        println!("({:2},{})  {:5}  {:7} {:7} {:9}", md.m, md.j, sys.mass.block(md).dim(), nnz(sys.mass.block(md).to_dense()), nnz(sys.stiffness.block(md).to_dense()), weighted);
    }
    // the zero-mode stiffness block, hats first then bubbles level by level
    let a = sys.stiffness.block(sys.layout.modes()[0]).to_dense();
    println!("\npattern of A for mode (0,1):");
    for i in 0..a.nrows() {
        println!("  {}", (0..a.ncols()).map(|j| if a[(i, j)].abs() > 1e-13 { '*' } else { '.' }).collect::<String>());
    }
    Ok(())
}
