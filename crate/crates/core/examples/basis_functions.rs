//! Evaluating the polynomial families and the hat/bubble functions of a mesh.
//!
//!     cargo run --release --example basis_functions

use diskfem::fem::{eval_bubble, eval_hat, RadialMesh};
use diskfem::jacobi::{eval_jacobi_all, gauss_rule, JacobiParams};
use diskfem::semiclassical::{build_semibasis, SemiParams};
use diskfem::zernike::{eval_zernike, eval_zernike_annular, AnnulusParams, ModeIndex, ZernikeIndex};

fn main() -> diskfem::Result<()> {
    // orthonormal Jacobi P^{(1,2)}_n and a Gauss rule that integrates their products exactly
    let p = JacobiParams::new(1.0, 2.0)?;
    let rule = gauss_rule(p, 6)?;
    let gram: f64 = rule.nodes.iter().zip(&rule.weights).map(|(&x, w)| w * eval_jacobi_all(p, 5, x)[5].powi(2)).sum();
    println!("Jacobi (1,2): P_0..P_5 at 0.3 = {:.4?}, ‖P_5‖² = {gram:.15}", eval_jacobi_all(p, 5, 0.3));

    // semiclassical family with weight x(1-x)(t-x)^m on (0,1)
    let q = build_semibasis(SemiParams::new(1.5, 1.0, 1.0, 3.0)?, 5)?;
    println!("semiclassical t=1.5, (1,1,3) at 0.4: {:.4?}", q.eval_all(0.4, 5));

    let mode = ModeIndex::new(2, 0)?;
    let z = ZernikeIndex::new(6, mode)?;
    println!("Zernike n=6 (m=2, sin) at (0.3, 0.4): {:.6}", eval_zernike(0.0, z, 0.3, 0.4)?);
    let ann = AnnulusParams::new(0.5)?;
    println!("annular Zernike ρ=1/2 at (0.45, 0.6): {:.6}", eval_zernike_annular(ann, 0.0, 0.0, z, 0.45, 0.6)?);

    // FEM functions on a three-cell disk mesh, sampled along the x axis
    let mesh = RadialMesh::new(vec![0.0, 0.3, 0.7, 1.0])?;
    let m0 = ModeIndex::new(0, 1)?;
    println!("\n    r      hat@0.3   hat@0.7   bubble(cell 1)");
    for i in 0..=10 {
        let r = i as f64 / 10.0;
        let b = eval_bubble(&mesh, 1, ZernikeIndex::new(0, m0)?, r, 0.0)?;
        println!("  {r:.1}  {:9.5} {:9.5} {:9.5}", eval_hat(&mesh, 1, m0, r, 0.0), eval_hat(&mesh, 2, m0, r, 0.0), b);
    }
    Ok(())
}
