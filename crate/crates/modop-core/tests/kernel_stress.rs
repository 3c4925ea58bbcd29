//! Reconstruction-residual bounds for the Jacobi kernels over a large
//! randomized batch, the sizes the rest of the crate relies on.

use modop_core::cmatrix::CMatrix;
use modop_core::numkernel::{herm_eig, svd};
use modop_core::rng::SplitMix64;
use modop_core::tol;

fn random_matrix(n: usize, rng: &mut SplitMix64) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| rng.next_complex_gaussian())
}

#[test]
fn svd_and_eig_reconstruction_residuals_dim_up_to_24() {
    let mut rng = SplitMix64::new(0x5EED);
    let mut worst_svd = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut worst_orth = 0.0f64;
    for trial in 0..1000 {
        let n = 1 + (rng.next_below(24) as usize);
        let m = random_matrix(n, &mut rng);

        let s = svd(&m).unwrap();
        let mut us = s.u.clone();
        for j in 0..n {
            for i in 0..n {
                us[(i, j)] *= s.sigma[j];
            }
        }
        let res = us.matmul(&s.v.adjoint()).sub(&m).frobenius_norm();
        let bound = tol::fun_tol(s.sigma_max());
        assert!(
            res <= bound,
            "svd trial {trial} dim {n}: {res:.3e} > {bound:.3e}"
        );
        worst_svd = worst_svd.max(res / bound);
        let orth =
            s.u.adjoint()
                .matmul(&s.u)
                .sub(&CMatrix::identity(n))
                .frobenius_norm()
                .max(
                    s.v.adjoint()
                        .matmul(&s.v)
                        .sub(&CMatrix::identity(n))
                        .frobenius_norm(),
                );
        assert!(
            orth <= bound,
            "svd trial {trial}: orthonormality {orth:.3e}"
        );
        worst_orth = worst_orth.max(orth / bound);

        let h = m.hermitian_part();
        let e = herm_eig(&h).unwrap();
        let mut qs = e.q.clone();
        for j in 0..n {
            for i in 0..n {
                qs[(i, j)] *= e.lambda[j];
            }
        }
        let res = qs.matmul(&e.q.adjoint()).sub(&h).frobenius_norm();
        let scale = e.lambda.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        let bound = tol::fun_tol(scale);
        assert!(
            res <= bound,
            "eig trial {trial} dim {n}: {res:.3e} > {bound:.3e}"
        );
        worst_eig = worst_eig.max(res / bound);
    }
    println!(
        "worst residual / bound: svd {worst_svd:.3}, eig {worst_eig:.3}, orth {worst_orth:.3}"
    );
}
