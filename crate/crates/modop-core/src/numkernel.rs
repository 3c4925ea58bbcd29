//! Numerical primitives on plain complex matrices.
//!
//! Self-contained Jacobi kernels: a cyclic complex Jacobi eigensolver for
//! Hermitian matrices and a one-sided Jacobi SVD. Both apply only plane
//! rotations between columns with a nonzero coupling, so block-diagonal
//! inputs stay block-diagonal exactly — the property `unembed` relies on.

use crate::cmatrix::{CMatrix, C64, ONE};
use crate::error::{Error, Result};
use crate::tol;

/// Sweep cap for both Jacobi iterations.
const MAX_SWEEPS: usize = 60;

/// Hermitian eigendecomposition M = Q · diag(lambda) · Q†.
#[derive(Debug, Clone)]
pub struct EigResult {
    /// Unitary matrix of eigenvectors (columns).
    pub q: CMatrix,
    /// Real eigenvalues, ascending.
    pub lambda: Vec<f64>,
}

/// Singular value decomposition M = U · diag(sigma) · V†.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// rows(M) × min-side matrix with orthonormal columns.
    pub u: CMatrix,
    /// Singular values, descending.
    pub sigma: Vec<f64>,
    /// cols(M) × min-side matrix with orthonormal columns.
    pub v: CMatrix,
}

impl SvdResult {
    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Numerical rank at the shared cutoff, scaled by sigma_max.
    pub fn rank(&self) -> usize {
        numeric_rank(&self.sigma, self.sigma_max())
    }
}

/// Jacobi rotation parameters (c real, s complex) diagonalizing the
/// Hermitian 2×2 block [[alpha, beta], [conj(beta), gamma]].
fn rotation(alpha: f64, gamma: f64, beta: C64) -> (f64, C64) {
    let absb = beta.norm();
    debug_assert!(absb > 0.0);
    let phase = beta / absb;
    let theta = (gamma - alpha) / (2.0 * absb);
    // small root of t^2 - 2·theta·t - 1 = 0, the annihilation equation for
    // the J = [[c, -s̄], [s, c]] convention
    let t = if theta >= 0.0 {
        -1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = phase.conj() * (t * c);
    (c, s)
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// The input is symmetrized to (M + M†)/2 before factoring; inputs whose
/// Hermitian deviation exceeds the gate are rejected.
pub fn herm_eig(m: &CMatrix) -> Result<EigResult> {
    assert!(m.is_square(), "herm_eig needs a square matrix");
    let n = m.rows();
    let scale = m.frobenius_norm();
    let deviation = m.hermitian_deviation();
    let gate = tol::herm_tol(scale);
    if deviation > gate {
        return Err(Error::NotHermitian {
            residual: deviation,
            tol: gate,
        });
    }

    let mut a = m.hermitian_part();
    let mut q = CMatrix::identity(n);
    if n <= 1 {
        let lambda = if n == 1 { vec![a[(0, 0)].re] } else { vec![] };
        return Ok(EigResult { q, lambda });
    }

    let off_target = (n * n) as f64 * tol::MACHINE_EPS * scale;
    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for qq in (p + 1)..n {
                off += a[(p, qq)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= off_target {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for qq in (p + 1)..n {
                let beta = a[(p, qq)];
                if beta.norm_sqr() == 0.0 {
                    continue;
                }
                let (c, s) = rotation(a[(p, p)].re, a[(qq, qq)].re, beta);
                a.rotate_columns(p, qq, c, s);
                a.rotate_rows(p, qq, c, s);
                q.rotate_columns(p, qq, c, s);
                // the rotation zeroes this entry by construction
                a[(p, qq)] = C64::new(0.0, 0.0);
                a[(qq, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(qq, qq)] = C64::new(a[(qq, qq)].re, 0.0);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .re
            .partial_cmp(&a[(j, j)].re)
            .unwrap()
            .then(i.cmp(&j))
    });
    let lambda: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let q_sorted = CMatrix::from_fn(n, n, |i, j| q[(i, order[j])]);
    Ok(EigResult {
        q: q_sorted,
        lambda,
    })
}

/// One-sided Jacobi SVD.
///
/// Works on columns: rotations orthogonalize column pairs of a working copy
/// W while accumulating V, then sigma_j = ‖w_j‖ and u_j = w_j / sigma_j.
/// Columns whose norm falls below max(rows, cols)·eps·sigma_max are treated
/// as zero and U is completed to orthonormal columns from coordinate vectors.
pub fn svd(m: &CMatrix) -> Result<SvdResult> {
    if m.rows() < m.cols() {
        let r = svd(&m.adjoint())?;
        return Ok(SvdResult {
            u: r.v,
            sigma: r.sigma,
            v: r.u,
        });
    }
    let rows = m.rows();
    let n = m.cols();
    if n == 0 {
        return Ok(SvdResult {
            u: CMatrix::zeros(rows, 0),
            sigma: vec![],
            v: CMatrix::zeros(0, 0),
        });
    }

    let mut w = m.clone();
    let mut v = CMatrix::identity(n);
    if m.frobenius_norm() == 0.0 {
        let u = complete_columns(CMatrix::zeros(rows, n), 0);
        return Ok(SvdResult {
            u,
            sigma: vec![0.0; n],
            v,
        });
    }

    let pair_gate = n as f64 * tol::MACHINE_EPS;
    // columns this small are zeroed at the sigma pass; rotating them only
    // churns subnormals
    let column_floor = (tol::MACHINE_EPS * m.frobenius_norm()).powi(2);
    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = C64::new(0.0, 0.0);
                for i in 0..rows {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    alpha += wp.norm_sqr();
                    beta += wq.norm_sqr();
                    gamma += wp.conj() * wq;
                }
                if alpha <= column_floor || beta <= column_floor {
                    continue;
                }
                let coupling = gamma.norm();
                if coupling == 0.0 || coupling <= pair_gate * (alpha * beta).sqrt() {
                    continue;
                }
                let (c, s) = rotation(alpha, beta, gamma);
                w.rotate_columns(p, q, c, s);
                v.rotate_columns(p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| (0..rows).map(|i| w[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let sigma_max = norms[order[0]];
    let zero_gate = rows.max(n) as f64 * tol::MACHINE_EPS * sigma_max;
    let mut sigma = Vec::with_capacity(n);
    let mut u = CMatrix::zeros(rows, n);
    let mut kept = 0usize;
    for (slot, &j) in order.iter().enumerate() {
        if norms[j] > zero_gate {
            sigma.push(norms[j]);
            let inv = 1.0 / norms[j];
            for i in 0..rows {
                u[(i, slot)] = w[(i, j)] * inv;
            }
            kept = slot + 1;
        } else {
            sigma.push(0.0);
        }
    }
    let v_sorted = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    let u = complete_columns(u, kept);
    Ok(SvdResult {
        u,
        sigma,
        v: v_sorted,
    })
}

/// Fills columns `kept..` of `u` with an orthonormal completion drawn from
/// coordinate vectors (two-pass Gram-Schmidt, largest residual first).
/// Coordinate vectors keep any block support the existing columns have.
fn complete_columns(mut u: CMatrix, kept: usize) -> CMatrix {
    let rows = u.rows();
    let total = u.cols();
    for filled in kept..total {
        let mut best: Option<(f64, Vec<C64>)> = None;
        for candidate in 0..rows {
            let mut r: Vec<C64> = (0..rows)
                .map(|i| {
                    if i == candidate {
                        ONE
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect();
            for _pass in 0..2 {
                for j in 0..filled {
                    let mut proj = C64::new(0.0, 0.0);
                    for i in 0..rows {
                        proj += u[(i, j)].conj() * r[i];
                    }
                    for i in 0..rows {
                        r[i] -= u[(i, j)] * proj;
                    }
                }
            }
            let norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, r));
            }
        }
        let (norm, r) = best.expect("rows is positive");
        assert!(norm > 1e-6, "failed to complete orthonormal columns");
        let inv = 1.0 / norm;
        for i in 0..rows {
            u[(i, filled)] = r[i] * inv;
        }
    }
    u
}

/// Which PSD power to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdPower {
    /// p = 1/2
    Sqrt,
    /// p = −1/2
    InvSqrt,
}

/// Functional calculus M^p for Hermitian PSD M, p ∈ {1/2, −1/2}.
///
/// Eigenvalues within psd_tol below zero are clamped to zero; anything more
/// negative is `NotPositive`. For the inverse root, eigenvalues below the
/// singularity cutoff raise `SingularMatrix`.
pub fn psd_power(m: &CMatrix, power: PsdPower) -> Result<CMatrix> {
    let eig = herm_eig(m)?;
    let n = m.rows();
    let scale = eig.lambda.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
    let clamp = tol::psd_tol(scale);
    let sing_cutoff = tol::rank_cutoff(n.max(1), 1.0 + scale);
    let mut f = Vec::with_capacity(n);
    for &l in &eig.lambda {
        if l < -clamp {
            return Err(Error::NotPositive {
                eigenvalue: l,
                tol: clamp,
            });
        }
        let lc = l.max(0.0);
        match power {
            PsdPower::Sqrt => f.push(lc.sqrt()),
            PsdPower::InvSqrt => {
                if lc < sing_cutoff {
                    return Err(Error::SingularMatrix {
                        eigenvalue: lc,
                        cutoff: sing_cutoff,
                    });
                }
                f.push(1.0 / lc.sqrt());
            }
        }
    }
    // Q f(Λ) Q†, re-hermitized to keep the output exactly selfadjoint.
    let mut scaled = eig.q.clone();
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= f[j];
        }
    }
    Ok(scaled.matmul(&eig.q.adjoint()).hermitian_part())
}

/// Count of singular values above the shared cutoff.
///
/// `sigma` must be descending; `scale` is sigma_max for a bare matrix, or a
/// caller-chosen norm scale for composite objects.
pub fn numeric_rank(sigma: &[f64], scale: f64) -> usize {
    let cutoff = tol::rank_cutoff(sigma.len(), scale);
    sigma.iter().take_while(|&&s| s > cutoff).count()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    svd(m).expect("jacobi svd did not converge").sigma_max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(n: usize, rng: &mut SplitMix64) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| rng.next_complex_gaussian())
    }

    fn reconstruct_eig(e: &EigResult) -> CMatrix {
        let n = e.q.rows();
        let mut scaled = e.q.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] *= e.lambda[j];
            }
        }
        scaled.matmul(&e.q.adjoint())
    }

    fn reconstruct_svd(s: &SvdResult) -> CMatrix {
        let mut us = s.u.clone();
        for j in 0..s.sigma.len() {
            for i in 0..us.rows() {
                us[(i, j)] *= s.sigma[j];
            }
        }
        us.matmul(&s.v.adjoint())
    }

    #[test]
    fn eig_identity() {
        let e = herm_eig(&CMatrix::identity(4)).unwrap();
        assert!(e.lambda.iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn eig_pauli_x() {
        let m = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ]);
        let e = herm_eig(&m).unwrap();
        assert!((e.lambda[0] + 1.0).abs() < 1e-14);
        assert!((e.lambda[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_degenerate_diagonal() {
        let m = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c([5.0, 2.0, 2.0][i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let e = herm_eig(&m).unwrap();
        assert_eq!(e.lambda, vec![2.0, 2.0, 5.0]);
        // any orthonormal basis for the degenerate eigenspace is fine;
        // only the reconstruction matters
        let res = reconstruct_eig(&e).sub(&m).frobenius_norm();
        assert!(res < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ]);
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn svd_zero_and_nilpotent() {
        let z = CMatrix::zeros(3, 3);
        let s = svd(&z).unwrap();
        assert!(s.sigma.iter().all(|&x| x == 0.0));
        // completion must still deliver orthonormal U
        let g = s.u.adjoint().matmul(&s.u);
        assert!(g.sub(&CMatrix::identity(3)).frobenius_norm() < 1e-14);

        let m = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
        ]);
        let s = svd(&m).unwrap();
        assert!((s.sigma[0] - 1.0).abs() < 1e-15);
        assert!(s.sigma[1].abs() < 1e-15);
    }

    #[test]
    fn svd_reconstruction_random() {
        let mut rng = SplitMix64::new(11);
        for trial in 0..50 {
            let n = 1 + (trial % 8);
            let m = random_matrix(n, &mut rng);
            let s = svd(&m).unwrap();
            let res = reconstruct_svd(&s).sub(&m).frobenius_norm();
            let bound = tol::fun_tol(s.sigma_max());
            assert!(
                res <= bound,
                "trial {trial}: residual {res:.3e} > {bound:.3e}"
            );
            let gu = s.u.adjoint().matmul(&s.u).sub(&CMatrix::identity(n));
            let gv = s.v.adjoint().matmul(&s.v).sub(&CMatrix::identity(n));
            assert!(gu.frobenius_norm() <= bound);
            assert!(gv.frobenius_norm() <= bound);
            for w in s.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn svd_preserves_block_structure_exactly() {
        // block-diagonal input: rotations never couple the blocks
        let mut rng = SplitMix64::new(5);
        let mut m = CMatrix::zeros(5, 5);
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = rng.next_complex_gaussian();
            }
        }
        for i in 2..5 {
            for j in 2..5 {
                m[(i, j)] = rng.next_complex_gaussian();
            }
        }
        let s = svd(&m).unwrap();
        let rebuilt = reconstruct_svd(&s);
        for i in 0..2 {
            for j in 2..5 {
                assert_eq!(rebuilt[(i, j)], c(0.0, 0.0));
                assert_eq!(rebuilt[(j, i)], c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn psd_power_examples() {
        let e = psd_power(&CMatrix::identity(3), PsdPower::InvSqrt).unwrap();
        assert!(e.sub(&CMatrix::identity(3)).frobenius_norm() < 1e-14);

        let d = CMatrix::from_rows(&[
            vec![c(4.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(9.0, 0.0)],
        ]);
        let r = psd_power(&d, PsdPower::Sqrt).unwrap();
        assert!((r[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((r[(1, 1)].re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn psd_power_q_property() {
        // Q = (I + t†t)^(−1/2) must satisfy Q (I + t†t) Q = I
        let mut rng = SplitMix64::new(23);
        for _ in 0..20 {
            let t = random_matrix(4, &mut rng);
            let g = CMatrix::identity(4).add(&t.adjoint().matmul(&t));
            let q = psd_power(&g, PsdPower::InvSqrt).unwrap();
            let res = q.matmul(&g).matmul(&q).sub(&CMatrix::identity(4));
            assert!(res.frobenius_norm() < 1e-12 * (1.0 + g.frobenius_norm()));
        }
    }

    #[test]
    fn psd_power_errors() {
        let neg = CMatrix::from_rows(&[vec![c(-1.0, 0.0)]]);
        assert!(matches!(
            psd_power(&neg, PsdPower::Sqrt),
            Err(Error::NotPositive { .. })
        ));
        let sing = CMatrix::from_rows(&[vec![c(0.0, 0.0)]]);
        assert!(matches!(
            psd_power(&sing, PsdPower::InvSqrt),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn numeric_rank_examples() {
        assert_eq!(numeric_rank(&[1.0, 0.0], 1.0), 1);
        assert_eq!(numeric_rank(&[0.0, 0.0], 0.0), 0);
        assert_eq!(numeric_rank(&[1.0, 1e-20], 1.0), 1);
    }

    #[test]
    fn numeric_rank_scale_consistency() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..30 {
            let m = random_matrix(5, &mut rng);
            let s = svd(&m).unwrap();
            let r1 = numeric_rank(&s.sigma, s.sigma_max());
            let scaled: Vec<f64> = s.sigma.iter().map(|x| x * 1e6).collect();
            let r2 = numeric_rank(&scaled, s.sigma_max() * 1e6);
            assert_eq!(r1, r2);
        }
    }
}
