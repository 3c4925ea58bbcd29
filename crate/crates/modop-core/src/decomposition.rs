//! Absolute value, polar decomposition T = V·|T|, kernel/range projections,
//! and the verifier for the equivalent polar-decomposition conditions.
//!
//! All spectral work happens on `embed(T)` and comes back through `unembed`;
//! the Jacobi kernels preserve the block structure exactly, so the reads
//! never fail. Ranks are decided once per SVD at the shared cutoff
//! (`numeric_rank` with scale sigma_max), which is what makes
//! Ker(V) = Ker(T) hold by construction rather than by luck.

use serde::{Deserialize, Serialize};

use crate::cmatrix::CMatrix;
use crate::module_space::OperatorMatrix;
use crate::numkernel::{self, SvdResult};
use crate::regular;
use crate::report::{ResidualCheck, ResidualReport};
use crate::tol::Tolerances;

/// The pair (V, |T|): V a partial isometry with Ker(V) = Ker(T), |T| ≥ 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolarParts {
    pub isometry: OperatorMatrix,
    pub modulus: OperatorMatrix,
}

fn svd_of(t: &OperatorMatrix) -> SvdResult {
    numkernel::svd(&t.embed()).expect("jacobi svd did not converge")
}

/// U_r · f(sigma) · V_r† over the singular triples with sigma above the
/// cutoff rank `r`.
fn outer_sum(s: &SvdResult, r: usize, f: impl Fn(f64) -> f64) -> CMatrix {
    let rows = s.u.rows();
    let cols = s.v.rows();
    let mut out = CMatrix::zeros(rows, cols);
    for idx in 0..r {
        let w = f(s.sigma[idx]);
        for i in 0..rows {
            let ui = s.u[(i, idx)] * w;
            for j in 0..cols {
                out[(i, j)] += ui * s.v[(j, idx)].conj();
            }
        }
    }
    out
}

/// |T| = (T*T)^(1/2), computed as V·Σ·V† from the SVD of the embedding.
pub fn abs_op(t: &OperatorMatrix) -> OperatorMatrix {
    let s = svd_of(t);
    let n = s.v.rows();
    let mut vs = s.v.clone();
    for j in 0..n {
        for i in 0..n {
            vs[(i, j)] *= s.sigma[j];
        }
    }
    let abs = vs.matmul(&s.v.adjoint()).hermitian_part();
    OperatorMatrix::unembed(&abs, t.shape(), t.rank())
        .expect("functional calculus stays block-structured")
}

/// Polar decomposition T = V·|T| with Ker(V) = Ker(T).
pub fn polar(t: &OperatorMatrix) -> PolarParts {
    let s = svd_of(t);
    let r = s.rank();
    let v = outer_sum(&s, r, |_| 1.0);
    let n = s.v.rows();
    let mut vs = s.v.clone();
    for j in 0..n {
        for i in 0..n {
            vs[(i, j)] *= s.sigma[j];
        }
    }
    let abs = vs.matmul(&s.v.adjoint()).hermitian_part();
    PolarParts {
        isometry: OperatorMatrix::unembed(&v, t.shape(), t.rank())
            .expect("partial isometry stays block-structured"),
        modulus: OperatorMatrix::unembed(&abs, t.shape(), t.rank())
            .expect("modulus stays block-structured"),
    }
}

/// Orthogonal projection onto Ker(T) — A-linear by the trace-projection
/// lemma, since it is I − Σ v_i v_i† over the right singular vectors at the
/// shared rank cutoff.
pub fn kernel_projection(t: &OperatorMatrix) -> OperatorMatrix {
    let s = svd_of(t);
    let r = s.rank();
    let n = s.v.rows();
    let mut p = CMatrix::identity(n);
    for idx in 0..r {
        for i in 0..n {
            let vi = s.v[(i, idx)];
            for j in 0..n {
                p[(i, j)] -= vi * s.v[(j, idx)].conj();
            }
        }
    }
    OperatorMatrix::unembed(&p.hermitian_part(), t.shape(), t.rank())
        .expect("projection stays block-structured")
}

/// Orthogonal projection onto the closure of Ran(T).
pub fn range_projection(t: &OperatorMatrix) -> OperatorMatrix {
    let s = svd_of(t);
    let r = s.rank();
    let n = s.u.rows();
    let mut p = CMatrix::zeros(n, n);
    for idx in 0..r {
        for i in 0..n {
            let ui = s.u[(i, idx)];
            for j in 0..n {
                p[(i, j)] += ui * s.u[(j, idx)].conj();
            }
        }
    }
    OperatorMatrix::unembed(&p.hermitian_part(), t.shape(), t.rank())
        .expect("projection stays block-structured")
}

/// Moore-Penrose pseudoinverse on the embedding; test oracle for polar
/// uniqueness (T·|T|⁺ recovers V by a second route).
pub fn pseudo_inverse(t: &OperatorMatrix) -> OperatorMatrix {
    let s = svd_of(t);
    let r = s.rank();
    // pinv = V f(Σ) U† with f = 1/σ on the kept part
    let sw = SvdResult {
        u: s.v.clone(),
        sigma: s.sigma.clone(),
        v: s.u.clone(),
    };
    let p = outer_sum(&sw, r, |x| 1.0 / x);
    OperatorMatrix::unembed(&p, t.shape(), t.rank()).expect("pseudoinverse stays block-structured")
}

/// Verifies the equivalent polar-decomposition conditions and their
/// consequences; a residual breach is a reported failure, not an error.
///
/// Checks (residuals normalized by (1 + ‖T‖) where they scale with T):
/// factorization T = V|T| and Ker(V) = Ker(T); both direct-sum splittings;
/// the adjoint factorization T* = V*|T*|; the bounded transform sharing the
/// same V; and the consequences V V*V = V, V*V|T| = |T|, V*T = |T|,
/// VV*T = T, Ker(V*) = Ker(T*), VV* = P_ran(T), V*V = P_ran(T*).
pub fn check_polar_conditions(t: &OperatorMatrix, tols: &Tolerances) -> ResidualReport {
    check_polar_conditions_with(t, &polar(t), tols)
}

/// Same checks against externally supplied polar parts, so a claimed
/// decomposition can be audited (and failing instances replayed) without
/// recomputing it.
pub fn check_polar_conditions_with(
    t: &OperatorMatrix,
    parts: &PolarParts,
    tols: &Tolerances,
) -> ResidualReport {
    let v = &parts.isometry;
    let abs_t = &parts.modulus;
    let t_norm = t.norm();
    let scale = 1.0 + t_norm;
    let tol = tols.property;

    let dist =
        |a: &OperatorMatrix, b: &OperatorMatrix| -> f64 { a.sub(b).expect("same module").norm() };

    let mut checks = Vec::new();

    let v_adj = v.adjoint();
    let t_adj = t.adjoint();

    checks.push(ResidualCheck::new(
        "factorization",
        dist(t, &v.mul(abs_t).expect("same module")) / scale,
        tol,
    ));
    checks.push(ResidualCheck::new(
        "partial_isometry",
        dist(
            &v.mul(&v_adj)
                .expect("same module")
                .mul(v)
                .expect("same module"),
            v,
        ),
        tol,
    ));
    checks.push(ResidualCheck::new(
        "kernel_match",
        dist(&kernel_projection(v), &kernel_projection(t)),
        tol,
    ));
    checks.push(ResidualCheck::new(
        "adjoint_kernel_match",
        dist(
            &kernel_projection(&v.adjoint()),
            &kernel_projection(&t.adjoint()),
        ),
        tol,
    ));

    // X = Ker(|T|) ⊕ Ran(|T|) and X = Ker(T*) ⊕ Ran(T)
    let identity = OperatorMatrix::identity(t.shape(), t.rank());
    checks.push(ResidualCheck::new(
        "split_modulus",
        dist(
            &kernel_projection(abs_t)
                .add(&range_projection(abs_t))
                .expect("same module"),
            &identity,
        ),
        tol,
    ));
    checks.push(ResidualCheck::new(
        "split_adjoint",
        dist(
            &kernel_projection(&t_adj)
                .add(&range_projection(t))
                .expect("same module"),
            &identity,
        ),
        tol,
    ));

    // T* = V*·|T*|
    let abs_t_adj = abs_op(&t_adj);
    checks.push(ResidualCheck::new(
        "adjoint_factorization",
        dist(&t_adj, &v_adj.mul(&abs_t_adj).expect("same module")) / scale,
        tol,
    ));

    // F_T = V·|F_T| with the same partial isometry
    let f = regular::bounded_transform(t).into_transform();
    let abs_f = abs_op(&f);
    checks.push(ResidualCheck::new(
        "transform_factorization",
        dist(&f, &v.mul(&abs_f).expect("same module")),
        tol,
    ));

    checks.push(ResidualCheck::new(
        "consequence_vsv_abs",
        dist(
            &v_adj
                .mul(v)
                .expect("same module")
                .mul(abs_t)
                .expect("same module"),
            abs_t,
        ) / scale,
        tol,
    ));
    checks.push(ResidualCheck::new(
        "consequence_vstar_t",
        dist(&v_adj.mul(t).expect("same module"), abs_t) / scale,
        tol,
    ));
    checks.push(ResidualCheck::new(
        "consequence_vvstar_t",
        dist(
            &v.mul(&v_adj)
                .expect("same module")
                .mul(t)
                .expect("same module"),
            t,
        ) / scale,
        tol,
    ));
    checks.push(ResidualCheck::new(
        "vvstar_is_range_projection",
        dist(&v.mul(&v_adj).expect("same module"), &range_projection(t)),
        tol,
    ));
    checks.push(ResidualCheck::new(
        "vstarv_is_adjoint_range_projection",
        dist(
            &v_adj.mul(v).expect("same module"),
            &range_projection(&t_adj),
        ),
        tol,
    ));

    ResidualReport::new(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{AlgebraElement, AlgebraShape};
    use crate::cmatrix::C64;

    fn scalar_operator(rows: &[&[C64]]) -> OperatorMatrix {
        let s = AlgebraShape::new(vec![1]).unwrap();
        let k = rows.len();
        OperatorMatrix::from_fn(&s, k, |p, q| {
            let mut e = AlgebraElement::zero(&s);
            e.block_mut(0)[(0, 0)] = rows[p][q];
            e
        })
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn z() -> C64 {
        c(0.0, 0.0)
    }

    #[test]
    fn abs_of_shift_and_diag() {
        // T = [[0,1],[0,0]]: T*T = diag(0,1), already its own square root
        let t = scalar_operator(&[&[z(), c(1.0, 0.0)], &[z(), z()]]);
        let a = abs_op(&t);
        assert!(a.entry(0, 0).norm() < 1e-14);
        assert!((a.entry(1, 1).block(0)[(0, 0)].re - 1.0).abs() < 1e-14);

        // T = diag(i, 0): |T| = diag(1, 0)
        let t = scalar_operator(&[&[c(0.0, 1.0), z()], &[z(), z()]]);
        let a = abs_op(&t);
        assert!((a.entry(0, 0).block(0)[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(a.entry(1, 1).norm() < 1e-14);

        // positive T: |T| = T
        let t = scalar_operator(&[&[c(2.0, 0.0), z()], &[z(), c(0.5, 0.0)]]);
        assert!(abs_op(&t).sub(&t).unwrap().norm() < 1e-13);
    }

    #[test]
    fn polar_examples() {
        let s = AlgebraShape::new(vec![1]).unwrap();
        let id = OperatorMatrix::identity(&s, 2);
        let parts = polar(&id);
        assert!(parts.isometry.sub(&id).unwrap().norm() < 1e-13);
        assert!(parts.modulus.sub(&id).unwrap().norm() < 1e-13);

        // shift: V = T itself, |T| = diag(0,1)
        let t = scalar_operator(&[&[z(), c(1.0, 0.0)], &[z(), z()]]);
        let parts = polar(&t);
        assert!(parts.isometry.sub(&t).unwrap().norm() < 1e-13);
        let recomposed = parts.isometry.mul(&parts.modulus).unwrap();
        assert!(recomposed.sub(&t).unwrap().norm() < 1e-13);

        // T = diag(i,0): V = diag(i,0), |T| = diag(1,0)
        let t = scalar_operator(&[&[c(0.0, 1.0), z()], &[z(), z()]]);
        let parts = polar(&t);
        assert!(parts.isometry.sub(&t).unwrap().norm() < 1e-13);
        assert!((parts.modulus.entry(0, 0).block(0)[(0, 0)].re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn projections_of_shift_and_extremes() {
        let s = AlgebraShape::new(vec![1]).unwrap();
        let zero = OperatorMatrix::zero(&s, 2);
        let id = OperatorMatrix::identity(&s, 2);
        assert!(kernel_projection(&zero).sub(&id).unwrap().norm() < 1e-14);
        assert!(range_projection(&zero).norm() < 1e-14);
        assert!(kernel_projection(&id).norm() < 1e-14);
        assert!(range_projection(&id).sub(&id).unwrap().norm() < 1e-14);

        // shift: kernel and range both span the first coordinate
        let t = scalar_operator(&[&[z(), c(1.0, 0.0)], &[z(), z()]]);
        let pk = kernel_projection(&t);
        let pr = range_projection(&t);
        assert!((pk.entry(0, 0).block(0)[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(pk.entry(1, 1).norm() < 1e-14);
        assert!(pk.sub(&pr).unwrap().norm() < 1e-14);
    }

    #[test]
    fn conditions_hold_for_identity_and_diag_i0() {
        let s = AlgebraShape::new(vec![1]).unwrap();
        let tols = Tolerances::default();
        let report = check_polar_conditions(&OperatorMatrix::identity(&s, 2), &tols);
        assert!(report.pass, "{report:?}");
        assert!(report.worst() < 1e-12);

        // V*T = |T| on T = diag(i,0): diag(-i,0)·diag(i,0) = diag(1,0)
        let t = scalar_operator(&[&[c(0.0, 1.0), z()], &[z(), z()]]);
        let report = check_polar_conditions(&t, &tols);
        assert!(report.pass, "{report:?}");
        let vt = report.get("consequence_vstar_t").unwrap();
        assert!(vt.residual < 1e-13);
    }

    #[test]
    fn uniqueness_via_pseudoinverse_route() {
        // W = T·|T|⁺ is a second algebraic route to the partial isometry
        let t = scalar_operator(&[
            &[c(1.0, 2.0), c(0.5, 0.0), z()],
            &[z(), c(0.0, -1.0), c(2.0, 1.0)],
            &[c(0.3, 0.0), z(), c(1.0, 0.0)],
        ]);
        let parts = polar(&t);
        let w = t.mul(&pseudo_inverse(&abs_op(&t))).unwrap();
        assert!(w.sub(&parts.isometry).unwrap().norm() < 1e-11);
    }
}
