//! Normality testing and the normality theorems as executable constructions:
//! commutant transfer to (V, |T|), unitarity of V on the range, the unitary
//! factorizations T = U·|T| and T = U·T*, the Fuglede-Putnam theorem, and
//! the product-normality criterion for ST versus TS.

use serde::{Deserialize, Serialize};

use crate::cmatrix::CMatrix;
use crate::decomposition::{abs_op, kernel_projection, polar, range_projection};
use crate::error::{Error, Result};
use crate::module_space::OperatorMatrix;
use crate::numkernel;
use crate::report::{ResidualCheck, ResidualReport, Verdict};
use crate::tol::Tolerances;

/// Normality verdict with its scale-invariant residual
/// ‖T*T − TT*‖ / (1 + ‖T‖²).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalityCheck {
    pub normal: bool,
    pub residual: f64,
    pub threshold: f64,
}

/// ‖T*T − TT*‖ / (1 + ‖T‖²).
pub fn normality_residual(t: &OperatorMatrix) -> f64 {
    let ta = t.adjoint();
    let comm = ta
        .mul(t)
        .expect("same module")
        .sub(&t.mul(&ta).expect("same module"))
        .expect("same module");
    let n = t.norm();
    comm.norm() / (1.0 + n * n)
}

pub fn is_normal(t: &OperatorMatrix, tol: f64) -> NormalityCheck {
    let residual = normality_residual(t);
    NormalityCheck {
        normal: residual <= tol,
        residual,
        threshold: tol,
    }
}

/// ‖T − T*‖ / (1 + ‖T‖).
pub fn selfadjoint_residual(t: &OperatorMatrix) -> f64 {
    t.sub(&t.adjoint()).expect("same module").norm() / (1.0 + t.norm())
}

pub fn is_selfadjoint(t: &OperatorMatrix, tol: f64) -> bool {
    selfadjoint_residual(t) <= tol
}

/// Positive ⟺ selfadjoint with spectrum above −tol·(1 + ‖T‖).
pub fn is_positive(t: &OperatorMatrix, tol: f64) -> bool {
    if !is_selfadjoint(t, tol) {
        return false;
    }
    let eig =
        numkernel::herm_eig(&t.embed().hermitian_part()).expect("hermitian part is hermitian");
    let min = eig.lambda.first().copied().unwrap_or(0.0);
    min >= -tol * (1.0 + t.norm())
}

/// Commutation verdict with residual ‖AB − BA‖ / ((1+‖A‖)(1+‖B‖)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutationCheck {
    pub commute: bool,
    pub residual: f64,
    pub threshold: f64,
}

fn commutator_norm(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    Ok(a.mul(b)?.sub(&b.mul(a)?)?.norm())
}

pub fn commutes(a: &OperatorMatrix, b: &OperatorMatrix, tol: f64) -> Result<CommutationCheck> {
    let residual = commutator_norm(a, b)? / ((1.0 + a.norm()) * (1.0 + b.norm()));
    Ok(CommutationCheck {
        commute: residual <= tol,
        residual,
        threshold: tol,
    })
}

fn precondition(check: &str, residual: f64, tol: f64) -> Error {
    Error::PreconditionFailed {
        check: check.to_string(),
        residual,
        tol,
    }
}

/// If S commutes with T and T*, then the polar parts V and |T| commute with
/// S and S*.
///
/// Residuals are raw commutator norms normalized by (1+‖T‖)(1+‖S‖).
pub fn check_commutant_transfer(
    t: &OperatorMatrix,
    s: &OperatorMatrix,
    tols: &Tolerances,
) -> Result<ResidualReport> {
    let pre_t = commutes(s, t, tols.property)?;
    if !pre_t.commute {
        return Err(precondition(
            "S commutes with T",
            pre_t.residual,
            tols.property,
        ));
    }
    let t_adj = t.adjoint();
    let pre_ta = commutes(s, &t_adj, tols.property)?;
    if !pre_ta.commute {
        return Err(precondition(
            "S commutes with T*",
            pre_ta.residual,
            tols.property,
        ));
    }

    let parts = polar(t);
    let s_adj = s.adjoint();
    let scale = (1.0 + t.norm()) * (1.0 + s.norm());
    let tol = tols.property;
    Ok(ResidualReport::new(vec![
        ResidualCheck::new(
            "commutator_s_isometry",
            commutator_norm(s, &parts.isometry)? / scale,
            tol,
        ),
        ResidualCheck::new(
            "commutator_sstar_isometry",
            commutator_norm(&s_adj, &parts.isometry)? / scale,
            tol,
        ),
        ResidualCheck::new(
            "commutator_s_modulus",
            commutator_norm(s, &parts.modulus)? / scale,
            tol,
        ),
        ResidualCheck::new(
            "commutator_sstar_modulus",
            commutator_norm(&s_adj, &parts.modulus)? / scale,
            tol,
        ),
    ]))
}

/// For normal T the polar isometry is unitary on Ran(T) = Ran(T*):
/// V*V = VV* = P_ran(T), ranges of T and T* coincide, kernels coincide.
pub fn check_v_unitary_on_range(t: &OperatorMatrix, tols: &Tolerances) -> Result<ResidualReport> {
    let nv = is_normal(t, tols.property);
    if !nv.normal {
        return Err(precondition("T is normal", nv.residual, nv.threshold));
    }
    let parts = polar(t);
    let v = &parts.isometry;
    let v_adj = v.adjoint();
    let t_adj = t.adjoint();
    let p_ran = range_projection(t);
    let tol = tols.property;
    Ok(ResidualReport::new(vec![
        ResidualCheck::new(
            "vstarv_equals_range_projection",
            v_adj.mul(v)?.sub(&p_ran)?.norm(),
            tol,
        ),
        ResidualCheck::new(
            "vvstar_equals_range_projection",
            v.mul(&v_adj)?.sub(&p_ran)?.norm(),
            tol,
        ),
        ResidualCheck::new(
            "ranges_coincide",
            p_ran.sub(&range_projection(&t_adj))?.norm(),
            tol,
        ),
        ResidualCheck::new(
            "kernels_coincide",
            kernel_projection(t).sub(&kernel_projection(&t_adj))?.norm(),
            tol,
        ),
    ]))
}

/// A constructed unitary together with its witness residuals.
///
/// Residuals are normalized by the construction's stated scale: (1 + ‖T‖)
/// for the bounded constructions, (1 + ‖t‖)² for the regular one;
/// `residual_unitarity` is absolute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitaryWitness {
    pub unitary: OperatorMatrix,
    pub residual_factorization: f64,
    pub residual_unitarity: f64,
    pub residual_commutation_t: f64,
    pub residual_commutation_t_star: f64,
    /// Commutation with |T| for the bounded constructions, with Q_t for the
    /// regular construction.
    pub residual_commutation_aux: f64,
    pub pass: bool,
}

pub fn unitarity_residual(u: &OperatorMatrix) -> f64 {
    let identity = OperatorMatrix::identity(u.shape(), u.rank());
    let ua = u.adjoint();
    let left = ua
        .mul(u)
        .expect("same module")
        .sub(&identity)
        .expect("same module")
        .norm();
    let right = u
        .mul(&ua)
        .expect("same module")
        .sub(&identity)
        .expect("same module")
        .norm();
    left.max(right)
}

fn assemble_witness(
    t: &OperatorMatrix,
    u: OperatorMatrix,
    factor_target: &OperatorMatrix,
    aux: &OperatorMatrix,
    scale: f64,
    factor_tol: f64,
    tols: &Tolerances,
) -> Result<UnitaryWitness> {
    let t_adj = t.adjoint();
    let residual_factorization = t.sub(&u.mul(factor_target)?)?.norm() / scale;
    let residual_unitarity = unitarity_residual(&u);
    let residual_commutation_t = commutator_norm(&u, t)? / scale;
    let residual_commutation_t_star = commutator_norm(&u, &t_adj)? / scale;
    let residual_commutation_aux = commutator_norm(&u, aux)? / scale;
    let pass = residual_unitarity <= tols.strict
        && residual_factorization <= factor_tol
        && residual_commutation_t <= factor_tol
        && residual_commutation_t_star <= factor_tol
        && residual_commutation_aux <= factor_tol;
    Ok(UnitaryWitness {
        unitary: u,
        residual_factorization,
        residual_unitarity,
        residual_commutation_t,
        residual_commutation_t_star,
        residual_commutation_aux,
        pass,
    })
}

/// For normal T builds the unitary U = P_ker(T) + V with T = U·|T| and U
/// commuting with |T|, T, and T*.
///
/// V·P_ran(T*) = V makes this equal to the piecewise definition (identity on
/// the kernel, V on the range of T*) without choosing a basis.
pub fn build_unitary_abs(t: &OperatorMatrix, tols: &Tolerances) -> Result<UnitaryWitness> {
    let nv = is_normal(t, tols.property);
    if !nv.normal {
        return Err(precondition("T is normal", nv.residual, nv.threshold));
    }
    let parts = polar(t);
    let u = kernel_projection(t).add(&parts.isometry)?;
    verify_unitary_abs(t, u, tols)
}

/// Measures the modulus-factorization witness residuals for a claimed
/// unitary U: T = U·|T|, unitarity, and commutation with T, T*, |T|.
pub fn verify_unitary_abs(
    t: &OperatorMatrix,
    u: OperatorMatrix,
    tols: &Tolerances,
) -> Result<UnitaryWitness> {
    let modulus = abs_op(t);
    let scale = 1.0 + t.norm();
    assemble_witness(t, u, &modulus, &modulus, scale, tols.property, tols)
}

/// For normal T builds the unitary U = P_ker(T) + V² with T = U·T*.
pub fn build_unitary_star(t: &OperatorMatrix, tols: &Tolerances) -> Result<UnitaryWitness> {
    let nv = is_normal(t, tols.property);
    if !nv.normal {
        return Err(precondition("T is normal", nv.residual, nv.threshold));
    }
    let parts = polar(t);
    let v2 = parts.isometry.mul(&parts.isometry)?;
    let u = kernel_projection(t).add(&v2)?;
    verify_unitary_star(t, u, tols)
}

/// Measures the adjoint-factorization witness residuals for a claimed
/// unitary U: T = U·T*, unitarity, and commutation with T, T*, |T|.
pub fn verify_unitary_star(
    t: &OperatorMatrix,
    u: OperatorMatrix,
    tols: &Tolerances,
) -> Result<UnitaryWitness> {
    let modulus = abs_op(t);
    let scale = 1.0 + t.norm();
    let t_adj = t.adjoint();
    assemble_witness(t, u, &t_adj, &modulus, scale, tols.property, tols)
}

/// Converse direction: a unitary U with T = U·T* forces T normal.
///
/// Returns the normality check wrapped in a report echoing the
/// preconditions.
pub fn verify_converse_star(
    t: &OperatorMatrix,
    u: &OperatorMatrix,
    tols: &Tolerances,
) -> Result<ResidualReport> {
    let uni = unitarity_residual(u);
    if uni > tols.strict {
        return Err(precondition("U is unitary", uni, tols.strict));
    }
    let factor = t.sub(&u.mul(&t.adjoint())?)?.norm() / (1.0 + t.norm());
    if factor > tols.property {
        return Err(precondition("T = U·T*", factor, tols.property));
    }
    Ok(ResidualReport::new(vec![
        ResidualCheck::new("unitarity", uni, tols.strict),
        ResidualCheck::new("fixed_point", factor, tols.property),
        ResidualCheck::new("normality", normality_residual(t), tols.property),
    ]))
}

/// Fuglede-Putnam: normal T, S with TA = AS imply T*A = AS*.
///
/// The intertwining residuals are normalized by (‖T‖+‖S‖)(1+‖A‖).
pub fn fuglede_putnam_check(
    t: &OperatorMatrix,
    s: &OperatorMatrix,
    a: &OperatorMatrix,
    tols: &Tolerances,
) -> Result<ResidualReport> {
    let nt = is_normal(t, tols.property);
    if !nt.normal {
        return Err(precondition("T is normal", nt.residual, nt.threshold));
    }
    let ns = is_normal(s, tols.property);
    if !ns.normal {
        return Err(precondition("S is normal", ns.residual, ns.threshold));
    }
    let scale = (t.norm() + s.norm()) * (1.0 + a.norm());
    let hypothesis_raw = t.mul(a)?.sub(&a.mul(s)?)?.norm();
    let hypothesis = safe_ratio(hypothesis_raw, scale);
    if hypothesis > tols.property {
        return Err(precondition("TA = AS", hypothesis, tols.property));
    }
    let conclusion_raw = t.adjoint().mul(a)?.sub(&a.mul(&s.adjoint())?)?.norm();
    let conclusion = safe_ratio(conclusion_raw, scale);
    Ok(ResidualReport::new(vec![
        ResidualCheck::new("hypothesis_intertwine", hypothesis, tols.property),
        ResidualCheck::new("conclusion_intertwine", conclusion, tols.property),
    ]))
}

fn safe_ratio(numerator: f64, denominator: f64) -> f64 {
    if numerator == 0.0 {
        0.0
    } else {
        numerator / denominator
    }
}

/// Orthonormal basis (trace inner product) of {A ∈ M_k(𝒜) : TA = AS}.
///
/// The condition decouples over algebra blocks; per block the nullspace of
/// the Sylvester map E ↦ T·E − E·S is read off an SVD in the vectorized
/// coordinates. An empty basis is a valid outcome.
pub fn solve_intertwiners(t: &OperatorMatrix, s: &OperatorMatrix) -> Result<Vec<OperatorMatrix>> {
    if t.shape() != s.shape() || t.rank() != s.rank() {
        return Err(Error::ShapeMismatch(
            "intertwiner operands act on different modules".into(),
        ));
    }
    let shape = t.shape();
    let k = t.rank();
    let mut basis = Vec::new();
    for b in 0..shape.num_blocks() {
        let tb = t.embed_block(b);
        let sb = s.embed_block(b);
        let n = tb.rows();
        let dim = n * n;
        // columns: vec(T·E_rc − E_rc·S), row-major vec
        let mut map = CMatrix::zeros(dim, dim);
        for r in 0..n {
            for c in 0..n {
                let col = r * n + c;
                // (T E_rc)_{ij} = T_{ir} δ_{cj};  (E_rc S)_{ij} = δ_{ir} S_{cj}
                for i in 0..n {
                    map[(i * n + c, col)] += tb[(i, r)];
                }
                for j in 0..n {
                    map[(r * n + j, col)] -= sb[(c, j)];
                }
            }
        }
        let svd = numkernel::svd(&map).expect("jacobi svd did not converge");
        // the map is a composite object: rank decisions must use the
        // operator scale, not the map's own sigma_max, or an all-zero map
        // (equal operators, 1x1 blocks) keeps ulp noise as signal
        let scale = svd
            .sigma_max()
            .max(numkernel::spectral_norm(&tb) + numkernel::spectral_norm(&sb));
        let rank = numkernel::numeric_rank(&svd.sigma, scale);
        for idx in rank..dim {
            let mut block = CMatrix::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    block[(r, c)] = svd.v[(r * n + c, idx)];
                }
            }
            let mut blocks: Vec<CMatrix> = shape
                .block_dims()
                .iter()
                .map(|&nb| CMatrix::zeros(k * nb, k * nb))
                .collect();
            blocks[b] = block;
            basis.push(OperatorMatrix::from_embed_blocks(shape, k, &blocks)?);
        }
    }
    Ok(basis)
}

/// Product-normality report: is_normal(ST) against "S commutes with |T|",
/// which must agree whenever T and TS are normal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KaplanskyReport {
    pub st_normal: Verdict,
    pub st_residual: f64,
    pub commutes_with_modulus: Verdict,
    pub commutes_residual: f64,
    /// None when either side is numerically undecidable.
    pub equivalence: Option<bool>,
    /// ‖U*·(TS)·U − ST‖ / ((1+‖T‖)(1+‖S‖)) with U from the modulus
    /// construction; present when S commutes with |T|.
    pub proof_identity_residual: Option<f64>,
    pub pass: bool,
}

impl KaplanskyReport {
    pub fn indeterminate(&self) -> bool {
        self.equivalence.is_none()
    }
}

/// Checks the equivalence "ST normal ⟺ S commutes with |T|" for normal T
/// with normal TS.
///
/// Residuals within a factor 10 of the tolerance are reported Indeterminate
/// instead of being forced into a boolean.
pub fn kaplansky_check(
    t: &OperatorMatrix,
    s: &OperatorMatrix,
    tols: &Tolerances,
) -> Result<KaplanskyReport> {
    let nt = is_normal(t, tols.property);
    if !nt.normal {
        return Err(precondition("T is normal", nt.residual, nt.threshold));
    }
    let ts = t.mul(s)?;
    let nts = is_normal(&ts, tols.property);
    if !nts.normal {
        return Err(precondition("TS is normal", nts.residual, nts.threshold));
    }

    let band = tols.indeterminate_band();
    let st = s.mul(t)?;
    let st_residual = normality_residual(&st);
    let st_normal = Verdict::from_residual(st_residual, band);

    let modulus = abs_op(t);
    let commutes_residual =
        commutator_norm(s, &modulus)? / ((1.0 + s.norm()) * (1.0 + modulus.norm()));
    let commutes_with_modulus = Verdict::from_residual(commutes_residual, band);

    let equivalence = match (st_normal.as_bool(), commutes_with_modulus.as_bool()) {
        (Some(a), Some(b)) => Some(a == b),
        _ => None,
    };

    // when S commutes with |T|, conjugating TS by the modulus unitary must
    // produce ST
    let proof_identity_residual = if commutes_with_modulus == Verdict::Holds {
        let u = build_unitary_abs(t, tols)?.unitary;
        let conjugated = u.adjoint().mul(&ts)?.mul(&u)?;
        Some(conjugated.sub(&st)?.norm() / ((1.0 + t.norm()) * (1.0 + s.norm())))
    } else {
        None
    };

    let pass =
        equivalence == Some(true) && proof_identity_residual.is_none_or(|r| r <= tols.property);
    Ok(KaplanskyReport {
        st_normal,
        st_residual,
        commutes_with_modulus,
        commutes_residual,
        equivalence,
        proof_identity_residual,
        pass,
    })
}
