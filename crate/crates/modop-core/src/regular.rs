//! Regular operators via the bounded transform F_t = t(1+t*t)^(-1/2).
//!
//! At finite dimension every operator is regular with Dom(t) = X, so
//! regularity is represented faithfully through the transform calculus: the
//! adjoint-preserving bijection t ↦ F_t onto strict contractions, the factor
//! Q_t = (1 − F*F)^(1/2), roundtrip recovery, and the unitary of the
//! regular normality theorem with its commutation conclusions.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cmatrix::CMatrix;
use crate::decomposition::{kernel_projection, range_projection};
use crate::error::{Error, Result};
use crate::module_space::OperatorMatrix;
use crate::normality::{self, UnitaryWitness};
use crate::numkernel::{self, PsdPower};
use crate::report::{ResidualCheck, ResidualReport};
use crate::tol::{self, Tolerances};

/// Norm slack accepted when validating a stored transform.
const NORM_SLACK: f64 = 1e-9;

/// A regular operator, represented by its bounded transform F with
/// ‖F‖ ≤ 1 and I − F*F positive definite (the finite-dimensional reading of
/// "Ran(1 − F*F) dense").
#[derive(Debug, Clone, PartialEq)]
pub struct RegularOp {
    transform: OperatorMatrix,
}

impl RegularOp {
    /// Validates and wraps a bounded transform.
    pub fn from_transform(transform: OperatorMatrix) -> Result<Self> {
        let norm = transform.norm();
        if norm > 1.0 + NORM_SLACK {
            return Err(Error::InvalidShape(format!(
                "bounded transform must be a contraction, got norm {norm}"
            )));
        }
        let margin = contraction_margin(&transform);
        if margin <= 0.0 {
            return Err(Error::InvalidShape(format!(
                "I - F*F must be positive definite, smallest eigenvalue {margin:.3e}"
            )));
        }
        Ok(Self { transform })
    }

    pub fn transform(&self) -> &OperatorMatrix {
        &self.transform
    }

    pub fn into_transform(self) -> OperatorMatrix {
        self.transform
    }

    /// Smallest eigenvalue of I − F*F.
    pub fn margin(&self) -> f64 {
        contraction_margin(&self.transform)
    }
}

fn contraction_margin(f: &OperatorMatrix) -> f64 {
    let e = f.embed();
    let g = CMatrix::identity(e.rows()).sub(&e.adjoint().matmul(&e));
    let eig = numkernel::herm_eig(&g.hermitian_part()).expect("gram matrix is hermitian");
    eig.lambda.first().copied().unwrap_or(1.0)
}

/// F_t = t · (1 + t*t)^(−1/2). Total on L(X) at finite dimension.
pub fn bounded_transform(t: &OperatorMatrix) -> RegularOp {
    let e = t.embed();
    let g = CMatrix::identity(e.rows()).add(&e.adjoint().matmul(&e));
    let q = numkernel::psd_power(&g, PsdPower::InvSqrt).expect("1 + t*t has spectrum in [1, inf)");
    let f = e.matmul(&q);
    let transform =
        OperatorMatrix::unembed(&f, t.shape(), t.rank()).expect("transform stays block-structured");
    RegularOp { transform }
}

/// Q_t = (1 + t*t)^(−1/2), equal to (1 − F*F)^(1/2); invertible with range
/// all of X.
pub fn q_factor(t: &OperatorMatrix) -> OperatorMatrix {
    let e = t.embed();
    let g = CMatrix::identity(e.rows()).add(&e.adjoint().matmul(&e));
    let q = numkernel::psd_power(&g, PsdPower::InvSqrt).expect("1 + t*t has spectrum in [1, inf)");
    OperatorMatrix::unembed(&q, t.shape(), t.rank()).expect("q factor stays block-structured")
}

/// Recovers t = F · (1 − F*F)^(−1/2).
///
/// Requires the contraction margin to clear `EPS_MARGIN`; transforms closer
/// to the unit sphere correspond to operators too large for double
/// precision and raise `TransformSingular`.
pub fn inverse_transform(r: &RegularOp) -> Result<OperatorMatrix> {
    let f = r.transform.embed();
    let g = CMatrix::identity(f.rows())
        .sub(&f.adjoint().matmul(&f))
        .hermitian_part();
    let eig = numkernel::herm_eig(&g)?;
    let margin = eig.lambda.first().copied().unwrap_or(1.0);
    if margin < tol::EPS_MARGIN {
        return Err(Error::TransformSingular {
            margin,
            required: tol::EPS_MARGIN,
        });
    }
    let inv_sqrt = numkernel::psd_power(&g, PsdPower::InvSqrt)?;
    let t = f.matmul(&inv_sqrt);
    OperatorMatrix::unembed(&t, r.transform.shape(), r.transform.rank())
}

/// Per-predicate agreement between an operator and its bounded transform.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredicateAgreement {
    pub name: String,
    pub on_operator: bool,
    pub on_transform: bool,
    pub agree: bool,
}

/// Adjoint/predicate/kernel/range transfer between t and F_t.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformCompatReport {
    /// ‖F_{t*} − (F_t)*‖ / (1 + ‖t‖).
    pub adjoint_residual: ResidualCheck,
    /// normal / selfadjoint / positive must agree between t and F_t.
    pub predicates: Vec<PredicateAgreement>,
    pub kernel_residual: ResidualCheck,
    pub range_residual: ResidualCheck,
    pub pass: bool,
}

/// Checks that the bounded transform preserves the adjoint, the three
/// predicates (normal, selfadjoint, positive), and kernel/range projections.
pub fn transform_adjoint_compat(t: &OperatorMatrix, tols: &Tolerances) -> TransformCompatReport {
    let f = bounded_transform(t).into_transform();
    let f_of_adjoint = bounded_transform(&t.adjoint()).into_transform();
    let scale = 1.0 + t.norm();

    let adjoint_residual = ResidualCheck::new(
        "transform_of_adjoint",
        f_of_adjoint.sub(&f.adjoint()).expect("same module").norm() / scale,
        tols.strict,
    );

    let tol = tols.property;
    let predicates: Vec<PredicateAgreement> = [
        (
            "normal",
            normality::is_normal(t, tol).normal,
            normality::is_normal(&f, tol).normal,
        ),
        (
            "selfadjoint",
            normality::is_selfadjoint(t, tol),
            normality::is_selfadjoint(&f, tol),
        ),
        (
            "positive",
            normality::is_positive(t, tol),
            normality::is_positive(&f, tol),
        ),
    ]
    .into_iter()
    .map(|(name, a, b)| PredicateAgreement {
        name: name.to_string(),
        on_operator: a,
        on_transform: b,
        agree: a == b,
    })
    .collect();

    let kernel_residual = ResidualCheck::new(
        "kernel_projections_agree",
        kernel_projection(t)
            .sub(&kernel_projection(&f))
            .expect("same module")
            .norm(),
        tol,
    );
    let range_residual = ResidualCheck::new(
        "range_projections_agree",
        range_projection(t)
            .sub(&range_projection(&f))
            .expect("same module")
            .norm(),
        tol,
    );

    let pass = adjoint_residual.pass
        && predicates.iter().all(|p| p.agree)
        && kernel_residual.pass
        && range_residual.pass;
    TransformCompatReport {
        adjoint_residual,
        predicates,
        kernel_residual,
        range_residual,
        pass,
    }
}

/// The regular normality theorem: for normal t, the unitary built from the
/// bounded transform satisfies t = U·t*, commutes with Q_t, and commutes
/// with t and t*.
///
/// Valid because t and F_t share the same polar isometry; witness residuals
/// are normalized by (1 + ‖t‖)² since recovering t from F_t inverts Q_t.
pub fn theorem_regular_normal(t: &OperatorMatrix, tols: &Tolerances) -> Result<UnitaryWitness> {
    let nv = normality::is_normal(t, tols.property);
    if !nv.normal {
        return Err(Error::PreconditionFailed {
            check: "t is normal".into(),
            residual: nv.residual,
            tol: nv.threshold,
        });
    }
    let f = bounded_transform(t).into_transform();
    let base = normality::build_unitary_star(&f, tols)?;
    verify_regular_witness(t, base.unitary, tols)
}

/// Measures the regular-theorem residuals for a claimed unitary U:
/// t = U·t*, unitarity, and commutation with Q_t, t, t*, all normalized by
/// (1 + ‖t‖)².
pub fn verify_regular_witness(
    t: &OperatorMatrix,
    u: OperatorMatrix,
    tols: &Tolerances,
) -> Result<UnitaryWitness> {
    let q = q_factor(t);
    let t_adj = t.adjoint();
    let norm = t.norm();
    let scale = (1.0 + norm) * (1.0 + norm);

    let residual_factorization = t.sub(&u.mul(&t_adj)?)?.norm() / scale;
    let residual_unitarity = normality::unitarity_residual(&u);
    let commutator = |a: &OperatorMatrix, b: &OperatorMatrix| -> Result<f64> {
        Ok(a.mul(b)?.sub(&b.mul(a)?)?.norm())
    };
    let residual_commutation_t = commutator(&u, t)? / scale;
    let residual_commutation_t_star = commutator(&u, &t_adj)? / scale;
    let residual_commutation_aux = commutator(&u, &q)? / scale;
    let pass = residual_unitarity <= tols.strict
        && residual_factorization <= tols.regular
        && residual_commutation_t <= tols.regular
        && residual_commutation_t_star <= tols.regular
        && residual_commutation_aux <= tols.regular;
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

/// How the regular theorem specializes at finite dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecializationReport {
    /// Every range is closed at finite dimension.
    pub closed_range: bool,
    /// The algebra is a finite direct sum of full matrix algebras.
    pub compact_class_algebra: bool,
    pub normal: bool,
    pub normal_residual: f64,
    /// The implication chain the report certifies.
    pub chain: Vec<String>,
    /// Present for normal t: the inherited unitary witness.
    pub witness: Option<UnitaryWitness>,
    pub pass: bool,
}

/// Confirms the closed-range and compact-class specializations: at finite
/// dimension their hypotheses hold for every t, and for normal t the
/// regular-theorem conclusions are inherited unchanged.
pub fn check_closed_range_specialization(
    t: &OperatorMatrix,
    tols: &Tolerances,
) -> SpecializationReport {
    let nv = normality::is_normal(t, tols.property);
    let chain = vec![
        "regular_normal_unitary".to_string(),
        "closed_range_specialization".to_string(),
        "compact_class_specialization".to_string(),
    ];
    let witness = if nv.normal {
        theorem_regular_normal(t, tols).ok()
    } else {
        None
    };
    let pass = !nv.normal || witness.as_ref().is_some_and(|w| w.pass);
    SpecializationReport {
        closed_range: true,
        compact_class_algebra: true,
        normal: nv.normal,
        normal_residual: nv.residual,
        chain,
        witness,
        pass,
    }
}

// ---------------------------------------------------------------------------
// JSON wire format: OperatorMatrix JSON tagged {"kind":"bounded_transform"}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RegularOpWire {
    kind: String,
    #[serde(flatten)]
    transform: OperatorMatrix,
}

impl Serialize for RegularOp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RegularOpWire {
            kind: "bounded_transform".to_string(),
            transform: self.transform.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegularOp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = RegularOpWire::deserialize(d)?;
        if wire.kind != "bounded_transform" {
            return Err(D::Error::custom(format!(
                "expected kind \"bounded_transform\", got \"{}\"",
                wire.kind
            )));
        }
        RegularOp::from_transform(wire.transform).map_err(D::Error::custom)
    }
}

/// Roundtrip audit for a claimed transform: recovering t from r must land
/// within tol_round·(1 + ‖t‖)³. A transform that cannot be inverted at all
/// reports an infinite residual.
pub fn roundtrip_check(t: &OperatorMatrix, r: &RegularOp, tols: &Tolerances) -> ResidualCheck {
    let scale = (1.0 + t.norm()).powi(3);
    let residual = match inverse_transform(r) {
        Ok(recovered) => recovered.sub(t).expect("same module").norm() / scale,
        Err(_) => f64::INFINITY,
    };
    ResidualCheck::new("roundtrip", residual, tols.roundtrip)
}

/// Transform invariants bundled for the harness: strict contraction and
/// invertible Q.
pub fn transform_invariants(t: &OperatorMatrix, tols: &Tolerances) -> ResidualReport {
    let r = bounded_transform(t);
    let f_norm = r.transform().norm();
    let margin = r.margin();
    let q = q_factor(t);
    let q_eig = numkernel::herm_eig(&q.embed().hermitian_part()).expect("q is hermitian");
    let q_min = q_eig.lambda.first().copied().unwrap_or(1.0);
    ResidualReport::new(vec![
        // strict contraction: 1 − ‖F‖ must stay positive
        ResidualCheck::new(
            "transform_strictly_contractive",
            (f_norm - 1.0).max(0.0),
            tols.strict,
        ),
        ResidualCheck::new("gram_margin_positive", (-margin).max(0.0), 0.0),
        ResidualCheck::new("q_invertible", (-q_min).max(0.0), 0.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{AlgebraElement, AlgebraShape};
    use crate::cmatrix::C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn z() -> C64 {
        c(0.0, 0.0)
    }

    fn scalar_operator(rows: &[&[C64]]) -> OperatorMatrix {
        let s = AlgebraShape::new(vec![1]).unwrap();
        let k = rows.len();
        OperatorMatrix::from_fn(&s, k, |p, q| {
            let mut e = AlgebraElement::zero(&s);
            e.block_mut(0)[(0, 0)] = rows[p][q];
            e
        })
    }

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn transform_examples() {
        let s = AlgebraShape::new(vec![1]).unwrap();
        let zero = OperatorMatrix::zero(&s, 2);
        assert!(bounded_transform(&zero).transform().norm() < 1e-15);

        let id = OperatorMatrix::identity(&s, 2);
        let f = bounded_transform(&id).into_transform();
        let expected = id.scale(c(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        assert!(f.sub(&expected).unwrap().norm() < 1e-13);

        // diag(3, 4) → diag(3/sqrt(10), 4/sqrt(17))
        let d = scalar_operator(&[&[c(3.0, 0.0), z()], &[z(), c(4.0, 0.0)]]);
        let f = bounded_transform(&d).into_transform();
        assert!((f.entry(0, 0).block(0)[(0, 0)].re - 3.0 / 10.0f64.sqrt()).abs() < 1e-13);
        assert!((f.entry(1, 1).block(0)[(0, 0)].re - 4.0 / 17.0f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn inverse_examples_and_roundtrip() {
        let s = AlgebraShape::new(vec![1]).unwrap();
        let zero = OperatorMatrix::zero(&s, 2);
        let rt = inverse_transform(&bounded_transform(&zero)).unwrap();
        assert!(rt.norm() < 1e-15);

        let id = OperatorMatrix::identity(&s, 2);
        let f =
            RegularOp::from_transform(id.scale(c(std::f64::consts::FRAC_1_SQRT_2, 0.0))).unwrap();
        let t = inverse_transform(&f).unwrap();
        assert!(t.sub(&id).unwrap().norm() < 1e-12);

        let t = scalar_operator(&[&[c(1.0, -2.0), c(0.5, 0.3)], &[c(0.0, 4.0), c(-1.0, 1.0)]]);
        let rt = inverse_transform(&bounded_transform(&t)).unwrap();
        let norm = t.norm();
        let bound = tols().roundtrip * (1.0 + norm).powi(3);
        assert!(rt.sub(&t).unwrap().norm() <= bound);
    }

    #[test]
    fn transform_singular_below_margin() {
        let s = AlgebraShape::new(vec![1]).unwrap();
        // F = (1 − 1e-10)·I leaves a margin ~2e-10 < 1e-8
        let f = OperatorMatrix::identity(&s, 1).scale(c(1.0 - 1e-10, 0.0));
        let r = RegularOp::from_transform(f).unwrap();
        assert!(matches!(
            inverse_transform(&r),
            Err(Error::TransformSingular { .. })
        ));
    }

    #[test]
    fn regular_op_validation() {
        let s = AlgebraShape::new(vec![1]).unwrap();
        let too_big = OperatorMatrix::identity(&s, 1).scale(c(1.5, 0.0));
        assert!(RegularOp::from_transform(too_big).is_err());
        let exactly_one = OperatorMatrix::identity(&s, 1);
        assert!(RegularOp::from_transform(exactly_one).is_err());
    }

    #[test]
    fn adjoint_compat_examples() {
        // selfadjoint t → F selfadjoint
        let h = scalar_operator(&[&[c(1.0, 0.0), c(0.0, 2.0)], &[c(0.0, -2.0), c(3.0, 0.0)]]);
        let report = transform_adjoint_compat(&h, &tols());
        assert!(report.pass, "{report:?}");
        assert!(report.predicates.iter().all(|p| p.agree));

        // t = diag(i, 0): F normal, same kernel projection diag(0, 1)
        let t = scalar_operator(&[&[c(0.0, 1.0), z()], &[z(), z()]]);
        let report = transform_adjoint_compat(&t, &tols());
        assert!(report.pass, "{report:?}");
        let f = bounded_transform(&t).into_transform();
        assert!(
            (f.entry(0, 0).block(0)[(0, 0)] - c(0.0, std::f64::consts::FRAC_1_SQRT_2)).norm()
                < 1e-13
        );

        // shift: F not normal, kernels agree
        let shift = scalar_operator(&[&[z(), c(1.0, 0.0)], &[z(), z()]]);
        let report = transform_adjoint_compat(&shift, &tols());
        assert!(report.pass, "{report:?}");
        let normal_pred = report
            .predicates
            .iter()
            .find(|p| p.name == "normal")
            .unwrap();
        assert!(!normal_pred.on_operator && !normal_pred.on_transform);
    }

    #[test]
    fn theorem_examples() {
        // t = diag(i, 0): U = diag(-1, 1), Q = diag(1/sqrt 2, 1)
        let t = scalar_operator(&[&[c(0.0, 1.0), z()], &[z(), z()]]);
        let w = theorem_regular_normal(&t, &tols()).unwrap();
        assert!(w.pass, "{w:?}");
        assert!((w.unitary.entry(0, 0).block(0)[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-12);
        let q = q_factor(&t);
        assert!(
            (q.entry(0, 0).block(0)[(0, 0)].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-13
        );
        assert!((q.entry(1, 1).block(0)[(0, 0)].re - 1.0).abs() < 1e-13);

        // positive invertible → U = I
        let p = scalar_operator(&[&[c(2.0, 0.0), z()], &[z(), c(5.0, 0.0)]]);
        let w = theorem_regular_normal(&p, &tols()).unwrap();
        let id = OperatorMatrix::identity(p.shape(), 2);
        assert!(w.unitary.sub(&id).unwrap().norm() < 1e-11);

        // non-normal refused
        let shift = scalar_operator(&[&[z(), c(1.0, 0.0)], &[z(), z()]]);
        assert!(theorem_regular_normal(&shift, &tols()).is_err());
    }

    #[test]
    fn specialization_report() {
        let t = scalar_operator(&[&[c(0.0, 1.0), z()], &[z(), c(2.0, 0.0)]]);
        let report = check_closed_range_specialization(&t, &tols());
        assert!(report.closed_range && report.compact_class_algebra);
        assert!(report.normal && report.witness.is_some() && report.pass);

        let shift = scalar_operator(&[&[z(), c(1.0, 0.0)], &[z(), z()]]);
        let report = check_closed_range_specialization(&shift, &tols());
        assert!(report.closed_range);
        assert!(!report.normal && report.witness.is_none() && report.pass);
    }

    #[test]
    fn regular_json_roundtrip() {
        let t = scalar_operator(&[&[c(0.4, -0.1), z()], &[c(0.2, 0.0), c(0.1, 0.3)]]);
        let r = bounded_transform(&t);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"kind\":\"bounded_transform\""));
        let back: RegularOp = serde_json::from_str(&json).unwrap();
        assert!(back.transform().sub(r.transform()).unwrap().norm() < 1e-15);

        let bad = json.replace("bounded_transform", "something_else");
        assert!(serde_json::from_str::<RegularOp>(&bad).is_err());
    }
}
