//! The property-suite runner: deterministic randomized suites executing
//! every verifier, with JSON reports whose failing instances replay exactly.
//!
//! Per-trial seeds follow the splitting rule
//! `trial_seed = derive_seed(master, suite_index, trial_index)`, so a
//! `SuiteConfig` determines the whole report (wall clock aside). Trials are
//! independent and could run concurrently; they run in (suite, trial) order
//! here, which is already the deterministic aggregation order.

pub mod gen;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decomposition::{self, abs_op, polar, PolarParts};
use crate::error::{Error, Result};
use crate::module_space::OperatorMatrix;
use crate::normality;
use crate::regular;
use crate::report::{ResidualCheck, ResidualReport};
use crate::rng::{derive_seed, SplitMix64};
use crate::tol::Tolerances;

use gen::{
    gen_commutant_element, gen_fuglede_pair, gen_kaplansky_instance,
    gen_positive_with_commuting_unitary, gen_random_operator, gen_structure_unitary,
    sample_fixed_point, sample_shape, sample_shape_small, CommutantMode, DimPolicy,
    KaplanskyBranch,
};

/// Relative size of injected faults; far above every verdict threshold and
/// far below the O(1) structure of the instances.
const MUTATION_EPS: f64 = 1e-3;

/// The nine property suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    PolarConditions,
    CommutantTransfer,
    VUnitaryRange,
    UnitaryAbsT,
    UnitaryStar,
    RegularTransform,
    TheoremRegular,
    FugledePutnam,
    Kaplansky,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 9] = [
        SuiteKind::PolarConditions,
        SuiteKind::CommutantTransfer,
        SuiteKind::VUnitaryRange,
        SuiteKind::UnitaryAbsT,
        SuiteKind::UnitaryStar,
        SuiteKind::RegularTransform,
        SuiteKind::TheoremRegular,
        SuiteKind::FugledePutnam,
        SuiteKind::Kaplansky,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SuiteKind::PolarConditions => "polar_conditions",
            SuiteKind::CommutantTransfer => "commutant_transfer",
            SuiteKind::VUnitaryRange => "v_unitary_range",
            SuiteKind::UnitaryAbsT => "unitary_abs_t",
            SuiteKind::UnitaryStar => "unitary_star",
            SuiteKind::RegularTransform => "regular_transform",
            SuiteKind::TheoremRegular => "theorem_regular",
            SuiteKind::FugledePutnam => "fuglede_putnam",
            SuiteKind::Kaplansky => "kaplansky",
        }
    }

    pub fn index(&self) -> u64 {
        Self::ALL.iter().position(|k| k == self).expect("listed") as u64
    }
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown suite '{s}'")))
    }
}

/// Configuration of a suite run; the report is a pure function of it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Trials per suite.
    pub trials: u64,
    /// Master seed; per-trial seeds are derived from it.
    pub seed: u64,
    pub max_block_dim: usize,
    pub max_rank: usize,
    pub max_blocks: usize,
    /// Optional base tolerance override (rescales the whole policy).
    pub tol_override: Option<f64>,
    /// Suites to run, in canonical order.
    pub suites: Vec<SuiteKind>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 7,
            max_block_dim: 3,
            max_rank: 4,
            max_blocks: 3,
            tol_override: None,
            suites: SuiteKind::ALL.to_vec(),
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::ConfigInvalid("trials must be at least 1".into()));
        }
        if self.max_block_dim == 0 || self.max_rank == 0 || self.max_blocks == 0 {
            return Err(Error::ConfigInvalid(
                "dimension bounds must be positive".into(),
            ));
        }
        if self.suites.is_empty() {
            return Err(Error::ConfigInvalid("no suites selected".into()));
        }
        if let Some(t) = self.tol_override {
            // rejects NaN as well
            if t <= 0.0 || t.is_nan() {
                return Err(Error::ConfigInvalid(
                    "tolerance override must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn tolerances(&self) -> Tolerances {
        match self.tol_override {
            Some(t) => Tolerances::with_base(t),
            None => Tolerances::default(),
        }
    }

    fn policy(&self) -> DimPolicy {
        DimPolicy {
            max_rank: self.max_rank,
            max_block_dim: self.max_block_dim,
            max_blocks: self.max_blocks,
        }
    }

    /// Selected suites in canonical order, deduplicated.
    fn ordered_suites(&self) -> Vec<SuiteKind> {
        SuiteKind::ALL
            .into_iter()
            .filter(|k| self.suites.contains(k))
            .collect()
    }
}

/// Outcome class of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Pass,
    Fail,
    Indeterminate,
    PreconditionFailed,
}

/// Everything needed to replay one failing trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailurePayload {
    pub suite: SuiteKind,
    pub trial: u64,
    pub seed: u64,
    pub status: TrialStatus,
    pub residuals: BTreeMap<String, f64>,
    /// Named operators the verifier consumes on replay.
    pub operators: BTreeMap<String, OperatorMatrix>,
}

/// One executed (or replayed) trial.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub status: TrialStatus,
    pub residuals: BTreeMap<String, f64>,
    pub operators: BTreeMap<String, OperatorMatrix>,
}

impl TrialRun {
    fn from_report(report: &ResidualReport, operators: Vec<(&str, OperatorMatrix)>) -> Self {
        let mut residuals = BTreeMap::new();
        for c in &report.checks {
            residuals.insert(c.name.clone(), c.residual);
        }
        Self {
            status: if report.pass {
                TrialStatus::Pass
            } else {
                TrialStatus::Fail
            },
            residuals,
            operators: operators
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }

    fn precondition(err: &Error, operators: Vec<(&str, OperatorMatrix)>) -> Self {
        let mut residuals = BTreeMap::new();
        if let Error::PreconditionFailed {
            check, residual, ..
        } = err
        {
            residuals.insert(format!("precondition: {check}"), *residual);
        }
        Self {
            status: TrialStatus::PreconditionFailed,
            residuals,
            operators: operators
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}

/// Aggregated result of one suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub trials: u64,
    pub pass: u64,
    pub fail: u64,
    pub indeterminate: u64,
    pub precondition_failures: u64,
    /// Worst residual seen per named check, across all trials.
    pub worst_residuals: BTreeMap<String, f64>,
    /// Suite-specific counts (witness counts, retries, …).
    pub counters: BTreeMap<String, u64>,
    pub failures: Vec<FailurePayload>,
    pub generator_starvation: bool,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.fail == 0 && self.precondition_failures == 0 && !self.generator_starvation
    }
}

/// Full report: config echo, per-suite aggregates, wall clock.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub suites: Vec<SuiteResult>,
    pub wallclock_ms: u64,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed())
    }

    /// JSON with the wall clock zeroed: the determinism fingerprint.
    pub fn deterministic_json(&self) -> String {
        let mut clone = self.clone();
        clone.wallclock_ms = 0;
        serde_json::to_string_pretty(&clone).expect("report serializes")
    }
}

/// Fault injection: perturb the named construction in one trial. Used by
/// the mutation tests to prove failures are caught and replayable.
#[derive(Debug, Clone, Copy)]
pub struct Mutation {
    pub suite: SuiteKind,
    pub trial: u64,
}

/// Runs the configured suites.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    run_suite_mutated(config, None)
}

/// Runs the configured suites, optionally injecting one fault.
pub fn run_suite_mutated(config: &SuiteConfig, mutation: Option<&Mutation>) -> Result<SuiteReport> {
    config.validate()?;
    let tols = config.tolerances();
    let policy = config.policy();
    let started = Instant::now();

    let mut suites = Vec::new();
    for kind in config.ordered_suites() {
        let mut result = SuiteResult {
            name: kind.name().to_string(),
            trials: config.trials,
            pass: 0,
            fail: 0,
            indeterminate: 0,
            precondition_failures: 0,
            worst_residuals: BTreeMap::new(),
            counters: BTreeMap::new(),
            failures: Vec::new(),
            generator_starvation: false,
        };
        for trial in 0..config.trials {
            let seed = derive_seed(config.seed, kind.index(), trial);
            let mutate = mutation.is_some_and(|m| m.suite == kind && m.trial == trial);
            let run = run_trial(kind, &policy, &tols, seed, mutate, &mut result.counters);
            for (name, value) in &run.residuals {
                let slot = result.worst_residuals.entry(name.clone()).or_insert(0.0);
                if *value > *slot {
                    *slot = *value;
                }
            }
            match run.status {
                TrialStatus::Pass => result.pass += 1,
                TrialStatus::Indeterminate => result.indeterminate += 1,
                TrialStatus::Fail | TrialStatus::PreconditionFailed => {
                    if run.status == TrialStatus::Fail {
                        result.fail += 1;
                    } else {
                        result.precondition_failures += 1;
                    }
                    result.failures.push(FailurePayload {
                        suite: kind,
                        trial,
                        seed,
                        status: run.status,
                        residuals: run.residuals,
                        operators: run.operators,
                    });
                }
            }
        }

        // the product-normality suite must exhibit the asymmetry witness:
        // TS normal while ST is not
        if kind == SuiteKind::Kaplansky {
            let witnesses = result
                .counters
                .get("false_false_witnesses")
                .copied()
                .unwrap_or(0);
            if witnesses == 0 {
                let mut found = false;
                for attempt in 0..50u64 {
                    let seed = derive_seed(config.seed, kind.index(), 1_000_000 + attempt);
                    let mut scratch = BTreeMap::new();
                    let run = run_kaplansky_trial(
                        &policy,
                        &tols,
                        seed,
                        false,
                        KaplanskyBranch::Generic,
                        &mut scratch,
                    );
                    *result
                        .counters
                        .entry("witness_search_attempts".to_string())
                        .or_insert(0) += 1;
                    if scratch.get("false_false_witnesses").copied().unwrap_or(0) > 0
                        && run.status == TrialStatus::Pass
                    {
                        *result
                            .counters
                            .entry("false_false_witnesses".to_string())
                            .or_insert(0) += 1;
                        found = true;
                        break;
                    }
                }
                result.generator_starvation = !found;
            }
        }

        suites.push(result);
    }

    Ok(SuiteReport {
        config: config.clone(),
        suites,
        wallclock_ms: started.elapsed().as_millis() as u64,
    })
}

/// Re-runs the verifier named in a failure payload on its stored operators.
/// Deterministic: replaying a payload reproduces its status and residuals.
pub fn replay_failure(payload: &FailurePayload, tols: &Tolerances) -> Result<TrialRun> {
    let get = |name: &str| -> Result<&OperatorMatrix> {
        payload
            .operators
            .get(name)
            .ok_or_else(|| Error::ConfigInvalid(format!("payload is missing operator '{name}'")))
    };
    match payload.suite {
        SuiteKind::PolarConditions => {
            let t = get("T")?;
            let parts = PolarParts {
                isometry: get("V")?.clone(),
                modulus: get("abs")?.clone(),
            };
            let report = polar_trial_report(t, &parts, tols);
            Ok(TrialRun::from_report(&report, vec![]))
        }
        SuiteKind::CommutantTransfer => {
            let t = get("T")?;
            let s = get("S")?;
            Ok(match normality::check_commutant_transfer(t, s, tols) {
                Ok(report) => TrialRun::from_report(&report, vec![]),
                Err(err) => TrialRun::precondition(&err, vec![]),
            })
        }
        SuiteKind::VUnitaryRange => {
            let t = get("T")?;
            Ok(match normality::check_v_unitary_on_range(t, tols) {
                Ok(report) => TrialRun::from_report(&report, vec![]),
                Err(err) => TrialRun::precondition(&err, vec![]),
            })
        }
        SuiteKind::UnitaryAbsT => {
            let t = get("T")?;
            let u = get("U")?.clone();
            let witness = normality::verify_unitary_abs(t, u, tols)?;
            let mut report = witness_report(&witness, tols.property, tols);
            if let (Ok(p), Ok(w)) = (get("converse_positive"), get("converse_unitary")) {
                let product = w.mul(p)?;
                report.push(ResidualCheck::new(
                    "converse_normality",
                    normality::normality_residual(&product),
                    tols.property,
                ));
            }
            Ok(TrialRun::from_report(&report, vec![]))
        }
        SuiteKind::UnitaryStar => {
            let t = get("T")?;
            let u = get("U")?.clone();
            let witness = normality::verify_unitary_star(t, u, tols)?;
            let mut report = witness_report(&witness, tols.property, tols);
            if let (Ok(fp), Ok(fu)) = (get("converse_fixed_point"), get("converse_unitary")) {
                match normality::verify_converse_star(fp, fu, tols) {
                    Ok(conv) => {
                        for c in conv.checks {
                            report.push(ResidualCheck::new(
                                format!("converse_{}", c.name),
                                c.residual,
                                c.threshold,
                            ));
                        }
                    }
                    Err(err) => return Ok(TrialRun::precondition(&err, vec![])),
                }
            }
            Ok(TrialRun::from_report(&report, vec![]))
        }
        SuiteKind::RegularTransform => {
            let t = get("T")?;
            let f = get("F")?.clone();
            let r = regular::RegularOp::from_transform(f)?;
            let report = regular_transform_report(t, &r, tols);
            Ok(TrialRun::from_report(&report, vec![]))
        }
        SuiteKind::TheoremRegular => {
            let t = get("T")?;
            let u = get("U")?.clone();
            let witness = regular::verify_regular_witness(t, u, tols)?;
            let mut report = witness_report(&witness, tols.regular, tols);
            let r = regular::bounded_transform(t);
            report.push(regular::roundtrip_check(t, &r, tols));
            Ok(TrialRun::from_report(&report, vec![]))
        }
        SuiteKind::FugledePutnam => {
            let t = get("T")?;
            let s = get("S")?;
            let a = get("A")?;
            Ok(match normality::fuglede_putnam_check(t, s, a, tols) {
                Ok(report) => TrialRun::from_report(&report, vec![]),
                Err(err) => TrialRun::precondition(&err, vec![]),
            })
        }
        SuiteKind::Kaplansky => {
            let t = get("T")?;
            let s = get("S")?;
            Ok(match normality::kaplansky_check(t, s, tols) {
                Ok(report) => kaplansky_trial_run(&report),
                Err(err) => TrialRun::precondition(&err, vec![]),
            })
        }
    }
}

fn witness_report(
    witness: &normality::UnitaryWitness,
    commute_tol: f64,
    tols: &Tolerances,
) -> ResidualReport {
    ResidualReport::new(vec![
        ResidualCheck::new("factorization", witness.residual_factorization, commute_tol),
        ResidualCheck::new("unitarity", witness.residual_unitarity, tols.strict),
        ResidualCheck::new("commutation_t", witness.residual_commutation_t, commute_tol),
        ResidualCheck::new(
            "commutation_t_star",
            witness.residual_commutation_t_star,
            commute_tol,
        ),
        ResidualCheck::new(
            "commutation_aux",
            witness.residual_commutation_aux,
            commute_tol,
        ),
    ])
}

fn regular_transform_report(
    t: &OperatorMatrix,
    r: &regular::RegularOp,
    tols: &Tolerances,
) -> ResidualReport {
    let compat = regular::transform_adjoint_compat(t, tols);
    let mut report = ResidualReport::new(vec![
        compat.adjoint_residual.clone(),
        compat.kernel_residual.clone(),
        compat.range_residual.clone(),
    ]);
    for p in &compat.predicates {
        report.push(ResidualCheck::new(
            format!("predicate_{}_agrees", p.name),
            if p.agree { 0.0 } else { 1.0 },
            0.5,
        ));
    }
    report.push(regular::roundtrip_check(t, r, tols));
    for c in regular::transform_invariants(t, tols).checks {
        report.push(c);
    }
    report
}

fn kaplansky_trial_run(report: &normality::KaplanskyReport) -> TrialRun {
    let mut residuals = BTreeMap::new();
    residuals.insert("st_normality".to_string(), report.st_residual);
    residuals.insert("modulus_commutation".to_string(), report.commutes_residual);
    if let Some(p) = report.proof_identity_residual {
        residuals.insert("proof_identity".to_string(), p);
    }
    let status = if report.indeterminate() {
        TrialStatus::Indeterminate
    } else if report.pass {
        TrialStatus::Pass
    } else {
        TrialStatus::Fail
    };
    TrialRun {
        status,
        residuals,
        operators: BTreeMap::new(),
    }
}

fn mutate_operator(op: &OperatorMatrix, rng: &mut SplitMix64) -> OperatorMatrix {
    let noise = gen_random_operator(op.shape(), op.rank(), rng.next_u64());
    let noise_norm = noise.norm().max(1e-300);
    let eps = MUTATION_EPS * (1.0 + op.norm()) / noise_norm;
    op.add(&noise.scale(num_complex::Complex64::new(eps, 0.0)))
        .expect("same module")
}

/// Rank-deficient operator with controlled zero singular values:
/// W1 · D0 · W2 with D0 a diagonal carrying exact zeros.
fn gen_rank_deficient(
    shape: &crate::algebra::AlgebraShape,
    k: usize,
    rng: &mut SplitMix64,
) -> OperatorMatrix {
    let w1 = gen_structure_unitary(shape, k, rng);
    let w2 = gen_structure_unitary(shape, k, rng);
    let mut blocks = Vec::new();
    for &n in shape.block_dims() {
        let d = k * n;
        let mut m = crate::cmatrix::CMatrix::zeros(d, d);
        for i in 0..d {
            if rng.next_f64() >= 0.4 {
                m[(i, i)] = rng.next_complex_gaussian();
            }
        }
        blocks.push(m);
    }
    let d0 = OperatorMatrix::from_embed_blocks(shape, k, &blocks).expect("diagonal fits");
    w1.mul(&d0).and_then(|x| x.mul(&w2)).expect("same module")
}

fn gen_mixed_flavor(
    shape: &crate::algebra::AlgebraShape,
    k: usize,
    rng: &mut SplitMix64,
    flavor: u64,
) -> OperatorMatrix {
    match flavor % 5 {
        0 | 1 => gen_random_operator(shape, k, rng.next_u64()),
        2 => gen::gen_random_normal(shape, k, rng.next_u64(), 0.2),
        3 => {
            // selfadjoint
            let g = gen_random_operator(shape, k, rng.next_u64());
            g.add(&g.adjoint())
                .expect("same module")
                .scale(num_complex::Complex64::new(0.5, 0.0))
        }
        _ => {
            // positive (possibly singular)
            let (p, _) = gen_positive_with_commuting_unitary(shape, k, rng, 0.3);
            p
        }
    }
}

fn run_trial(
    kind: SuiteKind,
    policy: &DimPolicy,
    tols: &Tolerances,
    seed: u64,
    mutate: bool,
    counters: &mut BTreeMap<String, u64>,
) -> TrialRun {
    let mut rng = SplitMix64::new(seed);
    match kind {
        SuiteKind::PolarConditions => {
            let (shape, k) = sample_shape(policy, &mut rng);
            let t = if rng.next_f64() < 0.3 {
                gen_rank_deficient(&shape, k, &mut rng)
            } else {
                gen_random_operator(&shape, k, rng.next_u64())
            };
            let mut parts = polar(&t);
            if mutate {
                parts.isometry = mutate_operator(&parts.isometry, &mut rng);
            }
            let report = polar_trial_report(&t, &parts, tols);
            TrialRun::from_report(
                &report,
                vec![("T", t), ("V", parts.isometry), ("abs", parts.modulus)],
            )
        }
        SuiteKind::CommutantTransfer => {
            let (shape, k) = sample_shape(policy, &mut rng);
            let zero_fraction = if rng.next_f64() < 0.3 { 0.3 } else { 0.0 };
            let t = gen::gen_random_normal(&shape, k, rng.next_u64(), zero_fraction);
            let mut s =
                gen_commutant_element(&t, rng.next_u64(), CommutantMode::OperatorAndAdjoint);
            if mutate {
                s = mutate_operator(&s, &mut rng);
            }
            match normality::check_commutant_transfer(&t, &s, tols) {
                Ok(report) => TrialRun::from_report(&report, vec![("T", t), ("S", s)]),
                Err(err) => TrialRun::precondition(&err, vec![("T", t), ("S", s)]),
            }
        }
        SuiteKind::VUnitaryRange => {
            let (shape, k) = sample_shape(policy, &mut rng);
            let zero_fraction = if rng.next_f64() < 0.5 { 0.35 } else { 0.0 };
            let mut t = gen::gen_random_normal(&shape, k, rng.next_u64(), zero_fraction);
            if mutate {
                t = mutate_operator(&t, &mut rng);
            }
            match normality::check_v_unitary_on_range(&t, tols) {
                Ok(report) => TrialRun::from_report(&report, vec![("T", t)]),
                Err(err) => TrialRun::precondition(&err, vec![("T", t)]),
            }
        }
        SuiteKind::UnitaryAbsT => {
            let (shape, k) = sample_shape(policy, &mut rng);
            let zero_fraction = if rng.next_f64() < 0.3 { 0.3 } else { 0.0 };
            let t = gen::gen_random_normal(&shape, k, rng.next_u64(), zero_fraction);
            let parts = polar(&t);
            let mut u = decomposition::kernel_projection(&t)
                .add(&parts.isometry)
                .expect("same module");
            if mutate {
                u = mutate_operator(&u, &mut rng);
            }
            let witness = match normality::verify_unitary_abs(&t, u, tols) {
                Ok(w) => w,
                Err(err) => return TrialRun::precondition(&err, vec![("T", t)]),
            };
            let mut report = witness_report(&witness, tols.property, tols);

            // converse: a unitary commuting with a positive P makes U·P normal
            let (cshape, ck) = sample_shape(policy, &mut rng);
            let zero = if rng.next_f64() < 0.5 { 0.3 } else { 0.0 };
            let (p, w) = gen_positive_with_commuting_unitary(&cshape, ck, &mut rng, zero);
            let product = w.mul(&p).expect("same module");
            report.push(ResidualCheck::new(
                "converse_normality",
                normality::normality_residual(&product),
                tols.property,
            ));

            TrialRun::from_report(
                &report,
                vec![
                    ("T", t),
                    ("U", witness.unitary),
                    ("converse_positive", p),
                    ("converse_unitary", w),
                ],
            )
        }
        SuiteKind::UnitaryStar => {
            let (shape, k) = sample_shape(policy, &mut rng);
            let zero_fraction = if rng.next_f64() < 0.3 { 0.3 } else { 0.0 };
            let t = gen::gen_random_normal(&shape, k, rng.next_u64(), zero_fraction);
            let parts = polar(&t);
            let v2 = parts.isometry.mul(&parts.isometry).expect("same module");
            let mut u = decomposition::kernel_projection(&t)
                .add(&v2)
                .expect("same module");
            if mutate {
                u = mutate_operator(&u, &mut rng);
            }
            let witness = match normality::verify_unitary_star(&t, u, tols) {
                Ok(w) => w,
                Err(err) => return TrialRun::precondition(&err, vec![("T", t)]),
            };
            let mut report = witness_report(&witness, tols.property, tols);

            // converse: sample the solution space of T = U·T* and verify
            // normality (small blocks: the realified nullspace is quadratic
            // in the embedded block dimension)
            let (cshape, ck) = sample_shape_small(policy, &mut rng);
            let cu = gen_structure_unitary(&cshape, ck, &mut rng);
            let fixed = match sample_fixed_point(&cu, rng.next_u64(), tols) {
                Ok(x) => x,
                Err(err) => return TrialRun::precondition(&err, vec![("T", t)]),
            };
            match normality::verify_converse_star(&fixed, &cu, tols) {
                Ok(conv) => {
                    for c in conv.checks {
                        report.push(ResidualCheck::new(
                            format!("converse_{}", c.name),
                            c.residual,
                            c.threshold,
                        ));
                    }
                }
                Err(err) => {
                    return TrialRun::precondition(
                        &err,
                        vec![
                            ("T", t),
                            ("converse_fixed_point", fixed),
                            ("converse_unitary", cu),
                        ],
                    )
                }
            }

            TrialRun::from_report(
                &report,
                vec![
                    ("T", t),
                    ("U", witness.unitary),
                    ("converse_fixed_point", fixed),
                    ("converse_unitary", cu),
                ],
            )
        }
        SuiteKind::RegularTransform => {
            let (shape, k) = sample_shape(policy, &mut rng);
            let flavor = rng.next_u64();
            let mut t = gen_mixed_flavor(&shape, k, &mut rng, flavor);
            let norm = t.norm();
            if norm > 10.0 {
                t = t.scale(num_complex::Complex64::new(10.0 / norm, 0.0));
            }
            let mut r = regular::bounded_transform(&t);
            if mutate {
                // a valid but wrong transform: the roundtrip catches it
                r = regular::RegularOp::from_transform(
                    r.transform().scale(num_complex::Complex64::new(0.5, 0.0)),
                )
                .expect("scaled contraction is valid");
            }
            let report = regular_transform_report(&t, &r, tols);
            let f = r.into_transform();
            TrialRun::from_report(&report, vec![("T", t), ("F", f)])
        }
        SuiteKind::TheoremRegular => {
            let (shape, k) = sample_shape(policy, &mut rng);
            let zero_fraction = if rng.next_f64() < 0.3 { 0.3 } else { 0.0 };
            let mut t = gen::gen_random_normal(&shape, k, rng.next_u64(), zero_fraction);
            let norm = t.norm();
            if norm > 10.0 {
                t = t.scale(num_complex::Complex64::new(10.0 / norm, 0.0));
            }
            let f = regular::bounded_transform(&t).into_transform();
            let base = match normality::build_unitary_star(&f, tols) {
                Ok(w) => w,
                Err(err) => return TrialRun::precondition(&err, vec![("T", t)]),
            };
            let mut u = base.unitary;
            if mutate {
                u = mutate_operator(&u, &mut rng);
            }
            let witness = match regular::verify_regular_witness(&t, u, tols) {
                Ok(w) => w,
                Err(err) => return TrialRun::precondition(&err, vec![("T", t)]),
            };
            let mut report = witness_report(&witness, tols.regular, tols);
            let r = regular::bounded_transform(&t);
            report.push(regular::roundtrip_check(&t, &r, tols));
            TrialRun::from_report(&report, vec![("T", t), ("U", witness.unitary)])
        }
        SuiteKind::FugledePutnam => {
            let (shape, k) = sample_shape_small(policy, &mut rng);
            let (t, s) = gen_fuglede_pair(&shape, k, rng.next_u64());
            let basis = match normality::solve_intertwiners(&t, &s) {
                Ok(b) => b,
                Err(err) => return TrialRun::precondition(&err, vec![("T", t), ("S", s)]),
            };
            *counters
                .entry("intertwiner_dimension_total".to_string())
                .or_insert(0) += basis.len() as u64;
            let mut a = OperatorMatrix::zero(t.shape(), t.rank());
            for b in &basis {
                a = a
                    .add(&b.scale(rng.next_complex_gaussian()))
                    .expect("same module");
            }
            let a_norm = a.norm();
            if a_norm > 0.0 {
                a = a.scale(num_complex::Complex64::new(1.0 / a_norm, 0.0));
            } else {
                *counters
                    .entry("zero_intertwiner_instances".to_string())
                    .or_insert(0) += 1;
            }
            if mutate {
                a = mutate_operator(&a, &mut rng);
            }
            match normality::fuglede_putnam_check(&t, &s, &a, tols) {
                Ok(mut report) => {
                    // solver soundness: every basis element intertwines
                    let scale = (t.norm() + s.norm()).max(f64::MIN_POSITIVE);
                    let worst = basis
                        .iter()
                        .map(|b| {
                            t.mul(b)
                                .and_then(|x| x.sub(&b.mul(&s).expect("same module")))
                                .expect("same module")
                                .norm()
                                / (scale * (1.0 + b.norm()))
                        })
                        .fold(0.0f64, f64::max);
                    report.push(ResidualCheck::new(
                        "solver_worst_defect",
                        worst,
                        tols.property,
                    ));
                    TrialRun::from_report(&report, vec![("T", t), ("S", s), ("A", a)])
                }
                Err(err) => TrialRun::precondition(&err, vec![("T", t), ("S", s), ("A", a)]),
            }
        }
        SuiteKind::Kaplansky => {
            let branch = if seed.is_multiple_of(2) {
                KaplanskyBranch::Generic
            } else {
                KaplanskyBranch::Commuting
            };
            run_kaplansky_trial(policy, tols, seed, mutate, branch, counters)
        }
    }
}

fn run_kaplansky_trial(
    policy: &DimPolicy,
    tols: &Tolerances,
    seed: u64,
    mutate: bool,
    branch: KaplanskyBranch,
    counters: &mut BTreeMap<String, u64>,
) -> TrialRun {
    let mut rng = SplitMix64::new(seed);
    let (shape, k) = sample_shape(policy, &mut rng);
    let branch_name = match branch {
        KaplanskyBranch::Generic => "branch_generic",
        KaplanskyBranch::Commuting => "branch_commuting",
    };
    *counters.entry(branch_name.to_string()).or_insert(0) += 1;
    let (t, mut s) = gen_kaplansky_instance(&shape, k, branch, rng.next_u64());
    if mutate {
        s = mutate_operator(&s, &mut rng);
    }
    match normality::kaplansky_check(&t, &s, tols) {
        Ok(report) => {
            use crate::report::Verdict;
            if report.st_normal == Verdict::Fails && report.commutes_with_modulus == Verdict::Fails
            {
                *counters
                    .entry("false_false_witnesses".to_string())
                    .or_insert(0) += 1;
            }
            if report.st_normal == Verdict::Holds && report.commutes_with_modulus == Verdict::Holds
            {
                *counters
                    .entry("true_true_instances".to_string())
                    .or_insert(0) += 1;
            }
            let mut run = kaplansky_trial_run(&report);
            run.operators.insert("T".to_string(), t);
            run.operators.insert("S".to_string(), s);
            run
        }
        Err(err) => TrialRun::precondition(&err, vec![("T", t), ("S", s)]),
    }
}

/// Polar-conditions checks plus the uniqueness and spectra invariants; the
/// single source for the polar suite's trials and replays.
fn polar_trial_report(t: &OperatorMatrix, parts: &PolarParts, tols: &Tolerances) -> ResidualReport {
    let mut report = decomposition::check_polar_conditions_with(t, parts, tols);

    // uniqueness through a second route: W = T·|T|⁺ must equal V
    let w = t
        .mul(&decomposition::pseudo_inverse(&parts.modulus))
        .expect("same module");
    report.push(ResidualCheck::new(
        "uniqueness_second_route",
        w.sub(&parts.isometry).expect("same module").norm(),
        tols.property,
    ));
    // |T| and |T*| share their nonzero spectrum (singular values)
    report.push(ResidualCheck::new(
        "abs_spectra_match",
        spectra_mismatch(t),
        tols.property,
    ));
    report
}

/// Spectral mismatch between |T| and |T*|: both must carry the singular
/// values of T.
fn spectra_mismatch(t: &OperatorMatrix) -> f64 {
    let a1 = abs_op(t);
    let a2 = abs_op(&t.adjoint());
    let e1 = crate::numkernel::herm_eig(&a1.embed()).expect("modulus is hermitian");
    let e2 = crate::numkernel::herm_eig(&a2.embed()).expect("modulus is hermitian");
    e1.lambda
        .iter()
        .zip(&e2.lambda)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / (1.0 + t.norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SuiteConfig {
        SuiteConfig {
            trials: 3,
            seed: 7,
            ..SuiteConfig::default()
        }
    }

    #[test]
    fn report_has_one_entry_per_suite_and_is_deterministic() {
        let config = SuiteConfig {
            trials: 1,
            seed: 7,
            ..SuiteConfig::default()
        };
        let a = run_suite(&config).unwrap();
        assert_eq!(a.suites.len(), 9);
        let b = run_suite(&config).unwrap();
        assert_eq!(a.deterministic_json(), b.deterministic_json());
    }

    #[test]
    fn clean_run_passes() {
        let report = run_suite(&small_config()).unwrap();
        for suite in &report.suites {
            assert!(
                suite.passed(),
                "suite {} failed: fail={} pre={} starved={}",
                suite.name,
                suite.fail,
                suite.precondition_failures,
                suite.generator_starvation
            );
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.trials = 0;
        assert!(matches!(run_suite(&c), Err(Error::ConfigInvalid(_))));
        let mut c = small_config();
        c.suites.clear();
        assert!(matches!(run_suite(&c), Err(Error::ConfigInvalid(_))));
        let mut c = small_config();
        c.tol_override = Some(-1.0);
        assert!(matches!(run_suite(&c), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn suite_names_roundtrip() {
        for kind in SuiteKind::ALL {
            assert_eq!(kind.name().parse::<SuiteKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<SuiteKind>().is_err());
    }

    #[test]
    fn mutation_is_caught_and_replays() {
        let config = SuiteConfig {
            trials: 2,
            seed: 11,
            suites: vec![SuiteKind::PolarConditions],
            ..SuiteConfig::default()
        };
        let mutation = Mutation {
            suite: SuiteKind::PolarConditions,
            trial: 1,
        };
        let report = run_suite_mutated(&config, Some(&mutation)).unwrap();
        let suite = &report.suites[0];
        assert_eq!(suite.fail, 1);
        assert_eq!(suite.failures.len(), 1);

        let payload = &suite.failures[0];
        let json = serde_json::to_string(payload).unwrap();
        let parsed: FailurePayload = serde_json::from_str(&json).unwrap();
        let tols = config.tolerances();
        let replayed = replay_failure(&parsed, &tols).unwrap();
        assert_eq!(replayed.status, payload.status);
        for (name, value) in &payload.residuals {
            assert_eq!(replayed.residuals.get(name), Some(value), "residual {name}");
        }
    }
}
