//! Deterministic randomized instance generators.
//!
//! Every generator is a pure function of its seed; the suites derive seeds
//! per trial, so reported instances replay bit for bit. Structure-group
//! unitaries are drawn by taking the polar isometry of a random A-linear
//! operator (invertible almost surely), which keeps everything inside L(X)
//! by construction.

use num_complex::Complex64;

use crate::algebra::AlgebraShape;
use crate::cmatrix::{CMatrix, C64, ONE};
use crate::decomposition::{abs_op, polar};
use crate::error::{Error, Result};
use crate::module_space::OperatorMatrix;
use crate::normality::unitarity_residual;
use crate::numkernel;
use crate::rng::SplitMix64;
use crate::tol::Tolerances;

/// Largest embedded dimension k·Σn_i the suites draw.
pub const EMBED_CAP: usize = 24;

/// Per-block cap used by the nullspace-heavy suites (fixed-point sampling
/// and intertwiner solving work in (k·n_i)²-dimensional coordinates).
pub const NULLSPACE_BLOCK_CAP: usize = 6;

/// Bounds for shape sampling.
#[derive(Debug, Clone, Copy)]
pub struct DimPolicy {
    pub max_rank: usize,
    pub max_block_dim: usize,
    pub max_blocks: usize,
}

impl Default for DimPolicy {
    fn default() -> Self {
        Self {
            max_rank: 4,
            max_block_dim: 3,
            max_blocks: 3,
        }
    }
}

/// Draws (shape, rank) uniformly within the policy, redrawing until the
/// embedded dimension fits the cap. The minimal shape always fits, so for
/// extreme policies the draw degrades to it instead of spinning.
pub fn sample_shape(policy: &DimPolicy, rng: &mut SplitMix64) -> (AlgebraShape, usize) {
    for _attempt in 0..10_000 {
        let blocks = 1 + rng.next_below(policy.max_blocks as u64) as usize;
        let dims: Vec<usize> = (0..blocks)
            .map(|_| 1 + rng.next_below(policy.max_block_dim as u64) as usize)
            .collect();
        let k = 1 + rng.next_below(policy.max_rank as u64) as usize;
        let total: usize = dims.iter().sum();
        if k * total <= EMBED_CAP {
            return (AlgebraShape::new(dims).expect("dims are positive"), k);
        }
    }
    (AlgebraShape::new(vec![1]).expect("valid"), 1)
}

/// Like `sample_shape` but with every embedded block k·n_i capped, for the
/// suites that solve nullspaces in vectorized coordinates.
pub fn sample_shape_small(policy: &DimPolicy, rng: &mut SplitMix64) -> (AlgebraShape, usize) {
    let max_rank = policy.max_rank.min(NULLSPACE_BLOCK_CAP);
    let k = 1 + rng.next_below(max_rank as u64) as usize;
    let dim_cap = policy.max_block_dim.min(NULLSPACE_BLOCK_CAP / k).max(1);
    let blocks = 1 + rng.next_below(policy.max_blocks.min(2) as u64) as usize;
    let dims: Vec<usize> = (0..blocks)
        .map(|_| 1 + rng.next_below(dim_cap as u64) as usize)
        .collect();
    (AlgebraShape::new(dims).expect("dims are positive"), k)
}

fn random_operator_from(shape: &AlgebraShape, k: usize, rng: &mut SplitMix64) -> OperatorMatrix {
    let mut t = OperatorMatrix::zero(shape, k);
    for p in 0..k {
        for q in 0..k {
            let e = t.entry_mut(p, q);
            for b in 0..shape.num_blocks() {
                let n = shape.block_dims()[b];
                let blk = e.block_mut(b);
                for r in 0..n {
                    for c in 0..n {
                        blk[(r, c)] = rng.next_complex_gaussian();
                    }
                }
            }
        }
    }
    t
}

/// Operator with i.i.d. standard complex Gaussian entries.
pub fn gen_random_operator(shape: &AlgebraShape, k: usize, seed: u64) -> OperatorMatrix {
    random_operator_from(shape, k, &mut SplitMix64::new(seed))
}

/// Random A-linear unitary: the polar isometry of a Gaussian operator.
pub fn gen_structure_unitary(
    shape: &AlgebraShape,
    k: usize,
    rng: &mut SplitMix64,
) -> OperatorMatrix {
    for _attempt in 0..64 {
        let g = random_operator_from(shape, k, rng);
        let v = polar(&g).isometry;
        if unitarity_residual(&v) < 1e-10 {
            return v;
        }
        // near-singular draw, try again
    }
    unreachable!("64 consecutive singular Gaussian draws");
}

/// Diagonal A-linear operator with the given entry sampler.
fn gen_diagonal(
    shape: &AlgebraShape,
    k: usize,
    rng: &mut SplitMix64,
    mut entry: impl FnMut(&mut SplitMix64) -> C64,
) -> OperatorMatrix {
    let blocks: Vec<CMatrix> = shape
        .block_dims()
        .iter()
        .map(|&n| {
            let d = k * n;
            let mut m = CMatrix::zeros(d, d);
            for i in 0..d {
                m[(i, i)] = entry(rng);
            }
            m
        })
        .collect();
    OperatorMatrix::from_embed_blocks(shape, k, &blocks).expect("diagonal blocks fit the shape")
}

fn complex_gaussian_entry(
    zero_fraction: f64,
    min_modulus: f64,
) -> impl FnMut(&mut SplitMix64) -> C64 {
    move |rng: &mut SplitMix64| {
        let z = rng.next_complex_gaussian();
        if zero_fraction > 0.0 && rng.next_f64() < zero_fraction {
            return C64::new(0.0, 0.0);
        }
        if min_modulus > 0.0 {
            let m = z.norm();
            if m == 0.0 {
                return C64::new(min_modulus, 0.0);
            }
            return z * ((m + min_modulus) / m);
        }
        z
    }
}

/// Normal operator W·D·W* with W a structure-group unitary and D a diagonal
/// complex A-linear operator; `zero_fraction` of the diagonal entries are
/// zeroed to produce nontrivial kernels.
pub fn gen_random_normal(
    shape: &AlgebraShape,
    k: usize,
    seed: u64,
    zero_fraction: f64,
) -> OperatorMatrix {
    let mut rng = SplitMix64::new(seed);
    let w = gen_structure_unitary(shape, k, &mut rng);
    let d = gen_diagonal(
        shape,
        k,
        &mut rng,
        complex_gaussian_entry(zero_fraction, 0.0),
    );
    w.mul(&d)
        .and_then(|wd| wd.mul(&w.adjoint()))
        .expect("same module")
}

/// Normal invertible operator together with its inverse (shared eigenbasis).
fn gen_normal_invertible_with_inverse(
    shape: &AlgebraShape,
    k: usize,
    rng: &mut SplitMix64,
    min_modulus: f64,
) -> (OperatorMatrix, OperatorMatrix) {
    let w = gen_structure_unitary(shape, k, rng);
    let d = gen_diagonal(shape, k, rng, complex_gaussian_entry(0.0, min_modulus));
    let d_inv = invert_diagonal(&d);
    let wa = w.adjoint();
    let t = w.mul(&d).and_then(|x| x.mul(&wa)).expect("same module");
    let t_inv = w.mul(&d_inv).and_then(|x| x.mul(&wa)).expect("same module");
    (t, t_inv)
}

fn invert_diagonal(d: &OperatorMatrix) -> OperatorMatrix {
    let shape = d.shape();
    let k = d.rank();
    let blocks: Vec<CMatrix> = (0..shape.num_blocks())
        .map(|b| {
            let m = d.embed_block(b);
            let n = m.rows();
            let mut inv = CMatrix::zeros(n, n);
            for i in 0..n {
                inv[(i, i)] = ONE / m[(i, i)];
            }
            inv
        })
        .collect();
    OperatorMatrix::from_embed_blocks(shape, k, &blocks).expect("diagonal blocks fit the shape")
}

/// Which commutant the element must live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommutantMode {
    /// Commutes with T and T* (needs T normal).
    OperatorAndAdjoint,
    /// Commutes with |T| only.
    ModulusOnly,
}

/// Element of the commutant: a random polynomial in T and T* (resp. |T|)
/// plus a random operator supported on the kernel.
pub fn gen_commutant_element(t: &OperatorMatrix, seed: u64, mode: CommutantMode) -> OperatorMatrix {
    let mut rng = SplitMix64::new(seed);
    let shape = t.shape();
    let k = t.rank();
    let scale = 1.0 / (1.0 + t.norm());
    let coeff = |rng: &mut SplitMix64| rng.next_complex_gaussian();

    let s = match mode {
        CommutantMode::OperatorAndAdjoint => {
            let u = t.scale(Complex64::new(scale, 0.0));
            let ua = u.adjoint();
            let identity = OperatorMatrix::identity(shape, k);
            let terms = [
                identity.clone(),
                u.clone(),
                ua.clone(),
                u.mul(&ua).expect("same module"),
                u.mul(&u).expect("same module"),
                ua.mul(&ua).expect("same module"),
            ];
            let mut acc = OperatorMatrix::zero(shape, k);
            for term in &terms {
                acc = acc.add(&term.scale(coeff(&mut rng))).expect("same module");
            }
            acc
        }
        CommutantMode::ModulusOnly => {
            let m = abs_op(t).scale(Complex64::new(scale, 0.0));
            let identity = OperatorMatrix::identity(shape, k);
            let m2 = m.mul(&m).expect("same module");
            let mut acc = OperatorMatrix::zero(shape, k);
            for term in [&identity, &m, &m2] {
                acc = acc.add(&term.scale(coeff(&mut rng))).expect("same module");
            }
            acc
        }
    };

    // kernel-supported summand: P_ker R P_ker commutes with T and T* when T
    // is normal (Ker T = Ker T* is reducing) and with |T| always
    let p_ker = crate::decomposition::kernel_projection(t);
    if p_ker.norm() > 0.5 {
        let r = random_operator_from(shape, k, &mut rng);
        let kernel_part = p_ker
            .mul(&r)
            .and_then(|x| x.mul(&p_ker))
            .expect("same module");
        s.add(&kernel_part).expect("same module")
    } else {
        s
    }
}

/// Which Kaplansky instance family to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaplanskyBranch {
    /// S = T⁻¹·M with M normal: TS is normal by construction while S
    /// generically fails to commute with |T|.
    Generic,
    /// S = p(|T|)·W with W a unitary commuting with T: both sides hold.
    Commuting,
}

/// Instance (T, S) with T normal invertible and TS normal, satisfying the
/// product-normality preconditions.
pub fn gen_kaplansky_instance(
    shape: &AlgebraShape,
    k: usize,
    branch: KaplanskyBranch,
    seed: u64,
) -> (OperatorMatrix, OperatorMatrix) {
    let mut rng = SplitMix64::new(seed);
    let (t, t_inv) = gen_normal_invertible_with_inverse(shape, k, &mut rng, 0.3);
    match branch {
        KaplanskyBranch::Generic => {
            let m_seed = rng.next_u64();
            let m = gen_random_normal(shape, k, m_seed, 0.0);
            let s = t_inv.mul(&m).expect("same module");
            (t, s)
        }
        KaplanskyBranch::Commuting => {
            let w = gen_commuting_unitary(&t, &mut rng);
            let modulus = abs_op(&t).scale(Complex64::new(1.0 / (1.0 + t.norm()), 0.0));
            let identity = OperatorMatrix::identity(shape, k);
            let m2 = modulus.mul(&modulus).expect("same module");
            let mut p = OperatorMatrix::zero(shape, k);
            for term in [&identity, &modulus, &m2] {
                p = p
                    .add(&term.scale(rng.next_complex_gaussian()))
                    .expect("same module");
            }
            let s = p.mul(&w).expect("same module");
            (t, s)
        }
    }
}

/// Unitary commuting with a normal T: the polar phase of an invertible
/// element of the C*-algebra generated by T.
fn gen_commuting_unitary(t: &OperatorMatrix, rng: &mut SplitMix64) -> OperatorMatrix {
    let shape = t.shape();
    let k = t.rank();
    let u = t.scale(Complex64::new(1.0 / (1.0 + t.norm()), 0.0));
    let ua = u.adjoint();
    let identity = OperatorMatrix::identity(shape, k);
    for _attempt in 0..256 {
        let mut n = OperatorMatrix::zero(shape, k);
        for term in [&identity, &u, &ua] {
            n = n
                .add(&term.scale(rng.next_complex_gaussian()))
                .expect("same module");
        }
        let svd = numkernel::svd(&n.embed()).expect("jacobi svd did not converge");
        let smin = svd.sigma.last().copied().unwrap_or(0.0);
        if smin > 0.1 * svd.sigma_max() {
            let w = polar(&n).isometry;
            if unitarity_residual(&w) < 1e-10 {
                return w;
            }
        }
        // badly conditioned draw, take fresh coefficients
    }
    unreachable!("256 consecutive ill-conditioned commutant draws");
}

/// Positive operator P (optionally singular) together with a unitary
/// commuting with it: a phase function of P composed with a unitary acting
/// inside Ker(P).
pub fn gen_positive_with_commuting_unitary(
    shape: &AlgebraShape,
    k: usize,
    rng: &mut SplitMix64,
    zero_fraction: f64,
) -> (OperatorMatrix, OperatorMatrix) {
    let w = gen_structure_unitary(shape, k, rng);
    let wa = w.adjoint();

    // real nonnegative diagonal with optional exact zeros
    let mut diag_values: Vec<Vec<f64>> = Vec::new();
    for &n in shape.block_dims() {
        let d = k * n;
        let mut vals = Vec::with_capacity(d);
        for _ in 0..d {
            if zero_fraction > 0.0 && rng.next_f64() < zero_fraction {
                vals.push(0.0);
            } else {
                vals.push(rng.next_gaussian().abs() + 0.05);
            }
        }
        diag_values.push(vals);
    }
    let diag_blocks: Vec<CMatrix> = diag_values
        .iter()
        .map(|vals| {
            let d = vals.len();
            let mut m = CMatrix::zeros(d, d);
            for (i, &v) in vals.iter().enumerate() {
                m[(i, i)] = C64::new(v, 0.0);
            }
            m
        })
        .collect();
    let d_plus =
        OperatorMatrix::from_embed_blocks(shape, k, &diag_blocks).expect("diagonal fits shape");
    let p = w
        .mul(&d_plus)
        .and_then(|x| x.mul(&wa))
        .expect("same module");

    // exp-like phase function of the eigenvalues: equal entries get equal
    // phases, so the result commutes with P even across degeneracies
    let c0 = rng.next_gaussian();
    let c1 = rng.next_gaussian();
    let c2 = rng.next_gaussian();
    let phase_blocks: Vec<CMatrix> = diag_values
        .iter()
        .map(|vals| {
            let d = vals.len();
            let mut m = CMatrix::zeros(d, d);
            for (i, &v) in vals.iter().enumerate() {
                let angle = c0 + c1 * v + c2 * v * v;
                m[(i, i)] = C64::new(angle.cos(), angle.sin());
            }
            m
        })
        .collect();
    let phase =
        OperatorMatrix::from_embed_blocks(shape, k, &phase_blocks).expect("diagonal fits shape");
    let u_phase = w.mul(&phase).and_then(|x| x.mul(&wa)).expect("same module");

    // a genuine unitary inside the kernel, when there is one
    let has_kernel = diag_values.iter().any(|vals| vals.contains(&0.0));
    if !has_kernel {
        return (p, u_phase);
    }
    let ker_blocks: Vec<CMatrix> = diag_values
        .iter()
        .map(|vals| {
            let d = vals.len();
            let mut m = CMatrix::zeros(d, d);
            for (i, &v) in vals.iter().enumerate() {
                if v == 0.0 {
                    m[(i, i)] = ONE;
                }
            }
            m
        })
        .collect();
    let p_ker_diag =
        OperatorMatrix::from_embed_blocks(shape, k, &ker_blocks).expect("diagonal fits shape");
    let p_ker = w
        .mul(&p_ker_diag)
        .and_then(|x| x.mul(&wa))
        .expect("same module");
    let g = random_operator_from(shape, k, rng);
    let compressed = p_ker
        .mul(&g)
        .and_then(|x| x.mul(&p_ker))
        .expect("same module");
    let w_ker = polar(&compressed).isometry;
    let identity = OperatorMatrix::identity(shape, k);
    let factor = identity
        .sub(&p_ker)
        .and_then(|x| x.add(&w_ker))
        .expect("same module");
    let u = u_phase.mul(&factor).expect("same module");
    if unitarity_residual(&u) < 1e-10 {
        (p, u)
    } else {
        // kernel compression came out rank-deficient; the phase unitary
        // alone still commutes with P
        (p, u_phase)
    }
}

/// Random element of the real-linear solution space {T : T = U·T*},
/// computed per algebra block from the nullspace of the realified map
/// X ↦ X − U·X†.
pub fn sample_fixed_point(
    u: &OperatorMatrix,
    seed: u64,
    tols: &Tolerances,
) -> Result<OperatorMatrix> {
    let uni = unitarity_residual(u);
    if uni > tols.strict {
        return Err(Error::PreconditionFailed {
            check: "U is unitary".into(),
            residual: uni,
            tol: tols.strict,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let shape = u.shape();
    let k = u.rank();
    let mut blocks = Vec::with_capacity(shape.num_blocks());
    for b in 0..shape.num_blocks() {
        let ub = u.embed_block(b);
        let n = ub.rows();
        let d = n * n;
        // realified map: column (part·d + m) carries Φ applied to the basis
        // element e_rc (part 0) or i·e_rc (part 1), rows split re / im
        let mut phi = CMatrix::zeros(2 * d, 2 * d);
        for m in 0..d {
            let (r, c) = (m / n, m % n);
            for part in 0..2 {
                let z = if part == 0 { ONE } else { C64::new(0.0, 1.0) };
                let col = part * d + m;
                let mut y = CMatrix::zeros(n, n);
                y[(r, c)] += z;
                for i in 0..n {
                    y[(i, r)] -= ub[(i, c)] * z.conj();
                }
                for m2 in 0..d {
                    let val = y[(m2 / n, m2 % n)];
                    phi[(m2, col)] = C64::new(val.re, 0.0);
                    phi[(d + m2, col)] = C64::new(val.im, 0.0);
                }
            }
        }
        let svd = numkernel::svd(&phi).expect("jacobi svd did not converge");
        let rank = svd.rank();
        let mut w = vec![0.0f64; 2 * d];
        for idx in rank..2 * d {
            let g = rng.next_gaussian();
            for (i, slot) in w.iter_mut().enumerate() {
                *slot += g * svd.v[(i, idx)].re;
            }
        }
        let mut x = CMatrix::zeros(n, n);
        for m in 0..d {
            x[(m / n, m % n)] = C64::new(w[m], w[d + m]);
        }
        blocks.push(x);
    }
    OperatorMatrix::from_embed_blocks(shape, k, &blocks)
}

/// Shared-spectrum normal pair for intertwiner instances: S reuses part of
/// T's spectrum in a fresh eigenbasis, so the intertwiner space is
/// nontrivial.
pub fn gen_fuglede_pair(
    shape: &AlgebraShape,
    k: usize,
    seed: u64,
) -> (OperatorMatrix, OperatorMatrix) {
    let mut rng = SplitMix64::new(seed);
    let w1 = gen_structure_unitary(shape, k, &mut rng);
    let w2 = gen_structure_unitary(shape, k, &mut rng);

    let mut d1_blocks = Vec::new();
    let mut d2_blocks = Vec::new();
    for &n in shape.block_dims() {
        let d = k * n;
        let vals1: Vec<C64> = (0..d).map(|_| rng.next_complex_gaussian()).collect();
        let shared = 1 + rng.next_below(d as u64) as usize;
        let vals2: Vec<C64> = (0..d)
            .map(|i| {
                if i < shared {
                    vals1[i]
                } else {
                    rng.next_complex_gaussian()
                }
            })
            .collect();
        let diag = |vals: &[C64]| {
            let mut m = CMatrix::zeros(d, d);
            for (i, &v) in vals.iter().enumerate() {
                m[(i, i)] = v;
            }
            m
        };
        d1_blocks.push(diag(&vals1));
        d2_blocks.push(diag(&vals2));
    }
    let d1 = OperatorMatrix::from_embed_blocks(shape, k, &d1_blocks).expect("diagonal fits");
    let d2 = OperatorMatrix::from_embed_blocks(shape, k, &d2_blocks).expect("diagonal fits");
    let t = w1
        .mul(&d1)
        .and_then(|x| x.mul(&w1.adjoint()))
        .expect("same module");
    let s = w2
        .mul(&d2)
        .and_then(|x| x.mul(&w2.adjoint()))
        .expect("same module");
    (t, s)
}
