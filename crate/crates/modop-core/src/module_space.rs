//! The standard Hilbert A-module X = A^k and adjointable operators on it.
//!
//! Operators are k×k matrices over A acting by left multiplication; every
//! such matrix is adjointable with adjoint equal to the entry-wise
//! *-transpose. `embed` realizes the *-isomorphism
//! M_k(⊕_i M_{n_i}) ≅ ⊕_i M_{k·n_i} so the numerical kernels can work on one
//! plain complex matrix; `unembed` reads a block-structured matrix back.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{AlgebraElement, AlgebraShape};
use crate::cmatrix::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::numkernel;
use crate::tol;

/// Element of X = A^k: a k-tuple of algebra elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleVector {
    shape: AlgebraShape,
    entries: Vec<AlgebraElement>,
}

impl ModuleVector {
    pub fn new(shape: AlgebraShape, entries: Vec<AlgebraElement>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidShape("module rank must be positive".into()));
        }
        for e in &entries {
            if e.shape() != &shape {
                return Err(Error::ShapeMismatch(
                    "vector entry shape differs from module shape".into(),
                ));
            }
        }
        Ok(Self { shape, entries })
    }

    pub fn zero(shape: &AlgebraShape, rank: usize) -> Self {
        Self {
            shape: shape.clone(),
            entries: (0..rank).map(|_| AlgebraElement::zero(shape)).collect(),
        }
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, i: usize) -> &AlgebraElement {
        &self.entries[i]
    }

    pub fn entry_mut(&mut self, i: usize) -> &mut AlgebraElement {
        &mut self.entries[i]
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape || self.rank() != other.rank() {
            return Err(Error::ShapeMismatch(
                "module vectors live in different modules".into(),
            ));
        }
        Ok(())
    }

    /// A-valued inner product ⟨x, y⟩ = Σ_i x_i* · y_i, A-linear in y.
    pub fn inner_product(&self, other: &Self) -> Result<AlgebraElement> {
        self.check_compatible(other)?;
        let mut acc = AlgebraElement::zero(&self.shape);
        for (x, y) in self.entries.iter().zip(&other.entries) {
            acc = acc.add(&x.adjoint().mul(y)?)?;
        }
        Ok(acc)
    }

    /// ‖x‖ = ‖⟨x, x⟩‖^(1/2).
    pub fn norm(&self) -> f64 {
        let g = self
            .inner_product(self)
            .expect("vector is compatible with itself");
        g.norm().sqrt()
    }

    /// Right module action x · a.
    pub fn right_mul(&self, a: &AlgebraElement) -> Result<Self> {
        let entries: Result<Vec<_>> = self.entries.iter().map(|x| x.mul(a)).collect();
        Ok(Self {
            shape: self.shape.clone(),
            entries: entries?,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let entries: Result<Vec<_>> = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            entries: entries?,
        })
    }

    pub fn scale(&self, lambda: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            entries: self.entries.iter().map(|e| e.scale(lambda)).collect(),
        }
    }
}

/// Adjointable operator on A^k, stored as a k×k grid over A (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    shape: AlgebraShape,
    rank: usize,
    entries: Vec<AlgebraElement>,
}

impl OperatorMatrix {
    pub fn new(shape: AlgebraShape, rank: usize, entries: Vec<AlgebraElement>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidShape("operator rank must be positive".into()));
        }
        if entries.len() != rank * rank {
            return Err(Error::InvalidShape(format!(
                "expected {} entries, got {}",
                rank * rank,
                entries.len()
            )));
        }
        for e in &entries {
            if e.shape() != &shape {
                return Err(Error::ShapeMismatch(
                    "operator entry shape differs from module shape".into(),
                ));
            }
        }
        Ok(Self {
            shape,
            rank,
            entries,
        })
    }

    pub fn zero(shape: &AlgebraShape, rank: usize) -> Self {
        Self {
            shape: shape.clone(),
            rank,
            entries: (0..rank * rank)
                .map(|_| AlgebraElement::zero(shape))
                .collect(),
        }
    }

    pub fn identity(shape: &AlgebraShape, rank: usize) -> Self {
        let mut t = Self::zero(shape, rank);
        for p in 0..rank {
            *t.entry_mut(p, p) = AlgebraElement::identity(shape);
        }
        t
    }

    pub fn from_fn(
        shape: &AlgebraShape,
        rank: usize,
        mut f: impl FnMut(usize, usize) -> AlgebraElement,
    ) -> Self {
        let entries = (0..rank * rank)
            .map(|idx| f(idx / rank, idx % rank))
            .collect();
        Self {
            shape: shape.clone(),
            rank,
            entries,
        }
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Dimension of the embedded complex matrix, k · Σ n_i.
    pub fn embed_dim(&self) -> usize {
        self.rank * self.shape.total_dim()
    }

    pub fn entry(&self, p: usize, q: usize) -> &AlgebraElement {
        &self.entries[p * self.rank + q]
    }

    pub fn entry_mut(&mut self, p: usize, q: usize) -> &mut AlgebraElement {
        &mut self.entries[p * self.rank + q]
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape || self.rank != other.rank {
            return Err(Error::ShapeMismatch(
                "operators act on different modules".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let entries: Result<Vec<_>> = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            rank: self.rank,
            entries: entries?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let entries: Result<Vec<_>> = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            rank: self.rank,
            entries: entries?,
        })
    }

    /// Operator composition.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let k = self.rank;
        let mut out = Self::zero(&self.shape, k);
        for p in 0..k {
            for q in 0..k {
                let mut acc = AlgebraElement::zero(&self.shape);
                for l in 0..k {
                    acc = acc.add(&self.entry(p, l).mul(other.entry(l, q))?)?;
                }
                *out.entry_mut(p, q) = acc;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, lambda: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            rank: self.rank,
            entries: self.entries.iter().map(|e| e.scale(lambda)).collect(),
        }
    }

    /// The adjoint (T*)_pq = (T_qp)*, satisfying ⟨Tx, y⟩ = ⟨x, T*y⟩.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(&self.shape, self.rank, |p, q| self.entry(q, p).adjoint())
    }

    /// (Tx)_p = Σ_q T_pq · x_q.
    pub fn apply(&self, x: &ModuleVector) -> Result<ModuleVector> {
        if x.shape() != &self.shape || x.rank() != self.rank {
            return Err(Error::ShapeMismatch(
                "vector does not live in the operator's module".into(),
            ));
        }
        let mut out = ModuleVector::zero(&self.shape, self.rank);
        for p in 0..self.rank {
            let mut acc = AlgebraElement::zero(&self.shape);
            for q in 0..self.rank {
                acc = acc.add(&self.entry(p, q).mul(x.entry(q))?)?;
            }
            *out.entry_mut(p) = acc;
        }
        Ok(out)
    }

    /// Faithful *-isomorphism onto a block-diagonal complex matrix.
    ///
    /// Block i occupies the index range [k·offset_i, k·offset_i + k·n_i);
    /// within it, module coordinate p and matrix row r map to p·n_i + r.
    pub fn embed(&self) -> CMatrix {
        let k = self.rank;
        let total = self.embed_dim();
        let mut m = CMatrix::zeros(total, total);
        let mut offset = 0usize;
        for (b, &n) in self.shape.block_dims().iter().enumerate() {
            for p in 0..k {
                for q in 0..k {
                    let blk = self.entry(p, q).block(b);
                    for r in 0..n {
                        for c in 0..n {
                            m[(offset + p * n + r, offset + q * n + c)] = blk[(r, c)];
                        }
                    }
                }
            }
            offset += k * n;
        }
        m
    }

    /// Reads a complex matrix back into M_k(A).
    ///
    /// Off-structure mass (anything outside the block-diagonal image of
    /// `embed`) must stay below the embed tolerance.
    pub fn unembed(m: &CMatrix, shape: &AlgebraShape, rank: usize) -> Result<Self> {
        let total = rank * shape.total_dim();
        if m.rows() != total || m.cols() != total {
            return Err(Error::InvalidShape(format!(
                "embedded matrix must be {total}x{total}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        // everything outside the diagonal blocks is off-structure
        let mut off_mass = 0.0f64;
        {
            let mut offset = 0usize;
            let mut spans = Vec::with_capacity(shape.num_blocks());
            for &n in shape.block_dims() {
                spans.push((offset, offset + rank * n));
                offset += rank * n;
            }
            for i in 0..total {
                let (is_, ie) = *spans
                    .iter()
                    .find(|(s, e)| (*s..*e).contains(&i))
                    .expect("index covered by block spans");
                for j in 0..total {
                    if j < is_ || j >= ie {
                        off_mass += m[(i, j)].norm_sqr();
                    }
                }
            }
        }
        let off_mass = off_mass.sqrt();
        let gate = tol::embed_tol(m.frobenius_norm());
        if off_mass > gate {
            return Err(Error::StructureViolation {
                mass: off_mass,
                tol: gate,
            });
        }

        let mut out = Self::zero(shape, rank);
        let mut offset = 0usize;
        for (b, &n) in shape.block_dims().iter().enumerate() {
            for p in 0..rank {
                for q in 0..rank {
                    let blk = out.entry_mut(p, q).block_mut(b);
                    for r in 0..n {
                        for c in 0..n {
                            blk[(r, c)] = m[(offset + p * n + r, offset + q * n + c)];
                        }
                    }
                }
            }
            offset += rank * n;
        }
        Ok(out)
    }

    /// The embedded block for algebra block `b`, a (k·n_b)-dimensional
    /// complex matrix.
    pub fn embed_block(&self, b: usize) -> CMatrix {
        let n = self.shape.block_dims()[b];
        CMatrix::from_fn(self.rank * n, self.rank * n, |i, j| {
            self.entry(i / n, j / n).block(b)[(i % n, j % n)]
        })
    }

    /// Rebuilds an operator from per-block embedded matrices.
    pub fn from_embed_blocks(
        shape: &AlgebraShape,
        rank: usize,
        blocks: &[CMatrix],
    ) -> Result<Self> {
        if blocks.len() != shape.num_blocks() {
            return Err(Error::InvalidShape(format!(
                "expected {} embedded blocks, got {}",
                shape.num_blocks(),
                blocks.len()
            )));
        }
        let mut out = Self::zero(shape, rank);
        for (b, (&n, m)) in shape.block_dims().iter().zip(blocks).enumerate() {
            if m.rows() != rank * n || m.cols() != rank * n {
                return Err(Error::InvalidShape(format!(
                    "embedded block {b} must be {0}x{0}",
                    rank * n
                )));
            }
            for p in 0..rank {
                for q in 0..rank {
                    let blk = out.entry_mut(p, q).block_mut(b);
                    for r in 0..n {
                        for c in 0..n {
                            blk[(r, c)] = m[(p * n + r, q * n + c)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Operator norm: the largest singular value of the embedding.
    pub fn norm(&self) -> f64 {
        numkernel::spectral_norm(&self.embed())
    }
}

// ---------------------------------------------------------------------------
// JSON wire format:
// {"shape":[...], "rank":k, "entries": k×k grid of AlgebraElement JSON}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct OperatorMatrixWire {
    shape: Vec<usize>,
    rank: usize,
    entries: Vec<Vec<AlgebraElement>>,
}

impl From<&OperatorMatrix> for OperatorMatrixWire {
    fn from(t: &OperatorMatrix) -> Self {
        let entries = (0..t.rank)
            .map(|p| (0..t.rank).map(|q| t.entry(p, q).clone()).collect())
            .collect();
        Self {
            shape: t.shape.block_dims().to_vec(),
            rank: t.rank,
            entries,
        }
    }
}

impl TryFrom<OperatorMatrixWire> for OperatorMatrix {
    type Error = Error;

    fn try_from(w: OperatorMatrixWire) -> Result<Self> {
        let shape = AlgebraShape::new(w.shape)?;
        if w.entries.len() != w.rank || w.entries.iter().any(|row| row.len() != w.rank) {
            return Err(Error::InvalidShape(format!(
                "entries must form a {0}x{0} grid",
                w.rank
            )));
        }
        let entries: Vec<AlgebraElement> = w.entries.into_iter().flatten().collect();
        OperatorMatrix::new(shape, w.rank, entries)
    }
}

impl Serialize for OperatorMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorMatrixWire::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for OperatorMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = OperatorMatrixWire::deserialize(d)?;
        OperatorMatrix::try_from(wire).map_err(D::Error::custom)
    }
}
