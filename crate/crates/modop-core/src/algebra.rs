//! Finite-dimensional C*-algebras A = ⊕_i M_{n_i}(ℂ).
//!
//! Elements are block-diagonal lists of complex matrices; the involution is
//! the blockwise conjugate transpose and the norm is the maximum spectral
//! norm over blocks.

use std::fmt;

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cmatrix::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::numkernel::{self, PsdPower};

/// Block dimensions (n_1, …, n_m) of a direct sum of full matrix algebras.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct AlgebraShape {
    dims: Vec<usize>,
}

impl AlgebraShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("shape needs at least one block".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidShape(
                "block dimensions must be positive".into(),
            ));
        }
        Ok(Self { dims })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    /// Σ n_i, the dimension of the defining representation.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }
}

impl fmt::Display for AlgebraShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

impl<'de> Deserialize<'de> for AlgebraShape {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dims = Vec::<usize>::deserialize(d)?;
        AlgebraShape::new(dims).map_err(D::Error::custom)
    }
}

/// An element of ⊕_i M_{n_i}(ℂ).
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    shape: AlgebraShape,
    blocks: Vec<CMatrix>,
}

impl AlgebraElement {
    /// Validates that block count and dimensions match the shape.
    pub fn new(shape: AlgebraShape, blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.len() != shape.num_blocks() {
            return Err(Error::InvalidShape(format!(
                "expected {} blocks, got {}",
                shape.num_blocks(),
                blocks.len()
            )));
        }
        for (b, (&n, m)) in shape.block_dims().iter().zip(&blocks).enumerate() {
            if m.rows() != n || m.cols() != n {
                return Err(Error::InvalidShape(format!(
                    "block {b} must be {n}x{n}, got {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(Self { shape, blocks })
    }

    pub fn zero(shape: &AlgebraShape) -> Self {
        let blocks = shape
            .block_dims()
            .iter()
            .map(|&n| CMatrix::zeros(n, n))
            .collect();
        Self {
            shape: shape.clone(),
            blocks,
        }
    }

    pub fn identity(shape: &AlgebraShape) -> Self {
        let blocks = shape
            .block_dims()
            .iter()
            .map(|&n| CMatrix::identity(n))
            .collect();
        Self {
            shape: shape.clone(),
            blocks,
        }
    }

    /// Matrix unit E_ij in one block, zero elsewhere.
    pub fn matrix_unit(shape: &AlgebraShape, block: usize, i: usize, j: usize) -> Self {
        let mut e = Self::zero(shape);
        e.blocks[block][(i, j)] = C64::new(1.0, 0.0);
        e
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn block(&self, b: usize) -> &CMatrix {
        &self.blocks[b]
    }

    pub fn block_mut(&mut self, b: usize) -> &mut CMatrix {
        &mut self.blocks[b]
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "algebra shapes {} and {} differ",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            blocks,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            blocks,
        })
    }

    /// Blockwise matrix product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.matmul(b))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            blocks,
        })
    }

    pub fn scale(&self, lambda: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            blocks: self.blocks.iter().map(|b| b.scale(lambda)).collect(),
        }
    }

    /// The involution: blockwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    /// C*-norm: the largest singular value over the blocks.
    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(numkernel::spectral_norm)
            .fold(0.0, f64::max)
    }

    /// Positive square root of a selfadjoint PSD element.
    ///
    /// Eigenvalues within the PSD tolerance below zero are clamped; anything
    /// lower is `NotPositive`.
    pub fn positive_sqrt(&self) -> Result<Self> {
        let blocks: Result<Vec<CMatrix>> = self
            .blocks
            .iter()
            .map(|b| numkernel::psd_power(b, PsdPower::Sqrt))
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            blocks: blocks?,
        })
    }
}

// ---------------------------------------------------------------------------
// JSON wire format:
// {"shape":[n1,...], "blocks":[[[ [re,im], ...row ], ...rows], ...]}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AlgebraElementWire {
    shape: Vec<usize>,
    blocks: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&AlgebraElement> for AlgebraElementWire {
    fn from(e: &AlgebraElement) -> Self {
        let blocks = e
            .blocks
            .iter()
            .map(|m| {
                (0..m.rows())
                    .map(|i| {
                        (0..m.cols())
                            .map(|j| [m[(i, j)].re, m[(i, j)].im])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            shape: e.shape.block_dims().to_vec(),
            blocks,
        }
    }
}

impl TryFrom<AlgebraElementWire> for AlgebraElement {
    type Error = Error;

    fn try_from(w: AlgebraElementWire) -> Result<Self> {
        let shape = AlgebraShape::new(w.shape)?;
        let mut blocks = Vec::with_capacity(w.blocks.len());
        for (b, rows) in w.blocks.iter().enumerate() {
            let n = *shape
                .block_dims()
                .get(b)
                .ok_or_else(|| Error::InvalidShape("more blocks than shape entries".into()))?;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidShape(format!("block {b} is not {n}x{n}")));
            }
            blocks.push(CMatrix::from_fn(n, n, |i, j| {
                C64::new(rows[i][j][0], rows[i][j][1])
            }));
        }
        AlgebraElement::new(shape, blocks)
    }
}

impl Serialize for AlgebraElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AlgebraElementWire::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for AlgebraElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = AlgebraElementWire::deserialize(d)?;
        AlgebraElement::try_from(wire).map_err(D::Error::custom)
    }
}
