//! Parameters and building blocks of the product-matrix MBR construction.
//!
//! A single code instance (one "layer") stores `d` symbols per node and
//! carries `kd - k(k-1)/2` message symbols. Larger `beta` is obtained by
//! concatenating `beta` independent layers, so a stripe of `alpha = d * beta`
//! symbols per node holds `B = beta * (kd - k(k-1)/2)` message symbols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemParams {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub field: FieldSpec,
    pub beta: usize,
}

impl SystemParams {
    /// Validates `1 <= k <= d < n`, `q >= n` and `beta >= 1`.
    pub fn new(n: usize, k: usize, d: usize, field: FieldSpec, beta: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if k > d {
            return Err(Error::InvalidParams(format!("k = {k} exceeds d = {d}")));
        }
        if d >= n {
            return Err(Error::InvalidParams(format!(
                "d = {d} must be below n = {n}"
            )));
        }
        if beta == 0 {
            return Err(Error::InvalidParams("beta must be positive".into()));
        }
        if (field.size() as usize) < n {
            return Err(Error::InvalidParams(format!(
                "field {field} has fewer than n = {n} elements"
            )));
        }
        Ok(SystemParams {
            n,
            k,
            d,
            field,
            beta,
        })
    }

    /// Symbols stored per node per stripe: `d * beta`.
    pub fn alpha(&self) -> usize {
        self.d * self.beta
    }

    /// Message symbols per layer: `kd - k(k-1)/2`.
    pub fn layer_message_len(&self) -> usize {
        self.k * self.d - self.k * (self.k - 1) / 2
    }

    /// Message symbols per stripe: `beta * (kd - k(k-1)/2)`.
    pub fn message_len(&self) -> usize {
        self.beta * self.layer_message_len()
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node == 0 || node > self.n {
            return Err(Error::InvalidNode { node, n: self.n });
        }
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        1..=self.n
    }
}

/// The n encoding vectors ψ₁..ψₙ as rows of an `n × d` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodingVectors {
    points: Vec<u32>,
    psi: Matrix,
}

impl EncodingVectors {
    /// Vandermonde vectors `ψᵢ = (1, xᵢ, …, xᵢ^{d-1})` on the points
    /// `xᵢ = i` (reduced into the field, so `x_q = 0` when `n = q`).
    ///
    /// Distinct points make every d rows a Vandermonde block and every k rows
    /// restricted to the first k columns a smaller Vandermonde block, which is
    /// what decoding and repair rely on. Distinctness is checked here.
    pub fn build(params: &SystemParams) -> Result<Self> {
        let f = params.field;
        let points: Vec<u32> = (1..=params.n as u64).map(|i| f.from_index(i)).collect();
        let mut seen = std::collections::HashSet::new();
        if !points.iter().all(|p| seen.insert(*p)) {
            return Err(Error::FieldTooSmall(format!(
                "{f} cannot supply {} distinct evaluation points",
                params.n
            )));
        }
        let mut data = Vec::with_capacity(params.n * params.d);
        for &x in &points {
            data.extend((0..params.d as u64).map(|e| f.pow(x, e)));
        }
        let psi = Matrix::new(f, params.n, params.d, data)?;
        Ok(EncodingVectors { points, psi })
    }

    pub fn points(&self) -> &[u32] {
        &self.points
    }

    /// `n × d` matrix whose row `i - 1` is ψᵢᵀ.
    pub fn matrix(&self) -> &Matrix {
        &self.psi
    }

    /// ψ for a 1-based node id.
    pub fn psi(&self, node: usize) -> &[u32] {
        self.psi.row(node - 1)
    }

    /// `d × d` matrix with rows ψ_h for the given nodes.
    pub fn rows_of(&self, nodes: &[usize]) -> Matrix {
        let idx: Vec<usize> = nodes.iter().map(|&v| v - 1).collect();
        self.psi.select_rows(&idx)
    }

    /// `d × d` matrix with columns ψ_h for the given nodes.
    pub fn columns_of(&self, nodes: &[usize]) -> Matrix {
        self.rows_of(nodes).transpose()
    }

    /// Exhaustively checks both independence conditions:
    /// every d rows have rank d, and every k rows restricted to the first k
    /// columns have rank k.
    pub fn verify_independence(&self, params: &SystemParams) -> Result<()> {
        let n = params.n;
        let first_k: Vec<usize> = (0..params.k).collect();
        let truncated = self.psi.select_cols(&first_k);
        for subset in combinations(n, params.d) {
            if self.psi.select_rows(&subset).rank() != params.d {
                return Err(Error::SingularMatrix);
            }
        }
        for subset in combinations(n, params.k) {
            if truncated.select_rows(&subset).rank() != params.k {
                return Err(Error::SingularMatrix);
            }
        }
        Ok(())
    }
}

/// The symmetric `d × d` message matrix `[S R; Rᵀ 0]` of one layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageMatrix {
    k: usize,
    m: Matrix,
}

impl MessageMatrix {
    /// Fills the free entries from `message`: first the upper triangle of S in
    /// row-major order, then R in row-major order.
    pub fn build(message: &[u32], params: &SystemParams) -> Result<Self> {
        let (k, d) = (params.k, params.d);
        let expected = params.layer_message_len();
        if message.len() != expected {
            return Err(Error::InvalidMessage(format!(
                "expected {expected} symbols per layer, got {}",
                message.len()
            )));
        }
        let f = params.field;
        let mut m = Matrix::zeros(f, d, d);
        let mut it = message.iter().copied();
        for i in 0..k {
            for j in i..k {
                let v = it.next().expect("length checked");
                m.set(i, j, v)?;
                m.set(j, i, v)?;
            }
        }
        for i in 0..k {
            for j in k..d {
                let v = it.next().expect("length checked");
                m.set(i, j, v)?;
                m.set(j, i, v)?;
            }
        }
        Ok(MessageMatrix { k, m })
    }

    /// Wraps an existing matrix after checking symmetry and the zero block.
    pub fn from_matrix(m: Matrix, params: &SystemParams) -> Result<Self> {
        let (k, d) = (params.k, params.d);
        if m.rows() != d || m.cols() != d {
            return Err(Error::MalformedMessageMatrix(format!(
                "expected {d}x{d}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if m.field() != params.field {
            return Err(Error::FieldMismatch {
                left: m.field(),
                right: params.field,
            });
        }
        for i in 0..d {
            for j in 0..d {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::MalformedMessageMatrix(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
                if i >= k && j >= k && m.get(i, j) != 0 {
                    return Err(Error::MalformedMessageMatrix(format!(
                        "nonzero entry in the lower-right block at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(MessageMatrix { k, m })
    }

    /// Inverse of [`MessageMatrix::build`].
    pub fn flatten(&self) -> Vec<u32> {
        let d = self.m.rows();
        let k = self.k;
        let mut out = Vec::with_capacity(k * d - k * (k - 1) / 2);
        for i in 0..k {
            for j in i..k {
                out.push(self.m.get(i, j));
            }
        }
        for i in 0..k {
            for j in k..d {
                out.push(self.m.get(i, j));
            }
        }
        out
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn s_block(&self) -> Matrix {
        let idx: Vec<usize> = (0..self.k).collect();
        self.m.select_rows(&idx).select_cols(&idx)
    }

    pub fn r_block(&self) -> Matrix {
        let rows: Vec<usize> = (0..self.k).collect();
        let cols: Vec<usize> = (self.k..self.m.cols()).collect();
        self.m.select_rows(&rows).select_cols(&cols)
    }
}

/// Splits a flat message into per-layer message matrices.
pub fn build_layers(message: &[u32], params: &SystemParams) -> Result<Vec<MessageMatrix>> {
    let stripe = params.message_len();
    if message.is_empty() || !message.len().is_multiple_of(stripe) {
        return Err(Error::InvalidMessage(format!(
            "message length {} is not a positive multiple of B = {stripe}",
            message.len()
        )));
    }
    message
        .chunks(params.layer_message_len())
        .map(|chunk| MessageMatrix::build(chunk, params))
        .collect()
}

/// All `r`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..r).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..r).rev().find(|&i| cur[i] < n - r + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..r {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
