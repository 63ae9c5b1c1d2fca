//! The four storage codes and their encoders.
//!
//! Baseline, C1 and C2 are all product-matrix MBR codes: node i holds
//! `ψᵢᵀ M φᵢ` for an invertible `d × d` transform `φᵢ` (identity, `Ψ₀`, or
//! the cyclic window `[ψ_{i⊕1} … ψ_{i⊕d}]`). CompleteGraph is the d = n−1
//! code that places one MDS-coded symbol on every edge of the complete graph.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pm::{EncodingVectors, MessageMatrix, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeVariant {
    Baseline,
    C1,
    C2,
    CompleteGraph,
}

impl CodeVariant {
    pub const ALL: [CodeVariant; 4] = [
        CodeVariant::Baseline,
        CodeVariant::C1,
        CodeVariant::C2,
        CodeVariant::CompleteGraph,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CodeVariant::Baseline => "baseline",
            CodeVariant::C1 => "c1",
            CodeVariant::C2 => "c2",
            CodeVariant::CompleteGraph => "complete-graph",
        }
    }

    pub fn tag(&self) -> u8 {
        match self {
            CodeVariant::Baseline => 0,
            CodeVariant::C1 => 1,
            CodeVariant::C2 => 2,
            CodeVariant::CompleteGraph => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        CodeVariant::ALL
            .into_iter()
            .find(|v| v.tag() == tag)
            .ok_or_else(|| Error::Unsupported(format!("unknown variant tag {tag}")))
    }

    pub fn is_product_matrix(&self) -> bool {
        !matches!(self, CodeVariant::CompleteGraph)
    }

    /// Checks that this variant can be instantiated at `params`.
    pub fn check_admissible(&self, params: &SystemParams) -> Result<()> {
        if let CodeVariant::CompleteGraph = self {
            if params.d != params.n - 1 {
                return Err(Error::Unsupported(format!(
                    "the complete-graph code needs d = n - 1 (n = {}, d = {})",
                    params.n, params.d
                )));
            }
            let edges = edge_count(params.n);
            if (params.field.size() as usize) < edges + 1 {
                return Err(Error::FieldTooSmall(format!(
                    "{} has fewer than {} nonzero points for {edges} edges",
                    params.field, edges
                )));
            }
        }
        Ok(())
    }

    pub fn admissible(&self, params: &SystemParams) -> bool {
        self.check_admissible(params).is_ok()
    }
}

impl fmt::Display for CodeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CodeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "c" => Ok(CodeVariant::Baseline),
            "c1" | "systematic" => Ok(CodeVariant::C1),
            "c2" | "cyclic" => Ok(CodeVariant::C2),
            "complete-graph" | "complete_graph" | "cg" => Ok(CodeVariant::CompleteGraph),
            other => Err(Error::Unsupported(format!("unknown variant '{other}'"))),
        }
    }
}

/// `x ⊕ y` on the cycle `1..=n`.
pub fn cyclic_add(x: usize, y: usize, n: usize) -> usize {
    1 + (x - 1 + y % n) % n
}

/// `x ⊖ y` on the cycle `1..=n`.
pub fn cyclic_sub(x: usize, y: usize, n: usize) -> usize {
    1 + (x - 1 + n - y % n) % n
}

/// Symbols held by one node: `alpha` per stripe, laid out stripe after stripe
/// and, inside a stripe, layer after layer (`d` symbols each).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeContent {
    pub node_id: usize,
    pub variant: CodeVariant,
    pub symbols: Vec<u32>,
}

impl NodeContent {
    pub fn stripes(&self, params: &SystemParams) -> usize {
        self.symbols.len() / params.alpha()
    }

    pub fn layers(&self, params: &SystemParams) -> usize {
        self.symbols.len() / params.d
    }

    pub fn layer(&self, l: usize, params: &SystemParams) -> &[u32] {
        &self.symbols[l * params.d..(l + 1) * params.d]
    }

    /// Checks the symbol count and field range against `params`.
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        params.check_node(self.node_id)?;
        let alpha = params.alpha();
        if self.symbols.is_empty() || !self.symbols.len().is_multiple_of(alpha) {
            return Err(Error::MalformedContent(format!(
                "node {} holds {} symbols, not a positive multiple of alpha = {alpha}",
                self.node_id,
                self.symbols.len()
            )));
        }
        if let Some(&v) = self.symbols.iter().find(|&&v| !params.field.contains(v)) {
            return Err(Error::ValueOutOfRange {
                value: v,
                field: params.field,
            });
        }
        Ok(())
    }
}

/// `content(variant) = content(baseline) · phi` for one node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeTransform {
    pub node_id: usize,
    pub phi: Matrix,
}

impl NodeTransform {
    pub fn new(
        variant: CodeVariant,
        node: usize,
        vectors: &EncodingVectors,
        params: &SystemParams,
    ) -> Result<Self> {
        params.check_node(node)?;
        let phi = match variant {
            CodeVariant::Baseline => Matrix::identity(params.field, params.d),
            CodeVariant::C1 => {
                let first_d: Vec<usize> = (1..=params.d).collect();
                vectors.columns_of(&first_d)
            }
            CodeVariant::C2 => {
                let window: Vec<usize> = (1..=params.d)
                    .map(|t| cyclic_add(node, t, params.n))
                    .collect();
                vectors.columns_of(&window)
            }
            CodeVariant::CompleteGraph => {
                return Err(Error::Unsupported(
                    "the complete-graph code is not a transform of the baseline code".into(),
                ))
            }
        };
        if phi.rank() != params.d {
            return Err(Error::SingularMatrix);
        }
        Ok(NodeTransform { node_id: node, phi })
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.phi.inverse()
    }
}

pub fn node_transform(
    variant: CodeVariant,
    node: usize,
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<NodeTransform> {
    NodeTransform::new(variant, node, vectors, params)
}

/// Encodes layers of a product-matrix code. `layers.len()` must be a positive
/// multiple of `beta`; node i receives `ψᵢᵀ M φᵢ` for every layer in order.
pub fn encode(
    variant: CodeVariant,
    layers: &[MessageMatrix],
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<Vec<NodeContent>> {
    if !variant.is_product_matrix() {
        return Err(Error::Unsupported(
            "use encode_complete_graph for the complete-graph code".into(),
        ));
    }
    if layers.is_empty() || !layers.len().is_multiple_of(params.beta) {
        return Err(Error::InvalidMessage(format!(
            "{} layers is not a positive multiple of beta = {}",
            layers.len(),
            params.beta
        )));
    }
    for layer in layers {
        let m = layer.matrix();
        if m.field() != params.field {
            return Err(Error::FieldMismatch {
                left: m.field(),
                right: params.field,
            });
        }
        if m.rows() != params.d {
            return Err(Error::DimensionMismatch(format!(
                "message matrix is {}x{}, expected {d}x{d}",
                m.rows(),
                m.cols(),
                d = params.d
            )));
        }
    }
    params
        .nodes()
        .map(|node| {
            let phi = NodeTransform::new(variant, node, vectors, params)?.phi;
            let psi = vectors.psi(node);
            let mut symbols = Vec::with_capacity(layers.len() * params.d);
            for layer in layers {
                let row = layer.matrix().left_mul_vec(psi)?;
                symbols.extend(phi.left_mul_vec(&row)?);
            }
            Ok(NodeContent {
                node_id: node,
                variant,
                symbols,
            })
        })
        .collect()
}

pub fn edge_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Position of the undirected edge `{a, b}` in lexicographic `(min, max)` order.
pub fn edge_index(a: usize, b: usize, n: usize) -> usize {
    let (i, j) = if a < b { (a, b) } else { (b, a) };
    debug_assert!(i >= 1 && j <= n && i < j);
    // Edges starting at 1..i-1 come first.
    (i - 1) * n - (i - 1) * i / 2 + (j - i - 1)
}

/// Edge indices of node `i`, in ascending neighbor order.
pub fn incident_edges(node: usize, n: usize) -> Vec<usize> {
    (1..=n)
        .filter(|&j| j != node)
        .map(|j| edge_index(node, j, n))
        .collect()
}

/// Evaluation point of edge `e`: the integer `e + 1` in the field.
fn edge_point(e: usize, params: &SystemParams) -> u32 {
    params.field.from_index(e as u64 + 1)
}

/// Encodes with the complete-graph repair-by-transfer code: each layer's
/// `kd - k(k-1)/2` symbols are the coefficients of a polynomial evaluated at
/// the `n(n-1)/2` edge points, and node i keeps the evaluations on its edges.
pub fn encode_complete_graph(message: &[u32], params: &SystemParams) -> Result<Vec<NodeContent>> {
    CodeVariant::CompleteGraph.check_admissible(params)?;
    let stripe = params.message_len();
    if message.is_empty() || !message.len().is_multiple_of(stripe) {
        return Err(Error::InvalidMessage(format!(
            "message length {} is not a positive multiple of B = {stripe}",
            message.len()
        )));
    }
    if let Some(&v) = message.iter().find(|&&v| !params.field.contains(v)) {
        return Err(Error::ValueOutOfRange {
            value: v,
            field: params.field,
        });
    }
    let f = params.field;
    let n = params.n;
    let b = params.layer_message_len();
    let edges = edge_count(n);
    // Row e holds the powers of the point of edge e.
    let mut eval = Vec::with_capacity(edges * b);
    for e in 0..edges {
        let x = edge_point(e, params);
        eval.extend((0..b as u64).map(|t| f.pow(x, t)));
    }
    let eval = Matrix::new(f, edges, b, eval)?;

    let layers = message.len() / b;
    let mut contents: Vec<NodeContent> = params
        .nodes()
        .map(|node| NodeContent {
            node_id: node,
            variant: CodeVariant::CompleteGraph,
            symbols: Vec::with_capacity(layers * (n - 1)),
        })
        .collect();
    let incident: Vec<Vec<usize>> = params.nodes().map(|i| incident_edges(i, n)).collect();
    for coeffs in message.chunks(b) {
        let codeword = eval.mul_vec(coeffs)?;
        for (content, edges) in contents.iter_mut().zip(&incident) {
            content.symbols.extend(edges.iter().map(|&e| codeword[e]));
        }
    }
    Ok(contents)
}

/// Recovers each layer's polynomial coefficients from `layer_message_len`
/// distinct edge evaluations. `edge_values[l]` holds the layer-l values of the
/// edges listed in `edges`.
pub(crate) fn decode_edges(
    edges: &[usize],
    edge_values: &[Vec<u32>],
    params: &SystemParams,
) -> Result<Vec<u32>> {
    let f = params.field;
    let b = params.layer_message_len();
    if edges.len() != b {
        return Err(Error::NotEnoughNodes {
            needed: b,
            got: edges.len(),
        });
    }
    let mut v = Vec::with_capacity(b * b);
    for &e in edges {
        let x = edge_point(e, params);
        v.extend((0..b as u64).map(|t| f.pow(x, t)));
    }
    let inv = Matrix::new(f, b, b, v)?.inverse()?;
    let mut out = Vec::with_capacity(edge_values.len() * b);
    for values in edge_values {
        out.extend(inv.mul_vec(values)?);
    }
    Ok(out)
}

/// Positions `(i, j)`, `1 <= i <= k`, `i <= j <= d`, in row-major order, at which
/// the first k nodes of a systematic C1 code hold the message verbatim: the
/// r-th message symbol of a layer is symbol j of node i in that layer.
pub fn systematic_positions(params: &SystemParams) -> Vec<(usize, usize)> {
    (1..=params.k)
        .flat_map(|i| (i..=params.d).map(move |j| (i, j)))
        .collect()
}

/// Linear map between the free entries of M and the values `ψᵢᵀ M ψⱼ` at the
/// systematic positions, and its inverse.
#[derive(Clone, Debug)]
pub struct SystematicPrecoder {
    forward: Matrix,
    inverse: Matrix,
}

impl SystematicPrecoder {
    pub fn new(vectors: &EncodingVectors, params: &SystemParams) -> Result<Self> {
        let f = params.field;
        let b = params.layer_message_len();
        let positions = systematic_positions(params);
        let mut forward = Matrix::zeros(f, b, b);
        for t in 0..b {
            let mut unit = vec![0; b];
            unit[t] = 1;
            let m = MessageMatrix::build(&unit, params)?;
            for (r, &(i, j)) in positions.iter().enumerate() {
                let row = m.matrix().left_mul_vec(vectors.psi(i))?;
                forward.set(r, t, f.dot(&row, vectors.psi(j)))?;
            }
        }
        let inverse = forward.inverse()?;
        Ok(SystematicPrecoder { forward, inverse })
    }

    /// Message matrix whose systematic positions carry `message` verbatim.
    pub fn precode(&self, message: &[u32], params: &SystemParams) -> Result<MessageMatrix> {
        if message.len() != params.layer_message_len() {
            return Err(Error::InvalidMessage(format!(
                "expected {} symbols per layer, got {}",
                params.layer_message_len(),
                message.len()
            )));
        }
        for &v in message {
            params.field.check(v)?;
        }
        MessageMatrix::build(&self.inverse.mul_vec(message)?, params)
    }

    /// Message symbols carried by `m` (inverse of [`SystematicPrecoder::precode`]).
    pub fn unprecode(&self, m: &MessageMatrix) -> Result<Vec<u32>> {
        self.forward.mul_vec(&m.flatten())
    }
}

/// Precodes a message of whole stripes into message matrices, one per layer.
pub fn precode_systematic(
    message: &[u32],
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<Vec<MessageMatrix>> {
    let stripe = params.message_len();
    if message.is_empty() || !message.len().is_multiple_of(stripe) {
        return Err(Error::InvalidMessage(format!(
            "message length {} is not a positive multiple of B = {stripe}",
            message.len()
        )));
    }
    let pre = SystematicPrecoder::new(vectors, params)?;
    message
        .chunks(params.layer_message_len())
        .map(|chunk| pre.precode(chunk, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;

    fn small() -> (SystemParams, EncodingVectors, MessageMatrix) {
        let p = SystemParams::new(4, 2, 2, FieldSpec::prime(7).unwrap(), 1).unwrap();
        let v = EncodingVectors::build(&p).unwrap();
        let m = MessageMatrix::build(&[1, 2, 3], &p).unwrap();
        (p, v, m)
    }

    #[test]
    fn cyclic_ops() {
        assert_eq!(cyclic_add(4, 3, 5), 2);
        assert_eq!(cyclic_sub(3, 2, 5), 1);
        for n in 1..8 {
            for x in 1..=n {
                assert_eq!(cyclic_add(x, n, n), x);
                assert_eq!(cyclic_sub(x, n, n), x);
                for y in 0..2 * n {
                    assert_eq!(cyclic_sub(cyclic_add(x, y, n), y, n), x);
                }
            }
        }
    }

    #[test]
    fn transforms() {
        let (p, v, _) = small();
        assert_eq!(
            node_transform(CodeVariant::Baseline, 3, &v, &p)
                .unwrap()
                .phi,
            Matrix::identity(p.field, 2)
        );
        let c1 = node_transform(CodeVariant::C1, 3, &v, &p).unwrap();
        assert_eq!(c1.phi.to_rows(), vec![vec![1, 1], vec![1, 2]]);
        assert!(matches!(
            node_transform(CodeVariant::CompleteGraph, 1, &v, &p),
            Err(Error::Unsupported(_))
        ));

        let p5 = SystemParams::new(5, 2, 2, FieldSpec::prime(7).unwrap(), 1).unwrap();
        let v5 = EncodingVectors::build(&p5).unwrap();
        // Node 4: columns ψ₅, ψ₁.
        let c2 = node_transform(CodeVariant::C2, 4, &v5, &p5).unwrap();
        assert_eq!(c2.phi.col(0), v5.psi(5).to_vec());
        assert_eq!(c2.phi.col(1), v5.psi(1).to_vec());
    }

    #[test]
    fn encode_small_instance() {
        let (p, v, m) = small();
        let base = encode(CodeVariant::Baseline, std::slice::from_ref(&m), &v, &p).unwrap();
        assert_eq!(base[0].symbols, vec![3, 5]);
        assert_eq!(base[1].symbols, vec![5, 1]);
        assert_eq!(base[2].symbols, vec![0, 4]);
        let c1 = encode(CodeVariant::C1, &[m], &v, &p).unwrap();
        assert_eq!(c1[2].symbols, vec![4, 1]);

        let zero = MessageMatrix::build(&[0, 0, 0], &p).unwrap();
        for content in encode(CodeVariant::C2, &[zero], &v, &p).unwrap() {
            assert!(content.symbols.iter().all(|&s| s == 0));
        }
    }

    #[test]
    fn encode_checks_layer_count() {
        let p = SystemParams::new(4, 2, 2, FieldSpec::prime(7).unwrap(), 2).unwrap();
        let v = EncodingVectors::build(&p).unwrap();
        let m = MessageMatrix::build(&[1, 2, 3], &p).unwrap();
        assert!(encode(CodeVariant::C1, std::slice::from_ref(&m), &v, &p).is_err());
        assert!(encode(CodeVariant::C1, &[], &v, &p).is_err());
        let out = encode(CodeVariant::C1, &[m.clone(), m], &v, &p).unwrap();
        assert_eq!(out[0].symbols.len(), p.alpha());
    }

    #[test]
    fn c1_shared_symbols_are_symmetric() {
        let p = SystemParams::new(6, 3, 4, FieldSpec::gf256(), 1).unwrap();
        let v = EncodingVectors::build(&p).unwrap();
        let m = MessageMatrix::build(&[9, 8, 7, 6, 5, 4, 3, 2, 1], &p).unwrap();
        let c1 = encode(CodeVariant::C1, &[m], &v, &p).unwrap();
        for i in 1..=p.d {
            for j in 1..=p.d {
                assert_eq!(c1[i - 1].symbols[j - 1], c1[j - 1].symbols[i - 1]);
            }
        }
    }

    #[test]
    fn edge_numbering() {
        let n = 5;
        let mut expected = 0;
        for i in 1..=n {
            for j in i + 1..=n {
                assert_eq!(edge_index(i, j, n), expected);
                assert_eq!(edge_index(j, i, n), expected);
                expected += 1;
            }
        }
        assert_eq!(expected, edge_count(n));
        assert_eq!(incident_edges(2, 5), vec![0, 4, 5, 6]);
    }

    #[test]
    fn complete_graph_encoding() {
        let p = SystemParams::new(5, 3, 4, FieldSpec::prime(11).unwrap(), 1).unwrap();
        let msg: Vec<u32> = (1..=9).collect();
        let nodes = encode_complete_graph(&msg, &p).unwrap();
        assert!(nodes.iter().all(|c| c.symbols.len() == 4));
        // Each edge symbol is shared by its two endpoints.
        for i in 1..=5usize {
            for j in i + 1..=5 {
                let at_i = nodes[i - 1].symbols[j - 2];
                let at_j = nodes[j - 1].symbols[i - 1];
                assert_eq!(at_i, at_j);
            }
        }
        // Replication degenerate case.
        let p2 = SystemParams::new(2, 1, 1, FieldSpec::prime(7).unwrap(), 1).unwrap();
        let nodes = encode_complete_graph(&[4], &p2).unwrap();
        assert_eq!(nodes[0].symbols, vec![4]);
        assert_eq!(nodes[1].symbols, vec![4]);
    }

    #[test]
    fn complete_graph_admissibility() {
        let p = SystemParams::new(5, 3, 3, FieldSpec::prime(11).unwrap(), 1).unwrap();
        assert!(encode_complete_graph(&[0; 6], &p).is_err());
        // 10 edges need 10 distinct nonzero points.
        let p = SystemParams::new(5, 3, 4, FieldSpec::prime(7).unwrap(), 1).unwrap();
        assert!(matches!(
            encode_complete_graph(&[0; 9], &p),
            Err(Error::FieldTooSmall(_))
        ));
    }

    #[test]
    fn systematic_precoding() {
        let (p, v, _) = small();
        assert_eq!(systematic_positions(&p), vec![(1, 1), (1, 2), (2, 2)]);
        let zero = precode_systematic(&[0, 0, 0], &v, &p).unwrap();
        assert_eq!(zero[0].flatten(), vec![0, 0, 0]);

        let layers = precode_systematic(&[6, 0, 5], &v, &p).unwrap();
        let nodes = encode(CodeVariant::C1, &layers, &v, &p).unwrap();
        assert_eq!(nodes[0].symbols, vec![6, 0]);
        assert_eq!(nodes[1].symbols[1], 5);
        let pre = SystematicPrecoder::new(&v, &p).unwrap();
        assert_eq!(pre.unprecode(&layers[0]).unwrap(), vec![6, 0, 5]);
    }
}
