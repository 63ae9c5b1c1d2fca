//! Node repair and full-data decoding, with per-helper read/download metering.
//!
//! Helpers produce [`HelperResponse`]s; the replacement node turns them into
//! the lost content. Metering is per stripe and in field symbols: a helper
//! that computes an inner product reads all `alpha` stored symbols, a helper
//! that transfers reads only what it sends.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pm::{EncodingVectors, MessageMatrix, SystemParams};
use crate::variants::{
    cyclic_sub, decode_edges, edge_index, CodeVariant, NodeContent, NodeTransform,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSource {
    /// Verbatim stored symbols; indices are per stripe, 0-based within `alpha`.
    Transfer { indices: Vec<usize> },
    /// A linear function of all stored symbols.
    Computed,
}

/// Data passed by one helper to the replacement node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperResponse {
    pub helper_id: usize,
    /// `beta` symbols per stripe.
    pub payload: Vec<u32>,
    pub source: ResponseSource,
}

impl HelperResponse {
    /// Symbols read at the helper per stripe.
    pub fn symbols_read(&self, params: &SystemParams) -> usize {
        match &self.source {
            ResponseSource::Transfer { indices } => indices.len(),
            ResponseSource::Computed => params.alpha(),
        }
    }

    /// Symbols sent by the helper per stripe.
    pub fn symbols_downloaded(&self, stripes: usize) -> usize {
        self.payload.len() / stripes
    }
}

/// Per-helper traffic for one repair (or degraded read), in symbols per stripe.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairMetrics {
    pub variant: CodeVariant,
    pub failed: usize,
    pub helpers: Vec<usize>,
    pub symbols_read: Vec<usize>,
    pub symbols_downloaded: Vec<usize>,
    pub pure_transfer: bool,
    /// `beta` and `d` of the code, kept for the bound ratios.
    pub beta: usize,
    pub d: usize,
}

impl RepairMetrics {
    fn from_responses(
        variant: CodeVariant,
        failed: usize,
        responses: &[HelperResponse],
        stripes: usize,
        params: &SystemParams,
    ) -> Self {
        RepairMetrics {
            variant,
            failed,
            helpers: responses.iter().map(|r| r.helper_id).collect(),
            symbols_read: responses.iter().map(|r| r.symbols_read(params)).collect(),
            symbols_downloaded: responses
                .iter()
                .map(|r| r.symbols_downloaded(stripes))
                .collect(),
            pure_transfer: responses
                .iter()
                .all(|r| matches!(r.source, ResponseSource::Transfer { .. })),
            beta: params.beta,
            d: params.d,
        }
    }

    pub fn total_read(&self) -> usize {
        self.symbols_read.iter().sum()
    }

    pub fn total_downloaded(&self) -> usize {
        self.symbols_downloaded.iter().sum()
    }

    /// Total read over the lower bound `d * beta`.
    pub fn read_ratio(&self) -> f64 {
        self.total_read() as f64 / (self.d * self.beta) as f64
    }

    /// Total download over the lower bound `d * beta`.
    pub fn download_ratio(&self) -> f64 {
        self.total_downloaded() as f64 / (self.d * self.beta) as f64
    }

    /// Every helper sent exactly `beta` symbols.
    pub fn download_meets_bound(&self) -> bool {
        self.symbols_downloaded.iter().all(|&s| s == self.beta)
    }

    /// Every helper read exactly `beta` symbols.
    pub fn read_meets_bound(&self) -> bool {
        self.symbols_read.iter().all(|&s| s == self.beta)
    }

    /// Download never exceeds read, and transfer implies equality.
    pub fn is_consistent(&self) -> bool {
        self.symbols_downloaded.len() == self.symbols_read.len()
            && self
                .symbols_downloaded
                .iter()
                .zip(&self.symbols_read)
                .all(|(dl, rd)| dl <= rd && (!self.pure_transfer || dl == rd))
    }

    pub const CSV_HEADER: &'static str =
        "variant,failed,helpers,read,download,read_ratio,download_ratio,pure_transfer";

    /// Flat CSV record; list-valued columns are `;`-separated.
    pub fn to_csv_record(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{:.6},{:.6},{}",
            self.variant,
            self.failed,
            join(&self.helpers),
            join(&self.symbols_read),
            join(&self.symbols_downloaded),
            self.read_ratio(),
            self.download_ratio(),
            self.pure_transfer
        )
        .expect("writing to a String");
        s
    }
}

/// Checks `|helpers| = d`, distinct ids in range, and `failed ∉ helpers`.
pub fn validate_helpers(failed: usize, helpers: &[usize], params: &SystemParams) -> Result<()> {
    params.check_node(failed)?;
    if helpers.len() != params.d {
        return Err(Error::InvalidHelpers(format!(
            "expected {} helpers, got {}",
            params.d,
            helpers.len()
        )));
    }
    let mut seen = HashSet::new();
    for &h in helpers {
        params.check_node(h)?;
        if h == failed {
            return Err(Error::InvalidHelpers(format!(
                "node {failed} cannot help repair itself"
            )));
        }
        if !seen.insert(h) {
            return Err(Error::InvalidHelpers(format!("helper {h} listed twice")));
        }
    }
    Ok(())
}

fn lookup<'a>(
    node: usize,
    variant: CodeVariant,
    contents: &'a [NodeContent],
    params: &SystemParams,
) -> Result<&'a NodeContent> {
    let c = contents
        .iter()
        .find(|c| c.node_id == node)
        .ok_or(Error::MissingNode(node))?;
    if c.variant != variant {
        return Err(Error::MalformedContent(format!(
            "node {node} holds {} content, expected {variant}",
            c.variant
        )));
    }
    c.validate(params)?;
    Ok(c)
}

fn gather<'a>(
    nodes: &[usize],
    variant: CodeVariant,
    contents: &'a [NodeContent],
    params: &SystemParams,
) -> Result<Vec<&'a NodeContent>> {
    let found: Vec<&NodeContent> = nodes
        .iter()
        .map(|&h| lookup(h, variant, contents, params))
        .collect::<Result<_>>()?;
    let len = found[0].symbols.len();
    if found.iter().any(|c| c.symbols.len() != len) {
        return Err(Error::MalformedContent(
            "nodes hold different stripe counts".into(),
        ));
    }
    Ok(found)
}

/// Helper-side inner product: sends `stored · φ_h⁻¹ ψ_failed = ψ_hᵀ M ψ_failed`
/// for every layer, after reading all of its stored symbols.
pub fn respond_inner_product(
    helper: &NodeContent,
    failed: usize,
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<HelperResponse> {
    let phi_inv = NodeTransform::new(helper.variant, helper.node_id, vectors, params)?.inverse()?;
    let w = phi_inv.mul_vec(vectors.psi(failed))?;
    let f = params.field;
    let payload = (0..helper.layers(params))
        .map(|l| f.dot(helper.layer(l, params), &w))
        .collect();
    Ok(HelperResponse {
        helper_id: helper.node_id,
        payload,
        source: ResponseSource::Computed,
    })
}

/// Helper-side transfer of the symbol at `position` (0-based, `< d`) of every layer.
pub fn respond_transfer(
    helper: &NodeContent,
    position: usize,
    params: &SystemParams,
) -> Result<HelperResponse> {
    if position >= params.d {
        return Err(Error::InvalidHelpers(format!(
            "position {position} is outside 0..{}",
            params.d
        )));
    }
    let payload = (0..helper.layers(params))
        .map(|l| helper.layer(l, params)[position])
        .collect();
    let indices = (0..params.beta).map(|l| l * params.d + position).collect();
    Ok(HelperResponse {
        helper_id: helper.node_id,
        payload,
        source: ResponseSource::Transfer { indices },
    })
}

/// Replacement side for product-matrix variants: given `ψ_hᵀ M ψ_failed` from
/// d helpers, solves for `M ψ_failed`, uses symmetry to get `ψ_failedᵀ M`, and
/// applies the failed node's transform.
pub fn reconstruct_from_products(
    variant: CodeVariant,
    failed: usize,
    responses: &[HelperResponse],
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<NodeContent> {
    let helpers: Vec<usize> = responses.iter().map(|r| r.helper_id).collect();
    validate_helpers(failed, &helpers, params)?;
    let layers = responses[0].payload.len();
    if layers == 0 || responses.iter().any(|r| r.payload.len() != layers) {
        return Err(Error::MalformedContent(
            "helper payloads differ in length".into(),
        ));
    }
    let psi_inv = vectors.rows_of(&helpers).inverse()?;
    let phi = NodeTransform::new(variant, failed, vectors, params)?.phi;
    let mut symbols = Vec::with_capacity(layers * params.d);
    let mut values = vec![0; params.d];
    for l in 0..layers {
        for (v, r) in values.iter_mut().zip(responses) {
            *v = r.payload[l];
        }
        let m_psi = psi_inv.mul_vec(&values)?;
        symbols.extend(phi.left_mul_vec(&m_psi)?);
    }
    Ok(NodeContent {
        node_id: failed,
        variant,
        symbols,
    })
}

fn stripes_of(responses: &[HelperResponse], params: &SystemParams) -> usize {
    responses[0].payload.len() / params.beta
}

/// Repair by inner products from any d helpers; works for every
/// product-matrix variant and reads `alpha` symbols per helper.
///
/// The complete-graph code has nothing to compute: its only repair is the
/// edge-symbol transfer, which is returned here as well.
pub fn repair_compute(
    variant: CodeVariant,
    failed: usize,
    helpers: &[usize],
    contents: &[NodeContent],
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<(NodeContent, RepairMetrics)> {
    validate_helpers(failed, helpers, params)?;
    if !variant.is_product_matrix() {
        return repair_by_transfer_complete_graph(failed, contents, params);
    }
    let responses: Vec<HelperResponse> = gather(helpers, variant, contents, params)?
        .into_iter()
        .map(|c| respond_inner_product(c, failed, vectors, params))
        .collect::<Result<_>>()?;
    let content = reconstruct_from_products(variant, failed, &responses, vectors, params)?;
    let metrics = RepairMetrics::from_responses(
        variant,
        failed,
        &responses,
        stripes_of(&responses, params),
        params,
    );
    Ok((content, metrics))
}

/// C1 repair of node `failed <= d` from any d helpers: each helper passes its
/// `failed`-th stored symbol, which is `ψ_hᵀ M ψ_failed`.
pub fn repair_by_transfer_c1(
    failed: usize,
    helpers: &[usize],
    contents: &[NodeContent],
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<(NodeContent, RepairMetrics)> {
    validate_helpers(failed, helpers, params)?;
    if failed > params.d {
        return Err(Error::TransferNotAdmissible(format!(
            "C1 repairs by transfer only nodes 1..={}; node {failed} needs the compute path",
            params.d
        )));
    }
    let responses: Vec<HelperResponse> = gather(helpers, CodeVariant::C1, contents, params)?
        .into_iter()
        .map(|c| respond_transfer(c, failed - 1, params))
        .collect::<Result<_>>()?;
    let content = reconstruct_from_products(CodeVariant::C1, failed, &responses, vectors, params)?;
    let metrics = RepairMetrics::from_responses(
        CodeVariant::C1,
        failed,
        &responses,
        stripes_of(&responses, params),
        params,
    );
    Ok((content, metrics))
}

/// The C2 helper set `{failed ⊖ d, …, failed ⊖ 1}`, in that order.
pub fn c2_designated_helpers(failed: usize, params: &SystemParams) -> Vec<usize> {
    (1..=params.d)
        .rev()
        .map(|t| cyclic_sub(failed, t, params.n))
        .collect()
}

/// C2 repair from the designated helpers: helper `failed ⊖ t` passes its
/// t-th stored symbol, `ψ_hᵀ M ψ_{h⊕t}` with `h ⊕ t = failed`.
///
/// A supplied helper set must equal the designated one (in any order).
pub fn repair_by_transfer_c2(
    failed: usize,
    helpers: Option<&[usize]>,
    contents: &[NodeContent],
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<(NodeContent, RepairMetrics)> {
    params.check_node(failed)?;
    let designated = c2_designated_helpers(failed, params);
    if let Some(given) = helpers {
        validate_helpers(failed, given, params)?;
        let mut a = given.to_vec();
        let mut b = designated.clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::TransferNotAdmissible(format!(
                "C2 repairs node {failed} by transfer only from {designated:?}"
            )));
        }
    }
    let found = gather(&designated, CodeVariant::C2, contents, params)?;
    let responses: Vec<HelperResponse> = (1..=params.d)
        .rev()
        .zip(found)
        .map(|(t, c)| respond_transfer(c, t - 1, params))
        .collect::<Result<_>>()?;
    let content = reconstruct_from_products(CodeVariant::C2, failed, &responses, vectors, params)?;
    let metrics = RepairMetrics::from_responses(
        CodeVariant::C2,
        failed,
        &responses,
        stripes_of(&responses, params),
        params,
    );
    Ok((content, metrics))
}

/// Position of neighbor `other` within node `node`'s complete-graph content.
fn neighbor_slot(node: usize, other: usize) -> usize {
    if other < node {
        other - 1
    } else {
        other - 2
    }
}

/// Complete-graph repair: every other node passes the symbol of its edge to
/// `failed`; in ascending helper order these are the failed node's symbols.
pub fn repair_by_transfer_complete_graph(
    failed: usize,
    contents: &[NodeContent],
    params: &SystemParams,
) -> Result<(NodeContent, RepairMetrics)> {
    CodeVariant::CompleteGraph.check_admissible(params)?;
    params.check_node(failed)?;
    let helpers: Vec<usize> = params.nodes().filter(|&j| j != failed).collect();
    let found = gather(&helpers, CodeVariant::CompleteGraph, contents, params)?;
    let responses: Vec<HelperResponse> = found
        .into_iter()
        .map(|c| respond_transfer(c, neighbor_slot(c.node_id, failed), params))
        .collect::<Result<_>>()?;
    let layers = responses[0].payload.len();
    let mut symbols = Vec::with_capacity(layers * params.d);
    for l in 0..layers {
        symbols.extend(responses.iter().map(|r| r.payload[l]));
    }
    let content = NodeContent {
        node_id: failed,
        variant: CodeVariant::CompleteGraph,
        symbols,
    };
    let metrics = RepairMetrics::from_responses(
        CodeVariant::CompleteGraph,
        failed,
        &responses,
        stripes_of(&responses, params),
        params,
    );
    Ok((content, metrics))
}

/// Recovers the message from any k nodes.
///
/// For product-matrix variants the result is the flattened message matrix of
/// every layer (see [`MessageMatrix::flatten`]); for the complete-graph code
/// it is the polynomial coefficients of every layer. Extra nodes beyond the
/// first k are ignored.
pub fn decode_all(
    variant: CodeVariant,
    nodes: &[NodeContent],
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<Vec<u32>> {
    let mut seen = HashSet::new();
    for c in nodes {
        if !seen.insert(c.node_id) {
            return Err(Error::DuplicateNode(c.node_id));
        }
    }
    if nodes.len() < params.k {
        return Err(Error::NotEnoughNodes {
            needed: params.k,
            got: nodes.len(),
        });
    }
    let ids: Vec<usize> = nodes[..params.k].iter().map(|c| c.node_id).collect();
    let chosen = gather(&ids, variant, nodes, params)?;
    match variant {
        CodeVariant::CompleteGraph => decode_complete_graph(&chosen, params),
        _ => Ok(decode_product_matrix(&chosen, vectors, params)?
            .into_iter()
            .flat_map(|m| m.flatten())
            .collect()),
    }
}

/// Two-phase product-matrix decoding. With `Ψ_DC = [A B]` split after k
/// columns, the de-transformed rows are `Ψ_DC M = [A S + B Rᵀ, A R]`, so
/// `R = A⁻¹ (A R)` and then `S = A⁻¹ (A S + B Rᵀ − B Rᵀ)`.
pub(crate) fn decode_product_matrix(
    chosen: &[&NodeContent],
    vectors: &EncodingVectors,
    params: &SystemParams,
) -> Result<Vec<MessageMatrix>> {
    let (k, d) = (params.k, params.d);
    let f = params.field;
    let ids: Vec<usize> = chosen.iter().map(|c| c.node_id).collect();
    let phi_inv: Vec<Matrix> = chosen
        .iter()
        .map(|c| NodeTransform::new(c.variant, c.node_id, vectors, params)?.inverse())
        .collect::<Result<_>>()?;
    let psi_dc = vectors.rows_of(&ids);
    let left: Vec<usize> = (0..k).collect();
    let right: Vec<usize> = (k..d).collect();
    let a_inv = psi_dc.select_cols(&left).inverse()?;
    let b = psi_dc.select_cols(&right);

    let layers = chosen[0].layers(params);
    let mut out = Vec::with_capacity(layers);
    for l in 0..layers {
        let mut rows = Vec::with_capacity(k * d);
        for (c, inv) in chosen.iter().zip(&phi_inv) {
            rows.extend(inv.left_mul_vec(c.layer(l, params))?);
        }
        let y = Matrix::new(f, k, d, rows)?;
        let r = a_inv.mul(&y.select_cols(&right))?;
        let br_t = b.mul(&r.transpose())?;
        let y_left = y.select_cols(&left);
        let mut diff = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                diff.push(f.sub(y_left.get(i, j), br_t.get(i, j)));
            }
        }
        let s = a_inv.mul(&Matrix::new(f, k, k, diff)?)?;
        let mut m = Matrix::zeros(f, d, d);
        for i in 0..k {
            for j in 0..k {
                m.set(i, j, s.get(i, j))?;
            }
            for j in k..d {
                m.set(i, j, r.get(i, j - k))?;
                m.set(j, i, r.get(i, j - k))?;
            }
        }
        out.push(MessageMatrix::from_matrix(m, params)?);
    }
    Ok(out)
}

fn decode_complete_graph(chosen: &[&NodeContent], params: &SystemParams) -> Result<Vec<u32>> {
    CodeVariant::CompleteGraph.check_admissible(params)?;
    let n = params.n;
    // (edge, node, slot) for the first occurrence of every edge.
    let mut slots: Vec<(usize, usize, usize)> = Vec::new();
    let mut seen = HashSet::new();
    for (ci, c) in chosen.iter().enumerate() {
        for j in params.nodes().filter(|&j| j != c.node_id) {
            let e = edge_index(c.node_id, j, n);
            if seen.insert(e) {
                slots.push((e, ci, neighbor_slot(c.node_id, j)));
            }
        }
    }
    slots.sort_unstable();
    slots.truncate(params.layer_message_len());
    let edges: Vec<usize> = slots.iter().map(|s| s.0).collect();
    let layers = chosen[0].layers(params);
    let values: Vec<Vec<u32>> = (0..layers)
        .map(|l| {
            slots
                .iter()
                .map(|&(_, ci, slot)| chosen[ci].layer(l, params)[slot])
                .collect()
        })
        .collect();
    decode_edges(&edges, &values, params)
}
