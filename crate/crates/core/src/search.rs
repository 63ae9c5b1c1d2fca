//! Exhaustive search over repair-by-transfer schedules of concrete linear
//! code instances.
//!
//! Every stored symbol of a linear code is a linear form in the message
//! symbols. A transfer schedule picks `beta` stored symbols at each helper; it
//! repairs the failed node iff the failed node's forms lie in the span of the
//! picked forms. The search enumerates all `C(alpha, beta)^d` picks for every
//! `(failed, helper set)` pair.
//!
//! This checks specific instances only. It says nothing about codes that are
//! not implemented here, non-linear codes included; it is a finite witness
//! that the implemented variants behave as the impossibility result for
//! `d != n - 1` requires, and that the complete-graph code achieves transfer
//! repair everywhere when `d = n - 1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pm::{build_layers, combinations, EncodingVectors, SystemParams};
use crate::recovery::{validate_helpers, RepairMetrics};
use crate::variants::{self, CodeVariant, NodeContent};

/// Default number of rank tests a single report may spend.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Environment variable that overrides [`DEFAULT_BUDGET`].
pub const BUDGET_ENV: &str = "MBR_SEARCH_BUDGET";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_rank_tests: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_rank_tests: DEFAULT_BUDGET,
        }
    }
}

impl SearchBudget {
    pub fn new(max_rank_tests: u64) -> Self {
        SearchBudget { max_rank_tests }
    }

    /// Reads [`BUDGET_ENV`], falling back to the default.
    pub fn from_env() -> Result<Self> {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => v.trim().parse().map(SearchBudget::new).map_err(|_| {
                Error::InvalidParams(format!("{BUDGET_ENV} must be a non-negative integer"))
            }),
            Err(_) => Ok(SearchBudget::default()),
        }
    }
}

/// Stored symbols of every node as linear forms over one stripe's message.
#[derive(Clone, Debug)]
pub struct LinearForms {
    pub variant: CodeVariant,
    /// Row `s` of entry `i - 1` is the form of node i's stored symbol `s`.
    per_node: Vec<Matrix>,
}

impl LinearForms {
    /// Derives the forms by encoding every unit message of one stripe.
    pub fn build(
        variant: CodeVariant,
        vectors: &EncodingVectors,
        params: &SystemParams,
    ) -> Result<Self> {
        let b = params.message_len();
        let alpha = params.alpha();
        let mut columns: Vec<Vec<Vec<u32>>> = vec![Vec::with_capacity(b); params.n];
        for t in 0..b {
            let mut unit = vec![0; b];
            unit[t] = 1;
            let nodes = match variant {
                CodeVariant::CompleteGraph => variants::encode_complete_graph(&unit, params)?,
                _ => variants::encode(variant, &build_layers(&unit, params)?, vectors, params)?,
            };
            for (i, node) in nodes.into_iter().enumerate() {
                columns[i].push(node.symbols);
            }
        }
        let per_node = columns
            .into_iter()
            .map(|cols| {
                let mut data = Vec::with_capacity(alpha * b);
                for s in 0..alpha {
                    data.extend(cols.iter().map(|c| c[s]));
                }
                Matrix::new(params.field, alpha, b, data)
            })
            .collect::<Result<_>>()?;
        Ok(LinearForms { variant, per_node })
    }

    pub fn node(&self, node: usize) -> &Matrix {
        &self.per_node[node - 1]
    }
}

/// Which stored symbols each helper passes for one `(failed, helpers)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferSchedule {
    pub failed: usize,
    pub helpers: Vec<usize>,
    /// `indices[h]` are the 0-based per-stripe positions passed by `helpers[h]`.
    pub indices: Vec<Vec<usize>>,
}

impl TransferSchedule {
    fn passed_forms(&self, forms: &LinearForms) -> Matrix {
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for (h, idx) in self.helpers.iter().zip(&self.indices) {
            let m = forms.node(*h);
            rows.extend(idx.iter().map(|&i| m.row(i).to_vec()));
        }
        Matrix::from_rows(forms.per_node[0].field(), &rows).expect("rows share a width")
    }
}

fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    (0..r as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// Number of schedules for one pair: `C(alpha, beta)^d`.
pub fn schedules_per_pair(params: &SystemParams) -> u128 {
    binomial(params.alpha(), params.beta).saturating_pow(params.d as u32)
}

/// True iff `target`'s rows lie in the row space of `passed`.
fn spans(passed: &Matrix, target: &Matrix) -> bool {
    let r = passed.rank();
    passed
        .vstack(target)
        .map(|m| m.rank() == r)
        .unwrap_or(false)
}

/// Searches all schedules for `(failed, helpers)` in lexicographic order and
/// returns the first that determines the failed node's content.
pub fn schedule_feasible(
    failed: usize,
    helpers: &[usize],
    forms: &LinearForms,
    params: &SystemParams,
    budget: &SearchBudget,
) -> Result<Option<TransferSchedule>> {
    let mut spent = 0;
    search_pair(failed, helpers, forms, params, budget, &mut spent)
}

fn search_pair(
    failed: usize,
    helpers: &[usize],
    forms: &LinearForms,
    params: &SystemParams,
    budget: &SearchBudget,
    spent: &mut u64,
) -> Result<Option<TransferSchedule>> {
    validate_helpers(failed, helpers, params)?;
    let needed = schedules_per_pair(params);
    if needed + *spent as u128 > budget.max_rank_tests as u128 {
        return Err(Error::BudgetExceeded {
            needed: needed + *spent as u128,
            budget: budget.max_rank_tests,
        });
    }
    let choices = combinations(params.alpha(), params.beta);
    let target = forms.node(failed);
    let mut digits = vec![0usize; helpers.len()];
    loop {
        *spent += 1;
        let schedule = TransferSchedule {
            failed,
            helpers: helpers.to_vec(),
            indices: digits.iter().map(|&c| choices[c].clone()).collect(),
        };
        if spans(&schedule.passed_forms(forms), target) {
            return Ok(Some(schedule));
        }
        // Mixed-radix increment, last helper fastest.
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                return Ok(None);
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < choices.len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Carries out a schedule on real contents: the helpers pass the scheduled
/// symbols and the replacement solves for its own stored symbols.
///
/// The coefficient matrix is derived from the forms on a pivot subset of
/// columns and then checked against all columns before use.
pub fn execute_schedule(
    schedule: &TransferSchedule,
    contents: &[NodeContent],
    forms: &LinearForms,
    params: &SystemParams,
) -> Result<(NodeContent, RepairMetrics)> {
    validate_helpers(schedule.failed, &schedule.helpers, params)?;
    if schedule.indices.iter().any(|idx| idx.len() != params.beta) {
        return Err(Error::InvalidHelpers(format!(
            "every helper must pass exactly {} symbols",
            params.beta
        )));
    }
    let passed = schedule.passed_forms(forms);
    let target = forms.node(schedule.failed);
    let rows = passed.transpose().pivot_columns();
    let basis = passed.select_rows(&rows);
    let cols = basis.pivot_columns();
    let coeffs = target
        .select_cols(&cols)
        .mul(&basis.select_cols(&cols).inverse()?)?;
    if coeffs.mul(&basis)? != *target {
        return Err(Error::NoFeasibleSchedule(format!(
            "schedule does not determine node {}",
            schedule.failed
        )));
    }

    let alpha = params.alpha();
    let helper_contents: Vec<&NodeContent> = schedule
        .helpers
        .iter()
        .map(|&h| {
            let c = contents
                .iter()
                .find(|c| c.node_id == h)
                .ok_or(Error::MissingNode(h))?;
            c.validate(params)?;
            if c.variant != forms.variant {
                return Err(Error::MalformedContent(format!(
                    "node {h} holds {} content, expected {}",
                    c.variant, forms.variant
                )));
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let stripes = helper_contents[0].stripes(params);
    if helper_contents.iter().any(|c| c.stripes(params) != stripes) {
        return Err(Error::MalformedContent(
            "nodes hold different stripe counts".into(),
        ));
    }
    let mut symbols = Vec::with_capacity(stripes * alpha);
    for s in 0..stripes {
        let values: Vec<u32> = helper_contents
            .iter()
            .zip(&schedule.indices)
            .flat_map(|(c, idx)| idx.iter().map(move |&i| c.symbols[s * alpha + i]))
            .collect();
        let used: Vec<u32> = rows.iter().map(|&r| values[r]).collect();
        symbols.extend(coeffs.mul_vec(&used)?);
    }
    let metrics = RepairMetrics {
        variant: forms.variant,
        failed: schedule.failed,
        helpers: schedule.helpers.clone(),
        symbols_read: vec![params.beta; params.d],
        symbols_downloaded: vec![params.beta; params.d],
        pure_transfer: true,
        beta: params.beta,
        d: params.d,
    };
    Ok((
        NodeContent {
            node_id: schedule.failed,
            variant: forms.variant,
            symbols,
        },
        metrics,
    ))
}

/// Outcome for one `(failed, helper set)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFeasibility {
    pub failed: usize,
    pub helpers: Vec<usize>,
    pub schedule: Option<TransferSchedule>,
}

impl PairFeasibility {
    pub fn feasible(&self) -> bool {
        self.schedule.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub params: SystemParams,
    pub variant: CodeVariant,
    pub pairs: Vec<PairFeasibility>,
    /// True iff every pair has a transfer schedule.
    pub overall_feasible: bool,
    pub rank_tests: u64,
}

impl FeasibilityReport {
    pub fn feasible_pairs(&self) -> usize {
        self.pairs.iter().filter(|p| p.feasible()).count()
    }

    /// Failed nodes that are transfer-repairable from every helper set.
    pub fn fully_repairable_nodes(&self) -> Vec<usize> {
        self.params
            .nodes()
            .filter(|&f| {
                self.pairs
                    .iter()
                    .filter(|p| p.failed == f)
                    .all(PairFeasibility::feasible)
            })
            .collect()
    }

    /// Failed nodes with at least one transfer-repairable helper set.
    pub fn somewhere_repairable_nodes(&self) -> Vec<usize> {
        self.params
            .nodes()
            .filter(|&f| self.pairs.iter().any(|p| p.failed == f && p.feasible()))
            .collect()
    }

    /// `d != n - 1` must be infeasible overall; the complete-graph code at
    /// `d = n - 1` must be feasible overall.
    pub fn consistent_with_impossibility(&self) -> bool {
        let p = &self.params;
        if p.d != p.n - 1 {
            !self.overall_feasible
        } else if self.variant == CodeVariant::CompleteGraph {
            self.overall_feasible
        } else {
            true
        }
    }
}

/// Largest n accepted by [`verify_transfer_witness`].
pub const MAX_WITNESS_NODES: usize = 8;

/// Runs the schedule search over every `(failed, helper set)` pair.
///
/// The total cost `n · C(n-1, d) · C(alpha, beta)^d` is checked against the
/// budget before any work is done.
pub fn verify_transfer_witness(
    params: &SystemParams,
    variant: CodeVariant,
    budget: &SearchBudget,
) -> Result<FeasibilityReport> {
    if params.n > MAX_WITNESS_NODES {
        return Err(Error::Unsupported(format!(
            "exhaustive witness is limited to n <= {MAX_WITNESS_NODES}"
        )));
    }
    variant.check_admissible(params)?;
    let pairs_total = params.n as u128 * binomial(params.n - 1, params.d);
    let needed = pairs_total.saturating_mul(schedules_per_pair(params));
    if needed > budget.max_rank_tests as u128 {
        return Err(Error::BudgetExceeded {
            needed,
            budget: budget.max_rank_tests,
        });
    }
    let vectors = EncodingVectors::build(params)?;
    let forms = LinearForms::build(variant, &vectors, params)?;
    let mut spent = 0u64;
    let mut pairs = Vec::new();
    for failed in params.nodes() {
        let others: Vec<usize> = params.nodes().filter(|&j| j != failed).collect();
        for subset in combinations(others.len(), params.d) {
            let helpers: Vec<usize> = subset.iter().map(|&i| others[i]).collect();
            let schedule = search_pair(failed, &helpers, &forms, params, budget, &mut spent)?;
            pairs.push(PairFeasibility {
                failed,
                helpers,
                schedule,
            });
        }
    }
    let overall_feasible = pairs.iter().all(PairFeasibility::feasible);
    Ok(FeasibilityReport {
        params: *params,
        variant,
        pairs,
        overall_feasible,
        rank_tests: spent,
    })
}

/// One repair in which the censused node helps by transfer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusEvent {
    pub failed: usize,
    pub helpers: Vec<usize>,
    /// Stored-symbol positions the censused node passes.
    pub indices: Vec<usize>,
}

/// How often one helper passes each of its stored symbols across up to
/// `d + 1` transfer repairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub variant: CodeVariant,
    pub node: usize,
    pub alpha: usize,
    pub events: Vec<CensusEvent>,
    pub index_counts: BTreeMap<usize, usize>,
    /// Positions passed in more than one event.
    pub repeated: Vec<usize>,
    pub distinct_failed: usize,
    /// More symbols were passed in total than the node stores.
    pub pigeonhole_forced: bool,
    /// Some position was passed to two different failed nodes.
    pub repeat_across_failed: bool,
}

/// Collects up to `d + 1` transfer repairs helped by `node`: first one per
/// failed node (ascending, first feasible helper set in lexicographic order),
/// then further helper sets of the same failed nodes if there are fewer than
/// `d + 1` distinct failed nodes with a feasible schedule.
pub fn shared_symbol_census(
    variant: CodeVariant,
    node: usize,
    vectors: &EncodingVectors,
    params: &SystemParams,
    budget: &SearchBudget,
) -> Result<Census> {
    params.check_node(node)?;
    variant.check_admissible(params)?;
    let forms = LinearForms::build(variant, vectors, params)?;
    let target = params.d + 1;
    let mut spent = 0u64;
    // Per failed node, the feasible helper sets containing `node`, found lazily.
    let mut per_failed: Vec<(usize, Vec<CensusEvent>, Vec<Vec<usize>>)> = Vec::new();
    for failed in params.nodes().filter(|&f| f != node) {
        let rest: Vec<usize> = params
            .nodes()
            .filter(|&j| j != failed && j != node)
            .collect();
        let mut candidates: Vec<Vec<usize>> = combinations(rest.len(), params.d - 1)
            .into_iter()
            .map(|s| {
                let mut h: Vec<usize> = s.iter().map(|&i| rest[i]).collect();
                h.push(node);
                h.sort_unstable();
                h
            })
            .collect();
        candidates.sort();
        per_failed.push((failed, Vec::new(), candidates));
    }

    let mut events: Vec<CensusEvent> = Vec::new();
    let next_event = |entry: &mut (usize, Vec<CensusEvent>, Vec<Vec<usize>>),
                      spent: &mut u64|
     -> Result<Option<CensusEvent>> {
        while !entry.2.is_empty() {
            let helpers = entry.2.remove(0);
            if let Some(s) = search_pair(entry.0, &helpers, &forms, params, budget, spent)? {
                let pos = s
                    .helpers
                    .iter()
                    .position(|&h| h == node)
                    .expect("node is a helper");
                return Ok(Some(CensusEvent {
                    failed: entry.0,
                    helpers: s.helpers.clone(),
                    indices: s.indices[pos].clone(),
                }));
            }
        }
        Ok(None)
    };

    for entry in per_failed.iter_mut() {
        if events.len() == target {
            break;
        }
        if let Some(e) = next_event(entry, &mut spent)? {
            entry.1.push(e.clone());
            events.push(e);
        }
    }
    let mut progress = true;
    while events.len() < target && progress {
        progress = false;
        for entry in per_failed.iter_mut() {
            if events.len() == target {
                break;
            }
            if entry.1.is_empty() {
                continue;
            }
            if let Some(e) = next_event(entry, &mut spent)? {
                entry.1.push(e.clone());
                events.push(e);
                progress = true;
            }
        }
    }
    if events.is_empty() {
        return Err(Error::NoFeasibleSchedule(format!(
            "node {node} takes part in no transfer repair under {variant}"
        )));
    }

    let mut index_counts = BTreeMap::new();
    for e in &events {
        for &i in &e.indices {
            *index_counts.entry(i).or_insert(0) += 1;
        }
    }
    let repeated: Vec<usize> = index_counts
        .iter()
        .filter(|(_, &c)| c > 1)
        .map(|(&i, _)| i)
        .collect();
    let repeat_across_failed = repeated.iter().any(|i| {
        let mut fs: Vec<usize> = events
            .iter()
            .filter(|e| e.indices.contains(i))
            .map(|e| e.failed)
            .collect();
        fs.sort_unstable();
        fs.dedup();
        fs.len() > 1
    });
    let mut failed: Vec<usize> = events.iter().map(|e| e.failed).collect();
    failed.sort_unstable();
    failed.dedup();
    Ok(Census {
        variant,
        node,
        alpha: params.alpha(),
        pigeonhole_forced: events.len() * params.beta > params.alpha(),
        events,
        index_counts,
        repeated,
        distinct_failed: failed.len(),
        repeat_across_failed,
    })
}
