//! Deterministic replay of failure and read workloads against encoded data.
//!
//! A workload is a seed, a helper-selection policy and a list of events:
//!
//! ```text
//! # comments and blank lines are ignored
//! seed 42
//! policy designated
//! fail 3
//! read 5
//! full
//! ```
//!
//! `fail i` loses node i and repairs it at once, so at most one node is ever
//! down. `read i` serves node i's content from d helpers without replacing
//! it. `full` decodes the whole message from k nodes chosen by the policy.
//! Repairs and degraded reads take the transfer path when the variant admits
//! it for the chosen helpers and the compute path otherwise.
//!
//! Traffic is counted in symbols per stripe. Aggregates and bound ratios
//! cover the recovery events (`fail` and `read`); a `full` read is recorded
//! per event only.
//!
//! Randomness comes from ChaCha8 seeded with the workload seed as a
//! little-endian u64 in the first 8 bytes of the 32-byte key, remaining bytes
//! zero. A uniform index below `m` is `(next_u64 * m) >> 64`.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::code::{Code, RepairMode};
use crate::error::{Error, Result};
use crate::pm::{combinations, SystemParams};
use crate::variants::{CodeVariant, NodeContent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HelperPolicy {
    /// The code's preferred helpers for each node.
    Designated,
    /// A uniformly random d-subset of the other nodes.
    RandomAdmissible,
    /// The d-subset with the largest read, first in lexicographic order on ties.
    AdversarialWorstRead,
}

impl HelperPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            HelperPolicy::Designated => "designated",
            HelperPolicy::RandomAdmissible => "random-admissible",
            HelperPolicy::AdversarialWorstRead => "adversarial-worst-read",
        }
    }
}

impl fmt::Display for HelperPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HelperPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "designated" => Ok(HelperPolicy::Designated),
            "random-admissible" => Ok(HelperPolicy::RandomAdmissible),
            "adversarial-worst-read" => Ok(HelperPolicy::AdversarialWorstRead),
            other => Err(Error::Workload(format!("unknown policy '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Fail { node: usize },
    DegradedRead { node: usize },
    FullRead,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Fail { node } => write!(f, "fail {node}"),
            Event::DegradedRead { node } => write!(f, "read {node}"),
            Event::FullRead => f.write_str("full"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub seed: u64,
    pub policy: HelperPolicy,
    pub events: Vec<Event>,
}

impl Workload {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seed = None;
        let mut policy = None;
        let mut events = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Workload(format!("line {}: {msg}", lineno + 1));
            let words: Vec<&str> = line.split_whitespace().collect();
            let node = |w: &[&str]| -> Result<usize> {
                match w {
                    [_, v] => v.parse().map_err(|_| err(&format!("bad node id '{v}'"))),
                    _ => Err(err("expected exactly one node id")),
                }
            };
            match words[0] {
                "seed" if words.len() == 2 => {
                    if seed
                        .replace(words[1].parse().map_err(|_| err("bad seed"))?)
                        .is_some()
                    {
                        return Err(err("seed given twice"));
                    }
                }
                "policy" if words.len() == 2 => {
                    if policy.replace(words[1].parse()?).is_some() {
                        return Err(err("policy given twice"));
                    }
                }
                "fail" => events.push(Event::Fail {
                    node: node(&words)?,
                }),
                "read" => events.push(Event::DegradedRead {
                    node: node(&words)?,
                }),
                "full" if words.len() == 1 => events.push(Event::FullRead),
                _ => return Err(err(&format!("unrecognised line '{line}'"))),
            }
        }
        Ok(Workload {
            seed: seed.ok_or_else(|| Error::Workload("missing 'seed' line".into()))?,
            policy: policy.ok_or_else(|| Error::Workload("missing 'policy' line".into()))?,
            events,
        })
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        for e in &self.events {
            if let Event::Fail { node } | Event::DegradedRead { node } = e {
                params.check_node(*node).map_err(|_| {
                    Error::Workload(format!("'{e}' names a node outside 1..={}", params.n))
                })?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed {}", self.seed)?;
        writeln!(f, "policy {}", self.policy)?;
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Seeded generator and the index draw described in the module docs.
pub struct Draw(ChaCha8Rng);

impl Draw {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Draw(ChaCha8Rng::from_seed(key))
    }

    pub fn below(&mut self, bound: usize) -> usize {
        ((self.0.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: Event,
    /// Helpers for recovery events, the decoding set for a full read.
    pub nodes: Vec<usize>,
    pub read: usize,
    pub download: usize,
    pub pure_transfer: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficSummary {
    pub variant: CodeVariant,
    pub params: SystemParams,
    pub events: Vec<EventRecord>,
    /// Number of `fail` and `read` events.
    pub recoveries: usize,
    pub read: usize,
    pub download: usize,
    pub pure_transfer: usize,
    /// `read / (recoveries * d * beta)`; absent without recoveries.
    pub read_ratio: Option<f64>,
    pub download_ratio: Option<f64>,
    pub pure_transfer_frac: Option<f64>,
}

pub const SUMMARY_CSV_HEADER: &str =
    "variant,events,read,download,read_ratio,download_ratio,pure_transfer_frac";

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

impl TrafficSummary {
    pub fn to_csv_record(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.variant,
            self.events.len(),
            self.read,
            self.download,
            fmt_ratio(self.read_ratio),
            fmt_ratio(self.download_ratio),
            fmt_ratio(self.pure_transfer_frac)
        )
    }
}

/// Header plus one record per summary, newline-terminated.
pub fn summaries_to_csv(summaries: &[TrafficSummary]) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for s in summaries {
        out.push_str(&s.to_csv_record());
        out.push('\n');
    }
    out
}

fn helper_sets(failed: usize, params: &SystemParams) -> Vec<Vec<usize>> {
    let others: Vec<usize> = params.nodes().filter(|&j| j != failed).collect();
    combinations(others.len(), params.d)
        .into_iter()
        .map(|s| s.into_iter().map(|i| others[i]).collect())
        .collect()
}

fn recovery_mode(code: &Code, failed: usize, helpers: &[usize]) -> RepairMode {
    if code.transfer_admissible(failed, helpers) {
        RepairMode::Transfer
    } else {
        RepairMode::Compute
    }
}

fn choose_helpers(code: &Code, failed: usize, policy: HelperPolicy, rng: &mut Draw) -> Vec<usize> {
    let p = code.params();
    match policy {
        HelperPolicy::Designated => code.designated_helpers(failed),
        HelperPolicy::RandomAdmissible => {
            let mut sets = helper_sets(failed, p);
            let i = rng.below(sets.len());
            sets.swap_remove(i)
        }
        HelperPolicy::AdversarialWorstRead => {
            // Read is d*beta on transfer and d*alpha on compute.
            let sets = helper_sets(failed, p);
            sets.iter()
                .find(|h| recovery_mode(code, failed, h) == RepairMode::Compute)
                .unwrap_or(&sets[0])
                .clone()
        }
    }
}

fn choose_decoders(params: &SystemParams, policy: HelperPolicy, rng: &mut Draw) -> Vec<usize> {
    match policy {
        HelperPolicy::Designated => (1..=params.k).collect(),
        HelperPolicy::RandomAdmissible => {
            let mut sets = combinations(params.n, params.k);
            let i = rng.below(sets.len());
            sets.swap_remove(i).into_iter().map(|j| j + 1).collect()
        }
        HelperPolicy::AdversarialWorstRead => (params.n - params.k + 1..=params.n).collect(),
    }
}

fn pick(nodes: &[NodeContent], ids: &[usize]) -> Vec<NodeContent> {
    ids.iter().map(|&i| nodes[i - 1].clone()).collect()
}

/// Replays `workload` against `message` encoded with `code`.
///
/// After every event the result is checked: a repaired or served node must
/// equal its original content, and a decode that includes it must return the
/// message.
pub fn run_workload(code: &Code, message: &[u32], workload: &Workload) -> Result<TrafficSummary> {
    let p = *code.params();
    workload.validate(&p)?;
    let mut nodes = code.encode(message)?;
    let mut rng = Draw::new(workload.seed);
    let mut records = Vec::with_capacity(workload.events.len());
    for &event in &workload.events {
        let record = match event {
            Event::Fail { node } | Event::DegradedRead { node } => {
                let helpers = choose_helpers(code, node, workload.policy, &mut rng);
                let mode = recovery_mode(code, node, &helpers);
                let (rebuilt, m) = code.repair(node, &helpers, mode, &pick(&nodes, &helpers))?;
                if rebuilt != nodes[node - 1] {
                    return Err(Error::Integrity(format!(
                        "'{event}' produced wrong content"
                    )));
                }
                if matches!(event, Event::Fail { .. }) {
                    let mut set = vec![node];
                    set.extend(p.nodes().filter(|&j| j != node).take(p.k - 1));
                    let mut subset = pick(&nodes, &set[1..]);
                    subset.insert(0, rebuilt.clone());
                    if code.decode(&subset)? != message {
                        return Err(Error::Integrity(format!(
                            "decode after '{event}' disagrees with the message"
                        )));
                    }
                    nodes[node - 1] = rebuilt;
                }
                EventRecord {
                    event,
                    nodes: helpers,
                    read: m.total_read(),
                    download: m.total_downloaded(),
                    pure_transfer: m.pure_transfer,
                }
            }
            Event::FullRead => {
                let set = choose_decoders(&p, workload.policy, &mut rng);
                if code.decode(&pick(&nodes, &set))? != message {
                    return Err(Error::Integrity(
                        "full read disagrees with the message".into(),
                    ));
                }
                let traffic = p.k * p.alpha();
                EventRecord {
                    event,
                    nodes: set,
                    read: traffic,
                    download: traffic,
                    pure_transfer: true,
                }
            }
        };
        records.push(record);
    }

    let rec: Vec<&EventRecord> = records
        .iter()
        .filter(|r| !matches!(r.event, Event::FullRead))
        .collect();
    let recoveries = rec.len();
    let read = rec.iter().map(|r| r.read).sum();
    let download = rec.iter().map(|r| r.download).sum();
    let pure_transfer = rec.iter().filter(|r| r.pure_transfer).count();
    let bound = (recoveries * p.d * p.beta) as f64;
    let ratio = |x: usize, denom: f64| (recoveries > 0).then(|| x as f64 / denom);
    Ok(TrafficSummary {
        variant: code.variant(),
        params: p,
        events: records,
        recoveries,
        read,
        download,
        pure_transfer,
        read_ratio: ratio(read, bound),
        download_ratio: ratio(download, bound),
        pure_transfer_frac: ratio(pure_transfer, recoveries as f64),
    })
}

/// Runs the same workload under every admissible variant, in the order
/// baseline, c1, c2, complete-graph.
pub fn compare_variants(
    params: &SystemParams,
    message: &[u32],
    workload: &Workload,
) -> Result<Vec<TrafficSummary>> {
    CodeVariant::ALL
        .iter()
        .filter(|v| v.admissible(params))
        .map(|&v| run_workload(&Code::new(*params, v)?, message, workload))
        .collect()
}

/// A deterministic message of `stripes` stripes drawn from `seed`.
pub fn seeded_message(params: &SystemParams, stripes: usize, seed: u64) -> Vec<u32> {
    let mut rng = Draw::new(seed);
    let q = params.field.size() as usize;
    (0..stripes * params.message_len())
        .map(|_| rng.below(q) as u32)
        .collect()
}
