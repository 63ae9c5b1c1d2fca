//! A configured code instance: parameters, variant, encoding vectors and
//! (for C1) optional systematic precoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pm::{build_layers, EncodingVectors, SystemParams};
use crate::recovery::{self, RepairMetrics};
use crate::search::{self, LinearForms, SearchBudget};
use crate::variants::{self, CodeVariant, NodeContent, SystematicPrecoder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairMode {
    Compute,
    Transfer,
}

impl fmt::Display for RepairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepairMode::Compute => "compute",
            RepairMode::Transfer => "transfer",
        })
    }
}

impl FromStr for RepairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compute" => Ok(RepairMode::Compute),
            "transfer" => Ok(RepairMode::Transfer),
            other => Err(Error::Unsupported(format!("unknown repair mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Code {
    params: SystemParams,
    variant: CodeVariant,
    vectors: EncodingVectors,
    precoder: Option<SystematicPrecoder>,
}

impl Code {
    pub fn new(params: SystemParams, variant: CodeVariant) -> Result<Self> {
        variant.check_admissible(&params)?;
        let vectors = EncodingVectors::build(&params)?;
        Ok(Code {
            params,
            variant,
            vectors,
            precoder: None,
        })
    }

    /// Turns on systematic precoding so nodes 1..k store the message verbatim.
    /// Only C1 has a systematic form here.
    pub fn with_systematic(mut self) -> Result<Self> {
        if self.variant != CodeVariant::C1 {
            return Err(Error::Unsupported(format!(
                "systematic precoding is defined for c1, not {}",
                self.variant
            )));
        }
        self.precoder = Some(SystematicPrecoder::new(&self.vectors, &self.params)?);
        Ok(self)
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn variant(&self) -> CodeVariant {
        self.variant
    }

    pub fn vectors(&self) -> &EncodingVectors {
        &self.vectors
    }

    pub fn is_systematic(&self) -> bool {
        self.precoder.is_some()
    }

    /// Encodes a message of whole stripes (`B` symbols each).
    pub fn encode(&self, message: &[u32]) -> Result<Vec<NodeContent>> {
        let p = &self.params;
        if let Some(&v) = message.iter().find(|&&v| !p.field.contains(v)) {
            return Err(Error::ValueOutOfRange {
                value: v,
                field: p.field,
            });
        }
        match (self.variant, &self.precoder) {
            (CodeVariant::CompleteGraph, _) => variants::encode_complete_graph(message, p),
            (variant, Some(pre)) => {
                if message.is_empty() || !message.len().is_multiple_of(p.message_len()) {
                    return Err(Error::InvalidMessage(format!(
                        "message length {} is not a positive multiple of B = {}",
                        message.len(),
                        p.message_len()
                    )));
                }
                let layers = message
                    .chunks(p.layer_message_len())
                    .map(|chunk| pre.precode(chunk, p))
                    .collect::<Result<Vec<_>>>()?;
                variants::encode(variant, &layers, &self.vectors, p)
            }
            (variant, None) => {
                let layers = build_layers(message, p)?;
                variants::encode(variant, &layers, &self.vectors, p)
            }
        }
    }

    /// Recovers the message from any k of the nodes.
    pub fn decode(&self, nodes: &[NodeContent]) -> Result<Vec<u32>> {
        match &self.precoder {
            None => recovery::decode_all(self.variant, nodes, &self.vectors, &self.params),
            Some(pre) => {
                let flat = recovery::decode_all(self.variant, nodes, &self.vectors, &self.params)?;
                let b = self.params.layer_message_len();
                let mut out = Vec::with_capacity(flat.len());
                for chunk in flat.chunks(b) {
                    let m = crate::pm::MessageMatrix::build(chunk, &self.params)?;
                    out.extend(pre.unprecode(&m)?);
                }
                Ok(out)
            }
        }
    }

    /// Whether helpers can repair `failed` by transfer using the code's own
    /// transfer rule (no search).
    pub fn transfer_admissible(&self, failed: usize, helpers: &[usize]) -> bool {
        if recovery::validate_helpers(failed, helpers, &self.params).is_err() {
            return false;
        }
        match self.variant {
            CodeVariant::Baseline => false,
            CodeVariant::C1 => failed <= self.params.d,
            CodeVariant::C2 => {
                let mut a = helpers.to_vec();
                let mut b = recovery::c2_designated_helpers(failed, &self.params);
                a.sort_unstable();
                b.sort_unstable();
                a == b
            }
            CodeVariant::CompleteGraph => true,
        }
    }

    /// The helper set the code prefers for `failed`: the transfer set when the
    /// variant has one, otherwise the d lowest-numbered other nodes.
    pub fn designated_helpers(&self, failed: usize) -> Vec<usize> {
        match self.variant {
            CodeVariant::C2 => recovery::c2_designated_helpers(failed, &self.params),
            _ => self
                .params
                .nodes()
                .filter(|&j| j != failed)
                .take(self.params.d)
                .collect(),
        }
    }

    /// Repairs `failed` from `helpers`.
    ///
    /// Transfer mode uses the variant's transfer rule when it applies and
    /// otherwise falls back to an exhaustive schedule search; if no schedule
    /// exists the request is rejected.
    pub fn repair(
        &self,
        failed: usize,
        helpers: &[usize],
        mode: RepairMode,
        contents: &[NodeContent],
    ) -> Result<(NodeContent, RepairMetrics)> {
        let p = &self.params;
        let v = &self.vectors;
        match mode {
            RepairMode::Compute => {
                recovery::repair_compute(self.variant, failed, helpers, contents, v, p)
            }
            RepairMode::Transfer if self.transfer_admissible(failed, helpers) => match self.variant
            {
                CodeVariant::C1 => recovery::repair_by_transfer_c1(failed, helpers, contents, v, p),
                CodeVariant::C2 => {
                    recovery::repair_by_transfer_c2(failed, Some(helpers), contents, v, p)
                }
                CodeVariant::CompleteGraph => {
                    recovery::repair_by_transfer_complete_graph(failed, contents, p)
                }
                CodeVariant::Baseline => unreachable!("baseline has no transfer rule"),
            },
            RepairMode::Transfer => {
                recovery::validate_helpers(failed, helpers, p)?;
                let forms = LinearForms::build(self.variant, v, p)?;
                let budget = SearchBudget::default();
                match search::schedule_feasible(failed, helpers, &forms, p, &budget)? {
                    Some(schedule) => search::execute_schedule(&schedule, contents, &forms, p),
                    None => Err(Error::TransferNotAdmissible(format!(
                        "no choice of {beta} stored symbol(s) per helper from {helpers:?} \
                         determines node {failed} under {variant}; with d = {d} != n - 1 = {n1} \
                         no MBR code can repair every node from every helper set by transfer, \
                         use compute mode",
                        beta = p.beta,
                        variant = self.variant,
                        d = p.d,
                        n1 = p.n - 1
                    ))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;

    #[test]
    fn systematic_roundtrip_and_layout() {
        let p = SystemParams::new(6, 3, 4, FieldSpec::gf256(), 2).unwrap();
        let code = Code::new(p, CodeVariant::C1)
            .unwrap()
            .with_systematic()
            .unwrap();
        let msg: Vec<u32> = (0..p.message_len() as u32 * 3)
            .map(|i| (i * 37 + 11) % 256)
            .collect();
        let nodes = code.encode(&msg).unwrap();
        assert_eq!(code.decode(&nodes[3..]).unwrap(), msg);
        // First layer of the first stripe: symbol j of node i holds message r.
        let positions = variants::systematic_positions(&p);
        for (r, &(i, j)) in positions.iter().enumerate() {
            assert_eq!(nodes[i - 1].symbols[j - 1], msg[r]);
        }
    }

    #[test]
    fn systematic_only_for_c1() {
        let p = SystemParams::new(5, 2, 3, FieldSpec::prime(7).unwrap(), 1).unwrap();
        assert!(Code::new(p, CodeVariant::C2)
            .unwrap()
            .with_systematic()
            .is_err());
        assert!(Code::new(p, CodeVariant::CompleteGraph).is_err());
    }

    #[test]
    fn baseline_transfer_is_rejected() {
        let p = SystemParams::new(4, 2, 2, FieldSpec::prime(7).unwrap(), 1).unwrap();
        let code = Code::new(p, CodeVariant::Baseline).unwrap();
        let nodes = code.encode(&[1, 2, 3]).unwrap();
        let err = code
            .repair(3, &[1, 2], RepairMode::Transfer, &nodes)
            .unwrap_err();
        assert!(matches!(err, Error::TransferNotAdmissible(_)), "{err}");
        let (rep, m) = code
            .repair(3, &[1, 2], RepairMode::Compute, &nodes)
            .unwrap();
        assert_eq!(rep, nodes[2]);
        assert!(m.download_meets_bound());
    }
}
