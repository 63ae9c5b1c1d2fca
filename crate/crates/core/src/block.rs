//! On-disk format of one node's stored symbols.
//!
//! A block file is a 36-byte header followed by the node's symbols in storage
//! order (stripe-major, then layer-major). All integers are little-endian.
//!
//! | offset | size | field                                             |
//! |--------|------|---------------------------------------------------|
//! | 0      | 4    | magic `MBRB`                                      |
//! | 4      | 1    | format version, currently 1                       |
//! | 5      | 1    | variant tag (0 baseline, 1 c1, 2 c2, 3 complete-graph) |
//! | 6      | 1    | field kind (0 prime, 1 binary extension)          |
//! | 7      | 1    | flags, bit 0 set when systematically precoded     |
//! | 8      | 2    | n                                                 |
//! | 10     | 2    | k                                                 |
//! | 12     | 2    | d                                                 |
//! | 14     | 2    | beta                                              |
//! | 16     | 4    | field size q                                      |
//! | 20     | 4    | prime p, or reduction polynomial for GF(2^m)      |
//! | 24     | 2    | node id (1-based)                                 |
//! | 26     | 1    | symbol width in bytes (1 if q <= 256, else 2)     |
//! | 27     | 1    | reserved, zero                                    |
//! | 28     | 8    | stripe count                                      |
//! | 36     | ...  | `stripes * d * beta` symbols of `width` bytes     |

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::pm::SystemParams;
use crate::variants::{CodeVariant, NodeContent};

pub const MAGIC: &[u8; 4] = b"MBRB";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 36;

const FLAG_SYSTEMATIC: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockHeader {
    pub params: SystemParams,
    pub variant: CodeVariant,
    pub systematic: bool,
    pub node_id: usize,
    pub stripes: u64,
}

/// Bytes per stored symbol for a field.
pub fn symbol_width(field: FieldSpec) -> usize {
    if field.size() <= 256 {
        1
    } else {
        2
    }
}

fn u16_field(v: usize, what: &str) -> Result<[u8; 2]> {
    u16::try_from(v)
        .map(u16::to_le_bytes)
        .map_err(|_| Error::BlockFormat(format!("{what} = {v} does not fit in 16 bits")))
}

impl BlockHeader {
    pub fn to_bytes(&self) -> Result<[u8; HEADER_LEN]> {
        let p = &self.params;
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(MAGIC);
        h[4] = VERSION;
        h[5] = self.variant.tag();
        let (kind, extra) = match p.field {
            FieldSpec::Prime { p } => (0, p),
            FieldSpec::Binary { poly, .. } => (1, poly),
        };
        h[6] = kind;
        h[7] = if self.systematic { FLAG_SYSTEMATIC } else { 0 };
        h[8..10].copy_from_slice(&u16_field(p.n, "n")?);
        h[10..12].copy_from_slice(&u16_field(p.k, "k")?);
        h[12..14].copy_from_slice(&u16_field(p.d, "d")?);
        h[14..16].copy_from_slice(&u16_field(p.beta, "beta")?);
        h[16..20].copy_from_slice(&p.field.size().to_le_bytes());
        h[20..24].copy_from_slice(&extra.to_le_bytes());
        h[24..26].copy_from_slice(&u16_field(self.node_id, "node id")?);
        h[26] = symbol_width(p.field) as u8;
        h[28..36].copy_from_slice(&self.stripes.to_le_bytes());
        Ok(h)
    }

    pub fn from_bytes(h: &[u8]) -> Result<Self> {
        if h.len() < HEADER_LEN {
            return Err(Error::BlockFormat(format!(
                "header needs {HEADER_LEN} bytes, got {}",
                h.len()
            )));
        }
        if &h[0..4] != MAGIC {
            return Err(Error::BlockFormat("bad magic".into()));
        }
        if h[4] != VERSION {
            return Err(Error::BlockFormat(format!("unsupported version {}", h[4])));
        }
        let variant = CodeVariant::from_tag(h[5])
            .map_err(|_| Error::BlockFormat(format!("unknown variant tag {}", h[5])))?;
        if h[7] & !FLAG_SYSTEMATIC != 0 || h[27] != 0 {
            return Err(Error::BlockFormat("reserved bits set".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes([h[o], h[o + 1]]) as usize;
        let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().expect("4 bytes"));
        let q = u32_at(16);
        let extra = u32_at(20);
        let field = match h[6] {
            0 => FieldSpec::prime(extra)?,
            1 => {
                if !q.is_power_of_two() {
                    return Err(Error::BlockFormat(format!(
                        "binary field size {q} is not 2^m"
                    )));
                }
                FieldSpec::binary(q.trailing_zeros(), extra)?
            }
            other => return Err(Error::BlockFormat(format!("unknown field kind {other}"))),
        };
        if field.size() != q {
            return Err(Error::BlockFormat(format!(
                "field size {q} disagrees with {field}"
            )));
        }
        let params = SystemParams::new(u16_at(8), u16_at(10), u16_at(12), field, u16_at(14))?;
        variant.check_admissible(&params)?;
        if h[26] as usize != symbol_width(field) {
            return Err(Error::BlockFormat(format!(
                "symbol width {} is wrong for {field}",
                h[26]
            )));
        }
        let node_id = u16_at(24);
        params.check_node(node_id)?;
        let stripes = u64::from_le_bytes(h[28..36].try_into().expect("8 bytes"));
        if stripes == 0 {
            return Err(Error::BlockFormat("stripe count is zero".into()));
        }
        Ok(BlockHeader {
            params,
            variant,
            systematic: h[7] & FLAG_SYSTEMATIC != 0,
            node_id,
            stripes,
        })
    }

    /// Number of payload bytes that must follow the header.
    pub fn payload_len(&self) -> Result<usize> {
        let width = symbol_width(self.params.field) as u64;
        usize::try_from(self.stripes)
            .ok()
            .and_then(|s| s.checked_mul(self.params.alpha()))
            .and_then(|n| n.checked_mul(width as usize))
            .ok_or_else(|| Error::BlockFormat("stripe count overflows".into()))
    }
}

/// Serialises one node's content.
pub fn write_block(
    content: &NodeContent,
    params: &SystemParams,
    systematic: bool,
) -> Result<Vec<u8>> {
    content.validate(params)?;
    let header = BlockHeader {
        params: *params,
        variant: content.variant,
        systematic,
        node_id: content.node_id,
        stripes: content.stripes(params) as u64,
    };
    let width = symbol_width(params.field);
    let mut out = Vec::with_capacity(HEADER_LEN + content.symbols.len() * width);
    out.extend_from_slice(&header.to_bytes()?);
    for &s in &content.symbols {
        if width == 1 {
            out.push(s as u8);
        } else {
            out.extend_from_slice(&(s as u16).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a block file, rejecting malformed headers, truncated or oversized
/// payloads, and out-of-field symbols.
pub fn read_block(bytes: &[u8]) -> Result<(BlockHeader, NodeContent)> {
    let header = BlockHeader::from_bytes(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = header.payload_len()?;
    if payload.len() != expected {
        return Err(Error::BlockFormat(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let symbols: Vec<u32> = match symbol_width(header.params.field) {
        1 => payload.iter().map(|&b| b as u32).collect(),
        _ => payload
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect(),
    };
    let content = NodeContent {
        node_id: header.node_id,
        variant: header.variant,
        symbols,
    };
    content.validate(&header.params)?;
    Ok((header, content))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(field: FieldSpec) -> (SystemParams, NodeContent) {
        let p = SystemParams::new(6, 3, 4, field, 2).unwrap();
        let q = field.size();
        let symbols = (0..p.alpha() as u32 * 3).map(|i| (i * 977) % q).collect();
        (
            p,
            NodeContent {
                node_id: 5,
                variant: CodeVariant::C2,
                symbols,
            },
        )
    }

    #[test]
    fn roundtrip_narrow_and_wide() {
        for field in [
            FieldSpec::gf256(),
            FieldSpec::prime(257).unwrap(),
            FieldSpec::prime(7).unwrap(),
        ] {
            let (p, c) = sample(field);
            let bytes = write_block(&c, &p, false).unwrap();
            assert_eq!(
                bytes.len(),
                HEADER_LEN + c.symbols.len() * symbol_width(field)
            );
            let (h, back) = read_block(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(h.params, p);
            assert_eq!(h.stripes, 3);
            assert!(!h.systematic);
        }
    }

    #[test]
    fn header_layout() {
        let (p, c) = sample(FieldSpec::gf256());
        let b = write_block(&c, &p, true).unwrap();
        assert_eq!(&b[0..4], b"MBRB");
        assert_eq!(b[4..8], [1, 2, 1, 1]);
        assert_eq!(b[8..16], [6, 0, 3, 0, 4, 0, 2, 0]);
        assert_eq!(b[16..24], [0, 1, 0, 0, 0x1D, 1, 0, 0]);
        assert_eq!(b[24..28], [5, 0, 1, 0]);
        assert_eq!(b[28..36], [3, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn corrupt_headers_rejected() {
        let (p, c) = sample(FieldSpec::gf256());
        let good = write_block(&c, &p, false).unwrap();
        let corrupt = |offset: usize, v: u8| {
            let mut b = good.clone();
            b[offset] = v;
            read_block(&b)
        };
        assert!(corrupt(0, b'X').is_err());
        assert!(corrupt(4, 2).is_err());
        assert!(corrupt(5, 9).is_err());
        assert!(corrupt(6, 7).is_err());
        assert!(corrupt(7, 4).is_err());
        assert!(corrupt(10, 5).is_err()); // k > d
        assert!(corrupt(20, 0x1C).is_err()); // reducible polynomial
        assert!(corrupt(24, 7).is_err()); // node > n
        assert!(corrupt(26, 2).is_err());
        assert!(corrupt(28, 4).is_err()); // stripe count disagrees with payload
        assert!(read_block(&good[..20]).is_err());
        assert!(read_block(&good[..good.len() - 1]).is_err());
    }

    #[test]
    fn out_of_field_symbol_rejected() {
        let (p, c) = sample(FieldSpec::prime(7).unwrap());
        let mut b = write_block(&c, &p, false).unwrap();
        b[HEADER_LEN] = 7;
        assert!(matches!(read_block(&b), Err(Error::ValueOutOfRange { .. })));
    }
}
