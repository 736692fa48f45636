//! Byte-exact container: big-endian header followed by the range-coded payload.
//!
//! ```text
//! "SRDP" | version u8 | alphabet_size u16 | partition_hash u64 | symbol_count u64 | counts u16 * k | payload
//! ```
//!
//! The block count `k` is not stored; readers take it from the model.

use super::range_coder::FrequencyTable;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SRDP";
pub const VERSION: u8 = 1;
const FIXED_LEN: usize = 4 + 1 + 2 + 8 + 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub version: u8,
    pub alphabet_size: u16,
    pub partition_hash: u64,
    pub symbol_count: u64,
    pub freq_table: FrequencyTable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    pub header: Header,
    pub payload: Vec<u8>,
}

impl BitStream {
    /// Payload size in bits.
    pub fn bit_length(&self) -> u64 {
        self.payload.len() as u64 * 8
    }

    pub fn header_len(&self) -> usize {
        FIXED_LEN + 2 * self.header.freq_table.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(self.header_len() + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(h.version);
        out.extend_from_slice(&h.alphabet_size.to_be_bytes());
        out.extend_from_slice(&h.partition_hash.to_be_bytes());
        out.extend_from_slice(&h.symbol_count.to_be_bytes());
        for c in h.freq_table.counts() {
            out.extend_from_slice(&c.to_be_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses a stream whose frequency table holds `num_blocks` entries.
    pub fn from_bytes(bytes: &[u8], num_blocks: usize) -> Result<Self> {
        let need = FIXED_LEN + 2 * num_blocks;
        if bytes.len() < need {
            return Err(Error::Header(format!("stream has {} bytes, header needs {need}", bytes.len())));
        }
        if bytes[..4] != MAGIC {
            return Err(Error::Header(format!("bad magic {:02x?}", &bytes[..4])));
        }
        let version = bytes[4];
        if version != VERSION {
            return Err(Error::Header(format!("unsupported version {version}")));
        }
        let alphabet_size = u16::from_be_bytes([bytes[5], bytes[6]]);
        let partition_hash = u64::from_be_bytes(bytes[7..15].try_into().expect("8 bytes"));
        let symbol_count = u64::from_be_bytes(bytes[15..23].try_into().expect("8 bytes"));
        let counts = bytes[FIXED_LEN..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        Ok(Self {
            header: Header {
                version,
                alphabet_size,
                partition_hash,
                symbol_count,
                freq_table: FrequencyTable::from_counts(counts)?,
            },
            payload: bytes[need..].to_vec(),
        })
    }
}
