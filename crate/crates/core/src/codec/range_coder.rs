//! Static-model range coder.
//!
//! 32-bit range with byte-wise renormalisation below `2^24`, carry
//! propagation into already emitted bytes, and a 4-byte flush. Sub-intervals
//! are computed as `floor(range * cum / total)` in 64-bit arithmetic, so the
//! coder loses at most one unit of range per symbol.

use crate::{Error, Result};

const TOP: u32 = 1 << 24;

/// Default quantisation target for the frequency table total.
pub const DEFAULT_TOTAL: u32 = 1 << 15;

/// Quantised symbol frequencies, every count at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u16>,
    cum: Vec<u32>,
}

impl FrequencyTable {
    pub fn from_counts(counts: Vec<u16>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Header("empty frequency table".into()));
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Header(format!("frequency of symbol {i} is zero")));
        }
        let mut cum = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0u32;
        cum.push(0);
        for &c in &counts {
            acc += u32::from(c);
            cum.push(acc);
        }
        if acc > u32::from(u16::MAX) {
            return Err(Error::Header(format!("frequency total {acc} exceeds 16 bits")));
        }
        Ok(Self { counts, cum })
    }

    /// Rounds `probs * total` to integers with a floor of 1 and repairs the
    /// sum on the largest entry.
    pub fn quantize(probs: &[f64], total: u32) -> Result<Self> {
        let k = probs.len() as u32;
        if k == 0 || total < k || total > u32::from(u16::MAX) {
            return Err(Error::InvalidArgument(format!(
                "cannot quantise {k} symbols into a total of {total}"
            )));
        }
        let mut counts: Vec<i64> = probs
            .iter()
            .map(|&p| ((p * f64::from(total)).round() as i64).max(1))
            .collect();
        let mut diff = i64::from(total) - counts.iter().sum::<i64>();
        while diff != 0 {
            // largest entry absorbs the rounding error; ties go to the first
            let i = (0..counts.len())
                .filter(|&i| diff > 0 || counts[i] > 1)
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("total >= k leaves a reducible entry");
            let step = if diff > 0 { diff } else { (-diff).min(counts[i] - 1) };
            counts[i] += step * diff.signum();
            diff -= step * diff.signum();
        }
        Self::from_counts(counts.into_iter().map(|c| c as u16).collect())
    }

    pub fn counts(&self) -> &[u16] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        *self.cum.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn probability(&self, s: usize) -> f64 {
        f64::from(self.counts[s]) / f64::from(self.total())
    }

    /// Entropy of the quantised model in bits.
    pub fn entropy(&self) -> f64 {
        (0..self.len()).map(|s| -self.probability(s) * self.probability(s).log2()).sum()
    }

    /// `sum_i -log2 P(s_i)` under the quantised model.
    pub fn ideal_code_length(&self, symbols: &[usize]) -> f64 {
        symbols.iter().map(|&s| -self.probability(s).log2()).sum()
    }

    fn bounds(&self, range: u32, s: usize) -> (u32, u32) {
        let r = u64::from(range);
        let t = u64::from(self.total());
        let lo = r * u64::from(self.cum[s]) / t;
        let hi = r * u64::from(self.cum[s + 1]) / t;
        (lo as u32, hi as u32)
    }
}

#[derive(Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            out: Vec::new(),
        }
    }

    pub fn encode(&mut self, s: usize, table: &FrequencyTable) {
        let (lo, hi) = table.bounds(self.range, s);
        self.low += u64::from(lo);
        self.range = hi - lo;
        if self.low >> 32 != 0 {
            self.propagate_carry();
            self.low &= 0xFFFF_FFFF;
        }
        while self.range < TOP {
            self.out.push((self.low >> 24) as u8);
            self.low = (self.low << 8) & 0xFFFF_FFFF;
            self.range <<= 8;
        }
    }

    fn propagate_carry(&mut self) {
        for b in self.out.iter_mut().rev() {
            if *b == 0xFF {
                *b = 0;
            } else {
                *b += 1;
                return;
            }
        }
        unreachable!("carry out of the first byte");
    }

    pub fn finish(mut self) -> Vec<u8> {
        self.out.extend_from_slice(&(self.low as u32).to_be_bytes());
        self.out
    }
}

#[derive(Debug)]
pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    data: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        if data.len() < 4 {
            return Err(Error::CorruptPayload {
                bit_offset: data.len() as u64 * 8,
            });
        }
        Ok(Self {
            code: u32::from_be_bytes([data[0], data[1], data[2], data[3]]),
            range: u32::MAX,
            data,
            pos: 4,
        })
    }

    pub fn decode(&mut self, table: &FrequencyTable) -> Result<usize> {
        if self.code >= self.range {
            return Err(Error::CorruptPayload {
                bit_offset: self.pos as u64 * 8,
            });
        }
        // largest s with floor(range * cum[s] / total) <= code
        let (mut a, mut b) = (0usize, table.len());
        while b - a > 1 {
            let mid = (a + b) / 2;
            if table.bounds(self.range, mid).0 <= self.code {
                a = mid;
            } else {
                b = mid;
            }
        }
        let (lo, hi) = table.bounds(self.range, a);
        self.code -= lo;
        self.range = hi - lo;
        while self.range < TOP {
            let byte = *self.data.get(self.pos).ok_or(Error::CorruptPayload {
                bit_offset: self.pos as u64 * 8,
            })?;
            self.code = (self.code << 8) | u32::from(byte);
            self.range <<= 8;
            self.pos += 1;
        }
        Ok(a)
    }

    /// Fails unless every payload byte was consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::CorruptPayload {
                bit_offset: self.pos as u64 * 8,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(symbols: &[usize], table: &FrequencyTable) -> Vec<u8> {
        let mut enc = RangeEncoder::new();
        for &s in symbols {
            enc.encode(s, table);
        }
        let bytes = enc.finish();
        let mut dec = RangeDecoder::new(&bytes).unwrap();
        let back: Vec<usize> = symbols.iter().map(|_| dec.decode(table).unwrap()).collect();
        dec.finish().unwrap();
        assert_eq!(back, symbols);
        bytes
    }

    #[test]
    fn quantize_keeps_total_and_floor() {
        let t = FrequencyTable::quantize(&[0.75, 0.25], DEFAULT_TOTAL).unwrap();
        assert_eq!(t.counts(), &[24576, 8192]);
        let t = FrequencyTable::quantize(&[1.0, 0.0, 0.0], DEFAULT_TOTAL).unwrap();
        assert_eq!(t.counts(), &[32766, 1, 1]);
        assert_eq!(t.total(), DEFAULT_TOTAL);
        let t = FrequencyTable::quantize(&[0.3333, 0.3333, 0.3334], 10).unwrap();
        assert_eq!(t.total(), 10);
        assert!(FrequencyTable::quantize(&[0.5, 0.5], 1).is_err());
    }

    #[test]
    fn single_symbol_costs_only_the_flush() {
        let t = FrequencyTable::from_counts(vec![7]).unwrap();
        let bytes = round_trip(&vec![0; 10_000], &t);
        assert_eq!(bytes.len(), 4);
    }

    #[test]
    fn carries_are_propagated() {
        // skewed model pushes low towards the top of the range repeatedly
        let t = FrequencyTable::from_counts(vec![1, 65534]).unwrap();
        let symbols: Vec<usize> = (0..5000).map(|i| usize::from(i % 97 != 0)).collect();
        round_trip(&symbols, &t);
        let t = FrequencyTable::from_counts(vec![3, 1, 60000]).unwrap();
        let symbols: Vec<usize> = (0..5000).map(|i| [2, 2, 2, 1, 2, 0][i % 6]).collect();
        round_trip(&symbols, &t);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let t = FrequencyTable::from_counts(vec![1, 1, 1, 1]).unwrap();
        let symbols: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let mut enc = RangeEncoder::new();
        symbols.iter().for_each(|&s| enc.encode(s, &t));
        let mut bytes = enc.finish();
        bytes.truncate(bytes.len() - 2);
        let mut dec = RangeDecoder::new(&bytes).unwrap();
        let res: Result<Vec<usize>> = symbols.iter().map(|_| dec.decode(&t)).collect();
        assert!(res.is_err() || dec.finish().is_err());
        assert!(RangeDecoder::new(&[1, 2]).is_err());
    }
}
