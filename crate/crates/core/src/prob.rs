//! Exact finite-probability primitives.
//!
//! Everything here is immutable after construction. Logarithms are base 2;
//! `0 log 0` is taken as 0 and a positive mass against a zero reference mass
//! is reported as [`Error::SupportViolation`] instead of `+inf`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the total mass of a distribution and on each row of a
/// conditional table.
pub const VALIDATION_TOL: f64 = 1e-9;

/// Reporting unit for information quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Bits,
    Nats,
}

impl Unit {
    /// Converts a value computed in bits into this unit.
    pub fn from_bits(self, bits: f64) -> f64 {
        match self {
            Unit::Bits => bits,
            Unit::Nats => bits * std::f64::consts::LN_2,
        }
    }
}

#[inline]
pub(crate) fn plog2p(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

fn check_mass(values: &[f64], what: &str) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "{what}[{i}] = {v} is not a non-negative finite number"
            )));
        }
    }
    Ok(values.iter().sum())
}

/// Probability vector over `{0, .., n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionRepr {
    probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    renormalize: bool,
}

impl TryFrom<DistributionRepr> for FiniteDistribution {
    type Error = Error;
    fn try_from(r: DistributionRepr) -> Result<Self> {
        if r.renormalize {
            FiniteDistribution::normalized(r.probs)
        } else {
            FiniteDistribution::new(r.probs)
        }
    }
}

impl From<FiniteDistribution> for DistributionRepr {
    fn from(d: FiniteDistribution) -> Self {
        DistributionRepr {
            probs: d.probs,
            renormalize: false,
        }
    }
}

impl FiniteDistribution {
    /// Validates `probs` as-is: entries non-negative, total within
    /// [`VALIDATION_TOL`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum = check_mass(&probs, "probs")?;
        if (sum - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probs sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Like [`new`](Self::new) but rescales non-negative weights to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum = check_mass(&weights, "weights")?;
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("weights have zero total mass".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty alphabet");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(n: usize, i: usize) -> Self {
        assert!(i < n, "index {i} out of bounds for alphabet of size {n}");
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }
}

/// Disjoint blocks covering `{0, .., n-1}`; each block is one synset.
///
/// Blocks are stored canonically: members ascending, blocks ordered by their
/// smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct SynsetPartition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionRepr {
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<PartitionRepr> for SynsetPartition {
    type Error = Error;
    fn try_from(r: PartitionRepr) -> Result<Self> {
        let n = r.blocks.iter().map(Vec::len).sum();
        SynsetPartition::new(r.blocks, n)
    }
}

impl From<SynsetPartition> for PartitionRepr {
    fn from(s: SynsetPartition) -> Self {
        PartitionRepr { blocks: s.blocks }
    }
}

impl SynsetPartition {
    pub fn new(mut blocks: Vec<Vec<usize>>, alphabet_size: usize) -> Result<Self> {
        let mut block_of = vec![usize::MAX; alphabet_size];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            block.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        for (k, block) in blocks.iter().enumerate() {
            for &i in block {
                if i >= alphabet_size {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} outside alphabet of size {alphabet_size}"
                    )));
                }
                if block_of[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "index {i} appears in more than one block"
                    )));
                }
                block_of[i] = k;
            }
        }
        if let Some(i) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidPartition(format!("index {i} is not covered")));
        }
        Ok(Self { blocks, block_of })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            blocks: (0..n).map(|i| vec![i]).collect(),
            block_of: (0..n).collect(),
        }
    }

    pub fn single_block(n: usize) -> Self {
        assert!(n > 0);
        Self {
            blocks: vec![(0..n).collect()],
            block_of: vec![0; n],
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.block_of.len()
    }

    /// Index of the block containing symbol `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    /// Returns the coarser partition obtained by merging blocks `a` and `b`.
    pub fn merge(&self, a: usize, b: usize) -> Result<Self> {
        if a >= self.num_blocks() || b >= self.num_blocks() || a == b {
            return Err(Error::InvalidArgument(format!("cannot merge blocks {a} and {b}")));
        }
        let mut blocks = Vec::with_capacity(self.num_blocks() - 1);
        let mut merged = self.blocks[a].clone();
        merged.extend_from_slice(&self.blocks[b]);
        blocks.push(merged);
        for (k, block) in self.blocks.iter().enumerate() {
            if k != a && k != b {
                blocks.push(block.clone());
            }
        }
        Self::new(blocks, self.alphabet_size())
    }

    pub fn check_alphabet(&self, n: usize) -> Result<()> {
        if self.alphabet_size() != n {
            return Err(Error::DimensionMismatch {
                what: "partition alphabet",
                expected: n,
                got: self.alphabet_size(),
            });
        }
        Ok(())
    }

    /// Synset probabilities `P(block) = sum_{i in block} p_i`.
    pub fn block_probs(&self, p: &FiniteDistribution) -> Result<Vec<f64>> {
        self.check_alphabet(p.len())?;
        Ok(self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| p.get(i)).sum())
            .collect())
    }

    /// Block distribution `P(block)` as a [`FiniteDistribution`].
    pub fn block_distribution(&self, p: &FiniteDistribution) -> Result<FiniteDistribution> {
        FiniteDistribution::normalized(self.block_probs(p)?)
    }

    /// Conditional table `p(x | block) = p(x) / P(block)` restricted to the
    /// block. Blocks with zero mass get the uniform distribution over their
    /// members.
    pub fn within_block_conditional(&self, p: &FiniteDistribution) -> Result<ConditionalTable> {
        let masses = self.block_probs(p)?;
        let n = p.len();
        let rows = self
            .blocks
            .iter()
            .zip(&masses)
            .map(|(block, &mass)| {
                let mut row = vec![0.0; n];
                for &i in block {
                    row[i] = if mass > 0.0 {
                        p.get(i) / mass
                    } else {
                        1.0 / block.len() as f64
                    };
                }
                row
            })
            .collect();
        ConditionalTable::new(rows)
    }

    /// Canonical text form used for hashing, e.g. `0,1|2`.
    pub fn canonical_string(&self) -> String {
        self.blocks
            .iter()
            .map(|b| b.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Row-stochastic matrix `p(col | row)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ConditionalTable {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for ConditionalTable {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        ConditionalTable::new(rows)
    }
}

impl From<ConditionalTable> for Vec<Vec<f64>> {
    fn from(t: ConditionalTable) -> Self {
        t.to_rows()
    }
}

impl ConditionalTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(Error::InvalidTable("no rows".into()));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::InvalidTable("no columns".into()));
        }
        let mut data = Vec::with_capacity(n_rows * cols);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InvalidTable(format!(
                    "row {r} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            let sum = check_mass(&row, "row").map_err(|e| Error::InvalidTable(format!("row {r}: {e}")))?;
            if (sum - 1.0).abs() > VALIDATION_TOL {
                return Err(Error::InvalidTable(format!("row {r} sums to {sum}")));
            }
            data.extend(row);
        }
        Ok(Self {
            rows: n_rows,
            cols,
            data,
        })
    }

    pub(crate) fn from_flat_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    /// Every row equal to `p`.
    pub fn constant_rows(rows: usize, p: &FiniteDistribution) -> Self {
        let data = (0..rows).flat_map(|_| p.probs().iter().copied()).collect();
        Self {
            rows,
            cols: p.len(),
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row_distribution(&self, r: usize) -> FiniteDistribution {
        FiniteDistribution {
            probs: self.row(r).to_vec(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// Joint mass over a (row alphabet x column alphabet) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    mass: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: usize, cols: usize, mass: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDistribution("joint with an empty alphabet".into()));
        }
        if mass.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "joint mass length",
                expected: rows * cols,
                got: mass.len(),
            });
        }
        let sum = check_mass(&mass, "joint mass")?;
        if (sum - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidDistribution(format!("joint mass sums to {sum}")));
        }
        Ok(Self { rows, cols, mass })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidDistribution("ragged joint rows".into()));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    /// `p(x) q(y)`.
    pub fn product(p: &FiniteDistribution, q: &FiniteDistribution) -> Self {
        let mass = p
            .probs()
            .iter()
            .flat_map(|&a| q.probs().iter().map(move |&b| a * b))
            .collect();
        Self {
            rows: p.len(),
            cols: q.len(),
            mass,
        }
    }

    /// `p(x) W(y|x)`.
    pub fn from_channel(p: &FiniteDistribution, w: &ConditionalTable) -> Result<Self> {
        if w.n_rows() != p.len() {
            return Err(Error::DimensionMismatch {
                what: "channel rows",
                expected: p.len(),
                got: w.n_rows(),
            });
        }
        let mass = (0..p.len())
            .flat_map(|x| w.row(x).iter().map(move |&v| p.get(x) * v))
            .collect();
        Ok(Self {
            rows: p.len(),
            cols: w.n_cols(),
            mass,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.mass[r * self.cols + c]
    }

    pub fn row_marginal(&self) -> Vec<f64> {
        self.mass.chunks(self.cols).map(|row| row.iter().sum()).collect()
    }

    pub fn col_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.mass.chunks(self.cols) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut mass = vec![0.0; self.mass.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                mass[c * self.rows + r] = self.get(r, c);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            mass,
        }
    }

    /// Collapses the column variable onto the blocks of `s`.
    pub fn collapse_cols(&self, s: &SynsetPartition) -> Result<Self> {
        s.check_alphabet(self.cols)?;
        let k = s.num_blocks();
        let mut mass = vec![0.0; self.rows * k];
        for r in 0..self.rows {
            for c in 0..self.cols {
                mass[r * k + s.block_of(c)] += self.get(r, c);
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: k,
            mass,
        })
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &FiniteDistribution) -> f64 {
    -p.probs().iter().map(|&v| plog2p(v)).sum::<f64>()
}

/// Entropy of the synset distribution, `H_s = -sum_b P(b) log2 P(b)`.
pub fn semantic_entropy(p: &FiniteDistribution, s: &SynsetPartition) -> Result<f64> {
    Ok(-s.block_probs(p)?.into_iter().map(plog2p).sum::<f64>())
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            what: "alphabet size",
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// `D_KL(p || q)` in bits. Fails on the first index where `p > 0 = q`.
pub fn kl_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    check_same_len(p.len(), q.len())?;
    let mut acc = 0.0;
    for (i, (&a, &b)) in p.probs().iter().zip(q.probs()).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::SupportViolation { index: i, p: a });
            }
            acc += a * (a / b).log2();
        }
    }
    Ok(acc)
}

/// Divergence between a syntactic distribution `q` and the synset-level
/// distribution of `p`: `sum_b sum_{i in b} q_i log2(q_i / P_p(b))`.
///
/// Can be negative; never exceeds `kl_divergence(q, p)`.
pub fn partial_semantic_kl(
    q: &FiniteDistribution,
    p: &FiniteDistribution,
    s: &SynsetPartition,
) -> Result<f64> {
    check_same_len(q.len(), p.len())?;
    let masses = s.block_probs(p)?;
    let mut acc = 0.0;
    for (block, &mass) in s.blocks().iter().zip(&masses) {
        for &i in block {
            let qi = q.get(i);
            if qi > 0.0 {
                if mass <= 0.0 {
                    return Err(Error::SupportViolation { index: i, p: qi });
                }
                acc += qi * (qi / mass).log2();
            }
        }
    }
    Ok(acc)
}

/// `I(X; Y)` in bits for the joint `j` over (X rows, Y columns).
pub fn mutual_information(j: &JointDistribution) -> f64 {
    let px = j.row_marginal();
    let py = j.col_marginal();
    let mut acc = 0.0;
    for (r, &pr) in px.iter().enumerate() {
        for (c, &pc) in py.iter().enumerate() {
            let m = j.get(r, c);
            if m > 0.0 {
                acc += m * (m / (pr * pc)).log2();
            }
        }
    }
    acc.max(0.0)
}

/// `I(X; Y~)` where `Y~` is the block of the column variable under `s_out`.
pub fn single_side_semantic_mi(j: &JointDistribution, s_out: &SynsetPartition) -> Result<f64> {
    Ok(mutual_information(&j.collapse_cols(s_out)?))
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}
