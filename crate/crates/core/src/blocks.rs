//! Blocks of visible units and the families they are drawn from.
//!
//! Indices are 0-based everywhere in the API. The textual dump prints them
//! 1-based, one block per line.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A nonempty, strictly increasing set of visible indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Block(Vec<usize>);

impl Block {
    pub fn new(members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidBlock("block is empty".into()));
        }
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidBlock(format!(
                "members {members:?} are not strictly increasing"
            )));
        }
        Ok(Block(members))
    }

    /// The block of every index in `0..n`.
    pub fn full(n: usize) -> Result<Self> {
        Block::new((0..n).collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Indices of `0..n` not in the block.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| !self.contains(i)).collect()
    }

    pub(crate) fn check_within(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last < n => Ok(()),
            _ => Err(Error::InvalidBlock(format!(
                "{:?} has an index outside 0..{n}",
                self.0
            ))),
        }
    }
}

/// A family of blocks covering all `n` visible units, with uniform weight `1 / |family|`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFamily {
    n: usize,
    blocks: Vec<Block>,
    lambda: f64,
}

impl BlockFamily {
    /// All `C(n, k)` blocks of size `k`, in lexicographic order.
    pub fn order(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::BlockOrder { k, n });
        }
        let blocks: Vec<Block> = KSubsets::new(n, k).map(Block).collect();
        let lambda = 1.0 / blocks.len() as f64;
        Ok(BlockFamily { n, blocks, lambda })
    }

    /// Arbitrary family; blocks must be distinct, in range, and cover `0..n`.
    pub fn from_blocks(n: usize, blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidFamily("no blocks".into()));
        }
        let mut covered = vec![false; n];
        for b in &blocks {
            b.check_within(n)?;
            for i in b.iter() {
                covered[i] = true;
            }
        }
        if let Some(missing) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidFamily(format!(
                "index {missing} is not covered by any block"
            )));
        }
        let mut sorted: Vec<&Block> = blocks.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidFamily("duplicate block".into()));
        }
        let lambda = 1.0 / blocks.len() as f64;
        Ok(BlockFamily { n, blocks, lambda })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn max_block_len(&self) -> usize {
        self.blocks.iter().map(Block::len).max().unwrap_or(0)
    }

    /// Positions of the blocks that contain visible index `i`.
    pub fn blocks_containing(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "visible",
                index: i,
                len: self.n,
            });
        }
        Ok(self
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.contains(i))
            .map(|(pos, _)| pos)
            .collect())
    }

    /// One block per line, 1-based, comma-separated.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            let line: Vec<String> = b.iter().map(|i| (i + 1).to_string()).collect();
            writeln!(out, "{}", line.join(",")).unwrap();
        }
        out
    }

    /// Parses the format written by [`BlockFamily::dump`].
    pub fn parse_dump(n: usize, text: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut members = Vec::new();
            for tok in line.split(',') {
                let one_based: usize = tok.trim().parse().map_err(|_| {
                    Error::Parse(format!("line {}: bad index {tok:?}", lineno + 1))
                })?;
                if one_based == 0 {
                    return Err(Error::Parse(format!(
                        "line {}: indices are 1-based",
                        lineno + 1
                    )));
                }
                members.push(one_based - 1);
            }
            blocks.push(Block::new(members)?);
        }
        BlockFamily::from_blocks(n, blocks)
    }
}

/// `1 / C(n, k) = k! (n - k)! / n!`, evaluated multiplicatively.
pub fn family_weight(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::BlockOrder { k, n });
    }
    Ok(1.0 / binomial(n, k))
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

/// Lexicographic iterator over the `k`-subsets of `0..n`.
struct KSubsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl KSubsets {
    fn new(n: usize, k: usize) -> Self {
        let current = (k <= n).then(|| (0..k).collect());
        KSubsets { n, current }
    }
}

impl Iterator for KSubsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        // Rightmost position that can still advance.
        if let Some(pos) = (0..k).rev().find(|&p| next[p] < self.n - k + p) {
            next[pos] += 1;
            for q in pos + 1..k {
                next[q] = next[q - 1] + 1;
            }
            self.current = Some(next);
        }
        Some(out)
    }
}
