//! Ring configurations for both models and the structural predicates on them.
//!
//! Sites are indexed `0..M` and every pattern test wraps around the ring.
//! Exclusion configurations are bit-packed, 64 sites per word, with the bits
//! past `M` in the last word kept at zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest ring either model is defined on.
pub const MIN_RING: usize = 3;

/// Largest stack height a [`StackConfig`] accepts.
pub const MAX_HEIGHT: u32 = i32::MAX as u32;

/// Anything that can be read as a cyclic word of small letters.
pub trait RingWord {
    fn ring_len(&self) -> usize;
    fn letters(&self) -> Vec<u32>;
}

fn tail_mask(len: usize) -> u64 {
    match len % 64 {
        0 => !0,
        r => (1u64 << r) - 1,
    }
}

fn split_ring_prefix(s: &str) -> Result<(usize, &str)> {
    let rest = s
        .strip_prefix("ring:")
        .ok_or_else(|| Error::Parse(format!("missing `ring:` prefix in {s:?}")))?;
    let (len, body) = rest
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("missing length field in {s:?}")))?;
    let len = len
        .parse::<usize>()
        .map_err(|e| Error::Parse(format!("bad length {len:?}: {e}")))?;
    Ok((len, body))
}

fn parse_bits(body: &str) -> Result<Vec<bool>> {
    body.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Parse(format!("unexpected character {c:?} in bit string"))),
        })
        .collect()
}

/// F-SSEP state: one bit per site, 1 = occupied.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExclusionConfig {
    len: usize,
    words: Vec<u64>,
}

impl ExclusionConfig {
    pub fn empty(len: usize) -> Result<Self> {
        if len < MIN_RING {
            return Err(Error::RingTooShort(len));
        }
        Ok(Self {
            len,
            words: vec![0; len.div_ceil(64)],
        })
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self> {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut cfg = Self::empty(bits.len())?;
        for (i, b) in bits.into_iter().enumerate() {
            if b {
                cfg.words[i / 64] |= 1 << (i % 64);
            }
        }
        Ok(cfg)
    }

    /// Parses a bare `0`/`1` string such as `"01101"`.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        Self::from_bits(parse_bits(s)?)
    }

    /// Builds from packed words; bits past `len` are discarded.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Result<Self> {
        if len < MIN_RING {
            return Err(Error::RingTooShort(len));
        }
        let n = len.div_ceil(64);
        if words.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: words.len(),
            });
        }
        words[n - 1] &= tail_mask(len);
        Ok(Self { len, words })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        let i = i % self.len;
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        let i = i % self.len;
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn particles(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.particles() as f64 / self.len as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bit_string(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    pub(crate) fn mask_tail(&self, words: &mut [u64]) {
        let n = words.len();
        words[n - 1] &= tail_mask(self.len);
    }

    /// Words in which bit `i` holds site `i - 1`.
    pub fn prev_view(&self) -> Vec<u64> {
        shift_prev(&self.words, self.len)
    }

    /// Words in which bit `i` holds site `i + 1`.
    pub fn next_view(&self) -> Vec<u64> {
        shift_next(&self.words, self.len)
    }

    /// Translation `τ^k`: the result holds `self[i - k]` at site `i`.
    pub fn rotate(&self, k: isize) -> Self {
        let m = self.len as isize;
        let shift = k.rem_euclid(m) as usize;
        let mut out = Self {
            len: self.len,
            words: vec![0; self.words.len()],
        };
        for i in 0..self.len {
            if self.get(i) {
                out.set(i + shift, true);
            }
        }
        out
    }

    /// Bit `i` is set iff the cyclic window starting at `i` equals `pattern`.
    pub fn pattern_mask(&self, pattern: &[bool]) -> Vec<u64> {
        let mut acc = vec![!0u64; self.words.len()];
        let mut view = self.words.clone();
        for (j, &want) in pattern.iter().enumerate() {
            if j > 0 {
                view = shift_next(&view, self.len);
            }
            for (a, v) in acc.iter_mut().zip(&view) {
                *a &= if want { *v } else { !*v };
            }
        }
        self.mask_tail(&mut acc);
        acc
    }

    pub fn contains_pattern(&self, pattern: &[bool]) -> bool {
        self.pattern_mask(pattern).iter().any(|&w| w != 0)
    }

    pub fn count_pattern(&self, pattern: &[bool]) -> usize {
        self.pattern_mask(pattern)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Member of F: no two adjacent occupied sites.
    pub fn in_frozen_set(&self) -> bool {
        let next = self.next_view();
        self.words.iter().zip(&next).all(|(x, n)| x & n == 0)
    }

    /// No particle can move: no particle has exactly one occupied
    /// neighbour. This is F plus the fully occupied ring.
    pub fn is_frozen(&self) -> bool {
        let prev = self.prev_view();
        let next = self.next_view();
        self.words
            .iter()
            .zip(prev.iter().zip(&next))
            .all(|(x, (l, r))| x & (l ^ r) == 0)
    }

    /// Member of H = φ(X̂*): none of 000, 0100, 0010, 01010 occurs.
    pub fn in_h(&self) -> bool {
        H_FORBIDDEN
            .iter()
            .all(|p| !self.contains_pattern(&bits_of(p)))
    }
}

const H_FORBIDDEN: [&str; 4] = ["000", "0100", "0010", "01010"];

pub(crate) fn bits_of(p: &str) -> Vec<bool> {
    p.bytes().map(|b| b == b'1').collect()
}

pub(crate) fn shift_prev(words: &[u64], len: usize) -> Vec<u64> {
    let n = words.len();
    let last = len - 1;
    let top = (words[last / 64] >> (last % 64)) & 1;
    let mut out = Vec::with_capacity(n);
    for w in 0..n {
        let carry = if w == 0 { top } else { words[w - 1] >> 63 };
        out.push((words[w] << 1) | carry);
    }
    out[n - 1] &= tail_mask(len);
    out
}

pub(crate) fn shift_next(words: &[u64], len: usize) -> Vec<u64> {
    let n = words.len();
    let mut out = Vec::with_capacity(n);
    for w in 0..n - 1 {
        out.push((words[w] >> 1) | ((words[w + 1] & 1) << 63));
    }
    out.push((words[n - 1] >> 1) | ((words[0] & 1) << ((len - 1) % 64)));
    out[n - 1] &= tail_mask(len);
    out
}

impl RingWord for ExclusionConfig {
    fn ring_len(&self) -> usize {
        self.len
    }

    fn letters(&self) -> Vec<u32> {
        self.iter().map(u32::from).collect()
    }
}

impl fmt::Display for ExclusionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ring:{}:{}", self.len, self.to_bit_string())
    }
}

impl fmt::Debug for ExclusionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for ExclusionConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (len, body) = split_ring_prefix(s)?;
        let cfg = Self::from_bit_str(body)?;
        if cfg.len != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: cfg.len,
            });
        }
        Ok(cfg)
    }
}

/// SSM state: a nonnegative stack height per site.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct StackConfig {
    heights: Vec<u32>,
}

impl StackConfig {
    pub fn new(heights: Vec<u32>) -> Result<Self> {
        if heights.len() < MIN_RING {
            return Err(Error::RingTooShort(heights.len()));
        }
        if let Some(&h) = heights.iter().find(|&&h| h > MAX_HEIGHT) {
            return Err(Error::HeightOverflow(u64::from(h)));
        }
        Ok(Self { heights })
    }

    pub fn from_u64(heights: &[u64]) -> Result<Self> {
        let hs = heights
            .iter()
            .map(|&h| {
                u32::try_from(h)
                    .ok()
                    .filter(|&h| h <= MAX_HEIGHT)
                    .ok_or(Error::HeightOverflow(h))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(hs)
    }

    pub fn heights(&self) -> &[u32] {
        &self.heights
    }

    pub fn into_heights(self) -> Vec<u32> {
        self.heights
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> u32 {
        self.heights[i % self.heights.len()]
    }

    pub fn total(&self) -> u64 {
        self.heights.iter().map(|&h| u64::from(h)).sum()
    }

    pub fn density(&self) -> f64 {
        self.total() as f64 / self.len() as f64
    }

    /// Number of zero-height sites.
    pub fn zeros(&self) -> usize {
        self.heights.iter().filter(|&&h| h == 0).count()
    }

    /// Every stack short (height ≤ 1): no bond can carry a particle.
    pub fn is_frozen(&self) -> bool {
        self.heights.iter().all(|&h| h <= 1)
    }

    /// Member of X̂*: no two cyclically adjacent short stacks.
    pub fn in_xstar(&self) -> bool {
        let m = self.len();
        (0..m).all(|i| self.heights[i] >= 2 || self.heights[(i + 1) % m] >= 2)
    }

    pub fn parity_map(&self) -> ParitySequence {
        ParitySequence {
            bits: self.heights.iter().map(|&h| (h & 1) as u8).collect(),
        }
    }

    /// Translation `τ^k`: the result holds `self[i - k]` at site `i`.
    pub fn rotate(&self, k: isize) -> Self {
        let m = self.len() as isize;
        let heights = (0..m)
            .map(|i| self.heights[(i - k).rem_euclid(m) as usize])
            .collect();
        Self { heights }
    }

    /// Componentwise sum with a parity sequence.
    pub fn add_parity(&self, sigma: &ParitySequence) -> Result<Self> {
        if sigma.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: sigma.len(),
            });
        }
        let heights = self
            .heights
            .iter()
            .zip(sigma.bits())
            .map(|(&h, &s)| h.checked_add(u32::from(s)).ok_or(Error::HeightOverflow(u64::from(h) + 1)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(heights)
    }
}

impl RingWord for StackConfig {
    fn ring_len(&self) -> usize {
        self.len()
    }

    fn letters(&self) -> Vec<u32> {
        self.heights.clone()
    }
}

impl fmt::Display for StackConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ring:{}:", self.len())?;
        for (i, h) in self.heights.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{h}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for StackConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for StackConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (len, body) = split_ring_prefix(s)?;
        let heights = body
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Parse(format!("bad height {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if heights.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: heights.len(),
            });
        }
        Self::from_u64(&heights)
    }
}

/// Height parities of a stack ring; bit `i` is 1 iff site `i` is odd.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParitySequence {
    bits: Vec<u8>,
}

impl ParitySequence {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Parse(format!("parity entry {b} is not 0 or 1")));
        }
        Ok(Self { bits })
    }

    /// The all-even sequence `e`.
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    pub fn from_bit_str(s: &str) -> Result<Self> {
        Ok(Self {
            bits: parse_bits(s)?.into_iter().map(u8::from).collect(),
        })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn density(&self) -> f64 {
        self.bits.iter().map(|&b| f64::from(b)).sum::<f64>() / self.bits.len() as f64
    }

    pub fn rotate(&self, k: isize) -> Self {
        let m = self.len() as isize;
        let bits = (0..m)
            .map(|i| self.bits[(i - k).rem_euclid(m) as usize])
            .collect();
        Self { bits }
    }
}

impl fmt::Display for ParitySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ring:{}:", self.len())?;
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ParitySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Height profile anchored at the bond just before site `anchor`:
/// `values[0] = 0` and `values[k]` sums ±1 over the `k` sites starting at
/// `anchor`, rising across empty sites and falling across occupied ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightProfile {
    pub anchor: usize,
    pub values: Vec<i64>,
}

impl HeightProfile {
    pub fn max(&self) -> i64 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    pub fn min(&self) -> i64 {
        self.values.iter().copied().min().unwrap_or(0)
    }

    /// Recovers the configuration the profile was computed from.
    pub fn to_config(&self) -> Result<ExclusionConfig> {
        let m = self.values.len() - 1;
        let mut cfg = ExclusionConfig::empty(m)?;
        for k in 1..=m {
            match self.values[k] - self.values[k - 1] {
                -1 => cfg.set(self.anchor + k - 1, true),
                1 => {}
                d => return Err(Error::Parse(format!("profile increment {d} at step {k}"))),
            }
        }
        Ok(cfg)
    }
}

pub fn height_profile(cfg: &ExclusionConfig, anchor: usize) -> HeightProfile {
    let mut values = Vec::with_capacity(cfg.len() + 1);
    let mut h = 0i64;
    values.push(h);
    for k in 0..cfg.len() {
        h += if cfg.get(anchor + k) { -1 } else { 1 };
        values.push(h);
    }
    HeightProfile { anchor, values }
}

/// Spread `max h - min h` of the height profile over one traversal.
/// Only defined on balanced rings, where the profile is periodic.
pub fn delta(cfg: &ExclusionConfig) -> Result<i64> {
    let m = cfg.len();
    let n = cfg.particles();
    if !m.is_multiple_of(2) || 2 * n != m {
        return Err(Error::Unbalanced {
            sites: m,
            particles: n,
        });
    }
    let p = height_profile(cfg, 0);
    Ok(p.max() - p.min())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    /// `(10)^k`, moves left.
    L,
    /// `(01)^k`, moves right.
    R,
    /// Pairs of 0s alternating with pairs of 1s.
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionDecomposition {
    pub regions: Vec<Region>,
    /// The fully alternating ring, reported as one L region.
    pub degenerate: bool,
}

impl RegionDecomposition {
    pub fn count(&self, kind: RegionKind) -> usize {
        self.regions.iter().filter(|r| r.kind == kind).count()
    }

    pub fn total_len(&self) -> usize {
        self.regions.iter().map(|r| r.len).sum()
    }
}

/// Splits a balanced ring with spread ≤ 2 into L, R and T regions.
///
/// T regions are the maximal cyclic stretches made of length-2 runs; what is
/// left between them consists of length-1 runs and is labelled by its first
/// two sites.
pub fn decompose_regions(cfg: &ExclusionConfig) -> Result<RegionDecomposition> {
    let spread = delta(cfg)?;
    if spread > 2 {
        return Err(Error::SpreadTooLarge(spread));
    }
    let m = cfg.len();
    // Start at a run boundary; a balanced ring is never constant.
    let origin = (0..m)
        .find(|&i| cfg.get(i) != cfg.get(i + m - 1))
        .expect("balanced ring has a run boundary");
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut pos = 0;
    while pos < m {
        let start = origin + pos;
        let sym = cfg.get(start);
        let mut len = 1;
        while pos + len < m && cfg.get(start + len) == sym {
            len += 1;
        }
        runs.push((start % m, len));
        pos += len;
    }
    if runs.iter().all(|&(_, len)| len == 1) {
        let start = (0..m).find(|&i| cfg.get(i)).unwrap_or(0);
        return Ok(RegionDecomposition {
            regions: vec![Region {
                kind: RegionKind::L,
                start,
                len: m,
            }],
            degenerate: true,
        });
    }
    if runs.iter().all(|&(_, len)| len == 2) {
        return Ok(RegionDecomposition {
            regions: vec![Region {
                kind: RegionKind::T,
                start: runs[0].0,
                len: m,
            }],
            degenerate: false,
        });
    }
    // Rotate the run list so it begins at the first run of a T stretch.
    let nr = runs.len();
    let first = (0..nr)
        .find(|&j| runs[j].1 == 2 && runs[(j + nr - 1) % nr].1 != 2)
        .expect("mixed run lengths have a T entry point");
    runs.rotate_left(first);

    let mut regions = Vec::new();
    let mut j = 0;
    while j < nr {
        let is_pair = runs[j].1 == 2;
        let start = runs[j].0;
        let mut len = 0;
        while j < nr && (runs[j].1 == 2) == is_pair {
            len += runs[j].1;
            j += 1;
        }
        let kind = if is_pair {
            RegionKind::T
        } else if len % 2 != 0 {
            return Err(Error::UnclassifiedBlock { start, len });
        } else if cfg.get(start) {
            RegionKind::L
        } else {
            RegionKind::R
        };
        regions.push(Region { kind, start, len });
    }
    Ok(RegionDecomposition {
        regions,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeftRight {
    Left,
    Right,
    Both,
    Neither,
}

impl LeftRight {
    pub fn is_left(self) -> bool {
        matches!(self, LeftRight::Left | LeftRight::Both)
    }

    pub fn is_right(self) -> bool {
        matches!(self, LeftRight::Right | LeftRight::Both)
    }
}

const LEFT_FORBIDDEN: [&str; 4] = ["111", "000", "1101", "0100"];
const RIGHT_FORBIDDEN: [&str; 4] = ["111", "000", "0010", "1011"];

/// Whether some rotation of `cfg` is a concatenation of `{1100, 10}`
/// (left-moving) and/or of `{0011, 01}` (right-moving).
///
/// Every word of `{1100, 10}` has the shape `1^a 0^a`, so word boundaries are
/// exactly the `0→1` transitions and parseability reduces to forbidding a
/// handful of cyclic windows; likewise for the mirror set.
pub fn member_left_right(cfg: &ExclusionConfig) -> LeftRight {
    let clean = |forbidden: &[&str]| forbidden.iter().all(|p| !cfg.contains_pattern(&bits_of(p)));
    match (clean(&LEFT_FORBIDDEN), clean(&RIGHT_FORBIDDEN)) {
        (true, true) => LeftRight::Both,
        (true, false) => LeftRight::Left,
        (false, true) => LeftRight::Right,
        (false, false) => LeftRight::Neither,
    }
}

/// Borrowed configuration of either model.
#[derive(Clone, Copy, Debug)]
pub enum ConfigRef<'a> {
    Exclusion(&'a ExclusionConfig),
    Stack(&'a StackConfig),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MembershipClass {
    /// Frozen set: F for exclusion rings, F̂ for stacks.
    Frozen,
    /// X̂*: no adjacent short stacks.
    Xstar,
    /// X̂*_σ: X̂* with prescribed height parities.
    XstarSigma(ParitySequence),
    /// H: exclusion rings free of 000, 0100, 0010, 01010.
    H,
}

impl MembershipClass {
    fn name(&self) -> &'static str {
        match self {
            MembershipClass::Frozen => "F",
            MembershipClass::Xstar => "Xstar",
            MembershipClass::XstarSigma(_) => "Xstar_sigma",
            MembershipClass::H => "H",
        }
    }
}

pub fn membership(cfg: ConfigRef<'_>, class: &MembershipClass) -> Result<bool> {
    let mismatch = |config| Error::ClassMismatch {
        class: class.name(),
        config,
    };
    match (cfg, class) {
        (ConfigRef::Exclusion(x), MembershipClass::Frozen) => Ok(x.in_frozen_set()),
        (ConfigRef::Stack(n), MembershipClass::Frozen) => Ok(n.is_frozen()),
        (ConfigRef::Stack(n), MembershipClass::Xstar) => Ok(n.in_xstar()),
        (ConfigRef::Stack(n), MembershipClass::XstarSigma(sigma)) => {
            if sigma.len() != n.len() {
                return Err(Error::LengthMismatch {
                    expected: n.len(),
                    found: sigma.len(),
                });
            }
            Ok(n.in_xstar() && n.parity_map() == *sigma)
        }
        (ConfigRef::Exclusion(x), MembershipClass::H) => Ok(x.in_h()),
        (ConfigRef::Exclusion(_), _) => Err(mismatch("exclusion")),
        (ConfigRef::Stack(_), MembershipClass::H) => Err(mismatch("stack")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(s: &str) -> ExclusionConfig {
        ExclusionConfig::from_bit_str(s).unwrap()
    }

    fn st(h: &[u32]) -> StackConfig {
        StackConfig::new(h.to_vec()).unwrap()
    }

    #[test]
    fn profile_examples() {
        assert_eq!(height_profile(&ex("01101"), 0).values, vec![0, 1, 0, -1, 0, -1]);
        let zeros = height_profile(&ex("0000000"), 3);
        assert_eq!(zeros.values, (0..=7).collect::<Vec<i64>>());
        let alt = height_profile(&ex("1010101010"), 0);
        assert!(alt.values.iter().all(|&h| h == 0 || h == -1));
    }

    #[test]
    fn profile_roundtrip_with_anchor() {
        let cfg = ex("0110100111010");
        for a in 0..cfg.len() {
            assert_eq!(height_profile(&cfg, a).to_config().unwrap(), cfg);
        }
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(&ex("11001100")).unwrap(), 2);
        assert_eq!(delta(&ex("10101010")).unwrap(), 1);
        assert_eq!(delta(&ex("11110000")).unwrap(), 4);
        assert!(matches!(delta(&ex("1101")), Err(Error::Unbalanced { .. })));
        assert!(matches!(delta(&ex("110")), Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn frozen_examples() {
        assert!(ex("10100100").is_frozen());
        // The wrap-around pair makes this ring mobile.
        assert!(!ex("10100101").is_frozen());
        assert!(!ex("11001100").is_frozen());
        assert!(st(&[1, 1, 1, 1]).is_frozen());
        assert!(!st(&[1, 2, 1, 0]).is_frozen());
        // Fully occupied ring has no movers but lies outside F.
        assert!(ex("1111").is_frozen());
        assert!(!ex("1111").in_frozen_set());
    }

    #[test]
    fn parity_examples() {
        assert_eq!(st(&[2, 3, 0, 1]).parity_map().bits(), &[0, 1, 0, 1]);
        assert_eq!(st(&[2, 4, 0, 6]).parity_map(), ParitySequence::zeros(4));
    }

    #[test]
    fn membership_examples() {
        let xstar = |h: &[u32], class: &MembershipClass| membership(ConfigRef::Stack(&st(h)), class).unwrap();
        assert!(xstar(&[2, 1, 2, 0], &MembershipClass::Xstar));
        assert!(!xstar(&[1, 1, 2, 0], &MembershipClass::Xstar));
        let sigma = ParitySequence::new(vec![0, 1, 0, 1]).unwrap();
        assert!(xstar(&[2, 3, 0, 3], &MembershipClass::XstarSigma(sigma.clone())));
        // Sites 2 and 3 are both short.
        assert!(!xstar(&[2, 3, 0, 1], &MembershipClass::XstarSigma(sigma.clone())));
        assert!(!xstar(&[2, 2, 0, 1], &MembershipClass::XstarSigma(sigma)));
        assert!(membership(ConfigRef::Exclusion(&ex("011011011011")), &MembershipClass::H).unwrap());
        for bad in ["0110001101", "0110100110", "0110010110", "0110101011"] {
            assert!(!ex(bad).in_h(), "{bad}");
        }
        assert!(matches!(
            membership(ConfigRef::Exclusion(&ex("0110")), &MembershipClass::Xstar),
            Err(Error::ClassMismatch { .. })
        ));
        assert!(matches!(
            membership(ConfigRef::Stack(&st(&[2, 2, 2])), &MembershipClass::H),
            Err(Error::ClassMismatch { .. })
        ));
        let short = ParitySequence::zeros(3);
        assert!(matches!(
            membership(ConfigRef::Stack(&st(&[2, 2, 2, 2])), &MembershipClass::XstarSigma(short)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn regions_examples() {
        let d = decompose_regions(&ex("110010110010")).unwrap();
        assert_eq!(d.count(RegionKind::T), 2);
        assert_eq!(d.count(RegionKind::L), 2);
        assert!(d.regions.iter().filter(|r| r.kind == RegionKind::T).all(|r| r.len == 4));
        assert!(d.regions.iter().filter(|r| r.kind == RegionKind::L).all(|r| r.len == 2));
        assert_eq!(d.total_len(), 12);

        let t = decompose_regions(&ex("11001100")).unwrap();
        assert_eq!(t.regions, vec![Region { kind: RegionKind::T, start: 0, len: 8 }]);

        let alt = decompose_regions(&ex("10101010")).unwrap();
        assert!(alt.degenerate);
        assert_eq!(alt.regions.len(), 1);
        assert_eq!(alt.regions[0].kind, RegionKind::L);

        let r = decompose_regions(&ex("001101001101")).unwrap();
        assert_eq!(r.count(RegionKind::R), 2);

        assert!(matches!(decompose_regions(&ex("11110000")), Err(Error::SpreadTooLarge(4))));
    }

    #[test]
    fn left_right_examples() {
        assert_eq!(member_left_right(&ex("11001100")), LeftRight::Both);
        assert_eq!(member_left_right(&ex("10101010")), LeftRight::Both);
        assert_eq!(member_left_right(&ex("110010")), LeftRight::Left);
        assert_eq!(member_left_right(&ex("001101")), LeftRight::Right);
        assert_eq!(member_left_right(&ex("11110000")), LeftRight::Neither);
    }

    #[test]
    fn string_format() {
        let x: ExclusionConfig = "ring:5:01101".parse().unwrap();
        assert_eq!(x, ex("01101"));
        assert_eq!(x.to_string(), "ring:5:01101");
        let n: StackConfig = "ring:4:2,3,0,1".parse().unwrap();
        assert_eq!(n, st(&[2, 3, 0, 1]));
        assert_eq!(n.to_string(), "ring:4:2,3,0,1");
        assert!("ring:4:01101".parse::<ExclusionConfig>().is_err());
        assert!("01101".parse::<ExclusionConfig>().is_err());
        assert!("ring:3:1,2".parse::<StackConfig>().is_err());
        assert!(matches!(
            "ring:3:1,2,4294967295".parse::<StackConfig>(),
            Err(Error::HeightOverflow(_))
        ));
    }

    #[test]
    fn short_rings_rejected() {
        assert_eq!(ExclusionConfig::from_bit_str("01"), Err(Error::RingTooShort(2)));
        assert_eq!(StackConfig::new(vec![1, 1]), Err(Error::RingTooShort(2)));
    }

    #[test]
    fn views_wrap_across_word_boundaries() {
        for m in [3usize, 63, 64, 65, 127, 128, 130] {
            let cfg = ExclusionConfig::from_bits((0..m).map(|i| (i * 7 + i / 3) % 5 < 2)).unwrap();
            let prev = ExclusionConfig::from_words(m, cfg.prev_view()).unwrap();
            let next = ExclusionConfig::from_words(m, cfg.next_view()).unwrap();
            for i in 0..m {
                assert_eq!(prev.get(i), cfg.get(i + m - 1), "m={m} i={i}");
                assert_eq!(next.get(i), cfg.get(i + 1), "m={m} i={i}");
            }
            assert_eq!(cfg.rotate(1), prev);
            assert_eq!(cfg.rotate(-1), next);
        }
    }
}
