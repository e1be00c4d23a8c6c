//! Substitution maps between ring words: each source letter is replaced by a
//! fixed word, and images are parsed back by searching for a word boundary.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ExclusionConfig, StackConfig};

#[derive(Clone, PartialEq, Eq)]
pub struct SubstitutionRule {
    words: BTreeMap<u32, Vec<u32>>,
}

impl SubstitutionRule {
    pub fn new(words: BTreeMap<u32, Vec<u32>>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidParameter("substitution rule has no letters".into()));
        }
        if let Some((s, _)) = words.iter().find(|(_, w)| w.is_empty()) {
            return Err(Error::InvalidParameter(format!("letter {s} maps to the empty word")));
        }
        Ok(Self { words })
    }

    /// `n → 0 1^n` for heights `0..=hmax`.
    pub fn phi(hmax: u32) -> Self {
        let words = (0..=hmax)
            .map(|n| {
                let mut w = vec![0];
                w.extend(std::iter::repeat_n(1, n as usize));
                (n, w)
            })
            .collect();
        Self { words }
    }

    /// `1 → 20`, `0 → 1`.
    pub fn phi_left() -> Self {
        Self {
            words: BTreeMap::from([(0, vec![1]), (1, vec![2, 0])]),
        }
    }

    /// `1 → 02`, `0 → 1`.
    pub fn phi_right() -> Self {
        Self {
            words: BTreeMap::from([(0, vec![1]), (1, vec![0, 2])]),
        }
    }

    pub fn word(&self, letter: u32) -> Result<&[u32]> {
        self.words
            .get(&letter)
            .map(Vec::as_slice)
            .ok_or(Error::MissingLetter(letter))
    }

    pub fn letters(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.keys().copied()
    }

    /// Concatenates the words of `src`, the first word starting at index 0.
    pub fn apply(&self, src: &[u32]) -> Result<Vec<u32>> {
        let mut out = Vec::new();
        for &s in src {
            out.extend_from_slice(self.word(s)?);
        }
        Ok(out)
    }

    /// Finds `(src, offset)` with `rotate(apply(src), offset) = tgt` and the
    /// smallest such offset, i.e. a parse of `tgt` starting at `offset`.
    pub fn parse_image(&self, tgt: &[u32]) -> Result<(Vec<u32>, usize)> {
        let l = tgt.len();
        for j in 0..l {
            let rotated: Vec<u32> = tgt[j..].iter().chain(&tgt[..j]).copied().collect();
            if !self.words.values().any(|w| rotated.starts_with(w)) {
                continue;
            }
            if let Some(src) = self.parse_linear(&rotated) {
                return Ok((src, j));
            }
        }
        Err(Error::NotInImage)
    }

    /// Word-break parse of a linear word; `None` if no parse exists.
    fn parse_linear(&self, w: &[u32]) -> Option<Vec<u32>> {
        let l = w.len();
        // ok[p]: the suffix starting at p splits into words.
        let mut ok = vec![false; l + 1];
        ok[l] = true;
        for p in (0..l).rev() {
            ok[p] = self
                .words
                .values()
                .any(|word| ok.get(p + word.len()) == Some(&true) && w[p..].starts_with(word));
        }
        if !ok[0] {
            return None;
        }
        let mut out = Vec::new();
        let mut p = 0;
        while p < l {
            let (&s, word) = self
                .words
                .iter()
                .find(|(_, word)| ok.get(p + word.len()) == Some(&true) && w[p..].starts_with(word))?;
            out.push(s);
            p += word.len();
        }
        Some(out)
    }
}

/// φ applied to a stack ring, producing the exclusion ring of length
/// `M + Σ heights`.
pub fn phi_stack(n: &StackConfig) -> Result<ExclusionConfig> {
    let bits = n
        .heights()
        .iter()
        .flat_map(|&h| std::iter::once(false).chain(std::iter::repeat_n(true, h as usize)));
    ExclusionConfig::from_bits(bits)
}

/// Inverse of [`phi_stack`] with the minimal offset.
pub fn parse_phi(x: &ExclusionConfig) -> Result<(StackConfig, usize)> {
    let m = x.len();
    let first = (0..m).find(|&i| !x.get(i)).ok_or(Error::NotInImage)?;
    let mut heights = Vec::new();
    let mut h = 0u32;
    for k in 1..=m {
        if k < m && x.get(first + k) {
            h += 1;
        } else {
            heights.push(h);
            h = 0;
        }
    }
    Ok((StackConfig::new(heights)?, first))
}

fn rotate_vec(v: &[u32], k: usize) -> Vec<u32> {
    let l = v.len();
    (0..l).map(|i| v[(i + l - k % l) % l]).collect()
}

/// Draws a source ring, applies the rule and rotates the image uniformly.
pub fn push_forward_sample<R, F>(rule: &SubstitutionRule, mut src_sampler: F, rng: &mut R) -> Result<Vec<u32>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<Vec<u32>>,
{
    let src = src_sampler(rng)?;
    let image = rule.apply(&src)?;
    let k = rng.random_range(0..image.len());
    Ok(rotate_vec(&image, k))
}

/// Draws target rings until a uniformly chosen site is a word start, then
/// returns the source ring read from that word on.
///
/// `max_tries` bounds the number of target draws.
pub fn pull_back_sample<R, F>(
    rule: &SubstitutionRule,
    mut tgt_sampler: F,
    rng: &mut R,
    max_tries: usize,
) -> Result<Vec<u32>>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Result<Vec<u32>>,
{
    for _ in 0..max_tries {
        let tgt = tgt_sampler(rng)?;
        let (src, offset) = rule.parse_image(&tgt)?;
        let site = rng.random_range(0..tgt.len());
        let mut start = offset;
        for (idx, &s) in src.iter().enumerate() {
            if start % tgt.len() == site {
                let mut out = src[idx..].to_vec();
                out.extend_from_slice(&src[..idx]);
                return Ok(out);
            }
            start += rule.word(s)?.len();
        }
    }
    Err(Error::NoConvergence(max_tries))
}

fn word_to_string(w: &[u32]) -> String {
    if w.iter().all(|&c| c < 10) {
        w.iter().map(|c| char::from(b'0' + *c as u8)).collect()
    } else {
        w.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
    }
}

fn word_from_string(s: &str) -> Result<Vec<u32>> {
    let bad = |t: &str| Error::Parse(format!("bad letter {t:?} in word {s:?}"));
    if s.contains(',') {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad(t))).collect()
    } else {
        s.chars()
            .map(|c| c.to_digit(10).ok_or_else(|| bad(&c.to_string())))
            .collect()
    }
}

impl Serialize for SubstitutionRule {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let map: BTreeMap<String, String> = self
            .words
            .iter()
            .map(|(s, w)| (s.to_string(), word_to_string(w)))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SubstitutionRule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, String>::deserialize(deserializer)?;
        let words = map
            .into_iter()
            .map(|(k, v)| {
                let s = k.parse::<u32>().map_err(|e| de::Error::custom(format!("letter {k:?}: {e}")))?;
                let w = word_from_string(&v).map_err(de::Error::custom)?;
                Ok((s, w))
            })
            .collect::<std::result::Result<BTreeMap<_, _>, D::Error>>()?;
        SubstitutionRule::new(words).map_err(de::Error::custom)
    }
}

impl fmt::Debug for SubstitutionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (s, w) in &self.words {
            m.entry(s, &word_to_string(w));
        }
        m.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_examples() {
        let phi = SubstitutionRule::phi(8);
        assert_eq!(phi.apply(&[2, 0, 1]).unwrap(), vec![0, 1, 1, 0, 0, 1]);
        assert_eq!(phi.apply(&[1, 1, 1]).unwrap(), vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(SubstitutionRule::phi_left().apply(&[0, 1, 0]).unwrap(), vec![1, 2, 0, 1]);
        assert_eq!(SubstitutionRule::phi_right().apply(&[0, 1, 0]).unwrap(), vec![1, 0, 2, 1]);
        assert_eq!(phi.apply(&[9]), Err(Error::MissingLetter(9)));
    }

    #[test]
    fn parse_examples() {
        let phi = SubstitutionRule::phi(8);
        assert_eq!(phi.parse_image(&[0, 1, 1, 0, 0, 1]).unwrap(), (vec![2, 0, 1], 0));
        assert_eq!(phi.parse_image(&[1, 1, 1, 1]), Err(Error::NotInImage));
        assert_eq!(phi.parse_image(&[0, 1, 0, 1, 1, 0]).unwrap(), (vec![1, 2, 0], 0));
        assert_eq!(phi.parse_image(&[1, 0, 0, 1, 0, 1]).unwrap(), (vec![0, 1, 2], 1));
        assert_eq!(
            SubstitutionRule::phi_left().parse_image(&[0, 1, 1, 2]).unwrap(),
            (vec![0, 0, 1], 1)
        );
    }

    #[test]
    fn phi_stack_matches_rule() {
        let n = StackConfig::new(vec![2, 0, 1, 3, 0]).unwrap();
        let x = phi_stack(&n).unwrap();
        let bits: Vec<u32> = x.iter().map(u32::from).collect();
        assert_eq!(bits, SubstitutionRule::phi(3).apply(n.heights()).unwrap());
        assert_eq!(parse_phi(&x).unwrap(), (n.clone(), 0));
        assert_eq!(parse_phi(&x.rotate(3)).unwrap().1, 2);
        assert_eq!(parse_phi(&"ring:4:1111".parse().unwrap()), Err(Error::NotInImage));
    }

    #[test]
    fn json_roundtrip() {
        let rule = SubstitutionRule::phi_left();
        let s = serde_json::to_string(&rule).unwrap();
        assert_eq!(s, r#"{"0":"1","1":"20"}"#);
        let back: SubstitutionRule = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rule);
        let wide = SubstitutionRule::new(BTreeMap::from([(0, vec![12, 3])])).unwrap();
        let s = serde_json::to_string(&wide).unwrap();
        assert_eq!(s, r#"{"0":"12,3"}"#);
        assert_eq!(serde_json::from_str::<SubstitutionRule>(&s).unwrap(), wide);
        assert!(serde_json::from_str::<SubstitutionRule>(r#"{"0":""}"#).is_err());
    }
}
