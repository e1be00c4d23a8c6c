//! Samplers for the even-sector Gibbs rings and the high-density
//! stationary family built on them.
//!
//! On a ring of `M` sites the target weight of an even-sector configuration
//! is `4^{-zeros} ζ^{Σ heights}` with no two adjacent zeros. Summing out the
//! heights, the zero pattern has weight `x^z` with hole activity
//! `x = (1 - ζ²)/(4ζ²)`, and given the pattern each occupied site carries
//! height `2j` with probability `(1 - ζ²) ζ^{2j-2}`, independently. Both
//! stages are sampled exactly.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::lattice::{ExclusionConfig, ParitySequence, StackConfig, MIN_RING};
use crate::transfer::fugacity_of_density;

/// Precomputed sampler for one `(ζ, M)`.
#[derive(Clone, Debug)]
pub struct EvenGibbsSampler {
    zeta: f64,
    m: usize,
    /// Cumulative law of the number of zeros.
    zero_cdf: Vec<f64>,
    /// `j - 1` for an occupied site of height `2j`.
    excess: Option<Geometric>,
}

impl EvenGibbsSampler {
    pub fn new(zeta: f64, m: usize) -> Result<Self> {
        if m < MIN_RING {
            return Err(Error::RingTooShort(m));
        }
        if !(0.0..1.0).contains(&zeta) {
            return Err(Error::InvalidParameter(format!(
                "fugacity must lie in [0, 1), got {zeta}"
            )));
        }
        if zeta == 0.0 {
            if !m.is_multiple_of(2) {
                return Err(Error::InvalidParameter(format!(
                    "the alternating ring needs an even number of sites, got {m}"
                )));
            }
            return Ok(Self {
                zeta,
                m,
                zero_cdf: Vec::new(),
                excess: None,
            });
        }
        let log_x = (1.0 - zeta * zeta).ln() - (4.0 * zeta * zeta).ln();
        let logw: Vec<f64> = (0..=m / 2)
            .map(|z| {
                let (mm, zz) = (m as u64, z as u64);
                (mm as f64 / (mm - zz) as f64).ln() + ln_binomial(mm - zz, zz) + z as f64 * log_x
            })
            .collect();
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = 0.0;
        let mut zero_cdf: Vec<f64> = logw
            .iter()
            .map(|lw| {
                acc += (lw - top).exp();
                acc
            })
            .collect();
        for c in &mut zero_cdf {
            *c /= acc;
        }
        let excess = Geometric::new(1.0 - zeta * zeta)
            .map_err(|e| Error::InvalidParameter(format!("height law: {e}")))?;
        Ok(Self {
            zeta,
            m,
            zero_cdf,
            excess: Some(excess),
        })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn sites(&self) -> usize {
        self.m
    }

    /// Positions of `z` pairwise non-adjacent zeros, uniform on the cycle.
    fn place_zeros<R: Rng + ?Sized>(&self, z: usize, rng: &mut R) -> Vec<usize> {
        let m = self.m;
        if z == 0 {
            return Vec::new();
        }
        // Site 0 is a zero with probability z/M; the rest lie on a path.
        let (first, base, slots, count) = if rng.random_range(0..m) < z {
            (Some(0), 2, m - 1 - z, z - 1)
        } else {
            (None, 1, m - z, z)
        };
        let mut picks = index::sample(rng, slots, count).into_vec();
        picks.sort_unstable();
        first
            .into_iter()
            .chain(picks.into_iter().enumerate().map(|(i, c)| base + c + i))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StackConfig {
        let m = self.m;
        let Some(excess) = &self.excess else {
            let phase = rng.random_range(0..2);
            let heights = (0..m).map(|i| if (i + phase) % 2 == 0 { 2 } else { 0 }).collect();
            return StackConfig::new(heights).expect("valid ring");
        };
        let u: f64 = rng.random();
        let z = self.zero_cdf.partition_point(|&c| c < u).min(self.zero_cdf.len() - 1);
        let mut heights = vec![u32::MAX; m];
        for p in self.place_zeros(z, rng) {
            heights[p] = 0;
        }
        for h in &mut heights {
            if *h != 0 {
                let j = excess.sample(rng).min(u64::from(u32::MAX / 4));
                *h = 2 * (1 + j as u32);
            }
        }
        StackConfig::new(heights).expect("valid ring")
    }
}

/// One even-sector Gibbs ring at fugacity `zeta` (`zeta = 0` gives a random
/// phase of the alternating `(2, 0)` ring).
pub fn sample_even_gibbs<R: Rng + ?Sized>(zeta: f64, m: usize, rng: &mut R) -> Result<StackConfig> {
    Ok(EvenGibbsSampler::new(zeta, m)?.sample(rng))
}

/// Law of the parity sequence added on top of an even-sector ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParitySource {
    /// The all-even sequence.
    Even,
    /// Independent bits with `P(1) = kappa`.
    Bernoulli { kappa: f64 },
    /// A repeated bit pattern with a uniformly random phase; the ring length
    /// must be a multiple of the pattern length.
    Periodic { pattern: String },
    /// Uniform choice among explicit rings (`"ring:M:bits"` or bare bits).
    Samples { rings: Vec<String> },
}

impl ParitySource {
    pub fn validate(&self) -> Result<()> {
        match self {
            ParitySource::Even => Ok(()),
            ParitySource::Bernoulli { kappa } if (0.0..=1.0).contains(kappa) => Ok(()),
            ParitySource::Bernoulli { kappa } => Err(Error::InvalidParameter(format!(
                "parity density must lie in [0, 1], got {kappa}"
            ))),
            ParitySource::Periodic { pattern } => {
                let p = ParitySequence::from_bit_str(pattern)?;
                if p.is_empty() {
                    return Err(Error::InvalidParameter("empty parity pattern".into()));
                }
                Ok(())
            }
            ParitySource::Samples { rings } => {
                if rings.is_empty() {
                    return Err(Error::InvalidParameter("no parity rings given".into()));
                }
                rings.iter().try_for_each(|r| parse_parity_ring(r).map(|_| ()))
            }
        }
    }

    /// Expected density of odd sites, when known in closed form.
    pub fn density(&self) -> Option<f64> {
        match self {
            ParitySource::Even => Some(0.0),
            ParitySource::Bernoulli { kappa } => Some(*kappa),
            ParitySource::Periodic { pattern } => ParitySequence::from_bit_str(pattern).ok().map(|p| p.density()),
            ParitySource::Samples { .. } => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<ParitySequence> {
        self.validate()?;
        match self {
            ParitySource::Even => Ok(ParitySequence::zeros(m)),
            ParitySource::Bernoulli { kappa } => {
                ParitySequence::new((0..m).map(|_| u8::from(rng.random_bool(*kappa))).collect())
            }
            ParitySource::Periodic { pattern } => {
                let p = periodic(pattern, m)?;
                let phase = rng.random_range(0..pattern.len());
                Ok(p.rotate(phase as isize))
            }
            ParitySource::Samples { rings } => {
                let r = parse_parity_ring(&rings[rng.random_range(0..rings.len())])?;
                if r.len() != m {
                    return Err(Error::LengthMismatch {
                        expected: m,
                        found: r.len(),
                    });
                }
                Ok(r)
            }
        }
    }
}

fn parse_parity_ring(s: &str) -> Result<ParitySequence> {
    if s.starts_with("ring:") {
        let x: ExclusionConfig = s.parse()?;
        ParitySequence::new(x.iter().map(u8::from).collect())
    } else {
        ParitySequence::from_bit_str(s)
    }
}

fn periodic(pattern: &str, m: usize) -> Result<ParitySequence> {
    let p = ParitySequence::from_bit_str(pattern)?;
    if p.is_empty() || !m.is_multiple_of(p.len()) {
        return Err(Error::InvalidParameter(format!(
            "parity pattern of length {} does not tile a ring of {m} sites",
            p.len()
        )));
    }
    ParitySequence::new((0..m).map(|i| p.bits()[i % p.len()]).collect())
}

/// `m + σ` with `m` an even-sector Gibbs ring of density `rho_e` and `σ`
/// drawn independently from `parity`. Returns the ring and `σ`.
pub fn sample_etis<R: Rng + ?Sized>(
    rho_e: f64,
    parity: &ParitySource,
    m: usize,
    rng: &mut R,
) -> Result<(StackConfig, ParitySequence)> {
    let zeta = fugacity_of_density(rho_e)?;
    let even = sample_even_gibbs(zeta, m, rng)?;
    let sigma = parity.sample(m, rng)?;
    Ok((even.add_parity(&sigma)?, sigma))
}

/// Relative alignment of the alternating background and a periodic parity
/// sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseClass {
    /// Background height 2 on the sites where the pattern has even index.
    Even,
    /// Background shifted by one site.
    Odd,
}

/// A uniformly translated `n* + σ` (or `τ n* + σ` for the odd class), with
/// `n*` the alternating `(2, 0)` ring and `σ` the periodic parity pattern
/// laid from site 0.
pub fn basic_state_sample<R: Rng + ?Sized>(
    class: PhaseClass,
    parity: &ParitySource,
    m: usize,
    rng: &mut R,
) -> Result<StackConfig> {
    if !m.is_multiple_of(2) || m < 4 {
        return Err(Error::InvalidParameter(format!(
            "the alternating background needs an even ring of at least 4 sites, got {m}"
        )));
    }
    let pattern = match parity {
        ParitySource::Even => "0".to_string(),
        ParitySource::Periodic { pattern } => pattern.clone(),
        other => {
            return Err(Error::InvalidParameter(format!(
                "basic states need a periodic parity source, got {other:?}"
            )))
        }
    };
    let p = pattern.len();
    let period = if p % 2 == 0 { p } else { 2 * p };
    if p == 0 || !m.is_multiple_of(period) {
        return Err(Error::InvalidParameter(format!(
            "parity period {period} does not divide the ring length {m}"
        )));
    }
    let sigma = periodic(&pattern, m)?;
    let shift = usize::from(class == PhaseClass::Odd);
    let background = (0..m).map(|i| if (i + shift) % 2 == 0 { 2 } else { 0 }).collect();
    let composite = StackConfig::new(background)?.add_parity(&sigma)?;
    Ok(composite.rotate(rng.random_range(0..period) as isize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_fugacity_is_alternating() {
        let mut rng = stream(1, "test", 0);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..64 {
            seen.insert(sample_even_gibbs(0.0, 8, &mut rng).unwrap().into_heights());
        }
        assert_eq!(
            seen.into_iter().collect::<Vec<_>>(),
            vec![vec![0, 2, 0, 2, 0, 2, 0, 2], vec![2, 0, 2, 0, 2, 0, 2, 0]]
        );
        assert!(sample_even_gibbs(0.0, 7, &mut rng).is_err());
    }

    #[test]
    fn samples_lie_in_even_sector() {
        let mut rng = stream(2, "test", 0);
        let s = EvenGibbsSampler::new(0.5, 37).unwrap();
        for _ in 0..500 {
            let n = s.sample(&mut rng);
            assert!(n.heights().iter().all(|h| h % 2 == 0));
            assert!(n.in_xstar());
        }
    }

    #[test]
    fn etis_parity_matches() {
        let mut rng = stream(3, "test", 0);
        let src = ParitySource::Bernoulli { kappa: 0.3 };
        for _ in 0..50 {
            let (n, sigma) = sample_etis(2.0, &src, 40, &mut rng).unwrap();
            assert_eq!(n.parity_map(), sigma);
            assert!(n.in_xstar());
        }
        let (n, _) = sample_etis(1.0, &ParitySource::Periodic { pattern: "01".into() }, 10, &mut rng).unwrap();
        let h = n.heights();
        let pairs: std::collections::BTreeSet<(u32, u32)> = (0..10).step_by(2).map(|i| (h[i], h[i + 1])).collect();
        assert_eq!(pairs.len(), 1);
        let (a, b) = pairs.into_iter().next().unwrap();
        assert!([(2, 1), (3, 0), (1, 2), (0, 3)].contains(&(a, b)), "{n}");
    }

    #[test]
    fn basic_state_classes() {
        let mut rng = stream(4, "test", 0);
        let src = ParitySource::Periodic { pattern: "01".into() };
        for _ in 0..20 {
            let even = basic_state_sample(PhaseClass::Even, &src, 8, &mut rng).unwrap();
            assert!(even.heights().iter().all(|&x| x == 1 || x == 2));
            let odd = basic_state_sample(PhaseClass::Odd, &src, 8, &mut rng).unwrap();
            let h = odd.heights();
            assert!(h.iter().all(|&x| x == 3 || x == 0));
        }
        let e = basic_state_sample(PhaseClass::Even, &ParitySource::Even, 6, &mut rng).unwrap();
        assert!(e.heights().iter().all(|&x| x == 0 || x == 2));
        assert!(basic_state_sample(PhaseClass::Even, &ParitySource::Bernoulli { kappa: 0.5 }, 8, &mut rng).is_err());
        assert!(basic_state_sample(PhaseClass::Even, &ParitySource::Periodic { pattern: "011".into() }, 8, &mut rng).is_err());
    }

    #[test]
    fn parity_source_json() {
        let src: ParitySource = serde_json::from_str(r#"{"kind":"bernoulli","kappa":0.3}"#).unwrap();
        assert_eq!(src, ParitySource::Bernoulli { kappa: 0.3 });
        let s = serde_json::to_string(&ParitySource::Periodic { pattern: "01".into() }).unwrap();
        assert_eq!(s, r#"{"kind":"periodic","pattern":"01"}"#);
        assert!(ParitySource::Bernoulli { kappa: 1.5 }.validate().is_err());
    }
}
