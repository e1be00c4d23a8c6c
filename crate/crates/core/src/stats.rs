//! Empirical measurements and hypothesis tests: cylinder tables,
//! stationarity, the low-density quench, correlation decay and absorption at
//! half filling.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dynamics::step_fssep;
use crate::error::{Error, Result};
use crate::lattice::{bits_of, member_left_right, ExclusionConfig, LeftRight, RingWord, StackConfig};
use crate::rng::{stream, RngContext};

/// Longest window a [`CylinderTable`] accepts.
pub const MAX_WINDOW: usize = 12;

/// Counts of length-`k` windows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CylinderTable {
    k: usize,
    counts: BTreeMap<Vec<u32>, u64>,
    total: u64,
}

impl CylinderTable {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_WINDOW {
            return Err(Error::InvalidParameter(format!(
                "window length must be in 1..={MAX_WINDOW}, got {k}"
            )));
        }
        Ok(Self {
            k,
            counts: BTreeMap::new(),
            total: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<Vec<u32>, u64> {
        &self.counts
    }

    pub fn count(&self, word: &[u32]) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn prob(&self, word: &[u32]) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count(word) as f64 / self.total as f64
    }

    pub fn add_window(&mut self, word: &[u32]) -> Result<()> {
        self.add_count(word, 1)
    }

    fn add_count(&mut self, word: &[u32], n: u64) -> Result<()> {
        debug_assert_eq!(word.len(), self.k);
        let c = self.counts.entry(word.to_vec()).or_insert(0);
        *c = c.checked_add(n).ok_or(Error::CounterOverflow)?;
        self.total = self.total.checked_add(n).ok_or(Error::CounterOverflow)?;
        Ok(())
    }

    /// Adds every cyclic window of `ring`.
    pub fn add_ring<W: RingWord + ?Sized>(&mut self, ring: &W) -> Result<()> {
        self.add_ring_strided(ring, 1)
    }

    /// Adds the cyclic windows starting at `0, stride, 2·stride, …` below
    /// the ring length.
    pub fn add_ring_strided<W: RingWord + ?Sized>(&mut self, ring: &W, stride: usize) -> Result<()> {
        let letters = ring.letters();
        let m = letters.len();
        let mut buf = vec![0u32; self.k];
        for start in (0..m).step_by(stride.max(1)) {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = letters[(start + j) % m];
            }
            self.add_window(&buf)?;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &CylinderTable) -> Result<()> {
        if other.k != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                found: other.k,
            });
        }
        for (w, &c) in &other.counts {
            self.add_count(w, c)?;
        }
        Ok(())
    }

    pub fn probabilities(&self) -> BTreeMap<Vec<u32>, f64> {
        self.counts
            .iter()
            .map(|(w, &c)| (w.clone(), c as f64 / self.total as f64))
            .collect()
    }

    /// `{"k": k, "total": n, "counts": {word: count}}`; words are digit
    /// strings when every letter is below 10, else comma-separated.
    pub fn to_json(&self) -> Value {
        let counts: serde_json::Map<String, Value> = self
            .counts
            .iter()
            .map(|(w, &c)| (word_key(w), Value::from(c)))
            .collect();
        serde_json::json!({ "k": self.k, "total": self.total, "counts": counts })
    }
}

pub fn word_key(w: &[u32]) -> String {
    if w.iter().all(|&c| c < 10) {
        w.iter().map(|c| char::from(b'0' + *c as u8)).collect()
    } else {
        w.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
    }
}

/// Outcome of a two-sample comparison of cylinder tables.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub tv: f64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of cells after pooling sparse ones.
    pub cells: usize,
}

/// Total variation distance between the empirical laws of two tables.
pub fn total_variation(a: &CylinderTable, b: &CylinderTable) -> f64 {
    let mut keys: Vec<&Vec<u32>> = a.counts.keys().chain(b.counts.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys.iter().map(|w| (a.prob(w) - b.prob(w)).abs()).sum::<f64>()
}

/// Chi-square test of homogeneity on the 2×K table of window counts.
///
/// Cells whose expected count is below 5 in either sample are pooled into a
/// single cell. When only one cell remains the samples are compared exactly:
/// identical supports give `p = 1`.
pub fn chi_square_homogeneity(a: &CylinderTable, b: &CylinderTable) -> Result<Comparison> {
    if a.total == 0 || b.total == 0 {
        return Err(Error::InsufficientData("empty cylinder table".into()));
    }
    let tv = total_variation(a, b);
    let (na, nb) = (a.total as f64, b.total as f64);
    let n = na + nb;
    let mut keys: Vec<&Vec<u32>> = a.counts.keys().chain(b.counts.keys()).collect();
    keys.sort();
    keys.dedup();

    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for w in keys {
        let (ca, cb) = (a.count(w) as f64, b.count(w) as f64);
        let col = ca + cb;
        if col * na / n < 5.0 || col * nb / n < 5.0 {
            pooled.0 += ca;
            pooled.1 += cb;
        } else {
            cells.push((ca, cb));
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    if cells.len() < 2 {
        let p = if tv == 0.0 { 1.0 } else { 0.0 };
        return Ok(Comparison {
            tv,
            statistic: 0.0,
            dof: 0,
            p_value: p,
            cells: cells.len(),
        });
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(ca, cb)| {
            let col = ca + cb;
            let ea = col * na / n;
            let eb = col * nb / n;
            (ca - ea).powi(2) / ea + (cb - eb).powi(2) / eb
        })
        .sum();
    let dof = cells.len() - 1;
    let p_value = chi_square_sf(statistic, dof)?;
    Ok(Comparison {
        tv,
        statistic,
        dof,
        p_value,
        cells: cells.len(),
    })
}

/// Upper tail of the chi-square law.
pub fn chi_square_sf(statistic: f64, dof: usize) -> Result<f64> {
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidParameter(format!("chi-square with {dof} degrees of freedom: {e}")))?;
    Ok(dist.sf(statistic))
}

/// Stationarity check: the window law of fresh samples against that of
/// independent samples advanced by one step.
///
/// Windows are read with the given stride from each ring so that windows
/// within one ring are only weakly dependent; each table receives at least
/// `n_windows` windows. Ring `i` of either half uses its own seeded stream.
pub fn stationarity_test<C, S, T>(
    sample: S,
    step: T,
    k: usize,
    n_windows: u64,
    stride: usize,
    seed: u64,
) -> Result<Comparison>
where
    C: RingWord + Send,
    S: Fn(&mut ChaCha8Rng) -> Result<C> + Sync,
    T: Fn(&C, &RngContext) -> Result<C> + Sync,
{
    if n_windows < 10_000 {
        return Err(Error::InsufficientData(format!(
            "stationarity test needs at least 10^4 windows, got {n_windows}"
        )));
    }
    let probe = sample(&mut stream(seed, "stationarity-probe", 0))?;
    let per_ring = probe.ring_len().div_ceil(stride.max(1)) as u64;
    let rings = n_windows.div_ceil(per_ring);

    let build = |label: &'static str, stepped: bool| -> Result<CylinderTable> {
        (0..rings)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, label, i);
                let mut ring = sample(&mut rng)?;
                if stepped {
                    let ctx = RngContext::new(rng.random());
                    ring = step(&ring, &ctx)?;
                }
                let mut t = CylinderTable::new(k)?;
                t.add_ring_strided(&ring, stride)?;
                Ok(t)
            })
            .try_reduce(
                || CylinderTable::new(k).expect("valid window"),
                |mut acc, t| {
                    acc.merge(&t)?;
                    Ok(acc)
                },
            )
    };
    let fresh = build("stationarity-fresh", false)?;
    let stepped = build("stationarity-stepped", true)?;
    chi_square_homogeneity(&fresh, &stepped)
}

/// `round(ρM)` particles placed uniformly on `m` sites.
pub fn random_exclusion<R: Rng + ?Sized>(m: usize, rho: f64, rng: &mut R) -> Result<ExclusionConfig> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("density must lie in [0, 1], got {rho}")));
    }
    let n = (rho * m as f64).round() as usize;
    let mut cfg = ExclusionConfig::empty(m)?;
    for i in index::sample(rng, m, n) {
        cfg.set(i, true);
    }
    Ok(cfg)
}

/// Markers of a configuration: sites `i` with `η(i-2), η(i-1), η(i)` all
/// empty, and the gaps and interiors between consecutive markers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RenewalRecord {
    pub sites: usize,
    pub markers: Vec<usize>,
    /// `gaps[k] = markers[k+1] - markers[k]`, the last one wrapping around.
    pub gaps: Vec<usize>,
    /// Sites strictly after each marker up to and including the next one.
    pub interiors: Vec<String>,
}

impl RenewalRecord {
    pub fn from_config(cfg: &ExclusionConfig) -> Self {
        let m = cfg.len();
        let mask = cfg.pattern_mask(&bits_of("000"));
        let markers: Vec<usize> = (0..m)
            .filter(|&s| (mask[s / 64] >> (s % 64)) & 1 == 1)
            .map(|s| (s + 2) % m)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut gaps = Vec::with_capacity(markers.len());
        let mut interiors = Vec::with_capacity(markers.len());
        for (idx, &a) in markers.iter().enumerate() {
            let b = markers[(idx + 1) % markers.len()];
            let gap = if b > a { b - a } else { b + m - a };
            gaps.push(gap);
            interiors.push((1..=gap).map(|j| if cfg.get(a + j) { '1' } else { '0' }).collect());
        }
        Self {
            sites: m,
            markers,
            gaps,
            interiors,
        }
    }

    /// Markers followed by exactly the sites of `word`.
    pub fn count_following(&self, cfg: &ExclusionConfig, word: &str) -> usize {
        let w = bits_of(word);
        self.markers
            .iter()
            .filter(|&&s| w.iter().enumerate().all(|(j, &b)| cfg.get(s + 1 + j) == b))
            .count()
    }
}

#[derive(Clone, Debug)]
pub struct QuenchResult {
    pub initial: ExclusionConfig,
    pub final_config: ExclusionConfig,
    pub steps: u64,
    pub frozen: bool,
    /// No `000` block appeared that was absent one step earlier.
    pub markers_never_created: bool,
    pub record: RenewalRecord,
    /// `sqrt(marker density / (1-ρ)^3)`.
    pub q_hat: f64,
}

/// Runs the exclusion dynamics from `round(ρM)` uniformly placed particles
/// until no particle can move or `max_steps` is reached.
pub fn quench_lowdensity(rho: f64, m: usize, seed: u64, max_steps: u64) -> Result<QuenchResult> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(Error::InvalidParameter(format!("quench density must lie in (0, 1/2), got {rho}")));
    }
    let initial = random_exclusion(m, rho, &mut stream(seed, "quench-initial", 0))?;
    let triple = bits_of("000");
    let mut cur = initial.clone();
    let mut mask = cur.pattern_mask(&triple);
    let mut markers_never_created = true;
    let mut rng = RngContext::new(seed);
    let mut steps = 0;
    while !cur.is_frozen() && steps < max_steps {
        cur = step_fssep(&cur, &rng);
        rng.advance();
        steps += 1;
        let next = cur.pattern_mask(&triple);
        if mask.iter().zip(&next).any(|(a, b)| !a & b != 0) {
            markers_never_created = false;
        }
        mask = next;
    }
    let frozen = cur.is_frozen();
    let record = RenewalRecord::from_config(&cur);
    let q_hat = ((record.markers.len() as f64 / m as f64) / (1.0 - rho).powi(3)).sqrt();
    Ok(QuenchResult {
        initial,
        final_config: cur,
        steps,
        frozen,
        markers_never_created,
        record,
        q_hat,
    })
}

/// Mean and standard error of per-batch values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ratio estimate `Σ hits / Σ trials` over batches, with the delta-method
/// standard error from the batch-to-batch spread.
pub fn ratio_and_se(hits: &[f64], trials: &[f64]) -> (f64, f64) {
    let h: f64 = hits.iter().sum();
    let t: f64 = trials.iter().sum();
    let r = h / t;
    let n = hits.len() as f64;
    let mean_t = t / n;
    let resid: Vec<f64> = hits.iter().zip(trials).map(|(a, b)| a - r * b).collect();
    let var = resid.iter().map(|x| x * x).sum::<f64>() / (n - 1.0);
    (r, (var / n).sqrt() / mean_t)
}

#[derive(Clone, Debug, Serialize)]
pub struct IndependenceTest {
    pub pairs: usize,
    /// Inclusive lower edges of the gap bins.
    pub bin_edges: Vec<usize>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square test that consecutive gaps are independent.
///
/// Each gap sequence contributes its linearly consecutive pairs. Gap values
/// are grouped into bins of consecutive values, each holding at least
/// `sqrt(5 · pairs)` observations, so every cell of the contingency table has
/// expected count at least 5 under independence.
pub fn renewal_independence_test(gap_sequences: &[Vec<usize>]) -> Result<IndependenceTest> {
    let total: usize = gap_sequences.iter().map(Vec::len).sum();
    if total < 10_000 {
        return Err(Error::InsufficientData(format!(
            "independence test needs at least 10^4 gaps, got {total}"
        )));
    }
    let pairs: Vec<(usize, usize)> = gap_sequences
        .iter()
        .flat_map(|g| g.windows(2).map(|w| (w[0], w[1])))
        .collect();
    let n = pairs.len();
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &(a, _) in &pairs {
        *freq.entry(a).or_insert(0) += 1;
    }
    let min_bin = (5.0 * n as f64).sqrt().ceil() as usize;
    let mut edges = Vec::new();
    let mut acc = 0;
    for (&g, &c) in &freq {
        if edges.is_empty() || acc >= min_bin {
            edges.push(g);
            acc = 0;
        }
        acc += c;
    }
    // A short last bin joins its neighbour.
    if acc < min_bin && edges.len() > 1 {
        edges.pop();
    }
    if edges.len() < 2 {
        return Err(Error::InsufficientData("gap values do not support two bins".into()));
    }
    let bin = |g: usize| edges.partition_point(|&e| e <= g) - 1;
    let b = edges.len();
    let mut table = vec![vec![0f64; b]; b];
    for &(x, y) in &pairs {
        table[bin(x)][bin(y)] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..b).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let nn = n as f64;
    let mut statistic = 0.0;
    for i in 0..b {
        for j in 0..b {
            let e = rows[i] * cols[j] / nn;
            if e > 0.0 {
                statistic += (table[i][j] - e).powi(2) / e;
            }
        }
    }
    let dof = (b - 1) * (b - 1);
    Ok(IndependenceTest {
        pairs: n,
        bin_edges: edges,
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationFit {
    /// Covariance of the zero indicators at distance `d = 1..=max`.
    pub covariance: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// Distances whose covariance exceeds four standard errors.
    pub significant: usize,
    /// Fitted `|c(d+1)| / |c(d)|`; zero when no correlation is detectable.
    pub ratio: f64,
}

/// Covariance of `1{height = 0}` against distance, with batch-means errors,
/// and a least-squares fit through the origin of `|c(d+1)|` on `|c(d)|`
/// over the leading run of significant distances.
pub fn two_point_correlation(samples: &[StackConfig], max_distance: usize) -> Result<CorrelationFit> {
    if samples.len() < 20 {
        return Err(Error::InsufficientData("correlation fit needs at least 20 rings".into()));
    }
    if max_distance < 2 {
        return Err(Error::InvalidParameter("need at least two distances".into()));
    }
    let sites: f64 = samples.iter().map(|s| s.len() as f64).sum();
    let mean = samples.iter().map(|s| s.zeros() as f64).sum::<f64>() / sites;
    let batches = 20.min(samples.len());
    let per = samples.len().div_ceil(batches);
    let mut by_batch = Vec::new();
    for chunk in samples.chunks(per) {
        let mut c = vec![0f64; max_distance];
        let mut count = 0f64;
        for s in chunk {
            let z: Vec<f64> = s.heights().iter().map(|&h| f64::from(u8::from(h == 0)) - mean).collect();
            let m = z.len();
            for d in 1..=max_distance {
                c[d - 1] += (0..m).map(|i| z[i] * z[(i + d) % m]).sum::<f64>();
            }
            count += m as f64;
        }
        by_batch.push(c.into_iter().map(|v| v / count).collect::<Vec<f64>>());
    }
    let mut covariance = Vec::with_capacity(max_distance);
    let mut standard_error = Vec::with_capacity(max_distance);
    for d in 0..max_distance {
        let vals: Vec<f64> = by_batch.iter().map(|b| b[d]).collect();
        let (m, se) = mean_and_se(&vals);
        covariance.push(m);
        standard_error.push(se);
    }
    let significant = covariance
        .iter()
        .zip(&standard_error)
        .take_while(|(c, se)| c.abs() > 4.0 * **se)
        .count();
    if significant == 0 {
        return Ok(CorrelationFit {
            covariance,
            standard_error,
            significant,
            ratio: 0.0,
        });
    }
    let last = significant.min(max_distance - 1);
    let (mut num, mut den) = (0.0, 0.0);
    for d in 0..last {
        num += covariance[d].abs() * covariance[d + 1].abs();
        den += covariance[d].powi(2);
    }
    let ratio = num / den;
    if ratio >= 0.95 {
        return Err(Error::FitFailure(format!(
            "covariance does not decay (fitted ratio {ratio:.4})"
        )));
    }
    Ok(CorrelationFit {
        covariance,
        standard_error,
        significant,
        ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HalfDensityResult {
    /// First step at which the configuration parses as left- or right-moving.
    pub absorbed_at: u64,
    pub class: LeftRight,
    /// The speed-2 translation held on every checked step.
    pub translation_ok: bool,
    pub checked_steps: u64,
}

/// A uniformly random ring with `m/2` particles.
pub fn random_balanced<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<ExclusionConfig> {
    if !m.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("half filling needs an even ring, got {m}")));
    }
    random_exclusion(m, 0.5, rng)
}

/// Evolves a random balanced ring until it becomes left- or right-moving,
/// then checks `η_{t+1} = rotate(η_t, ∓2)` for `verify_steps` more steps.
pub fn halfdensity_convergence(m: usize, seed: u64, max_steps: u64, verify_steps: u64) -> Result<HalfDensityResult> {
    let start = random_balanced(m, &mut stream(seed, "halfdensity-initial", 0))?;
    halfdensity_from(start, seed, max_steps, verify_steps)
}

pub fn halfdensity_from(start: ExclusionConfig, seed: u64, max_steps: u64, verify_steps: u64) -> Result<HalfDensityResult> {
    if 2 * start.particles() != start.len() {
        return Err(Error::Unbalanced {
            sites: start.len(),
            particles: start.particles(),
        });
    }
    let mut cur = start;
    let mut rng = RngContext::new(seed);
    let mut t = 0;
    let class = loop {
        let c = member_left_right(&cur);
        if c != LeftRight::Neither {
            break c;
        }
        if t == max_steps {
            return Err(Error::StepLimit(max_steps));
        }
        cur = step_fssep(&cur, &rng);
        rng.advance();
        t += 1;
    };
    let shift = if class == LeftRight::Right { 2 } else { -2 };
    let mut translation_ok = true;
    for _ in 0..verify_steps {
        let next = step_fssep(&cur, &rng);
        rng.advance();
        if next != cur.rotate(shift) {
            translation_ok = false;
        }
        cur = next;
    }
    Ok(HalfDensityResult {
        absorbed_at: t,
        class,
        translation_ok,
        checked_steps: verify_steps,
    })
}
