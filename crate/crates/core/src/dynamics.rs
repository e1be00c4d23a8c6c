//! Synchronous one-step kernels, trajectory evolution with observers, and
//! the joint stack/exclusion evolution that keeps the exclusion ring equal
//! to a rotated image of the stack ring.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lattice::{
    decompose_regions, shift_next, shift_prev, ExclusionConfig, ParitySequence, StackConfig,
    MAX_HEIGHT,
};
use crate::rng::{Domain, RngContext};
use crate::stats::CylinderTable;
use crate::substitution::phi_stack;

/// One synchronous F-SSEP update.
///
/// A particle with exactly one occupied neighbour targets its other
/// neighbour. An empty site targeted from both sides takes the particle from
/// the left when its coin is 1 and from the right otherwise.
pub fn step_fssep(cfg: &ExclusionConfig, rng: &RngContext) -> ExclusionConfig {
    let len = cfg.len();
    let x = cfg.words();
    let l = shift_prev(x, len);
    let r = shift_next(x, len);
    let n = x.len();

    let mut movers_right = vec![0u64; n];
    let mut movers_left = vec![0u64; n];
    for w in 0..n {
        movers_right[w] = x[w] & l[w] & !r[w];
        movers_left[w] = x[w] & r[w] & !l[w];
    }
    let right_in = shift_prev(&movers_right, len);
    let left_in = shift_next(&movers_left, len);

    let mut won_right = vec![0u64; n];
    let mut won_left = vec![0u64; n];
    for w in 0..n {
        let both = right_in[w] & left_in[w];
        let coins = if both != 0 {
            rng.coin_word(Domain::Exclusion, w as u64)
        } else {
            0
        };
        won_right[w] = right_in[w] & (!left_in[w] | coins);
        won_left[w] = left_in[w] & (!right_in[w] | !coins);
    }
    let vacated_right = shift_next(&won_right, len);
    let vacated_left = shift_prev(&won_left, len);

    let mut out = Vec::with_capacity(n);
    for w in 0..n {
        out.push((x[w] & !vacated_right[w] & !vacated_left[w]) | won_right[w] | won_left[w]);
    }
    ExclusionConfig::from_words(len, out).expect("length preserved")
}

/// Site-by-site F-SSEP update using the same coins as [`step_fssep`].
pub fn step_fssep_reference(cfg: &ExclusionConfig, rng: &RngContext) -> ExclusionConfig {
    let m = cfg.len();
    let occ = |i: usize| cfg.get(i % m);
    let mut out = cfg.clone();
    for j in 0..m {
        if occ(j) {
            continue;
        }
        let from_left = occ(j + m - 1) && occ(j + m - 2);
        let from_right = occ(j + 1) && occ(j + 2);
        let source = match (from_left, from_right) {
            (false, false) => continue,
            (true, false) => j + m - 1,
            (false, true) => j + 1,
            (true, true) => {
                if rng.coin(Domain::Exclusion, j as u64) {
                    j + m - 1
                } else {
                    j + 1
                }
            }
        };
        out.set(source % m, false);
        out.set(j, true);
    }
    out
}

/// Net particle flow across each bond `(b, b + 1)`; +1 means one particle
/// moves from `b` to `b + 1`.
pub fn ssm_flows(n: &StackConfig, rng: &RngContext) -> Vec<i8> {
    flows_with(n, |b| rng.coin(Domain::Stack, b as u64))
}

/// As [`ssm_flows`], with `coin(b)` deciding tall-tall bond `b`
/// (`true` sends the particle from `b` to `b + 1`).
pub fn flows_with(n: &StackConfig, coin: impl Fn(usize) -> bool) -> Vec<i8> {
    let h = n.heights();
    let m = h.len();
    (0..m)
        .map(|b| match (h[b] >= 2, h[(b + 1) % m] >= 2) {
            (false, false) => 0,
            (true, false) => 1,
            (false, true) => -1,
            (true, true) => {
                if coin(b) {
                    1
                } else {
                    -1
                }
            }
        })
        .collect()
}

fn apply_flows(n: &StackConfig, flows: &[i8]) -> Result<StackConfig> {
    let h = n.heights();
    let m = h.len();
    let heights = (0..m)
        .map(|i| {
            let v = i64::from(h[i]) - i64::from(flows[i]) + i64::from(flows[(i + m - 1) % m]);
            debug_assert!(v >= 0);
            if v > i64::from(MAX_HEIGHT) {
                Err(Error::HeightOverflow(v as u64))
            } else {
                Ok(v as u32)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    StackConfig::new(heights)
}

/// One synchronous SSM update.
pub fn step_ssm(n: &StackConfig, rng: &RngContext) -> Result<StackConfig> {
    apply_flows(n, &ssm_flows(n, rng))
}

/// One SSM update with explicit tall-tall bond decisions.
pub fn step_ssm_with(n: &StackConfig, coin: impl Fn(usize) -> bool) -> Result<StackConfig> {
    apply_flows(n, &flows_with(n, coin))
}

/// A stack ring together with an exclusion ring equal to its φ-image
/// rotated by `offset`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledState {
    stack: StackConfig,
    exclusion: ExclusionConfig,
    offset: usize,
}

impl CoupledState {
    /// Checks `exclusion = rotate(φ(stack), offset)`.
    pub fn new(stack: StackConfig, exclusion: ExclusionConfig, offset: usize) -> Result<Self> {
        let len = stack.len() + stack.total() as usize;
        if exclusion.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: exclusion.len(),
            });
        }
        let image = phi_stack(&stack)?;
        if image.rotate(offset as isize) != exclusion {
            return Err(Error::CouplingInvariant(format!(
                "{exclusion} is not {image} rotated by {offset}"
            )));
        }
        Ok(Self {
            stack,
            exclusion,
            offset: offset % len,
        })
    }

    /// Pairs a stack ring with its unrotated image.
    pub fn from_stack(stack: StackConfig) -> Result<Self> {
        let exclusion = phi_stack(&stack)?;
        Ok(Self {
            stack,
            exclusion,
            offset: 0,
        })
    }

    pub fn stack(&self) -> &StackConfig {
        &self.stack
    }

    pub fn exclusion(&self) -> &ExclusionConfig {
        &self.exclusion
    }

    pub fn offset(&self) -> usize {
        self.offset
    }
}

/// Advances the stack ring by [`step_ssm`] and moves the matching exclusion
/// particles: a stack jump `i-1 → i` moves the exclusion particle at
/// `K(i) - 1` onto `K(i)`, a jump `i → i-1` moves `K(i) + 1` onto `K(i)`,
/// where `K(i)` is the position of the `0` opening the word of stack `i`.
pub fn coupled_step(s: &CoupledState, rng: &RngContext) -> Result<CoupledState> {
    let m = s.stack.len();
    let len = s.exclusion.len();
    let flows = ssm_flows(&s.stack, rng);
    let next_stack = apply_flows(&s.stack, &flows)?;

    // Word starts of the pre-step stack, shifted by the current offset.
    let h = s.stack.heights();
    let mut starts = Vec::with_capacity(m);
    let mut k = s.offset;
    for &hi in h {
        starts.push(k % len);
        k += hi as usize + 1;
    }

    let mut eta = s.exclusion.clone();
    let mut moves = Vec::new();
    for (b, &f) in flows.iter().enumerate() {
        // Bond (b, b+1) borders the word of stack i = b + 1.
        let target = starts[(b + 1) % m];
        match f {
            1 => moves.push(((target + len - 1) % len, target)),
            -1 => moves.push(((target + 1) % len, target)),
            _ => {}
        }
    }
    for &(from, to) in &moves {
        if !s.exclusion.get(from) || s.exclusion.get(to) {
            return Err(Error::CouplingInvariant(format!(
                "induced jump {from}->{to} is not available in {}",
                s.exclusion
            )));
        }
    }
    for &(from, _) in &moves {
        eta.set(from, false);
    }
    for &(_, to) in &moves {
        eta.set(to, true);
    }

    let image = phi_stack(&next_stack)?;
    let offset = (0..len)
        .find(|&q| image.rotate(q as isize) == eta)
        .ok_or_else(|| Error::CouplingInvariant(format!("{eta} is no rotation of {image}")))?;
    Ok(CoupledState {
        stack: next_stack,
        exclusion: eta,
        offset,
    })
}

/// A configuration of either model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyConfig {
    Exclusion(ExclusionConfig),
    Stack(StackConfig),
}

impl AnyConfig {
    pub fn is_frozen(&self) -> bool {
        match self {
            AnyConfig::Exclusion(x) => x.is_frozen(),
            AnyConfig::Stack(n) => n.is_frozen(),
        }
    }

    pub fn step(&self, rng: &RngContext) -> Result<AnyConfig> {
        Ok(match self {
            AnyConfig::Exclusion(x) => AnyConfig::Exclusion(step_fssep(x, rng)),
            AnyConfig::Stack(n) => AnyConfig::Stack(step_ssm(n, rng)?),
        })
    }
}

impl std::fmt::Display for AnyConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnyConfig::Exclusion(x) => x.fmt(f),
            AnyConfig::Stack(n) => n.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    /// Cumulative counts of cyclic length-`k` windows.
    Cylinder { k: usize },
    /// Fires once, at the first observed frozen configuration.
    Frozen,
    /// L/R/T region counts of balanced exclusion rings.
    Regions,
    /// Number of sites whose stack parity differs from the initial ring.
    Parity,
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Cylinder { k } => format!("cylinder_{k}"),
            Observable::Frozen => "frozen".into(),
            Observable::Regions => "regions".into(),
            Observable::Parity => "parity_changes".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObserverSpec {
    #[serde(flatten)]
    pub observable: Observable,
    /// Observation period in steps; 0 observes only the first and last step.
    #[serde(default)]
    pub every: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub step: u64,
    pub observable: String,
    pub value: Value,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub final_config: AnyConfig,
    pub records: Vec<Record>,
    pub frozen_at: Option<u64>,
}

enum ObserverState {
    Cylinder(CylinderTable),
    Frozen(bool),
    Regions,
    Parity(Option<ParitySequence>),
}

/// Runs `steps` updates from `cfg` with coins keyed by `seed`.
///
/// Once a frozen observer has fired the remaining steps are skipped, since a
/// frozen configuration is a fixed point.
pub fn evolve(cfg: AnyConfig, steps: u64, seed: u64, observers: &[ObserverSpec]) -> Result<Trajectory> {
    let mut states: Vec<ObserverState> = observers
        .iter()
        .map(|o| match &o.observable {
            Observable::Cylinder { k } => CylinderTable::new(*k).map(ObserverState::Cylinder),
            Observable::Frozen => Ok(ObserverState::Frozen(false)),
            Observable::Regions => Ok(ObserverState::Regions),
            Observable::Parity => Ok(ObserverState::Parity(None)),
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut frozen_at = None;
    let mut cur = cfg;
    let mut rng = RngContext::new(seed);
    let mut t = 0u64;
    loop {
        let last = t == steps;
        for (spec, state) in observers.iter().zip(states.iter_mut()) {
            let due = t == 0 || last || (spec.every > 0 && t.is_multiple_of(spec.every));
            if !due {
                continue;
            }
            if let Some(value) = observe(&cur, state)? {
                records.push(Record {
                    step: t,
                    observable: spec.observable.name(),
                    value,
                });
            }
            if matches!(state, ObserverState::Frozen(true)) && frozen_at.is_none() {
                frozen_at = Some(t);
            }
        }
        if last || frozen_at.is_some() {
            break;
        }
        cur = cur.step(&rng)?;
        rng.advance();
        t += 1;
    }
    Ok(Trajectory {
        final_config: cur,
        records,
        frozen_at,
    })
}

fn observe(cfg: &AnyConfig, state: &mut ObserverState) -> Result<Option<Value>> {
    match state {
        ObserverState::Cylinder(table) => {
            match cfg {
                AnyConfig::Exclusion(x) => table.add_ring(x)?,
                AnyConfig::Stack(n) => table.add_ring(n)?,
            }
            Ok(Some(table.to_json()))
        }
        ObserverState::Frozen(fired) => {
            if *fired || !cfg.is_frozen() {
                return Ok(None);
            }
            *fired = true;
            Ok(Some(json!({ "frozen": true })))
        }
        ObserverState::Regions => {
            let AnyConfig::Exclusion(x) = cfg else {
                return Ok(Some(Value::Null));
            };
            match decompose_regions(x) {
                Ok(d) => Ok(Some(json!({
                    "L": d.count(crate::lattice::RegionKind::L),
                    "R": d.count(crate::lattice::RegionKind::R),
                    "T": d.count(crate::lattice::RegionKind::T),
                    "degenerate": d.degenerate,
                }))),
                Err(Error::SpreadTooLarge(s)) => Ok(Some(json!({ "spread": s }))),
                Err(Error::Unbalanced { .. }) => Ok(Some(Value::Null)),
                Err(e) => Err(e),
            }
        }
        ObserverState::Parity(initial) => {
            let AnyConfig::Stack(n) = cfg else {
                return Ok(Some(Value::Null));
            };
            let p = n.parity_map();
            let base = initial.get_or_insert_with(|| p.clone());
            let changed = base.bits().iter().zip(p.bits()).filter(|(a, b)| a != b).count();
            Ok(Some(json!(changed)))
        }
    }
}
