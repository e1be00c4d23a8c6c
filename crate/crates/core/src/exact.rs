//! Exact analysis of the stack dynamics on small rings in the even sector:
//! every height even, no two adjacent empty sites.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::step_ssm_with;
use crate::error::{Error, Result};
use crate::lattice::StackConfig;
use crate::scalar::Field;

/// Largest state space solved by dense elimination.
pub const DENSE_LIMIT: usize = 4000;

/// All even-sector rings with `m` sites and `n` particles, in lexicographic
/// order of the height vectors.
pub fn enumerate_even_ring(m: usize, n: u64, cap: usize) -> Result<Vec<StackConfig>> {
    if m < 3 {
        return Err(Error::RingTooShort(m));
    }
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("particle count {n} is odd")));
    }
    if n < m as u64 + 1 {
        return Err(Error::InvalidParameter(format!(
            "particle count {n} is below sites + 1 = {}",
            m + 1
        )));
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    enumerate_rec(m, n / 2, &mut cur, &mut out, cap)?;
    Ok(out)
}

fn enumerate_rec(
    m: usize,
    remaining_pairs: u64,
    cur: &mut Vec<u32>,
    out: &mut Vec<StackConfig>,
    cap: usize,
) -> Result<()> {
    if cur.len() == m {
        if remaining_pairs == 0 && !(cur[0] == 0 && cur[m - 1] == 0) {
            if out.len() == cap {
                return Err(Error::StateCapExceeded { count: cap + 1, cap });
            }
            out.push(StackConfig::new(cur.clone())?);
        }
        return Ok(());
    }
    let last_zero = cur.last() == Some(&0);
    let lo = u64::from(last_zero);
    if cur.len() == m - 1 {
        // The last height is forced.
        if remaining_pairs >= lo {
            cur.push(2 * remaining_pairs as u32);
            enumerate_rec(m, 0, cur, out, cap)?;
            cur.pop();
        }
        return Ok(());
    }
    for k in lo..=remaining_pairs {
        cur.push(2 * k as u32);
        enumerate_rec(m, remaining_pairs - k, cur, out, cap)?;
        cur.pop();
    }
    Ok(())
}

/// Enumerated even-sector chain with sparse transition rows.
#[derive(Clone, Debug)]
pub struct FiniteMarkovModel<S: Field> {
    states: Vec<StackConfig>,
    rows: Vec<Vec<(usize, S)>>,
}

impl<S: Field> FiniteMarkovModel<S> {
    pub fn states(&self) -> &[StackConfig] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Nonzero entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, S)] {
        &self.rows[i]
    }

    pub fn prob(&self, i: usize, j: usize) -> S {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1.clone())
            .unwrap_or_else(|_| S::zero())
    }

    /// Largest `|Σ_j P(i, j) - 1|`.
    pub fn max_row_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let s = r.iter().fold(S::zero(), |acc, (_, p)| acc + p.clone());
                (s - S::one()).abs().to_f64_lossy()
            })
            .fold(0.0, f64::max)
    }

    /// `P(i, j) > 0` exactly when `P(j, i) > 0`.
    pub fn support_symmetric(&self) -> bool {
        (0..self.len()).all(|i| {
            self.rows[i]
                .iter()
                .all(|&(j, _)| self.rows[j].binary_search_by_key(&i, |&(c, _)| c).is_ok())
        })
    }

    /// Checks every nonzero entry against `2^{-(M - 2z) + δ}` where `z`
    /// counts empty sites of the source state and `δ` marks self-loops.
    pub fn matches_closed_form(&self) -> bool {
        (0..self.len()).all(|i| {
            let st = &self.states[i];
            let free = st.len() - 2 * st.zeros();
            self.rows[i].iter().all(|(j, p)| {
                let expect = if *j == i {
                    S::dyadic(free as u32) * (S::one() + S::one())
                } else {
                    S::dyadic(free as u32)
                };
                *p == expect
            })
        })
    }

    /// Number of strongly connected components of the transition graph.
    pub fn strongly_connected_components(&self) -> usize {
        let n = self.len();
        let fwd: Vec<Vec<usize>> = self.rows.iter().map(|r| r.iter().map(|&(j, _)| j).collect()).collect();
        let mut rev = vec![Vec::new(); n];
        for (i, r) in fwd.iter().enumerate() {
            for &j in r {
                rev[j].push(i);
            }
        }
        // Kosaraju: finishing order on the forward graph, then sweep the
        // reverse graph.
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![(s, 0usize)];
            while let Some((v, k)) = stack.pop() {
                if k < fwd[v].len() {
                    stack.push((v, k + 1));
                    let w = fwd[v][k];
                    if !seen[w] {
                        seen[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &rev[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        count
    }

    /// Normalized weights `4^{-z(n)}`.
    pub fn gibbs_weights(&self) -> Vec<S> {
        let raw: Vec<S> = self.states.iter().map(|s| S::dyadic(2 * s.zeros() as u32)).collect();
        let z = raw.iter().fold(S::zero(), |acc, w| acc + w.clone());
        raw.into_iter().map(|w| w / z.clone()).collect()
    }
}

/// Builds the transition rows by enumerating every direction choice on the
/// tall-tall bonds of each state, each with probability `2^{-f}`.
pub fn transition_matrix<S: Field>(states: Vec<StackConfig>) -> Result<FiniteMarkovModel<S>> {
    let index: HashMap<&[u32], usize> = states.iter().enumerate().map(|(i, s)| (s.heights(), i)).collect();
    let rows = states
        .par_iter()
        .map(|st| {
            let h = st.heights();
            let m = h.len();
            let free: Vec<usize> = (0..m).filter(|&b| h[b] >= 2 && h[(b + 1) % m] >= 2).collect();
            let f = free.len() as u32;
            let p = S::dyadic(f);
            let mut acc: HashMap<usize, S> = HashMap::new();
            for choice in 0u64..(1u64 << f) {
                let next = step_ssm_with(st, |b| {
                    let k = free.binary_search(&b).expect("free bond");
                    (choice >> k) & 1 == 1
                })?;
                let j = *index.get(next.heights()).ok_or_else(|| {
                    Error::InvalidParameter(format!("{st} steps to {next}, outside the even sector"))
                })?;
                let e = acc.entry(j).or_insert_with(S::zero);
                *e = e.clone() + p.clone();
            }
            let mut row: Vec<(usize, S)> = acc.into_iter().collect();
            row.sort_by_key(|&(j, _)| j);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiniteMarkovModel { states, rows })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Dense,
    PowerIteration,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationaryReport {
    pub method: SolveMethod,
    pub pi: Vec<f64>,
    pub gibbs: Vec<f64>,
    /// `max |π - gibbs|`.
    pub max_deviation: f64,
    /// `max |g(n)P(n,n') - g(n')P(n',n)|` with `g` the Gibbs weights.
    pub balance_residual: f64,
}

/// Solves `πP = π` after checking irreducibility and compares with the
/// weights `4^{-z}`.
pub fn stationary_and_detailed_balance<S: Field>(model: &FiniteMarkovModel<S>) -> Result<(Vec<S>, StationaryReport)> {
    let components = model.strongly_connected_components();
    if components != 1 {
        return Err(Error::Reducible { components });
    }
    let (pi, method) = if model.len() <= DENSE_LIMIT {
        (solve_dense(model)?, SolveMethod::Dense)
    } else if S::EXACT {
        return Err(Error::StateCapExceeded {
            count: model.len(),
            cap: DENSE_LIMIT,
        });
    } else {
        (power_iteration(model, 1e-13, 1_000_000)?, SolveMethod::PowerIteration)
    };
    let gibbs = model.gibbs_weights();
    let max_deviation = pi
        .iter()
        .zip(&gibbs)
        .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64_lossy())
        .fold(0.0, f64::max);
    let mut balance_residual = 0.0f64;
    for i in 0..model.len() {
        for (j, p) in model.row(i) {
            let back = model.prob(*j, i);
            let r = (gibbs[i].clone() * p.clone() - gibbs[*j].clone() * back).abs();
            balance_residual = balance_residual.max(r.to_f64_lossy());
        }
    }
    let report = StationaryReport {
        method,
        pi: pi.iter().map(Field::to_f64_lossy).collect(),
        gibbs: gibbs.iter().map(Field::to_f64_lossy).collect(),
        max_deviation,
        balance_residual,
    };
    Ok((pi, report))
}

/// Gaussian elimination with partial pivoting on `(Pᵀ - I) π = 0`, the last
/// equation replaced by `Σ π = 1`.
pub fn solve_dense<S: Field>(model: &FiniteMarkovModel<S>) -> Result<Vec<S>> {
    let n = model.len();
    let mut a = vec![vec![S::zero(); n + 1]; n];
    for i in 0..n {
        for (j, p) in model.row(i) {
            a[*j][i] = a[*j][i].clone() + p.clone();
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = row[i].clone() - S::one();
    }
    for c in 0..n {
        a[n - 1][c] = S::one();
    }
    a[n - 1][n] = S::one();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                a[x][col]
                    .abs()
                    .partial_cmp(&a[y][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("nonempty range");
        if a[pivot][col].is_zero() {
            return Err(Error::Singular);
        }
        a.swap(col, pivot);
        let (top, bottom) = a.split_at_mut(col + 1);
        let prow = &top[col];
        let inv = S::one() / prow[col].clone();
        for row in bottom.iter_mut() {
            if row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone() * inv.clone();
            for k in col..=n {
                if !prow[k].is_zero() {
                    row[k] = row[k].clone() - factor.clone() * prow[k].clone();
                }
            }
        }
    }
    let mut x = vec![S::zero(); n];
    for i in (0..n).rev() {
        let mut s = a[i][n].clone();
        for k in i + 1..n {
            if !a[i][k].is_zero() {
                s = s - a[i][k].clone() * x[k].clone();
            }
        }
        x[i] = s / a[i][i].clone();
    }
    Ok(x)
}

/// Power iteration on the lazy chain `(P + I)/2` from the uniform vector.
pub fn power_iteration<S: Field>(model: &FiniteMarkovModel<S>, tol: f64, max_iter: usize) -> Result<Vec<S>> {
    let n = model.len();
    let half = S::dyadic(1);
    let mut pi = vec![S::one() / S::from_usize(n).expect("size fits"); n];
    for _ in 0..max_iter {
        let mut next: Vec<S> = pi.iter().map(|p| p.clone() * half.clone()).collect();
        for (i, p) in pi.iter().enumerate() {
            let hp = p.clone() * half.clone();
            for (j, q) in model.row(i) {
                next[*j] = next[*j].clone() + hp.clone() * q.clone();
            }
        }
        let diff = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64_lossy())
            .fold(0.0, f64::max);
        pi = next;
        if diff < tol {
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn hs(states: &[StackConfig]) -> Vec<Vec<u32>> {
        states.iter().map(|s| s.heights().to_vec()).collect()
    }

    #[test]
    fn enumeration_examples() {
        let s = enumerate_even_ring(3, 4, 100).unwrap();
        assert_eq!(hs(&s), vec![vec![0, 2, 2], vec![2, 0, 2], vec![2, 2, 0]]);
        let s = enumerate_even_ring(3, 6, 100).unwrap();
        assert_eq!(s.len(), 7);
        assert!(hs(&s).contains(&vec![2, 2, 2]));
        assert!(enumerate_even_ring(3, 5, 100).is_err());
        assert!(enumerate_even_ring(3, 2, 100).is_err());
        assert_eq!(
            enumerate_even_ring(5, 20, 10),
            Err(Error::StateCapExceeded { count: 11, cap: 10 })
        );
    }

    #[test]
    fn three_site_transitions() {
        let m: FiniteMarkovModel<Rational> = transition_matrix(enumerate_even_ring(3, 6, 100).unwrap()).unwrap();
        let i = m.states().iter().position(|s| s.heights() == [2, 2, 2]).unwrap();
        assert_eq!(m.prob(i, i), Rational::new(1.into(), 4.into()));
        assert_eq!(m.max_row_defect(), 0.0);
        assert!(m.support_symmetric());
        assert!(m.matches_closed_form());

        let m4: FiniteMarkovModel<f64> = transition_matrix(enumerate_even_ring(3, 4, 100).unwrap()).unwrap();
        assert!(m4.max_row_defect() < 1e-12);
    }

    #[test]
    fn three_site_stationary() {
        let m: FiniteMarkovModel<Rational> = transition_matrix(enumerate_even_ring(3, 6, 100).unwrap()).unwrap();
        let (pi, report) = stationary_and_detailed_balance(&m).unwrap();
        for (s, p) in m.states().iter().zip(&pi) {
            let want = if s.heights() == [2, 2, 2] {
                Rational::new(2.into(), 5.into())
            } else {
                Rational::new(1.into(), 10.into())
            };
            assert_eq!(*p, want, "{s}");
        }
        assert_eq!(report.balance_residual, 0.0);

        let m4: FiniteMarkovModel<f64> = transition_matrix(enumerate_even_ring(3, 4, 100).unwrap()).unwrap();
        let (pi, report) = stationary_and_detailed_balance(&m4).unwrap();
        assert!(pi.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
        assert!(report.balance_residual < 1e-12);
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let m: FiniteMarkovModel<f64> = transition_matrix(enumerate_even_ring(5, 12, 10_000).unwrap()).unwrap();
        let dense = solve_dense(&m).unwrap();
        let power = power_iteration(&m, 1e-14, 1_000_000).unwrap();
        for (a, b) in dense.iter().zip(&power) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_precision_solve() {
        let m: FiniteMarkovModel<f32> = transition_matrix(enumerate_even_ring(5, 10, 10_000).unwrap()).unwrap();
        let (_, report) = stationary_and_detailed_balance(&m).unwrap();
        assert!(report.max_deviation < 1e-5);
    }
}
