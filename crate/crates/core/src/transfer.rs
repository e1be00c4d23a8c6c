//! Rank-2 transfer operator of the even-sector Gibbs state at fugacity ζ.
//!
//! Index `i` stands for stack height `2i`. With `u_i = δ_{i0}` and
//! `v_i = ζ^i` for `i ≥ 1` (`v_0 = 0`) the operator is
//! `T = (u vᵀ + v uᵀ)/2 + v vᵀ`, so `T_00 = 0`, `T_0j = ζ^j / 2` and
//! `T_ij = ζ^{i+j}` otherwise. Its nonzero eigenvalues are
//! `λ₁ = ζ / (2(1-ζ))` and `λ₂ = -ζ / (2(1+ζ))`, with leading eigenvector
//! `w = ζ/(1+ζ) u + v`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Truncation tolerance on the height tail mass.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Stack density `1/(1-ζ)` of the Gibbs state at fugacity ζ.
pub fn density<T: Real>(zeta: T) -> T {
    T::one() / (T::one() - zeta)
}

/// Inverse of [`density`]: `ζ = (ρ - 1)/ρ`, defined for `ρ ≥ 1`.
pub fn fugacity_of_density<T: Real>(rho: T) -> Result<T> {
    if !(rho >= T::one()) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "even-sector density must be at least 1, got {rho:?}"
        )));
    }
    Ok((rho - T::one()) / rho)
}

/// Probability mass of heights above `hmax`: `(1+ζ) ζ^hmax / 2`.
pub fn tail_mass(zeta: f64, hmax: u32) -> f64 {
    (1.0 + zeta) * zeta.powi(hmax as i32) / 2.0
}

/// Contribution of heights above `hmax` to the mean height:
/// `ζ^hmax (k - (k-1)ζ²) / (1-ζ)` with `k = hmax/2 + 1`.
pub fn tail_mean(zeta: f64, hmax: u32) -> f64 {
    let k = f64::from(hmax / 2 + 1);
    zeta.powi(hmax as i32) * (k - (k - 1.0) * zeta * zeta) / (1.0 - zeta)
}

/// Smallest even `hmax ≥ 10` whose tail mass and tail mean are both below
/// [`TAIL_TOLERANCE`].
pub fn auto_hmax(zeta: f64) -> u32 {
    let mut h = 10;
    while tail_mass(zeta, h) >= TAIL_TOLERANCE || tail_mean(zeta, h) >= TAIL_TOLERANCE {
        h += 2;
    }
    h
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferSpec<T: Real> {
    zeta: T,
    hmax: u32,
    u: Vec<T>,
    v: Vec<T>,
    w: Vec<T>,
    lambda1: T,
    lambda2: T,
    w_norm_sq: T,
}

impl<T: Real> TransferSpec<T> {
    pub fn new(zeta: T, hmax: u32) -> Result<Self> {
        if !(zeta > T::zero() && zeta < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "fugacity must lie in (0, 1), got {zeta:?}"
            )));
        }
        if hmax < 10 || !hmax.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "truncation height must be even and at least 10, got {hmax}"
            )));
        }
        let z = zeta.to_f64().unwrap_or(f64::NAN);
        let tail = tail_mass(z, hmax);
        if tail >= TAIL_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "truncation at height {hmax} leaves tail mass {tail:.3e}; use at least {}",
                auto_hmax(z)
            )));
        }
        let dim = hmax as usize / 2 + 1;
        let one = T::one();
        let two = T::lit(2.0);
        let u: Vec<T> = (0..dim).map(|i| if i == 0 { one } else { T::zero() }).collect();
        let v: Vec<T> = (0..dim)
            .map(|i| if i == 0 { T::zero() } else { zeta.powi(i as i32) })
            .collect();
        let c = zeta / (one + zeta);
        let w = u.iter().zip(&v).map(|(&a, &b)| c * a + b).collect();
        let lambda1 = zeta / (two * (one - zeta));
        let lambda2 = -zeta / (two * (one + zeta));
        let w_norm_sq = two * zeta * zeta / ((one + zeta) * (one + zeta) * (one - zeta));
        Ok(Self {
            zeta,
            hmax,
            u,
            v,
            w,
            lambda1,
            lambda2,
            w_norm_sq,
        })
    }

    /// Uses [`auto_hmax`] for the truncation.
    pub fn with_auto_hmax(zeta: T) -> Result<Self> {
        let z = zeta.to_f64().unwrap_or(f64::NAN);
        if !(z > 0.0 && z < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fugacity must lie in (0, 1), got {zeta:?}"
            )));
        }
        Self::new(zeta, auto_hmax(z))
    }

    pub fn zeta(&self) -> T {
        self.zeta
    }

    pub fn hmax(&self) -> u32 {
        self.hmax
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn lambda1(&self) -> T {
        self.lambda1
    }

    pub fn lambda2(&self) -> T {
        self.lambda2
    }

    /// `‖w‖²` of the untruncated eigenvector.
    pub fn w_norm_sq(&self) -> T {
        self.w_norm_sq
    }

    /// `|λ₂| / λ₁ = (1-ζ)/(1+ζ)`: decay of correlations per site.
    pub fn decay_ratio(&self) -> T {
        self.lambda2.abs() / self.lambda1
    }

    /// `exp(-(λ₁ - |λ₂|))`, the per-site factor of an exponential rate
    /// `λ₁ - |λ₂|`; reported next to [`Self::decay_ratio`] for comparison.
    pub fn exponent_form_ratio(&self) -> T {
        (-(self.lambda1 - self.lambda2.abs())).exp()
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        let half = T::lit(0.5);
        half * (self.u[i] * self.v[j] + self.v[i] * self.u[j]) + self.v[i] * self.v[j]
    }

    pub fn matrix(&self) -> Vec<Vec<T>> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// `T x` for the truncated operator.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).fold(T::zero(), |acc, j| acc + self.entry(i, j) * x[j]))
            .collect()
    }

    /// `𝒴_{ζ,K} = λ₁^{2K} ‖w‖²`, the normalizer of a cylinder on `2K + 1`
    /// sites.
    pub fn normalizer(&self, k: u32) -> T {
        self.lambda1.powi(2 * k as i32) * self.w_norm_sq
    }

    /// Closed form of [`Self::normalizer`]:
    /// `ζ^{2K+2} / ((1+ζ)² 2^{2K-1} (1-ζ)^{2K+1})`.
    pub fn normalizer_closed_form(&self, k: u32) -> T {
        let z = self.zeta;
        let one = T::one();
        let k = k as i32;
        z.powi(2 * k + 2)
            / ((one + z).powi(2) * T::lit(2.0).powi(2 * k - 1) * (one - z).powi(2 * k + 1))
    }

    fn index_of(&self, h: u32) -> Result<usize> {
        if !h.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("odd height {h} in an even-sector word")));
        }
        if h > self.hmax {
            return Err(Error::InvalidParameter(format!(
                "height {h} exceeds the truncation height {}",
                self.hmax
            )));
        }
        Ok(h as usize / 2)
    }

    /// Probability that consecutive sites carry the heights of `word`.
    pub fn cylinder_prob(&self, word: &[u32]) -> Result<T> {
        let idx = word.iter().map(|&h| self.index_of(h)).collect::<Result<Vec<_>>>()?;
        let Some((&first, _)) = idx.split_first() else {
            return Ok(T::one());
        };
        let mut acc = self.w[first];
        for pair in idx.windows(2) {
            acc = acc * self.entry(pair[0], pair[1]);
        }
        acc = acc * self.w[*idx.last().unwrap()];
        let steps = (idx.len() - 1) as i32;
        Ok(acc / (self.lambda1.powi(steps) * self.w_norm_sq))
    }

    /// `P(height = 2i)` for `i = 0..=hmax/2`.
    pub fn site_marginal(&self) -> Vec<T> {
        let z = self.zeta;
        let one = T::one();
        let half = T::lit(0.5);
        (0..self.dim())
            .map(|i| {
                if i == 0 {
                    (one - z) * half
                } else {
                    (one + z) * (one + z) * (one - z) * z.powi(2 * i as i32 - 2) * half
                }
            })
            .collect()
    }

    /// Cylinder probability under the ring measure with weight
    /// `4^{-zeros} ζ^{total}` on `m` sites, computed as a trace.
    pub fn ring_cylinder_prob(&self, word: &[u32], m: usize) -> Result<T> {
        if word.len() > m || m < 3 {
            return Err(Error::InvalidParameter(format!(
                "word of length {} does not fit a ring of {m} sites",
                word.len()
            )));
        }
        let idx = word.iter().map(|&h| self.index_of(h)).collect::<Result<Vec<_>>>()?;
        let t = self.matrix();
        let total = trace(&mat_pow(&t, m));
        if idx.is_empty() {
            return Ok(T::one());
        }
        let mut acc = T::one();
        for pair in idx.windows(2) {
            acc = acc * t[pair[0]][pair[1]];
        }
        let rest = mat_pow(&t, m - idx.len() + 1);
        Ok(acc * rest[*idx.last().unwrap()][idx[0]] / total)
    }
}

impl TransferSpec<f64> {
    /// Largest and most negative eigenvalues of the truncated matrix,
    /// by dense symmetric diagonalization.
    pub fn numeric_eigenvalues(&self) -> (f64, f64) {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |i, j| self.entry(i, j));
        let eig = SymmetricEigen::new(m).eigenvalues;
        let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        (max, min)
    }
}

fn mat_mul<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let d = a.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..d).fold(T::zero(), |acc, k| acc + a[i][k] * b[k][j]))
                .collect()
        })
        .collect()
}

fn mat_pow<T: Real>(a: &[Vec<T>], mut e: usize) -> Vec<Vec<T>> {
    let d = a.len();
    let mut result: Vec<Vec<T>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let mut base = a.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul(&result, &base);
        }
        base = mat_mul(&base, &base);
        e >>= 1;
    }
    result
}

fn trace<T: Real>(a: &[Vec<T>]) -> T {
    (0..a.len()).fold(T::zero(), |acc, i| acc + a[i][i])
}
