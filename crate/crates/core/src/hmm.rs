//! Discrete-state HMM machinery with Gaussian LPV-regression emissions.
//!
//! Every recursion runs in log space. Emission densities for realistic
//! record lengths underflow a linear-scale forward variable long before the
//! end of a few hundred samples.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{ln_or_neg_inf, logsumexp};
use crate::model::{state_means, CoeffMatrix, Dataset, SchedulingGrid};

/// Row-stochastic tolerance for transition matrices and initial distributions.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Floor applied to initial-state probabilities after re-estimation.
pub const PI_FLOOR: f64 = 1e-12;

/// Row-stochastic `M × M` matrix with `a[i][j] = Pr(q(k) = j | q(k-1) = i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    m: usize,
    a: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(m: usize, a: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(invalid("transition matrix needs at least one state"));
        }
        if a.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                actual: a.len(),
                context: "transition matrix entries",
            });
        }
        for (i, row) in a.chunks(m).enumerate() {
            check_simplex(row).map_err(|e| invalid(format!("transition row {i}: {e}")))?;
        }
        Ok(Self { m, a })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: bad.len(),
                context: "transition matrix row length",
            });
        }
        Self::new(m, rows.concat())
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            m,
            a: vec![1.0 / m as f64; m * m],
        }
    }

    /// Rows are normalized to sum to one; an all-zero row becomes uniform.
    pub(crate) fn from_weights(m: usize, mut a: Vec<f64>) -> Self {
        for row in a.chunks_mut(m) {
            normalize_or_uniform(row);
        }
        Self { m, a }
    }

    pub fn n_states(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.m..(i + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.a
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    pub fn ln_entries(&self) -> Vec<f64> {
        self.a.iter().map(|&x| ln_or_neg_inf(x)).collect()
    }

    /// Same chain with state labels reversed (`j ↦ M-1-j`).
    pub fn reversed_labels(&self) -> Self {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a[(m - 1 - i) * m + (m - 1 - j)] = self.get(i, j);
            }
        }
        Self { m, a }
    }

    /// Entrywise floor followed by row renormalization.
    pub fn floored(&self, floor: f64) -> Self {
        Self::from_weights(self.m, self.a.iter().map(|&x| x.max(floor)).collect())
    }

    /// `(1 - t)·self + t·other`, which stays row-stochastic for `t ∈ [0, 1]`.
    pub fn blend(&self, other: &Self, t: f64) -> Self {
        let a = self
            .a
            .iter()
            .zip(&other.a)
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect();
        Self::from_weights(self.m, a)
    }
}

/// Initial state distribution `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDist {
    pi: Vec<f64>,
}

impl InitialDist {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(invalid("initial distribution needs at least one state"));
        }
        check_simplex(&pi).map_err(|e| invalid(format!("initial distribution: {e}")))?;
        Ok(Self { pi })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            pi: vec![1.0 / m as f64; m],
        }
    }

    pub(crate) fn from_weights(mut pi: Vec<f64>) -> Self {
        normalize_or_uniform(&mut pi);
        Self { pi }
    }

    pub fn n_states(&self) -> usize {
        self.pi.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    pub fn reversed_labels(&self) -> Self {
        Self {
            pi: self.pi.iter().rev().copied().collect(),
        }
    }

    pub fn blend(&self, other: &Self, t: f64) -> Self {
        Self::from_weights(
            self.pi
                .iter()
                .zip(&other.pi)
                .map(|(x, y)| (1.0 - t) * x + t * y)
                .collect(),
        )
    }
}

/// Hidden-layer parameters: chain `(A, π)` and the emission noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HmmParamsFile", into = "HmmParamsFile")]
pub struct HmmParams {
    pub a: TransitionMatrix,
    pub pi: InitialDist,
    sigma2: f64,
}

impl HmmParams {
    pub fn new(a: TransitionMatrix, pi: InitialDist, sigma2: f64) -> Result<Self> {
        if a.n_states() != pi.n_states() {
            return Err(Error::DimensionMismatch {
                expected: a.n_states(),
                actual: pi.n_states(),
                context: "initial distribution length",
            });
        }
        check_variance(sigma2)?;
        Ok(Self { a, pi, sigma2 })
    }

    pub fn uniform(m: usize, sigma2: f64) -> Result<Self> {
        Self::new(TransitionMatrix::uniform(m), InitialDist::uniform(m), sigma2)
    }

    pub fn n_states(&self) -> usize {
        self.pi.n_states()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn set_sigma2(&mut self, sigma2: f64) -> Result<()> {
        check_variance(sigma2)?;
        self.sigma2 = sigma2;
        Ok(())
    }
}

/// JSON shape of [`HmmParams`]: `{"A": [[…]], "pi": […], "sigma2": …}`.
#[derive(Serialize, Deserialize)]
struct HmmParamsFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    pi: Vec<f64>,
    sigma2: f64,
}

impl TryFrom<HmmParamsFile> for HmmParams {
    type Error = Error;

    fn try_from(f: HmmParamsFile) -> Result<Self> {
        HmmParams::new(
            TransitionMatrix::from_rows(&f.a)?,
            InitialDist::new(f.pi)?,
            f.sigma2,
        )
    }
}

impl From<HmmParams> for HmmParamsFile {
    fn from(p: HmmParams) -> Self {
        Self {
            a: p.a.rows(),
            pi: p.pi.pi,
            sigma2: p.sigma2,
        }
    }
}

/// Row-major `N × M` table of `ln b_j(y(k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTable {
    n: usize,
    m: usize,
    log_b: Vec<f64>,
}

impl EmissionTable {
    pub fn new(n: usize, m: usize, log_b: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(invalid("emission table must be non-empty"));
        }
        if log_b.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                actual: log_b.len(),
                context: "emission table entries",
            });
        }
        if log_b.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(invalid("log emission densities must be finite or -inf"));
        }
        Ok(Self { n, m, log_b })
    }

    /// Gaussian log densities around precomputed state means (`N × M`, row-major).
    pub fn from_means(means: &[f64], y: &[f64], sigma2: f64) -> Result<Self> {
        check_variance(sigma2)?;
        let n = y.len();
        if n == 0 || !means.len().is_multiple_of(n) {
            return Err(invalid("state means do not match the output length"));
        }
        let m = means.len() / n;
        let norm = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
        let log_b = means
            .chunks(m)
            .zip(y)
            .flat_map(|(row, &yk)| {
                row.iter().map(move |&mu| {
                    let r = yk - mu;
                    norm - r * r / (2.0 * sigma2)
                })
            })
            .collect();
        Self::new(n, m, log_b)
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_states(&self) -> usize {
        self.m
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.log_b[k * self.m + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.log_b[k * self.m..(k + 1) * self.m]
    }
}

/// `ln b_j(y(k)) = -½ ln(2πσ²) - (y(k) - μ_j(k))² / (2σ²)`.
pub fn emission_table(
    h: &CoeffMatrix,
    grid: &SchedulingGrid,
    data: &Dataset,
    sigma2: f64,
) -> Result<EmissionTable> {
    check_variance(sigma2)?;
    EmissionTable::from_means(&state_means(h, grid, &data.u), &data.y, sigma2)
}

/// Log-likelihood and the full log forward variable (`N × M`, row-major).
pub fn log_forward(params: &HmmParams, emis: &EmissionTable) -> Result<(f64, Vec<f64>)> {
    check_dims(params, emis)?;
    let (n, m) = (emis.n, emis.m);
    let ln_a = params.a.ln_entries();
    let mut alpha = vec![0.0; n * m];
    for j in 0..m {
        alpha[j] = ln_or_neg_inf(params.pi.pi[j]) + emis.get(0, j);
    }
    let mut terms = vec![0.0; m];
    for k in 1..n {
        let (prev, cur) = alpha.split_at_mut(k * m);
        let prev = &prev[(k - 1) * m..];
        for j in 0..m {
            for i in 0..m {
                terms[i] = prev[i] + ln_a[i * m + j];
            }
            cur[j] = logsumexp(&terms) + emis.get(k, j);
        }
    }
    let ll = logsumexp(&alpha[(n - 1) * m..]);
    Ok((ll, alpha))
}

/// Most probable state path (0-based state indices) and its joint log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiPath {
    pub states: Vec<usize>,
    pub log_score: f64,
}

/// Viterbi decoding. Ties go to the lowest state index, both for the final
/// state and for every back-pointer.
pub fn viterbi(params: &HmmParams, emis: &EmissionTable) -> Result<ViterbiPath> {
    check_dims(params, emis)?;
    let (n, m) = (emis.n, emis.m);
    let ln_a = params.a.ln_entries();
    let mut delta: Vec<f64> = (0..m)
        .map(|j| ln_or_neg_inf(params.pi.pi[j]) + emis.get(0, j))
        .collect();
    let mut next = vec![0.0; m];
    let mut back = vec![0usize; n * m];
    for k in 1..n {
        for j in 0..m {
            let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
            for i in 0..m {
                let s = delta[i] + ln_a[i * m + j];
                if s > best {
                    best = s;
                    best_i = i;
                }
            }
            back[k * m + j] = best_i;
            next[j] = best + emis.get(k, j);
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let (mut last, mut log_score) = (0, f64::NEG_INFINITY);
    for (j, &d) in delta.iter().enumerate() {
        if d > log_score {
            log_score = d;
            last = j;
        }
    }
    let mut states = vec![0; n];
    states[n - 1] = last;
    for k in (1..n).rev() {
        states[k - 1] = back[k * m + states[k]];
    }
    Ok(ViterbiPath { states, log_score })
}

/// Joint log-probability `ln Pr(y, q | λ)` of a given state path.
pub fn path_log_prob(params: &HmmParams, emis: &EmissionTable, states: &[usize]) -> Result<f64> {
    check_dims(params, emis)?;
    if states.len() != emis.n {
        return Err(Error::DimensionMismatch {
            expected: emis.n,
            actual: states.len(),
            context: "state path length",
        });
    }
    if let Some(&bad) = states.iter().find(|&&s| s >= emis.m) {
        return Err(invalid(format!("state index {bad} out of range")));
    }
    let mut lp = ln_or_neg_inf(params.pi.pi[states[0]]) + emis.get(0, states[0]);
    for k in 1..states.len() {
        lp += ln_or_neg_inf(params.a.get(states[k - 1], states[k])) + emis.get(k, states[k]);
    }
    Ok(lp)
}

/// Smoothed state and pairwise posteriors from log-space forward-backward.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    n: usize,
    m: usize,
    /// `N × M`, row-major.
    pub gamma: Vec<f64>,
    /// `(N-1) × M × M`, `xi[k][i][j] = Pr(q(k)=i, q(k+1)=j | y)`.
    pub xi: Vec<f64>,
    pub log_likelihood: f64,
}

impl Posteriors {
    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_states(&self) -> usize {
        self.m
    }

    pub fn gamma(&self, k: usize, j: usize) -> f64 {
        self.gamma[k * self.m + j]
    }

    pub fn xi(&self, k: usize, i: usize, j: usize) -> f64 {
        self.xi[(k * self.m + i) * self.m + j]
    }
}

pub fn posteriors(params: &HmmParams, emis: &EmissionTable) -> Result<Posteriors> {
    let (ll, alpha) = log_forward(params, emis)?;
    let (n, m) = (emis.n, emis.m);
    let ln_a = params.a.ln_entries();

    let mut beta = vec![0.0; n * m];
    let mut terms = vec![0.0; m];
    for k in (0..n.saturating_sub(1)).rev() {
        for i in 0..m {
            for j in 0..m {
                terms[j] = ln_a[i * m + j] + emis.get(k + 1, j) + beta[(k + 1) * m + j];
            }
            beta[k * m + i] = logsumexp(&terms);
        }
    }

    let mut gamma: Vec<f64> = alpha.iter().zip(&beta).map(|(a, b)| a + b).collect();
    for row in gamma.chunks_mut(m) {
        exp_normalize(row);
    }

    let mut xi = vec![0.0; n.saturating_sub(1) * m * m];
    for (k, slice) in xi.chunks_mut(m * m).enumerate() {
        for i in 0..m {
            for j in 0..m {
                slice[i * m + j] = alpha[k * m + i]
                    + ln_a[i * m + j]
                    + emis.get(k + 1, j)
                    + beta[(k + 1) * m + j];
            }
        }
        exp_normalize(slice);
    }

    Ok(Posteriors {
        n,
        m,
        gamma,
        xi,
        log_likelihood: ll,
    })
}

/// Baum-Welch re-estimation of `(A, π)` from posteriors.
///
/// A state that is never left (zero expected outgoing transitions) gets a
/// uniform row. `π` is floored at [`PI_FLOOR`] and renormalized.
pub fn baum_welch_update(post: &Posteriors) -> (TransitionMatrix, InitialDist) {
    let m = post.m;
    let mut counts = vec![0.0; m * m];
    for slice in post.xi.chunks(m * m) {
        for (c, x) in counts.iter_mut().zip(slice) {
            *c += x;
        }
    }
    for row in counts.chunks_mut(m) {
        let occupancy: f64 = row.iter().sum();
        if occupancy <= f64::MIN_POSITIVE {
            row.fill(1.0);
        }
    }
    let a = TransitionMatrix::from_weights(m, counts);
    let pi = InitialDist::from_weights(post.gamma[..m].iter().map(|&g| g.max(PI_FLOOR)).collect());
    (a, pi)
}

fn check_dims(params: &HmmParams, emis: &EmissionTable) -> Result<()> {
    if params.n_states() != emis.m {
        return Err(Error::DimensionMismatch {
            expected: params.n_states(),
            actual: emis.m,
            context: "emission table state count",
        });
    }
    Ok(())
}

fn check_variance(sigma2: f64) -> Result<()> {
    if sigma2.is_finite() && sigma2 > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("noise variance must be positive and finite, got {sigma2}")))
    }
}

fn check_simplex(p: &[f64]) -> std::result::Result<(), String> {
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err("entries must be finite and non-negative".into());
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL * p.len().max(1) as f64 {
        return Err(format!("entries sum to {s}, not 1"));
    }
    Ok(())
}

fn normalize_or_uniform(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if s > 0.0 && s.is_finite() {
        row.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / row.len() as f64;
        row.fill(u);
    }
}

/// In-place `x ↦ exp(x - logsumexp(x))`.
fn exp_normalize(row: &mut [f64]) {
    let lse = logsumexp(row);
    if lse.is_finite() {
        row.iter_mut().for_each(|x| *x = (*x - lse).exp());
        normalize_or_uniform(row);
    } else {
        let u = 1.0 / row.len() as f64;
        row.fill(u);
    }
}
