//! LPV-FIR models with polynomial static dependence on the scheduling variable.
//!
//! The output at sample `k` is
//!
//! ```text
//! y(k) = Σ_i g_i(p(k)) · u(k - i) + e(k),     i = 0..n_taps
//! g_i(p) = h[0][i]·p^d + h[1][i]·p^(d-1) + … + h[d][i]
//! ```
//!
//! so that the noise-free mean is `basis(p)ᵀ · H · φ(k)` with
//! `basis(p) = [p^d, …, p, 1]` and `φ(k) = [u(k), u(k-1), …]`. Samples before
//! the start of the record are taken as zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance used when matching a scheduling value to a grid level.
pub const GRID_TOL: f64 = 1e-9;

/// Finite, strictly increasing set of admissible scheduling levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SchedulingGrid {
    values: Vec<f64>,
}

impl SchedulingGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid("scheduling grid needs at least two levels"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("scheduling grid levels must be finite"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("scheduling grid levels must be strictly increasing"));
        }
        Ok(Self { values })
    }

    /// `m` evenly spaced levels from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("scheduling grid needs at least two levels"));
        }
        let step = (hi - lo) / (m - 1) as f64;
        Self::new((0..m).map(|j| lo + step * j as f64).collect())
    }

    /// The levels {0.1, 0.2, …, 1.0} of the benchmark plant.
    pub fn benchmark() -> Self {
        Self {
            values: (1..=10).map(|j| j as f64 / 10.0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// Index of the level matching `p` within [`GRID_TOL`].
    pub fn index_of(&self, p: f64) -> Option<usize> {
        if !p.is_finite() {
            return None;
        }
        // Levels are sorted: locate the nearest by binary search.
        let pos = self.values.partition_point(|&v| v < p);
        [pos.checked_sub(1), Some(pos)]
            .into_iter()
            .flatten()
            .filter(|&j| j < self.values.len())
            .find(|&j| (self.values[j] - p).abs() <= GRID_TOL)
    }

    pub fn indices_of(&self, path: &[f64]) -> Result<Vec<usize>> {
        path.iter()
            .map(|&p| self.index_of(p).ok_or(Error::OffGrid { value: p }))
            .collect()
    }

    pub fn values_of(&self, states: &[usize]) -> Vec<f64> {
        states.iter().map(|&j| self.values[j]).collect()
    }
}

impl TryFrom<Vec<f64>> for SchedulingGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<SchedulingGrid> for Vec<f64> {
    fn from(grid: SchedulingGrid) -> Self {
        grid.values
    }
}

/// `(degree + 1) × n_taps` coefficient matrix `H`; column `i` holds the
/// polynomial coefficients of `g_i`, highest power first.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    degree: usize,
    n_taps: usize,
    entries: Vec<f64>,
}

impl CoeffMatrix {
    pub fn zeros(degree: usize, n_taps: usize) -> Self {
        Self {
            degree,
            n_taps,
            entries: vec![0.0; (degree + 1) * n_taps],
        }
    }

    /// Builds from a row-major flat buffer.
    pub fn from_flat(degree: usize, n_taps: usize, entries: Vec<f64>) -> Result<Self> {
        if n_taps == 0 {
            return Err(invalid("coefficient matrix needs at least one tap"));
        }
        let expected = (degree + 1) * n_taps;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: entries.len(),
                context: "coefficient matrix entries",
            });
        }
        if entries.iter().any(|h| !h.is_finite()) {
            return Err(invalid("coefficient matrix entries must be finite"));
        }
        Ok(Self {
            degree,
            n_taps,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(invalid("coefficient matrix needs at least one row"));
        };
        let n_taps = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n_taps) {
            return Err(Error::DimensionMismatch {
                expected: n_taps,
                actual: bad.len(),
                context: "coefficient matrix row length",
            });
        }
        Self::from_flat(rows.len() - 1, n_taps, rows.concat())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_taps(&self) -> usize {
        self.n_taps
    }

    pub fn n_rows(&self) -> usize {
        self.degree + 1
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, v: usize, w: usize) -> f64 {
        self.entries[v * self.n_taps + w]
    }

    pub fn set(&mut self, v: usize, w: usize, value: f64) {
        self.entries[v * self.n_taps + w] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n_taps).map(<[f64]>::to_vec).collect()
    }

    /// Coefficient values `[g_0(p), …, g_{n_taps-1}(p)] = basis(p)ᵀ H`.
    pub fn tap_gains(&self, p: f64) -> Vec<f64> {
        let mut gains = vec![0.0; self.n_taps];
        // Horner over rows, highest power first.
        for row in self.entries.chunks(self.n_taps) {
            for (g, h) in gains.iter_mut().zip(row) {
                *g = *g * p + h;
            }
        }
        gains
    }

    /// The matrix describing `p ↦ g(center - p)`, i.e. the same coefficient
    /// functions read on a mirrored scheduling axis.
    pub fn reflected(&self, center: f64) -> Self {
        let d = self.degree;
        let mut out = Self::zeros(d, self.n_taps);
        for l in 0..=d {
            let e = d - l;
            // (center - p)^e = Σ_m C(e, m) center^(e-m) (-p)^m
            let mut binom = 1.0;
            for m in 0..=e {
                if m > 0 {
                    binom = binom * (e - m + 1) as f64 / m as f64;
                }
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let factor = binom * center.powi((e - m) as i32) * sign;
                let row = d - m;
                for w in 0..self.n_taps {
                    let cur = out.get(row, w);
                    out.set(row, w, cur + factor * self.get(l, w));
                }
            }
        }
        out
    }
}

/// An identified (or true) LPV-FIR plant.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvFirModel {
    pub coeffs: CoeffMatrix,
    pub grid: SchedulingGrid,
    noise_std: f64,
}

impl LpvFirModel {
    pub fn new(coeffs: CoeffMatrix, grid: SchedulingGrid, noise_std: f64) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(invalid("noise standard deviation must be finite and non-negative"));
        }
        Ok(Self {
            coeffs,
            grid,
            noise_std,
        })
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Simulates the plant along a scheduling path. Deterministic for a
    /// fixed seed; with zero noise the seed has no effect.
    pub fn simulate(&self, u: &[f64], p: &[f64], seed: u64) -> Result<Dataset> {
        if u.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                actual: p.len(),
                context: "scheduling path length",
            });
        }
        let states = self.grid.indices_of(p)?;
        let gains: Vec<Vec<f64>> = self
            .grid
            .values()
            .iter()
            .map(|&pj| self.coeffs.tap_gains(pj))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = states
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let mean = fir_response(&gains[j], u, k);
                if self.noise_std > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mean + self.noise_std * z
                } else {
                    mean
                }
            })
            .collect();
        let mut data = Dataset::new(u.to_vec(), y)?;
        data.p_true = Some(p.to_vec());
        data.seed = Some(seed);
        Ok(data)
    }
}

/// Input/output record with optional ground-truth scheduling path.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub p_true: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(invalid("dataset must contain at least one sample"));
        }
        if u.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                actual: y.len(),
                context: "output length",
            });
        }
        if u.iter().chain(&y).any(|x| !x.is_finite()) {
            return Err(invalid("dataset samples must be finite"));
        }
        Ok(Self {
            u,
            y,
            p_true: None,
            seed: None,
        })
    }

    pub fn with_truth(mut self, p: Vec<f64>) -> Result<Self> {
        if p.len() != self.u.len() {
            return Err(Error::DimensionMismatch {
                expected: self.u.len(),
                actual: p.len(),
                context: "scheduling path length",
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(invalid("scheduling samples must be finite"));
        }
        self.p_true = Some(p);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// `[p^d, p^(d-1), …, p, 1]`.
pub fn basis_vector(p: f64, degree: usize) -> Result<Vec<f64>> {
    if !p.is_finite() {
        return Err(invalid(format!("scheduling value {p} is not finite")));
    }
    let mut out = vec![1.0; degree + 1];
    for j in (0..degree).rev() {
        out[j] = out[j + 1] * p;
    }
    Ok(out)
}

/// Regressor `[u(k), u(k-1), …, u(k-n_taps+1)]` for the 0-based sample `k`,
/// zero-padded before the first sample.
pub fn regressor(u: &[f64], k: usize, n_taps: usize) -> Result<Vec<f64>> {
    if k >= u.len() {
        return Err(invalid(format!(
            "sample index {k} out of range for a record of length {}",
            u.len()
        )));
    }
    Ok((0..n_taps)
        .map(|i| if i <= k { u[k - i] } else { 0.0 })
        .collect())
}

/// Row-major `N × n_taps` matrix of regressors.
pub fn regressor_matrix(u: &[f64], n_taps: usize) -> Vec<f64> {
    let mut out = vec![0.0; u.len() * n_taps];
    for k in 0..u.len() {
        for i in 0..n_taps.min(k + 1) {
            out[k * n_taps + i] = u[k - i];
        }
    }
    out
}

/// `basis(p)ᵀ · H · φ`.
pub fn mean_output(h: &CoeffMatrix, p: f64, phi: &[f64]) -> Result<f64> {
    if phi.len() != h.n_taps() {
        return Err(Error::DimensionMismatch {
            expected: h.n_taps(),
            actual: phi.len(),
            context: "regressor length",
        });
    }
    if !p.is_finite() {
        return Err(invalid(format!("scheduling value {p} is not finite")));
    }
    Ok(h.tap_gains(p).iter().zip(phi).map(|(g, x)| g * x).sum())
}

#[inline]
fn fir_response(gains: &[f64], u: &[f64], k: usize) -> f64 {
    gains
        .iter()
        .enumerate()
        .take(k + 1)
        .map(|(i, g)| g * u[k - i])
        .sum()
}

/// Row-major `N × M` table of `μ_j(k)`, the noise-free output at sample `k`
/// if the plant sat at grid level `j`.
pub fn state_means(h: &CoeffMatrix, grid: &SchedulingGrid, u: &[f64]) -> Vec<f64> {
    let m = grid.len();
    let gains: Vec<Vec<f64>> = grid.values().iter().map(|&p| h.tap_gains(p)).collect();
    let mut out = vec![0.0; u.len() * m];
    for k in 0..u.len() {
        for (j, g) in gains.iter().enumerate() {
            out[k * m + j] = fir_response(g, u, k);
        }
    }
    out
}

/// The five-tap plant used for the reference numerical study:
/// `g = (-exp p, 1 + p, atan p, -p, -sin p)`, driven by `u(k) = sin(2πk/9)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BenchmarkPlant;

impl BenchmarkPlant {
    pub const N_TAPS: usize = 5;

    pub fn gains(p: f64) -> [f64; 5] {
        [-p.exp(), 1.0 + p, p.atan(), -p, -p.sin()]
    }

    /// `u(k) = sin(2πk/9)` for the 1-based sample index `k = 1..=n`.
    pub fn input(n: usize) -> Vec<f64> {
        (1..=n)
            .map(|k| (2.0 * std::f64::consts::PI * k as f64 / 9.0).sin())
            .collect()
    }

    pub fn clean_output(u: &[f64], p: &[f64]) -> Vec<f64> {
        (0..u.len())
            .map(|k| fir_response(&Self::gains(p[k]), u, k))
            .collect()
    }

    /// Piecewise-constant path: segment lengths uniform in [10, 40] samples,
    /// levels uniform over the grid.
    pub fn scheduling_path<R: Rng>(n: usize, grid: &SchedulingGrid, rng: &mut R) -> Vec<f64> {
        let mut path = Vec::with_capacity(n);
        while path.len() < n {
            let dwell = rng.random_range(10..=40usize);
            let level = grid.value(rng.random_range(0..grid.len()));
            let take = dwell.min(n - path.len());
            path.extend(std::iter::repeat_n(level, take));
        }
        path
    }
}

/// Generates the benchmark record at the requested SNR.
///
/// The Gaussian noise draw is rescaled so that its realized power equals
/// `P_y / 10^(snr/10)` exactly, where `P_y` is the mean power of the
/// noise-free output.
pub fn benchmark_generator(n_samples: usize, snr_db: f64, seed: u64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(invalid("benchmark needs at least one sample"));
    }
    if !snr_db.is_finite() {
        return Err(invalid("SNR must be finite"));
    }
    let grid = SchedulingGrid::benchmark();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = BenchmarkPlant::input(n_samples);
    let p = BenchmarkPlant::scheduling_path(n_samples, &grid, &mut rng);
    let clean = BenchmarkPlant::clean_output(&u, &p);

    let p_y = clean.iter().map(|v| v * v).sum::<f64>() / n_samples as f64;
    let sigma2 = p_y / 10f64.powf(snr_db / 10.0);
    let z: Vec<f64> = (0..n_samples).map(|_| StandardNormal.sample(&mut rng)).collect();
    let z_power = z.iter().map(|v| v * v).sum::<f64>() / n_samples as f64;
    let scale = if z_power > 0.0 { (sigma2 / z_power).sqrt() } else { 0.0 };
    let y = clean.iter().zip(&z).map(|(c, e)| c + scale * e).collect();

    let mut data = Dataset::new(u, y)?.with_truth(p)?;
    data.seed = Some(seed);
    Ok(data)
}
