//! Closed-form coordinate updates of the coefficient matrix for a fixed
//! scheduling path, and residual-variance re-estimation.
//!
//! For entry `(v, w)` the regressor is `η(k) = p(k)^(d-v) · φ_w(k)` (0-based
//! `v`), and the minimizer of `J = Σ (y - basisᵀ H φ)²` over that entry alone is
//!
//! ```text
//! h*_vw = Σ η(k) (y(k) - basisᵀ H⁻ φ(k)) / Σ η(k)²
//! ```
//!
//! where `H⁻` is `H` with only entry `(v, w)` zeroed.

use crate::error::{Error, Result};
use crate::model::{basis_vector, regressor_matrix, CoeffMatrix, Dataset};

/// Lower bound returned by [`estimate_sigma2`].
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Design quantities for a dataset conditioned on a scheduling path.
#[derive(Debug, Clone)]
pub struct FitContext {
    degree: usize,
    n_taps: usize,
    y: Vec<f64>,
    /// `N × (d+1)` powers `[p^d … 1]`.
    basis: Vec<f64>,
    /// `N × n_taps` regressors.
    phi: Vec<f64>,
}

impl FitContext {
    pub fn new(data: &Dataset, path: &[f64], degree: usize, n_taps: usize) -> Result<Self> {
        if path.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                actual: path.len(),
                context: "scheduling path length",
            });
        }
        if n_taps == 0 {
            return Err(crate::error::invalid("at least one tap is required"));
        }
        let mut basis = Vec::with_capacity(path.len() * (degree + 1));
        for &p in path {
            basis.extend(basis_vector(p, degree)?);
        }
        Ok(Self {
            degree,
            n_taps,
            y: data.y.clone(),
            basis,
            phi: regressor_matrix(&data.u, n_taps),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_taps(&self) -> usize {
        self.n_taps
    }

    fn basis_row(&self, k: usize) -> &[f64] {
        let r = self.degree + 1;
        &self.basis[k * r..(k + 1) * r]
    }

    fn phi_row(&self, k: usize) -> &[f64] {
        &self.phi[k * self.n_taps..(k + 1) * self.n_taps]
    }

    #[inline]
    fn eta(&self, k: usize, v: usize, w: usize) -> f64 {
        self.basis_row(k)[v] * self.phi_row(k)[w]
    }

    fn mean(&self, h: &CoeffMatrix, k: usize) -> f64 {
        let phi = self.phi_row(k);
        self.basis_row(k)
            .iter()
            .enumerate()
            .map(|(v, b)| {
                b * (0..self.n_taps).map(|w| h.get(v, w) * phi[w]).sum::<f64>()
            })
            .sum()
    }

    /// Model output `basis(p(k))ᵀ H φ(k)` for every sample.
    pub fn predict(&self, h: &CoeffMatrix) -> Result<Vec<f64>> {
        self.check(h)?;
        Ok((0..self.len()).map(|k| self.mean(h, k)).collect())
    }

    fn residuals(&self, h: &CoeffMatrix) -> Vec<f64> {
        (0..self.len()).map(|k| self.y[k] - self.mean(h, k)).collect()
    }

    fn check(&self, h: &CoeffMatrix) -> Result<()> {
        if h.degree() != self.degree || h.n_taps() != self.n_taps {
            return Err(Error::DimensionMismatch {
                expected: (self.degree + 1) * self.n_taps,
                actual: h.entries().len(),
                context: "coefficient matrix shape",
            });
        }
        Ok(())
    }
}

/// `J(H) = Σ_k (y(k) - basisᵀ H φ(k))²`.
pub fn objective_j(h: &CoeffMatrix, ctx: &FitContext) -> Result<f64> {
    ctx.check(h)?;
    Ok(ctx.residuals(h).iter().map(|r| r * r).sum())
}

/// Outcome of a single-entry update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryUpdate {
    pub value: f64,
    /// The entry's regressor is identically zero; `value` is the old entry.
    pub degenerate: bool,
}

/// Exact minimizer of `J` over entry `(v, w)` with every other entry fixed.
pub fn update_entry(h: &CoeffMatrix, v: usize, w: usize, ctx: &FitContext) -> Result<EntryUpdate> {
    ctx.check(h)?;
    if v > ctx.degree || w >= ctx.n_taps {
        return Err(crate::error::invalid(format!("entry ({v}, {w}) out of range")));
    }
    let h_vw = h.get(v, w);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..ctx.len() {
        let eta = ctx.eta(k, v, w);
        // basisᵀ H⁻ φ = full mean minus the (v, w) contribution
        let partial = ctx.mean(h, k) - h_vw * eta;
        num += eta * (ctx.y[k] - partial);
        den += eta * eta;
    }
    Ok(solve_entry(num, den, h_vw))
}

fn solve_entry(num: f64, den: f64, old: f64) -> EntryUpdate {
    if den > f64::MIN_POSITIVE && den.is_finite() {
        EntryUpdate {
            value: num / den,
            degenerate: false,
        }
    } else {
        EntryUpdate {
            value: old,
            degenerate: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub coeffs: CoeffMatrix,
    /// Entries whose regressor vanished on this path and were left unchanged.
    pub degenerate: Vec<(usize, usize)>,
    /// `J` after each single-entry update, tracked incrementally.
    pub objective_trace: Vec<f64>,
}

/// Gauss-Seidel sweeps of [`update_entry`] over all entries in row-major order.
pub fn sweep_h(h: &CoeffMatrix, ctx: &FitContext, n_sweeps: usize) -> Result<SweepReport> {
    ctx.check(h)?;
    if n_sweeps == 0 {
        return Err(crate::error::invalid("at least one sweep is required"));
    }
    let mut coeffs = h.clone();
    let mut resid = ctx.residuals(&coeffs);
    let mut j_cur: f64 = resid.iter().map(|r| r * r).sum();
    let mut degenerate = Vec::new();
    let mut trace = Vec::with_capacity(n_sweeps * h.entries().len());
    let n = ctx.len();
    let mut eta = vec![0.0; n];

    for _ in 0..n_sweeps {
        for v in 0..=ctx.degree {
            for w in 0..ctx.n_taps {
                let old = coeffs.get(v, w);
                let (mut num, mut den) = (0.0, 0.0);
                for k in 0..n {
                    let e = ctx.eta(k, v, w);
                    eta[k] = e;
                    // resid + old·η is the residual against H⁻
                    num += e * (resid[k] + old * e);
                    den += e * e;
                }
                let upd = solve_entry(num, den, old);
                if upd.degenerate {
                    if !degenerate.contains(&(v, w)) {
                        degenerate.push((v, w));
                    }
                } else {
                    let delta = upd.value - old;
                    if delta != 0.0 {
                        coeffs.set(v, w, upd.value);
                        for k in 0..n {
                            resid[k] -= delta * eta[k];
                        }
                        j_cur = resid.iter().map(|r| r * r).sum();
                    }
                }
                trace.push(j_cur);
            }
        }
    }
    Ok(SweepReport {
        coeffs,
        degenerate,
        objective_trace: trace,
    })
}

/// Maximum-likelihood residual variance `J/N`, floored at [`SIGMA2_FLOOR`].
pub fn estimate_sigma2(h: &CoeffMatrix, ctx: &FitContext) -> Result<f64> {
    if ctx.is_empty() {
        return Err(crate::error::invalid("cannot estimate variance from zero samples"));
    }
    Ok((objective_j(h, ctx)? / ctx.len() as f64).max(SIGMA2_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_from(u: &[f64], y: &[f64], p: &[f64], d: usize, ng: usize) -> FitContext {
        let data = Dataset::new(u.to_vec(), y.to_vec()).unwrap();
        FitContext::new(&data, p, d, ng).unwrap()
    }

    #[test]
    fn objective_with_zero_matrix_is_output_energy() {
        let ctx = ctx_from(&[1.0, 2.0, 3.0], &[0.5, -1.0, 2.0], &[0.1, 0.2, 0.3], 2, 2);
        let j = objective_j(&CoeffMatrix::zeros(2, 2), &ctx).unwrap();
        assert!((j - 5.25).abs() < 1e-15);
        assert!(objective_j(&CoeffMatrix::zeros(1, 2), &ctx).is_err());
    }

    #[test]
    fn scalar_gain_is_ordinary_least_squares() {
        let u = [1.0, -2.0, 0.5, 3.0];
        let y = [2.1, -3.9, 1.2, 6.3];
        let ctx = ctx_from(&u, &y, &[0.4; 4], 0, 1);
        let upd = update_entry(&CoeffMatrix::zeros(0, 1), 0, 0, &ctx).unwrap();
        let ols = u.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
            / u.iter().map(|a| a * a).sum::<f64>();
        assert!(!upd.degenerate);
        assert!((upd.value - ols).abs() < 1e-14);
    }

    #[test]
    fn zero_regressor_is_flagged() {
        // p = 0 everywhere kills every non-constant row
        let ctx = ctx_from(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], &[0.0; 3], 1, 1);
        let mut h = CoeffMatrix::zeros(1, 1);
        h.set(0, 0, 0.75);
        let upd = update_entry(&h, 0, 0, &ctx).unwrap();
        assert!(upd.degenerate);
        assert_eq!(upd.value, 0.75);
        let rep = sweep_h(&h, &ctx, 2).unwrap();
        assert_eq!(rep.degenerate, vec![(0, 0)]);
        assert_eq!(rep.coeffs.get(0, 0), 0.75);
    }

    #[test]
    fn sigma2_examples() {
        let ctx = ctx_from(&[1.0, 1.0], &[2.0, 2.0], &[0.5, 0.5], 0, 1);
        let mut h = CoeffMatrix::zeros(0, 1);
        h.set(0, 0, 2.0);
        assert_eq!(estimate_sigma2(&h, &ctx).unwrap(), SIGMA2_FLOOR);
        h.set(0, 0, 1.5);
        assert!((estimate_sigma2(&h, &ctx).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_sweeps_rejected() {
        let ctx = ctx_from(&[1.0], &[1.0], &[0.5], 0, 1);
        assert!(sweep_h(&CoeffMatrix::zeros(0, 1), &ctx, 0).is_err());
    }
}
