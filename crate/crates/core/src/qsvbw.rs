//! Quasi-static alternation of Viterbi decoding, Baum-Welch chain updates and
//! closed-form coefficient updates.
//!
//! One iteration:
//! 1. decode the scheduling path with Viterbi under the current `(H, A, π, σ²)`;
//! 2. re-estimate `(A, π)` from forward-backward posteriors, then sweep the
//!    entries of `H` with the decoded path held fixed, then re-estimate `σ²`;
//! 3. record the complete-data log-likelihood of the decoded path under the
//!    updated parameters and stop once its relative gain drops below the
//!    tolerance.
//!
//! The chain update is safeguarded: when the Baum-Welch estimate would lower
//! the complete-data likelihood of the decoded path, it is blended back
//! towards the previous chain until it does not. With that, every step
//! weakly increases the recorded likelihood and the trace is monotone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{estimate_sigma2, objective_j, sweep_h, FitContext, SIGMA2_FLOOR};
use crate::eval::{agreement, bfr, split, Score};
use crate::hmm::{
    baum_welch_update, emission_table, posteriors, viterbi, EmissionTable, HmmParams, InitialDist,
    TransitionMatrix,
};
use crate::math::{ln_or_neg_inf, logsumexp, mean};
use crate::model::{state_means, CoeffMatrix, Dataset, SchedulingGrid};
use crate::pso::{init_objective, pso_search, SwarmConfig};

/// Number of halvings tried when blending a chain update back towards the
/// previous chain.
const MAX_CHAIN_BACKTRACKS: usize = 30;

/// Labelling convention that fixes the direction of the scheduling axis.
///
/// Reading every grid level mirrored (`p ↦ p_min + p_max - p`) and mirroring
/// the coefficient polynomials accordingly reproduces the same input-output
/// behaviour on a symmetric grid, so the data alone cannot tell the two
/// apart. The convention compares the output power the model predicts at the
/// lowest and the highest level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Keep whatever direction the search lands on.
    #[default]
    None,
    /// The highest level produces at least as much output power as the lowest.
    GainIncreasing,
    /// The lowest level produces at least as much output power as the highest.
    GainDecreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QsvbwConfig {
    pub grid: SchedulingGrid,
    pub n_taps: usize,
    pub degree_candidates: Vec<usize>,
    pub max_iters: usize,
    pub loglik_rel_tol: f64,
    pub sweeps_per_iter: usize,
    pub swarm: SwarmConfig,
    pub seed: u64,
    /// Independent initializations per fit; the best final likelihood wins.
    pub restarts: usize,
    /// Entrywise floor on re-estimated transition probabilities.
    pub transition_floor: f64,
    pub orientation: Orientation,
    /// Share of the data used for fitting during degree selection.
    pub cv_train_fraction: f64,
    /// Iteration cap for the fits run during degree selection.
    pub cv_max_iters: usize,
}

impl Default for QsvbwConfig {
    fn default() -> Self {
        Self {
            grid: SchedulingGrid::benchmark(),
            n_taps: 5,
            degree_candidates: vec![2, 3, 4, 5],
            max_iters: 200,
            loglik_rel_tol: 1e-6,
            sweeps_per_iter: 1,
            swarm: SwarmConfig::default(),
            seed: 0,
            restarts: 1,
            transition_floor: 1e-6,
            orientation: Orientation::None,
            cv_train_fraction: 0.7,
            cv_max_iters: 30,
        }
    }
}

impl QsvbwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_taps == 0 {
            return Err(invalid("n_taps must be at least 1"));
        }
        if self.degree_candidates.is_empty() {
            return Err(invalid("degree_candidates must not be empty"));
        }
        if self.max_iters == 0 || self.cv_max_iters == 0 {
            return Err(invalid("iteration caps must be at least 1"));
        }
        if !(self.loglik_rel_tol > 0.0 && self.loglik_rel_tol.is_finite()) {
            return Err(invalid("loglik_rel_tol must be positive"));
        }
        if self.sweeps_per_iter == 0 || self.restarts == 0 {
            return Err(invalid("sweeps_per_iter and restarts must be at least 1"));
        }
        if !(0.0..=1.0 / self.grid.len() as f64).contains(&self.transition_floor) {
            return Err(invalid("transition_floor must lie in [0, 1/M]"));
        }
        if !(self.cv_train_fraction > 0.0 && self.cv_train_fraction < 1.0) {
            return Err(invalid("cv_train_fraction must lie in (0, 1)"));
        }
        self.swarm.validate()
    }
}

/// Coefficients plus hidden-layer parameters: everything needed to decode a
/// new record.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedModel {
    pub coeffs: CoeffMatrix,
    pub hmm: HmmParams,
    pub grid: SchedulingGrid,
}

/// Scheduling path decoded from a record together with the implied output.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub states: Vec<usize>,
    pub path: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub log_score: f64,
}

impl IdentifiedModel {
    /// Per-state means and emission table for samples `start..N`. Regressors
    /// use the whole input record, so samples right after `start` see their
    /// true input history.
    fn emissions(&self, data: &Dataset, start: usize) -> Result<(Vec<f64>, EmissionTable)> {
        if start >= data.len() {
            return Err(invalid(format!(
                "segment start {start} out of range for a record of length {}",
                data.len()
            )));
        }
        let m = self.grid.len();
        let means = state_means(&self.coeffs, &self.grid, &data.u).split_off(start * m);
        let emis = EmissionTable::from_means(&means, &data.y[start..], self.hmm.sigma2())?;
        Ok((means, emis))
    }

    /// Viterbi decoding under the identified chain.
    pub fn decode(&self, data: &Dataset) -> Result<Decoded> {
        self.decode_with(&self.hmm, data, 0)
    }

    /// Viterbi decoding of a record that starts at an arbitrary point of the
    /// chain: the fitted initial distribution is replaced by a uniform one.
    pub fn decode_fresh(&self, data: &Dataset) -> Result<Decoded> {
        self.decode_from(data, 0)
    }

    /// Like [`decode_fresh`](Self::decode_fresh) for the samples `start..N`
    /// only, with regressors built from the full input record.
    pub fn decode_from(&self, data: &Dataset, start: usize) -> Result<Decoded> {
        let m = self.grid.len();
        let hmm = HmmParams::new(self.hmm.a.clone(), InitialDist::uniform(m), self.hmm.sigma2())?;
        self.decode_with(&hmm, data, start)
    }

    fn decode_with(&self, hmm: &HmmParams, data: &Dataset, start: usize) -> Result<Decoded> {
        let m = self.grid.len();
        let (means, emis) = self.emissions(data, start)?;
        let v = viterbi(hmm, &emis)?;
        let y_hat = v.states.iter().enumerate().map(|(k, &j)| means[k * m + j]).collect();
        Ok(Decoded {
            path: self.grid.values_of(&v.states),
            states: v.states,
            y_hat,
            log_score: v.log_score,
        })
    }

    /// One-step-ahead predicted output: the expected `μ_j(k)` under
    /// `Pr(q(k) = j | y(1..k-1))`, starting from a uniform state belief.
    pub fn predict_one_step(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.predict_one_step_from(data, 0)
    }

    /// One-step-ahead prediction of the samples `start..N`; the state belief
    /// starts uniform at `start`.
    pub fn predict_one_step_from(&self, data: &Dataset, start: usize) -> Result<Vec<f64>> {
        let m = self.grid.len();
        let (means, emis) = self.emissions(data, start)?;
        let ln_a = self.hmm.a.ln_entries();
        let mut log_pred = vec![-(m as f64).ln(); m];
        let mut log_post = vec![0.0; m];
        let mut terms = vec![0.0; m];
        let n = emis.n_samples();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let lse = logsumexp(&log_pred);
            let yk: f64 = (0..m)
                .map(|j| (log_pred[j] - lse).exp() * means[k * m + j])
                .sum();
            out.push(yk);
            for j in 0..m {
                log_post[j] = log_pred[j] + emis.get(k, j);
            }
            let z = logsumexp(&log_post);
            if !z.is_finite() {
                log_post.fill(-(m as f64).ln());
            } else {
                log_post.iter_mut().for_each(|x| *x -= z);
            }
            for j in 0..m {
                for i in 0..m {
                    terms[i] = log_post[i] + ln_a[i * m + j];
                }
                log_pred[j] = logsumexp(&terms);
            }
        }
        Ok(out)
    }

    /// Scores a record: output fit of the decoded output against the measured
    /// output, and against `y_reference` (the noise-free output) when given;
    /// scheduling fit when the record carries its true path.
    pub fn score(&self, data: &Dataset, y_reference: Option<&[f64]>) -> Result<Score> {
        self.score_from(data, 0, y_reference)
    }

    /// Scores the samples `start..N` of a record, decoded with
    /// [`decode_from`](Self::decode_from). `y_reference` covers the same samples.
    pub fn score_from(&self, data: &Dataset, start: usize, y_reference: Option<&[f64]>) -> Result<Score> {
        let dec = self.decode_from(data, start)?;
        let y = &data.y[start..];
        let bfr_output = bfr(y, &dec.y_hat)?;
        let bfr_output_noise_free = y_reference.map(|r| bfr(r, &dec.y_hat)).transpose()?;
        let (bfr_scheduling, state_accuracy) = match &data.p_true {
            Some(p) => {
                let p = &p[start..];
                (Some(bfr(p, &dec.path)?), Some(agreement(p, &dec.path)))
            }
            None => (None, None),
        };
        Ok(Score {
            bfr_output,
            bfr_output_noise_free,
            bfr_scheduling,
            snr_db: None,
            state_accuracy,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeScore {
    pub degree: usize,
    /// One-step-ahead output best-fit rate on the validation part.
    pub validation_bfr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsvbwResult {
    pub model: IdentifiedModel,
    pub states: Vec<usize>,
    pub path: Vec<f64>,
    /// Complete-data log-likelihood after each iteration.
    pub loglik_trace: Vec<f64>,
    pub chosen_degree: usize,
    pub iterations_run: usize,
    pub n_taps: usize,
    /// Validation scores per candidate; empty when only one degree was offered.
    pub degree_scores: Vec<DegreeScore>,
}

impl QsvbwResult {
    pub fn coeffs(&self) -> &CoeffMatrix {
        &self.model.coeffs
    }

    pub fn hmm(&self) -> &HmmParams {
        &self.model.hmm
    }
}

/// Picks the polynomial degree with the best one-step-ahead validation fit.
///
/// Candidates are fitted on the leading `cv_train_fraction` of the record with
/// at most `cv_max_iters` iterations each; ties go to the smaller degree.
pub fn select_degree(data: &Dataset, cfg: &QsvbwConfig) -> Result<(usize, Vec<DegreeScore>)> {
    cfg.validate()?;
    let mut candidates = cfg.degree_candidates.clone();
    candidates.sort_unstable();
    candidates.dedup();
    if candidates.len() == 1 {
        return Ok((candidates[0], Vec::new()));
    }
    let n_fit = ((data.len() as f64) * cfg.cv_train_fraction).round() as usize;
    let n_fit = n_fit.clamp(cfg.n_taps.max(1), data.len().saturating_sub(2));
    if n_fit < cfg.n_taps || data.len() - n_fit < 2 {
        return Err(invalid("record too short for degree selection"));
    }
    let (fit_part, _) = split(data, n_fit)?;

    let scores: Vec<Result<DegreeScore>> = candidates
        .par_iter()
        .map(|&d| {
            let fit = fit_degree(&fit_part, cfg, d, cfg.cv_max_iters)?;
            let pred = fit.model.predict_one_step_from(data, n_fit)?;
            let score = bfr(&data.y[n_fit..], &pred).unwrap_or(0.0);
            log::debug!("degree {d}: validation BFR {score:.3}");
            Ok(DegreeScore {
                degree: d,
                validation_bfr: score,
            })
        })
        .collect();
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;

    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.validation_bfr > best.validation_bfr {
            best = s;
        }
    }
    Ok((best.degree, scores))
}

/// Full identification: degree selection (when several candidates are
/// offered), swarm initialization and the alternating loop.
pub fn run(data: &Dataset, cfg: &QsvbwConfig) -> Result<QsvbwResult> {
    cfg.validate()?;
    check_data(data, cfg)?;
    let (degree, degree_scores) = select_degree(data, cfg)?;
    let mut result = fit_degree(data, cfg, degree, cfg.max_iters)?;
    result.degree_scores = degree_scores;
    Ok(result)
}

/// Fits one polynomial degree, keeping the best of `cfg.restarts` runs.
pub fn fit_degree(data: &Dataset, cfg: &QsvbwConfig, degree: usize, max_iters: usize) -> Result<QsvbwResult> {
    cfg.validate()?;
    check_data(data, cfg)?;
    let fits: Vec<Result<QsvbwResult>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, &[cfg.swarm.seed, degree as u64, r as u64]);
            fit_once(data, cfg, degree, max_iters, seed)
        })
        .collect();
    let mut best: Option<QsvbwResult> = None;
    for fit in fits {
        let fit = fit?;
        let better = match &best {
            None => true,
            Some(b) => final_loglik(&fit) > final_loglik(b),
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn final_loglik(r: &QsvbwResult) -> f64 {
    r.loglik_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
}

fn check_data(data: &Dataset, cfg: &QsvbwConfig) -> Result<()> {
    if data.len() < cfg.n_taps {
        return Err(invalid(format!(
            "record has {} samples but the model has {} taps",
            data.len(),
            cfg.n_taps
        )));
    }
    if data.u.iter().all(|&u| u == 0.0) {
        return Err(Error::Unidentifiable("the input is identically zero".into()));
    }
    Ok(())
}

/// SplitMix64-style mixing of a base seed with stream identifiers.
pub(crate) fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// `ln π_{q(1)} + Σ ln a_{q(k-1) q(k)}`.
fn chain_log_prob(a: &TransitionMatrix, pi: &InitialDist, states: &[usize]) -> f64 {
    let mut lp = ln_or_neg_inf(pi.probs()[states[0]]);
    for w in states.windows(2) {
        lp += ln_or_neg_inf(a.get(w[0], w[1]));
    }
    lp
}

/// Mean output power predicted at the lowest and highest grid level.
fn endpoint_powers(h: &CoeffMatrix, grid: &SchedulingGrid, u: &[f64]) -> (f64, f64) {
    let m = grid.len();
    let means = state_means(h, grid, u);
    let n = u.len() as f64;
    let lo = means.chunks(m).map(|r| r[0] * r[0]).sum::<f64>() / n;
    let hi = means.chunks(m).map(|r| r[m - 1] * r[m - 1]).sum::<f64>() / n;
    (lo, hi)
}

fn needs_flip(orientation: Orientation, h: &CoeffMatrix, grid: &SchedulingGrid, u: &[f64]) -> bool {
    let (lo, hi) = endpoint_powers(h, grid, u);
    match orientation {
        Orientation::None => false,
        Orientation::GainIncreasing => lo > hi,
        Orientation::GainDecreasing => hi > lo,
    }
}

fn mirror_center(grid: &SchedulingGrid) -> f64 {
    grid.value(0) + grid.value(grid.len() - 1)
}

fn fit_once(data: &Dataset, cfg: &QsvbwConfig, degree: usize, max_iters: usize, seed: u64) -> Result<QsvbwResult> {
    let grid = &cfg.grid;
    let n = data.len();

    // Initialization: swarm search for H, uniform chain, output variance for σ².
    let objective = init_objective(data, grid, degree, cfg.n_taps)?;
    let swarm = SwarmConfig {
        seed,
        ..cfg.swarm.clone()
    };
    let mut h = pso_search(|h| objective.value(h), degree, cfg.n_taps, &swarm)?;
    if needs_flip(cfg.orientation, &h, grid, &data.u) {
        h = h.reflected(mirror_center(grid));
    }
    let ybar = mean(&data.y);
    let var_y = data.y.iter().map(|y| (y - ybar).powi(2)).sum::<f64>() / n as f64;
    let hmm = HmmParams::uniform(grid.len(), var_y.max(SIGMA2_FLOOR))?;
    refine(data, cfg, h, hmm, max_iters)
}

/// Runs the alternating loop from a given starting point. The degree is that
/// of `h`; `hmm` must have one state per grid level.
pub fn refine(
    data: &Dataset,
    cfg: &QsvbwConfig,
    mut h: CoeffMatrix,
    mut hmm: HmmParams,
    max_iters: usize,
) -> Result<QsvbwResult> {
    check_data(data, cfg)?;
    let grid = &cfg.grid;
    let m = grid.len();
    let n = data.len();
    let degree = h.degree();
    if h.n_taps() != cfg.n_taps {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_taps,
            actual: h.n_taps(),
            context: "coefficient taps",
        });
    }
    if hmm.n_states() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: hmm.n_states(),
            context: "chain states",
        });
    }
    if max_iters == 0 {
        return Err(invalid("max_iters must be at least 1"));
    }

    let mut trace: Vec<f64> = Vec::new();
    let mut states = Vec::new();
    for iter in 0..max_iters {
        // Viterbi path under the current parameters.
        let emis = emission_table(&h, grid, data, hmm.sigma2())?;
        let decoded = viterbi(&hmm, &emis)?;
        states = decoded.states;

        // Chain update from posteriors, safeguarded on the decoded path.
        let post = posteriors(&hmm, &emis)?;
        let (a_bw, pi_bw) = baum_welch_update(&post);
        let a_bw = if cfg.transition_floor > 0.0 {
            a_bw.floored(cfg.transition_floor)
        } else {
            a_bw
        };
        let (a_new, pi_new) = safeguarded_chain(&hmm, a_bw, pi_bw, &states);

        // Coefficients and variance given the decoded path.
        let path = grid.values_of(&states);
        let ctx = FitContext::new(data, &path, degree, cfg.n_taps)?;
        let sweep = sweep_h(&h, &ctx, cfg.sweeps_per_iter)?;
        if !sweep.degenerate.is_empty() {
            log::trace!("iteration {iter}: degenerate entries {:?}", sweep.degenerate);
        }
        h = sweep.coeffs;
        let sigma2 = estimate_sigma2(&h, &ctx)?;
        hmm = HmmParams::new(a_new, pi_new, sigma2)?;

        let j = objective_j(&h, &ctx)?;
        let ll = chain_log_prob(&hmm.a, &hmm.pi, &states)
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln()
            - j / (2.0 * sigma2);
        let prev = trace.last().copied();
        trace.push(ll);
        log::trace!("iteration {iter}: loglik {ll:.6}, sigma2 {sigma2:.3e}");
        if let Some(prev) = prev {
            if (ll - prev) / prev.abs().max(f64::MIN_POSITIVE) < cfg.loglik_rel_tol {
                break;
            }
        }
    }

    let mut model = IdentifiedModel {
        coeffs: h,
        hmm,
        grid: grid.clone(),
    };
    if needs_flip(cfg.orientation, &model.coeffs, grid, &data.u) {
        model.coeffs = model.coeffs.reflected(mirror_center(grid));
        model.hmm = HmmParams::new(
            model.hmm.a.reversed_labels(),
            model.hmm.pi.reversed_labels(),
            model.hmm.sigma2(),
        )?;
        states.iter_mut().for_each(|s| *s = m - 1 - *s);
    }

    Ok(QsvbwResult {
        path: grid.values_of(&states),
        states,
        iterations_run: trace.len(),
        loglik_trace: trace,
        chosen_degree: degree,
        n_taps: cfg.n_taps,
        model,
        degree_scores: Vec::new(),
    })
}

/// Baum-Welch chain step, blended back towards the current chain until it no
/// longer lowers the chain log-probability of the decoded path.
fn safeguarded_chain(
    hmm: &HmmParams,
    a_bw: TransitionMatrix,
    pi_bw: InitialDist,
    states: &[usize],
) -> (TransitionMatrix, InitialDist) {
    let base = chain_log_prob(&hmm.a, &hmm.pi, states);
    if chain_log_prob(&a_bw, &pi_bw, states) >= base {
        return (a_bw, pi_bw);
    }
    let mut t = 0.5;
    for _ in 0..MAX_CHAIN_BACKTRACKS {
        let a = hmm.a.blend(&a_bw, t);
        let pi = hmm.pi.blend(&pi_bw, t);
        if chain_log_prob(&a, &pi, states) >= base {
            return (a, pi);
        }
        t *= 0.5;
    }
    (hmm.a.clone(), hmm.pi.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(QsvbwConfig::default().validate().is_ok());
        let bad = [
            QsvbwConfig { max_iters: 0, ..Default::default() },
            QsvbwConfig { loglik_rel_tol: 0.0, ..Default::default() },
            QsvbwConfig { degree_candidates: vec![], ..Default::default() },
            QsvbwConfig { transition_floor: 0.5, ..Default::default() },
            QsvbwConfig { restarts: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn config_json_defaults_fill_in() {
        let cfg: QsvbwConfig = serde_json::from_str(r#"{"max_iters": 3, "orientation": "gain_increasing"}"#).unwrap();
        assert_eq!(cfg.max_iters, 3);
        assert_eq!(cfg.orientation, Orientation::GainIncreasing);
        assert_eq!(cfg.n_taps, 5);
        assert_eq!(cfg.grid, SchedulingGrid::benchmark());
    }

    #[test]
    fn all_zero_input_is_unidentifiable() {
        let data = Dataset::new(vec![0.0; 20], vec![0.1; 20]).unwrap();
        let cfg = QsvbwConfig { degree_candidates: vec![1], ..Default::default() };
        assert!(matches!(run(&data, &cfg), Err(Error::Unidentifiable(_))));
        let short = Dataset::new(vec![1.0; 3], vec![0.1; 3]).unwrap();
        assert!(run(&short, &cfg).is_err());
    }

    #[test]
    fn single_candidate_is_returned_unchanged() {
        let data = Dataset::new(vec![1.0; 10], vec![0.0; 10]).unwrap();
        let cfg = QsvbwConfig { degree_candidates: vec![3], ..Default::default() };
        assert_eq!(select_degree(&data, &cfg).unwrap(), (3, vec![]));
    }

    #[test]
    fn derived_seeds_differ_by_stream() {
        let a = derive_seed(1, &[0, 4, 0]);
        assert_ne!(a, derive_seed(1, &[0, 4, 1]));
        assert_ne!(a, derive_seed(2, &[0, 4, 0]));
        assert_eq!(a, derive_seed(1, &[0, 4, 0]));
    }

    #[test]
    fn safeguard_never_lowers_chain_probability() {
        let hmm = HmmParams::new(
            TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap(),
            InitialDist::new(vec![0.5, 0.5]).unwrap(),
            1.0,
        )
        .unwrap();
        let states = [0, 0, 0, 0, 1, 1, 1];
        // a candidate that hates staying put
        let a_bad = TransitionMatrix::from_rows(&[vec![0.1, 0.9], vec![0.9, 0.1]]).unwrap();
        let pi_bad = InitialDist::new(vec![0.01, 0.99]).unwrap();
        let (a, pi) = safeguarded_chain(&hmm, a_bad, pi_bad, &states);
        assert!(chain_log_prob(&a, &pi, &states) >= chain_log_prob(&hmm.a, &hmm.pi, &states));
    }
}
