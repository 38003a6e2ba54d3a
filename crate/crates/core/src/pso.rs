//! Global-best particle swarm search used to seed the coefficient matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{regressor_matrix, CoeffMatrix, Dataset, SchedulingGrid};

/// Velocity limit as a fraction of the search interval width.
const VMAX_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub n_iters: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-entry search interval.
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            n_particles: 30,
            n_iters: 100,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            lower: -5.0,
            upper: 5.0,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(invalid("swarm needs at least two particles"));
        }
        if !(0.0..=1.0).contains(&self.inertia) {
            return Err(invalid("inertia must lie in [0, 1]"));
        }
        if !(self.cognitive > 0.0 && self.social > 0.0) {
            return Err(invalid("cognitive and social weights must be positive"));
        }
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(invalid("search bounds must be finite with lower < upper"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmOutcome {
    pub best_position: Vec<f64>,
    pub best_score: f64,
    /// Global-best score after initialization and after every iteration.
    pub history: Vec<f64>,
    pub particles: Vec<Particle>,
}

fn score_of(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

/// Minimizes `objective` over the box `[lower, upper]^dim`.
///
/// Objective evaluations within an iteration run in parallel; all random
/// draws come from one seeded stream in particle order, so the trajectory
/// does not depend on the thread count.
pub fn pso_minimize<F>(objective: F, dim: usize, cfg: &SwarmConfig) -> Result<SwarmOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if dim == 0 {
        return Err(invalid("search dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = (cfg.lower, cfg.upper);
    let vmax = VMAX_FRACTION * (hi - lo);

    let mut swarm: Vec<Particle> = (0..cfg.n_particles)
        .map(|_| {
            let position: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..hi)).collect();
            let velocity = (0..dim).map(|_| rng.random_range(-vmax..vmax)).collect();
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_score: f64::INFINITY,
            }
        })
        .collect();

    let evaluate = |swarm: &[Particle]| -> Vec<f64> {
        swarm
            .par_iter()
            .map(|p| score_of(objective(&p.position)))
            .collect()
    };

    let scores = evaluate(&swarm);
    for (p, s) in swarm.iter_mut().zip(scores) {
        p.best_score = s;
    }
    let (mut g_idx, mut g_score) = global_best(&swarm);
    let mut g_pos = swarm[g_idx].best_position.clone();
    let mut history = vec![g_score];

    for _ in 0..cfg.n_iters {
        for p in swarm.iter_mut() {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = cfg.inertia * p.velocity[d]
                    + cfg.cognitive * r1 * (p.best_position[d] - p.position[d])
                    + cfg.social * r2 * (g_pos[d] - p.position[d]);
                let v = v.clamp(-vmax, vmax);
                let x = p.position[d] + v;
                if x < lo || x > hi {
                    p.position[d] = x.clamp(lo, hi);
                    p.velocity[d] = 0.0;
                } else {
                    p.position[d] = x;
                    p.velocity[d] = v;
                }
            }
        }
        let scores = evaluate(&swarm);
        for (p, s) in swarm.iter_mut().zip(scores) {
            if s < p.best_score {
                p.best_score = s;
                p.best_position.clone_from(&p.position);
            }
        }
        let (idx, score) = global_best(&swarm);
        if score < g_score {
            g_idx = idx;
            g_score = score;
            g_pos.clone_from(&swarm[g_idx].best_position);
        }
        history.push(g_score);
    }

    Ok(SwarmOutcome {
        best_position: g_pos,
        best_score: g_score,
        history,
        particles: swarm,
    })
}

/// Lowest personal-best score; ties go to the lowest particle index.
fn global_best(swarm: &[Particle]) -> (usize, f64) {
    let mut best = (0, swarm[0].best_score);
    for (i, p) in swarm.iter().enumerate().skip(1) {
        if p.best_score < best.1 {
            best = (i, p.best_score);
        }
    }
    best
}

/// Swarm search over `(degree + 1) × n_taps` coefficient matrices.
pub fn pso_search<F>(objective: F, degree: usize, n_taps: usize, cfg: &SwarmConfig) -> Result<CoeffMatrix>
where
    F: Fn(&CoeffMatrix) -> f64 + Sync,
{
    let dim = (degree + 1) * n_taps;
    let outcome = pso_minimize(
        |x| match CoeffMatrix::from_flat(degree, n_taps, x.to_vec()) {
            Ok(h) => objective(&h),
            Err(_) => f64::INFINITY,
        },
        dim,
        cfg,
    )?;
    CoeffMatrix::from_flat(degree, n_taps, outcome.best_position)
}

/// Initialization objective: `J(H)` with every sample assigned to the grid
/// level whose predicted output is closest, independently per sample.
#[derive(Debug, Clone)]
pub struct NearestStateObjective {
    grid: SchedulingGrid,
    y: Vec<f64>,
    phi: Vec<f64>,
    degree: usize,
    n_taps: usize,
}

impl NearestStateObjective {
    pub fn value(&self, h: &CoeffMatrix) -> f64 {
        if h.degree() != self.degree || h.n_taps() != self.n_taps {
            return f64::INFINITY;
        }
        let gains: Vec<Vec<f64>> = self.grid.values().iter().map(|&p| h.tap_gains(p)).collect();
        self.y
            .iter()
            .zip(self.phi.chunks(self.n_taps))
            .map(|(&yk, phi)| {
                gains
                    .iter()
                    .map(|g| {
                        let r = yk - g.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
                        r * r
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    /// Per-sample nearest level (lowest index on ties).
    pub fn assignment(&self, h: &CoeffMatrix) -> Vec<usize> {
        let gains: Vec<Vec<f64>> = self.grid.values().iter().map(|&p| h.tap_gains(p)).collect();
        self.y
            .iter()
            .zip(self.phi.chunks(self.n_taps))
            .map(|(&yk, phi)| {
                let mut best = (0, f64::INFINITY);
                for (j, g) in gains.iter().enumerate() {
                    let r = yk - g.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
                    if r * r < best.1 {
                        best = (j, r * r);
                    }
                }
                best.0
            })
            .collect()
    }
}

pub fn init_objective(
    data: &Dataset,
    grid: &SchedulingGrid,
    degree: usize,
    n_taps: usize,
) -> Result<NearestStateObjective> {
    if n_taps == 0 {
        return Err(invalid("at least one tap is required"));
    }
    Ok(NearestStateObjective {
        grid: grid.clone(),
        y: data.y.clone(),
        phi: regressor_matrix(&data.u, n_taps),
        degree,
        n_taps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SwarmConfig::default().validate().is_ok());
        let bad = [
            SwarmConfig { n_particles: 1, ..Default::default() },
            SwarmConfig { inertia: 1.5, ..Default::default() },
            SwarmConfig { social: 0.0, ..Default::default() },
            SwarmConfig { lower: 1.0, upper: 1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn zero_iterations_returns_best_initial_particle() {
        let cfg = SwarmConfig { n_iters: 0, seed: 5, ..Default::default() };
        let out = pso_minimize(|x| x.iter().map(|v| v * v).sum(), 3, &cfg).unwrap();
        let best = out
            .particles
            .iter()
            .map(|p| p.best_score)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_score, best);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn nan_objective_never_wins() {
        let cfg = SwarmConfig { n_iters: 5, ..Default::default() };
        let out = pso_minimize(|x| if x[0] > 0.0 { f64::NAN } else { -x[0] }, 1, &cfg).unwrap();
        assert!(out.best_position[0] <= 0.0);
    }

    #[test]
    fn init_objective_examples() {
        let grid = SchedulingGrid::new(vec![0.0, 1.0]).unwrap();
        let data = Dataset::new(vec![1.0, 2.0, 1.0], vec![1.0, 4.0, 2.0]).unwrap();
        let obj = init_objective(&data, &grid, 1, 1).unwrap();
        assert_eq!(obj.value(&CoeffMatrix::zeros(1, 1)), 21.0);
        // g(p) = p + 1: level 0 → gain 1, level 1 → gain 2
        let h = CoeffMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(obj.assignment(&h), vec![0, 1, 1]);
        assert_eq!(obj.value(&h), 0.0);
        assert_eq!(obj.value(&CoeffMatrix::zeros(2, 1)), f64::INFINITY);
    }
}
