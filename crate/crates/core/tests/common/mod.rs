//! Shared helpers for the integration tests: random small HMM instances and
//! brute-force path enumeration.

#![allow(dead_code)]

use blpv::hmm::{EmissionTable, HmmParams, InitialDist, TransitionMatrix};
use blpv::math::logsumexp;
use rand::Rng;

pub struct Instance {
    pub params: HmmParams,
    pub emis: EmissionTable,
}

fn random_simplex<R: Rng>(rng: &mut R, m: usize, allow_zeros: bool) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..m)
            .map(|_| {
                if allow_zeros && rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random_range(0.05..1.0)
                }
            })
            .collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return w.iter().map(|x| x / s).collect();
        }
    }
}

/// Continuous-valued instance: ties have probability zero.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, m: usize) -> Instance {
    let a: Vec<f64> = (0..m).flat_map(|_| random_simplex(rng, m, true)).collect();
    let pi = random_simplex(rng, m, false);
    let log_b: Vec<f64> = (0..n * m).map(|_| rng.random_range(-5.0..-0.1)).collect();
    Instance {
        params: HmmParams::new(
            TransitionMatrix::new(m, a).unwrap(),
            InitialDist::new(pi).unwrap(),
            1.0,
        )
        .unwrap(),
        emis: EmissionTable::new(n, m, log_b).unwrap(),
    }
}

/// Instance built from a handful of exact values, so many paths tie.
pub fn tied_instance<R: Rng>(rng: &mut R, n: usize, m: usize) -> Instance {
    let levels = [0.5f64.ln(), 0.25f64.ln()];
    let log_b: Vec<f64> = (0..n * m).map(|_| levels[rng.random_range(0..2)]).collect();
    Instance {
        params: HmmParams::uniform(m, 1.0).unwrap(),
        emis: EmissionTable::new(n, m, log_b).unwrap(),
    }
}

/// Every state path of length `n` over `m` states, with its joint log-probability,
/// accumulated in the same order as the Viterbi recursion.
pub fn enumerate_paths(inst: &Instance) -> Vec<(Vec<usize>, f64)> {
    let (n, m) = (inst.emis.n_samples(), inst.emis.n_states());
    let total = m.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut path = vec![0usize; n];
        let mut c = code;
        for q in path.iter_mut() {
            *q = c % m;
            c /= m;
        }
        let mut lp = inst.params.pi.probs()[path[0]].ln() + inst.emis.get(0, path[0]);
        for k in 1..n {
            lp += inst.params.a.get(path[k - 1], path[k]).ln();
            lp += inst.emis.get(k, path[k]);
        }
        out.push((path, lp));
    }
    out
}

pub fn brute_log_likelihood(paths: &[(Vec<usize>, f64)]) -> f64 {
    let lps: Vec<f64> = paths.iter().map(|p| p.1).collect();
    logsumexp(&lps)
}

/// Highest-scoring path; among exact ties the one that is smallest when
/// compared from the last sample backwards.
pub fn brute_viterbi(paths: &[(Vec<usize>, f64)]) -> (Vec<usize>, f64) {
    let best = paths.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let winner = paths
        .iter()
        .filter(|p| p.1 == best)
        .min_by(|a, b| a.0.iter().rev().cmp(b.0.iter().rev()))
        .unwrap();
    (winner.0.clone(), best)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}
