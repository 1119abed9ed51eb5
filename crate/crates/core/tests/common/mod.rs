//! Random instances shared by the integration tests.
#![allow(dead_code)]

use netmimo::linalg::{cplx, identity, CMatrix};
use netmimo::model::{build_ifc_gc, IfcGcProblem, PartialCooperationSystem};
use netmimo::scenario::{realize_seeded, ScenarioConfig};
use netmimo::single_user::SingleUserProblem;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Entries i.i.d. CN(0, 1).
pub fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        cplx(re, im) * cplx(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    })
}

/// `shift·I + GGᴴ/n`.
pub fn positive_definite<R: Rng>(rng: &mut R, n: usize, shift: f64) -> CMatrix {
    let g = gaussian(rng, n, n);
    let a = &g * g.adjoint() * cplx(1.0 / n as f64, 0.0) + identity(n) * cplx(shift, 0.0);
    (&a + a.adjoint()) * cplx(0.5, 0.0)
}

/// Single link with `m` random PSD constraints (positive definite in sum),
/// coloured interference and weights in `[0.5, 2]`.
pub fn single_user<R: Rng>(rng: &mut R, mt: usize, mr: usize, d: usize, m: usize) -> SingleUserProblem {
    let h = gaussian(rng, mr, mt) * cplx(rng.random_range(0.5..3.0), 0.0);
    let omega = positive_definite(rng, mr, 1.0);
    let constraints = (0..m).map(|_| positive_definite(rng, mt, 0.1)).collect();
    let budgets = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
    let weights = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    SingleUserProblem::new(h, omega, constraints, budgets, weights).unwrap()
}

/// Interference channel with per-user PD power constraints and random
/// diagonal MSE weights.
pub fn interference_channel<R: Rng>(rng: &mut R, users: usize, mt: usize, mr: usize, d: usize) -> IfcGcProblem {
    let channels = (0..users).map(|k| (0..users).map(|l| gaussian(rng, mr, mt) * cplx(if k == l { 1.5 } else { 0.6 }, 0.0)).collect()).collect();
    let weight_matrices =
        (0..users).map(|k| (0..users).map(|m| if m == k { positive_definite(rng, mt, 0.2) } else { CMatrix::zeros(mt, mt) }).collect()).collect();
    let budgets = (0..users).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut p = IfcGcProblem::new(channels, weight_matrices, budgets, vec![d; users]).unwrap();
    let weights = (0..users).map(|_| netmimo::linalg::diag_real(&(0..d).map(|_| rng.random_range(0.5..2.0)).collect::<Vec<_>>())).collect();
    p = p.with_weights(weights).unwrap();
    p
}

/// Random precoders with `‖B_k‖_F² = scale·d_k`.
pub fn precoders<R: Rng>(rng: &mut R, prob: &IfcGcProblem, scale: f64) -> Vec<CMatrix> {
    (0..prob.num_users())
        .map(|k| {
            let b = gaussian(rng, prob.tx_dim(k), prob.streams[k]);
            let n = b.norm();
            b * cplx((scale * prob.streams[k] as f64).sqrt() / n, 0.0)
        })
        .collect()
}

/// Three-cell cluster with pairwise cooperation: four transmit and two
/// receive antennas, two streams.
pub fn three_cell_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig { seed, ..ScenarioConfig::default() }
}

pub fn cellular(cfg: &ScenarioConfig) -> (PartialCooperationSystem, IfcGcProblem) {
    let net = realize_seeded(cfg).unwrap();
    let prob = build_ifc_gc(&net.system).unwrap();
    (net.system, prob)
}

/// Relative Frobenius distance `‖a − b‖/max(‖b‖, tiny)`.
pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// `stations` stations with `nt` antennas, `users` users with `nr` antennas;
/// every user is served by one or two distinct stations.
pub fn partial_cooperation<R: Rng>(rng: &mut R, stations: usize, users: usize, nt: usize, nr: usize) -> PartialCooperationSystem {
    let sets: Vec<Vec<usize>> = (0..users)
        .map(|_| {
            let first = rng.random_range(0..stations);
            if stations > 1 && rng.random::<bool>() {
                vec![first, (first + rng.random_range(1..stations)) % stations]
            } else {
                vec![first]
            }
        })
        .collect();
    let raw = (0..users).map(|_| (0..stations).map(|_| gaussian(rng, nr, nt)).collect()).collect();
    let power = (0..stations).map(|_| rng.random_range(0.5..2.0)).collect();
    let streams = sets.iter().map(|s| rng.random_range(1..=(s.len() * nt).min(nr))).collect();
    PartialCooperationSystem::new(nt, nr, sets, power, raw, streams).unwrap()
}

/// Haar-distributed `n × n` unitary.
pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    gaussian(rng, n, n).qr().q()
}
