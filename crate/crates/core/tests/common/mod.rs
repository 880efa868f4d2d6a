#![allow(dead_code)]

use dotcavity_core::gates::{solve_schedule, GateSchedule};
use dotcavity_core::hamiltonians::effective_sz_hamiltonian;
use dotcavity_core::propagation::{evolve_td_columns, PropagationConfig};
use dotcavity_core::{CMatrix, ModelParams, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn reference_schedule() -> GateSchedule {
    solve_schedule(1.0, 1.0, 1.0, 10.0, 5.0, 5).unwrap()
}

/// Numerical `S_z`-model evolution restricted to the cutoff block of
/// `params`: the columns `|r, n ≤ n_max⟩` are propagated in a space with
/// `pad` extra Fock levels and the rows above `n_max` are dropped.
pub fn padded_numeric(params: &ModelParams, driven: &[usize], t: f64, pad: usize, config: &PropagationConfig) -> CMatrix {
    let big = params.with_cutoff(params.photon_cutoff + pad);
    let h = effective_sz_hamiltonian(&big, driven).unwrap();
    let (pd, bd) = (params.photon_cutoff + 1, big.photon_cutoff + 1);
    let regs = h.space.register_dim();
    let mut inputs = CMatrix::zeros(regs * bd, regs * pd);
    for r in 0..regs {
        for n in 0..pd {
            inputs[(r * bd + n, r * pd + n)] = C64::new(1.0, 0.0);
        }
    }
    let out = evolve_td_columns(&h, 0.0, t, &inputs, config).unwrap();
    CMatrix::from_fn(regs * pd, regs * pd, |i, j| out[((i / pd) * bd + i % pd, j)])
}

/// Random `S_z`-model draw: 1 or 2 dots, `n_max ≤ 6`, `A/Δ` up to 1.2 and
/// `t` over up to three cavity periods.
pub struct OracleDraw {
    pub params: ModelParams,
    pub driven: Vec<usize>,
    pub t: f64,
    pub a_over_delta: f64,
}

pub fn oracle_draws(count: usize, seed: u64) -> Vec<OracleDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n_dots = rng.random_range(1..=2usize);
            let cutoff = rng.random_range(2..=6usize);
            let delta = rng.random_range(0.02..0.2);
            let ratio = rng.random_range(0.1..1.2);
            let (delta1, omega2) = (10.0, 1.0);
            let g = ratio * delta / (0.5 * omega2 * (1.0 / delta1 + 1.0 / (delta1 + delta)));
            let t = rng.random_range(0.05..3.0) * 2.0 * std::f64::consts::PI / delta;
            let params = ModelParams::uniform(n_dots, [1.0, omega2, 1.0], g, delta1, 5.0, delta, cutoff).unwrap();
            OracleDraw { params, driven: (0..n_dots).collect(), t, a_over_delta: ratio }
        })
        .collect()
}
