//! Helpers shared by unit, integration, and acceptance tests: random
//! admissible states, a small symmetric model system, and independent
//! brute-force oracles. Not part of the simulation path.
#![doc(hidden)]

use rand::Rng;

use crate::kernels::project_simplex;
use crate::lattice::{BlockGrid, Buffer, FieldId};
use crate::thermo::{MobilityWeight, ModelParams, PhaseThermo, TemperatureSchedule};
use crate::{N_COMP, N_PHASES};

/// Uniform random point on the interior of the 3-simplex.
pub fn random_simplex<R: Rng>(rng: &mut R) -> [f64; N_PHASES] {
    // Exponential spacings normalized to sum 1.
    let mut v = [0.0; N_PHASES];
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = -(rng.gen::<f64>().max(1e-12)).ln();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
    v
}

pub fn random_mu<R: Rng>(rng: &mut R) -> [f64; N_COMP] {
    [rng.gen::<f64>() * 0.2 - 0.1, rng.gen::<f64>() * 0.2 - 0.1]
}

/// Symmetric model-system parameters used throughout the test suite: equal
/// surface energies and relaxation constants, unit-scale quantities so the
/// stability limit is easy to reason about.
pub fn symmetric_params() -> ModelParams {
    let mut gamma = [[1.0; N_PHASES]; N_PHASES];
    for (a, row) in gamma.iter_mut().enumerate() {
        row[a] = 0.0;
    }
    ModelParams {
        epsilon: 4.0,
        tau: [1.0; N_PHASES],
        gamma,
        // Solid phases diffuse slowly, liquid fast.
        diff: [[0.001, 0.001], [0.001, 0.001], [0.001, 0.001], [1.0, 1.0]],
        liquid: 3,
        mobility_weight: MobilityWeight::Phi,
    }
}

pub fn symmetric_thermo() -> PhaseThermo {
    PhaseThermo {
        curvature: [[1.0, 1.0]; N_PHASES],
        c_eq: [
            [0.6, 0.2],
            [0.2, 0.6],
            [0.2, 0.2],
            [1.0 / 3.0, 1.0 / 3.0],
        ],
        slope: [[0.0; N_COMP]; N_PHASES],
        latent: [1.0, 1.0, 1.0, 0.0],
        t_eut: 1.0,
    }
}

pub fn eutectic_schedule() -> TemperatureSchedule {
    TemperatureSchedule {
        t_base: 1.0,
        g: 0.0,
        v: 0.0,
        z0: 0.0,
    }
}

/// Deterministic interface-rich source state: solid lamellae of two phases
/// below a tanh front, a third solid band pattern in y, melt above, and a
/// smooth nonuniform chemical potential. Fills the `Src` buffers only;
/// ghosts are left to the caller.
pub fn fill_interface_state(grid: &mut BlockGrid) {
    let [gx, gy, gz] = grid.spec.global_cells;
    let total = gx * gy * gz;
    let mut phi = vec![[0.0f64; N_PHASES]; total];
    let mut mu = vec![[0.0f64; N_COMP]; total];
    let tau = std::f64::consts::TAU;
    for z in 0..gz {
        for y in 0..gy {
            for x in 0..gx {
                let gi = (z * gy + y) * gx + x;
                let s = ((z as f64 - gz as f64 * 0.5) / 1.5).tanh();
                let liq = 0.5 * (1.0 + s);
                let solid = 1.0 - liq;
                let lam = usize::from((x / 4) % 2 == 1);
                let band = if (y / 5) % 2 == 0 { 0.0 } else { 0.3 };
                let mut p = [0.0; N_PHASES];
                p[lam] = solid * (1.0 - band);
                p[2] = solid * band;
                p[3] = liq;
                phi[gi] = project_simplex(&p).unwrap();
                mu[gi] = [
                    0.03 * (tau * x as f64 / gx as f64).sin()
                        * (tau * z as f64 / gz as f64).cos(),
                    -0.02 * (tau * y as f64 / gy as f64).cos(),
                ];
            }
        }
    }
    for comp in 0..N_PHASES {
        let data: Vec<f64> = phi.iter().map(|p| p[comp]).collect();
        grid.scatter(FieldId::Phi, Buffer::Src, comp, &data);
    }
    for comp in 0..N_COMP {
        let data: Vec<f64> = mu.iter().map(|m| m[comp]).collect();
        grid.scatter(FieldId::Mu, Buffer::Src, comp, &data);
    }
}

/// Exhaustive active-set oracle for the Euclidean projection of `v` onto
/// the unit simplex in 4 dimensions. Enumerates all 15 nonempty supports,
/// keeps KKT-feasible candidates, and returns the closest one.
pub fn project_simplex_oracle(v: &[f64; N_PHASES]) -> [f64; N_PHASES] {
    let mut best: Option<([f64; N_PHASES], f64)> = None;
    for mask in 1u32..(1 << N_PHASES) {
        let support: Vec<usize> = (0..N_PHASES).filter(|i| mask >> i & 1 == 1).collect();
        let k = support.len() as f64;
        let sum: f64 = support.iter().map(|&i| v[i]).sum();
        let theta = (sum - 1.0) / k;
        let mut cand = [0.0; N_PHASES];
        let mut feasible = true;
        for &i in &support {
            cand[i] = v[i] - theta;
            if cand[i] < 0.0 {
                feasible = false;
            }
        }
        // KKT: components outside the support must not want to increase.
        for i in 0..N_PHASES {
            if mask >> i & 1 == 0 && v[i] - theta > 1e-12 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let dist: f64 = (0..N_PHASES).map(|i| (cand[i] - v[i]).powi(2)).sum();
        match best {
            Some((_, d)) if d <= dist => {}
            _ => best = Some((cand, dist)),
        }
    }
    best.expect("projection oracle found no feasible support").0
}
