//! Initial conditions: a columnar Voronoi tessellation of the solid slab
//! with deterministic phase assignment, melt above, and an optional
//! phase-field-only relaxation to diffuse the sharp starting interfaces.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::kernels::{sweep_block_phi, KernelCtx};
use crate::lattice::{apply_boundaries, exchange_ghost_layers, BlockGrid, Buffer, FieldId};
use crate::thermo::ModelParams;
use crate::timeloop::Simulation;
use crate::{N_COMP, N_PHASES};

/// Parameters of the Voronoi starting state.
#[derive(Debug, Clone)]
pub struct VoronoiInit {
    pub seed: u64,
    /// Number of columnar grains in the solid slab.
    pub n_grains: usize,
    /// Slices of solid at the bottom of the window; melt fills the rest.
    pub solid_height: usize,
    /// Target fractions of the solid phases among the grains. The melt
    /// entry must be zero; the rest need not be normalized.
    pub fractions: [f64; N_PHASES],
    /// Chemical potential of the melt, used for the whole domain.
    pub liquid_mu: [f64; N_COMP],
}

/// Deterministic largest-remainder apportionment of `n` grains to phases
/// proportionally to `fractions` (remainder ties broken by phase index).
pub fn apportion_grains(n: usize, fractions: &[f64; N_PHASES]) -> [usize; N_PHASES] {
    let total: f64 = fractions.iter().sum();
    let quota: [f64; N_PHASES] = fractions.map(|f| n as f64 * f / total);
    let mut counts = quota.map(|q| q.floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..N_PHASES).collect();
    order.sort_by(|&a, &b| {
        let ra = quota[a] - quota[a].floor();
        let rb = quota[b] - quota[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for a in order.into_iter().cycle().take(n - assigned) {
        counts[a] += 1;
    }
    counts
}

/// Index of the seed nearest to `(x, y)` under the periodic metric of an
/// `gx` by `gy` cross-section. Ties go to the lower seed index.
pub fn nearest_seed(seeds: &[(f64, f64)], x: f64, y: f64, gx: f64, gy: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (idx, &(sx, sy)) in seeds.iter().enumerate() {
        let dx = (x - sx).abs();
        let dx = dx.min(gx - dx);
        let dy = (y - sy).abs();
        let dy = dy.min(gy - dy);
        let d = dx * dx + dy * dy;
        if d < best_d {
            best_d = d;
            best = idx;
        }
    }
    best
}

/// Fill the source buffers with the Voronoi starting state: pure columnar
/// grains below `solid_height`, pure melt above, uniform chemical potential.
pub fn voronoi_init(grid: &mut BlockGrid, params: &ModelParams, cfg: &VoronoiInit) -> Result<()> {
    if cfg.n_grains == 0 {
        return Err(SimError::Config("n_grains must be at least 1".into()));
    }
    if cfg.solid_height > grid.spec.global_cells[2] {
        return Err(SimError::Config(format!(
            "solid_height {} exceeds the window height {}",
            cfg.solid_height, grid.spec.global_cells[2]
        )));
    }
    if cfg.fractions[params.liquid] != 0.0 {
        return Err(SimError::Config(
            "the melt phase cannot receive grain fraction".into(),
        ));
    }
    if cfg.fractions.iter().any(|&f| f < 0.0) || cfg.fractions.iter().sum::<f64>() <= 0.0 {
        return Err(SimError::Config(
            "grain fractions must be non-negative with a positive sum".into(),
        ));
    }

    let [gx, gy, _] = grid.spec.global_cells;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<(f64, f64)> = (0..cfg.n_grains)
        .map(|_| (rng.gen::<f64>() * gx as f64, rng.gen::<f64>() * gy as f64))
        .collect();
    let counts = apportion_grains(cfg.n_grains, &cfg.fractions);
    let mut labels: Vec<usize> = (0..N_PHASES)
        .flat_map(|a| std::iter::repeat(a).take(counts[a]))
        .collect();
    labels.shuffle(&mut rng);

    // Nearest-seed label per cross-section column, shared by all slices.
    let column: Vec<usize> = (0..gx * gy)
        .map(|c| {
            let x = (c % gx) as f64 + 0.5;
            let y = (c / gx) as f64 + 0.5;
            labels[nearest_seed(&seeds, x, y, gx as f64, gy as f64)]
        })
        .collect();

    for b in &mut grid.blocks {
        for k in 0..b.n[2] {
            let solid = b.origin[2] + k < cfg.solid_height;
            for j in 0..b.n[1] {
                for i in 0..b.n[0] {
                    let phase = if solid {
                        column[(b.origin[1] + j) * gx + b.origin[0] + i]
                    } else {
                        params.liquid
                    };
                    for a in 0..N_PHASES {
                        b.phi.src.set(
                            a,
                            i as isize,
                            j as isize,
                            k as isize,
                            if a == phase { 1.0 } else { 0.0 },
                        );
                    }
                    for comp in 0..N_COMP {
                        b.mu.src
                            .set(comp, i as isize, j as isize, k as isize, cfg.liquid_mu[comp]);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Relax only the phase fields for `steps` sub-steps at the current
/// simulation time, diffusing the sharp Voronoi interfaces to their
/// equilibrium width before the coupled run starts. Chemical potentials
/// and the clock are left untouched.
pub fn relax_interfaces(sim: &mut Simulation, steps: u64) -> Result<()> {
    for _ in 0..steps {
        let ctx = KernelCtx {
            params: &sim.params,
            th: &sim.th,
            sched: &sim.sched,
            dx: sim.grid.spec.dx,
            dt: sim.dt,
            time: sim.time,
            step: sim.step,
            window_origin_z: sim.window_origin_z,
            variant: sim.variant,
        };
        let results: Result<Vec<_>> = sim
            .grid
            .blocks
            .par_iter_mut()
            .map(|b| sweep_block_phi(&ctx, b))
            .collect();
        results?;
        exchange_ghost_layers(&mut sim.grid, FieldId::Phi, Buffer::Dst);
        apply_boundaries(&mut sim.grid, FieldId::Phi, Buffer::Dst, &sim.bc);
        for b in &mut sim.grid.blocks {
            b.phi.swap();
        }
    }
    Ok(())
}
