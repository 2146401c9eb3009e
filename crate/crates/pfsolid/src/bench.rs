//! Measurement utilities: per-kernel timing and MLUP/s, the roofline
//! machine model, scenario presets for representative domain regions, and
//! weak thread scaling with a determinism gate.
//!
//! Benchmark sweeps are observational: destination buffers are never
//! swapped back, so repeated sweeps see the identical source state and all
//! work counters are exactly reproducible across repetitions.

use std::str::FromStr;
use std::time::Instant;

use crate::error::{Result, SimError};
use crate::init::{relax_interfaces, voronoi_init, VoronoiInit};
use crate::kernels::{KernelVariant, SweepCounters};
use crate::lattice::{
    apply_boundaries, build_block_grid, exchange_ghost_layers, BoundarySpec, Buffer, DomainSpec,
    FieldId,
};
use crate::testutil::{eutectic_schedule, symmetric_params, symmetric_thermo};
use crate::timeloop::{OverlapMode, Simulation};

/// Timing and work counters for one kernel over a set of sweeps.
#[derive(Debug, Clone, Copy)]
pub struct KernelStats {
    pub cells_updated: u64,
    /// Median wall time of a single sweep.
    pub wall_seconds: f64,
    pub mlups: f64,
    pub counters: SweepCounters,
}

impl KernelStats {
    fn from_times(cells: u64, mut sweep_times: Vec<f64>, counters: SweepCounters) -> Self {
        sweep_times.sort_by(f64::total_cmp);
        let median = sweep_times[sweep_times.len() / 2];
        KernelStats {
            cells_updated: cells,
            wall_seconds: median,
            mlups: cells as f64 / median / 1e6,
            counters,
        }
    }
}

/// Static per-lattice-update cost model of a kernel.
#[derive(Debug, Clone, Copy)]
pub struct KernelModel {
    pub bytes_per_lup: f64,
    pub flop_per_lup: f64,
}

impl Default for KernelModel {
    /// Chemical-potential kernel traffic and arithmetic per cell update.
    fn default() -> Self {
        KernelModel {
            bytes_per_lup: 680.0,
            flop_per_lup: 1384.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MachineModel {
    pub bandwidth_bytes_per_s: f64,
    pub peak_flops_per_s: f64,
}

#[derive(Debug, Clone)]
pub struct RooflineReport {
    pub bandwidth_ceiling_mlups: f64,
    pub compute_ceiling_mlups: f64,
    /// True when the memory system, not the ALUs, bounds throughput.
    pub bandwidth_bound: bool,
    pub measured_mlups: f64,
    pub achieved_gflops: f64,
    pub lines: Vec<String>,
}

/// Compute both roofline ceilings for a kernel on a machine and convert a
/// measured throughput into achieved GFLOP/s.
pub fn roofline_report(
    measured_mlups: f64,
    kernel: &KernelModel,
    machine: &MachineModel,
) -> RooflineReport {
    let bandwidth_ceiling = machine.bandwidth_bytes_per_s / kernel.bytes_per_lup / 1e6;
    let compute_ceiling = machine.peak_flops_per_s / kernel.flop_per_lup / 1e6;
    let bandwidth_bound = bandwidth_ceiling <= compute_ceiling;
    let achieved_gflops = measured_mlups * 1e6 * kernel.flop_per_lup / 1e9;
    let lines = vec![
        format!(
            "bandwidth ceiling: {bandwidth_ceiling:.1} MLUP/s ({:.1} GiB/s at {} B/LUP)",
            machine.bandwidth_bytes_per_s / (1u64 << 30) as f64,
            kernel.bytes_per_lup
        ),
        format!(
            "compute ceiling: {compute_ceiling:.1} MLUP/s ({:.1} GFLOP/s peak at {} FLOP/LUP)",
            machine.peak_flops_per_s / 1e9,
            kernel.flop_per_lup
        ),
        format!(
            "binding resource: {}",
            if bandwidth_bound { "memory bandwidth" } else { "compute" }
        ),
        format!(
            "measured: {measured_mlups:.1} MLUP/s -> {achieved_gflops:.1} GFLOP/s"
        ),
    ];
    RooflineReport {
        bandwidth_ceiling_mlups: bandwidth_ceiling,
        compute_ceiling_mlups: compute_ceiling,
        bandwidth_bound,
        measured_mlups,
        achieved_gflops,
        lines,
    }
}

/// Representative domain regions for benchmarking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Pure melt: every cell is single-phase liquid bulk.
    Liquid,
    /// Fully solidified multi-grain structure: no liquid anywhere.
    Solid,
    /// A solidification front band: solid grains, diffuse interfaces, melt.
    Interface,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Liquid, Scenario::Solid, Scenario::Interface];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Liquid => "liquid",
            Scenario::Solid => "solid",
            Scenario::Interface => "interface",
        }
    }
}

impl FromStr for Scenario {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "liquid" => Ok(Scenario::Liquid),
            "solid" => Ok(Scenario::Solid),
            "interface" => Ok(Scenario::Interface),
            other => Err(SimError::Config(format!(
                "unknown scenario '{other}' (expected liquid | solid | interface)"
            ))),
        }
    }
}

/// Default benchmark block edge length.
pub const DEFAULT_BLOCK_SIZE: usize = 60;

/// Build a deterministic single-block simulation whose contents match the
/// requested scenario. The model is the symmetric test system, undercooled
/// so interfaces actually move (exercising the anti-trapping terms).
pub fn build_scenario(
    scenario: Scenario,
    block_size: usize,
    blocks: [usize; 3],
    seed: u64,
    variant: KernelVariant,
) -> Result<Simulation> {
    let params = symmetric_params();
    let th = symmetric_thermo();
    let mut sched = eutectic_schedule();
    sched.t_base = 0.98; // slight undercooling drives the front
    let global = blocks.map(|b| b * block_size);
    let spec = DomainSpec::new(global, 1.0, blocks);
    let mut grid = build_block_grid(&spec, [true, true, false])?;
    let liquid_mu = [0.0, 0.0];
    let nz = global[2];
    let solid_height = match scenario {
        Scenario::Liquid => 0,
        Scenario::Solid => nz,
        Scenario::Interface => nz / 2,
    };
    if solid_height > 0 {
        voronoi_init(
            &mut grid,
            &params,
            &VoronoiInit {
                seed,
                n_grains: (global[0] * global[1] / 100).max(3),
                solid_height,
                fractions: [0.4, 0.3, 0.3, 0.0],
                liquid_mu,
            },
        )?;
    } else {
        // Pure melt.
        for b in &mut grid.blocks {
            for comp in 0..4 {
                let v = if comp == params.liquid { 1.0 } else { 0.0 };
                b.phi.src.comp_mut(comp).fill(v);
            }
            for comp in 0..2 {
                b.mu.src.comp_mut(comp).fill(liquid_mu[comp]);
            }
        }
    }
    let bc = BoundarySpec::directional(liquid_mu);
    let mut sim = Simulation::new(
        grid,
        params,
        th,
        sched,
        bc,
        0.02,
        variant,
        OverlapMode::None,
    )?;
    if scenario == Scenario::Interface {
        // Diffuse the sharp tessellation so the band contains real
        // interface cells rather than degenerate jumps.
        relax_interfaces(&mut sim, 10)?;
    }
    Ok(sim)
}

/// Per-variant benchmark outcome on one scenario.
#[derive(Debug, Clone)]
pub struct BenchResult {
    pub scenario: &'static str,
    pub variant: &'static str,
    pub phi: KernelStats,
    pub mu: KernelStats,
    /// Throughput of the combined two-kernel update.
    pub mlups: f64,
}

/// Time `reps` observational sweeps of both kernels. The source state is
/// never advanced, so counters are identical for every repetition.
pub fn benchmark_scenario(sim: &mut Simulation, reps: usize) -> Result<BenchResult> {
    assert!(reps >= 1);
    let cells = sim.grid.spec.total_cells() as u64;
    let mut phi_times = Vec::with_capacity(reps);
    let mut mu_times = Vec::with_capacity(reps);
    let mut phi_counters = SweepCounters::default();
    let mut mu_counters = SweepCounters::default();
    for rep in 0..reps {
        let start = Instant::now();
        let pc = sim.phi_sweep_plain()?;
        phi_times.push(start.elapsed().as_secs_f64());
        exchange_ghost_layers(&mut sim.grid, FieldId::Phi, Buffer::Dst);
        apply_boundaries(&mut sim.grid, FieldId::Phi, Buffer::Dst, &sim.bc);
        let start = Instant::now();
        let mc = sim.mu_sweep_full()?;
        mu_times.push(start.elapsed().as_secs_f64());
        if rep == 0 {
            phi_counters = pc;
            mu_counters = mc;
        } else {
            assert_eq!(phi_counters, pc, "benchmark sweeps must be deterministic");
            assert_eq!(mu_counters, mc, "benchmark sweeps must be deterministic");
        }
    }
    let phi = KernelStats::from_times(cells, phi_times.clone(), phi_counters);
    let mu = KernelStats::from_times(cells, mu_times.clone(), mu_counters);
    // Combined: one cell update requires both kernel visits.
    let mut totals: Vec<f64> = phi_times
        .iter()
        .zip(&mu_times)
        .map(|(a, b)| a + b)
        .collect();
    totals.sort_by(f64::total_cmp);
    let median = totals[totals.len() / 2];
    Ok(BenchResult {
        scenario: "",
        variant: sim.variant.name(),
        phi,
        mu,
        mlups: cells as f64 / median / 1e6,
    })
}

/// One row of the weak-scaling table.
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub threads: usize,
    pub blocks: [usize; 3],
    pub mlups: f64,
    /// MLUP/s per thread relative to the single-thread row.
    pub efficiency: f64,
    pub checksum: u64,
}

/// Weak scaling: the block count grows with the thread count. Before any
/// timing is reported, each multi-threaded configuration is re-run on one
/// thread and the field checksums must match bitwise.
pub fn thread_scaling(
    scenario: Scenario,
    block_size: usize,
    thread_counts: &[usize],
    steps: u64,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::new();
    let mut base_mlups = None;
    for &threads in thread_counts {
        let blocks = [threads, 1, 1];
        let run = |nthreads: usize| -> Result<(f64, u64)> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(nthreads)
                .build()
                .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
            pool.install(|| {
                let mut sim =
                    build_scenario(scenario, block_size, blocks, seed, KernelVariant::OPT_FULL)?;
                let report = sim.run(steps, |_| Ok(()))?;
                let checksum = sim.grid.checksum(FieldId::Phi, Buffer::Src)
                    ^ sim.grid.checksum(FieldId::Mu, Buffer::Src);
                Ok((report.mlups, checksum))
            })
        };
        // Determinism gate: identical fields on one thread.
        let (_, reference) = run(1)?;
        let (mlups, checksum) = run(threads)?;
        if checksum != reference {
            return Err(SimError::Numerical {
                step: steps,
                x: -1,
                y: -1,
                z: -1,
                detail: format!("{threads}-thread run deviates from the 1-thread result"),
            });
        }
        let base = *base_mlups.get_or_insert(mlups / threads as f64);
        rows.push(ScalingRow {
            threads,
            blocks,
            mlups,
            efficiency: mlups / (threads as f64) / base,
            checksum,
        });
    }
    Ok(rows)
}
