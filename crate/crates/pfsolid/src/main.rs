//! Command line front end: run simulations from a TOML configuration,
//! resume from checkpoints, benchmark the kernels, and export isosurface
//! meshes from checkpoint files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use pfsolid::bench::{
    benchmark_scenario, build_scenario, roofline_report, thread_scaling, KernelModel,
    MachineModel, Scenario, DEFAULT_BLOCK_SIZE,
};
use pfsolid::config::RunConfig;
use pfsolid::kernels::KernelVariant;
use pfsolid::lattice::{
    apply_boundaries, build_block_grid, exchange_ghost_layers, BlockGrid, BoundarySpec, Buffer,
    DomainSpec, FieldId,
};
use pfsolid::meshio::{
    hierarchical_reduce, marching_cubes_block, read_checkpoint, read_checkpoint_header,
    write_checkpoint, write_mesh, MetricsRow, MetricsWriter, ReduceOptions, TriMesh,
};
use pfsolid::timeloop::{FileSink, OverlapMode, Simulation};
use pfsolid::{Result, SimError, N_COMP, N_PHASES};

#[derive(Parser)]
#[command(
    name = "pfsolid",
    about = "Block-structured multiphase-field solidification simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML configuration file.
    Simulate(SimulateArgs),
    /// Continue a simulation from a checkpoint file.
    Resume(ResumeArgs),
    /// Time the kernels across scenarios and optimization variants.
    Benchmark(BenchmarkArgs),
    /// Extract per-phase isosurface meshes from a checkpoint.
    MeshExport(MeshExportArgs),
}

/// Overrides shared by `simulate` and `resume`; unset flags keep the
/// values from the configuration file.
#[derive(Args)]
struct Overrides {
    /// Number of time steps (0 = just emit the initial state).
    #[arg(long)]
    steps: Option<u64>,
    /// Worker thread count.
    #[arg(long)]
    threads: Option<usize>,
    /// Block decomposition, e.g. 2,2,1.
    #[arg(long, value_parser = parse_triple)]
    blocks: Option<[usize; 3]>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Kernel variant: reference, opt-noshortcut, or opt-full.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<KernelVariant>,
    /// Communication overlap: none, mu-only, phi-and-mu, or both.
    #[arg(long, value_parser = parse_overlap)]
    overlap: Option<OverlapMode>,
    /// Checkpoint cadence in steps (0 = final checkpoint only).
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Mesh emission cadence in steps (0 = final mesh only).
    #[arg(long)]
    mesh_every: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    over: Overrides,
}

#[derive(Args)]
struct ResumeArgs {
    /// Path to the TOML run configuration (must match the checkpoint).
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint file to restart from.
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    over: Overrides,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Scenario: liquid, solid, interface, or all.
    #[arg(long, default_value = "all")]
    scenario: String,
    /// Kernel variant: reference, opt-noshortcut, opt-full, or all.
    #[arg(long, default_value = "all")]
    variant: String,
    /// Cells per block edge.
    #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
    block_size: usize,
    /// Block decomposition, e.g. 2,1,1.
    #[arg(long, value_parser = parse_triple, default_value = "1,1,1")]
    blocks: [usize; 3],
    /// Timed repetitions per measurement (median reported).
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// RNG seed for scenario construction.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comparison table output (CSV). Omit to print only to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Memory bandwidth assumed for the roofline report, in GiB/s.
    #[arg(long, default_value_t = 80.0)]
    bandwidth_gib: f64,
    /// Peak floating-point rate assumed for the roofline report, in GFLOP/s.
    #[arg(long, default_value_t = 3000.0)]
    peak_gflops: f64,
    /// Weak-scaling thread counts, e.g. 1,2,4. Runs the scaling study
    /// instead of the variant comparison.
    #[arg(long, value_delimiter = ',')]
    scaling: Option<Vec<usize>>,
    /// Steps per scaling measurement.
    #[arg(long, default_value_t = 10)]
    scaling_steps: u64,
}

#[derive(Args)]
struct MeshExportArgs {
    /// Checkpoint file to read.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory for the PLY files.
    #[arg(long)]
    output: PathBuf,
    /// Block decomposition used for parallel extraction.
    #[arg(long, value_parser = parse_triple, default_value = "1,1,1")]
    blocks: [usize; 3],
    /// Isosurface level on the phase fields.
    #[arg(long, default_value_t = 0.5)]
    iso: f64,
    /// Triangle-count ratio for seam coarsening after stitching.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    /// Treat all three axes as periodic when filling ghost samples.
    #[arg(long)]
    fully_periodic: bool,
}

fn parse_triple(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("expected three comma-separated integers: {e}"))?;
    <[usize; 3]>::try_from(parts).map_err(|v| format!("expected three values, got {}", v.len()))
}

fn parse_variant(s: &str) -> std::result::Result<KernelVariant, String> {
    s.parse().map_err(|e: SimError| e.to_string())
}

fn parse_overlap(s: &str) -> std::result::Result<OverlapMode, String> {
    s.parse().map_err(|e: SimError| e.to_string())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Resume(a) => cmd_resume(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::MeshExport(a) => cmd_mesh_export(a),
    };
    if let Err(e) = result {
        eprintln!("error [{}]: {e}", e.category());
        std::process::exit(match e.category() {
            "config" => 2,
            "io" => 3,
            _ => 4,
        });
    }
}

fn apply_overrides(cfg: &mut RunConfig, o: &Overrides) {
    if let Some(v) = o.steps {
        cfg.run.steps = v;
    }
    if let Some(v) = o.threads {
        cfg.run.threads = v;
    }
    if let Some(v) = o.blocks {
        cfg.domain.blocks = v;
    }
    if let Some(v) = &o.output {
        cfg.run.output_dir = v.display().to_string();
    }
    if let Some(v) = o.variant {
        cfg.run.variant = v;
    }
    if let Some(v) = o.overlap {
        cfg.run.overlap = v;
    }
    if let Some(v) = o.checkpoint_every {
        cfg.run.checkpoint_every = v;
    }
    if let Some(v) = o.mesh_every {
        cfg.run.mesh_every = v;
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_overrides(&mut cfg, &args.over);
    run_configured(cfg, None)
}

fn cmd_resume(args: ResumeArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_overrides(&mut cfg, &args.over);
    run_configured(cfg, Some(args.checkpoint))
}

fn run_configured(cfg: RunConfig, resume_from: Option<PathBuf>) -> Result<()> {
    let out = PathBuf::from(&cfg.run.output_dir);
    std::fs::create_dir_all(&out).map_err(|e| SimError::io(&out, e))?;
    // Echo the effective configuration (after command line overrides).
    std::fs::write(out.join("config.toml"), cfg.to_toml())
        .map_err(|e| SimError::io(out.join("config.toml"), e))?;

    let mut sim = cfg.build()?;
    if let Some(cp) = &resume_from {
        let header = read_checkpoint(cp, &mut sim.grid)?;
        sim.time = header.t;
        sim.step = header.step;
        sim.window_origin_z = header.window_origin_z as i64;
        sim.refresh_src_ghosts();
        println!(
            "resumed from {} at step {} (t = {})",
            cp.display(),
            sim.step,
            sim.time
        );
    }
    if sim.window.is_some() {
        let [nx, ny, _] = cfg.domain.cells;
        sim.scrollback = Some(Box::new(FileSink::create(
            out.join("scrollback.pfsb"),
            nx,
            ny,
        )?));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads)
        .build()
        .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;

    let mut metrics = MetricsWriter::create(out.join("metrics.csv"))?;
    let wall_start = Instant::now();
    append_metrics(&mut metrics, &sim, &cfg, wall_start, 0.0)?;
    if cfg.run.steps == 0 {
        export_meshes(&sim.grid, sim.window_origin_z, 0.5, cfg.run.mesh_ratio, &out, sim.step)?;
        write_checkpoint(&sim.grid, sim.time, sim.step, sim.window_origin_z, out.join(format!("state_{:08}.pfcp", sim.step)))?;
        metrics.flush()?;
        println!("wrote initial state to {}", out.display());
        return Ok(());
    }

    let cells = cfg.domain.cells.iter().product::<usize>() as f64;
    let mut interval_start = Instant::now();
    let mut interval_step = sim.step;
    let report = {
        let metrics = &mut metrics;
        let cfg_ref = &cfg;
        let out_ref = &out;
        pool.install(|| {
            sim.run(cfg_ref.run.steps, |sim| {
                let every = cfg_ref.run.metrics_every;
                if every > 0 && sim.step % every == 0 {
                    let elapsed = interval_start.elapsed().as_secs_f64();
                    let mlups =
                        cells * (sim.step - interval_step) as f64 / elapsed.max(1e-12) / 1e6;
                    append_metrics(metrics, sim, cfg_ref, wall_start, mlups)?;
                    interval_start = Instant::now();
                    interval_step = sim.step;
                }
                if cfg_ref.run.checkpoint_every > 0 && sim.step % cfg_ref.run.checkpoint_every == 0
                {
                    sim.flush_pending_exchange();
                    write_checkpoint(
                        &sim.grid,
                        sim.time,
                        sim.step,
                        sim.window_origin_z,
                        out_ref.join(format!("state_{:08}.pfcp", sim.step)),
                    )?;
                }
                if cfg_ref.run.mesh_every > 0 && sim.step % cfg_ref.run.mesh_every == 0 {
                    sim.flush_pending_exchange();
                    export_meshes(
                        &sim.grid,
                        sim.window_origin_z,
                        0.5,
                        cfg_ref.run.mesh_ratio,
                        out_ref,
                        sim.step,
                    )?;
                }
                Ok(())
            })
        })?
    };

    write_checkpoint(
        &sim.grid,
        sim.time,
        sim.step,
        sim.window_origin_z,
        out.join(format!("state_{:08}.pfcp", sim.step)),
    )?;
    export_meshes(&sim.grid, sim.window_origin_z, 0.5, cfg.run.mesh_ratio, &out, sim.step)?;
    metrics.flush()?;

    let fr = sim.phase_fractions();
    println!(
        "completed {} steps in {:.1} s ({:.2} MLUP/s), {} window shifts",
        report.steps, report.wall_seconds, report.mlups, report.window_shifts
    );
    println!(
        "front z = {:?}, phase fractions = [{:.3}, {:.3}, {:.3}, {:.3}]",
        report.front_z, fr[0], fr[1], fr[2], fr[3]
    );
    println!("outputs in {}", out.display());
    Ok(())
}

fn append_metrics(
    metrics: &mut MetricsWriter,
    sim: &Simulation,
    cfg: &RunConfig,
    wall_start: Instant,
    mlups: f64,
) -> Result<()> {
    let threshold = cfg
        .window
        .as_ref()
        .map_or(0.95, |w| w.liquid_threshold);
    metrics.append(&MetricsRow {
        step: sim.step,
        sim_time: sim.time,
        wall_seconds: wall_start.elapsed().as_secs_f64(),
        mlups,
        front_z: sim.front_z(threshold),
        phase_fractions: sim.phase_fractions(),
        terms_skipped: sim.total_counters.terms_skipped,
        staggered_reuses: sim.total_counters.staggered_reuses,
    })
}

/// Extract, stitch, and coarsen one mesh per non-empty phase; write them
/// as `phase<a>_step<step>.ply` under `dir`.
fn export_meshes(
    grid: &BlockGrid,
    window_origin_z: i64,
    iso: f64,
    ratio: f64,
    dir: &Path,
    step: u64,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for a in 0..N_PHASES {
        let parts: Vec<TriMesh> = grid
            .blocks
            .par_iter()
            .map(|b| marching_cubes_block(b, Buffer::Src, a, window_origin_z, grid.spec.dx, iso))
            .collect();
        let mesh = hierarchical_reduce(
            parts,
            &ReduceOptions {
                stitch_ratio: ratio,
                max_triangles: None,
            },
        )?;
        if mesh.triangles.is_empty() {
            continue;
        }
        let path = dir.join(format!("phase{a}_step{step:08}.ply"));
        write_mesh(&mesh, &path)?;
        written.push(path);
    }
    Ok(written)
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    if let Some(threads) = &args.scaling {
        let scenario: Scenario = if args.scenario == "all" {
            Scenario::Interface
        } else {
            args.scenario.parse()?
        };
        println!("weak scaling, {} scenario, {} cells per block edge", scenario.name(), args.block_size);
        println!("threads,blocks,mlups,efficiency");
        let rows = thread_scaling(scenario, args.block_size, threads, args.scaling_steps, args.seed)?;
        for r in &rows {
            println!(
                "{},{}x{}x{},{:.2},{:.2}",
                r.threads, r.blocks[0], r.blocks[1], r.blocks[2], r.mlups, r.efficiency
            );
        }
        return Ok(());
    }

    let scenarios: Vec<Scenario> = if args.scenario == "all" {
        Scenario::ALL.to_vec()
    } else {
        vec![args.scenario.parse()?]
    };
    let variants: Vec<KernelVariant> = if args.variant == "all" {
        vec![
            KernelVariant::REFERENCE,
            KernelVariant::OPT_NOSHORTCUT,
            KernelVariant::OPT_FULL,
        ]
    } else {
        vec![args.variant.parse()?]
    };

    let header = "scenario,variant,phi_mlups,mu_mlups,combined_mlups,terms_skipped,staggered_reuses";
    println!("{header}");
    let mut csv = vec![header.to_string()];
    let mut best = 0.0f64;
    for &scenario in &scenarios {
        for &variant in &variants {
            let mut sim =
                build_scenario(scenario, args.block_size, args.blocks, args.seed, variant)?;
            let mut r = benchmark_scenario(&mut sim, args.reps)?;
            r.scenario = scenario.name();
            let counters = r.phi.counters;
            let line = format!(
                "{},{},{:.2},{:.2},{:.2},{},{}",
                r.scenario,
                r.variant,
                r.phi.mlups,
                r.mu.mlups,
                r.mlups,
                counters.terms_skipped,
                r.phi.counters.staggered_reuses
            );
            println!("{line}");
            csv.push(line);
            best = best.max(r.mlups);
        }
    }
    if let Some(path) = &args.output {
        std::fs::write(path, csv.join("\n") + "\n").map_err(|e| SimError::io(path, e))?;
    }

    let machine = MachineModel {
        bandwidth_bytes_per_s: args.bandwidth_gib * (1u64 << 30) as f64,
        peak_flops_per_s: args.peak_gflops * 1e9,
    };
    let report = roofline_report(best, &KernelModel::default(), &machine);
    println!();
    for line in &report.lines {
        println!("{line}");
    }
    Ok(())
}

fn cmd_mesh_export(args: MeshExportArgs) -> Result<()> {
    let header = read_checkpoint_header(&args.checkpoint)?;
    let dims = header.dims.map(|d| d as usize);
    let spec = DomainSpec::new(dims, header.dx, args.blocks);
    let periodic = if args.fully_periodic {
        [true; 3]
    } else {
        [true, true, false]
    };
    let mut grid = build_block_grid(&spec, periodic)?;
    read_checkpoint(&args.checkpoint, &mut grid)?;
    let bc = if args.fully_periodic {
        BoundarySpec::fully_periodic()
    } else {
        BoundarySpec::directional([0.0; N_COMP])
    };
    exchange_ghost_layers(&mut grid, FieldId::Phi, Buffer::Src);
    apply_boundaries(&mut grid, FieldId::Phi, Buffer::Src, &bc);

    std::fs::create_dir_all(&args.output).map_err(|e| SimError::io(&args.output, e))?;
    let written = export_meshes(
        &grid,
        header.window_origin_z as i64,
        args.iso,
        args.ratio,
        &args.output,
        header.step,
    )?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    if written.is_empty() {
        println!("no phase produced a surface at iso = {}", args.iso);
    }
    Ok(())
}
