//! Time integration: the per-step orchestration of kernel sweeps, ghost
//! exchanges, and boundary application, the communication-overlap variants,
//! and the moving solidification window.
//!
//! Step order (basic): phi sweep -> phi dst exchange/boundaries -> mu sweep
//! -> mu dst exchange/boundaries -> buffer swap. The overlap modes keep the
//! same data dependencies and produce bitwise identical states; they only
//! move the packing phase of an exchange so it runs concurrently with a
//! sweep that provably does not read the ghosts being refreshed.

use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::kernels::{
    sweep_block_mu, sweep_block_phi, sweep_mu_fields, sweep_phi_fields, KernelCtx, KernelVariant,
    MuScope, SweepCounters,
};
use crate::lattice::{
    apply_boundaries, exchange_ghost_layers, pack_ghost_messages, unpack_ghost_messages, Block,
    BlockGrid, BoundarySpec, Buffer, Field, FieldId,
};
use crate::thermo::{ModelParams, PhaseThermo, TemperatureSchedule};
use crate::{N_COMP, N_PHASES};

/// Which communications are hidden behind compute.
///
/// `MuOnly` defers the mu ghost refresh to the start of the next step,
/// overlapping it with the phi sweep (which reads mu only at cell centers).
/// `PhiAndMu` hides the phi destination exchange behind the interior part
/// of a split mu sweep. `Both` combines the two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapMode {
    None,
    MuOnly,
    PhiAndMu,
    Both,
}

impl OverlapMode {
    fn defers_mu(self) -> bool {
        matches!(self, OverlapMode::MuOnly | OverlapMode::Both)
    }

    fn hides_phi(self) -> bool {
        matches!(self, OverlapMode::PhiAndMu | OverlapMode::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            OverlapMode::None => "none",
            OverlapMode::MuOnly => "mu-only",
            OverlapMode::PhiAndMu => "phi-and-mu",
            OverlapMode::Both => "both",
        }
    }
}

impl FromStr for OverlapMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(OverlapMode::None),
            "mu-only" => Ok(OverlapMode::MuOnly),
            "phi-and-mu" => Ok(OverlapMode::PhiAndMu),
            "both" => Ok(OverlapMode::Both),
            other => Err(SimError::Config(format!(
                "unknown overlap mode '{other}' (expected none | mu-only | phi-and-mu | both)"
            ))),
        }
    }
}

/// Thread-safe ordered record of step phases, used to verify that hidden
/// communication really runs inside the enclosing compute phase.
#[derive(Debug, Default)]
pub struct EventLog {
    entries: Mutex<Vec<String>>,
}

impl EventLog {
    pub fn emit(&self, step: u64, what: &str) {
        self.entries.lock().unwrap().push(format!("step {step}: {what}"));
    }

    pub fn take(&self) -> Vec<String> {
        std::mem::take(&mut *self.entries.lock().unwrap())
    }
}

/// Moving-window control parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowConfig {
    /// A slice belongs to the front if any cell has phi_liquid below this.
    pub liquid_threshold: f64,
    /// Keep at least this many slices between the front and the window top.
    pub front_offset_target: usize,
    /// Chemical potential of the fresh melt filled in at the top.
    pub liquid_mu: [f64; N_COMP],
}

impl WindowConfig {
    pub fn new(liquid_mu: [f64; N_COMP]) -> Self {
        WindowConfig {
            liquid_threshold: 0.95,
            front_offset_target: 20,
            liquid_mu,
        }
    }
}

/// One bottom slice leaving the moving window: single-precision
/// component-major snapshots of both fields, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScrollbackSlice {
    pub global_z: u64,
    pub nx: usize,
    pub ny: usize,
    pub phi: Vec<f32>,
    pub mu: Vec<f32>,
}

pub trait ScrollbackSink: Send {
    fn emit(&mut self, slice: &ScrollbackSlice) -> Result<()>;
}

/// Keeps emitted slices in memory (tests, analysis). Clones share the same
/// backing store so callers can keep a handle while the sink is owned by
/// the simulation.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub slices: std::sync::Arc<Mutex<Vec<ScrollbackSlice>>>,
}

impl ScrollbackSink for MemorySink {
    fn emit(&mut self, slice: &ScrollbackSlice) -> Result<()> {
        self.slices.lock().unwrap().push(slice.clone());
        Ok(())
    }
}

const SCROLLBACK_MAGIC: &[u8; 8] = b"PFSB0001";

/// Streams emitted slices to a binary little-endian file.
pub struct FileSink {
    path: std::path::PathBuf,
    writer: BufWriter<std::fs::File>,
}

impl FileSink {
    pub fn create(path: impl AsRef<Path>, nx: usize, ny: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = std::fs::File::create(&path).map_err(|e| SimError::io(&path, e))?;
        let mut writer = BufWriter::new(file);
        let io = |e| SimError::io(&path, e);
        writer.write_all(SCROLLBACK_MAGIC).map_err(io)?;
        writer.write_all(&(nx as u64).to_le_bytes()).map_err(io)?;
        writer.write_all(&(ny as u64).to_le_bytes()).map_err(io)?;
        Ok(FileSink { path, writer })
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer
            .flush()
            .map_err(|e| SimError::io(&self.path, e))
    }
}

impl ScrollbackSink for FileSink {
    fn emit(&mut self, slice: &ScrollbackSlice) -> Result<()> {
        let io = |e| SimError::io(&self.path, e);
        self.writer
            .write_all(&slice.global_z.to_le_bytes())
            .map_err(io)?;
        for v in slice.phi.iter().chain(slice.mu.iter()) {
            self.writer.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }
}

/// Reads a scrollback file written by [`FileSink`].
pub fn read_scrollback(path: impl AsRef<Path>) -> Result<Vec<ScrollbackSlice>> {
    let path = path.as_ref();
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| SimError::io(path, e))?;
    if data.len() < 24 || &data[0..8] != SCROLLBACK_MAGIC {
        return Err(SimError::Format("bad scrollback header".into()));
    }
    let u64_at = |o: usize| u64::from_le_bytes(data[o..o + 8].try_into().unwrap());
    let nx = u64_at(8) as usize;
    let ny = u64_at(16) as usize;
    let per = nx * ny;
    let rec = 8 + 4 * per * (N_PHASES + N_COMP);
    let body = &data[24..];
    if body.len() % rec != 0 {
        return Err(SimError::Format("truncated scrollback record".into()));
    }
    let mut out = Vec::with_capacity(body.len() / rec);
    for chunk in body.chunks_exact(rec) {
        let global_z = u64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let floats: Vec<f32> = chunk[8..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        out.push(ScrollbackSlice {
            global_z,
            nx,
            ny,
            phi: floats[..N_PHASES * per].to_vec(),
            mu: floats[N_PHASES * per..].to_vec(),
        });
    }
    Ok(out)
}

/// Summary of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub steps: u64,
    pub final_time: f64,
    pub wall_seconds: f64,
    /// Million lattice-cell updates per second over the whole run.
    pub mlups: f64,
    pub counters: SweepCounters,
    pub phase_fractions: [f64; N_PHASES],
    pub front_z: Option<i64>,
    pub window_shifts: u64,
}

/// The simulation state and step drivers.
pub struct Simulation {
    pub grid: BlockGrid,
    pub params: ModelParams,
    pub th: PhaseThermo,
    pub sched: TemperatureSchedule,
    pub bc: BoundarySpec,
    pub dt: f64,
    pub time: f64,
    pub step: u64,
    /// Global z index of window-local slice 0.
    pub window_origin_z: i64,
    pub variant: KernelVariant,
    pub overlap: OverlapMode,
    pub window: Option<WindowConfig>,
    pub scrollback: Option<Box<dyn ScrollbackSink>>,
    pub events: Option<EventLog>,
    pub last_counters: SweepCounters,
    pub total_counters: SweepCounters,
    pub window_shifts: u64,
    pending_mu_exchange: bool,
}

impl Simulation {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: BlockGrid,
        params: ModelParams,
        th: PhaseThermo,
        sched: TemperatureSchedule,
        bc: BoundarySpec,
        dt: f64,
        variant: KernelVariant,
        overlap: OverlapMode,
    ) -> Result<Self> {
        params.validate()?;
        th.validate()?;
        if bc.periodic_axes()? != grid.periodic {
            return Err(SimError::Config(
                "boundary periodicity does not match the block grid".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(SimError::Config("dt must be > 0".into()));
        }
        let mut sim = Simulation {
            grid,
            params,
            th,
            sched,
            bc,
            dt,
            time: 0.0,
            step: 0,
            window_origin_z: 0,
            variant,
            overlap,
            window: None,
            scrollback: None,
            events: None,
            last_counters: SweepCounters::default(),
            total_counters: SweepCounters::default(),
            window_shifts: 0,
            pending_mu_exchange: false,
        };
        sim.refresh_src_ghosts();
        Ok(sim)
    }

    pub fn refresh_src_ghosts(&mut self) {
        for field in [FieldId::Phi, FieldId::Mu] {
            exchange_ghost_layers(&mut self.grid, field, Buffer::Src);
            apply_boundaries(&mut self.grid, field, Buffer::Src, &self.bc);
        }
    }

    fn fold(results: Vec<SweepCounters>) -> SweepCounters {
        let mut total = SweepCounters::default();
        for c in &results {
            total.merge(c);
        }
        total
    }

    /// Advance the state by one time step.
    pub fn advance(&mut self) -> Result<()> {
        let phi_counters = if self.pending_mu_exchange {
            self.phi_sweep_hiding_mu_exchange()?
        } else {
            self.phi_sweep_plain()?
        };
        let mut counters = phi_counters;

        if self.overlap.hides_phi() {
            counters.merge(&self.mu_sweep_split()?);
        } else {
            exchange_ghost_layers(&mut self.grid, FieldId::Phi, Buffer::Dst);
            apply_boundaries(&mut self.grid, FieldId::Phi, Buffer::Dst, &self.bc);
            counters.merge(&self.mu_sweep_full()?);
        }

        if !self.overlap.defers_mu() {
            exchange_ghost_layers(&mut self.grid, FieldId::Mu, Buffer::Dst);
            apply_boundaries(&mut self.grid, FieldId::Mu, Buffer::Dst, &self.bc);
        }
        for b in &mut self.grid.blocks {
            b.phi.swap();
            b.mu.swap();
        }
        self.pending_mu_exchange = self.overlap.defers_mu();
        self.time += self.dt;
        self.step += 1;
        self.last_counters = counters;
        self.total_counters.merge(&counters);
        self.maybe_shift_window()?;
        Ok(())
    }

    fn kernel_time_ctx<'a>(
        params: &'a ModelParams,
        th: &'a PhaseThermo,
        sched: &'a TemperatureSchedule,
        dx: f64,
        dt: f64,
        time: f64,
        step: u64,
        window_origin_z: i64,
        variant: KernelVariant,
    ) -> KernelCtx<'a> {
        KernelCtx {
            params,
            th,
            sched,
            dx,
            dt,
            time,
            step,
            window_origin_z,
            variant,
        }
    }

    pub(crate) fn phi_sweep_plain(&mut self) -> Result<SweepCounters> {
        let ctx = Self::kernel_time_ctx(
            &self.params,
            &self.th,
            &self.sched,
            self.grid.spec.dx,
            self.dt,
            self.time,
            self.step,
            self.window_origin_z,
            self.variant,
        );
        if let Some(e) = &self.events {
            e.emit(ctx.step, "phi_sweep begin");
        }
        let results: Result<Vec<SweepCounters>> = self
            .grid
            .blocks
            .par_iter_mut()
            .map(|b| sweep_block_phi(&ctx, b))
            .collect();
        if let Some(e) = &self.events {
            e.emit(self.step, "phi_sweep end");
        }
        Ok(Self::fold(results?))
    }

    /// Phi sweep with the deferred mu source-ghost refresh hidden behind
    /// it. Safe because the phi kernel reads mu only at cell centers.
    fn phi_sweep_hiding_mu_exchange(&mut self) -> Result<SweepCounters> {
        let ctx = Self::kernel_time_ctx(
            &self.params,
            &self.th,
            &self.sched,
            self.grid.spec.dx,
            self.dt,
            self.time,
            self.step,
            self.window_origin_z,
            self.variant,
        );
        let step = self.step;
        let events = self.events.as_ref();
        if let Some(e) = events {
            e.emit(step, "phi_sweep begin");
        }
        let mut dsts: Vec<Field> = self
            .grid
            .blocks
            .iter_mut()
            .map(|b| std::mem::replace(&mut b.phi.dst, Field::new([0, 0, 0], 0)))
            .collect();
        let grid = &self.grid;
        let (sweep_res, messages) = rayon::join(
            || -> Result<Vec<SweepCounters>> {
                grid.blocks
                    .par_iter()
                    .zip(dsts.par_iter_mut())
                    .map(|(b, dst)| sweep_phi_fields(&ctx, b.origin, &b.phi.src, &b.mu.src, dst))
                    .collect()
            },
            || {
                if let Some(e) = events {
                    e.emit(step, "mu_exchange begin");
                }
                let m = pack_ghost_messages(grid, FieldId::Mu, Buffer::Src);
                if let Some(e) = events {
                    e.emit(step, "mu_exchange end");
                }
                m
            },
        );
        for (b, dst) in self.grid.blocks.iter_mut().zip(dsts) {
            b.phi.dst = dst;
        }
        if let Some(e) = &self.events {
            e.emit(step, "phi_sweep end");
        }
        unpack_ghost_messages(&mut self.grid, FieldId::Mu, Buffer::Src, &messages);
        apply_boundaries(&mut self.grid, FieldId::Mu, Buffer::Src, &self.bc);
        self.pending_mu_exchange = false;
        Ok(Self::fold(sweep_res?))
    }

    pub(crate) fn mu_sweep_full(&mut self) -> Result<SweepCounters> {
        let ctx = Self::kernel_time_ctx(
            &self.params,
            &self.th,
            &self.sched,
            self.grid.spec.dx,
            self.dt,
            self.time,
            self.step,
            self.window_origin_z,
            self.variant,
        );
        if let Some(e) = &self.events {
            e.emit(ctx.step, "mu_sweep begin");
        }
        let results: Result<Vec<SweepCounters>> = self
            .grid
            .blocks
            .par_iter_mut()
            .map(|b| sweep_block_mu(&ctx, b, MuScope::Full))
            .collect();
        if let Some(e) = &self.events {
            e.emit(self.step, "mu_sweep end");
        }
        Ok(Self::fold(results?))
    }

    /// Split mu sweep with the phi destination exchange hidden behind the
    /// interior (local) part, whose stencils never touch phi dst ghosts.
    fn mu_sweep_split(&mut self) -> Result<SweepCounters> {
        let ctx = Self::kernel_time_ctx(
            &self.params,
            &self.th,
            &self.sched,
            self.grid.spec.dx,
            self.dt,
            self.time,
            self.step,
            self.window_origin_z,
            self.variant,
        );
        let step = self.step;
        let events = self.events.as_ref();
        if let Some(e) = events {
            e.emit(step, "mu_sweep_local begin");
        }
        let mut dsts: Vec<Field> = self
            .grid
            .blocks
            .iter_mut()
            .map(|b| std::mem::replace(&mut b.mu.dst, Field::new([0, 0, 0], 0)))
            .collect();
        let mut lsteps: Vec<Option<u64>> =
            self.grid.blocks.iter().map(|b| b.mu_local_step).collect();
        let grid = &self.grid;
        let (local_res, messages) = rayon::join(
            || -> Result<Vec<SweepCounters>> {
                grid.blocks
                    .par_iter()
                    .zip(dsts.par_iter_mut().zip(lsteps.par_iter_mut()))
                    .map(|(b, (dst, ls))| {
                        sweep_mu_fields(
                            &ctx,
                            b.index,
                            b.origin,
                            &b.phi.src,
                            &b.phi.dst,
                            &b.mu.src,
                            dst,
                            ls,
                            MuScope::LocalOnly,
                        )
                    })
                    .collect()
            },
            || {
                if let Some(e) = events {
                    e.emit(step, "phi_exchange begin");
                }
                let m = pack_ghost_messages(grid, FieldId::Phi, Buffer::Dst);
                if let Some(e) = events {
                    e.emit(step, "phi_exchange end");
                }
                m
            },
        );
        for ((b, dst), ls) in self.grid.blocks.iter_mut().zip(dsts).zip(lsteps) {
            b.mu.dst = dst;
            b.mu_local_step = ls;
        }
        if let Some(e) = &self.events {
            e.emit(step, "mu_sweep_local end");
        }
        let mut total = Self::fold(local_res?);
        unpack_ghost_messages(&mut self.grid, FieldId::Phi, Buffer::Dst, &messages);
        apply_boundaries(&mut self.grid, FieldId::Phi, Buffer::Dst, &self.bc);
        if let Some(e) = &self.events {
            e.emit(step, "mu_sweep_neighbor begin");
        }
        let ctx = Self::kernel_time_ctx(
            &self.params,
            &self.th,
            &self.sched,
            self.grid.spec.dx,
            self.dt,
            self.time,
            self.step,
            self.window_origin_z,
            self.variant,
        );
        let results: Result<Vec<SweepCounters>> = self
            .grid
            .blocks
            .par_iter_mut()
            .map(|b| sweep_block_mu(&ctx, b, MuScope::NeighborOnly))
            .collect();
        if let Some(e) = &self.events {
            e.emit(step, "mu_sweep_neighbor end");
        }
        total.merge(&Self::fold(results?));
        Ok(total)
    }

    /// Complete any deferred mu ghost refresh so the source state is fully
    /// consistent (run end, window shifts, checkpoints).
    pub fn flush_pending_exchange(&mut self) {
        if self.pending_mu_exchange {
            exchange_ghost_layers(&mut self.grid, FieldId::Mu, Buffer::Src);
            apply_boundaries(&mut self.grid, FieldId::Mu, Buffer::Src, &self.bc);
            self.pending_mu_exchange = false;
        }
    }

    /// Highest global z whose slice contains any cell below the liquid
    /// threshold; `None` when the window is entirely liquid.
    pub fn front_z(&self, liquid_threshold: f64) -> Option<i64> {
        let liquid = self.params.liquid;
        let mut best: Option<i64> = None;
        for b in &self.grid.blocks {
            let f = &b.phi.src;
            'slices: for k in (0..b.n[2]).rev() {
                let gz = self.window_origin_z + (b.origin[2] + k) as i64;
                if best.is_some_and(|z| z >= gz) {
                    break 'slices;
                }
                for j in 0..b.n[1] {
                    for i in 0..b.n[0] {
                        if f.get(liquid, i as isize, j as isize, k as isize) < liquid_threshold {
                            best = Some(gz);
                            continue 'slices;
                        }
                    }
                }
            }
        }
        best
    }

    /// Domain-average phase fractions of the source state.
    pub fn phase_fractions(&self) -> [f64; N_PHASES] {
        let mut sums = [0.0; N_PHASES];
        for b in &self.grid.blocks {
            for a in 0..N_PHASES {
                for k in 0..b.n[2] {
                    for j in 0..b.n[1] {
                        for i in 0..b.n[0] {
                            sums[a] += b.phi.src.get(a, i as isize, j as isize, k as isize);
                        }
                    }
                }
            }
        }
        let total = self.grid.spec.total_cells() as f64;
        sums.map(|s| s / total)
    }

    /// Shift the window up until the front keeps its configured distance
    /// from the top, emitting the displaced bottom slices.
    pub fn maybe_shift_window(&mut self) -> Result<()> {
        let Some(w) = self.window.clone() else {
            return Ok(());
        };
        let top_extent = self.grid.spec.global_cells[2] as i64;
        loop {
            let Some(front) = self.front_z(w.liquid_threshold) else {
                break;
            };
            let top = self.window_origin_z + top_extent - 1;
            if top - front >= w.front_offset_target as i64 {
                break;
            }
            self.flush_pending_exchange();
            self.shift_window_once(&w)?;
        }
        Ok(())
    }

    fn shift_window_once(&mut self, w: &WindowConfig) -> Result<()> {
        let [gx, gy, _] = self.grid.spec.global_cells;
        // Emit the departing bottom slice.
        if self.scrollback.is_some() {
            let per = gx * gy;
            let mut phi = vec![0f32; N_PHASES * per];
            let mut mu = vec![0f32; N_COMP * per];
            for b in &self.grid.blocks {
                if b.origin[2] != 0 {
                    continue;
                }
                for j in 0..b.n[1] {
                    for i in 0..b.n[0] {
                        let gi = (b.origin[1] + j) * gx + b.origin[0] + i;
                        for a in 0..N_PHASES {
                            phi[a * per + gi] = b.phi.src.get(a, i as isize, j as isize, 0) as f32;
                        }
                        for comp in 0..N_COMP {
                            mu[comp * per + gi] =
                                b.mu.src.get(comp, i as isize, j as isize, 0) as f32;
                        }
                    }
                }
            }
            let slice = ScrollbackSlice {
                global_z: self.window_origin_z as u64,
                nx: gx,
                ny: gy,
                phi,
                mu,
            };
            self.scrollback.as_mut().unwrap().emit(&slice)?;
        }
        // Capture the planes each block receives from the block above it.
        let [bx, by, bz] = self.grid.spec.blocks;
        let block_id =
            |ix: usize, iy: usize, iz: usize| -> usize { (iz * by + iy) * bx + ix };
        let feeds: Vec<Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>> = self
            .grid
            .blocks
            .iter()
            .map(|b| {
                let [ix, iy, iz] = b.index;
                if iz + 1 >= bz {
                    return None;
                }
                let above = &self.grid.blocks[block_id(ix, iy, iz + 1)];
                let plane = |f: &Field, comps: usize| -> Vec<Vec<f64>> {
                    (0..comps)
                        .map(|comp| {
                            let mut p = Vec::with_capacity(b.n[0] * b.n[1]);
                            for j in 0..b.n[1] {
                                for i in 0..b.n[0] {
                                    p.push(f.get(comp, i as isize, j as isize, 0));
                                }
                            }
                            p
                        })
                        .collect()
                };
                Some((plane(&above.phi.src, N_PHASES), plane(&above.mu.src, N_COMP)))
            })
            .collect();
        for (b, feed) in self.grid.blocks.iter_mut().zip(&feeds) {
            let n = b.n;
            let top = n[2] as isize - 1;
            let shift_field = |f: &mut Field, comps: usize| {
                for comp in 0..comps {
                    for z in 0..top {
                        for j in 0..n[1] as isize {
                            for i in 0..n[0] as isize {
                                let v = f.get(comp, i, j, z + 1);
                                f.set(comp, i, j, z, v);
                            }
                        }
                    }
                }
            };
            shift_field(&mut b.phi.src, N_PHASES);
            shift_field(&mut b.mu.src, N_COMP);
            match feed {
                Some((phi_planes, mu_planes)) => {
                    for comp in 0..N_PHASES {
                        for j in 0..n[1] {
                            for i in 0..n[0] {
                                b.phi.src.set(
                                    comp,
                                    i as isize,
                                    j as isize,
                                    top,
                                    phi_planes[comp][j * n[0] + i],
                                );
                            }
                        }
                    }
                    for comp in 0..N_COMP {
                        for j in 0..n[1] {
                            for i in 0..n[0] {
                                b.mu.src.set(
                                    comp,
                                    i as isize,
                                    j as isize,
                                    top,
                                    mu_planes[comp][j * n[0] + i],
                                );
                            }
                        }
                    }
                }
                None => {
                    // Topmost blocks are refilled with fresh melt.
                    for j in 0..n[1] as isize {
                        for i in 0..n[0] as isize {
                            for a in 0..N_PHASES {
                                let v = if a == self.params.liquid { 1.0 } else { 0.0 };
                                b.phi.src.set(a, i, j, top, v);
                            }
                            for comp in 0..N_COMP {
                                b.mu.src.set(comp, i, j, top, w.liquid_mu[comp]);
                            }
                        }
                    }
                }
            }
        }
        self.window_origin_z += 1;
        self.window_shifts += 1;
        self.refresh_src_ghosts();
        Ok(())
    }

    /// Run `steps` time steps, invoking `on_step` after each one.
    pub fn run(
        &mut self,
        steps: u64,
        mut on_step: impl FnMut(&mut Simulation) -> Result<()>,
    ) -> Result<RunReport> {
        self.maybe_shift_window()?;
        let start = Instant::now();
        for _ in 0..steps {
            self.advance()?;
            on_step(self)?;
        }
        self.flush_pending_exchange();
        let wall_seconds = start.elapsed().as_secs_f64();
        let updates = self.grid.spec.total_cells() as f64 * steps as f64;
        Ok(RunReport {
            steps,
            final_time: self.time,
            wall_seconds,
            mlups: updates / wall_seconds / 1e6,
            counters: self.total_counters,
            phase_fractions: self.phase_fractions(),
            front_z: self.front_z(
                self.window
                    .as_ref()
                    .map_or(0.95, |w| w.liquid_threshold),
            ),
            window_shifts: self.window_shifts,
        })
    }

    /// Access a block by block-grid coordinates.
    pub fn block(&self, index: [usize; 3]) -> &Block {
        let [bx, by, _] = self.grid.spec.blocks;
        &self.grid.blocks[(index[2] * by + index[1]) * bx + index[0]]
    }
}
