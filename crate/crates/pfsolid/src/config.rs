//! Run configuration: one TOML file with nested sections covering the
//! domain, the physical model, initialization, boundaries, the optional
//! moving window, and run control. Every value is range-checked when the
//! simulation is built, and the effective configuration (after command
//! line overrides) is echoed into the output directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::KernelModel;
use crate::error::{Result, SimError};
use crate::init::{relax_interfaces, voronoi_init, VoronoiInit};
use crate::kernels::KernelVariant;
use crate::lattice::{build_block_grid, BoundarySpec, DomainSpec};
use crate::thermo::{ModelParams, PhaseThermo, TemperatureSchedule};
use crate::timeloop::{OverlapMode, Simulation, WindowConfig};
use crate::{N_COMP, N_PHASES};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainConfig {
    pub cells: [usize; 3],
    pub dx: f64,
    pub blocks: [usize; 3],
}

/// Initial condition: Voronoi grain slab under melt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitConfig {
    pub seed: u64,
    pub n_grains: usize,
    pub solid_height: usize,
    pub fractions: [f64; N_PHASES],
    pub liquid_mu: [f64; N_COMP],
    /// Phase-field-only pre-relaxation sub-steps.
    #[serde(default)]
    pub relax_steps: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BoundaryConfig {
    /// Periodic in all three axes.
    Periodic,
    /// Periodic laterally; no-flux bottom, fixed melt potential on top.
    Directional { top_mu: [f64; N_COMP] },
}

impl BoundaryConfig {
    pub fn build(&self) -> BoundarySpec {
        match self {
            BoundaryConfig::Periodic => BoundarySpec::fully_periodic(),
            BoundaryConfig::Directional { top_mu } => BoundarySpec::directional(*top_mu),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowSection {
    #[serde(default = "default_liquid_threshold")]
    pub liquid_threshold: f64,
    #[serde(default = "default_front_offset")]
    pub front_offset_target: usize,
}

fn default_liquid_threshold() -> f64 {
    0.95
}

fn default_front_offset() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    pub steps: u64,
    /// Explicit Euler step; omitted = stability heuristic from the model.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub variant: KernelVariant,
    #[serde(default = "default_overlap")]
    pub overlap: OverlapMode,
    pub output_dir: String,
    /// 0 disables periodic checkpoints (a final one is always written).
    #[serde(default)]
    pub checkpoint_every: u64,
    /// 0 disables periodic mesh emission.
    #[serde(default)]
    pub mesh_every: u64,
    #[serde(default = "default_metrics_every")]
    pub metrics_every: u64,
    /// Coarsening ratio for emitted meshes.
    #[serde(default = "default_mesh_ratio")]
    pub mesh_ratio: f64,
}

fn default_threads() -> usize {
    1
}

fn default_overlap() -> OverlapMode {
    OverlapMode::None
}

fn default_metrics_every() -> u64 {
    10
}

fn default_mesh_ratio() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub model: ModelParams,
    pub thermo: PhaseThermo,
    pub schedule: TemperatureSchedule,
    pub init: InitConfig,
    pub boundaries: BoundaryConfig,
    #[serde(default)]
    pub window: Option<WindowSection>,
    pub run: RunSection,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The time step actually used: explicit value or stability heuristic.
    pub fn dt(&self) -> f64 {
        self.run
            .dt
            .unwrap_or_else(|| stable_dt(&self.model, self.domain.dx))
    }

    /// Validate everything and build the initialized simulation.
    pub fn build(&self) -> Result<Simulation> {
        let spec = DomainSpec::new(self.domain.cells, self.domain.dx, self.domain.blocks);
        let bc = self.boundaries.build();
        let periodic = bc.periodic_axes()?;
        let mut grid = build_block_grid(&spec, periodic)?;
        voronoi_init(
            &mut grid,
            &self.model,
            &VoronoiInit {
                seed: self.init.seed,
                n_grains: self.init.n_grains,
                solid_height: self.init.solid_height,
                fractions: self.init.fractions,
                liquid_mu: self.init.liquid_mu,
            },
        )?;
        let mut sim = Simulation::new(
            grid,
            self.model.clone(),
            self.thermo.clone(),
            self.schedule,
            bc,
            self.dt(),
            self.run.variant,
            self.run.overlap,
        )?;
        if let Some(w) = &self.window {
            sim.window = Some(WindowConfig {
                liquid_threshold: w.liquid_threshold,
                front_offset_target: w.front_offset_target,
                liquid_mu: self.init.liquid_mu,
            });
        }
        if self.init.relax_steps > 0 {
            relax_interfaces(&mut sim, self.init.relax_steps)?;
        }
        Ok(sim)
    }
}

/// Conservative explicit-Euler step: a fifth of the tighter of the solute
/// diffusion limit and the interface relaxation limit on a 7-point stencil.
pub fn stable_dt(params: &ModelParams, dx: f64) -> f64 {
    let d_max = params
        .diff
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max);
    let gamma_max = params
        .gamma
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max);
    let tau_min = params.tau.iter().copied().fold(f64::INFINITY, f64::min);
    let dt_mu = dx * dx / (6.0 * d_max);
    let dt_phi = dx * dx * tau_min / (6.0 * gamma_max);
    0.2 * dt_mu.min(dt_phi)
}

/// Cost-model defaults for the roofline report (machine-model inputs, not
/// re-derived per build).
pub fn default_kernel_model() -> KernelModel {
    KernelModel::default()
}
