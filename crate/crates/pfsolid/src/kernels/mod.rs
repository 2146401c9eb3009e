//! The two per-cell update kernels and their shared plumbing: simplex
//! projection, cell classification, optimization switches, and work
//! counters.
//!
//! All optimization variants are required to produce results that are
//! bitwise identical to the reference path; the variant flags only change
//! how much work is recomputed versus reused.

pub mod mu;
pub mod phi;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lattice::{Block, Field};
use crate::thermo::{ModelParams, PhaseThermo, PhiNeighborhood, TemperatureSchedule};
use crate::{N_PHASES, SimError};

pub use mu::{sweep_block_mu, sweep_mu_fields, total_concentration, MuScope};
pub use phi::{sweep_block_phi, sweep_phi_fields};

/// Optimization switches for both kernels.
///
/// `slice_precompute` builds the per-z thermodynamic cache once per slice
/// instead of once per cell. `staggered_buffering` reuses already computed
/// staggered face values from the previous cell, row, and slab.
/// `shortcuts` skips zero-work terms in single-phase bulk cells.
/// `fast_inv_sqrt` replaces the anti-trapping inverse square root by a
/// bit-trick approximation (the only switch that changes results).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelVariant {
    pub slice_precompute: bool,
    pub staggered_buffering: bool,
    pub shortcuts: bool,
    pub fast_inv_sqrt: bool,
}

impl Default for KernelVariant {
    fn default() -> Self {
        KernelVariant::OPT_FULL
    }
}

impl KernelVariant {
    /// Straightforward per-cell evaluation of every term.
    pub const REFERENCE: Self = KernelVariant {
        slice_precompute: false,
        staggered_buffering: false,
        shortcuts: false,
        fast_inv_sqrt: false,
    };
    /// Slice cache and staggered buffering, no bulk shortcut.
    pub const OPT_NOSHORTCUT: Self = KernelVariant {
        slice_precompute: true,
        staggered_buffering: true,
        shortcuts: false,
        fast_inv_sqrt: false,
    };
    /// All exact optimizations.
    pub const OPT_FULL: Self = KernelVariant {
        slice_precompute: true,
        staggered_buffering: true,
        shortcuts: true,
        fast_inv_sqrt: false,
    };

    pub fn name(&self) -> &'static str {
        match (self.slice_precompute, self.staggered_buffering, self.shortcuts) {
            (false, false, false) => "reference",
            (true, true, false) => "opt-noshortcut",
            (true, true, true) => "opt-full",
            _ => "custom",
        }
    }
}

// In configuration files a variant is its name, not the switch struct.
impl Serialize for KernelVariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for KernelVariant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for KernelVariant {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "reference" => Ok(KernelVariant::REFERENCE),
            "opt-noshortcut" => Ok(KernelVariant::OPT_NOSHORTCUT),
            "opt-full" => Ok(KernelVariant::OPT_FULL),
            other => Err(SimError::Config(format!(
                "unknown kernel variant '{other}' (expected reference | opt-noshortcut | opt-full)"
            ))),
        }
    }
}

/// Deterministic per-sweep work counters. Per-block counts are merged in
/// block order so totals do not depend on worker scheduling.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SweepCounters {
    /// Interior cells visited.
    pub cells: u64,
    /// Bulk cells whose zero-work terms were skipped.
    pub terms_skipped: u64,
    /// Driving-force evaluations (one per non-skipped phi-kernel cell).
    pub driving_force_evals: u64,
    /// Anti-trapping face terms fully evaluated past all guards.
    pub antitrapping_evals: u64,
    /// Staggered face values computed.
    pub staggered_evals: u64,
    /// Staggered face values reused from a buffer.
    pub staggered_reuses: u64,
    /// Slice-cache builds (zero when precompute is off).
    pub slice_cache_rebuilds: u64,
}

impl SweepCounters {
    pub fn merge(&mut self, o: &SweepCounters) {
        self.cells += o.cells;
        self.terms_skipped += o.terms_skipped;
        self.driving_force_evals += o.driving_force_evals;
        self.antitrapping_evals += o.antitrapping_evals;
        self.staggered_evals += o.staggered_evals;
        self.staggered_reuses += o.staggered_reuses;
        self.slice_cache_rebuilds += o.slice_cache_rebuilds;
    }
}

/// Read-only inputs shared by both kernel sweeps for one time step.
#[derive(Clone, Copy)]
pub struct KernelCtx<'a> {
    pub params: &'a ModelParams,
    pub th: &'a PhaseThermo,
    pub sched: &'a TemperatureSchedule,
    pub dx: f64,
    pub dt: f64,
    /// Simulation time of the source state.
    pub time: f64,
    pub step: u64,
    /// Global z index of window-local z = 0 (moving-window offset).
    pub window_origin_z: i64,
    pub variant: KernelVariant,
}

impl KernelCtx<'_> {
    /// Global z index of local slice `k` of `block`.
    #[inline]
    pub fn global_k(&self, block_origin_z: usize, k: usize) -> i64 {
        self.window_origin_z + block_origin_z as i64 + k as i64
    }
}

/// Euclidean projection onto the unit simplex. Inputs already on the
/// simplex (componentwise >= 0, exact unit sum) are returned unchanged so
/// quiescent cells stay bitwise constant. Returns `None` for non-finite
/// input.
pub fn project_simplex(v: &[f64; N_PHASES]) -> Option<[f64; N_PHASES]> {
    let mut sum = 0.0;
    let mut feasible = true;
    for &x in v {
        if !x.is_finite() {
            return None;
        }
        if x < 0.0 {
            feasible = false;
        }
        sum += x;
    }
    if feasible && sum == 1.0 {
        return Some(*v);
    }
    // Sort descending, then find the largest support with positive entries.
    let mut u = *v;
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        acc += uj;
        let cand = (acc - 1.0) / (j + 1) as f64;
        if uj - cand > 0.0 {
            theta = cand;
        }
    }
    let mut out = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        out[a] = (v[a] - theta).max(0.0);
    }
    Some(out)
}

/// Local cell classification over the D3C7 neighborhood.
#[derive(Debug, Clone, Copy)]
pub struct CellClass {
    /// Phases present (phi > 0) anywhere in the neighborhood.
    pub active: [bool; N_PHASES],
    pub n_active: usize,
}

impl CellClass {
    /// Single-phase bulk: exactly one phase present in the whole
    /// neighborhood, which on the simplex means all seven cells are pure.
    #[inline]
    pub fn is_bulk(&self) -> bool {
        self.n_active == 1
    }
}

pub fn classify(nb: &PhiNeighborhood) -> CellClass {
    let mut active = [false; N_PHASES];
    for cell in [&nb.c, &nb.xm, &nb.xp, &nb.ym, &nb.yp, &nb.zm, &nb.zp] {
        for a in 0..N_PHASES {
            if cell[a] > 0.0 {
                active[a] = true;
            }
        }
    }
    let n_active = active.iter().filter(|&&x| x).count();
    CellClass { active, n_active }
}

/// Gather the D3C7 phase-vector neighborhood from a field with ghosts.
#[inline]
pub fn gather_phi_neighborhood(f: &Field, x: isize, y: isize, z: isize) -> PhiNeighborhood {
    PhiNeighborhood {
        c: Block::phi_at(f, x, y, z),
        xm: Block::phi_at(f, x - 1, y, z),
        xp: Block::phi_at(f, x + 1, y, z),
        ym: Block::phi_at(f, x, y - 1, z),
        yp: Block::phi_at(f, x, y + 1, z),
        zm: Block::phi_at(f, x, y, z - 1),
        zp: Block::phi_at(f, x, y, z + 1),
    }
}

/// Bit-trick approximate 1/sqrt(x) with two Newton refinements
/// (relative error below 1e-5 over the anti-trapping operand range).
#[inline]
pub fn fast_inv_sqrt(x: f64) -> f64 {
    let i = 0x5FE6EB50C7B537A9u64.wrapping_sub(x.to_bits() >> 1);
    let mut y = f64::from_bits(i);
    y *= 1.5 - 0.5 * x * y * y;
    y *= 1.5 - 0.5 * x * y * y;
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{project_simplex_oracle, random_simplex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn projection_matches_active_set_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        for _ in 0..500 {
            let v: [f64; N_PHASES] = std::array::from_fn(|_| rng.gen::<f64>() * 3.0 - 1.0);
            let got = project_simplex(&v).unwrap();
            let want = project_simplex_oracle(&v);
            for a in 0..N_PHASES {
                assert!(
                    (got[a] - want[a]).abs() < 1e-12,
                    "{v:?}: {got:?} vs {want:?}"
                );
            }
            assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_preserves_feasible_points_bitwise() {
        let mut rng = ChaCha12Rng::seed_from_u64(101);
        assert_eq!(
            project_simplex(&[1.0, 0.0, 0.0, 0.0]).unwrap(),
            [1.0, 0.0, 0.0, 0.0]
        );
        for _ in 0..50 {
            let phi = random_simplex(&mut rng);
            if phi.iter().sum::<f64>() == 1.0 {
                assert_eq!(project_simplex(&phi).unwrap(), phi);
            }
        }
    }

    #[test]
    fn projection_rejects_non_finite() {
        assert!(project_simplex(&[f64::NAN, 0.0, 0.0, 0.0]).is_none());
        assert!(project_simplex(&[0.1, f64::INFINITY, 0.0, 0.0]).is_none());
    }

    #[test]
    fn classify_bulk_and_interface() {
        let pure = [0.0, 0.0, 0.0, 1.0];
        let nb = PhiNeighborhood {
            c: pure,
            xm: pure,
            xp: pure,
            ym: pure,
            yp: pure,
            zm: pure,
            zp: pure,
        };
        let cls = classify(&nb);
        assert!(cls.is_bulk());
        assert_eq!(cls.active, [false, false, false, true]);
        // A trace of another phase in one neighbor breaks bulk.
        let mut nb2 = nb;
        nb2.zp = [1e-12, 0.0, 0.0, 1.0 - 1e-12];
        let cls2 = classify(&nb2);
        assert!(!cls2.is_bulk());
        assert_eq!(cls2.n_active, 2);
    }

    #[test]
    fn fast_inv_sqrt_accuracy() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..200 {
            let x = 10f64.powf(rng.gen::<f64>() * 12.0 - 9.0);
            let approx = fast_inv_sqrt(x);
            let exact = 1.0 / x.sqrt();
            assert!((approx - exact).abs() / exact < 1e-5, "x = {x}");
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            KernelVariant::REFERENCE,
            KernelVariant::OPT_NOSHORTCUT,
            KernelVariant::OPT_FULL,
        ] {
            assert_eq!(v.name().parse::<KernelVariant>().unwrap(), v);
        }
        assert!("fancy".parse::<KernelVariant>().is_err());
    }
}
