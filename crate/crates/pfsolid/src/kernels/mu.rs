//! Chemical-potential update kernel: finite-volume divergence of the
//! mobility flux and anti-trapping current, plus the chain-rule terms from
//! the already computed phase-field update, inverted through the diagonal
//! susceptibility.
//!
//! The concentration change is written in secant form,
//! `delta c = c(phi_new, mu, T_new) - c(phi_old, mu, T_old)`, and the
//! susceptibility is evaluated at `phi_new`. Because c is linear in mu this
//! makes the cell update exactly equivalent to a conservative finite-volume
//! update of c itself, so total solute telescopes over faces and is
//! conserved to rounding under periodic or zero-flux boundaries.

use crate::error::{Result, SimError};
use crate::lattice::{Block, BlockGrid, Buffer, Field, FieldId, FieldPair};
use crate::thermo::{
    h_weights, mobility, susceptibility_inverse, ModelParams, PhaseThermo, SliceCache,
    TemperatureSchedule,
};
use crate::{N_COMP, N_PHASES};

use super::{classify, fast_inv_sqrt, KernelCtx, SweepCounters};

/// Cell subset of one mu sweep. The split scopes support communication
/// hiding: `LocalOnly` touches only cells whose stencils stay inside the
/// block interior (valid before the phi ghost exchange has finished),
/// `NeighborOnly` finishes the boundary shell afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuScope {
    Full,
    LocalOnly,
    NeighborOnly,
}

/// One explicit Euler sweep of the chemical potential over (part of) a
/// block's interior. Reads `mu.src`, `phi.src`, and `phi.dst` ghosts
/// (`phi.dst` only for `Full`/`NeighborOnly`), writes `mu.dst`.
pub fn sweep_block_mu(ctx: &KernelCtx, block: &mut Block, scope: MuScope) -> Result<SweepCounters> {
    let index = block.index;
    let origin = block.origin;
    let Block {
        phi,
        mu,
        mu_local_step,
        ..
    } = block;
    let FieldPair {
        src: mu_src,
        dst: mu_dst,
    } = mu;
    sweep_mu_fields(
        ctx,
        index,
        origin,
        &phi.src,
        &phi.dst,
        mu_src,
        mu_dst,
        mu_local_step,
        scope,
    )
}

/// Field-level entry point for the mu sweep; lets the caller split the
/// destination and sequencing flag out of the block while other block data
/// stays shared.
#[allow(clippy::too_many_arguments)]
pub fn sweep_mu_fields(
    ctx: &KernelCtx,
    index: [usize; 3],
    origin: [usize; 3],
    phi_src: &Field,
    phi_dst: &Field,
    mu_src: &Field,
    mu_dst: &mut Field,
    mu_local_step: &mut Option<u64>,
    scope: MuScope,
) -> Result<SweepCounters> {
    match scope {
        MuScope::LocalOnly => *mu_local_step = Some(ctx.step),
        MuScope::NeighborOnly => {
            if *mu_local_step != Some(ctx.step) {
                return Err(SimError::Sequencing(format!(
                    "mu neighbor sweep without prior local sweep at step {} for block {index:?}",
                    ctx.step
                )));
            }
        }
        MuScope::Full => {}
    }
    let n = phi_src.n;
    let mut c = SweepCounters::default();
    let (nx, ny, nz) = (n[0], n[1], n[2]);
    let in_local =
        |i: usize, j: usize, k: usize| i >= 1 && i + 1 < nx && j >= 1 && j + 1 < ny && k >= 1 && k + 1 < nz;
    let offs: [[isize; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    for k in 0..nz {
        let gk = ctx.global_k(origin[2], k);
        // Lazily built per-slice caches for the source and destination
        // times; the per-cell (reference) path rebuilds them every cell.
        let mut slice: Option<(SliceCache, SliceCache)> = None;
        let build = || {
            (
                SliceCache::build(ctx.params, ctx.th, ctx.sched, gk, ctx.dx, ctx.time),
                SliceCache::build(ctx.params, ctx.th, ctx.sched, gk, ctx.dx, ctx.time + ctx.dt),
            )
        };
        for j in 0..ny {
            for i in 0..nx {
                let wanted = match scope {
                    MuScope::Full => true,
                    MuScope::LocalOnly => in_local(i, j, k),
                    MuScope::NeighborOnly => !in_local(i, j, k),
                };
                if !wanted {
                    continue;
                }
                c.cells += 1;
                if ctx.variant.slice_precompute && slice.is_none() {
                    slice = Some(build());
                    c.slice_cache_rebuilds += 2;
                }
                let cell_pair;
                let (cache_old, cache_new) = match &slice {
                    Some(p) => (&p.0, &p.1),
                    None => {
                        cell_pair = build();
                        (&cell_pair.0, &cell_pair.1)
                    }
                };
                let (x, y, z) = (i as isize, j as isize, k as isize);
                let nb = super::gather_phi_neighborhood(phi_src, x, y, z);
                let cls = classify(&nb);
                let skip_at = ctx.variant.shortcuts && cls.is_bulk();
                if skip_at {
                    c.terms_skipped += 1;
                }
                let mut div = [0.0; N_COMP];
                for (axis, o) in offs.iter().enumerate() {
                    let mcell = [x - o[0], y - o[1], z - o[2]];
                    let pcell = [x + o[0], y + o[1], z + o[2]];
                    let center = [x, y, z];
                    let (cbar_minus, cbar_plus) = if axis == 2 {
                        (&cache_old.cbar_face_down, &cache_old.cbar_face_up)
                    } else {
                        (&cache_old.cbar, &cache_old.cbar)
                    };
                    let fm = face_flux(
                        ctx, phi_src, phi_dst, mu_src, axis, mcell, center, cbar_minus, skip_at,
                        &mut c,
                    );
                    let fp = face_flux(
                        ctx, phi_src, phi_dst, mu_src, axis, center, pcell, cbar_plus, skip_at,
                        &mut c,
                    );
                    for comp in 0..N_COMP {
                        div[comp] += (fp[comp] - fm[comp]) / ctx.dx;
                    }
                }
                let phid = Block::phi_at(phi_dst, x, y, z);
                let mu_c = Block::mu_at(mu_src, x, y, z);
                let c_old = cache_old.concentration(ctx.th, &nb.c, &mu_c);
                let c_new = cache_new.concentration(ctx.th, &phid, &mu_c);
                let inv_chi = susceptibility_inverse(ctx.th, &phid);
                for comp in 0..N_COMP {
                    let v = mu_c[comp]
                        + inv_chi[comp] * (ctx.dt * div[comp] - (c_new[comp] - c_old[comp]));
                    if !v.is_finite() {
                        return Err(SimError::Numerical {
                            step: ctx.step,
                            x: (origin[0] + i) as i64,
                            y: (origin[1] + j) as i64,
                            z: gk,
                            detail: format!("non-finite chemical potential (component {comp})"),
                        });
                    }
                    mu_dst.set(comp, x, y, z, v);
                }
            }
        }
    }
    Ok(c)
}

/// Total flux of component c through one staggered face, evaluated in
/// fixed (minus, plus) argument order so both adjacent cells (and blocks)
/// compute bitwise identical values: mobility flux minus the anti-trapping
/// current projected on the face normal.
#[allow(clippy::too_many_arguments)]
fn face_flux(
    ctx: &KernelCtx,
    phi_src: &Field,
    phi_dst: &Field,
    mu_src: &Field,
    axis: usize,
    m: [isize; 3],
    p: [isize; 3],
    cbar_face: &[[f64; N_COMP]; N_PHASES],
    skip_at: bool,
    c: &mut SweepCounters,
) -> [f64; N_COMP] {
    let dx = ctx.dx;
    let pm = Block::phi_at(phi_src, m[0], m[1], m[2]);
    let pp = Block::phi_at(phi_src, p[0], p[1], p[2]);
    let mm = Block::mu_at(mu_src, m[0], m[1], m[2]);
    let mp = Block::mu_at(mu_src, p[0], p[1], p[2]);
    let mob_m = mobility(ctx.params, ctx.th, &pm);
    let mob_p = mobility(ctx.params, ctx.th, &pp);
    let mut f = [0.0; N_COMP];
    for i in 0..N_COMP {
        f[i] = 0.5 * (mob_m[i] + mob_p[i]) * (mp[i] - mm[i]) / dx;
    }
    // Anti-trapping is exactly zero in single-phase bulk (every guard
    // below fires), so the shortcut skip cannot change results.
    if skip_at {
        return f;
    }
    let liquid = ctx.params.liquid;
    let mut phi_face = [0.0; N_PHASES];
    for a in 0..N_PHASES {
        phi_face[a] = 0.5 * (pm[a] + pp[a]);
    }
    let phil = phi_face[liquid];
    if phil == 0.0 {
        return f;
    }
    // Face gradients: normal component by the two-point difference,
    // tangentials by averaging the two cells' central differences.
    let mut grad = [[0.0; 3]; N_PHASES];
    for a in 0..N_PHASES {
        grad[a][axis] = (pp[a] - pm[a]) / dx;
    }
    for t in 0..3 {
        if t == axis {
            continue;
        }
        let mut o = [0isize; 3];
        o[t] = 1;
        for a in 0..N_PHASES {
            let dm = (phi_src.get(a, m[0] + o[0], m[1] + o[1], m[2] + o[2])
                - phi_src.get(a, m[0] - o[0], m[1] - o[1], m[2] - o[2]))
                / (2.0 * dx);
            let dp = (phi_src.get(a, p[0] + o[0], p[1] + o[1], p[2] + o[2])
                - phi_src.get(a, p[0] - o[0], p[1] - o[1], p[2] - o[2]))
                / (2.0 * dx);
            grad[a][t] = 0.5 * (dm + dp);
        }
    }
    let gl = grad[liquid];
    let nl = (gl[0] * gl[0] + gl[1] * gl[1] + gl[2] * gl[2]).sqrt();
    let h_face = h_weights(&phi_face);
    let mu_face = [0.5 * (mm[0] + mp[0]), 0.5 * (mm[1] + mp[1])];
    let pref0 = std::f64::consts::PI * ctx.params.epsilon / 4.0;
    for alpha in 0..N_PHASES {
        if alpha == liquid {
            continue;
        }
        let pa = phi_face[alpha];
        let prod = pa * phil;
        if prod < 1e-9 {
            continue;
        }
        let ga = grad[alpha];
        let na = (ga[0] * ga[0] + ga[1] * ga[1] + ga[2] * ga[2]).sqrt();
        if na < 1e-12 || nl < 1e-12 {
            continue;
        }
        let dphidt = 0.5
            * ((phi_dst.get(alpha, m[0], m[1], m[2]) - pm[alpha])
                + (phi_dst.get(alpha, p[0], p[1], p[2]) - pp[alpha]))
            / ctx.dt;
        if dphidt == 0.0 {
            continue;
        }
        c.antitrapping_evals += 1;
        let inv = if ctx.variant.fast_inv_sqrt {
            fast_inv_sqrt(prod)
        } else {
            1.0 / prod.sqrt()
        };
        let ndot = (ga[0] * gl[0] + ga[1] * gl[1] + ga[2] * gl[2]) / (na * nl);
        let ne = ga[axis] / na;
        let pref = pref0 * pa * h_face[liquid] * inv * dphidt * ndot * ne;
        for i in 0..N_COMP {
            let cl = mu_face[i] / (2.0 * ctx.th.curvature[liquid][i]) + cbar_face[liquid][i];
            let ca = mu_face[i] / (2.0 * ctx.th.curvature[alpha][i]) + cbar_face[alpha][i];
            f[i] -= pref * (cl - ca);
        }
    }
    f
}

/// Domain total of the mixed concentration for one buffer at time `time`,
/// using the same cached evaluation path as the kernels.
pub fn total_concentration(
    params: &ModelParams,
    th: &PhaseThermo,
    sched: &TemperatureSchedule,
    grid: &BlockGrid,
    buffer: Buffer,
    window_origin_z: i64,
    time: f64,
) -> [f64; N_COMP] {
    let mut total = [0.0; N_COMP];
    for b in &grid.blocks {
        let phi_f = b.field(FieldId::Phi).buf(buffer);
        let mu_f = b.field(FieldId::Mu).buf(buffer);
        for k in 0..b.n[2] {
            let gk = window_origin_z + (b.origin[2] + k) as i64;
            let cache = SliceCache::build(params, th, sched, gk, grid.spec.dx, time);
            for j in 0..b.n[1] {
                for i in 0..b.n[0] {
                    let (x, y, z) = (i as isize, j as isize, k as isize);
                    let cv = cache.concentration(
                        th,
                        &Block::phi_at(phi_f, x, y, z),
                        &Block::mu_at(mu_f, x, y, z),
                    );
                    for comp in 0..N_COMP {
                        total[comp] += cv[comp];
                    }
                }
            }
        }
    }
    total
}
