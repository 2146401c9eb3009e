//! Phase-field update kernel: explicit Euler step of the order-parameter
//! evolution with obstacle potential, gradient energy, and grand-potential
//! driving force, constrained to the simplex.
//!
//! The evolution is restricted to the locally active phases (those present
//! anywhere in the D3C7 neighborhood); the simplex constraint is enforced
//! by subtracting the active-set mean of the right-hand sides and
//! projecting. In single-phase bulk the update is exactly zero, which the
//! shortcut variant exploits by copying without evaluating any term.

use crate::error::{Result, SimError};
use crate::lattice::{Block, Field, FieldPair};
use crate::thermo::{grad_energy_cell, grad_energy_face, h_interp, obstacle_deriv, SliceCache};
use crate::N_PHASES;

use super::{classify, gather_phi_neighborhood, project_simplex, KernelCtx, SweepCounters};

type FaceVal = [f64; N_PHASES];

/// One explicit Euler sweep of the phase field over a block's interior,
/// reading `phi.src`/`mu.src` ghosts and writing `phi.dst`.
pub fn sweep_block_phi(ctx: &KernelCtx, block: &mut Block) -> Result<SweepCounters> {
    let origin = block.origin;
    let Block { phi, mu, .. } = block;
    let FieldPair {
        src: phi_src,
        dst: phi_dst,
    } = phi;
    sweep_phi_fields(ctx, origin, phi_src, &mu.src, phi_dst)
}

/// Field-level entry point for the phase sweep; lets the caller split the
/// destination out of the block while other block data stays shared.
pub fn sweep_phi_fields(
    ctx: &KernelCtx,
    origin: [usize; 3],
    phi_src: &Field,
    mu_src: &Field,
    phi_dst: &mut Field,
) -> Result<SweepCounters> {
    let n = phi_src.n;
    let mut c = SweepCounters::default();
    let (nx, ny) = (n[0], n[1]);
    let buffering = ctx.variant.staggered_buffering;
    // Staggered face buffers: previous cell (x), previous row (y),
    // previous slab (z). `None` marks positions a skipped cell left unset.
    let mut zbuf: Vec<Option<FaceVal>> = vec![None; nx * ny];
    let mut ybuf: Vec<Option<FaceVal>> = vec![None; nx];
    for k in 0..n[2] {
        let gk = ctx.global_k(origin[2], k);
        let slice = if ctx.variant.slice_precompute {
            c.slice_cache_rebuilds += 1;
            Some(SliceCache::build(
                ctx.params, ctx.th, ctx.sched, gk, ctx.dx, ctx.time,
            ))
        } else {
            None
        };
        ybuf.iter_mut().for_each(|v| *v = None);
        for j in 0..ny {
            let mut xprev: Option<FaceVal> = None;
            for i in 0..nx {
                let (x, y, z) = (i as isize, j as isize, k as isize);
                c.cells += 1;
                let nb = gather_phi_neighborhood(phi_src, x, y, z);
                let cls = classify(&nb);
                if cls.is_bulk() && ctx.variant.shortcuts {
                    // Exact fixed point: copy and invalidate face buffers.
                    for a in 0..N_PHASES {
                        phi_dst.set(a, x, y, z, nb.c[a]);
                    }
                    c.terms_skipped += 1;
                    xprev = None;
                    ybuf[i] = None;
                    zbuf[j * nx + i] = None;
                    continue;
                }
                let cell_cache;
                let cache = match &slice {
                    Some(s) => s,
                    None => {
                        cell_cache =
                            SliceCache::build(ctx.params, ctx.th, ctx.sched, gk, ctx.dx, ctx.time);
                        &cell_cache
                    }
                };

                // Staggered faces: minus faces come from the buffers when
                // valid, plus faces are always evaluated here.
                let take =
                    |slot: &mut Option<FaceVal>, c: &mut SweepCounters, minus, plus| match slot
                        .take()
                    {
                        Some(v) if buffering => {
                            c.staggered_reuses += 1;
                            v
                        }
                        _ => {
                            c.staggered_evals += 1;
                            grad_energy_face(ctx.params, minus, plus, ctx.dx)
                        }
                    };
                let vxm = take(&mut xprev, &mut c, &nb.xm, &nb.c);
                let vym = take(&mut ybuf[i], &mut c, &nb.ym, &nb.c);
                let vzm = take(&mut zbuf[j * nx + i], &mut c, &nb.zm, &nb.c);
                c.staggered_evals += 3;
                let vxp = grad_energy_face(ctx.params, &nb.c, &nb.xp, ctx.dx);
                let vyp = grad_energy_face(ctx.params, &nb.c, &nb.yp, ctx.dx);
                let vzp = grad_energy_face(ctx.params, &nb.c, &nb.zp, ctx.dx);
                if buffering {
                    xprev = Some(vxp);
                    ybuf[i] = Some(vyp);
                    zbuf[j * nx + i] = Some(vzp);
                }
                let cell_part = grad_energy_cell(ctx.params, &nb, ctx.dx);
                let mut grad_term = [0.0; N_PHASES];
                for a in 0..N_PHASES {
                    grad_term[a] = cell_part[a]
                        - ((vxp[a] - vxm[a]) + (vyp[a] - vym[a]) + (vzp[a] - vzm[a])) / ctx.dx;
                }

                let obst = obstacle_deriv(ctx.params, &nb.c);
                // Driving force sum_b psi_b dh_b/dphi_a at the slice state.
                c.driving_force_evals += 1;
                let mu_c = Block::mu_at(mu_src, x, y, z);
                let (_, dh) = h_interp(&nb.c);
                let mut psi = [0.0; N_PHASES];
                for b in 0..N_PHASES {
                    psi[b] = cache.psi(ctx.th, b, &mu_c);
                }

                let mut rhs = [0.0; N_PHASES];
                let mut rhs_sum = 0.0;
                let mut tau_sum = 0.0;
                for a in 0..N_PHASES {
                    if !cls.active[a] {
                        continue;
                    }
                    let mut drive = 0.0;
                    for b in 0..N_PHASES {
                        drive += psi[b] * dh[b][a];
                    }
                    rhs[a] = -(cache.eps_t * grad_term[a]
                        + cache.t_over_eps * obst[a]
                        + drive);
                    rhs_sum += rhs[a];
                    tau_sum += ctx.params.tau[a];
                }
                let count = cls.n_active as f64;
                let mean = rhs_sum / count;
                let tau_cell = tau_sum / count;
                let fac = ctx.dt / (tau_cell * ctx.params.epsilon);
                let mut target = nb.c;
                for a in 0..N_PHASES {
                    if cls.active[a] {
                        target[a] += fac * (rhs[a] - mean);
                    }
                }
                let projected = project_simplex(&target).ok_or_else(|| SimError::Numerical {
                    step: ctx.step,
                    x: (origin[0] + i) as i64,
                    y: (origin[1] + j) as i64,
                    z: gk,
                    detail: "non-finite phase-field update".into(),
                })?;
                for a in 0..N_PHASES {
                    phi_dst.set(a, x, y, z, projected[a]);
                }
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelVariant;
    use crate::lattice::{
        build_block_grid, exchange_ghost_layers, Buffer, DomainSpec, FieldId,
    };
    use crate::testutil::{eutectic_schedule, fill_interface_state, symmetric_params, symmetric_thermo};

    fn ctx<'a>(
        params: &'a crate::thermo::ModelParams,
        th: &'a crate::thermo::PhaseThermo,
        sched: &'a crate::thermo::TemperatureSchedule,
        variant: KernelVariant,
    ) -> KernelCtx<'a> {
        KernelCtx {
            params,
            th,
            sched,
            dx: 1.0,
            dt: 0.02,
            time: 0.0,
            step: 0,
            window_origin_z: 0,
            variant,
        }
    }

    fn sweep_all(grid: &mut crate::lattice::BlockGrid, ctx: &KernelCtx) -> SweepCounters {
        let mut total = SweepCounters::default();
        for b in &mut grid.blocks {
            total.merge(&sweep_block_phi(ctx, b).unwrap());
        }
        total
    }

    #[test]
    fn pure_bulk_is_exact_fixed_point_in_all_variants() {
        let params = symmetric_params();
        let th = symmetric_thermo();
        // Uniform undercooling: a nonzero driving force exists, yet pure
        // bulk must still be exactly quiescent.
        let mut sched = eutectic_schedule();
        sched.t_base = 0.95;
        for variant in [
            KernelVariant::REFERENCE,
            KernelVariant::OPT_NOSHORTCUT,
            KernelVariant::OPT_FULL,
        ] {
            let spec = DomainSpec::new([8, 8, 8], 1.0, [2, 1, 1]);
            let mut grid = build_block_grid(&spec, [true; 3]).unwrap();
            for b in &mut grid.blocks {
                let f = &mut b.phi.src;
                for v in f.comp_mut(3).iter_mut() {
                    *v = 1.0;
                }
            }
            let c = sweep_all(&mut grid, &ctx(&params, &th, &sched, variant));
            assert_eq!(
                grid.checksum(FieldId::Phi, Buffer::Dst),
                grid.checksum(FieldId::Phi, Buffer::Src),
            );
            assert_eq!(c.cells, 512);
            if variant.shortcuts {
                assert_eq!(c.terms_skipped, 512);
                assert_eq!(c.driving_force_evals, 0);
            } else {
                assert_eq!(c.terms_skipped, 0);
                assert_eq!(c.driving_force_evals, 512);
            }
        }
    }

    #[test]
    fn variants_are_bitwise_identical() {
        let params = symmetric_params();
        let th = symmetric_thermo();
        let mut sched = eutectic_schedule();
        sched.g = 0.01;
        sched.v = 0.1;
        let spec = DomainSpec::new([12, 10, 14], 1.0, [1, 1, 1]);
        let mut results = Vec::new();
        for variant in [
            KernelVariant::REFERENCE,
            KernelVariant::OPT_NOSHORTCUT,
            KernelVariant::OPT_FULL,
        ] {
            let mut grid = build_block_grid(&spec, [true; 3]).unwrap();
            fill_interface_state(&mut grid);
            exchange_ghost_layers(&mut grid, FieldId::Phi, Buffer::Src);
            exchange_ghost_layers(&mut grid, FieldId::Mu, Buffer::Src);
            let mut c = ctx(&params, &th, &sched, variant);
            c.time = 0.3;
            sweep_all(&mut grid, &c);
            results.push((variant, grid.checksum(FieldId::Phi, Buffer::Dst)));
        }
        assert_eq!(results[0].1, results[1].1, "opt-noshortcut deviates");
        assert_eq!(results[0].1, results[2].1, "opt-full deviates");
    }

    #[test]
    fn staggered_counter_balance_on_full_block() {
        // Without shortcuts every cell computes its three plus faces and
        // reuses all minus faces except on the first layer of each axis.
        let params = symmetric_params();
        let th = symmetric_thermo();
        let sched = eutectic_schedule();
        let n = 6usize;
        let spec = DomainSpec::new([n, n, n], 1.0, [1, 1, 1]);
        let mut grid = build_block_grid(&spec, [true; 3]).unwrap();
        fill_interface_state(&mut grid);
        exchange_ghost_layers(&mut grid, FieldId::Phi, Buffer::Src);
        exchange_ghost_layers(&mut grid, FieldId::Mu, Buffer::Src);
        let c = sweep_all(&mut grid, &ctx(&params, &th, &sched, KernelVariant::OPT_NOSHORTCUT));
        let (n3, n2) = ((n * n * n) as u64, (n * n) as u64);
        assert_eq!(c.staggered_evals, 3 * n3 + 3 * n2);
        assert_eq!(c.staggered_reuses, 3 * n3 - 3 * n2);
        assert_eq!(c.slice_cache_rebuilds, n as u64);
    }

    #[test]
    fn block_decomposition_is_transparent() {
        let params = symmetric_params();
        let th = symmetric_thermo();
        let mut sched = eutectic_schedule();
        sched.g = 0.02;
        let run = |blocks: [usize; 3]| {
            let spec = DomainSpec::new([16, 16, 16], 1.0, blocks);
            let mut grid = build_block_grid(&spec, [true; 3]).unwrap();
            fill_interface_state(&mut grid);
            exchange_ghost_layers(&mut grid, FieldId::Phi, Buffer::Src);
            exchange_ghost_layers(&mut grid, FieldId::Mu, Buffer::Src);
            sweep_all(&mut grid, &ctx(&params, &th, &sched, KernelVariant::OPT_FULL));
            grid.checksum(FieldId::Phi, Buffer::Dst)
        };
        let single = run([1, 1, 1]);
        assert_eq!(single, run([2, 2, 2]));
        assert_eq!(single, run([4, 1, 2]));
    }

    #[test]
    fn update_stays_on_simplex() {
        let params = symmetric_params();
        let th = symmetric_thermo();
        let mut sched = eutectic_schedule();
        sched.t_base = 0.98;
        let spec = DomainSpec::new([8, 8, 8], 1.0, [1, 1, 1]);
        let mut grid = build_block_grid(&spec, [true; 3]).unwrap();
        fill_interface_state(&mut grid);
        exchange_ghost_layers(&mut grid, FieldId::Phi, Buffer::Src);
        exchange_ghost_layers(&mut grid, FieldId::Mu, Buffer::Src);
        sweep_all(&mut grid, &ctx(&params, &th, &sched, KernelVariant::OPT_FULL));
        let f = &grid.blocks[0].phi.dst;
        for z in 0..8isize {
            for y in 0..8isize {
                for x in 0..8isize {
                    let p = Block::phi_at(f, x, y, z);
                    let sum: f64 = p.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12, "sum {sum} at ({x},{y},{z})");
                    for v in p {
                        assert!((0.0..=1.0 + 1e-12).contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn numerical_fault_reports_cell() {
        let params = symmetric_params();
        let th = symmetric_thermo();
        let sched = eutectic_schedule();
        let spec = DomainSpec::new([4, 4, 4], 1.0, [1, 1, 1]);
        let mut grid = build_block_grid(&spec, [true; 3]).unwrap();
        fill_interface_state(&mut grid);
        grid.blocks[0].phi.src.set(0, 2, 1, 3, f64::NAN);
        exchange_ghost_layers(&mut grid, FieldId::Phi, Buffer::Src);
        exchange_ghost_layers(&mut grid, FieldId::Mu, Buffer::Src);
        let c = ctx(&params, &th, &sched, KernelVariant::REFERENCE);
        let err = sweep_block_phi(&c, &mut grid.blocks[0]).unwrap_err();
        match err {
            SimError::Numerical { x, y, z, detail, .. } => {
                // The NaN spreads over the stencil; the first affected cell
                // in sweep order is reported, with in-domain coordinates.
                assert!((0..4).contains(&x) && (0..4).contains(&y) && (0..4).contains(&z));
                assert!(detail.contains("non-finite"));
            }
            other => panic!("expected numerical fault, got {other}"),
        }
    }
}
