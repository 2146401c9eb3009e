//! Block-structured domain decomposition: equally sized blocks with one
//! ghost layer on all 26 neighbor directions, deterministic pack/unpack
//! ghost exchange, and global boundary handling.
//!
//! The exchange keeps an explicit serialization boundary (per-direction
//! byte buffers of component-major little-endian binary64 values) so the
//! message-passing contract is preserved and testable even though all
//! blocks live in one process.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::{N_COMP, N_PHASES};

/// Global domain description. `ghost_width` is fixed to 1, which covers the
/// widest stencil in use (D3C19).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub global_cells: [usize; 3],
    /// Cell spacing (meters).
    pub dx: f64,
    pub blocks: [usize; 3],
    pub ghost_width: usize,
}

impl DomainSpec {
    pub fn new(global_cells: [usize; 3], dx: f64, blocks: [usize; 3]) -> Self {
        DomainSpec {
            global_cells,
            dx,
            blocks,
            ghost_width: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        const AXES: [&str; 3] = ["x", "y", "z"];
        for k in 0..3 {
            if self.global_cells[k] == 0 || self.blocks[k] == 0 {
                return Err(SimError::Config(format!(
                    "{} extent and block count must be positive",
                    AXES[k]
                )));
            }
            if self.global_cells[k] % self.blocks[k] != 0 {
                return Err(SimError::Config(format!(
                    "{} not divisible: {} cells into {} blocks",
                    AXES[k], self.global_cells[k], self.blocks[k]
                )));
            }
        }
        if self.ghost_width != 1 {
            return Err(SimError::Config("ghost_width must be 1".into()));
        }
        if !(self.dx > 0.0) {
            return Err(SimError::Config("dx must be > 0".into()));
        }
        Ok(())
    }

    pub fn cells_per_block(&self) -> [usize; 3] {
        [
            self.global_cells[0] / self.blocks[0],
            self.global_cells[1] / self.blocks[1],
            self.global_cells[2] / self.blocks[2],
        ]
    }

    pub fn total_cells(&self) -> usize {
        self.global_cells.iter().product()
    }
}

/// Which of the two lattice fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldId {
    Phi,
    Mu,
}

impl FieldId {
    pub fn components(self) -> usize {
        match self {
            FieldId::Phi => N_PHASES,
            FieldId::Mu => N_COMP,
        }
    }
}

/// Which copy of a double-buffered field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Buffer {
    Src,
    Dst,
}

/// Per-face boundary condition for one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FaceCondition {
    Periodic,
    /// Zero-gradient: ghost copies the adjacent interior value.
    ZeroGradient,
    /// Fixed value per component.
    Fixed(Vec<f64>),
}

/// Face index convention: [x-, x+, y-, y+, z-, z+].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub phi: [FaceCondition; 6],
    pub mu: [FaceCondition; 6],
}

impl BoundarySpec {
    pub fn faces(&self, field: FieldId) -> &[FaceCondition; 6] {
        match field {
            FieldId::Phi => &self.phi,
            FieldId::Mu => &self.mu,
        }
    }

    /// Periodic axes derived from both fields' face conditions. Periodic
    /// faces must come in matched pairs and agree between the fields.
    pub fn periodic_axes(&self) -> Result<[bool; 3]> {
        let mut axes = [false; 3];
        for k in 0..3 {
            let lo = &self.phi[2 * k];
            let hi = &self.phi[2 * k + 1];
            let phi_p = matches!(lo, FaceCondition::Periodic);
            if phi_p != matches!(hi, FaceCondition::Periodic) {
                return Err(SimError::Config(format!(
                    "periodic faces must come in matched pairs on axis {k}"
                )));
            }
            let mu_lo = matches!(self.mu[2 * k], FaceCondition::Periodic);
            let mu_hi = matches!(self.mu[2 * k + 1], FaceCondition::Periodic);
            if mu_lo != phi_p || mu_hi != phi_p {
                return Err(SimError::Config(format!(
                    "phi and mu periodicity must agree on axis {k}"
                )));
            }
            axes[k] = phi_p;
        }
        Ok(axes)
    }

    /// Fully periodic in all directions (used by benchmarks and tests).
    pub fn fully_periodic() -> Self {
        BoundarySpec {
            phi: std::array::from_fn(|_| FaceCondition::Periodic),
            mu: std::array::from_fn(|_| FaceCondition::Periodic),
        }
    }

    /// Directional-solidification defaults: periodic in x/y, phi
    /// zero-gradient at bottom and top, mu zero-gradient at the bottom and
    /// fixed at the supplied liquid values at the top.
    pub fn directional(top_mu: [f64; N_COMP]) -> Self {
        use FaceCondition::*;
        BoundarySpec {
            phi: [
                Periodic,
                Periodic,
                Periodic,
                Periodic,
                ZeroGradient,
                ZeroGradient,
            ],
            mu: [
                Periodic,
                Periodic,
                Periodic,
                Periodic,
                ZeroGradient,
                Fixed(top_mu.to_vec()),
            ],
        }
    }
}

/// One lattice field on one block: structure-of-arrays storage (one
/// contiguous array per component), x-fastest ordering, one ghost layer.
#[derive(Debug, Clone)]
pub struct Field {
    pub n: [usize; 3],
    comps: Vec<Vec<f64>>,
}

impl Field {
    pub fn new(n: [usize; 3], ncomp: usize) -> Self {
        let len = (n[0] + 2) * (n[1] + 2) * (n[2] + 2);
        Field {
            n,
            comps: vec![vec![0.0; len]; ncomp],
        }
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    /// Linear index for local coordinates in [-1, n] per axis.
    #[inline(always)]
    pub fn idx(&self, x: isize, y: isize, z: isize) -> usize {
        let sx = self.n[0] + 2;
        let sy = self.n[1] + 2;
        debug_assert!(x >= -1 && x <= self.n[0] as isize);
        debug_assert!(y >= -1 && y <= self.n[1] as isize);
        debug_assert!(z >= -1 && z <= self.n[2] as isize);
        ((z + 1) as usize * sy + (y + 1) as usize) * sx + (x + 1) as usize
    }

    #[inline(always)]
    pub fn get(&self, comp: usize, x: isize, y: isize, z: isize) -> f64 {
        self.comps[comp][self.idx(x, y, z)]
    }

    #[inline(always)]
    pub fn set(&mut self, comp: usize, x: isize, y: isize, z: isize, v: f64) {
        let i = self.idx(x, y, z);
        self.comps[comp][i] = v;
    }

    /// Contiguous component array, ghosts included (layout accessor
    /// contract: components are independently addressable).
    pub fn comp(&self, comp: usize) -> &[f64] {
        &self.comps[comp]
    }

    pub fn comp_mut(&mut self, comp: usize) -> &mut [f64] {
        &mut self.comps[comp]
    }
}

/// Double-buffered field: destination holds values for t + dt.
#[derive(Debug, Clone)]
pub struct FieldPair {
    pub src: Field,
    pub dst: Field,
}

impl FieldPair {
    fn new(n: [usize; 3], ncomp: usize) -> Self {
        FieldPair {
            src: Field::new(n, ncomp),
            dst: Field::new(n, ncomp),
        }
    }

    pub fn swap(&mut self) {
        std::mem::swap(&mut self.src, &mut self.dst);
    }

    pub fn buf(&self, b: Buffer) -> &Field {
        match b {
            Buffer::Src => &self.src,
            Buffer::Dst => &self.dst,
        }
    }

    pub fn buf_mut(&mut self, b: Buffer) -> &mut Field {
        match b {
            Buffer::Src => &mut self.src,
            Buffer::Dst => &mut self.dst,
        }
    }
}

/// One equally sized subdomain: the unit of parallelism and exchange.
#[derive(Debug, Clone)]
pub struct Block {
    /// Block coordinates within the block grid.
    pub index: [usize; 3],
    /// Global cell index of the first interior cell (window-local in z
    /// when a moving window is active).
    pub origin: [usize; 3],
    pub n: [usize; 3],
    pub phi: FieldPair,
    pub mu: FieldPair,
    /// Step index of the last completed local mu sweep, used to enforce
    /// local-before-neighbor sequencing of the split kernel.
    pub mu_local_step: Option<u64>,
}

impl Block {
    pub fn field(&self, id: FieldId) -> &FieldPair {
        match id {
            FieldId::Phi => &self.phi,
            FieldId::Mu => &self.mu,
        }
    }

    pub fn field_mut(&mut self, id: FieldId) -> &mut FieldPair {
        match id {
            FieldId::Phi => &mut self.phi,
            FieldId::Mu => &mut self.mu,
        }
    }

    pub fn interior_cells(&self) -> usize {
        self.n.iter().product()
    }

    /// Phase vector at local coordinates.
    #[inline(always)]
    pub fn phi_at(field: &Field, x: isize, y: isize, z: isize) -> [f64; N_PHASES] {
        let i = field.idx(x, y, z);
        [
            field.comps[0][i],
            field.comps[1][i],
            field.comps[2][i],
            field.comps[3][i],
        ]
    }

    #[inline(always)]
    pub fn mu_at(field: &Field, x: isize, y: isize, z: isize) -> [f64; N_COMP] {
        let i = field.idx(x, y, z);
        [field.comps[0][i], field.comps[1][i]]
    }
}

/// All 26 neighbor directions in a fixed deterministic order.
pub const DIRECTIONS: [[i32; 3]; 26] = {
    let mut dirs = [[0i32; 3]; 26];
    let mut n = 0;
    let mut dz = -1i32;
    while dz <= 1 {
        let mut dy = -1i32;
        while dy <= 1 {
            let mut dx = -1i32;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    dirs[n] = [dx, dy, dz];
                    n += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    dirs
};

pub fn opposite_dir(d: usize) -> usize {
    25 - d
}

/// The block grid: blocks plus the 26-direction neighbor table.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    pub spec: DomainSpec,
    pub periodic: [bool; 3],
    pub blocks: Vec<Block>,
    /// neighbors[b][d] = block adjacent to b in direction DIRECTIONS[d].
    neighbors: Vec<[Option<usize>; 26]>,
}

/// Builds the block grid with allocated src/dst fields and zeroed ghosts.
pub fn build_block_grid(spec: &DomainSpec, periodic: [bool; 3]) -> Result<BlockGrid> {
    spec.validate()?;
    let nb = spec.cells_per_block();
    let [bx, by, bz] = spec.blocks;
    let mut blocks = Vec::with_capacity(bx * by * bz);
    for kz in 0..bz {
        for ky in 0..by {
            for kx in 0..bx {
                blocks.push(Block {
                    index: [kx, ky, kz],
                    origin: [kx * nb[0], ky * nb[1], kz * nb[2]],
                    n: nb,
                    phi: FieldPair::new(nb, N_PHASES),
                    mu: FieldPair::new(nb, N_COMP),
                    mu_local_step: None,
                });
            }
        }
    }
    let block_id = |ix: i64, iy: i64, iz: i64| -> Option<usize> {
        let dims = [bx as i64, by as i64, bz as i64];
        let mut c = [ix, iy, iz];
        for k in 0..3 {
            if c[k] < 0 || c[k] >= dims[k] {
                if periodic[k] {
                    c[k] = c[k].rem_euclid(dims[k]);
                } else {
                    return None;
                }
            }
        }
        Some((c[2] as usize * by + c[1] as usize) * bx + c[0] as usize)
    };
    let mut neighbors = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let [ix, iy, iz] = [b.index[0] as i64, b.index[1] as i64, b.index[2] as i64];
        let mut tab = [None; 26];
        for (d, dir) in DIRECTIONS.iter().enumerate() {
            tab[d] = block_id(ix + dir[0] as i64, iy + dir[1] as i64, iz + dir[2] as i64);
        }
        neighbors.push(tab);
    }
    Ok(BlockGrid {
        spec: spec.clone(),
        periodic,
        blocks,
        neighbors,
    })
}

impl BlockGrid {
    pub fn neighbor(&self, block: usize, dir: usize) -> Option<usize> {
        self.neighbors[block][dir]
    }

    /// Assemble the global interior values for one component, x-fastest.
    pub fn assemble(&self, field: FieldId, buffer: Buffer, comp: usize) -> Vec<f64> {
        let [gx, gy, gz] = self.spec.global_cells;
        let mut out = vec![0.0; gx * gy * gz];
        for b in &self.blocks {
            let f = b.field(field).buf(buffer);
            for z in 0..b.n[2] {
                for y in 0..b.n[1] {
                    for x in 0..b.n[0] {
                        let gi = (b.origin[2] + z) * gy * gx
                            + (b.origin[1] + y) * gx
                            + (b.origin[0] + x);
                        out[gi] = f.get(comp, x as isize, y as isize, z as isize);
                    }
                }
            }
        }
        out
    }

    /// Scatter a global component array into block interiors.
    pub fn scatter(&mut self, field: FieldId, buffer: Buffer, comp: usize, data: &[f64]) {
        let [gx, gy, _] = self.spec.global_cells;
        for b in &mut self.blocks {
            let origin = b.origin;
            let n = b.n;
            let f = b.field_mut(field).buf_mut(buffer);
            for z in 0..n[2] {
                for y in 0..n[1] {
                    for x in 0..n[0] {
                        let gi = (origin[2] + z) * gy * gx + (origin[1] + y) * gx + (origin[0] + x);
                        f.set(comp, x as isize, y as isize, z as isize, data[gi]);
                    }
                }
            }
        }
    }

    /// FNV-1a checksum over the assembled interior of a field, independent
    /// of the block partition.
    pub fn checksum(&self, field: FieldId, buffer: Buffer) -> u64 {
        let mut hash: u64 = 0xcbf29ce484222325;
        for comp in 0..field.components() {
            for v in self.assemble(field, buffer, comp) {
                for byte in v.to_le_bytes() {
                    hash ^= byte as u64;
                    hash = hash.wrapping_mul(0x100000001b3);
                }
            }
        }
        hash
    }
}

/// Index ranges (inclusive start, exclusive end) of the interior region a
/// block sends for direction `dir`.
fn pack_range(n: [usize; 3], dir: [i32; 3]) -> [(isize, isize); 3] {
    std::array::from_fn(|k| match dir[k] {
        -1 => (0, 1),
        1 => (n[k] as isize - 1, n[k] as isize),
        _ => (0, n[k] as isize),
    })
}

/// Ghost region a block fills from the neighbor found in direction `dir`.
fn unpack_range(n: [usize; 3], dir: [i32; 3]) -> [(isize, isize); 3] {
    std::array::from_fn(|k| match dir[k] {
        -1 => (-1, 0),
        1 => (n[k] as isize, n[k] as isize + 1),
        _ => (0, n[k] as isize),
    })
}

/// Serialize the cells of `range` as component-major little-endian f64.
fn pack_region(field: &Field, range: [(isize, isize); 3]) -> Vec<u8> {
    let cells = range
        .iter()
        .map(|&(a, b)| (b - a) as usize)
        .product::<usize>();
    let mut buf = Vec::with_capacity(cells * field.ncomp() * 8);
    for comp in 0..field.ncomp() {
        for z in range[2].0..range[2].1 {
            for y in range[1].0..range[1].1 {
                for x in range[0].0..range[0].1 {
                    buf.extend_from_slice(&field.get(comp, x, y, z).to_le_bytes());
                }
            }
        }
    }
    buf
}

fn unpack_region(field: &mut Field, range: [(isize, isize); 3], buf: &[u8]) {
    let mut off = 0;
    for comp in 0..field.ncomp() {
        for z in range[2].0..range[2].1 {
            for y in range[1].0..range[1].1 {
                for x in range[0].0..range[0].1 {
                    let v = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
                    field.set(comp, x, y, z, v);
                    off += 8;
                }
            }
        }
    }
    debug_assert_eq!(off, buf.len());
}

/// First exchange phase: every block packs its boundary regions into
/// per-direction byte messages (`messages[b * 26 + d]`). Read-only, so it
/// can run concurrently with a sweep that does not touch this buffer's
/// ghosts.
pub fn pack_ghost_messages(grid: &BlockGrid, field: FieldId, buffer: Buffer) -> Vec<Option<Vec<u8>>> {
    let nblocks = grid.blocks.len();
    (0..nblocks * 26)
        .into_par_iter()
        .map(|idx| {
            let b = idx / 26;
            let d = idx % 26;
            grid.neighbors[b][d].map(|_| {
                let block = &grid.blocks[b];
                let f = block.field(field).buf(buffer);
                pack_region(f, pack_range(block.n, DIRECTIONS[d]))
            })
        })
        .collect()
}

/// Second exchange phase: every block unpacks the messages addressed to it
/// into its ghost shell. Deterministic for any worker count since each
/// ghost cell has exactly one writer.
pub fn unpack_ghost_messages(
    grid: &mut BlockGrid,
    field: FieldId,
    buffer: Buffer,
    messages: &[Option<Vec<u8>>],
) {
    let neighbors = grid.neighbors.clone();
    grid.blocks
        .par_iter_mut()
        .enumerate()
        .for_each(|(t, block)| {
            let n = block.n;
            let f = block.field_mut(field).buf_mut(buffer);
            for d in 0..26 {
                if let Some(s) = neighbors[t][d] {
                    // The neighbor in direction d sent its message packed
                    // for the opposite direction.
                    let msg = messages[s * 26 + opposite_dir(d)]
                        .as_ref()
                        .expect("neighbor table asymmetry");
                    unpack_region(f, unpack_range(n, DIRECTIONS[d]), msg);
                }
            }
        });
}

/// Exchange ghost layers for one field buffer across all 26 directions:
/// pack then unpack.
pub fn exchange_ghost_layers(grid: &mut BlockGrid, field: FieldId, buffer: Buffer) {
    let messages = pack_ghost_messages(grid, field, buffer);
    unpack_ghost_messages(grid, field, buffer, &messages);
}

/// Apply non-periodic boundary conditions to the ghost planes on global
/// faces. Faces are processed x, y, z in order; each writes the full
/// extended ghost plane so edge and corner ghosts end up consistent.
pub fn apply_boundaries(grid: &mut BlockGrid, field: FieldId, buffer: Buffer, spec: &BoundarySpec) {
    let faces = spec.faces(field).clone();
    let blocks_dims = grid.spec.blocks;
    grid.blocks.par_iter_mut().for_each(|block| {
        for axis in 0..3 {
            for (side, high) in [(0usize, false), (1usize, true)] {
                let cond = &faces[2 * axis + side];
                if matches!(cond, FaceCondition::Periodic) {
                    continue;
                }
                let on_face = if high {
                    block.index[axis] + 1 == blocks_dims[axis]
                } else {
                    block.index[axis] == 0
                };
                if !on_face {
                    continue;
                }
                let n = block.n;
                let f = block.field_mut(field).buf_mut(buffer);
                let (ghost, interior) = if high {
                    (n[axis] as isize, n[axis] as isize - 1)
                } else {
                    (-1, 0)
                };
                let full = |k: usize| (-1, n[k] as isize + 1);
                let (r0, r1) = match axis {
                    0 => (full(1), full(2)),
                    1 => (full(0), full(2)),
                    _ => (full(0), full(1)),
                };
                for comp in 0..f.ncomp() {
                    for b in r1.0..r1.1 {
                        for a in r0.0..r0.1 {
                            let (x, y, z, ix, iy, iz) = match axis {
                                0 => (ghost, a, b, interior, a, b),
                                1 => (a, ghost, b, a, interior, b),
                                _ => (a, b, ghost, a, b, interior),
                            };
                            let v = match cond {
                                FaceCondition::ZeroGradient => f.get(comp, ix, iy, iz),
                                FaceCondition::Fixed(vals) => vals[comp],
                                FaceCondition::Periodic => unreachable!(),
                            };
                            f.set(comp, x, y, z, v);
                        }
                    }
                }
            }
        }
    });
}

/// Refresh ghosts of one buffer of one field: exchange then boundaries.
pub fn refresh_ghosts(grid: &mut BlockGrid, field: FieldId, buffer: Buffer, spec: &BoundarySpec) {
    exchange_ghost_layers(grid, field, buffer);
    apply_boundaries(grid, field, buffer, spec);
}
