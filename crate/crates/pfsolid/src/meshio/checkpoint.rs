//! Bit-exact single-precision state checkpoints.
//!
//! Layout (little endian): magic `PFCP0001`, u64 Nx, Ny, Nz, u32 phase
//! count, u32 independent-component count, f64 dx, f64 t, u64 step, u64
//! window_origin_z; then the body as binary32, component-major (all phase
//! fields, then all chemical potentials), x fastest.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, SimError};
use crate::lattice::{BlockGrid, Buffer, FieldId};
use crate::{N_COMP, N_PHASES};

const MAGIC: &[u8; 8] = b"PFCP0001";
const HEADER_LEN: usize = 8 + 3 * 8 + 2 * 4 + 2 * 8 + 2 * 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointHeader {
    pub dims: [u64; 3],
    pub phases: u32,
    pub components: u32,
    pub dx: f64,
    pub t: f64,
    pub step: u64,
    pub window_origin_z: u64,
}

/// Write the source-buffer state of `grid` to `path`.
pub fn write_checkpoint(
    grid: &BlockGrid,
    t: f64,
    step: u64,
    window_origin_z: i64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let io = |e| SimError::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC).map_err(io)?;
    for d in grid.spec.global_cells {
        w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
    }
    w.write_all(&(N_PHASES as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(N_COMP as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&grid.spec.dx.to_le_bytes()).map_err(io)?;
    w.write_all(&t.to_le_bytes()).map_err(io)?;
    w.write_all(&step.to_le_bytes()).map_err(io)?;
    w.write_all(&(window_origin_z as u64).to_le_bytes())
        .map_err(io)?;
    for (field, comps) in [(FieldId::Phi, N_PHASES), (FieldId::Mu, N_COMP)] {
        for comp in 0..comps {
            for v in grid.assemble(field, Buffer::Src, comp) {
                w.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

fn parse_header(path: &Path, data: &[u8]) -> Result<CheckpointHeader> {
    if data.len() < HEADER_LEN || &data[..8] != MAGIC {
        return Err(SimError::Format(format!(
            "{}: not a checkpoint (bad magic or truncated header)",
            path.display()
        )));
    }
    let u64_at = |o: usize| u64::from_le_bytes(data[o..o + 8].try_into().unwrap());
    let u32_at = |o: usize| u32::from_le_bytes(data[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(data[o..o + 8].try_into().unwrap());
    Ok(CheckpointHeader {
        dims: [u64_at(8), u64_at(16), u64_at(24)],
        phases: u32_at(32),
        components: u32_at(36),
        dx: f64_at(40),
        t: f64_at(48),
        step: u64_at(56),
        window_origin_z: u64_at(64),
    })
}

/// Read only the header of a checkpoint (to size a grid before loading).
pub fn read_checkpoint_header(path: impl AsRef<Path>) -> Result<CheckpointHeader> {
    let path = path.as_ref();
    let mut data = vec![0u8; HEADER_LEN];
    std::fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut data))
        .map_err(|e| SimError::io(path, e))?;
    parse_header(path, &data)
}

/// Read a checkpoint into the source buffers of `grid`, whose dimensions
/// must match the file header. Ghosts are left stale; refresh them before
/// stepping.
pub fn read_checkpoint(path: impl AsRef<Path>, grid: &mut BlockGrid) -> Result<CheckpointHeader> {
    let path = path.as_ref();
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| SimError::io(path, e))?;
    let header = parse_header(path, &data)?;
    let want_dims = grid.spec.global_cells.map(|d| d as u64);
    if header.dims != want_dims {
        return Err(SimError::Format(format!(
            "{}: checkpoint dimensions {:?} do not match the configured domain {:?}",
            path.display(),
            header.dims,
            want_dims
        )));
    }
    if header.phases != N_PHASES as u32 || header.components != N_COMP as u32 {
        return Err(SimError::Format(format!(
            "{}: checkpoint stores {} phases / {} components, expected {} / {}",
            path.display(),
            header.phases,
            header.components,
            N_PHASES,
            N_COMP
        )));
    }
    let cells = grid.spec.total_cells();
    let body_len = (N_PHASES + N_COMP) * cells * 4;
    if data.len() != HEADER_LEN + body_len {
        return Err(SimError::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!(
                    "checkpoint body has {} bytes, expected {}",
                    data.len() - HEADER_LEN,
                    body_len
                ),
            ),
        ));
    }
    let mut off = HEADER_LEN;
    let mut buf = vec![0.0f64; cells];
    for (field, comps) in [(FieldId::Phi, N_PHASES), (FieldId::Mu, N_COMP)] {
        for comp in 0..comps {
            for v in buf.iter_mut() {
                *v = f32::from_le_bytes(data[off..off + 4].try_into().unwrap()) as f64;
                off += 4;
            }
            grid.scatter(field, Buffer::Src, comp, &buf);
        }
    }
    Ok(header)
}
