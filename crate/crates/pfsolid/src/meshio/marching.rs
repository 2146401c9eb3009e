//! Isosurface extraction on cell-corner samples.
//!
//! A 256-case table maps each cube corner sign pattern to a triangle list
//! whose vertices are identified by the pair of cube corners they
//! interpolate between. The table is generated once at startup from a
//! translation-consistent six-tetrahedron subdivision of the cube, which
//! makes adjacent cubes (and adjacent blocks meshing their ghost layers)
//! agree exactly on every shared face: meshes stitch without cracks by
//! exact vertex coincidence.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{cross, dot, sub, TriMesh};
use crate::lattice::{Block, Buffer, FieldId};

/// A table triangle: three vertices, each the crossing on the cube edge or
/// diagonal between two corners (canonical order: lower corner first).
type TableTri = [(u8, u8); 3];

static CASE_TABLE: OnceLock<Vec<Vec<TableTri>>> = OnceLock::new();

fn corner_pos(c: u8) -> [f64; 3] {
    [(c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64]
}

/// The six tetrahedra around the main diagonal 0-7, one per axis
/// permutation. Shared cube faces are split along the same diagonal from
/// both sides under translation, which is what makes stitching exact.
fn kuhn_tets() -> [[u8; 4]; 6] {
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    perms.map(|p| {
        let c1 = 1u8 << p[0];
        let c2 = c1 | 1 << p[1];
        [0, c1, c2, 7]
    })
}

fn build_case(mask: usize) -> Vec<TableTri> {
    let mut out = Vec::new();
    for tet in kuhn_tets() {
        let inside: Vec<u8> = tet.iter().copied().filter(|&c| mask >> c & 1 == 1).collect();
        let outside: Vec<u8> = tet.iter().copied().filter(|&c| mask >> c & 1 == 0).collect();
        let edge = |a: u8, b: u8| (a.min(b), a.max(b));
        let mut tris: Vec<TableTri> = match inside.len() {
            1 => vec![[
                edge(inside[0], outside[0]),
                edge(inside[0], outside[1]),
                edge(inside[0], outside[2]),
            ]],
            3 => vec![[
                edge(outside[0], inside[0]),
                edge(outside[0], inside[1]),
                edge(outside[0], inside[2]),
            ]],
            2 => {
                let e = |i: usize, o: usize| edge(inside[i], outside[o]);
                vec![
                    [e(0, 0), e(0, 1), e(1, 1)],
                    [e(0, 0), e(1, 1), e(1, 0)],
                ]
            }
            _ => Vec::new(),
        };
        if tris.is_empty() {
            continue;
        }
        // Orient with the normal pointing away from the high-value side
        // (outward from the phase region). Midpoint geometry suffices: the
        // winding cannot flip as the crossings slide along their edges.
        let mut centroid = [0.0; 3];
        for &c in &inside {
            let p = corner_pos(c);
            for d in 0..3 {
                centroid[d] += p[d] / inside.len() as f64;
            }
        }
        for t in &mut tris {
            let p = t.map(|(a, b)| {
                let (pa, pb) = (corner_pos(a), corner_pos(b));
                [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), 0.5 * (pa[2] + pb[2])]
            });
            let n = cross(sub(p[1], p[0]), sub(p[2], p[0]));
            let mid = [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                (p[0][2] + p[1][2] + p[2][2]) / 3.0,
            ];
            if dot(n, sub(centroid, mid)) > 0.0 {
                t.swap(1, 2);
            }
        }
        out.extend(tris);
    }
    out
}

fn case_table() -> &'static Vec<Vec<TableTri>> {
    CASE_TABLE.get_or_init(|| (0..256).map(build_case).collect())
}

/// Extract the `value > iso` isosurface from a grid of corner samples.
///
/// `dims` counts corner samples per axis; cube `(i, j, k)` spans corners
/// `i..=i+1` etc. Corner `(i, j, k)` sits at physical position
/// `((origin_corner + index) + 0.5) * dx` per axis, so two extractions
/// whose sample grids overlap produce bitwise identical vertices on the
/// shared plane. Vertices on a face of the sample box are flagged as
/// boundary.
pub fn marching_cubes(
    dims: [usize; 3],
    sample: impl Fn(usize, usize, usize) -> f64,
    origin_corner: [i64; 3],
    dx: f64,
    iso: f64,
    phase_id: usize,
) -> TriMesh {
    let [mx, my, mz] = dims;
    assert!(mx >= 2 && my >= 2 && mz >= 2, "need at least one cube");
    let mut values = vec![0.0f64; mx * my * mz];
    for k in 0..mz {
        for j in 0..my {
            for i in 0..mx {
                values[(k * my + j) * mx + i] = sample(i, j, k);
            }
        }
    }
    let at = |i: usize, j: usize, k: usize| values[(k * my + j) * mx + i];

    let table = case_table();
    let mut mesh = TriMesh {
        phase_id,
        ..TriMesh::default()
    };
    let pos_of = |g: [i64; 3]| -> [f64; 3] { g.map(|c| (c as f64 + 0.5) * dx) };
    mesh.bbox = Some((
        pos_of(origin_corner),
        pos_of([
            origin_corner[0] + mx as i64 - 1,
            origin_corner[1] + my as i64 - 1,
            origin_corner[2] + mz as i64 - 1,
        ]),
    ));
    let mut vertex_ids: HashMap<([i64; 3], [i64; 3]), u32> = HashMap::new();

    for k in 0..mz - 1 {
        for j in 0..my - 1 {
            for i in 0..mx - 1 {
                let mut mask = 0usize;
                for c in 0..8u8 {
                    let (ci, cj, ck) = (
                        i + (c & 1) as usize,
                        j + ((c >> 1) & 1) as usize,
                        k + ((c >> 2) & 1) as usize,
                    );
                    if at(ci, cj, ck) > iso {
                        mask |= 1 << c;
                    }
                }
                if mask == 0 || mask == 255 {
                    continue;
                }
                for tri in &table[mask] {
                    let mut ids = [0u32; 3];
                    for (slot, &(a, b)) in tri.iter().enumerate() {
                        let local = |c: u8| {
                            [
                                i + (c & 1) as usize,
                                j + ((c >> 1) & 1) as usize,
                                k + ((c >> 2) & 1) as usize,
                            ]
                        };
                        let (la, lb) = (local(a), local(b));
                        let ga: [i64; 3] =
                            std::array::from_fn(|d| origin_corner[d] + la[d] as i64);
                        let gb: [i64; 3] =
                            std::array::from_fn(|d| origin_corner[d] + lb[d] as i64);
                        let va = at(la[0], la[1], la[2]);
                        let vb = at(lb[0], lb[1], lb[2]);
                        // A crossing exactly on an iso-valued corner is
                        // keyed by that corner itself so every edge through
                        // it yields one shared vertex (at most one endpoint
                        // can sit on the isovalue: the inside one exceeds it
                        // strictly).
                        let snap = if va == iso {
                            Some((ga, la))
                        } else if vb == iso {
                            Some((gb, lb))
                        } else {
                            None
                        };
                        let (key, la, lb) = match snap {
                            Some((g, l)) => ((g, g), l, l),
                            None => ((ga, gb), la, lb),
                        };
                        ids[slot] = *vertex_ids.entry(key).or_insert_with(|| {
                            let p: [f64; 3] = match snap {
                                Some((g, _)) => pos_of(g),
                                None => {
                                    let t = (iso - va) / (vb - va);
                                    let (pa, pb) = (pos_of(ga), pos_of(gb));
                                    std::array::from_fn(|d| pa[d] + t * (pb[d] - pa[d]))
                                }
                            };
                            // Boundary: the whole edge lies in a face plane
                            // of the sample box.
                            let on_face = (0..3).any(|d| {
                                (la[d] == 0 && lb[d] == 0)
                                    || (la[d] == dims[d] - 1 && lb[d] == dims[d] - 1)
                            });
                            let id = mesh.positions.len() as u32;
                            mesh.positions.push(p);
                            mesh.boundary.push(on_face);
                            id
                        });
                    }
                    if ids[0] != ids[1] && ids[1] != ids[2] && ids[2] != ids[0] {
                        mesh.triangles.push(ids);
                    }
                }
            }
        }
    }
    mesh
}

/// Isosurface of one phase field over a block, extended into the +side
/// ghost layer so neighboring block meshes share their boundary vertices
/// exactly. `window_origin_z` shifts the mesh to window-global physical
/// coordinates.
pub fn marching_cubes_block(
    block: &Block,
    buffer: Buffer,
    comp: usize,
    window_origin_z: i64,
    dx: f64,
    iso: f64,
) -> TriMesh {
    let f = block.field(FieldId::Phi).buf(buffer);
    let dims = [block.n[0] + 1, block.n[1] + 1, block.n[2] + 1];
    let origin_corner = [
        block.origin[0] as i64,
        block.origin[1] as i64,
        block.origin[2] as i64 + window_origin_z,
    ];
    marching_cubes(
        dims,
        |i, j, k| f.get(comp, i as isize, j as isize, k as isize),
        origin_corner,
        dx,
        iso,
        comp,
    )
}
