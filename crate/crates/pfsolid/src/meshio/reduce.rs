//! Hierarchical pairwise stitch-and-coarsen reduction of block meshes.
//!
//! Block meshes computed over ghost-extended sample boxes carry bitwise
//! identical vertices on shared faces, so stitching welds by exact
//! coordinate equality: at each of ceil(log2(n)) levels, mesh pairs are
//! merged, the now-interior seam vertices are unflagged, and only the
//! freshly stitched band is re-coarsened.

use std::collections::HashMap;

use super::coarsen::{coarsen_mesh, coarsen_region};
use super::TriMesh;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy)]
pub struct ReduceOptions {
    /// Triangle-count ratio applied to each freshly stitched band.
    pub stitch_ratio: f64,
    /// Memory-budget cutoff: merged meshes are globally coarsened down to
    /// this many triangles before reduction continues.
    pub max_triangles: Option<usize>,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            stitch_ratio: 0.5,
            max_triangles: None,
        }
    }
}

/// Reduce block meshes (in block-grid order, x fastest) to a single mesh.
pub fn hierarchical_reduce(mut meshes: Vec<TriMesh>, opts: &ReduceOptions) -> Result<TriMesh> {
    if meshes.is_empty() {
        return Ok(TriMesh::default());
    }
    while meshes.len() > 1 {
        let mut next = Vec::with_capacity(meshes.len().div_ceil(2));
        let mut iter = meshes.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(merge_pair(a, b, opts)?),
                None => next.push(a),
            }
        }
        meshes = next;
    }
    Ok(meshes.pop().unwrap())
}

/// Union of two sample boxes when they tile a larger box: adjacent along
/// exactly one axis with equal extents on the others.
fn box_union(
    a: ([f64; 3], [f64; 3]),
    b: ([f64; 3], [f64; 3]),
) -> Option<([f64; 3], [f64; 3])> {
    for axis in 0..3 {
        let others_match = (0..3)
            .filter(|&d| d != axis)
            .all(|d| a.0[d] == b.0[d] && a.1[d] == b.1[d]);
        if !others_match {
            continue;
        }
        if a.1[axis] == b.0[axis] {
            return Some((a.0, b.1));
        }
        if b.1[axis] == a.0[axis] {
            return Some((b.0, a.1));
        }
    }
    None
}

/// Planes on which the two boxes touch: (axis, coordinate).
fn contact_planes(a: ([f64; 3], [f64; 3]), b: ([f64; 3], [f64; 3])) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for axis in 0..3 {
        let overlap = (0..3).filter(|&d| d != axis).all(|d| {
            a.0[d].max(b.0[d]) < a.1[d].min(b.1[d])
        });
        if !overlap {
            continue;
        }
        if a.1[axis] == b.0[axis] {
            out.push((axis, a.1[axis]));
        } else if b.1[axis] == a.0[axis] {
            out.push((axis, b.1[axis]));
        }
    }
    out
}

fn merge_pair(a: TriMesh, b: TriMesh, opts: &ReduceOptions) -> Result<TriMesh> {
    if a.phase_id != b.phase_id {
        return Err(SimError::Stitch(format!(
            "cannot stitch meshes of phases {} and {}",
            a.phase_id, b.phase_id
        )));
    }
    let contacts = match (a.bbox, b.bbox) {
        (Some(ba), Some(bb)) => contact_planes(ba, bb),
        _ => Vec::new(),
    };
    let union = match (a.bbox, b.bbox) {
        (Some(ba), Some(bb)) => box_union(ba, bb),
        _ => None,
    };

    let mut merged = TriMesh {
        phase_id: a.phase_id,
        positions: a.positions,
        boundary: a.boundary,
        triangles: a.triangles,
        bbox: union,
    };
    // Weld: boundary vertices of `b` that coincide bitwise with boundary
    // vertices of `a` map onto them.
    let mut seen: HashMap<[u64; 3], u32> = HashMap::new();
    for (idx, (p, &flag)) in merged.positions.iter().zip(&merged.boundary).enumerate() {
        if flag {
            seen.insert(p.map(f64::to_bits), idx as u32);
        }
    }
    let mut welded = vec![false; merged.positions.len() + b.positions.len()];
    let mut remap = Vec::with_capacity(b.positions.len());
    for (p, &flag) in b.positions.iter().zip(&b.boundary) {
        let id = match flag.then(|| seen.get(&p.map(f64::to_bits))).flatten() {
            Some(&existing) => {
                welded[existing as usize] = true;
                existing
            }
            None => {
                let id = merged.positions.len() as u32;
                merged.positions.push(*p);
                merged.boundary.push(flag);
                id
            }
        };
        remap.push(id);
    }
    welded.truncate(merged.positions.len());
    for t in &b.triangles {
        merged.triangles.push(t.map(|v| remap[v as usize]));
    }

    // Every boundary vertex sitting on a contact plane must have found a
    // partner; a leftover means the block meshes disagree on the face.
    for (idx, (p, &flag)) in merged.positions.iter().zip(&merged.boundary).enumerate() {
        if !flag || welded[idx] {
            continue;
        }
        for &(axis, coord) in &contacts {
            if p[axis] == coord {
                return Err(SimError::Stitch(format!(
                    "boundary vertex ({}, {}, {}) has no coincident partner on the shared face {} = {}",
                    p[0],
                    p[1],
                    p[2],
                    ["x", "y", "z"][axis],
                    coord
                )));
            }
        }
    }

    // Unflag seam vertices: when the union is a box, flags are exactly
    // "on a union box face"; otherwise only the welded seam is unflagged.
    match union {
        Some((lo, hi)) => {
            for (p, flag) in merged.positions.iter().zip(merged.boundary.iter_mut()) {
                *flag = (0..3).any(|d| p[d] == lo[d] || p[d] == hi[d]);
            }
        }
        None => {
            for (idx, flag) in merged.boundary.iter_mut().enumerate() {
                if welded[idx] {
                    *flag = false;
                }
            }
        }
    }

    // Coarsen only the stitched band: welded vertices plus their one-ring.
    let mut region = welded;
    let snapshot: Vec<bool> = region.clone();
    for t in &merged.triangles {
        if t.iter().any(|&v| snapshot[v as usize]) {
            for &v in t {
                region[v as usize] = true;
            }
        }
    }
    let mut out = if region.iter().any(|&r| r) && opts.stitch_ratio < 1.0 {
        coarsen_region(&merged, &region, opts.stitch_ratio)
    } else {
        merged
    };
    if let Some(budget) = opts.max_triangles {
        if out.triangles.len() > budget {
            let ratio = budget as f64 / out.triangles.len() as f64;
            out = coarsen_mesh(&out, ratio, true);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::marching::marching_cubes;
    use super::*;

    fn sphere(i: usize, j: usize, k: usize) -> f64 {
        let c = [13.5; 3];
        let p = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
        10.0 - ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt()
    }

    /// Eight ghost-extended block meshes tiling a 26^3-cube sphere domain.
    fn octant_meshes() -> Vec<TriMesh> {
        let mut out = Vec::new();
        for bz in 0..2 {
            for by in 0..2 {
                for bx in 0..2 {
                    let o = [bx * 13, by * 13, bz * 13];
                    out.push(marching_cubes(
                        [14; 3],
                        |i, j, k| sphere(i + o[0], j + o[1], k + o[2]),
                        [o[0] as i64, o[1] as i64, o[2] as i64],
                        1.0,
                        0.0,
                        0,
                    ));
                }
            }
        }
        out
    }

    #[test]
    fn single_mesh_is_identity() {
        let m = octant_meshes().into_iter().next().unwrap();
        let r = hierarchical_reduce(vec![m.clone()], &ReduceOptions::default()).unwrap();
        assert_eq!(r, m);
    }

    #[test]
    fn eight_blocks_reduce_to_a_watertight_sphere() {
        let meshes = octant_meshes();
        let pieces: usize = meshes.iter().map(|m| m.triangles.len()).sum();
        let r = hierarchical_reduce(meshes, &ReduceOptions::default()).unwrap();
        assert!(r.is_watertight());
        assert_eq!(r.euler_characteristic(), 2);
        assert!(r.triangles.len() < pieces, "stitch band was not coarsened");
        let want_area = 4.0 * std::f64::consts::PI * 100.0;
        let area = r.area();
        assert!(
            (area - want_area).abs() / want_area < 0.03,
            "area {area} vs {want_area}"
        );
    }

    #[test]
    fn weld_count_matches_brute_force_coincidences() {
        let meshes = octant_meshes();
        let (a, b) = (meshes[0].clone(), meshes[1].clone());
        let brute: usize = {
            let bset: std::collections::HashSet<[u64; 3]> = b
                .positions
                .iter()
                .zip(&b.boundary)
                .filter(|(_, &f)| f)
                .map(|(p, _)| p.map(f64::to_bits))
                .collect();
            a.positions
                .iter()
                .zip(&a.boundary)
                .filter(|(p, &f)| f && bset.contains(&p.map(f64::to_bits)))
                .count()
        };
        assert!(brute > 0);
        let opts = ReduceOptions {
            stitch_ratio: 1.0, // keep the seam so vertex counts are exact
            max_triangles: None,
        };
        let merged = merge_pair(a.clone(), b.clone(), &opts).unwrap();
        let expected = a.positions.len() + b.positions.len() - brute;
        assert_eq!(merged.positions.len(), expected);
    }

    #[test]
    fn mismatched_faces_are_reported() {
        let meshes = octant_meshes();
        let (a, mut b) = (meshes[0].clone(), meshes[1].clone());
        // Perturb one seam vertex of b so it has no partner.
        let idx = b
            .positions
            .iter()
            .zip(&b.boundary)
            .position(|(p, &f)| f && p[0] == 13.5)
            .unwrap();
        b.positions[idx][1] += 1e-9;
        match merge_pair(a, b, &ReduceOptions::default()) {
            Err(SimError::Stitch(msg)) => assert!(msg.contains("x = 13.5"), "{msg}"),
            r => panic!("expected stitch error, got {:?}", r.map(|m| m.triangles.len())),
        }
    }

    #[test]
    fn memory_budget_caps_triangle_count() {
        let meshes = octant_meshes();
        let opts = ReduceOptions {
            stitch_ratio: 1.0,
            max_triangles: Some(400),
        };
        let r = hierarchical_reduce(meshes, &opts).unwrap();
        // The cap applies after each merge; the final mesh respects it up
        // to collapses blocked by locks.
        assert!(r.triangles.len() <= 500, "{}", r.triangles.len());
    }
}
