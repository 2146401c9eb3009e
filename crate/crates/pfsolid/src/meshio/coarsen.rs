//! Quadric-error edge-collapse mesh simplification.
//!
//! Classic scheme: each vertex accumulates the plane quadrics of its
//! incident triangles; collapsing an edge costs the quadric form of the
//! merged vertex at its new position. A lazy heap with per-vertex versions
//! keeps candidates current. Collapses respect the link condition (no
//! topological pinches) and, when requested, never move boundary-flagged
//! vertices.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::{cross, norm, sub, TriMesh};

/// Symmetric 4x4 quadric, upper triangle row-major.
#[derive(Debug, Clone, Copy, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn from_plane(n: [f64; 3], d: f64) -> Self {
        let v = [n[0], n[1], n[2], d];
        let mut q = [0.0; 10];
        let mut idx = 0;
        for r in 0..4 {
            for c in r..4 {
                q[idx] = v[r] * v[c];
                idx += 1;
            }
        }
        Quadric(q)
    }

    fn add(&mut self, o: &Quadric) {
        for i in 0..10 {
            self.0[i] += o.0[i];
        }
    }

    fn eval(&self, p: [f64; 3]) -> f64 {
        let v = [p[0], p[1], p[2], 1.0];
        let mut idx = 0;
        let mut acc = 0.0;
        for r in 0..4 {
            for c in r..4 {
                let w = if r == c { 1.0 } else { 2.0 };
                acc += w * self.0[idx] * v[r] * v[c];
                idx += 1;
            }
        }
        acc
    }
}

#[derive(Debug)]
struct Candidate {
    cost: f64,
    u: u32,
    v: u32,
    versions: (u32, u32),
    target: [f64; 3],
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost; ties broken by indices for determinism.
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.u.cmp(&self.u))
            .then(other.v.cmp(&self.v))
    }
}

struct Simplifier {
    positions: Vec<[f64; 3]>,
    boundary: Vec<bool>,
    alive_v: Vec<bool>,
    versions: Vec<u32>,
    quadrics: Vec<Quadric>,
    tris: Vec<[u32; 3]>,
    alive_t: Vec<bool>,
    /// Triangle ids incident to each vertex (may contain dead entries).
    incident: Vec<Vec<u32>>,
    lock_boundary: bool,
    /// When set, only edges with both endpoints in the region may collapse.
    region: Option<Vec<bool>>,
    heap: BinaryHeap<Candidate>,
    live_tris: usize,
}

impl Simplifier {
    fn new(mesh: &TriMesh, lock_boundary: bool, region: Option<Vec<bool>>) -> Self {
        let nv = mesh.positions.len();
        let mut s = Simplifier {
            positions: mesh.positions.clone(),
            boundary: mesh.boundary.clone(),
            alive_v: vec![true; nv],
            versions: vec![0; nv],
            quadrics: vec![Quadric::default(); nv],
            tris: mesh.triangles.clone(),
            alive_t: vec![true; mesh.triangles.len()],
            incident: vec![Vec::new(); nv],
            lock_boundary,
            region,
            heap: BinaryHeap::new(),
            live_tris: mesh.triangles.len(),
        };
        for (tid, t) in s.tris.iter().enumerate() {
            for &v in t {
                s.incident[v as usize].push(tid as u32);
            }
            if let Some(q) = s.tri_quadric(t) {
                for &v in t {
                    s.quadrics[v as usize].add(&q);
                }
            }
        }
        let mut edges = HashSet::new();
        for t in &s.tris {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let mut edges: Vec<_> = edges.into_iter().collect();
        edges.sort_unstable();
        for (a, b) in edges {
            s.push_candidate(a, b);
        }
        s
    }

    fn tri_quadric(&self, t: &[u32; 3]) -> Option<Quadric> {
        let [a, b, c] = t.map(|i| self.positions[i as usize]);
        let n = cross(sub(b, a), sub(c, a));
        let len = norm(n);
        if len < 1e-300 {
            return None;
        }
        let n = [n[0] / len, n[1] / len, n[2] / len];
        let d = -(n[0] * a[0] + n[1] * a[1] + n[2] * a[2]);
        Some(Quadric::from_plane(n, d))
    }

    fn collapsible(&self, u: u32, v: u32) -> bool {
        let (ub, vb) = (self.boundary[u as usize], self.boundary[v as usize]);
        if self.lock_boundary && ub && vb {
            return false;
        }
        if let Some(region) = &self.region {
            if !region[u as usize] || !region[v as usize] {
                return false;
            }
        }
        true
    }

    fn push_candidate(&mut self, u: u32, v: u32) {
        if !self.alive_v[u as usize] || !self.alive_v[v as usize] || !self.collapsible(u, v) {
            return;
        }
        let mut q = self.quadrics[u as usize];
        q.add(&self.quadrics[v as usize]);
        let (pu, pv) = (self.positions[u as usize], self.positions[v as usize]);
        let candidates: Vec<[f64; 3]> = if self.lock_boundary && self.boundary[u as usize] {
            vec![pu]
        } else if self.lock_boundary && self.boundary[v as usize] {
            vec![pv]
        } else {
            let mid = [
                0.5 * (pu[0] + pv[0]),
                0.5 * (pu[1] + pv[1]),
                0.5 * (pu[2] + pv[2]),
            ];
            vec![pu, pv, mid]
        };
        let (target, cost) = candidates
            .into_iter()
            .map(|p| (p, q.eval(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        self.heap.push(Candidate {
            cost,
            u,
            v,
            versions: (self.versions[u as usize], self.versions[v as usize]),
            target,
        });
    }

    fn neighbors(&self, v: u32) -> HashSet<u32> {
        let mut out = HashSet::new();
        for &tid in &self.incident[v as usize] {
            if !self.alive_t[tid as usize] {
                continue;
            }
            for &w in &self.tris[tid as usize] {
                if w != v {
                    out.insert(w);
                }
            }
        }
        out
    }

    /// Link condition: the common neighbors of `u` and `v` must be exactly
    /// the opposite vertices of the triangles on edge (u, v). Anything more
    /// would pinch the surface at the extra vertex.
    fn link_ok(&self, u: u32, v: u32) -> bool {
        let shared: HashSet<u32> = self
            .neighbors(u)
            .intersection(&self.neighbors(v))
            .copied()
            .collect();
        let mut wing = HashSet::new();
        for &tid in &self.incident[u as usize] {
            if !self.alive_t[tid as usize] {
                continue;
            }
            let t = self.tris[tid as usize];
            if t.contains(&v) {
                for &w in &t {
                    if w != u && w != v {
                        wing.insert(w);
                    }
                }
            }
        }
        shared == wing && !wing.is_empty()
    }

    fn try_collapse(&mut self, cand: &Candidate) -> bool {
        let (u, v) = (cand.u as usize, cand.v as usize);
        if !self.alive_v[u]
            || !self.alive_v[v]
            || self.versions[u] != cand.versions.0
            || self.versions[v] != cand.versions.1
        {
            return false;
        }
        if !self.link_ok(cand.u, cand.v) {
            return false;
        }
        // Merge v into u at the target position.
        self.positions[u] = cand.target;
        if self.boundary[v] {
            self.boundary[u] = true;
        }
        let qv = self.quadrics[v];
        self.quadrics[u].add(&qv);
        let v_tris = std::mem::take(&mut self.incident[v]);
        for tid in v_tris {
            let t = tid as usize;
            if !self.alive_t[t] {
                continue;
            }
            if self.tris[t].contains(&cand.u) {
                self.alive_t[t] = false;
                self.live_tris -= 1;
            } else {
                for w in self.tris[t].iter_mut() {
                    if *w == cand.v {
                        *w = cand.u;
                    }
                }
                self.incident[u].push(tid);
            }
        }
        self.alive_v[v] = false;
        self.versions[u] += 1;
        let nbrs = self.neighbors(cand.u);
        for &w in &nbrs {
            self.versions[w as usize] += 1;
        }
        let mut nbrs: Vec<u32> = nbrs.into_iter().collect();
        nbrs.sort_unstable();
        for w in nbrs {
            self.push_candidate(cand.u.min(w), cand.u.max(w));
        }
        true
    }

    fn run(&mut self, target_tris: usize) {
        while self.live_tris > target_tris {
            let Some(cand) = self.heap.pop() else {
                break;
            };
            self.try_collapse(&cand);
        }
    }

    fn finish(self, phase_id: usize, bbox: Option<([f64; 3], [f64; 3])>) -> TriMesh {
        let mut mesh = TriMesh {
            phase_id,
            positions: self.positions,
            boundary: self.boundary,
            triangles: self
                .tris
                .into_iter()
                .zip(self.alive_t)
                .filter_map(|(t, alive)| alive.then_some(t))
                .collect(),
            bbox,
        };
        mesh.compact();
        mesh
    }
}

/// Simplify until the triangle count is at most `target_ratio` times the
/// input count or no legal collapse remains.
pub fn coarsen_mesh(mesh: &TriMesh, target_ratio: f64, lock_boundary: bool) -> TriMesh {
    if target_ratio >= 1.0 || mesh.triangles.is_empty() {
        return mesh.clone();
    }
    let target = (mesh.triangles.len() as f64 * target_ratio).floor() as usize;
    let mut s = Simplifier::new(mesh, lock_boundary, None);
    s.run(target);
    s.finish(mesh.phase_id, mesh.bbox)
}

/// Simplify only inside a vertex region (used on freshly stitched seams);
/// boundary-flagged vertices stay locked.
pub fn coarsen_region(mesh: &TriMesh, region: &[bool], target_ratio: f64) -> TriMesh {
    let in_region = region.iter().filter(|&&r| r).count();
    if target_ratio >= 1.0 || in_region == 0 {
        return mesh.clone();
    }
    // Budget: shrink the region's triangle share by the requested ratio.
    let region_tris = mesh
        .triangles
        .iter()
        .filter(|t| t.iter().all(|&v| region[v as usize]))
        .count();
    let target = mesh.triangles.len() - region_tris + (region_tris as f64 * target_ratio) as usize;
    let mut s = Simplifier::new(mesh, true, Some(region.to_vec()));
    s.run(target);
    s.finish(mesh.phase_id, mesh.bbox)
}
