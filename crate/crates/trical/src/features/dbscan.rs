//! DBSCAN density clustering with a voxel-grid neighbor index.
//!
//! Semantics follow the classic definition: a point is a core point when at
//! least `min_pts` points (itself included) lie within `eps`; clusters are the
//! density-connected components of core points; a non-core point with a core
//! neighbor is a border point and joins the smallest-id such cluster; all
//! remaining points are noise. Cluster ids are assigned in order of each
//! component's first core point, so the labeling is deterministic and
//! independent of traversal order.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn validate(&self) -> bool {
        self.eps > 0.0 && self.min_pts >= 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Noise,
    Cluster(u32),
}

pub fn dbscan(points: &[[f64; 3]], params: &DbscanParams) -> Vec<Label> {
    assert!(params.validate(), "invalid DBSCAN parameters");
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let eps2 = params.eps * params.eps;
    let cell = params.eps;
    let key = |p: &[f64; 3]| {
        (
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        )
    };
    let mut grid: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let neighbors = |i: usize, out: &mut Vec<usize>| {
        out.clear();
        let (kx, ky, kz) = key(&points[i]);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &j in bucket {
                            let p = &points[i];
                            let q = &points[j];
                            let d2 = (p[0] - q[0]).powi(2)
                                + (p[1] - q[1]).powi(2)
                                + (p[2] - q[2]).powi(2);
                            if d2 <= eps2 {
                                out.push(j);
                            }
                        }
                    }
                }
            }
        }
    };

    let mut scratch = Vec::new();
    let mut core = vec![false; n];
    for i in 0..n {
        neighbors(i, &mut scratch);
        core[i] = scratch.len() >= params.min_pts;
    }

    // Flood-fill components over core points, in index order so cluster ids
    // follow first-core-point order.
    let mut labels = vec![Label::Noise; n];
    let mut cluster_of_core = vec![u32::MAX; n];
    let mut next_cluster = 0u32;
    let mut stack = Vec::new();
    for i in 0..n {
        if !core[i] || cluster_of_core[i] != u32::MAX {
            continue;
        }
        let id = next_cluster;
        next_cluster += 1;
        cluster_of_core[i] = id;
        stack.push(i);
        while let Some(c) = stack.pop() {
            neighbors(c, &mut scratch);
            for &j in &scratch {
                if core[j] && cluster_of_core[j] == u32::MAX {
                    cluster_of_core[j] = id;
                    stack.push(j);
                }
            }
        }
    }
    for i in 0..n {
        if core[i] {
            labels[i] = Label::Cluster(cluster_of_core[i]);
        }
    }
    // Border points: smallest cluster id among core neighbors.
    for i in 0..n {
        if core[i] {
            continue;
        }
        neighbors(i, &mut scratch);
        let best = scratch
            .iter()
            .filter(|&&j| core[j])
            .map(|&j| cluster_of_core[j])
            .min();
        if let Some(id) = best {
            labels[i] = Label::Cluster(id);
        }
    }
    labels
}

/// Brute-force O(n^2) oracle with identical semantics; kept in the crate so
/// both unit tests and the acceptance suite can check equivalence.
pub fn dbscan_bruteforce(points: &[[f64; 3]], params: &DbscanParams) -> Vec<Label> {
    let n = points.len();
    let eps2 = params.eps * params.eps;
    let within = |i: usize, j: usize| {
        let p = &points[i];
        let q = &points[j];
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2) <= eps2
    };
    let mut core = vec![false; n];
    for i in 0..n {
        let count = (0..n).filter(|&j| within(i, j)).count();
        core[i] = count >= params.min_pts;
    }
    // Transitive closure over core adjacency.
    let mut comp = vec![u32::MAX; n];
    let mut next = 0u32;
    for i in 0..n {
        if !core[i] || comp[i] != u32::MAX {
            continue;
        }
        let id = next;
        next += 1;
        let mut stack = vec![i];
        comp[i] = id;
        while let Some(c) = stack.pop() {
            for j in 0..n {
                if core[j] && comp[j] == u32::MAX && within(c, j) {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
    }
    let mut labels = vec![Label::Noise; n];
    for i in 0..n {
        if core[i] {
            labels[i] = Label::Cluster(comp[i]);
        } else {
            let best = (0..n).filter(|&j| core[j] && within(i, j)).map(|j| comp[j]).min();
            if let Some(id) = best {
                labels[i] = Label::Cluster(id);
            }
        }
    }
    labels
}
