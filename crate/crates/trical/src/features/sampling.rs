//! Spatially uniform point-cloud subsampling.
//!
//! Points are bucketed into 2 m voxels; selection sweeps the voxels in key
//! order taking one point per occupied voxel per sweep, so every occupied
//! voxel keeps at least one point whenever the target permits and coverage
//! degrades evenly as the target shrinks.

const VOXEL_SIZE: f64 = 2.0;

/// Return indices of `min(target, points.len())` points, ascending.
/// Deterministic for identical input.
///
/// Every occupied voxel keeps at least one point whenever the target permits;
/// the remaining quota is split across voxels in proportion to their
/// populations (largest-remainder apportionment), then filled by an even
/// stride inside each voxel. Proportional allocation keeps small dense
/// structures (a corner-reflector bundle, a pedestrian) from being thinned
/// harder than the ground plane around them.
pub fn uniform_sample(points: &[[f64; 3]], target: usize) -> Vec<usize> {
    assert!(target >= 1, "target_count must be >= 1");
    let n = points.len();
    if n <= target {
        return (0..n).collect();
    }
    let key = |p: &[f64; 3]| {
        [
            (p[0] / VOXEL_SIZE).floor() as i64,
            (p[1] / VOXEL_SIZE).floor() as i64,
            (p[2] / VOXEL_SIZE).floor() as i64,
        ]
    };
    let mut order: Vec<(usize, [i64; 3])> = points.iter().map(key).enumerate().collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));

    // Voxel runs over the sorted order.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || order[i].1 != order[start].1 {
            runs.push((start, i));
            start = i;
        }
    }
    let voxels = runs.len();
    let mut selected = Vec::with_capacity(target);

    if target <= voxels {
        // Tiny target: round-robin, one representative per voxel.
        'outer: loop {
            let sweep = selected.len() / voxels;
            for &(s, e) in &runs {
                if s + sweep < e {
                    selected.push(order[s + sweep].0);
                    if selected.len() == target {
                        break 'outer;
                    }
                }
            }
        }
    } else {
        // One guaranteed point per voxel plus proportional extras.
        let extra_total = target - voxels;
        let rem_total = n - voxels;
        let mut quotas: Vec<usize> = Vec::with_capacity(voxels);
        let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(voxels);
        let mut allocated = 0usize;
        for (vi, &(s, e)) in runs.iter().enumerate() {
            let extra_pop = (e - s - 1) as f64;
            let share = extra_total as f64 * extra_pop / rem_total as f64;
            let base = share.floor() as usize;
            quotas.push(1 + base);
            allocated += base;
            fracs.push((share - base as f64, vi));
        }
        let mut remaining = extra_total - allocated;
        fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut fi = 0;
        while remaining > 0 {
            let vi = fracs[fi % fracs.len()].1;
            let (s, e) = runs[vi];
            if quotas[vi] < e - s {
                quotas[vi] += 1;
                remaining -= 1;
            }
            fi += 1;
        }
        for (vi, &(s, e)) in runs.iter().enumerate() {
            let pop = e - s;
            let q = quotas[vi];
            for j in 0..q {
                selected.push(order[s + j * pop / q].0);
            }
        }
    }
    selected.sort_unstable();
    selected.dedup();
    debug_assert_eq!(selected.len(), target.min(n));
    selected
}
