//! Radar cluster tracking: distinguishes moving objects by ego-compensated
//! Doppler and confirms tracks over consecutive frames.

use crate::geometry::{norm, sub, Vec3};
use serde::{Deserialize, Serialize};

/// One radar cluster in Cartesian radar coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadarClusterFeature {
    /// Indices into the frame's radar detection list.
    pub members: Vec<usize>,
    /// Center of mass, Cartesian radar frame.
    pub center: Vec3,
    /// Mean raw Doppler over members (m/s).
    pub mean_doppler: f64,
    /// Mean ego-compensated Doppler over members (m/s).
    pub mean_compensated_doppler: f64,
}

/// A confirmed dynamic track.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackedCluster {
    pub track_id: u32,
    /// Current center of mass, Cartesian radar frame.
    pub center: Vec3,
    /// Mean ego-compensated Doppler of the current cluster (m/s).
    pub mean_doppler: f64,
    /// Member indices of the current cluster.
    pub members: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrackerParams {
    /// Compensated-Doppler magnitude above which a cluster is dynamic (m/s).
    pub v_dyn: f64,
    /// Nearest-centroid association gate (m).
    pub gate: f64,
    /// Consecutive associations required to confirm a track.
    pub confirm: usize,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams { v_dyn: 0.5, gate: 2.0, confirm: 3 }
    }
}

#[derive(Clone, Debug)]
struct Track {
    id: u32,
    center: Vec3,
    hits: usize,
}

/// Stateful tracker; drive one instance per frame sequence, frames in order.
#[derive(Clone, Debug)]
pub struct RadarTracker {
    params: TrackerParams,
    tracks: Vec<Track>,
    next_id: u32,
}

impl RadarTracker {
    pub fn new(params: TrackerParams) -> Self {
        RadarTracker { params, tracks: Vec::new(), next_id: 0 }
    }

    /// Feed one frame of clusters; returns the confirmed dynamic tracks.
    pub fn update(&mut self, clusters: &[RadarClusterFeature]) -> Vec<TrackedCluster> {
        let candidates: Vec<usize> = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.mean_compensated_doppler.abs() > self.params.v_dyn)
            .map(|(i, _)| i)
            .collect();

        // Greedy nearest-centroid association, deterministic tie-breaks.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, track) in self.tracks.iter().enumerate() {
            for &ci in &candidates {
                let d = norm(sub(clusters[ci].center, track.center));
                if d <= self.params.gate {
                    pairs.push((d, ti, ci));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; self.tracks.len()];
        let mut cand_used = vec![false; clusters.len()];
        let mut assignments: Vec<(usize, usize)> = Vec::new();
        for (_, ti, ci) in pairs {
            if !track_used[ti] && !cand_used[ci] {
                track_used[ti] = true;
                cand_used[ci] = true;
                assignments.push((ti, ci));
            }
        }

        let mut new_tracks: Vec<Track> = Vec::new();
        let mut confirmed: Vec<TrackedCluster> = Vec::new();
        for (ti, ci) in assignments {
            let c = &clusters[ci];
            let hits = self.tracks[ti].hits + 1;
            let id = self.tracks[ti].id;
            new_tracks.push(Track { id, center: c.center, hits });
            if hits >= self.params.confirm {
                confirmed.push(TrackedCluster {
                    track_id: id,
                    center: c.center,
                    mean_doppler: c.mean_compensated_doppler,
                    members: c.members.clone(),
                });
            }
        }
        // Unmatched candidates start new (unconfirmed) tracks; unmatched
        // tracks are dropped ("3 consecutive associations" is strict).
        for &ci in &candidates {
            if !cand_used[ci] {
                new_tracks.push(Track {
                    id: self.next_id,
                    center: clusters[ci].center,
                    hits: 1,
                });
                self.next_id += 1;
            }
        }
        new_tracks.sort_by_key(|t| t.id);
        self.tracks = new_tracks;
        confirmed.sort_by_key(|t| t.track_id);
        confirmed
    }
}
