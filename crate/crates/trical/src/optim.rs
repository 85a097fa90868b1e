//! Derivative-free solvers and the pairwise-then-joint calibration procedure.
//!
//! Differential Evolution (rand/1/bin) does the global search inside a
//! bounded box; Nelder-Mead refines the best point. Candidate evaluations
//! within one DE generation are independent and run in parallel; all random
//! draws happen sequentially before evaluation, so results are bit-identical
//! regardless of thread count.

use crate::features::FeatureSet;
use crate::geometry::{CalibrationState, CameraIntrinsics, EulerPose};
use crate::losses::{
    self, LossWeights, ObjectiveMode, Pair, PairMask, PairValidity,
};
use crate::rng::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("invalid bounds: lower must be strictly below upper in every dimension")]
    InvalidBounds,
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("objective is not finite at the start point")]
    NonFiniteStart,
    #[error(transparent)]
    Loss(#[from] losses::LossError),
}

/// Box constraints, one (lower, upper) per parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OptimError> {
        if lower.len() != upper.len()
            || lower.is_empty()
            || lower.iter().zip(&upper).any(|(l, u)| !(l < u))
        {
            return Err(OptimError::InvalidBounds);
        }
        Ok(SearchBounds { lower, upper })
    }

    /// Symmetric box around a center point.
    pub fn around(center: &[f64], half_widths: &[f64]) -> Result<Self, OptimError> {
        if center.len() != half_widths.len() {
            return Err(OptimError::InvalidBounds);
        }
        SearchBounds::new(
            center.iter().zip(half_widths).map(|(c, h)| c - h).collect(),
            center.iter().zip(half_widths).map(|(c, h)| c + h).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (xi, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *xi = xi.clamp(*l, *u);
        }
    }

    /// Reflect a coordinate back into the box (repeatedly, for far
    /// excursions), then clamp against accumulated rounding.
    fn reflect(&self, x: &mut [f64]) {
        for (xi, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            let span = u - l;
            let mut v = *xi;
            for _ in 0..64 {
                if v < *l {
                    v = l + (l - v);
                } else if v > *u {
                    v = u - (v - u);
                } else {
                    break;
                }
                if !v.is_finite() || span <= 0.0 {
                    v = 0.5 * (l + u);
                    break;
                }
            }
            *xi = v.clamp(*l, *u);
        }
    }
}

/// Differential Evolution parameters (rand/1/bin with per-generation F
/// dither between `differential_weight_low` and `differential_weight`).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeParams {
    pub population: usize,
    pub differential_weight: f64,
    /// Lower end of the per-generation F dither; set equal to
    /// `differential_weight` for a fixed F.
    pub differential_weight_low: f64,
    pub crossover_rate: f64,
    pub max_generations: usize,
    /// Stop when the best value improves by less than this ...
    pub stagnation_tol: f64,
    /// ... over this many consecutive generations.
    pub stagnation_window: usize,
    pub seed: u64,
}

impl DeParams {
    /// Canonical 6-D configuration.
    pub fn pairwise() -> Self {
        DeParams {
            population: 60,
            differential_weight: 0.8,
            differential_weight_low: 0.5,
            crossover_rate: 0.9,
            max_generations: 200,
            stagnation_tol: 1e-8,
            stagnation_window: 20,
            seed: 0,
        }
    }

    /// Canonical 18-D configuration.
    pub fn joint() -> Self {
        DeParams { population: 90, max_generations: 300, ..DeParams::pairwise() }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.population < 4 {
            return Err(OptimError::InvalidParams("population must be >= 4".into()));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(OptimError::InvalidParams("F must be in (0, 2]".into()));
        }
        if !(self.differential_weight_low > 0.0
            && self.differential_weight_low <= self.differential_weight)
        {
            return Err(OptimError::InvalidParams("F dither range must be (0, F]".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(OptimError::InvalidParams("CR must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub generations: usize,
    /// Best value after each generation; useful for determinism checks.
    pub best_history: Vec<f64>,
}

/// DE/rand/1/bin minimization over a bounded box.
pub fn differential_evolution<F>(
    objective: F,
    bounds: &SearchBounds,
    params: &DeParams,
) -> Result<DeResult, OptimError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    differential_evolution_seeded(objective, bounds, params, None)
}

/// Like [`differential_evolution`], with an optional known-good point that
/// replaces the first member of the otherwise uniform initial population
/// (e.g. the current calibration state).
pub fn differential_evolution_seeded<F>(
    objective: F,
    bounds: &SearchBounds,
    params: &DeParams,
    seed_point: Option<&[f64]>,
) -> Result<DeResult, OptimError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    params.validate()?;
    let dim = bounds.dim();
    let np = params.population;
    let mut rng = Rng::stream(params.seed, &[0xDE]);

    let mut population: Vec<Vec<f64>> = (0..np)
        .map(|_| {
            (0..dim)
                .map(|d| rng.uniform(bounds.lower[d], bounds.upper[d]))
                .collect()
        })
        .collect();
    if let Some(p) = seed_point {
        assert_eq!(p.len(), dim);
        let mut p = p.to_vec();
        bounds.clamp(&mut p);
        population[0] = p;
    }
    let mut fitness: Vec<f64> = population.par_iter().map(|x| objective(x)).collect();
    let mut evaluations = np;

    let mut best_idx = 0;
    for i in 1..np {
        if fitness[i] < fitness[best_idx] {
            best_idx = i;
        }
    }
    let mut best_value = fitness[best_idx];
    let mut best = population[best_idx].clone();
    let mut best_history = Vec::with_capacity(params.max_generations);
    let mut generations = 0usize;

    for _gen in 0..params.max_generations {
        generations += 1;
        // Draw every random decision for the generation up front.
        let f_gen = if params.differential_weight_low < params.differential_weight {
            rng.uniform(params.differential_weight_low, params.differential_weight)
        } else {
            params.differential_weight
        };
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut r = [0usize; 3];
                for slot in 0..3 {
                    loop {
                        let cand = rng.next_index(np);
                        if cand != i && !r[..slot].contains(&cand) {
                            r[slot] = cand;
                            break;
                        }
                    }
                }
                let j_rand = rng.next_index(dim);
                let mut trial = population[i].clone();
                for d in 0..dim {
                    if d == j_rand || rng.next_f64() < params.crossover_rate {
                        trial[d] = population[r[0]][d]
                            + f_gen * (population[r[1]][d] - population[r[2]][d]);
                    }
                }
                bounds.reflect(&mut trial);
                trial
            })
            .collect();
        let trial_fits: Vec<f64> = trials.par_iter().map(|x| objective(x)).collect();
        evaluations += np;
        for i in 0..np {
            if trial_fits[i] <= fitness[i] {
                population[i] = trials[i].clone();
                fitness[i] = trial_fits[i];
            }
        }
        for i in 0..np {
            if fitness[i] < best_value {
                best_value = fitness[i];
                best = population[i].clone();
            }
        }
        best_history.push(best_value);
        // Stop when the best value improved by less than the tolerance over
        // the whole trailing window.
        let g = best_history.len();
        if g > params.stagnation_window
            && best_history[g - 1 - params.stagnation_window] - best_value
                < params.stagnation_tol
        {
            break;
        }
    }

    Ok(DeResult { best, value: best_value, evaluations, generations, best_history })
}

/// Nelder-Mead parameters (standard coefficients).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NmParams {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Terminate when the max function-value spread across the simplex
    /// drops below this.
    pub spread_tol: f64,
    pub max_iterations: usize,
    /// Initial simplex step per axis, as a fraction of the bound span.
    pub step_fraction: f64,
}

impl Default for NmParams {
    fn default() -> Self {
        NmParams {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            spread_tol: 1e-10,
            max_iterations: 500,
            step_fraction: 0.05,
        }
    }
}

impl NmParams {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.reflection > 0.0
            && self.expansion > 1.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
        {
            Ok(())
        } else {
            Err(OptimError::InvalidParams("Nelder-Mead coefficient signs".into()))
        }
    }
}

#[derive(Clone, Debug)]
pub struct NmResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
}

/// Nelder-Mead simplex minimization from a start point, iterates clamped to
/// the bounds.
pub fn nelder_mead<F>(
    objective: F,
    start: &[f64],
    bounds: &SearchBounds,
    params: &NmParams,
) -> Result<NmResult, OptimError>
where
    F: Fn(&[f64]) -> f64,
{
    params.validate()?;
    let dim = start.len();
    assert_eq!(dim, bounds.dim());
    let f0 = objective(start);
    if !f0.is_finite() {
        return Err(OptimError::NonFiniteStart);
    }
    let mut evaluations = 1usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f0));
    for d in 0..dim {
        let mut p = start.to_vec();
        let step = params.step_fraction * (bounds.upper[d] - bounds.lower[d]);
        p[d] += step;
        bounds.clamp(&mut p);
        // Degenerate when clamping lands back on the start; step inward.
        if (p[d] - start[d]).abs() < 1e-15 {
            p[d] = start[d] - step;
            bounds.clamp(&mut p);
        }
        let f = objective(&p);
        evaluations += 1;
        simplex.push((p, f));
    }

    let mut iterations = 0usize;
    for _ in 0..params.max_iterations {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = simplex[dim].1 - simplex[0].1;
        if spread < params.spread_tol {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|(p, _)| p[d]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let point_along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..dim)
                .map(|d| centroid[d] + coef * (centroid[d] - worst.0[d]))
                .collect();
            bounds.clamp(&mut p);
            p
        };

        let reflected = point_along(params.reflection);
        let fr = objective(&reflected);
        evaluations += 1;
        if fr < simplex[0].1 {
            let expanded = point_along(params.reflection * params.expansion);
            let fe = objective(&expanded);
            evaluations += 1;
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                point_along(params.reflection * params.contraction)
            } else {
                point_along(-params.contraction)
            };
            let fc = objective(&contracted);
            evaluations += 1;
            if fc < worst.1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for d in 0..dim {
                        v.0[d] = best[d] + params.shrink * (v.0[d] - best[d]);
                    }
                    bounds.clamp(&mut v.0);
                    v.1 = objective(&v.0);
                    evaluations += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(NmResult {
        best: simplex[0].0.clone(),
        value: simplex[0].1,
        evaluations,
        iterations,
    })
}

/// Search-box half-widths for calibration solves (radians / meters applied
/// per pose as [yaw, pitch, roll, tx, ty, tz]).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CalibrationBounds {
    pub rotation_rad: f64,
    pub translation_m: f64,
}

impl CalibrationBounds {
    pub fn pairwise_default() -> Self {
        CalibrationBounds { rotation_rad: 10f64.to_radians(), translation_m: 1.0 }
    }

    pub fn joint_default() -> Self {
        CalibrationBounds { rotation_rad: 2f64.to_radians(), translation_m: 0.25 }
    }

    fn half_widths(&self, poses: usize) -> Vec<f64> {
        let mut hw = Vec::with_capacity(poses * 6);
        for _ in 0..poses {
            hw.extend_from_slice(&[
                self.rotation_rad,
                self.rotation_rad,
                self.rotation_rad,
                self.translation_m,
                self.translation_m,
                self.translation_m,
            ]);
        }
        hw
    }
}

#[derive(Clone, Debug)]
pub struct PairCalibration {
    pub pose: EulerPose,
    pub value: f64,
    pub evaluations: usize,
}

fn state_with_pose(base: &CalibrationState, pair: Pair, pose: EulerPose) -> CalibrationState {
    let mut s = *base;
    match pair {
        Pair::CameraLidar => s.lidar_to_camera = pose,
        Pair::LidarRadar => s.radar_to_lidar = pose,
        Pair::CameraRadar => s.camera_to_radar = pose,
    }
    s
}

fn pose_of(state: &CalibrationState, pair: Pair) -> EulerPose {
    match pair {
        Pair::CameraLidar => state.lidar_to_camera,
        Pair::LidarRadar => state.radar_to_lidar,
        Pair::CameraRadar => state.camera_to_radar,
    }
}

/// Minimize one pair's feature loss over its 6-DoF pose: DE inside
/// `bounds` centered on the pose in `init`, refined by Nelder-Mead.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_pairwise(
    frames: &[&FeatureSet],
    validity: Option<&[PairValidity]>,
    pair: Pair,
    init: &CalibrationState,
    bounds: &CalibrationBounds,
    de: &DeParams,
    nm: &NmParams,
    weights: &LossWeights,
    intr: &CameraIntrinsics,
) -> Result<PairCalibration, OptimError> {
    let mask = PairMask::only(pair);
    // Fail fast when the pair has no usable frames; the candidate transform
    // never changes term presence.
    losses::loss_pairwise_total(frames, validity, init, intr, weights, &mask)?;

    let objective = |x: &[f64]| -> f64 {
        let pose = EulerPose::from_array([x[0], x[1], x[2], x[3], x[4], x[5]]);
        let state = state_with_pose(init, pair, pose);
        losses::loss_pairwise_total(frames, validity, &state, intr, weights, &mask)
            .map(|l| l.total)
            .unwrap_or(f64::INFINITY)
    };
    let center = pose_of(init, pair).to_array();
    let search = SearchBounds::around(&center, &bounds.half_widths(1))?;
    let de_result = differential_evolution_seeded(&objective, &search, de, Some(&center))?;
    let nm_result = nelder_mead(&objective, &de_result.best, &search, nm)?;
    let (best, value) = if nm_result.value <= de_result.value {
        (nm_result.best, nm_result.value)
    } else {
        (de_result.best, de_result.value)
    };
    Ok(PairCalibration {
        pose: EulerPose::from_array([best[0], best[1], best[2], best[3], best[4], best[5]]),
        value,
        evaluations: de_result.evaluations + nm_result.evaluations,
    })
}

/// The pose of `pair` that closes the cycle exactly, derived from the other
/// two poses of `state`.
pub fn cycle_completion(state: &CalibrationState, pair: Pair) -> EulerPose {
    match pair {
        Pair::CameraRadar => state
            .t_lidar_to_camera()
            .compose(&state.t_radar_to_lidar())
            .inverse()
            .to_euler(),
        Pair::CameraLidar => state
            .t_radar_to_lidar()
            .compose(&state.t_camera_to_radar())
            .inverse()
            .to_euler(),
        Pair::LidarRadar => state
            .t_camera_to_radar()
            .compose(&state.t_lidar_to_camera())
            .inverse()
            .to_euler(),
    }
}

/// Consistency-seeded polish: for each pair in turn, complete the cycle from
/// the other two poses, refine that candidate against the pair's own feature
/// loss with Nelder-Mead, and keep it when it beats the incumbent. Rescues a
/// pair whose decoupled solve settled in a degenerate trough that the other
/// two pairs can disambiguate.
#[allow(clippy::too_many_arguments)]
pub fn consistency_polish(
    frames: &[&FeatureSet],
    validity: Option<&[PairValidity]>,
    state: &CalibrationState,
    bounds: &CalibrationBounds,
    nm: &NmParams,
    weights: &LossWeights,
    intr: &CameraIntrinsics,
) -> CalibrationState {
    let mut out = *state;
    for pair in crate::losses::ALL_PAIRS {
        let mask = PairMask::only(pair);
        let value_of = |s: &CalibrationState| {
            losses::loss_pairwise_total(frames, validity, s, intr, weights, &mask)
                .map(|l| l.total)
        };
        let Ok(current) = value_of(&out) else { continue };
        let candidate_pose = cycle_completion(&out, pair);
        let candidate_state = state_with_pose(&out, pair, candidate_pose);
        let objective = |x: &[f64]| -> f64 {
            let pose = EulerPose::from_array([x[0], x[1], x[2], x[3], x[4], x[5]]);
            value_of(&state_with_pose(&out, pair, pose)).unwrap_or(f64::INFINITY)
        };
        let center = candidate_pose.to_array();
        let Ok(search) = SearchBounds::around(&center, &bounds.half_widths(1)) else {
            continue;
        };
        let polished = match nelder_mead(&objective, &center, &search, nm) {
            Ok(r) => r,
            Err(_) => continue,
        };
        if polished.value < current && value_of(&candidate_state).is_ok() {
            let pose = EulerPose::from_array([
                polished.best[0],
                polished.best[1],
                polished.best[2],
                polished.best[3],
                polished.best[4],
                polished.best[5],
            ]);
            out = state_with_pose(&out, pair, pose);
        }
    }
    out
}

/// Refine the camera's common-mode placement on the consistent manifold:
/// the 6 lidar->camera parameters are optimized against BOTH camera losses
/// with camera->radar re-derived from the cycle at every step (so the loop
/// stays closed by construction and radar->lidar is untouched). Rescues the
/// vertical/depth drift that the cycle itself cannot see because it moves
/// both camera transforms together.
#[allow(clippy::too_many_arguments)]
pub fn refine_camera_common(
    frames: &[&FeatureSet],
    validity: Option<&[PairValidity]>,
    state: &CalibrationState,
    de: &DeParams,
    nm: &NmParams,
    weights: &LossWeights,
    intr: &CameraIntrinsics,
) -> CalibrationState {
    let mask = PairMask {
        camera_lidar: true,
        camera_radar: true,
        lidar_radar: false,
    };
    let build = |x: &[f64]| -> CalibrationState {
        let mut s = *state;
        s.lidar_to_camera =
            EulerPose::from_array([x[0], x[1], x[2], x[3], x[4], x[5]]);
        s.camera_to_radar = cycle_completion(&s, Pair::CameraRadar);
        s
    };
    let objective = |x: &[f64]| -> f64 {
        losses::loss_pairwise_total(frames, validity, &build(x), intr, weights, &mask)
            .map(|l| l.total)
            .unwrap_or(f64::INFINITY)
    };
    let center = state.lidar_to_camera.to_array();
    let Ok(current) = losses::loss_pairwise_total(frames, validity, state, intr, weights, &mask)
    else {
        return *state;
    };
    let Ok(search) = SearchBounds::around(
        &center,
        &[
            2f64.to_radians(),
            2f64.to_radians(),
            2f64.to_radians(),
            0.3,
            0.3,
            0.3,
        ],
    ) else {
        return *state;
    };
    // A small global search: the camera trough (pitch / vertical / depth
    // compensation) is curved, and a simplex started inside it rarely
    // escapes within its budget.
    let de_small = DeParams {
        population: 40,
        max_generations: 100,
        seed: de.seed ^ 0xCA,
        ..*de
    };
    let Ok(de_result) = differential_evolution_seeded(&objective, &search, &de_small, Some(&center))
    else {
        return *state;
    };
    let nm_long = NmParams { max_iterations: nm.max_iterations.max(800), ..*nm };
    let best = match nelder_mead(&objective, &de_result.best, &search, &nm_long) {
        Ok(r) if r.value <= de_result.value => (r.best, r.value),
        _ => (de_result.best, de_result.value),
    };
    if best.1 < current.total {
        build(&best.0)
    } else {
        *state
    }
}

#[derive(Clone, Debug)]
pub struct JointCalibration {
    pub state: CalibrationState,
    pub value: f64,
    pub global_loss: f64,
    pub evaluations: usize,
    /// True when the refined state was rejected in favor of the init (the
    /// refinement may never regress).
    pub kept_init: bool,
}

/// Simultaneous 18-D refinement of all pairwise transforms against the
/// combined objective (pairwise losses plus the cyclic self-consistency
/// loss). The result never has a worse combined loss - nor a worse global
/// loss - than the init.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_joint(
    frames: &[&FeatureSet],
    validity: Option<&[PairValidity]>,
    init: &CalibrationState,
    bounds: &CalibrationBounds,
    de: &DeParams,
    nm: &NmParams,
    weights: &LossWeights,
    intr: &CameraIntrinsics,
    mode: ObjectiveMode,
) -> Result<JointCalibration, OptimError> {
    let mask = PairMask::ALL;
    let init_combined = losses::evaluate_objective(
        frames, validity, init, intr, weights, &mask, mode, true,
    )?;
    let init_global = losses::loss_global(init, weights);

    let objective = |x: &[f64]| -> f64 {
        let mut arr = [0.0; 18];
        arr.copy_from_slice(x);
        let state = CalibrationState::from_array(arr);
        losses::evaluate_objective(frames, validity, &state, intr, weights, &mask, mode, true)
            .unwrap_or(f64::INFINITY)
    };
    let center = init.to_array();
    let search = SearchBounds::around(&center, &bounds.half_widths(3))?;
    let de_result = differential_evolution_seeded(&objective, &search, de, Some(&center))?;
    let nm_result = nelder_mead(&objective, &de_result.best, &search, nm)?;
    let (best, value) = if nm_result.value <= de_result.value {
        (nm_result.best, nm_result.value)
    } else {
        (de_result.best, de_result.value)
    };
    let mut arr = [0.0; 18];
    arr.copy_from_slice(&best);
    let state = CalibrationState::from_array(arr);
    let global_loss = losses::loss_global(&state, weights);
    let evaluations = de_result.evaluations + nm_result.evaluations;

    if value > init_combined || global_loss > init_global + 1e-12 {
        return Ok(JointCalibration {
            state: *init,
            value: init_combined,
            global_loss: init_global,
            evaluations,
            kept_init: true,
        });
    }
    Ok(JointCalibration { state, value, global_loss, evaluations, kept_init: false })
}
