//! Loss construction, noise-injected sampling, and the training loop.
//!
//! The loss is a weighted position-change error plus a symmetric Hausdorff
//! term between the predicted and true next point clouds. Gaussian weights
//! centered on the spray cone focus the quadratic term near the gun; the
//! Hausdorff term backpropagates through nearest-neighbor correspondences
//! held fixed per evaluation.
//!
//! Training samples a random (experiment, layer, step), perturbs the wall
//! positions and the effector velocity history with white Gaussian noise in
//! normalized units before the graph is built (so edges inherit the noise),
//! and regresses the change from the noised state to the true next state.
//! Batch size is 1 by default and the whole loop is bit-deterministic for a
//! fixed seed.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use spraygnn_autodiff::{AdamState, Tape, Tensor, Var};

use crate::dataset::ExperimentDataset;
use crate::geometry::{project_to_wall, Vec3, WallGrid};
use crate::graph::{build_graph, compute_stats, world_positions, GraphConfig, NormStats, SprayGraph};
use crate::model::{forward, record_params, save_checkpoint, ModelConfig, ModelParams};
use crate::{CoreError, Scalar};

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig<T> {
    pub max_steps: u64,
    /// Step whose checkpoint is the selected model.
    pub select_step: u64,
    pub batch: usize,
    /// Input noise std in normalized units.
    pub noise_sigma: T,
    pub lambda_delta: T,
    pub lambda_hd: T,
    pub lr: T,
    pub seed: u64,
    /// Wall↔wall connectivity radius, mm.
    pub r_wall: T,
    /// Effector cone radius factor (radius = factor · distance).
    pub cone_factor: T,
    /// Extra checkpoint cadence; 0 = only select_step and the final step.
    pub checkpoint_every: u64,
    /// Validation cadence in gradient steps.
    pub val_every: u64,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            max_steps: 10_000,
            select_step: 300,
            batch: 1,
            noise_sigma: T::from_f64(0.003).unwrap(),
            lambda_delta: T::one(),
            lambda_hd: T::from_f64(0.1).unwrap(),
            lr: T::from_f64(1e-4).unwrap(),
            seed: 0,
            r_wall: T::from_f64(30.0).unwrap(),
            cone_factor: T::from_f64(0.4).unwrap(),
            checkpoint_every: 0,
            val_every: 10,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn graph_config(&self) -> GraphConfig<T> {
        GraphConfig { r_wall: self.r_wall, cone_factor: self.cone_factor }
    }
}

/// Gaussian loss weights: `w_i = exp(−ρ_i²/(2R²))` with ρ the in-plane
/// distance from particle `i` to the cone's base center and R the effector
/// connectivity radius at this step.
pub fn gaussian_weights<T: Scalar>(
    grid: &WallGrid<T>,
    step: &crate::geometry::TrajectoryStep<T>,
    cone_factor: T,
) -> Result<Vec<T>, CoreError> {
    let center = project_to_wall(step.tp, step.direction, grid)?;
    let (cx, cy) = grid.in_plane(center);
    let radius = cone_factor * grid.plane_distance(step.tp).abs();
    let two = T::from_f64(2.0).unwrap();
    let denom = two * radius * radius;
    Ok((0..grid.particle_count())
        .map(|i| {
            let (x, y) = grid.particle_xy(i);
            let dx = x - cx;
            let dy = y - cy;
            (-(dx * dx + dy * dy) / denom).exp()
        })
        .collect())
}

/// Weight-normalized quadratic loss: `Σ_i w_i‖pred_i − target_i‖² / Σ_i w_i`.
pub fn loss_delta<T: Scalar>(
    tape: &mut Tape<T>,
    pred: Var,
    target: Var,
    weights: &[T],
) -> Result<Var, CoreError> {
    let diff = tape.sub(pred, target)?;
    let quad = tape.weighted_sumsq(diff, weights)?;
    let total: T = weights.iter().fold(T::zero(), |acc, &w| acc + w);
    Ok(tape.scale(quad, T::one() / total)?)
}

/// For each row of `from`, the index of its nearest row in `to`
/// (first winner on ties). Rows are 3D points.
pub fn nearest_indices<T: Scalar>(from: &[T], to: &[T]) -> Vec<usize> {
    let n_from = from.len() / 3;
    let n_to = to.len() / 3;
    assert!(n_to > 0);
    (0..n_from)
        .into_par_iter()
        .map(|i| {
            let (x, y, z) = (from[i * 3], from[i * 3 + 1], from[i * 3 + 2]);
            let mut best = T::infinity();
            let mut arg = 0;
            for j in 0..n_to {
                let dx = to[j * 3] - x;
                let dy = to[j * 3 + 1] - y;
                let dz = to[j * 3 + 2] - z;
                let d = dx * dx + dy * dy + dz * dz;
                if d < best {
                    best = d;
                    arg = j;
                }
            }
            arg
        })
        .collect()
}

/// Directed Hausdorff distance `½·max_x |x − NN(x, cloud)|` as a plain value.
pub fn hausdorff_directed<T: Scalar>(from: &[T], to: &[T]) -> Result<T, CoreError> {
    if from.is_empty() || to.is_empty() {
        return Err(CoreError::EmptyCloud);
    }
    let nn = nearest_indices(from, to);
    let mut worst = T::zero();
    for (i, &j) in nn.iter().enumerate() {
        let dx = from[i * 3] - to[j * 3];
        let dy = from[i * 3 + 1] - to[j * 3 + 1];
        let dz = from[i * 3 + 2] - to[j * 3 + 2];
        let d = (dx * dx + dy * dy + dz * dz).sqrt();
        if d > worst {
            worst = d;
        }
    }
    Ok(worst * T::from_f64(0.5).unwrap())
}

/// Symmetric Hausdorff value: forward plus backward directed distances.
pub fn hausdorff<T: Scalar>(x: &[T], y: &[T]) -> Result<T, CoreError> {
    Ok(hausdorff_directed(x, y)? + hausdorff_directed(y, x)?)
}

/// Differentiable symmetric Hausdorff term with fixed correspondences.
///
/// `matches_true_to_pred[i]` is the predicted row matched to true row `i`;
/// `matches_pred_to_true[j]` the true row matched to predicted row `j`.
pub fn loss_hd_frozen<T: Scalar>(
    tape: &mut Tape<T>,
    pred_positions: Var,
    true_positions: Var,
    matches_true_to_pred: &[usize],
    matches_pred_to_true: &[usize],
) -> Result<Var, CoreError> {
    let half = T::from_f64(0.5).unwrap();

    // d(true, pred): distances from every true point to its matched guess.
    let matched_pred = tape.gather_rows(pred_positions, matches_true_to_pred)?;
    let diff_a = tape.sub(matched_pred, true_positions)?;
    let sq_a = tape.square(diff_a)?;
    let row_a = tape.row_sum(sq_a)?;
    let dist_a = tape.sqrt(row_a)?;
    let max_a = tape.max_reduce(dist_a)?;
    let term_a = tape.scale(max_a, half)?;

    // d(pred, true)
    let matched_true = tape.gather_rows(true_positions, matches_pred_to_true)?;
    let diff_b = tape.sub(pred_positions, matched_true)?;
    let sq_b = tape.square(diff_b)?;
    let row_b = tape.row_sum(sq_b)?;
    let dist_b = tape.sqrt(row_b)?;
    let max_b = tape.max_reduce(dist_b)?;
    let term_b = tape.scale(max_b, half)?;

    Ok(tape.add(term_a, term_b)?)
}

/// Symmetric Hausdorff loss; correspondences are computed from the current
/// values and then held fixed for the backward pass.
pub fn loss_hd<T: Scalar>(
    tape: &mut Tape<T>,
    pred_positions: Var,
    true_positions: Var,
) -> Result<Var, CoreError> {
    let pred_values = tape.values(pred_positions)?.to_vec();
    let true_values = tape.values(true_positions)?.to_vec();
    if pred_values.is_empty() || true_values.is_empty() {
        return Err(CoreError::EmptyCloud);
    }
    let true_to_pred = nearest_indices(&true_values, &pred_values);
    let pred_to_true = nearest_indices(&pred_values, &true_values);
    loss_hd_frozen(tape, pred_positions, true_positions, &true_to_pred, &pred_to_true)
}

/// One training sample, ready for the forward pass.
pub struct PreparedSample<T> {
    pub graph: SprayGraph<T>,
    /// Normalized position-change targets, N×3.
    pub target: Tensor<T>,
    /// Gaussian loss weights, length N.
    pub weights: Vec<T>,
    /// Normalized (noised) input positions, N×3.
    pub base_positions: Tensor<T>,
    /// Normalized true next positions, N×3.
    pub true_positions: Tensor<T>,
    /// Diagonal 3×3 map from normalized-delta to normalized-position units.
    pub delta_to_position: Tensor<T>,
}

/// Effector velocities at steps `..=k` of one layer, most recent first.
pub fn velocity_history<T: Scalar>(
    trajectory: &crate::geometry::Trajectory<T>,
    k: usize,
) -> Vec<Vec3<T>> {
    let lo = (k + 1).saturating_sub(crate::graph::VELOCITY_HISTORY);
    trajectory.steps[lo..=k].iter().rev().map(|s| s.velocity).collect()
}

/// Assemble the graph, target, and loss weights for (layer, step k).
///
/// With a noise RNG, wall positions and the velocity history receive
/// additive N(0, σ) in normalized units before edges are built; the target
/// is the change from the noised state to the true next state, so the model
/// learns to correct input perturbations. The last step of a layer closes it
/// with a zero true change.
pub fn prepare_sample<T: Scalar>(
    dataset: &ExperimentDataset<T>,
    layer: usize,
    k: usize,
    stats: &NormStats<T>,
    config: &TrainConfig<T>,
    mut noise_rng: Option<&mut ChaCha8Rng>,
) -> Result<PreparedSample<T>, CoreError> {
    let augmented = dataset
        .augmented
        .as_ref()
        .ok_or_else(|| CoreError::Format("dataset has no augmented snapshots".into()))?;
    let snapshots = &augmented[layer];
    let trajectory = &dataset.trajectories[layer];
    let step = &trajectory.steps[k];
    let n = dataset.particle_count();

    let mut positions = world_positions(&dataset.grid, &snapshots[k]);
    let mut history = velocity_history(trajectory, k);
    if let Some(rng) = noise_rng.as_deref_mut() {
        let sigma_mm = config.noise_sigma * stats.length_scale;
        for p in positions.iter_mut() {
            let ex: f64 = rng.sample(StandardNormal);
            let ey: f64 = rng.sample(StandardNormal);
            let ez: f64 = rng.sample(StandardNormal);
            p.x += sigma_mm * T::from_f64(ex).unwrap();
            p.y += sigma_mm * T::from_f64(ey).unwrap();
            p.z += sigma_mm * T::from_f64(ez).unwrap();
        }
        for v in history.iter_mut() {
            let ex: f64 = rng.sample(StandardNormal);
            let ey: f64 = rng.sample(StandardNormal);
            let ez: f64 = rng.sample(StandardNormal);
            v.x += config.noise_sigma * T::from_f64(ex).unwrap();
            v.y += config.noise_sigma * T::from_f64(ey).unwrap();
            v.z += config.noise_sigma * T::from_f64(ez).unwrap();
        }
    }

    let graph = build_graph(
        &dataset.grid,
        &positions,
        step,
        &history,
        layer,
        dataset.layers,
        stats,
        &config.graph_config(),
    )?;

    let next_offsets: &[T] =
        if k + 1 < snapshots.len() { &snapshots[k + 1] } else { &snapshots[k] };
    let next_positions = world_positions(&dataset.grid, next_offsets);

    let mut target = Vec::with_capacity(n * 3);
    let mut base = Vec::with_capacity(n * 3);
    let mut truth = Vec::with_capacity(n * 3);
    for i in 0..n {
        let delta = next_positions[i].sub(positions[i]);
        target.extend_from_slice(&stats.normalize_delta(delta));
        let b = positions[i].sub(stats.center).scale(T::one() / stats.length_scale);
        base.extend_from_slice(&b.to_array());
        let t = next_positions[i].sub(stats.center).scale(T::one() / stats.length_scale);
        truth.extend_from_slice(&t.to_array());
    }

    let weights = gaussian_weights(&dataset.grid, step, config.cone_factor)?;

    let mut diag = Tensor::zeros(&[3, 3]);
    for c in 0..3 {
        diag.values_mut()[c * 3 + c] = stats.delta_scale[c] / stats.length_scale;
    }

    Ok(PreparedSample {
        graph,
        target: Tensor::from_vec(&[n, 3], target)?,
        weights,
        base_positions: Tensor::from_vec(&[n, 3], base)?,
        true_positions: Tensor::from_vec(&[n, 3], truth)?,
        delta_to_position: diag,
    })
}

/// Forward pass plus total loss `λ_Δ·L_Δ + λ_HD·L_HD` for one sample.
pub fn sample_loss<T: Scalar>(
    tape: &mut Tape<T>,
    param_vars: &[Var],
    params: &ModelParams<T>,
    sample: &PreparedSample<T>,
    config: &TrainConfig<T>,
) -> Result<Var, CoreError> {
    let out = forward(tape, param_vars, params, &sample.graph)?;
    let wall_rows: Vec<usize> = (0..sample.graph.effector_index).collect();
    let pred = tape.gather_rows(out, &wall_rows)?;

    let target = tape.input(&sample.target);
    let l_delta = loss_delta(tape, pred, target, &sample.weights)?;

    // Predicted next positions in normalized space: base + scaled delta.
    let scale_var = tape.input(&sample.delta_to_position);
    let scaled = tape.matmul(pred, scale_var)?;
    let base = tape.input(&sample.base_positions);
    let pred_positions = tape.add(base, scaled)?;
    let true_positions = tape.input(&sample.true_positions);
    let l_hd = loss_hd(tape, pred_positions, true_positions)?;

    let a = tape.scale(l_delta, config.lambda_delta)?;
    let b = tape.scale(l_hd, config.lambda_hd)?;
    Ok(tape.add(a, b)?)
}

/// One row of the training log.
#[derive(Debug, Clone)]
pub struct LossRow {
    pub step: u64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub wall_seconds: f64,
}

/// Output of [`train`]: final parameters, the checkpoint selected at
/// `select_step`, frozen stats, and the per-step log.
pub struct TrainOutput<T> {
    pub params: ModelParams<T>,
    pub select_params: Option<ModelParams<T>>,
    pub stats: NormStats<T>,
    pub log: Vec<LossRow>,
}

enum ValSource {
    Experiment,
    HeldOutLayer(usize),
}

/// Run the gradient loop.
///
/// Each step samples a random (experiment, layer, step) from the training
/// sets, builds the noised graph, takes one Adam update, and logs the train
/// loss; every `val_every` steps a clean sample from the validation source
/// is scored. Without an explicit validation set, the last layer of the
/// first experiment is held out of training and used for validation.
pub fn train<T: Scalar>(
    train_sets: &[&ExperimentDataset<T>],
    val_set: Option<&ExperimentDataset<T>>,
    model_config: ModelConfig,
    config: &TrainConfig<T>,
    out_dir: Option<&Path>,
) -> Result<TrainOutput<T>, CoreError> {
    if train_sets.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    for ds in train_sets {
        if ds.augmented.is_none() || ds.snapshot_count() == 0 {
            return Err(CoreError::EmptyDataset);
        }
    }

    let stats = compute_stats(train_sets)?;
    let mut params = ModelParams::<T>::init(model_config, config.seed);
    let mut adam = AdamState::new(config.lr, &params.tensors);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let val_source = match val_set {
        Some(_) => ValSource::Experiment,
        None => ValSource::HeldOutLayer(train_sets[0].layers - 1),
    };

    let start = Instant::now();
    let mut log = Vec::with_capacity(config.max_steps as usize);
    let mut select_params = None;

    for step in 1..=config.max_steps {
        let mut grad_acc: Vec<Vec<T>> = params.tensors.iter().map(|t| vec![T::zero(); t.len()]).collect();
        let mut loss_acc = 0.0f64;
        for _ in 0..config.batch.max(1) {
            let (ds, layer, k) = draw_sample(train_sets, &val_source, &mut rng);
            let sample = prepare_sample(ds, layer, k, &stats, config, Some(&mut rng))?;
            let mut tape = Tape::new();
            let vars = record_params(&mut tape, &params);
            let loss = sample_loss(&mut tape, &vars, &params, &sample, config)?;
            loss_acc += tape.values(loss)?[0].to_f64().unwrap();
            let grads = tape.backward(loss)?;
            for (acc, var) in grad_acc.iter_mut().zip(&vars) {
                for (a, &g) in acc.iter_mut().zip(grads.get(*var)?) {
                    *a += g;
                }
            }
        }
        if config.batch > 1 {
            let inv = T::from_usize(config.batch).unwrap().recip();
            for acc in grad_acc.iter_mut() {
                for g in acc.iter_mut() {
                    *g *= inv;
                }
            }
            loss_acc /= config.batch as f64;
        }
        adam.step(&mut params.tensors, &grad_acc)?;

        let val_loss = if step % config.val_every == 0 {
            Some(validation_loss(train_sets, val_set, &val_source, &stats, &params, config, step)?)
        } else {
            None
        };

        log.push(LossRow {
            step,
            train_loss: loss_acc,
            val_loss,
            wall_seconds: start.elapsed().as_secs_f64(),
        });

        let is_select = step == config.select_step;
        let is_cadence = config.checkpoint_every > 0 && step % config.checkpoint_every == 0;
        if is_select {
            select_params = Some(params.clone());
        }
        if let Some(dir) = out_dir {
            if is_select || is_cadence || step == config.max_steps {
                let path = dir.join(format!("step_{step:06}.sgnn"));
                save_checkpoint(
                    &path,
                    &params,
                    &stats,
                    serde_json::json!({
                        "step": step,
                        "seed": config.seed,
                        "lr": config.lr.to_f64(),
                        "noise_sigma": config.noise_sigma.to_f64(),
                        "lambda_delta": config.lambda_delta.to_f64(),
                        "lambda_hd": config.lambda_hd.to_f64(),
                        "r_wall_mm": config.r_wall.to_f64(),
                        "cone_factor": config.cone_factor.to_f64(),
                    }),
                )?;
            }
        }
    }

    Ok(TrainOutput { params, select_params, stats, log })
}

fn draw_sample<'a, T: Scalar>(
    train_sets: &[&'a ExperimentDataset<T>],
    val_source: &ValSource,
    rng: &mut ChaCha8Rng,
) -> (&'a ExperimentDataset<T>, usize, usize) {
    let ds_index = if train_sets.len() > 1 { rng.gen_range(0..train_sets.len()) } else { 0 };
    let ds = train_sets[ds_index];
    let layer = match val_source {
        ValSource::HeldOutLayer(held) if ds_index == 0 && ds.layers > 1 => {
            // Sample among the non-held-out layers.
            let l = rng.gen_range(0..ds.layers - 1);
            if l >= *held {
                l + 1
            } else {
                l
            }
        }
        _ => rng.gen_range(0..ds.layers),
    };
    let len = ds.augmented.as_ref().unwrap()[layer].len();
    let k = rng.gen_range(0..len);
    (ds, layer, k)
}

fn validation_loss<T: Scalar>(
    train_sets: &[&ExperimentDataset<T>],
    val_set: Option<&ExperimentDataset<T>>,
    val_source: &ValSource,
    stats: &NormStats<T>,
    params: &ModelParams<T>,
    config: &TrainConfig<T>,
    step: u64,
) -> Result<f64, CoreError> {
    // Deterministic per-step validation draw, independent of the train RNG.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x5eed_0000 + step));
    let (ds, layer) = match (val_set, val_source) {
        (Some(v), _) => (v, rng.gen_range(0..v.layers)),
        (None, ValSource::HeldOutLayer(held)) => (train_sets[0], *held),
        (None, ValSource::Experiment) => unreachable!(),
    };
    let len = ds.augmented.as_ref().ok_or(CoreError::EmptyDataset)?[layer].len();
    let k = rng.gen_range(0..len);
    let sample = prepare_sample(ds, layer, k, stats, config, None)?;
    let mut tape = Tape::new();
    let vars = record_params(&mut tape, params);
    let loss = sample_loss(&mut tape, &vars, params, &sample, config)?;
    Ok(tape.values(loss)?[0].to_f64().unwrap())
}
