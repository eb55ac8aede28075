//! Recursive multi-step prediction and evaluation metrics.
//!
//! A rollout starts from a ground-truth layer boundary and feeds every
//! prediction back as the next input, one model evaluation per trajectory
//! step. Thickness can only be measured at layer boundaries, so metrics
//! compare the rolled state against the true boundary at the horizon:
//! Hausdorff and Chamfer distances on the 3D clouds, mean squared error and
//! maximum absolute error on the out-of-plane offsets (the in-plane lattice
//! is shared by construction).

use spraygnn_autodiff::Tape;

use crate::dataset::ExperimentDataset;
use crate::graph::{build_graph, world_positions, GraphConfig, NormStats};
use crate::model::{forward, record_params, ModelParams};
use crate::oracle::{baseline_predict_layer, BaselineModel};
use crate::training::{hausdorff, nearest_indices, velocity_history};
use crate::{CoreError, Scalar};

/// Result of one recursive rollout.
#[derive(Debug, Clone)]
pub struct RolloutResult<T> {
    pub start_layer: usize,
    pub layers_ahead: usize,
    /// Model evaluations performed: Σ rolled layers' trajectory lengths.
    pub steps_executed: usize,
    /// Wall state after each completed layer.
    pub per_layer_offsets: Vec<Vec<T>>,
    pub final_offsets: Vec<T>,
}

/// Error metrics at one horizon. `mae` is the *maximum* absolute error.
#[derive(Debug, Clone, Copy)]
pub struct MetricsReport {
    pub horizon: usize,
    pub steps: usize,
    pub hd_mm: f64,
    pub cd_mm2: f64,
    pub mse_mm2: f64,
    pub mae_mm: f64,
}

/// Roll the model over `layers_ahead` layers starting from the true state at
/// the end of layer `start_layer − 1` (boundary `start_layer`).
///
/// Every trajectory step triggers one model evaluation; the out-of-plane
/// component of the predicted change updates the state (floored at zero);
/// predictions are fed back, never ground truth. The velocity history is
/// rebuilt per layer from the trajectory itself.
pub fn rollout<T: Scalar>(
    params: &ModelParams<T>,
    stats: &NormStats<T>,
    dataset: &ExperimentDataset<T>,
    start_layer: usize,
    layers_ahead: usize,
    graph_config: &GraphConfig<T>,
) -> Result<RolloutResult<T>, CoreError> {
    if layers_ahead == 0 || start_layer + layers_ahead > dataset.layers {
        return Err(CoreError::HorizonExceedsLayers {
            start: start_layer,
            ahead: layers_ahead,
            layers: dataset.layers,
        });
    }
    let mut state = dataset.boundary(start_layer)?.to_vec();
    let mut per_layer = Vec::with_capacity(layers_ahead);
    let mut steps_executed = 0usize;

    for layer in start_layer..start_layer + layers_ahead {
        let trajectory = &dataset.trajectories[layer];
        for k in 0..trajectory.len() {
            let positions = world_positions(&dataset.grid, &state);
            let history = velocity_history(trajectory, k);
            let graph = build_graph(
                &dataset.grid,
                &positions,
                &trajectory.steps[k],
                &history,
                layer,
                dataset.layers,
                stats,
                graph_config,
            )?;
            let mut tape = Tape::new();
            let vars = record_params(&mut tape, params);
            let out = forward(&mut tape, &vars, params, &graph)?;
            let values = tape.values(out)?;
            for (i, s) in state.iter_mut().enumerate() {
                let dz = values[i * 3 + 2] * stats.delta_scale[2];
                *s = (*s + dz).max(T::zero());
            }
            steps_executed += 1;
        }
        per_layer.push(state.clone());
    }

    Ok(RolloutResult {
        start_layer,
        layers_ahead,
        steps_executed,
        per_layer_offsets: per_layer,
        final_offsets: state,
    })
}

/// Symmetric Chamfer distance: mean squared nearest-neighbor distance from
/// `x` into `y` plus the reverse.
pub fn chamfer<T: Scalar>(x: &[T], y: &[T]) -> Result<T, CoreError> {
    if x.is_empty() || y.is_empty() {
        return Err(CoreError::EmptyCloud);
    }
    Ok(chamfer_directed(x, y) + chamfer_directed(y, x))
}

fn chamfer_directed<T: Scalar>(from: &[T], to: &[T]) -> T {
    let nn = nearest_indices(from, to);
    let n = from.len() / 3;
    let mut acc = T::zero();
    for (i, &j) in nn.iter().enumerate() {
        let dx = from[i * 3] - to[j * 3];
        let dy = from[i * 3 + 1] - to[j * 3 + 1];
        let dz = from[i * 3 + 2] - to[j * 3 + 2];
        acc += dx * dx + dy * dy + dz * dz;
    }
    acc / T::from_usize(n).unwrap()
}

/// Compare predicted offsets against truth on one grid.
pub fn evaluate<T: Scalar>(
    grid: &crate::geometry::WallGrid<T>,
    predicted: &[T],
    truth: &[T],
    horizon: usize,
    steps: usize,
) -> Result<MetricsReport, CoreError> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return Err(CoreError::GridMismatch { expected: truth.len(), found: predicted.len() });
    }
    let pred_cloud = flat_cloud(grid, predicted);
    let true_cloud = flat_cloud(grid, truth);
    let hd = hausdorff(&true_cloud, &pred_cloud)?.to_f64().unwrap();
    let cd = chamfer(&true_cloud, &pred_cloud)?.to_f64().unwrap();

    let mut sq_sum = 0.0f64;
    let mut max_abs = 0.0f64;
    for (&p, &t) in predicted.iter().zip(truth) {
        let e = (p - t).to_f64().unwrap();
        sq_sum += e * e;
        max_abs = max_abs.max(e.abs());
    }
    Ok(MetricsReport {
        horizon,
        steps,
        hd_mm: hd,
        cd_mm2: cd,
        mse_mm2: sq_sum / predicted.len() as f64,
        mae_mm: max_abs,
    })
}

fn flat_cloud<T: Scalar>(grid: &crate::geometry::WallGrid<T>, offsets: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(offsets.len() * 3);
    for p in world_positions(grid, offsets) {
        out.extend_from_slice(&p.to_array());
    }
    out
}

/// One row of the metrics table.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub model: String,
    pub metrics: MetricsReport,
}

/// Fitted growth descriptors per metric: the recursive model's slope of
/// log(error) against log(steps), and the layer-wise baseline's slope of
/// log(error) against steps.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub metric: &'static str,
    pub gnn_loglog_slope: f64,
    pub baseline_log_slope: f64,
}

/// Full error-scaling comparison output.
#[derive(Debug, Clone)]
pub struct ScalingTable {
    pub rows: Vec<MetricsRow>,
    pub fits: Vec<ScalingFit>,
}

/// Compare error growth of the recursive network against the layer-wise
/// baseline at several horizons, all rolled from layer 0.
pub fn scaling_analysis<T: Scalar>(
    params: &ModelParams<T>,
    stats: &NormStats<T>,
    baseline: &BaselineModel<T>,
    dataset: &ExperimentDataset<T>,
    horizons: &[usize],
    graph_config: &GraphConfig<T>,
) -> Result<ScalingTable, CoreError> {
    let mut rows = Vec::new();

    for &h in horizons {
        let truth = dataset.boundary(h)?.to_vec();

        let result = rollout(params, stats, dataset, 0, h, graph_config)?;
        let report = evaluate(&dataset.grid, &result.final_offsets, &truth, h, result.steps_executed)?;
        rows.push(MetricsRow { model: "gnn".into(), metrics: report });

        let mut state = dataset.boundary(0)?.to_vec();
        for layer in 0..h {
            state = baseline_predict_layer(
                baseline,
                &dataset.grid,
                &dataset.trajectories[layer],
                &state,
                layer,
            );
        }
        let report = evaluate(&dataset.grid, &state, &truth, h, h)?;
        rows.push(MetricsRow { model: "baseline".into(), metrics: report });
    }

    let fits = ["hd_mm", "cd_mm2", "mse_mm2", "mae_mm"]
        .iter()
        .map(|&metric| {
            let series = |model: &str| -> Vec<(f64, f64)> {
                rows.iter()
                    .filter(|r| r.model == model)
                    .map(|r| (r.metrics.steps as f64, metric_value(&r.metrics, metric)))
                    .collect()
            };
            let gnn: Vec<(f64, f64)> =
                series("gnn").into_iter().map(|(s, e)| (s.ln(), e.max(1e-300).ln())).collect();
            let baseline: Vec<(f64, f64)> =
                series("baseline").into_iter().map(|(s, e)| (s, e.max(1e-300).ln())).collect();
            ScalingFit {
                metric,
                gnn_loglog_slope: least_squares_slope(&gnn),
                baseline_log_slope: least_squares_slope(&baseline),
            }
        })
        .collect();

    Ok(ScalingTable { rows, fits })
}

pub fn metric_value(report: &MetricsReport, metric: &str) -> f64 {
    match metric {
        "hd_mm" => report.hd_mm,
        "cd_mm2" => report.cd_mm2,
        "mse_mm2" => report.mse_mm2,
        "mae_mm" => report.mae_mm,
        _ => f64::NAN,
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for &(x, y) in points {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var > 0.0 {
        cov / var
    } else {
        0.0
    }
}

/// Rollout where every prediction is zero: the state never changes. Used as
/// the floor any learned model must beat.
pub fn zero_predictor_metrics<T: Scalar>(
    dataset: &ExperimentDataset<T>,
    start_layer: usize,
    layers_ahead: usize,
) -> Result<MetricsReport, CoreError> {
    let start = dataset.boundary(start_layer)?.to_vec();
    let truth = dataset.boundary(start_layer + layers_ahead)?.to_vec();
    let steps: usize =
        (start_layer..start_layer + layers_ahead).map(|l| dataset.trajectories[l].len()).sum();
    evaluate(&dataset.grid, &start, &truth, layers_ahead, steps)
}

