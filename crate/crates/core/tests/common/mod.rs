//! Shared fixtures for the core test suites.
#![allow(dead_code)]

use spraygnn_core::dataset::ExperimentDataset;
use spraygnn_core::geometry::{Trajectory, TrajectoryStep, Vec3, WallGrid};
use spraygnn_core::graph::NormStats;
use spraygnn_core::model::ModelConfig;

pub fn grid(nx: usize, ny: usize, spacing: f64) -> WallGrid<f64> {
    WallGrid::new(nx, ny, spacing, Vec3::zero())
}

/// Gun pointing straight down at (x, y) from height `d`, moving in +x.
pub fn step_at(t: usize, x: f64, y: f64, d: f64, speed: f64) -> TrajectoryStep<f64> {
    TrajectoryStep {
        t,
        tp: Vec3::new(x, y, d),
        velocity: Vec3::new(speed, 0.0, 0.0),
        direction: Vec3::new(0.0, 0.0, -1.0),
        pressure: 2.0,
    }
}

/// Straight horizontal sweep across the wall at constant height.
pub fn sweep(steps: usize, x0: f64, x1: f64, y: f64, d: f64, speed: f64) -> Trajectory<f64> {
    let list = (0..steps)
        .map(|k| {
            let alpha = if steps > 1 { k as f64 / (steps - 1) as f64 } else { 0.0 };
            step_at(k, x0 + alpha * (x1 - x0), y, d, speed)
        })
        .collect();
    Trajectory::new(list).unwrap()
}

/// Identity-scale stats so feature values equal raw inputs.
pub fn unit_stats() -> NormStats<f64> {
    NormStats {
        center: Vec3::zero(),
        length_scale: 1.0,
        pressure_ref: 2.0,
        delta_scale: [1.0, 1.0, 1.0],
    }
}

/// Small but structurally complete experiment: sweeps over a coarse grid,
/// boundary states growing linearly per layer under the swept band.
pub fn tiny_experiment(layers: usize, steps: usize) -> ExperimentDataset<f64> {
    let g = grid(6, 5, 25.0);
    let n = g.particle_count();
    let trajectory = sweep(steps, 0.0, 125.0, 50.0, 100.0, 0.5);
    // Per-layer increment: a band across the middle rows.
    let mut increment = vec![0.0; n];
    for i in 0..n {
        let (_, y) = g.particle_xy(i);
        if (y - 50.0).abs() < 40.0 {
            increment[i] = 0.5;
        }
    }
    let mut boundaries = vec![vec![0.0; n]];
    for l in 0..layers {
        let prev = &boundaries[l];
        boundaries.push(prev.iter().zip(&increment).map(|(a, b)| a + b).collect());
    }
    let scans = (0..=layers)
        .map(|b| spraygnn_core::dataset::LayerScan {
            layer: b,
            offsets: boundaries[b].clone(),
            captured_before_layer: true,
        })
        .collect();
    let mut ds = ExperimentDataset {
        grid: g,
        layers,
        trajectories: vec![trajectory; layers],
        scans,
        boundaries: None,
        augmented: None,
    };
    ds.augment().unwrap();
    ds
}

/// Reduced network for fast tests.
pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        latent: 8,
        encoder_hidden_layers: 2,
        processor_blocks: 2,
        processor_width: 8,
        processor_hidden_layers: 2,
        decoder_hidden_layers: 2,
        node_in: spraygnn_core::graph::NODE_FEATURES,
        edge_in: spraygnn_core::graph::EDGE_FEATURES,
        out: 3,
    }
}
