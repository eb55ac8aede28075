//! Per-step graph construction: one node per wall particle plus one
//! end-effector node, with 27 node features and 4 edge features.
//!
//! Node feature layout (index ranges):
//!
//! | slots  | content                                                   |
//! |--------|-----------------------------------------------------------|
//! | 0..3   | position, normalized mm                                   |
//! | 3..18  | 5 stacked effector velocities, m/s (zeros on wall nodes)  |
//! | 18..21 | printing direction (zeros on wall nodes)                  |
//! | 21..23 | type one-hot: wall = (1,0), effector = (0,1)              |
//! | 23     | pressure / reference pressure (0 on wall nodes)           |
//! | 24     | effector-to-wall distance, normalized (0 on wall nodes)   |
//! | 25     | layer progress l/L                                        |
//! | 26     | speed, m/s (0 on wall nodes)                              |
//!
//! Wall↔wall connectivity is symmetric within a fixed radius; the effector
//! connects one-way into every particle inside its spray cone. Edge features
//! are the receiver-minus-sender displacement of the current (deformed)
//! positions plus its Euclidean norm, all normalized.

use spraygnn_autodiff::Tensor;

use crate::geometry::{
    points_in_disc, project_to_wall, radius_neighbors_points, TrajectoryStep, Vec3, WallGrid,
};
use crate::{CoreError, Scalar};

pub const NODE_FEATURES: usize = 27;
pub const EDGE_FEATURES: usize = 4;
/// Number of stacked past effector velocities in the node features.
pub const VELOCITY_HISTORY: usize = 5;

/// Normalization statistics, frozen at training time and stored in the
/// checkpoint sidecar so inference stays deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats<T> {
    /// Reference point subtracted from positions (mm).
    pub center: Vec3<T>,
    /// Scale for positions and distances (mm).
    pub length_scale: T,
    /// Scale for pressure (bar).
    pub pressure_ref: T,
    /// Per-component scale for position-change targets (mm).
    pub delta_scale: [T; 3],
}

impl<T: Scalar> NormStats<T> {
    /// Normalize a raw position-change vector into target units.
    pub fn normalize_delta(&self, d: Vec3<T>) -> [T; 3] {
        [d.x / self.delta_scale[0], d.y / self.delta_scale[1], d.z / self.delta_scale[2]]
    }

    /// Map a model output row back to a mm-valued change.
    pub fn denormalize_delta(&self, d: &[T]) -> Vec3<T> {
        Vec3::new(
            d[0] * self.delta_scale[0],
            d[1] * self.delta_scale[1],
            d[2] * self.delta_scale[2],
        )
    }
}

/// Connectivity settings: wall↔wall radius (mm) and the effector cone factor
/// (base radius = factor · gun-to-wall distance).
#[derive(Debug, Clone, Copy)]
pub struct GraphConfig<T> {
    pub r_wall: T,
    pub cone_factor: T,
}

impl<T: Scalar> Default for GraphConfig<T> {
    fn default() -> Self {
        GraphConfig {
            r_wall: T::from_f64(30.0).unwrap(),
            cone_factor: T::from_f64(0.4).unwrap(),
        }
    }
}

/// One trajectory step's graph: features plus directed connectivity.
#[derive(Debug, Clone)]
pub struct SprayGraph<T> {
    /// `(N+1) × 27`; the effector is the last row.
    pub node_features: Tensor<T>,
    /// `E × 4`.
    pub edge_features: Tensor<T>,
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    pub effector_index: usize,
}

impl<T> SprayGraph<T> {
    pub fn node_count(&self) -> usize {
        self.effector_index + 1
    }

    pub fn edge_count(&self) -> usize {
        self.senders.len()
    }
}

/// Current 3D positions of all wall particles for a given offset state.
pub fn world_positions<T: Scalar>(grid: &WallGrid<T>, offsets: &[T]) -> Vec<Vec3<T>> {
    (0..grid.particle_count())
        .map(|i| {
            let (x, y) = grid.particle_xy(i);
            grid.origin
                .add(grid.basis.u.scale(x))
                .add(grid.basis.v.scale(y))
                .add(grid.basis.normal.scale(offsets[i]))
        })
        .collect()
}

/// Assemble the graph for one trajectory step.
///
/// `positions` are the wall particles' current (possibly noise-perturbed)
/// 3D positions; `velocity_history` holds up to 5 effector velocities, most
/// recent first. Construction is pure and bit-reproducible: wall↔wall edges
/// come out sorted by (sender, receiver), effector→wall edges follow sorted
/// by receiver.
pub fn build_graph<T: Scalar>(
    grid: &WallGrid<T>,
    positions: &[Vec3<T>],
    step: &TrajectoryStep<T>,
    velocity_history: &[Vec3<T>],
    layer_index: usize,
    layer_count: usize,
    stats: &NormStats<T>,
    config: &GraphConfig<T>,
) -> Result<SprayGraph<T>, CoreError> {
    let n = grid.particle_count();
    if positions.len() != n {
        return Err(CoreError::GridMismatch { expected: n, found: positions.len() });
    }
    let effector_index = n;

    let node_features = build_node_features(
        positions,
        step,
        velocity_history,
        layer_index,
        layer_count,
        stats,
        grid,
    );
    let (senders, receivers, edge_features) =
        build_edges(grid, positions, step, config.r_wall, config.cone_factor, stats)?;

    Ok(SprayGraph {
        node_features,
        edge_features,
        senders,
        receivers,
        effector_index,
    })
}

/// Node feature matrix `(N+1) × 27`; layout documented at module level.
pub fn build_node_features<T: Scalar>(
    positions: &[Vec3<T>],
    step: &TrajectoryStep<T>,
    velocity_history: &[Vec3<T>],
    layer_index: usize,
    layer_count: usize,
    stats: &NormStats<T>,
    grid: &WallGrid<T>,
) -> Tensor<T> {
    let n = positions.len();
    let progress = T::from_usize(layer_index).unwrap() / T::from_usize(layer_count.max(1)).unwrap();
    let mut values = vec![T::zero(); (n + 1) * NODE_FEATURES];

    for (i, p) in positions.iter().enumerate() {
        let row = &mut values[i * NODE_FEATURES..(i + 1) * NODE_FEATURES];
        let q = p.sub(stats.center);
        row[0] = q.x / stats.length_scale;
        row[1] = q.y / stats.length_scale;
        row[2] = q.z / stats.length_scale;
        row[21] = T::one(); // wall type
        row[25] = progress;
    }

    let row = &mut values[n * NODE_FEATURES..];
    let q = step.tp.sub(stats.center);
    row[0] = q.x / stats.length_scale;
    row[1] = q.y / stats.length_scale;
    row[2] = q.z / stats.length_scale;
    for (slot, v) in velocity_history.iter().take(VELOCITY_HISTORY).enumerate() {
        row[3 + slot * 3] = v.x;
        row[4 + slot * 3] = v.y;
        row[5 + slot * 3] = v.z;
    }
    row[18] = step.direction.x;
    row[19] = step.direction.y;
    row[20] = step.direction.z;
    row[22] = T::one(); // effector type
    row[23] = step.pressure / stats.pressure_ref;
    row[24] = grid.plane_distance(step.tp).abs() / stats.length_scale;
    row[25] = progress;
    row[26] = step.speed();

    Tensor::from_vec(&[n + 1, NODE_FEATURES], values).expect("node feature layout")
}

/// Connectivity and edge features for one step.
///
/// Returns `(senders, receivers, features)` with wall↔wall pairs first
/// (both directions, in-plane distance < `r_wall`), then one-way
/// effector→wall edges for particles inside the spray cone of radius
/// `cone_factor · d`.
pub fn build_edges<T: Scalar>(
    grid: &WallGrid<T>,
    positions: &[Vec3<T>],
    step: &TrajectoryStep<T>,
    r_wall: T,
    cone_factor: T,
    stats: &NormStats<T>,
) -> Result<(Vec<usize>, Vec<usize>, Tensor<T>), CoreError> {
    let n = positions.len();
    let effector = n;
    let in_plane: Vec<(T, T)> = positions.iter().map(|&p| grid.in_plane(p)).collect();

    let wall_pairs = radius_neighbors_points(&in_plane, r_wall);

    let base_center = project_to_wall(step.tp, step.direction, grid)?;
    let d = grid.plane_distance(step.tp).abs();
    let cone_members = points_in_disc(&in_plane, grid.in_plane(base_center), cone_factor * d);

    let edge_count = wall_pairs.len() + cone_members.len();
    let mut senders = Vec::with_capacity(edge_count);
    let mut receivers = Vec::with_capacity(edge_count);
    let mut features = Vec::with_capacity(edge_count * EDGE_FEATURES);

    let mut push_edge = |from: Vec3<T>, to: Vec3<T>| {
        let r = to.sub(from);
        features.push(r.x / stats.length_scale);
        features.push(r.y / stats.length_scale);
        features.push(r.z / stats.length_scale);
        features.push(r.norm() / stats.length_scale);
    };

    for &(i, j) in &wall_pairs {
        senders.push(i);
        receivers.push(j);
        push_edge(positions[i], positions[j]);
    }
    for &j in &cone_members {
        senders.push(effector);
        receivers.push(j);
        push_edge(step.tp, positions[j]);
    }

    let features = Tensor::from_vec(&[edge_count, EDGE_FEATURES], features)?;
    Ok((senders, receivers, features))
}

/// Normalization statistics over one or more augmented experiments.
///
/// Positions are scaled by the RMS spread of lattice and trajectory
/// coordinates around the lattice centroid; targets by the standard
/// deviation of the out-of-plane per-step changes (reused for the in-plane
/// components, which are zero in the data).
pub fn compute_stats<T: Scalar>(
    datasets: &[&crate::dataset::ExperimentDataset<T>],
) -> Result<NormStats<T>, CoreError> {
    if datasets.is_empty() {
        return Err(CoreError::EmptyDataset);
    }

    // Centroid of all lattice positions.
    let mut cx = T::zero();
    let mut cy = T::zero();
    let mut count = 0usize;
    for ds in datasets {
        for i in 0..ds.particle_count() {
            let (x, y) = ds.grid.particle_xy(i);
            cx += x;
            cy += y;
            count += 1;
        }
    }
    let countf = T::from_usize(count).unwrap();
    let center = Vec3::new(cx / countf, cy / countf, T::zero());

    // RMS spread of lattice and gun positions around the centroid.
    let mut sq = T::zero();
    let mut sq_count = 0usize;
    for ds in datasets {
        for i in 0..ds.particle_count() {
            let (x, y) = ds.grid.particle_xy(i);
            let dx = x - center.x;
            let dy = y - center.y;
            sq += dx * dx + dy * dy;
            sq_count += 2;
        }
        for trajectory in &ds.trajectories {
            for step in &trajectory.steps {
                let q = step.tp.sub(center);
                sq += q.norm_squared();
                sq_count += 3;
            }
        }
    }
    let length_scale = (sq / T::from_usize(sq_count.max(1)).unwrap()).sqrt().max(T::one());

    // Std of per-step out-of-plane changes over the augmented sequences.
    let mut sum = T::zero();
    let mut sum_sq = T::zero();
    let mut n_delta = 0usize;
    for ds in datasets {
        let augmented = ds
            .augmented
            .as_ref()
            .ok_or_else(|| CoreError::Format("stats need augmented snapshots".into()))?;
        for layer in augmented {
            for pair in layer.windows(2) {
                for (&next, &prev) in pair[1].iter().zip(&pair[0]) {
                    let d = next - prev;
                    sum += d;
                    sum_sq += d * d;
                    n_delta += 1;
                }
            }
        }
    }
    if n_delta == 0 {
        return Err(CoreError::EmptyDataset);
    }
    let nf = T::from_usize(n_delta).unwrap();
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(T::zero());
    let dz = var.sqrt().max(T::from_f64(1e-9).unwrap());

    let pressure_ref = datasets[0]
        .trajectories
        .first()
        .and_then(|t| t.steps.first())
        .map(|s| s.pressure)
        .unwrap_or_else(T::one)
        .max(T::from_f64(1e-9).unwrap());

    Ok(NormStats {
        center,
        length_scale,
        pressure_ref,
        delta_scale: [dz, dz, dz],
    })
}
