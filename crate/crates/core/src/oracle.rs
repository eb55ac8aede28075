//! Deterministic synthetic deposition oracle and the layer-wise regression
//! benchmark.
//!
//! The oracle stands in for lab data: per trajectory step it deposits a
//! Gaussian disc of material under the spray cone, with rate proportional to
//! pressure and dwell time inversely proportional to gun speed. The form is
//! exactly integrable, which keeps test oracles closed-form. It makes no
//! claim of fidelity to real plaster.
//!
//! The benchmark model predicts a whole layer at once from four features:
//! in-plane distance to the printing path, gun-to-surface distance, mean
//! speed, and the layer number.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::dataset::{ExperimentDataset, LayerScan};
use crate::geometry::{project_to_wall, SprayCone, Trajectory, TrajectoryStep, Vec3, WallGrid};
use crate::{CoreError, Scalar};

/// Parameters of the analytic deposition model.
#[derive(Debug, Clone, Copy)]
pub struct OracleParams<T> {
    /// Deposition rate at reference pressure, mm/s at the cone center.
    pub deposition_rate: T,
    /// Reference pressure, bar.
    pub pressure_ref: T,
    /// Cone base radius as a fraction of the gun-to-wall distance.
    pub radius_factor: T,
    /// Gaussian profile width as a fraction of the base radius.
    pub profile_sigma_factor: T,
}

impl<T: Scalar> Default for OracleParams<T> {
    fn default() -> Self {
        OracleParams {
            deposition_rate: T::from_f64(2.0).unwrap(),
            pressure_ref: T::from_f64(2.0).unwrap(),
            radius_factor: T::from_f64(0.5).unwrap(),
            profile_sigma_factor: T::from_f64(0.5).unwrap(),
        }
    }
}

/// Advance the wall by one trajectory step.
///
/// Particles with in-plane distance ρ < base radius to the cone center gain
/// `rate·(P/P_ref)·exp(−ρ²/(2σ²))·Δt`, where Δt is the transit time from
/// `step` to `next_step` at the step's speed; everyone else is untouched.
pub fn oracle_step<T: Scalar>(
    grid: &WallGrid<T>,
    offsets: &[T],
    step: &TrajectoryStep<T>,
    next_step: &TrajectoryStep<T>,
    params: &OracleParams<T>,
) -> Result<Vec<T>, CoreError> {
    let speed = step.speed();
    if speed <= T::zero() {
        return Err(CoreError::ZeroVelocity);
    }
    let cone = SprayCone::from_step(step, grid, params.radius_factor)?;
    let sigma = params.profile_sigma_factor * cone.base_radius;
    let travel_mm = next_step.tp.sub(step.tp).norm();
    let dt = travel_mm / (T::from_f64(1000.0).unwrap() * speed);
    let scale = params.deposition_rate * (step.pressure / params.pressure_ref) * dt;

    let mut out = offsets.to_vec();
    if scale == T::zero() || cone.base_radius <= T::zero() {
        return Ok(out);
    }
    let (cx, cy) = grid.in_plane(cone.base_center);
    let two = T::from_f64(2.0).unwrap();
    for i in crate::geometry::particles_in_cone(&cone, grid) {
        let (x, y) = grid.particle_xy(i);
        let dx = x - cx;
        let dy = y - cy;
        let rho2 = dx * dx + dy * dy;
        out[i] += scale * (-rho2 / (two * sigma * sigma)).exp();
    }
    Ok(out)
}

/// Named experiment shapes with their generation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    S,
    Thunder,
    Wave,
    U,
}

impl ShapeKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Some(ShapeKind::S),
            "thunder" => Some(ShapeKind::Thunder),
            "wave" => Some(ShapeKind::Wave),
            "u" => Some(ShapeKind::U),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::S => "s",
            ShapeKind::Thunder => "thunder",
            ShapeKind::Wave => "wave",
            ShapeKind::U => "u",
        }
    }

    /// Scale targets: printing area m², particles, layers, steps per layer,
    /// and the speed distribution (mean, std, min, max in m/s).
    fn spec(&self) -> ShapeSpec {
        match self {
            ShapeKind::S => ShapeSpec {
                area_m2: 1.34,
                particles: 2395,
                layers: 12,
                steps: 278,
                v_mean: 0.619,
                v_std: 0.235,
                v_min: 0.10,
                v_max: 1.00,
            },
            ShapeKind::Thunder => ShapeSpec {
                area_m2: 2.43,
                particles: 4290,
                layers: 12,
                steps: 214,
                v_mean: 0.638,
                v_std: 0.272,
                v_min: 0.10,
                v_max: 1.00,
            },
            ShapeKind::Wave => ShapeSpec {
                area_m2: 2.45,
                particles: 4364,
                layers: 12,
                steps: 529,
                v_mean: 0.668,
                v_std: 0.281,
                v_min: 0.10,
                v_max: 1.00,
            },
            ShapeKind::U => ShapeSpec {
                area_m2: 1.68,
                particles: 3004,
                layers: 12,
                steps: 445,
                v_mean: 0.595,
                v_std: 0.158,
                v_min: 0.326,
                v_max: 0.983,
            },
        }
    }

    pub fn layers(&self) -> usize {
        self.spec().layers
    }

    pub fn steps_per_layer(&self) -> usize {
        self.spec().steps
    }
}

struct ShapeSpec {
    area_m2: f64,
    particles: usize,
    layers: usize,
    steps: usize,
    v_mean: f64,
    v_std: f64,
    v_min: f64,
    v_max: f64,
}

/// Knobs for dataset generation beyond the oracle physics.
#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub shape: ShapeKind,
    pub seed: u64,
    /// Nominal gun-to-wall distance, mm.
    pub base_distance_mm: f64,
    /// Working pressure, bar.
    pub pressure_bar: f64,
    /// Emit a boundary scan every this many layers (1 = all boundaries).
    pub scan_stride: usize,
    /// Override the per-shape layer count (used by small structural tests).
    pub layers_override: Option<usize>,
    /// Override the per-shape step count.
    pub steps_override: Option<usize>,
    /// Override the grid resolution as (nx, ny).
    pub grid_override: Option<(usize, usize)>,
}

impl GenerationConfig {
    pub fn new(shape: ShapeKind, seed: u64) -> Self {
        GenerationConfig {
            shape,
            seed,
            base_distance_mm: 400.0,
            pressure_bar: 2.0,
            scan_stride: 1,
            layers_override: None,
            steps_override: None,
            grid_override: None,
        }
    }
}

/// Generate a full synthetic experiment: grid, per-layer trajectories, and
/// ground-truth boundary scans produced by stepping the oracle.
///
/// Identical seeds and parameters give bit-identical datasets.
pub fn generate_experiment<T: Scalar>(
    config: &GenerationConfig,
    params: &OracleParams<T>,
) -> Result<ExperimentDataset<T>, CoreError> {
    let spec = config.shape.spec();
    let layers = config.layers_override.unwrap_or(spec.layers);
    let steps = config.steps_override.unwrap_or(spec.steps);
    let (nx, ny) = config.grid_override.unwrap_or_else(|| {
        let nx = (spec.particles as f64).sqrt().round() as usize;
        let ny = ((spec.particles as f64) / nx as f64).round() as usize;
        (nx, ny)
    });
    let area_mm2 = spec.area_m2 * 1.0e6;
    let spacing = (area_mm2 / (nx * ny) as f64).sqrt();
    let grid = WallGrid::new(nx, ny, T::from_f64(spacing).unwrap(), Vec3::zero());
    let width = spacing * nx as f64;
    let height = spacing * ny as f64;

    let waypoints = shape_waypoints(config.shape, width, height);
    let path = resample_polyline(&waypoints, steps);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let speed_dist = beta_speed(&spec);

    let mut trajectories = Vec::with_capacity(layers);
    for layer in 0..layers {
        let mut steps_out = Vec::with_capacity(steps);
        for (k, &(wx, wy)) in path.iter().enumerate() {
            let speed = sample_speed(&speed_dist, &spec, &mut rng);
            // Smooth wobble in stand-off distance and a slight spray tilt.
            let phase = 2.0 * std::f64::consts::PI * (k as f64 / steps as f64);
            let d = config.base_distance_mm * (1.0 + 0.06 * (2.0 * phase + layer as f64).sin());
            let tilt_x = 0.05 * (3.0 * phase).sin();
            let tilt_y = 0.05 * (2.0 * phase).cos();
            let n = Vec3::new(tilt_x, tilt_y, -1.0).normalized();
            // Gun placed so its spray ray hits the path point exactly.
            let s = d / -n.z;
            let w = Vec3::new(wx, wy, 0.0);
            let tp = w.sub(n.scale(s));
            let tangent = path_tangent(&path, k);
            let velocity = Vec3::new(tangent.0 * speed, tangent.1 * speed, 0.0);
            steps_out.push(TrajectoryStep {
                t: k,
                tp: cast_vec3(tp),
                velocity: cast_vec3(velocity),
                direction: cast_vec3(n),
                pressure: T::from_f64(config.pressure_bar).unwrap(),
            });
        }
        trajectories.push(Trajectory::new(steps_out)?);
    }

    // Step the oracle through every layer to get true boundary states.
    let n_particles = grid.particle_count();
    let mut state = vec![T::zero(); n_particles];
    let mut boundaries = Vec::with_capacity(layers + 1);
    boundaries.push(state.clone());
    for trajectory in &trajectories {
        for k in 0..trajectory.len().saturating_sub(1) {
            state = oracle_step(&grid, &state, &trajectory.steps[k], &trajectory.steps[k + 1], params)?;
        }
        boundaries.push(state.clone());
    }

    let mut scans = Vec::new();
    for b in (0..=layers).step_by(config.scan_stride.max(1)) {
        scans.push(LayerScan {
            layer: b,
            offsets: boundaries[b].clone(),
            captured_before_layer: true,
        });
    }
    if scans.last().map(|s| s.boundary()) != Some(layers) {
        scans.push(LayerScan {
            layer: layers,
            offsets: boundaries[layers].clone(),
            captured_before_layer: true,
        });
    }

    Ok(ExperimentDataset {
        grid,
        layers,
        trajectories,
        scans,
        boundaries: Some(boundaries),
        augmented: None,
    })
}

fn cast_vec3<T: Scalar>(v: Vec3<f64>) -> Vec3<T> {
    Vec3::new(
        T::from_f64(v.x).unwrap(),
        T::from_f64(v.y).unwrap(),
        T::from_f64(v.z).unwrap(),
    )
}

fn beta_speed(spec: &ShapeSpec) -> Option<Beta<f64>> {
    let span = spec.v_max - spec.v_min;
    let m = (spec.v_mean - spec.v_min) / span;
    let s = spec.v_std / span;
    let k = m * (1.0 - m) / (s * s) - 1.0;
    if k <= 0.0 {
        return None;
    }
    Beta::new(m * k, (1.0 - m) * k).ok()
}

fn sample_speed(dist: &Option<Beta<f64>>, spec: &ShapeSpec, rng: &mut ChaCha8Rng) -> f64 {
    let unit = match dist {
        Some(beta) => beta.sample(rng),
        None => rng.gen_range(0.0..1.0),
    };
    spec.v_min + unit * (spec.v_max - spec.v_min)
}

/// In-plane waypoints of one layer's painting path. The spine follows the
/// named shape and is swept over several parallel passes; fidelity is
/// cosmetic, only the scale numbers are contractual.
fn shape_waypoints(shape: ShapeKind, width: f64, height: f64) -> Vec<(f64, f64)> {
    let m = 0.12 * width.min(height);
    let passes = 4;
    let gap = (width - 2.0 * m) / (passes as f64 * 2.2);
    let spine: Vec<(f64, f64)> = match shape {
        ShapeKind::S => (0..=40)
            .map(|i| {
                let t = i as f64 / 40.0;
                let y = m + t * (height - 2.0 * m);
                let x =
                    width / 2.0 + 0.30 * (width - 2.0 * m) * (2.0 * std::f64::consts::PI * t).sin();
                (x, y)
            })
            .collect(),
        ShapeKind::Thunder => vec![
            (0.62 * width, m),
            (0.38 * width, 0.42 * height),
            (0.58 * width, 0.55 * height),
            (0.36 * width, height - m),
        ],
        ShapeKind::Wave => (0..=40)
            .map(|i| {
                let t = i as f64 / 40.0;
                let y = m + t * (height - 2.0 * m);
                let x =
                    width / 2.0 + 0.32 * (width - 2.0 * m) * (4.0 * std::f64::consts::PI * t).sin();
                (x, y)
            })
            .collect(),
        ShapeKind::U => {
            let mut points = Vec::new();
            for i in 0..=12 {
                let t = i as f64 / 12.0;
                points.push((0.30 * width, height - m - t * (0.9 * height - 2.0 * m)));
            }
            for i in 1..=8 {
                let t = i as f64 / 8.0;
                let angle = std::f64::consts::PI * (1.0 + t);
                points.push((
                    width / 2.0 + 0.20 * width * angle.cos(),
                    m + 0.1 * height + 0.1 * height * (1.0 + angle.sin()),
                ));
            }
            for i in 1..=12 {
                let t = i as f64 / 12.0;
                points.push((0.70 * width, m + 0.1 * height + t * (0.9 * height - 2.0 * m)));
            }
            points
        }
    };

    // Sweep the spine across parallel passes, serpentine between them.
    let mut path = Vec::new();
    for p in 0..passes {
        let offset = (p as f64 - (passes as f64 - 1.0) / 2.0) * gap;
        if p % 2 == 0 {
            path.extend(spine.iter().map(|&(x, y)| (x + offset, y)));
        } else {
            path.extend(spine.iter().rev().map(|&(x, y)| (x + offset, y)));
        }
    }
    path
}

/// Resample a polyline to exactly `count` points, uniform in arclength.
fn resample_polyline(points: &[(f64, f64)], count: usize) -> Vec<(f64, f64)> {
    assert!(points.len() >= 2 && count >= 2);
    let mut cumulative = Vec::with_capacity(points.len());
    cumulative.push(0.0);
    for pair in points.windows(2) {
        let dx = pair[1].0 - pair[0].0;
        let dy = pair[1].1 - pair[0].1;
        cumulative.push(cumulative.last().unwrap() + (dx * dx + dy * dy).sqrt());
    }
    let total = *cumulative.last().unwrap();
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for i in 0..count {
        let target = total * i as f64 / (count - 1) as f64;
        while seg + 2 < cumulative.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let alpha = if span > 0.0 { (target - cumulative[seg]) / span } else { 0.0 };
        let alpha = alpha.clamp(0.0, 1.0);
        out.push((
            points[seg].0 + alpha * (points[seg + 1].0 - points[seg].0),
            points[seg].1 + alpha * (points[seg + 1].1 - points[seg].1),
        ));
    }
    out
}

fn path_tangent(path: &[(f64, f64)], k: usize) -> (f64, f64) {
    let (a, b) = if k + 1 < path.len() {
        (path[k], path[k + 1])
    } else {
        (path[k - 1], path[k])
    };
    let dx = b.0 - a.0;
    let dy = b.1 - a.1;
    let n = (dx * dx + dy * dy).sqrt();
    if n > 0.0 {
        (dx / n, dy / n)
    } else {
        (1.0, 0.0)
    }
}

// ---------------------------------------------------------------------------
// Layer-wise regression benchmark
// ---------------------------------------------------------------------------

/// Fitted layer-wise regression: per-layer thickness increment
/// `ŷ_i = (a + b·l)·exp(−δ_i²/(2c²))·(d0/d̄)·(u0/ū)`.
#[derive(Debug, Clone, Copy)]
pub struct BaselineModel<T> {
    pub a: T,
    pub b: T,
    /// Gaussian width around the printing path, mm.
    pub c: T,
    /// Reference gun-to-surface distance, mm.
    pub d0: T,
    /// Reference speed, m/s.
    pub u0: T,
}

/// Per-particle minimum in-plane distance to the layer's projected path.
pub fn path_distances<T: Scalar>(grid: &WallGrid<T>, trajectory: &Trajectory<T>) -> Vec<T> {
    let path: Vec<(T, T)> = trajectory
        .steps
        .iter()
        .map(|s| {
            let w = project_to_wall(s.tp, s.direction, grid).unwrap_or(s.tp);
            grid.in_plane(w)
        })
        .collect();
    (0..grid.particle_count())
        .map(|i| {
            let p = grid.particle_xy(i);
            let mut best = T::infinity();
            for seg in path.windows(2) {
                let d = point_segment_distance(p, seg[0], seg[1]);
                if d < best {
                    best = d;
                }
            }
            best
        })
        .collect()
}

fn point_segment_distance<T: Scalar>(p: (T, T), a: (T, T), b: (T, T)) -> T {
    let abx = b.0 - a.0;
    let aby = b.1 - a.1;
    let apx = p.0 - a.0;
    let apy = p.1 - a.1;
    let len2 = abx * abx + aby * aby;
    let t = if len2 > T::zero() {
        ((apx * abx + apy * aby) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let dx = apx - t * abx;
    let dy = apy - t * aby;
    (dx * dx + dy * dy).sqrt()
}

/// Mean gun-to-surface distance over a layer given the current wall state:
/// stand-off to the plane minus the thickness under the spray center.
pub fn mean_surface_distance<T: Scalar>(
    grid: &WallGrid<T>,
    trajectory: &Trajectory<T>,
    offsets: &[T],
) -> T {
    let mut acc = T::zero();
    let mut count = 0usize;
    for step in &trajectory.steps {
        let plane = grid.plane_distance(step.tp).abs();
        let center = match project_to_wall(step.tp, step.direction, grid) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let (cx, cy) = grid.in_plane(center);
        let s = grid.spacing;
        let ix = (cx / s).round().to_isize().unwrap_or(0).clamp(0, grid.nx as isize - 1) as usize;
        let iy = (cy / s).round().to_isize().unwrap_or(0).clamp(0, grid.ny as isize - 1) as usize;
        let surface = offsets[iy * grid.nx + ix];
        acc += plane - surface;
        count += 1;
    }
    acc / T::from_usize(count.max(1)).unwrap()
}

fn mean_speed<T: Scalar>(trajectory: &Trajectory<T>) -> T {
    let mut acc = T::zero();
    for step in &trajectory.steps {
        acc += step.speed();
    }
    acc / T::from_usize(trajectory.len().max(1)).unwrap()
}

/// Fit the benchmark on a dataset with dense boundary states: linear least
/// squares for `(a, b)` nested inside a golden-section search over `c`.
pub fn fit_baseline<T: Scalar>(dataset: &ExperimentDataset<T>) -> Result<BaselineModel<T>, CoreError> {
    let boundaries = dataset
        .boundaries
        .as_ref()
        .ok_or(CoreError::MissingTruth { layer: 0 })?;
    if boundaries.len() < 3 {
        return Err(CoreError::InsufficientScans { found: boundaries.len() });
    }
    let layers = dataset.layers;
    let n = dataset.particle_count();

    // Per-layer features and targets from the true states.
    let mut deltas = Vec::with_capacity(layers);
    let mut d_bar = Vec::with_capacity(layers);
    let mut u_bar = Vec::with_capacity(layers);
    let mut targets = Vec::with_capacity(layers);
    for l in 0..layers {
        deltas.push(path_distances(&dataset.grid, &dataset.trajectories[l]));
        d_bar.push(mean_surface_distance(&dataset.grid, &dataset.trajectories[l], &boundaries[l]));
        u_bar.push(mean_speed(&dataset.trajectories[l]));
        let y: Vec<T> = boundaries[l + 1]
            .iter()
            .zip(&boundaries[l])
            .map(|(&next, &prev)| next - prev)
            .collect();
        targets.push(y);
    }
    let total_sq: T = targets
        .iter()
        .flat_map(|y| y.iter())
        .fold(T::zero(), |acc, &v| acc + v * v);
    if total_sq == T::zero() {
        return Err(CoreError::DegenerateFit);
    }

    let d0 = d_bar.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize(layers).unwrap();
    let u0 = u_bar.iter().fold(T::zero(), |a, &b| a + b) / T::from_usize(layers).unwrap();

    // SSE of the best (a, b) at a given width c.
    let evaluate = |c: T| -> (T, T, T) {
        let two = T::from_f64(2.0).unwrap();
        let mut s_kk = T::zero();
        let mut s_lkk = T::zero();
        let mut s_llkk = T::zero();
        let mut s_yk = T::zero();
        let mut s_ylk = T::zero();
        for l in 0..layers {
            let lf = T::from_usize(l).unwrap();
            let ratio = (d0 / d_bar[l]) * (u0 / u_bar[l]);
            for i in 0..n {
                let g = (-(deltas[l][i] * deltas[l][i]) / (two * c * c)).exp();
                let k = g * ratio;
                let y = targets[l][i];
                s_kk += k * k;
                s_lkk += lf * k * k;
                s_llkk += lf * lf * k * k;
                s_yk += y * k;
                s_ylk += y * lf * k;
            }
        }
        let det = s_kk * s_llkk - s_lkk * s_lkk;
        let (a, b) = if det.abs() > T::from_f64(1e-30).unwrap() {
            ((s_yk * s_llkk - s_ylk * s_lkk) / det, (s_ylk * s_kk - s_yk * s_lkk) / det)
        } else if s_kk > T::zero() {
            (s_yk / s_kk, T::zero())
        } else {
            (T::zero(), T::zero())
        };
        let mut sse = T::zero();
        for l in 0..layers {
            let lf = T::from_usize(l).unwrap();
            let ratio = (d0 / d_bar[l]) * (u0 / u_bar[l]);
            for i in 0..n {
                let g = (-(deltas[l][i] * deltas[l][i]) / (two * c * c)).exp();
                let r = targets[l][i] - (a + b * lf) * g * ratio;
                sse += r * r;
            }
        }
        (sse, a, b)
    };

    // Golden-section over c in [spacing/2, wall diagonal].
    let phi = T::from_f64((5.0f64.sqrt() - 1.0) / 2.0).unwrap();
    let mut lo = dataset.grid.spacing * T::from_f64(0.5).unwrap();
    let diag_x = dataset.grid.spacing * T::from_usize(dataset.grid.nx).unwrap();
    let diag_y = dataset.grid.spacing * T::from_usize(dataset.grid.ny).unwrap();
    let mut hi = (diag_x * diag_x + diag_y * diag_y).sqrt();
    let mut c1 = hi - phi * (hi - lo);
    let mut c2 = lo + phi * (hi - lo);
    let mut f1 = evaluate(c1).0;
    let mut f2 = evaluate(c2).0;
    for _ in 0..60 {
        if f1 < f2 {
            hi = c2;
            c2 = c1;
            f2 = f1;
            c1 = hi - phi * (hi - lo);
            f1 = evaluate(c1).0;
        } else {
            lo = c1;
            c1 = c2;
            f1 = f2;
            c2 = lo + phi * (hi - lo);
            f2 = evaluate(c2).0;
        }
    }
    let c = (lo + hi) * T::from_f64(0.5).unwrap();
    let (_, a, b) = evaluate(c);
    Ok(BaselineModel { a, b, c, d0, u0 })
}

/// Apply one whole layer of the benchmark: `offsets + ŷ(l)`, floored at 0.
///
/// The gun-to-surface distance is measured against the offsets passed in, so
/// recursive use feeds the model its own predicted surface.
pub fn baseline_predict_layer<T: Scalar>(
    model: &BaselineModel<T>,
    grid: &WallGrid<T>,
    trajectory: &Trajectory<T>,
    offsets: &[T],
    layer: usize,
) -> Vec<T> {
    let two = T::from_f64(2.0).unwrap();
    let deltas = path_distances(grid, trajectory);
    let d_bar = mean_surface_distance(grid, trajectory, offsets);
    let u_bar = mean_speed(trajectory);
    let lf = T::from_usize(layer).unwrap();
    let amp = (model.a + model.b * lf) * (model.d0 / d_bar) * (model.u0 / u_bar);
    offsets
        .iter()
        .zip(&deltas)
        .map(|(&h, &delta)| {
            let g = (-(delta * delta) / (two * model.c * model.c)).exp();
            (h + amp * g).max(T::zero())
        })
        .collect()
}
