//! Experiment datasets and the two augmentation passes.
//!
//! Thickness can only be scanned between layers, so raw experiments hold a
//! handful of layer scans but a full trajectory for every layer. Training a
//! one-step-ahead predictor needs the wall state at every trajectory step,
//! which is recovered in two passes:
//!
//! 1. **Inter-layer**: linear interpolation of per-particle offsets across
//!    unscanned layer boundaries, so every layer has a start and end state.
//! 2. **Inter-step**: within a layer, particles jump from their start value
//!    to their layer-end value at the first step whose spray cone (base
//!    radius = half the gun-to-wall distance) covers them.
//!
//! On disk an experiment is a manifest plus scan CSVs and trajectory JSONL
//! files; augmented snapshots go into a compact binary store. All files hold
//! `f64` regardless of the in-memory scalar.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{SprayCone, Trajectory, TrajectoryStep, Vec3, WallGrid};
use crate::{CoreError, Scalar};

pub const MANIFEST_VERSION: u32 = 1;
pub const AUGMENTED_MAGIC: &[u8; 4] = b"SGNA";
pub const AUGMENTED_VERSION: u32 = 1;

/// Cone radius factor used by inter-step augmentation: half the distance
/// from the printing point to the wall.
pub const AUGMENT_RADIUS_FACTOR: f64 = 0.5;

/// A thickness snapshot recorded at a layer boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerScan<T> {
    pub layer: usize,
    pub offsets: Vec<T>,
    /// True when captured before printing `layer` (the usual case); false
    /// means captured right after it.
    pub captured_before_layer: bool,
}

impl<T> LayerScan<T> {
    /// Boundary index in `0..=layers`: state before printing that layer.
    pub fn boundary(&self) -> usize {
        if self.captured_before_layer {
            self.layer
        } else {
            self.layer + 1
        }
    }
}

/// One experiment: grid, per-layer trajectories, sparse scans, and (after
/// augmentation) per-step snapshot sequences.
#[derive(Debug, Clone)]
pub struct ExperimentDataset<T> {
    pub grid: WallGrid<T>,
    pub layers: usize,
    pub trajectories: Vec<Trajectory<T>>,
    pub scans: Vec<LayerScan<T>>,
    /// Dense wall states at layer boundaries `0..=layers`, filled by
    /// [`ExperimentDataset::augment`].
    pub boundaries: Option<Vec<Vec<T>>>,
    /// Per layer, one offset snapshot per trajectory step.
    pub augmented: Option<Vec<Vec<Vec<T>>>>,
}

impl<T: Scalar> ExperimentDataset<T> {
    pub fn particle_count(&self) -> usize {
        self.grid.particle_count()
    }

    /// Total augmented snapshot count: Σ per-layer trajectory lengths.
    pub fn snapshot_count(&self) -> usize {
        self.augmented.as_ref().map_or(0, |layers| layers.iter().map(|l| l.len()).sum())
    }

    /// Run both augmentation passes, filling `boundaries` and `augmented`.
    pub fn augment(&mut self) -> Result<(), CoreError> {
        let boundaries = interpolate_layers(&self.scans, self.layers, self.particle_count())?;
        let mut augmented = Vec::with_capacity(self.layers);
        for l in 0..self.layers {
            augmented.push(augment_inter_step(
                &boundaries[l],
                &boundaries[l + 1],
                &self.trajectories[l],
                &self.grid,
            )?);
        }
        self.boundaries = Some(boundaries);
        self.augmented = Some(augmented);
        Ok(())
    }

    /// Ground-truth wall state at a layer boundary.
    pub fn boundary(&self, b: usize) -> Result<&[T], CoreError> {
        self.boundaries
            .as_ref()
            .and_then(|bs| bs.get(b))
            .map(|v| v.as_slice())
            .ok_or(CoreError::MissingTruth { layer: b })
    }
}

/// Densify sparse layer scans into wall states at every boundary `0..=layers`.
///
/// Boundaries between two scans are linearly interpolated per particle;
/// recorded boundaries are reproduced exactly; boundaries past the last scan
/// continue the final segment's slope, floored at zero.
pub fn interpolate_layers<T: Scalar>(
    scans: &[LayerScan<T>],
    layers: usize,
    particle_count: usize,
) -> Result<Vec<Vec<T>>, CoreError> {
    if scans.len() < 2 {
        return Err(CoreError::InsufficientScans { found: scans.len() });
    }
    for scan in scans {
        if scan.offsets.len() != particle_count {
            return Err(CoreError::GridMismatch {
                expected: particle_count,
                found: scan.offsets.len(),
            });
        }
    }
    let indices: Vec<usize> = scans.iter().map(|s| s.boundary()).collect();
    if indices[0] != 0 {
        return Err(CoreError::Format("first scan must be at layer 0".into()));
    }
    for pair in indices.windows(2) {
        if pair[1] <= pair[0] {
            return Err(CoreError::NonMonotoneLayers);
        }
    }
    if *indices.last().unwrap() > layers {
        return Err(CoreError::Format(format!(
            "scan at boundary {} beyond layer count {layers}",
            indices.last().unwrap()
        )));
    }

    let mut out = Vec::with_capacity(layers + 1);
    let last = scans.len() - 1;
    for b in 0..=layers {
        // Segment containing b; past the last scan, extrapolate the final one.
        let seg = match indices.iter().position(|&a| a >= b) {
            Some(0) => 0,
            Some(pos) => pos - 1,
            None => last - 1,
        };
        let seg = seg.min(last - 1);
        let (a, c) = (indices[seg], indices[seg + 1]);
        // Recorded boundaries are copied verbatim, not recomputed.
        if b == a {
            out.push(scans[seg].offsets.clone());
            continue;
        }
        if b == c {
            out.push(scans[seg + 1].offsets.clone());
            continue;
        }
        let alpha = T::from_usize(b - a).unwrap() / T::from_usize(c - a).unwrap();
        let values: Vec<T> = scans[seg]
            .offsets
            .iter()
            .zip(&scans[seg + 1].offsets)
            .map(|(&lo, &hi)| (lo + alpha * (hi - lo)).max(T::zero()))
            .collect();
        out.push(values);
    }
    Ok(out)
}

/// Reconstruct per-step snapshots within one layer.
///
/// The sequence has one snapshot per trajectory step. Snapshot 0 is the layer
/// start; at each later step the particles inside that step's cone are set to
/// their layer-end value; the final snapshot is forced to the layer end so
/// particles never covered by any cone still arrive there.
pub fn augment_inter_step<T: Scalar>(
    layer_start: &[T],
    layer_end: &[T],
    trajectory: &Trajectory<T>,
    grid: &WallGrid<T>,
) -> Result<Vec<Vec<T>>, CoreError> {
    if layer_start.len() != layer_end.len() || layer_start.len() != grid.particle_count() {
        return Err(CoreError::GridMismatch {
            expected: grid.particle_count(),
            found: layer_start.len().min(layer_end.len()),
        });
    }
    if trajectory.is_empty() {
        return Err(CoreError::Format("trajectory has no steps".into()));
    }
    let factor = T::from_f64(AUGMENT_RADIUS_FACTOR).unwrap();
    let mut snapshots = Vec::with_capacity(trajectory.len());
    let mut current = layer_start.to_vec();
    snapshots.push(current.clone());
    for step in &trajectory.steps[1..] {
        let cone = SprayCone::from_step(step, grid, factor)?;
        for i in crate::geometry::particles_in_cone(&cone, grid) {
            current[i] = layer_end[i];
        }
        snapshots.push(current.clone());
    }
    if let Some(last) = snapshots.last_mut() {
        last.copy_from_slice(layer_end);
    }
    Ok(snapshots)
}

// ---------------------------------------------------------------------------
// On-disk formats
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    grid: ManifestGrid,
    layers: usize,
    trajectories: Vec<String>,
    scans: Vec<ManifestScan>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestGrid {
    nx: usize,
    ny: usize,
    spacing_mm: f64,
    origin: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestScan {
    layer: usize,
    file: String,
    #[serde(default = "default_true")]
    captured_before_layer: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    t: usize,
    tp: [f64; 3],
    u: [f64; 3],
    n: [f64; 3],
    #[serde(rename = "P")]
    pressure: f64,
}

fn require_file(path: &Path) -> Result<(), CoreError> {
    if !path.is_file() {
        return Err(CoreError::MissingFile(path.display().to_string()));
    }
    Ok(())
}

/// Load an experiment from its manifest. Augmented snapshots are loaded
/// separately via [`load_augmented`].
pub fn load_experiment<T: Scalar>(manifest_path: &Path) -> Result<ExperimentDataset<T>, CoreError> {
    require_file(manifest_path)?;
    let manifest: ManifestFile = serde_json::from_reader(BufReader::new(File::open(manifest_path)?))
        .map_err(|e| CoreError::Format(format!("manifest: {e}")))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(CoreError::SchemaVersionMismatch {
            found: manifest.version,
            expected: MANIFEST_VERSION,
        });
    }
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let grid = WallGrid::new(
        manifest.grid.nx,
        manifest.grid.ny,
        T::from_f64(manifest.grid.spacing_mm).unwrap(),
        Vec3::new(
            T::from_f64(manifest.grid.origin[0]).unwrap(),
            T::from_f64(manifest.grid.origin[1]).unwrap(),
            T::from_f64(manifest.grid.origin[2]).unwrap(),
        ),
    );

    if manifest.trajectories.is_empty() {
        return Err(CoreError::Format("manifest lists no trajectories".into()));
    }
    let mut trajectories = Vec::with_capacity(manifest.layers);
    if manifest.trajectories.len() == 1 {
        let t = read_trajectory(&dir.join(&manifest.trajectories[0]))?;
        trajectories = vec![t; manifest.layers];
    } else if manifest.trajectories.len() == manifest.layers {
        for file in &manifest.trajectories {
            trajectories.push(read_trajectory(&dir.join(file))?);
        }
    } else {
        return Err(CoreError::Format(format!(
            "manifest lists {} trajectories for {} layers (need 1 or {})",
            manifest.trajectories.len(),
            manifest.layers,
            manifest.layers
        )));
    }

    let mut scans = Vec::with_capacity(manifest.scans.len());
    for entry in &manifest.scans {
        let offsets = read_scan(&dir.join(&entry.file), grid.particle_count())?;
        scans.push(LayerScan {
            layer: entry.layer,
            offsets,
            captured_before_layer: entry.captured_before_layer,
        });
    }

    Ok(ExperimentDataset {
        grid,
        layers: manifest.layers,
        trajectories,
        scans,
        boundaries: None,
        augmented: None,
    })
}

/// Write an experiment as manifest + scan CSVs + trajectory JSONL files.
pub fn store_experiment<T: Scalar>(
    dataset: &ExperimentDataset<T>,
    dir: &Path,
) -> Result<PathBuf, CoreError> {
    std::fs::create_dir_all(dir.join("scans"))?;
    std::fs::create_dir_all(dir.join("trajectories"))?;

    let mut scan_entries = Vec::new();
    for scan in &dataset.scans {
        let file = format!("scans/boundary_{:04}.csv", scan.boundary());
        write_scan(&dir.join(&file), &dataset.grid, &scan.offsets)?;
        scan_entries.push(ManifestScan {
            layer: scan.layer,
            file,
            captured_before_layer: scan.captured_before_layer,
        });
    }

    let mut trajectory_files = Vec::new();
    for (l, trajectory) in dataset.trajectories.iter().enumerate() {
        let file = format!("trajectories/layer_{l:04}.jsonl");
        write_trajectory(&dir.join(&file), trajectory)?;
        trajectory_files.push(file);
    }

    let manifest = ManifestFile {
        version: MANIFEST_VERSION,
        grid: ManifestGrid {
            nx: dataset.grid.nx,
            ny: dataset.grid.ny,
            spacing_mm: dataset.grid.spacing.to_f64().unwrap(),
            origin: [
                dataset.grid.origin.x.to_f64().unwrap(),
                dataset.grid.origin.y.to_f64().unwrap(),
                dataset.grid.origin.z.to_f64().unwrap(),
            ],
        },
        layers: dataset.layers,
        trajectories: trajectory_files,
        scans: scan_entries,
    };
    let manifest_path = dir.join("manifest.json");
    let file = File::create(&manifest_path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)
        .map_err(|e| CoreError::Format(format!("manifest: {e}")))?;
    Ok(manifest_path)
}

fn read_scan<T: Scalar>(path: &Path, expected: usize) -> Result<Vec<T>, CoreError> {
    require_file(path)?;
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::Format(format!("{}: empty scan", path.display())))??;
    if header.trim() != "x_mm,y_mm,offset_mm" {
        return Err(CoreError::Format(format!("{}: bad scan header `{header}`", path.display())));
    }
    let mut offsets = Vec::with_capacity(expected);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let offset = line
            .rsplit(',')
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| CoreError::Format(format!("{}: bad scan row `{line}`", path.display())))?;
        offsets.push(T::from_f64(offset).unwrap());
    }
    if offsets.len() != expected {
        return Err(CoreError::GridMismatch { expected, found: offsets.len() });
    }
    Ok(offsets)
}

fn write_scan<T: Scalar>(path: &Path, grid: &WallGrid<T>, offsets: &[T]) -> Result<(), CoreError> {
    if offsets.len() != grid.particle_count() {
        return Err(CoreError::GridMismatch {
            expected: grid.particle_count(),
            found: offsets.len(),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x_mm,y_mm,offset_mm")?;
    for (i, offset) in offsets.iter().enumerate() {
        let (x, y) = grid.particle_xy(i);
        // `{}` on floats prints the shortest round-trip representation.
        writeln!(
            w,
            "{},{},{}",
            x.to_f64().unwrap(),
            y.to_f64().unwrap(),
            offset.to_f64().unwrap()
        )?;
    }
    Ok(())
}

fn read_trajectory<T: Scalar>(path: &Path) -> Result<Trajectory<T>, CoreError> {
    require_file(path)?;
    let reader = BufReader::new(File::open(path)?);
    let mut steps = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TrajectoryRow = serde_json::from_str(&line)
            .map_err(|e| CoreError::Format(format!("{}: {e}", path.display())))?;
        let step = TrajectoryStep {
            t: row.t,
            tp: vec3_from(row.tp),
            velocity: vec3_from(row.u),
            direction: vec3_from(row.n),
            pressure: T::from_f64(row.pressure).unwrap(),
        };
        step.validate()?;
        steps.push(step);
    }
    Trajectory::new(steps)
}

fn write_trajectory<T: Scalar>(path: &Path, trajectory: &Trajectory<T>) -> Result<(), CoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    for step in &trajectory.steps {
        let row = TrajectoryRow {
            t: step.t,
            tp: vec3_to(step.tp),
            u: vec3_to(step.velocity),
            n: vec3_to(step.direction),
            pressure: step.pressure.to_f64().unwrap(),
        };
        let json = serde_json::to_string(&row)
            .map_err(|e| CoreError::Format(format!("trajectory row: {e}")))?;
        writeln!(w, "{json}")?;
    }
    Ok(())
}

fn vec3_from<T: Scalar>(a: [f64; 3]) -> Vec3<T> {
    Vec3::new(
        T::from_f64(a[0]).unwrap(),
        T::from_f64(a[1]).unwrap(),
        T::from_f64(a[2]).unwrap(),
    )
}

fn vec3_to<T: Scalar>(v: Vec3<T>) -> [f64; 3] {
    [v.x.to_f64().unwrap(), v.y.to_f64().unwrap(), v.z.to_f64().unwrap()]
}

/// Store augmented snapshots in the binary `.sgna` layout:
/// magic, version u32, layer count u64, then per layer
/// `{steps u64, particles u64, offsets f64 × steps × particles}`,
/// all little-endian.
pub fn store_augmented<T: Scalar>(dataset: &ExperimentDataset<T>, path: &Path) -> Result<(), CoreError> {
    let augmented = dataset
        .augmented
        .as_ref()
        .ok_or_else(|| CoreError::Format("dataset has no augmented snapshots".into()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(AUGMENTED_MAGIC)?;
    w.write_all(&AUGMENTED_VERSION.to_le_bytes())?;
    w.write_all(&(augmented.len() as u64).to_le_bytes())?;
    for layer in augmented {
        w.write_all(&(layer.len() as u64).to_le_bytes())?;
        let particles = layer.first().map_or(0, |s| s.len());
        w.write_all(&(particles as u64).to_le_bytes())?;
        for snapshot in layer {
            for v in snapshot {
                w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Load augmented snapshots into the dataset, rebuilding boundary states
/// from the snapshot sequence ends.
pub fn load_augmented<T: Scalar>(
    dataset: &mut ExperimentDataset<T>,
    path: &Path,
) -> Result<(), CoreError> {
    require_file(path)?;
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != AUGMENTED_MAGIC {
        return Err(CoreError::Format(format!("{}: bad magic", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != AUGMENTED_VERSION {
        return Err(CoreError::SchemaVersionMismatch { found: version, expected: AUGMENTED_VERSION });
    }
    let layers = read_u64(&mut r)? as usize;
    if layers != dataset.layers {
        return Err(CoreError::Format(format!(
            "{}: {layers} layers, dataset has {}",
            path.display(),
            dataset.layers
        )));
    }
    let mut augmented = Vec::with_capacity(layers);
    for _ in 0..layers {
        let steps = read_u64(&mut r)? as usize;
        let particles = read_u64(&mut r)? as usize;
        if particles != dataset.particle_count() {
            return Err(CoreError::GridMismatch {
                expected: dataset.particle_count(),
                found: particles,
            });
        }
        let mut layer = Vec::with_capacity(steps);
        let mut buf = [0u8; 8];
        for _ in 0..steps {
            let mut snapshot = Vec::with_capacity(particles);
            for _ in 0..particles {
                r.read_exact(&mut buf)?;
                snapshot.push(T::from_f64(f64::from_le_bytes(buf)).unwrap());
            }
            layer.push(snapshot);
        }
        augmented.push(layer);
    }
    let mut boundaries = Vec::with_capacity(layers + 1);
    boundaries.push(augmented[0][0].clone());
    for layer in &augmented {
        boundaries.push(layer.last().unwrap().clone());
    }
    dataset.boundaries = Some(boundaries);
    dataset.augmented = Some(augmented);
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CoreError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CoreError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
