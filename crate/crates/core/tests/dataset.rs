mod common;

use common::{grid, sweep, tiny_experiment};
use spraygnn_core::dataset::{
    augment_inter_step, interpolate_layers, load_augmented, load_experiment, store_augmented,
    store_experiment, ExperimentDataset, LayerScan,
};
use spraygnn_core::CoreError;

fn scan(layer: usize, offsets: Vec<f64>) -> LayerScan<f64> {
    LayerScan { layer, offsets, captured_before_layer: true }
}

#[test]
fn linear_midpoint_between_two_scans() {
    let scans = vec![scan(0, vec![0.0; 4]), scan(10, vec![5.0; 4])];
    let dense = interpolate_layers(&scans, 10, 4).unwrap();
    assert_eq!(dense.len(), 11);
    assert!(dense[5].iter().all(|&v| (v - 2.5).abs() < 1e-12));
    // Recorded boundaries come back verbatim.
    assert_eq!(dense[0], vec![0.0; 4]);
    assert_eq!(dense[10], vec![5.0; 4]);
}

#[test]
fn piecewise_segments_interpolate_independently() {
    let scans = vec![scan(0, vec![0.0]), scan(1, vec![1.0]), scan(10, vec![10.0])];
    let dense = interpolate_layers(&scans, 10, 1).unwrap();
    assert!((dense[4][0] - 4.0).abs() < 1e-12);
}

#[test]
fn extrapolation_continues_last_slope_with_zero_floor() {
    let scans = vec![scan(0, vec![4.0]), scan(2, vec![2.0])];
    // Slope −1 per layer; boundary 4 would be 0, boundary 6 would be −2 → 0.
    let dense = interpolate_layers(&scans, 6, 1).unwrap();
    assert!((dense[4][0] - 0.0).abs() < 1e-12);
    assert_eq!(dense[6][0], 0.0);
}

#[test]
fn random_piecewise_linear_truth_is_reconstructed_exactly() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let n = rng.gen_range(1..8);
        let layers = 12;
        let mid = rng.gen_range(1..layers);
        let knots = [0usize, mid, layers];
        let values: Vec<Vec<f64>> =
            (0..3).map(|_| (0..n).map(|_| rng.gen_range(0.0..8.0)).collect()).collect();
        let scans: Vec<LayerScan<f64>> =
            knots.iter().zip(&values).map(|(&l, v)| scan(l, v.clone())).collect();
        let dense = interpolate_layers(&scans, layers, n).unwrap();
        // Independent truth: direct two-point interpolation formula.
        for b in 0..=layers {
            let (seg, a, c) = if b <= mid { (0, 0, mid) } else { (1, mid, layers) };
            let alpha = (b - a) as f64 / (c - a) as f64;
            for i in 0..n {
                let expect = values[seg][i] + alpha * (values[seg + 1][i] - values[seg][i]);
                assert!(
                    (dense[b][i] - expect).abs() < 1e-12,
                    "boundary {b} particle {i}: {} vs {expect}",
                    dense[b][i]
                );
            }
        }
    }
}

#[test]
fn interpolation_error_paths() {
    assert!(matches!(
        interpolate_layers(&[scan(0, vec![0.0])], 4, 1),
        Err(CoreError::InsufficientScans { found: 1 })
    ));
    assert!(matches!(
        interpolate_layers(&[scan(0, vec![0.0]), scan(3, vec![1.0]), scan(2, vec![2.0])], 4, 1),
        Err(CoreError::NonMonotoneLayers)
    ));
    assert!(matches!(
        interpolate_layers(&[scan(0, vec![0.0, 0.0]), scan(2, vec![1.0])], 4, 2),
        Err(CoreError::GridMismatch { .. })
    ));
}

#[test]
fn untouched_particle_jumps_only_at_the_final_step() {
    // Sweep along y = 50 at d = 100: augmentation cone radius 50 mm, so the
    // particles in the top row (y = 100) at x far from the path stay put.
    let g = grid(5, 5, 25.0);
    let trajectory = sweep(6, 0.0, 40.0, 50.0, 100.0, 0.5);
    let start = vec![0.0; 25];
    let end = vec![1.0; 25];
    let seq = augment_inter_step(&start, &end, &trajectory, &g).unwrap();
    assert_eq!(seq.len(), 6);
    // Particle at (100, 100): in-plane distance to every cone center > 50.
    let far = 4 * 5 + 4;
    for snapshot in &seq[..5] {
        assert_eq!(snapshot[far], 0.0);
    }
    assert_eq!(seq[5][far], 1.0);
    assert_eq!(seq[5], end);
}

#[test]
fn full_coverage_single_transition_reaches_layer_end() {
    let g = grid(3, 3, 10.0);
    // Two entries; the second step's cone (radius 150) covers the whole wall.
    let trajectory = sweep(2, 10.0, 10.0, 10.0, 300.0, 0.5);
    let start = vec![0.0; 9];
    let end: Vec<f64> = (0..9).map(|i| i as f64 * 0.1).collect();
    let seq = augment_inter_step(&start, &end, &trajectory, &g).unwrap();
    assert_eq!(seq.len(), 2);
    assert_eq!(seq[0], start);
    assert_eq!(seq[1], end);
}

#[test]
fn snapshots_stay_between_start_and_end() {
    let ds = tiny_experiment(3, 9);
    let augmented = ds.augmented.as_ref().unwrap();
    let boundaries = ds.boundaries.as_ref().unwrap();
    for (l, layer) in augmented.iter().enumerate() {
        for snapshot in layer {
            for ((&v, &lo), &hi) in snapshot.iter().zip(&boundaries[l]).zip(&boundaries[l + 1]) {
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
        assert_eq!(layer.last().unwrap(), &boundaries[l + 1]);
    }
}

#[test]
fn snapshot_count_is_steps_times_layers() {
    let ds = tiny_experiment(4, 7);
    assert_eq!(ds.snapshot_count(), 4 * 7);
}

#[test]
fn experiment_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_experiment(2, 5);
    let manifest = store_experiment(&ds, dir.path()).unwrap();
    let back: ExperimentDataset<f64> = load_experiment(&manifest).unwrap();
    assert_eq!(back.layers, ds.layers);
    assert_eq!(back.grid, ds.grid);
    assert_eq!(back.scans.len(), ds.scans.len());
    for (a, b) in ds.scans.iter().zip(&back.scans) {
        assert_eq!(a.layer, b.layer);
        assert!(a.offsets.iter().zip(&b.offsets).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    assert_eq!(back.trajectories.len(), ds.trajectories.len());
    for (a, b) in ds.trajectories.iter().zip(&back.trajectories) {
        assert_eq!(a, b);
    }
}

#[test]
fn augmented_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_experiment(3, 6);
    let path = dir.path().join("augmented.sgna");
    store_augmented(&ds, &path).unwrap();
    let mut reloaded = ds.clone();
    reloaded.augmented = None;
    reloaded.boundaries = None;
    load_augmented(&mut reloaded, &path).unwrap();
    let a = ds.augmented.as_ref().unwrap();
    let b = reloaded.augmented.as_ref().unwrap();
    assert_eq!(a.len(), b.len());
    for (la, lb) in a.iter().zip(b) {
        for (sa, sb) in la.iter().zip(lb) {
            assert!(sa.iter().zip(sb).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn missing_scan_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_experiment(2, 5);
    let manifest = store_experiment(&ds, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("scans/boundary_0001.csv")).unwrap();
    assert!(matches!(
        load_experiment::<f64>(&manifest),
        Err(CoreError::MissingFile(_))
    ));
}

#[test]
fn wrong_manifest_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_experiment(2, 5);
    let manifest = store_experiment(&ds, dir.path()).unwrap();
    let text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(&manifest, text.replace("\"version\": 1", "\"version\": 9")).unwrap();
    assert!(matches!(
        load_experiment::<f64>(&manifest),
        Err(CoreError::SchemaVersionMismatch { found: 9, expected: 1 })
    ));
}

#[test]
fn scan_length_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = tiny_experiment(2, 5);
    let manifest = store_experiment(&ds, dir.path()).unwrap();
    // Drop one data row from a scan.
    let scan_path = dir.path().join("scans/boundary_0000.csv");
    let text = std::fs::read_to_string(&scan_path).unwrap();
    let truncated: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    std::fs::write(&scan_path, truncated.join("\n")).unwrap();
    assert!(matches!(
        load_experiment::<f64>(&manifest),
        Err(CoreError::GridMismatch { .. })
    ));
}
