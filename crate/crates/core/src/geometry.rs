//! Wall, trajectory and spray-cone types plus the spatial queries used by
//! augmentation and graph construction.
//!
//! The wall lives in a canonical local frame: the reference plane is z = 0,
//! in-plane axes are x and y, and deposited material grows in +z. Particle
//! `i = iy·nx + ix` sits at in-plane position `origin + (ix·spacing, iy·spacing)`;
//! only its out-of-plane offset ever changes.

use std::collections::HashMap;

use crate::{CoreError, Scalar};

/// Minimal 3-vector. Small enough that a dedicated type beats pulling in a
/// linear-algebra crate whose trait set clashes with `num_traits::Float`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3 { x: T::zero(), y: T::zero(), z: T::zero() }
    }

    pub fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Vec3::new(self.x / n, self.y / n, self.z / n)
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

/// Orthonormal wall frame: two in-plane axes and the out-of-plane normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallBasis<T> {
    pub u: Vec3<T>,
    pub v: Vec3<T>,
    pub normal: Vec3<T>,
}

impl<T: Scalar> WallBasis<T> {
    /// Canonical frame: x/y in-plane, +z out of the wall.
    pub fn canonical() -> Self {
        WallBasis {
            u: Vec3::new(T::one(), T::zero(), T::zero()),
            v: Vec3::new(T::zero(), T::one(), T::zero()),
            normal: Vec3::new(T::zero(), T::zero(), T::one()),
        }
    }
}

/// Fixed in-plane particle lattice; out-of-plane offsets encode thickness.
#[derive(Debug, Clone, PartialEq)]
pub struct WallGrid<T> {
    pub nx: usize,
    pub ny: usize,
    /// Lattice spacing in mm.
    pub spacing: T,
    /// Position of particle (0, 0); lies in the wall reference plane.
    pub origin: Vec3<T>,
    pub basis: WallBasis<T>,
    offsets: Vec<T>,
}

impl<T: Scalar> WallGrid<T> {
    pub fn new(nx: usize, ny: usize, spacing: T, origin: Vec3<T>) -> Self {
        assert!(nx > 0 && ny > 0, "grid dimensions must be positive");
        WallGrid {
            nx,
            ny,
            spacing,
            origin,
            basis: WallBasis::canonical(),
            offsets: vec![T::zero(); nx * ny],
        }
    }

    pub fn particle_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    pub fn offsets_mut(&mut self) -> &mut [T] {
        &mut self.offsets
    }

    /// Replace all offsets; length must match the particle count.
    pub fn set_offsets(&mut self, offsets: &[T]) -> Result<(), CoreError> {
        if offsets.len() != self.particle_count() {
            return Err(CoreError::GridMismatch {
                expected: self.particle_count(),
                found: offsets.len(),
            });
        }
        self.offsets.copy_from_slice(offsets);
        Ok(())
    }

    /// In-plane lattice coordinates of particle `i`, relative to the origin.
    pub fn particle_xy(&self, i: usize) -> (T, T) {
        let ix = i % self.nx;
        let iy = i / self.nx;
        (T::from_usize(ix).unwrap() * self.spacing, T::from_usize(iy).unwrap() * self.spacing)
    }

    /// World position of particle `i` at its current offset.
    pub fn world_position(&self, i: usize) -> Vec3<T> {
        let (px, py) = self.particle_xy(i);
        self.origin
            .add(self.basis.u.scale(px))
            .add(self.basis.v.scale(py))
            .add(self.basis.normal.scale(self.offsets[i]))
    }

    /// In-plane coordinates of an arbitrary point, relative to the origin.
    pub fn in_plane(&self, p: Vec3<T>) -> (T, T) {
        let d = p.sub(self.origin);
        (d.dot(self.basis.u), d.dot(self.basis.v))
    }

    /// Signed distance of a point from the wall reference plane.
    pub fn plane_distance(&self, p: Vec3<T>) -> T {
        p.sub(self.origin).dot(self.basis.normal)
    }
}

/// One end-effector state along a printing trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep<T> {
    pub t: usize,
    /// Gun position, mm.
    pub tp: Vec3<T>,
    /// Gun velocity, m/s.
    pub velocity: Vec3<T>,
    /// Unit printing direction, pointing at the wall.
    pub direction: Vec3<T>,
    /// Working pressure, bar.
    pub pressure: T,
}

impl<T: Scalar> TrajectoryStep<T> {
    pub fn speed(&self) -> T {
        self.velocity.norm()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let tol = T::from_f64(1e-9).unwrap();
        if (self.direction.norm() - T::one()).abs() > tol {
            return Err(CoreError::Format(format!(
                "printing direction at step {} is not unit length",
                self.t
            )));
        }
        Ok(())
    }
}

/// Time-ordered end-effector states for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub steps: Vec<TrajectoryStep<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(steps: Vec<TrajectoryStep<T>>) -> Result<Self, CoreError> {
        for pair in steps.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(CoreError::Format("step indices must be strictly increasing".into()));
            }
        }
        Ok(Trajectory { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Spray influence region: a cone from the gun apex along the printing
/// direction, with its base disc on the wall plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprayCone<T> {
    pub apex: Vec3<T>,
    pub axis: Vec3<T>,
    pub base_radius: T,
    pub base_center: Vec3<T>,
}

impl<T: Scalar> SprayCone<T> {
    /// Build a cone whose base radius is `radius_factor` times the gun's
    /// distance to the wall plane.
    pub fn from_step(
        step: &TrajectoryStep<T>,
        grid: &WallGrid<T>,
        radius_factor: T,
    ) -> Result<Self, CoreError> {
        let base_center = project_to_wall(step.tp, step.direction, grid)?;
        let distance = grid.plane_distance(step.tp).abs();
        Ok(SprayCone {
            apex: step.tp,
            axis: step.direction,
            base_radius: radius_factor * distance,
            base_center,
        })
    }
}

/// Intersect the ray `(apex, axis)` with the wall reference plane.
pub fn project_to_wall<T: Scalar>(
    apex: Vec3<T>,
    axis: Vec3<T>,
    grid: &WallGrid<T>,
) -> Result<Vec3<T>, CoreError> {
    let denom = axis.dot(grid.basis.normal);
    if denom.abs() < T::from_f64(1e-9).unwrap() {
        return Err(CoreError::ParallelAxis);
    }
    let s = -grid.plane_distance(apex) / denom;
    Ok(apex.add(axis.scale(s)))
}

/// Indices of particles whose in-plane distance to the cone's base center is
/// strictly less than the base radius. Sorted by index.
///
/// The lattice is regular, so only the index window covering the disc's
/// bounding box is scanned; the disc test itself is exact.
pub fn particles_in_cone<T: Scalar>(cone: &SprayCone<T>, grid: &WallGrid<T>) -> Vec<usize> {
    let (cx, cy) = grid.in_plane(cone.base_center);
    let r = cone.base_radius;
    if r <= T::zero() {
        return Vec::new();
    }
    let s = grid.spacing;
    let lo_ix = ((cx - r) / s).floor().to_isize().unwrap_or(0).max(0) as usize;
    let hi_ix = ((cx + r) / s).ceil().to_isize().unwrap_or(-1).min(grid.nx as isize - 1);
    let lo_iy = ((cy - r) / s).floor().to_isize().unwrap_or(0).max(0) as usize;
    let hi_iy = ((cy + r) / s).ceil().to_isize().unwrap_or(-1).min(grid.ny as isize - 1);
    if hi_ix < 0 || hi_iy < 0 {
        return Vec::new();
    }
    let (hi_ix, hi_iy) = (hi_ix as usize, hi_iy as usize);

    let r2 = r * r;
    let mut members = Vec::new();
    for iy in lo_iy..=hi_iy {
        let py = T::from_usize(iy).unwrap() * s;
        for ix in lo_ix..=hi_ix {
            let px = T::from_usize(ix).unwrap() * s;
            let dx = px - cx;
            let dy = py - cy;
            if dx * dx + dy * dy < r2 {
                members.push(iy * grid.nx + ix);
            }
        }
    }
    members.sort_unstable();
    members
}

/// Indices of `points` strictly inside the disc around `center` (both in
/// in-plane coordinates). Sorted by index.
pub fn points_in_disc<T: Scalar>(points: &[(T, T)], center: (T, T), radius: T) -> Vec<usize> {
    let r2 = radius * radius;
    points
        .iter()
        .enumerate()
        .filter(|(_, &(x, y))| {
            let dx = x - center.0;
            let dy = y - center.1;
            dx * dx + dy * dy < r2
        })
        .map(|(i, _)| i)
        .collect()
}

/// All directed pairs `(i, j)` of grid particles with in-plane distance
/// strictly below `radius`, sorted by `(i, j)`.
pub fn radius_neighbors<T: Scalar>(grid: &WallGrid<T>, radius: T) -> Vec<(usize, usize)> {
    assert!(radius > T::zero(), "radius must be positive");
    let points: Vec<(T, T)> = (0..grid.particle_count()).map(|i| grid.particle_xy(i)).collect();
    radius_neighbors_points(&points, radius)
}

/// Fixed-radius neighbor pairs for arbitrary in-plane points.
///
/// Uses a uniform spatial hash with cell size = radius, so each query only
/// touches the 3×3 cell neighborhood. The hash map is never iterated, which
/// keeps the output order independent of hasher state.
pub fn radius_neighbors_points<T: Scalar>(points: &[(T, T)], radius: T) -> Vec<(usize, usize)> {
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let cell = |x: T, y: T| -> (i64, i64) {
        ((x / radius).floor().to_i64().unwrap(), (y / radius).floor().to_i64().unwrap())
    };
    for (i, &(x, y)) in points.iter().enumerate() {
        buckets.entry(cell(x, y)).or_default().push(i);
    }

    let r2 = radius * radius;
    let mut edges = Vec::new();
    let mut neighbors: Vec<usize> = Vec::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        neighbors.clear();
        let (cx, cy) = cell(x, y);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = buckets.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        if j == i {
                            continue;
                        }
                        let ddx = points[j].0 - x;
                        let ddy = points[j].1 - y;
                        if ddx * ddx + ddy * ddy < r2 {
                            neighbors.push(j);
                        }
                    }
                }
            }
        }
        neighbors.sort_unstable();
        edges.extend(neighbors.iter().map(|&j| (i, j)));
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize, spacing: f64) -> WallGrid<f64> {
        WallGrid::new(nx, ny, spacing, Vec3::zero())
    }

    #[test]
    fn axis_aligned_projection() {
        let g = grid(2, 2, 10.0);
        let p = project_to_wall(Vec3::new(0.0, 0.0, 400.0), Vec3::new(0.0, 0.0, -1.0), &g).unwrap();
        assert_eq!(p.to_array(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn tilted_projection_45_degrees() {
        let g = grid(2, 2, 10.0);
        // (0, 0, -1) rotated 45° about y tilts toward +x.
        let axis = Vec3::new(1.0, 0.0, -1.0).normalized();
        let p = project_to_wall(Vec3::new(100.0, 0.0, 400.0), axis, &g).unwrap();
        assert!((p.x - 500.0).abs() < 1e-9);
        assert!(p.y.abs() < 1e-9 && p.z.abs() < 1e-9);
    }

    #[test]
    fn parallel_axis_is_rejected() {
        let g = grid(2, 2, 10.0);
        let r = project_to_wall(Vec3::new(0.0, 0.0, 400.0), Vec3::new(1.0, 0.0, 0.0), &g);
        assert!(matches!(r, Err(CoreError::ParallelAxis)));
    }

    #[test]
    fn random_projections_match_parametric_solve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = grid(4, 4, 25.0);
        for _ in 0..200 {
            let apex = Vec3::new(
                rng.gen_range(-500.0..500.0),
                rng.gen_range(-500.0..500.0),
                rng.gen_range(100.0..600.0),
            );
            let axis = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..-0.2),
            )
            .normalized();
            let p = project_to_wall(apex, axis, &g).unwrap();
            // Independent solve of apex + s·axis with z = 0.
            let s = -apex.z / axis.z;
            assert!((p.x - (apex.x + s * axis.x)).abs() < 1e-9);
            assert!((p.y - (apex.y + s * axis.y)).abs() < 1e-9);
            assert!(p.z.abs() < 1e-9);
        }
    }

    #[test]
    fn cone_membership_boundary_is_strict() {
        let g = grid(3, 1, 30.0);
        let cone = SprayCone {
            apex: Vec3::new(0.0, 0.0, 60.0),
            axis: Vec3::new(0.0, 0.0, -1.0),
            base_radius: 30.0,
            base_center: Vec3::zero(),
        };
        // Particle 0 at the center is a member, particle 1 at exactly 30 mm is not.
        assert_eq!(particles_in_cone(&cone, &g), vec![0]);
    }

    #[test]
    fn cone_membership_matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let g = grid(rng.gen_range(10..40), rng.gen_range(10..40), rng.gen_range(5.0..30.0));
            let cone = SprayCone {
                apex: Vec3::new(0.0, 0.0, 100.0),
                axis: Vec3::new(0.0, 0.0, -1.0),
                base_radius: rng.gen_range(1.0..400.0),
                base_center: Vec3::new(
                    rng.gen_range(-100.0..1000.0),
                    rng.gen_range(-100.0..1000.0),
                    0.0,
                ),
            };
            let fast = particles_in_cone(&cone, &g);
            let (cx, cy) = g.in_plane(cone.base_center);
            let brute: Vec<usize> = (0..g.particle_count())
                .filter(|&i| {
                    let (x, y) = g.particle_xy(i);
                    let (dx, dy) = (x - cx, y - cy);
                    dx * dx + dy * dy < cone.base_radius * cone.base_radius
                })
                .collect();
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn neighbor_boundary_is_strict() {
        // Two particles exactly 30 mm apart, R = 30 mm: no edge.
        let g = grid(2, 1, 30.0);
        assert!(radius_neighbors(&g, 30.0).is_empty());
    }

    #[test]
    fn three_collinear_particles_give_four_directed_edges() {
        let g = grid(3, 1, 10.0);
        let edges = radius_neighbors(&g, 15.0);
        assert_eq!(edges, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
    }

    #[test]
    fn neighbors_match_brute_force_on_random_grids() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(50..500);
            let points: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0)))
                .collect();
            let r = rng.gen_range(5.0..80.0);
            let fast = radius_neighbors_points(&points, r);
            let mut brute = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let dx = points[j].0 - points[i].0;
                    let dy = points[j].1 - points[i].1;
                    if dx * dx + dy * dy < r * r {
                        brute.push((i, j));
                    }
                }
            }
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn neighbor_output_is_reproducible() {
        let g = grid(12, 9, 23.0);
        let a = radius_neighbors(&g, 30.0);
        let b = radius_neighbors(&g, 30.0);
        assert_eq!(a, b);
    }

    #[test]
    fn world_positions_respect_offsets() {
        let mut g = grid(2, 2, 10.0);
        g.offsets_mut()[3] = 2.5;
        assert_eq!(g.world_position(3).to_array(), [10.0, 10.0, 2.5]);
        assert_eq!(g.world_position(0).to_array(), [0.0, 0.0, 0.0]);
    }
}
