//! Collocation point sets with quadrature weights.
//!
//! Three domain families are supported: the unit interval, the L-shaped
//! domain `(-1,1)^2` minus the closed fourth-quadrant block, and unit
//! balls of even dimension. Weights always sum to the domain measure, so
//! weighted sums are Monte Carlo (or midpoint) estimates of integrals.
//!
//! Randomness is drawn from counter-style streams derived from a master
//! seed via [`stream_seed`]: every (purpose, draw index) pair owns an
//! independent, reproducible stream.

use std::f64::consts::PI;
use std::io::Write;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("the interval boundary is exactly its two endpoints; requested {got} points")]
    IntervalBoundaryCount { got: usize },
    #[error("batch size must be positive")]
    EmptyBatch,
}

/// Computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// `(0, 1)`.
    Interval,
    /// `(-1,1)^2` without `[0,1) x (-1,0]`; re-entrant corner at the origin.
    LShape,
    /// Unit ball in `R^dim` centered at the origin.
    Ball { dim: usize },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval => 1,
            Domain::LShape => 2,
            Domain::Ball { dim } => *dim,
        }
    }

    /// Lebesgue measure of the domain.
    pub fn volume(&self) -> f64 {
        match self {
            Domain::Interval => 1.0,
            Domain::LShape => 3.0,
            Domain::Ball { dim } => ball_volume(*dim),
        }
    }

    /// Measure of the boundary. The interval boundary carries counting
    /// measure (weight one per endpoint).
    pub fn surface(&self) -> f64 {
        match self {
            Domain::Interval => 2.0,
            Domain::LShape => 8.0,
            Domain::Ball { dim } => *dim as f64 * ball_volume(*dim),
        }
    }

    /// Membership test for the open domain. For the L-shape the removed
    /// block (including its two inner edges) is excluded.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Interval => x[0] > 0.0 && x[0] < 1.0,
            Domain::LShape => {
                let (a, b) = (x[0], x[1]);
                a > -1.0 && a < 1.0 && b > -1.0 && b < 1.0 && !(a >= 0.0 && b <= 0.0)
            }
            Domain::Ball { .. } => x.iter().map(|v| v * v).sum::<f64>() < 1.0,
        }
    }
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    // pi^{d/2} / Gamma(d/2 + 1), with the half-integer Gamma expanded.
    if d % 2 == 0 {
        let k = d / 2;
        let mut v = 1.0;
        for i in 1..=k {
            v *= PI / i as f64;
        }
        v
    } else {
        // Gamma(d/2 + 1) = sqrt(pi) (d!!) / 2^{(d+1)/2}
        let mut double_fact = 1.0;
        let mut i = d as i64;
        while i > 1 {
            double_fact *= i as f64;
            i -= 2;
        }
        PI.powf(d as f64 / 2.0) / (PI.sqrt() * double_fact / 2f64.powi((d as i32 + 1) / 2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Interior,
    Boundary,
}

/// Points with quadrature weights; coordinates are stored flat.
#[derive(Debug, Clone)]
pub struct PointSet {
    coords: Vec<f64>,
    dim: usize,
    pub weights: Vec<f64>,
    pub kind: PointKind,
    pub domain: Domain,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords
            .chunks_exact(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// Exact coordinate-wise equality, used to enforce that a multiplier
    /// and the boundary set it pairs with are the same object.
    pub fn same_points(&self, other: &PointSet) -> bool {
        self.dim == other.dim && self.coords == other.coords
    }

    /// Assemble from flat coordinates and explicit weights.
    pub fn from_parts(
        coords: Vec<f64>,
        dim: usize,
        weights: Vec<f64>,
        kind: PointKind,
        domain: Domain,
    ) -> Self {
        assert_eq!(coords.len(), dim * weights.len());
        PointSet {
            coords,
            dim,
            weights,
            kind,
            domain,
        }
    }

    /// A set with no points (hard-BC runs have no boundary term).
    pub fn empty(domain: Domain, kind: PointKind) -> Self {
        PointSet {
            coords: Vec::new(),
            dim: domain.dim(),
            weights: Vec::new(),
            kind,
            domain,
        }
    }

    fn from_rows(rows: Vec<Vec<f64>>, w: f64, kind: PointKind, domain: Domain) -> Self {
        let dim = domain.dim();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            coords.extend_from_slice(r);
        }
        let weights = vec![w; rows.len()];
        PointSet {
            coords,
            dim,
            weights,
            kind,
            domain,
        }
    }

    /// Debug dump: one row per point, coordinates then weight.
    pub fn write_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (p, w) in self.iter() {
            for c in p {
                write!(f, "{c:.17e},")?;
            }
            writeln!(f, "{w:.17e}")?;
        }
        Ok(())
    }
}

/// Derive the seed of an independent stream from the master seed, a
/// purpose label and a draw counter (splitmix-style mixing).
pub fn stream_seed(master: u64, purpose: StreamPurpose, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(1 + purpose as u64))
        .wrapping_add(0x517c_c1b7_2722_0a95_u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
pub enum StreamPurpose {
    ParamInit = 1,
    InteriorBatch = 2,
    BoundaryBatch = 3,
    MultiplierSet = 4,
    EvalGrid = 5,
    BoundaryEval = 6,
}

/// Interior collocation points.
///
/// * Interval: deterministic midpoint rule (the seed is ignored).
/// * L-shape: uniform rejection sampling in the square, weight `3/n`;
///   a disc of radius 1e-6 around the re-entrant corner is excluded so
///   manufactured sources stay finite.
/// * Ball: uniform via direction times `U^{1/d}` radius law, weight `V_d/n`.
pub fn sample_interior(domain: Domain, n: usize, seed: u64) -> Result<PointSet, SampleError> {
    if n == 0 {
        return Err(SampleError::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = match domain {
        Domain::Interval => (0..n)
            .map(|i| vec![(i as f64 + 0.5) / n as f64])
            .collect(),
        Domain::LShape => {
            let u = Uniform::new(-1.0, 1.0);
            (0..n)
                .map(|_| loop {
                    let (a, b) = (u.sample(&mut rng), u.sample(&mut rng));
                    if !(a >= 0.0 && b <= 0.0) && a * a + b * b > 1e-12 {
                        break vec![a, b];
                    }
                })
                .collect()
        }
        Domain::Ball { dim } => (0..n)
            .map(|_| {
                let mut x = gaussian_direction(&mut rng, dim);
                let r: f64 = rng.gen::<f64>().powf(1.0 / dim as f64);
                x.iter_mut().for_each(|v| *v *= r);
                x
            })
            .collect(),
    };
    let w = domain.volume() / n as f64;
    Ok(PointSet::from_rows(rows, w, PointKind::Interior, domain))
}

/// Boundary collocation points.
///
/// * Interval: exactly the two endpoints with weight one each (counting
///   measure); any other count is rejected.
/// * L-shape: uniform over the eight unit-or-double segments by arc
///   length, weight `8/n`. The re-entrant edges belong to the boundary
///   and the corner itself is a valid sample.
/// * Ball: normalized Gaussian vectors, weight `S_{d-1}/n`.
pub fn sample_boundary(domain: Domain, n: usize, seed: u64) -> Result<PointSet, SampleError> {
    if n == 0 {
        return Err(SampleError::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = match domain {
        Domain::Interval => {
            if n != 2 {
                return Err(SampleError::IntervalBoundaryCount { got: n });
            }
            vec![vec![0.0], vec![1.0]]
        }
        Domain::LShape => {
            let u = Uniform::new(0.0, 8.0);
            (0..n)
                .map(|_| lshape_boundary_point(u.sample(&mut rng)))
                .collect()
        }
        Domain::Ball { dim } => (0..n).map(|_| gaussian_direction(&mut rng, dim)).collect(),
    };
    let w = domain.surface() / n as f64;
    Ok(PointSet::from_rows(rows, w, PointKind::Boundary, domain))
}

/// Deterministic boundary grid (arc-length equispaced), used for error
/// reporting on the L-shape.
pub fn lshape_boundary_grid(n: usize) -> PointSet {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| lshape_boundary_point(8.0 * (i as f64 + 0.5) / n as f64))
        .collect();
    PointSet::from_rows(rows, 8.0 / n as f64, PointKind::Boundary, Domain::LShape)
}

/// Walk the L-shape boundary by arc length `t` in `[0, 8)`.
///
/// Segment order: left edge up, top edge right, outer right edge down,
/// re-entrant horizontal in, re-entrant vertical down, bottom edge left.
pub(crate) fn lshape_boundary_point(t: f64) -> Vec<f64> {
    debug_assert!((0.0..8.0).contains(&t));
    if t < 2.0 {
        vec![-1.0, -1.0 + t]
    } else if t < 4.0 {
        vec![-1.0 + (t - 2.0), 1.0]
    } else if t < 5.0 {
        vec![1.0, 1.0 - (t - 4.0)]
    } else if t < 6.0 {
        vec![1.0 - (t - 5.0), 0.0]
    } else if t < 7.0 {
        vec![0.0, -(t - 6.0)]
    } else {
        vec![-(t - 7.0), -1.0]
    }
}

fn gaussian_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return x.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Batch refresh policy: `every == 0` means the initial draw is kept for
/// the whole run. The multiplier's point set is never resampled and does
/// not go through this policy.
#[derive(Debug, Clone, Copy)]
pub struct ResamplePlan {
    pub every: u64,
    pub batch_interior: usize,
    pub batch_boundary: usize,
}

impl ResamplePlan {
    pub fn new(every: u64, batch_interior: usize, batch_boundary: usize) -> Result<Self, SampleError> {
        if batch_interior == 0 || batch_boundary == 0 {
            return Err(SampleError::EmptyBatch);
        }
        Ok(ResamplePlan {
            every,
            batch_interior,
            batch_boundary,
        })
    }

    /// Index of the draw active at a given (zero-based) global epoch.
    /// With `every = 10`: epochs 0..=9 share draw 0, epoch 10 starts draw 1.
    pub fn draw_index(&self, epoch: u64) -> u64 {
        if self.every == 0 {
            0
        } else {
            epoch / self.every
        }
    }

    /// Whether the sets must be redrawn upon entering `epoch`.
    pub fn redraw_at(&self, epoch: u64) -> bool {
        epoch == 0 || (self.every != 0 && epoch % self.every == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_midpoints() {
        let s = sample_interior(Domain::Interval, 4, 123).unwrap();
        let pts: Vec<f64> = s.iter().map(|(p, _)| p[0]).collect();
        assert_eq!(pts, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(s.weights.iter().all(|&w| w == 0.25));
    }

    #[test]
    fn interval_boundary_is_the_two_endpoints() {
        let s = sample_boundary(Domain::Interval, 2, 5).unwrap();
        assert_eq!(s.point(0), &[0.0]);
        assert_eq!(s.point(1), &[1.0]);
        assert_eq!(s.weights, vec![1.0, 1.0]);
        assert!(matches!(
            sample_boundary(Domain::Interval, 7, 5),
            Err(SampleError::IntervalBoundaryCount { got: 7 })
        ));
    }

    #[test]
    fn weights_sum_to_measures() {
        for (domain, n) in [
            (Domain::Interval, 64),
            (Domain::LShape, 501),
            (Domain::Ball { dim: 2 }, 1000),
            (Domain::Ball { dim: 6 }, 777),
        ] {
            let s = sample_interior(domain, n, 9).unwrap();
            let total: f64 = s.weights.iter().sum();
            assert!(
                (total - domain.volume()).abs() <= 1e-12 * domain.volume(),
                "{domain:?} interior"
            );
            if !matches!(domain, Domain::Interval) {
                let b = sample_boundary(domain, n, 10).unwrap();
                let total: f64 = b.weights.iter().sum();
                assert!(
                    (total - domain.surface()).abs() <= 1e-12 * domain.surface(),
                    "{domain:?} boundary"
                );
            }
        }
        // V_2 = pi exactly.
        let s = sample_interior(Domain::Ball { dim: 2 }, 64, 1).unwrap();
        assert!((s.weights.iter().sum::<f64>() - std::f64::consts::PI).abs() <= 1e-12);
    }

    #[test]
    fn ball_volumes_match_closed_forms() {
        assert!((ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((ball_volume(2) - PI).abs() < 1e-14);
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((ball_volume(4) - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn all_points_lie_in_their_domain() {
        for domain in [Domain::LShape, Domain::Ball { dim: 4 }] {
            let s = sample_interior(domain, 2000, 3).unwrap();
            for (p, _) in s.iter() {
                assert!(domain.contains(p), "{p:?} outside {domain:?}");
            }
        }
        let b = sample_boundary(Domain::Ball { dim: 4 }, 2000, 4).unwrap();
        for (p, _) in b.iter() {
            let r: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() <= 1e-12);
        }
        let lb = sample_boundary(Domain::LShape, 2000, 4).unwrap();
        for (p, _) in lb.iter() {
            let on = p[0].abs() == 1.0
                || p[1].abs() == 1.0
                || (p[1] == 0.0 && (0.0..=1.0).contains(&p[0]))
                || (p[0] == 0.0 && (-1.0..=0.0).contains(&p[1]));
            assert!(on, "{p:?} not on the L-shape boundary");
        }
    }

    #[test]
    fn lshape_membership_convention() {
        assert!(!Domain::LShape.contains(&[0.5, -0.5]));
        assert!(Domain::LShape.contains(&[-0.5, -0.5]));
        assert!(Domain::LShape.contains(&[0.5, 0.5]));
        // Re-entrant edges and the corner are boundary, not interior.
        assert!(!Domain::LShape.contains(&[0.5, 0.0]));
        assert!(!Domain::LShape.contains(&[0.0, -0.5]));
        assert!(!Domain::LShape.contains(&[0.0, 0.0]));
        // The corner is reachable as a boundary sample (t = 6).
        assert_eq!(lshape_boundary_point(6.0), vec![0.0, 0.0]);
    }

    #[test]
    fn lshape_quadrant_fraction_is_one_third() {
        // P(x > 0, y > 0) = 1/3 under the uniform law on the L-shape.
        let n = 30_000;
        let s = sample_interior(Domain::LShape, n, 2024).unwrap();
        let hits = s.iter().filter(|(p, _)| p[0] > 0.0 && p[1] > 0.0).count();
        let p = 1.0 / 3.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let frac = hits as f64 / n as f64;
        assert!(
            (frac - p).abs() <= 3.0 * sigma,
            "frac {frac} vs 1/3 (3 sigma = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn lshape_boundary_histogram_matches_segment_lengths() {
        // Long edges (length 2) should receive twice the mass of unit edges.
        let n = 40_000;
        let b = sample_boundary(Domain::LShape, n, 77).unwrap();
        let mut counts = [0usize; 6];
        for (p, _) in b.iter() {
            let idx = if p[0] == -1.0 {
                0 // left
            } else if p[1] == 1.0 {
                1 // top
            } else if p[0] == 1.0 {
                2 // outer right
            } else if p[1] == 0.0 && p[0] > 0.0 {
                3
            } else if p[0] == 0.0 {
                4
            } else {
                5 // bottom
            };
            counts[idx] += 1;
        }
        let lengths = [2.0, 2.0, 1.0, 1.0, 1.0, 1.0];
        for (c, len) in counts.iter().zip(lengths) {
            let p = len / 8.0;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let frac = *c as f64 / n as f64;
            assert!((frac - p).abs() <= 3.0 * sigma, "frac {frac} for p {p}");
        }
    }

    #[test]
    fn monte_carlo_integrates_x_squared_on_the_ball() {
        // int_{B_d} |x|^2 dx = V_d * d / (d + 2); standard error from the
        // sample variance, checked at the 3-sigma level.
        let d = 4;
        let exact = ball_volume(d) * d as f64 / (d as f64 + 2.0);
        for (n, seed) in [(1000usize, 11u64), (10_000, 12), (100_000, 13)] {
            let s = sample_interior(Domain::Ball { dim: d }, n, seed).unwrap();
            let vals: Vec<f64> = s.iter().map(|(p, _)| p.iter().map(|v| v * v).sum()).collect();
            let mean: f64 = vals.iter().sum::<f64>() / n as f64;
            let var: f64 =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
            let est = ball_volume(d) * mean;
            let se = ball_volume(d) * (var / n as f64).sqrt();
            assert!(
                (est - exact).abs() <= 3.0 * se,
                "n={n}: est {est}, exact {exact}, 3se {}",
                3.0 * se
            );
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = sample_interior(Domain::LShape, 100, stream_seed(9, StreamPurpose::InteriorBatch, 0)).unwrap();
        let b = sample_interior(Domain::LShape, 100, stream_seed(9, StreamPurpose::InteriorBatch, 0)).unwrap();
        assert!(a.same_points(&b));
        let c = sample_interior(Domain::LShape, 100, stream_seed(9, StreamPurpose::InteriorBatch, 1)).unwrap();
        assert!(!a.same_points(&c));
    }

    #[test]
    fn resample_plan_schedule() {
        let plan = ResamplePlan::new(10, 8, 4).unwrap();
        assert!(plan.redraw_at(0));
        for e in 1..10 {
            assert!(!plan.redraw_at(e));
            assert_eq!(plan.draw_index(e), 0);
        }
        assert!(plan.redraw_at(10));
        assert_eq!(plan.draw_index(10), 1);
        let fixed = ResamplePlan::new(0, 8, 4).unwrap();
        assert!(fixed.redraw_at(0));
        for e in 1..100 {
            assert!(!fixed.redraw_at(e));
        }
        assert!(ResamplePlan::new(10, 0, 4).is_err());
    }
}
