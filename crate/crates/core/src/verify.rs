//! Randomized property checks of the surface motion.
//!
//! Each mode draws random sphere complexes and random surface samples from
//! a seeded generator, integrates the samples, and compares observed ratios
//! against the analytic bounds:
//!
//! - `speed`: `|dx/dtau| 2 |xi| = 1`.
//! - `length-lemma`: after `dt = (2 theta - theta^2) rho0^2` the distance
//!   ratio lies in `[1 - theta, 1 / (1 - theta)]`.
//! - `height-lemma`: the same bounds for the triangle height, and the
//!   circumradius ratio stays below `1 / (1 - theta)^3`. Triples are drawn
//!   either as mesh-sized triangles obeying the Size Bounds at `Q1` or as
//!   arbitrary nearby samples; the height bound can fail for slivers whose
//!   edges are comparable to the length scale, which the second population
//!   exposes.
//! - `reflection`: folding a segment across the cell faces it crosses
//!   preserves its length, does not lengthen the chord, and maps the far
//!   endpoint to a point whose velocity under the near cell's family equals
//!   its own.
//!
//! Any trial outside the bounds by more than the tolerance is recorded with
//! enough data to replay it exactly.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MixedComplex, PatchKind, Vec3, WeightedSphere};
use crate::kinetics::{
    advance, family_velocity, reflect_segment, velocity, StepControl, SurfacePoint,
};
use crate::mesh::circumradius;
use crate::mesh::sampling::surface_candidates;
use crate::scheduler::ParameterSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyMode {
    Speed,
    LengthLemma,
    HeightLemma,
    Reflection,
}

impl VerifyMode {
    pub const ALL: [VerifyMode; 4] = [
        VerifyMode::Speed,
        VerifyMode::LengthLemma,
        VerifyMode::HeightLemma,
        VerifyMode::Reflection,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VerifyMode::Speed => "speed",
            VerifyMode::LengthLemma => "length-lemma",
            VerifyMode::HeightLemma => "height-lemma",
            VerifyMode::Reflection => "reflection",
        }
    }
}

impl fmt::Display for VerifyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VerifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VerifyMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown verify mode `{s}`")))
    }
}

/// How the samples of one trial are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Population {
    /// Nearby or random samples from a pool spaced a quarter length scale
    /// apart.
    Neighbours,
    /// Triangles on the surface satisfying [L] and [U] at `Q1`; pairs and
    /// single samples fall back to `Neighbours`.
    MeshSized,
}

impl FromStr for Population {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neighbours" => Ok(Population::Neighbours),
            "mesh-sized" => Ok(Population::MeshSized),
            _ => Err(Error::invalid(format!("unknown population `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub mode: VerifyMode,
    pub trials: usize,
    pub seed: u64,
    /// Upper end of the random `theta` range.
    pub max_theta: f64,
    /// Allowed excess beyond the lemma bounds.
    pub tolerance: f64,
    /// Allowed relative error of the speed law and the reflection identities.
    pub identity_tolerance: f64,
    /// Trials drawn from each random complex.
    pub trials_per_complex: usize,
    pub control: StepControl,
    pub population: Population,
    /// Size Bounds of the mesh-sized population.
    pub params: ParameterSet,
}

impl VerifyConfig {
    pub fn new(mode: VerifyMode, trials: usize, seed: u64) -> Self {
        VerifyConfig {
            mode,
            trials,
            seed,
            max_theta: 0.6,
            tolerance: 1e-6,
            identity_tolerance: 1e-9,
            trials_per_complex: 25,
            control: StepControl {
                tolerance: 1e-11,
                crossing_tolerance: 1e-13,
            },
            population: if mode == VerifyMode::HeightLemma {
                Population::MeshSized
            } else {
                Population::Neighbours
            },
            params: ParameterSet::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("verify needs at least one trial"));
        }
        if self.trials_per_complex == 0 {
            return Err(Error::invalid("trials per complex must be positive"));
        }
        if !(self.max_theta > 0.0 && self.max_theta < 1.0) {
            return Err(Error::invalid(format!(
                "theta range (0, {}) must lie in (0, 1)",
                self.max_theta
            )));
        }
        if !(self.tolerance >= 0.0 && self.identity_tolerance >= 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        Ok(())
    }
}

/// Everything needed to replay one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialCase {
    pub mode: VerifyMode,
    pub index: usize,
    /// `[x, y, z, w]` per sphere.
    pub spheres: Vec<[f64; 4]>,
    /// Kinetic time of the samples.
    pub tau: f64,
    pub points: Vec<[f64; 3]>,
    pub theta: f64,
}

/// Outcome of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    /// Circumradius ratio and its bound (height mode).
    pub radius_ratio: Option<f64>,
    pub radius_bound: Option<f64>,
    /// Relative velocity mismatch at the folded endpoint (reflection mode).
    pub velocity_mismatch: Option<f64>,
    /// `|u - image| / |u - v|` (reflection mode).
    pub chord_ratio: Option<f64>,
    pub cross_cell: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub case: TrialCase,
    pub observation: Observation,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PatchCounts {
    pub sphere: usize,
    pub hyperboloid_one_sheet: usize,
    pub hyperboloid_two_sheet: usize,
}

impl PatchCounts {
    fn add(&mut self, kind: PatchKind) {
        match kind {
            PatchKind::Sphere => self.sphere += 1,
            PatchKind::HyperboloidOneSheet => self.hyperboloid_one_sheet += 1,
            PatchKind::HyperboloidTwoSheet => self.hyperboloid_two_sheet += 1,
        }
    }
}

/// Two samples on a shrinking sphere patch, whose distance ratio attains
/// the lower bound `1 - theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub theta: f64,
    pub ratio: f64,
    pub expected: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mode: VerifyMode,
    pub population: Population,
    pub seed: u64,
    pub trials: usize,
    /// Draws discarded because a sample reached an apex, left the domain or
    /// crossed a cell edge.
    pub skipped: usize,
    pub cross_cell: usize,
    /// Patch type of the first sample of each trial.
    pub patches: PatchCounts,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest `lower - ratio` and `ratio - upper`; negative inside bounds.
    pub worst_lower_excess: f64,
    pub worst_upper_excess: f64,
    pub max_radius_ratio_over_bound: Option<f64>,
    pub max_velocity_mismatch: Option<f64>,
    pub max_chord_ratio: Option<f64>,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
            && self
                .witness
                .as_ref()
                .is_none_or(|w| w.error <= self.tolerance)
    }
}

/// Random overlapping spheres: each new center sits at a random distance
/// from a previous one so that the union stays connected.
pub fn random_spheres<R: Rng>(rng: &mut R, count: usize) -> Vec<WeightedSphere> {
    let mut out: Vec<WeightedSphere> = Vec::with_capacity(count);
    for _ in 0..count {
        let r: f64 = rng.gen_range(0.7..1.3);
        let center = match out.choose(rng) {
            None => Vec3::zeros(),
            Some(anchor) => {
                let dir = random_direction(rng);
                let ra = anchor.weight.sqrt();
                anchor.center + rng.gen_range(0.6..1.1) * (ra + r) * dir
            }
        };
        out.push(WeightedSphere {
            center,
            weight: r * r,
        });
    }
    out
}

fn random_direction<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// A random complex with a pool of surface samples at one kinetic time.
struct Scene {
    spheres: Vec<WeightedSphere>,
    complex: MixedComplex,
    tau: f64,
    points: Vec<SurfacePoint>,
}

const MIN_RHO: f64 = 1e-3;
const POOL_SPACING: f64 = 0.25;

impl Scene {
    fn random<R: Rng>(rng: &mut R) -> Result<Self> {
        for _ in 0..100 {
            let count = rng.gen_range(2..=5);
            let spheres = random_spheres(rng, count);
            let min_w = spheres
                .iter()
                .map(|s| s.weight)
                .fold(f64::INFINITY, f64::min);
            let t = -rng.gen_range(0.0..0.5) * min_w;
            let tau = crate::kinetic_time(t);
            let complex = match MixedComplex::new(&spheres) {
                Ok(c) => c,
                Err(Error::Degenerate { .. }) => continue,
                Err(e) => return Err(e),
            };
            let points: Vec<SurfacePoint> = surface_candidates(&complex, tau, POOL_SPACING, rng)
                .into_iter()
                .filter(|p| p.rho > MIN_RHO)
                .collect();
            if points.len() >= 8 {
                return Ok(Scene {
                    spheres,
                    complex,
                    tau,
                    points,
                });
            }
        }
        Err(Error::numeric(
            "could not draw a non-degenerate random complex",
        ))
    }

    fn from_case(case: &TrialCase) -> Result<(Self, Vec<SurfacePoint>)> {
        let spheres = case
            .spheres
            .iter()
            .map(|s| WeightedSphere::new(Vec3::new(s[0], s[1], s[2]), s[3]))
            .collect::<Result<Vec<_>>>()?;
        let complex = MixedComplex::new(&spheres)?;
        let points = case
            .points
            .iter()
            .map(|p| SurfacePoint::at(&complex, Vec3::from(*p), case.tau))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            Scene {
                spheres,
                complex,
                tau: case.tau,
                points: Vec::new(),
            },
            points,
        ))
    }

    /// Index of a sample near `points[i]`, in another cell when `other_cell`.
    fn neighbour<R: Rng>(&self, i: usize, other_cell: bool, rng: &mut R) -> Option<usize> {
        let p = &self.points[i];
        let mut near: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .filter(|(j, q)| *j != i && (!other_cell || q.cell != p.cell))
            .map(|(j, q)| ((q.world - p.world).norm(), j))
            .filter(|(d, _)| *d > 0.0)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        near.truncate(12);
        near.choose(rng).map(|&(_, j)| j)
    }

    /// Draw the sample indices of one trial.
    fn pick<R: Rng>(&self, mode: VerifyMode, rng: &mut R) -> Option<Vec<usize>> {
        let i = rng.gen_range(0..self.points.len());
        match mode {
            VerifyMode::Speed => Some(vec![i]),
            VerifyMode::LengthLemma | VerifyMode::Reflection => {
                let roll: f64 = rng.gen();
                let j = if roll < 0.4 {
                    self.neighbour(i, false, rng)?
                } else if roll < 0.8 {
                    self.neighbour(i, true, rng)?
                } else {
                    rng.gen_range(0..self.points.len())
                };
                (j != i).then(|| vec![i, j])
            }
            VerifyMode::HeightLemma => {
                let j = self.neighbour(i, rng.gen_bool(0.5), rng)?;
                let k = self.neighbour(i, rng.gen_bool(0.5), rng)?;
                (j != k).then(|| vec![i, j, k])
            }
        }
    }

    /// A triangle through a random sample, spanned in its tangent plane and
    /// projected onto the surface, kept only if it satisfies [L] and [U] at
    /// `Q1`. Half the draws start next to a cell face so that many
    /// triangles straddle cells.
    fn mesh_triangle<R: Rng>(
        &self,
        params: &ParameterSet,
        rng: &mut R,
    ) -> Result<Option<Vec<SurfacePoint>>> {
        let near_face: Vec<usize> = (0..self.points.len())
            .filter(|&i| {
                let p = &self.points[i];
                self.complex.cell(p.cell).slack(&p.world) < 0.2 * p.rho
            })
            .collect();
        let i = match near_face.choose(rng) {
            Some(&i) if rng.gen_bool(0.5) => i,
            _ => rng.gen_range(0..self.points.len()),
        };
        let u = &self.points[i];
        let cell = self.complex.cell(u.cell);
        let normal = cell.frame.level_gradient(&u.world).normalize();
        let t1 = normal.cross(&random_direction(rng));
        if t1.norm() < 1e-3 {
            return Ok(None);
        }
        let t1 = t1.normalize();
        let t2 = normal.cross(&t1);
        let (_, high) = params.triangle_thresholds();
        let radius = rng.gen_range(0.2..1.0) * high * u.rho;
        let center = u.world - radius * t1;
        let mut points = vec![u.clone()];
        for _ in 0..2 {
            let phi: f64 = rng.gen_range(0.3..(2.0 * std::f64::consts::PI - 0.3));
            let x = center + radius * (phi.cos() * t1 + phi.sin() * t2);
            match SurfacePoint::on_surface(&self.complex, x, self.tau) {
                Ok(p) => points.push(p),
                Err(e) if skippable(&e) || matches!(e, Error::ProjectionFailed { .. }) => {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            }
        }
        let rho_min = points.iter().map(|p| p.rho).fold(f64::INFINITY, f64::min);
        let r = circumradius(&points[0].world, &points[1].world, &points[2].world);
        let (edge_low, _) = params.edge_thresholds();
        let edges_ok = (0..3).all(|k| {
            let (a, b) = (&points[k], &points[(k + 1) % 3]);
            0.5 * (a.world - b.world).norm() / a.rho.max(b.rho) > edge_low
        });
        Ok((edges_ok && r / rho_min < high && rho_min > MIN_RHO).then_some(points))
    }

    fn case(
        &self,
        mode: VerifyMode,
        index: usize,
        points: &[SurfacePoint],
        theta: f64,
    ) -> TrialCase {
        TrialCase {
            mode,
            index,
            spheres: self
                .spheres
                .iter()
                .map(|s| [s.center.x, s.center.y, s.center.z, s.weight])
                .collect(),
            tau: self.tau,
            points: points
                .iter()
                .map(|p| [p.world.x, p.world.y, p.world.z])
                .collect(),
            theta,
        }
    }
}

/// Smallest distance from a vertex to the line through the other two.
pub fn triangle_height(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let area2 = (b - a).cross(&(c - a)).norm();
    let longest = (b - a).norm().max((c - b).norm()).max((a - c).norm());
    if longest == 0.0 {
        0.0
    } else {
        area2 / longest
    }
}

/// Lower and upper lemma bounds for `theta`.
pub fn lemma_bounds(theta: f64) -> (f64, f64) {
    (1.0 - theta, 1.0 / (1.0 - theta))
}

fn observe(
    complex: &MixedComplex,
    mode: VerifyMode,
    points: &[SurfacePoint],
    theta: f64,
    control: StepControl,
) -> Result<Observation> {
    let cross_cell = points.iter().any(|p| p.cell != points[0].cell);
    let mut obs = Observation {
        ratio: f64::NAN,
        lower: 1.0,
        upper: 1.0,
        radius_ratio: None,
        radius_bound: None,
        velocity_mismatch: None,
        chord_ratio: None,
        cross_cell,
    };
    match mode {
        VerifyMode::Speed => {
            let p = &points[0];
            obs.ratio = velocity(complex, p)?.norm() * 2.0 * p.rho;
        }
        VerifyMode::LengthLemma | VerifyMode::HeightLemma => {
            let rho0 = points.iter().map(|p| p.rho).fold(f64::INFINITY, f64::min);
            let dt = (2.0 * theta - theta * theta) * rho0 * rho0;
            let moved = points
                .iter()
                .map(|p| advance(complex, p, dt, control))
                .collect::<Result<Vec<_>>>()?;
            let x0: Vec<Vec3> = points.iter().map(|p| p.world).collect();
            let x1: Vec<Vec3> = moved.iter().map(|p| p.world).collect();
            (obs.lower, obs.upper) = lemma_bounds(theta);
            if mode == VerifyMode::LengthLemma {
                obs.ratio = (x1[1] - x1[0]).norm() / (x0[1] - x0[0]).norm();
            } else {
                obs.ratio = triangle_height(&x1[0], &x1[1], &x1[2])
                    / triangle_height(&x0[0], &x0[1], &x0[2]);
                obs.radius_ratio = Some(
                    circumradius(&x1[0], &x1[1], &x1[2]) / circumradius(&x0[0], &x0[1], &x0[2]),
                );
                obs.radius_bound = Some((1.0 - theta).powi(-3));
            }
        }
        VerifyMode::Reflection => {
            let (u, v) = (points[0].world, points[1].world);
            let path = reflect_segment(complex, &u, &v)?;
            let len = (v - u).norm();
            obs.ratio = path.length(&u) / len;
            obs.chord_ratio = Some((path.final_image - u).norm() / len);
            let here = family_velocity(complex.cell(*path.cells.last().unwrap()), &v)?;
            let image = family_velocity(complex.cell(path.cells[0]), &path.final_image)?;
            obs.velocity_mismatch = Some((here - image).norm() / here.norm());
        }
    }
    Ok(obs)
}

/// Reason the observation breaks its bounds, if it does.
fn judge(mode: VerifyMode, obs: &Observation, cfg: &VerifyConfig) -> Option<String> {
    let tol = match mode {
        VerifyMode::Speed | VerifyMode::Reflection => cfg.identity_tolerance,
        _ => cfg.tolerance,
    };
    if !obs.ratio.is_finite() {
        return Some(format!("non-finite ratio {}", obs.ratio));
    }
    if obs.ratio < obs.lower - tol {
        return Some(format!(
            "ratio {} below lower bound {}",
            obs.ratio, obs.lower
        ));
    }
    if obs.ratio > obs.upper + tol {
        return Some(format!(
            "ratio {} above upper bound {}",
            obs.ratio, obs.upper
        ));
    }
    if let (Some(r), Some(b)) = (obs.radius_ratio, obs.radius_bound) {
        if !(r < b + cfg.tolerance) {
            return Some(format!("circumradius ratio {r} not below {b}"));
        }
    }
    if let Some(m) = obs.velocity_mismatch {
        if !(m <= cfg.identity_tolerance) {
            return Some(format!("velocity mismatch {m} at the folded endpoint"));
        }
    }
    if let Some(c) = obs.chord_ratio {
        if !(c <= 1.0 + cfg.identity_tolerance) {
            return Some(format!("folded chord ratio {c} exceeds 1"));
        }
    }
    None
}

fn skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::Singular { .. } | Error::OutsideDomain { .. } | Error::NonGeneric(_)
    )
}

/// Two samples on a shrinking sphere patch of four spheres at the corners
/// of a regular tetrahedron, followed for the safe interval of `theta`.
pub fn tightness_witness(theta: f64, control: StepControl) -> Result<Witness> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(format!(
            "witness theta {theta} outside (0, 1)"
        )));
    }
    let corners = [
        (1.0, 1.0, 1.0),
        (1.0, -1.0, -1.0),
        (-1.0, 1.0, -1.0),
        (-1.0, -1.0, 1.0),
    ];
    let spheres = corners
        .iter()
        .map(|&(x, y, z)| WeightedSphere::new(Vec3::new(x, y, z), 2.5))
        .collect::<Result<Vec<_>>>()?;
    let complex = MixedComplex::new(&spheres)?;
    let cell = complex
        .cells()
        .iter()
        .find(|c| c.dimension == 3)
        .ok_or_else(|| Error::numeric("tetrahedral cell missing"))?;
    let r = 0.5 * cell.slack(&cell.focus());
    let tau = cell.frame.offset - r * r;
    if cell.frame.r_squared(tau + r * r * 0.5) >= r * r {
        return Err(Error::numeric("tetrahedral patch is not shrinking"));
    }
    let a = SurfacePoint::at(&complex, cell.frame.to_world(&Vec3::new(r, 0.0, 0.0)), tau)?;
    let b = SurfacePoint::at(
        &complex,
        cell.frame.to_world(&Vec3::new(0.0, r * 0.6, r * 0.8)),
        tau,
    )?;
    let dt = (2.0 * theta - theta * theta) * r * r;
    let a1 = advance(&complex, &a, dt, control)?;
    let b1 = advance(&complex, &b, dt, control)?;
    let ratio = (b1.world - a1.world).norm() / (b.world - a.world).norm();
    let expected = 1.0 - theta;
    Ok(Witness {
        theta,
        ratio,
        expected,
        error: (ratio - expected).abs(),
    })
}

/// Run `cfg.trials` randomized trials of `cfg.mode`.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = VerifyReport {
        mode: cfg.mode,
        population: cfg.population,
        seed: cfg.seed,
        trials: 0,
        skipped: 0,
        cross_cell: 0,
        patches: PatchCounts::default(),
        min_ratio: f64::INFINITY,
        max_ratio: f64::NEG_INFINITY,
        worst_lower_excess: f64::NEG_INFINITY,
        worst_upper_excess: f64::NEG_INFINITY,
        max_radius_ratio_over_bound: None,
        max_velocity_mismatch: None,
        max_chord_ratio: None,
        witness: None,
        tolerance: cfg.tolerance,
        violations: Vec::new(),
    };
    let max_draws = 50 * cfg.trials;
    let mut draws = 0usize;
    let mut scene = Scene::random(&mut rng)?;
    let mut in_scene = 0usize;
    while report.trials < cfg.trials {
        if in_scene == cfg.trials_per_complex {
            scene = Scene::random(&mut rng)?;
            in_scene = 0;
        }
        draws += 1;
        if draws > max_draws {
            return Err(Error::numeric(format!(
                "only {} of {} trials succeeded after {max_draws} draws",
                report.trials, cfg.trials
            )));
        }
        let theta = rng.gen_range(0.0..cfg.max_theta);
        let drawn =
            if cfg.mode == VerifyMode::HeightLemma && cfg.population == Population::MeshSized {
                scene.mesh_triangle(&cfg.params, &mut rng)?
            } else {
                scene
                    .pick(cfg.mode, &mut rng)
                    .map(|idx| idx.iter().map(|&i| scene.points[i].clone()).collect())
            };
        let Some(points) = drawn else {
            continue;
        };
        if cfg.mode == VerifyMode::HeightLemma {
            let rho0 = points.iter().map(|p| p.rho).fold(f64::INFINITY, f64::min);
            if triangle_height(&points[0].world, &points[1].world, &points[2].world) < 1e-3 * rho0 {
                report.skipped += 1;
                continue;
            }
        }
        let obs = match observe(&scene.complex, cfg.mode, &points, theta, cfg.control) {
            Ok(o) => o,
            Err(e) if skippable(&e) => {
                report.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        in_scene += 1;
        report.trials += 1;
        report.patches.add(
            scene
                .complex
                .cell(points[0].cell)
                .frame
                .patch_kind_at(scene.tau),
        );
        report.cross_cell += usize::from(obs.cross_cell);
        report.min_ratio = report.min_ratio.min(obs.ratio);
        report.max_ratio = report.max_ratio.max(obs.ratio);
        report.worst_lower_excess = report.worst_lower_excess.max(obs.lower - obs.ratio);
        report.worst_upper_excess = report.worst_upper_excess.max(obs.ratio - obs.upper);
        if let (Some(r), Some(b)) = (obs.radius_ratio, obs.radius_bound) {
            let q = r / b;
            report.max_radius_ratio_over_bound =
                Some(report.max_radius_ratio_over_bound.map_or(q, |m| m.max(q)));
        }
        if let Some(m) = obs.velocity_mismatch {
            report.max_velocity_mismatch =
                Some(report.max_velocity_mismatch.map_or(m, |x| x.max(m)));
        }
        if let Some(c) = obs.chord_ratio {
            report.max_chord_ratio = Some(report.max_chord_ratio.map_or(c, |x| x.max(c)));
        }
        if let Some(reason) = judge(cfg.mode, &obs, cfg) {
            let case = scene.case(cfg.mode, report.trials - 1, &points, theta);
            report.violations.push(Violation {
                case,
                observation: obs,
                reason,
            });
        }
    }
    if matches!(cfg.mode, VerifyMode::LengthLemma | VerifyMode::HeightLemma) {
        report.witness = Some(tightness_witness(
            rng.gen_range(0.05..cfg.max_theta),
            cfg.control,
        )?);
    }
    Ok(report)
}

/// Re-run a recorded trial.
pub fn replay(case: &TrialCase, control: StepControl) -> Result<Observation> {
    let (scene, points) = Scene::from_case(case)?;
    observe(&scene.complex, case.mode, &points, case.theta, control)
}
