//! Curvature-adaptive bootstrap samples of the skin surface.
//!
//! Every mixed cell contributes a dense candidate set on its quadric patch:
//! a Fibonacci lattice on spheres, rings along the meridian of
//! hyperboloids. Farthest-point selection then keeps candidates until every
//! candidate lies within `alpha` length scales of a chosen sample.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use kiddo::{MutableKdTree, SquaredEuclidean};
use nalgebra::{Rotation3, Unit};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{CellId, MixedComplex, StandardFrame, Vec3};
use crate::kinetics::SurfacePoint;

#[derive(Clone, Copy, Debug)]
pub struct SamplingConfig {
    /// Target spacing relative to the local length scale.
    pub alpha: f64,
    /// Candidate spacing relative to `alpha`.
    pub candidate_ratio: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            alpha: 0.085,
            candidate_ratio: 1.0 / 3.0,
        }
    }
}

/// Points of one patch in frame coordinates, spaced about `beta` length
/// scales apart, with `|xi|` up to `max_norm`.
fn patch_candidates<R: Rng>(
    frame: &StandardFrame,
    tau: f64,
    beta: f64,
    max_norm: f64,
    rng: &mut R,
) -> Vec<Vec3> {
    let r2 = frame.r_squared(tau);
    let mut out = Vec::new();
    if frame.axial > 0.0 {
        if r2 <= 0.0 {
            return out;
        }
        let r = r2.sqrt();
        let n = (4.0 * PI / (beta * beta)).ceil() as usize;
        let axis = Unit::new_normalize(Vec3::new(rng.gen(), rng.gen(), rng.gen()).add_scalar(-0.5));
        let rot = Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..2.0 * PI));
        let golden = PI * (3.0 - 5f64.sqrt());
        for i in 0..n {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            out.push(rot * Vec3::new(r * s * phi.cos(), r * s * phi.sin(), r * z));
        }
        return out;
    }
    // meridian by arc length: du = beta gives steps of beta |xi|
    let a = r2.abs().sqrt();
    if a == 0.0 {
        return out;
    }
    let mut ring = |rho_c: f64, z: f64, out: &mut Vec<Vec3>| {
        let norm = (rho_c * rho_c + z * z).sqrt();
        let n = ((2.0 * PI * rho_c / (beta * norm)).ceil() as usize).max(1);
        let phase = rng.gen_range(0.0..2.0 * PI);
        for k in 0..n {
            let phi = phase + 2.0 * PI * k as f64 / n as f64;
            out.push(Vec3::new(rho_c * phi.cos(), rho_c * phi.sin(), z));
        }
    };
    for sign in [1.0, -1.0] {
        let mut u: f64 = if r2 > 0.0 && sign < 0.0 { beta } else { 0.0 };
        loop {
            let (rho_c, z) = if r2 > 0.0 {
                (a * u.cosh(), sign * a * u.sinh())
            } else {
                (a * u.sinh(), sign * a * u.cosh())
            };
            if (rho_c * rho_c + z * z).sqrt() > max_norm {
                break;
            }
            ring(rho_c, z, &mut out);
            u += beta;
        }
    }
    out
}

/// Candidate surface points at kinetic time `tau`, each inside its own
/// cell, spaced about `beta` length scales apart.
pub fn surface_candidates<R: Rng>(
    complex: &MixedComplex,
    tau: f64,
    beta: f64,
    rng: &mut R,
) -> Vec<SurfacePoint> {
    let max_norm = 2.0 * complex.domain().diagonal();
    let tol = complex.tolerance();
    let mut out = Vec::new();
    for (id, cell) in complex.cells().iter().enumerate() {
        let id: CellId = id;
        for xi in patch_candidates(&cell.frame, tau, beta, max_norm, rng) {
            let x = cell.frame.to_world(&xi);
            if cell.contains(&x, tol) && xi.norm() > 0.0 {
                out.push(SurfacePoint::at_cell(complex, x, id, tau));
            }
        }
    }
    out
}

#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Farthest-point selection from `candidates` under the distance
/// `|x - s| / rho(x)`, stopping once every candidate is within `alpha`.
pub fn farthest_point_sample(candidates: &[SurfacePoint], alpha: f64) -> Result<Vec<SurfacePoint>> {
    if candidates.len() > u32::MAX as usize {
        return Err(Error::invalid("too many candidates"));
    }
    let mut tree: MutableKdTree<f64, 3> = MutableKdTree::default();
    let mut heap: BinaryHeap<Key> = (0..candidates.len())
        .map(|i| Key(f64::INFINITY, i))
        .collect();
    let mut chosen = Vec::new();
    while let Some(Key(_, i)) = heap.pop() {
        let p = &candidates[i];
        let x = [p.world.x, p.world.y, p.world.z];
        let score = if chosen.is_empty() {
            f64::INFINITY
        } else {
            tree.query(&x)
                .nearest_one::<SquaredEuclidean<f64>>()
                .execute()
                .distance
                .sqrt()
                / p.rho
        };
        if heap.peek().is_some_and(|top| top.0 > score) {
            heap.push(Key(score, i));
            continue;
        }
        if score < alpha {
            break;
        }
        tree.add(&x, chosen.len() as u32)
            .map_err(|e| Error::numeric(format!("k-d tree: {e:?}")))?;
        chosen.push(p.clone());
    }
    Ok(chosen)
}

/// Bootstrap sample of the surface at kinetic time `tau`.
pub fn bootstrap_samples<R: Rng>(
    complex: &MixedComplex,
    tau: f64,
    cfg: &SamplingConfig,
    rng: &mut R,
) -> Result<Vec<SurfacePoint>> {
    if !(cfg.alpha > 0.0 && cfg.candidate_ratio > 0.0) {
        return Err(Error::invalid(format!(
            "sampling needs positive spacing, got {cfg:?}"
        )));
    }
    let candidates = surface_candidates(complex, tau, cfg.alpha * cfg.candidate_ratio, rng);
    if candidates.is_empty() {
        return Err(Error::invalid(format!(
            "the surface is empty at kinetic time {tau}"
        )));
    }
    farthest_point_sample(&candidates, cfg.alpha)
}
