//! Weighted points, the regular triangulation they induce, and the mixed
//! complex that decomposes a skin surface into quadric patches.

mod exact;
pub mod mixed;
pub mod regular;

use std::fmt;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mixed::{
    locate_cell, CellId, HalfSpace, MixedCell, MixedComplex, PatchKind, StandardFrame,
};
pub use regular::{build_regular_triangulation, RegularTriangulation, Simplex};

pub type Vec3 = Vector3<f64>;

/// Sphere `(z, r)` stored through its weight `w = r^2`. Negative weights
/// describe spheres with imaginary radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSphere {
    pub center: Vec3,
    pub weight: f64,
}

impl WeightedSphere {
    pub fn new(center: Vec3, weight: f64) -> Result<Self> {
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite sphere center {center:?}"
            )));
        }
        if !weight.is_finite() {
            return Err(Error::invalid(format!("non-finite sphere weight {weight}")));
        }
        Ok(WeightedSphere { center, weight })
    }

    pub fn from_radius(center: Vec3, radius: f64) -> Result<Self> {
        Self::new(center, radius * radius)
    }

    /// Power distance `|x - z|^2 - w`.
    #[inline]
    pub fn power(&self, x: &Vec3) -> f64 {
        (x - self.center).norm_squared() - self.weight
    }

    /// The sphere at growth time `t`: same center, weight `w + t`.
    pub fn grown(&self, t: f64) -> Self {
        WeightedSphere {
            center: self.center,
            weight: self.weight + t,
        }
    }

    /// Real radius, or `None` when the weight is negative.
    pub fn radius(&self) -> Option<f64> {
        (self.weight >= 0.0).then(|| self.weight.sqrt())
    }
}

impl fmt::Display for WeightedSphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.center.x, self.center.y, self.center.z, self.weight
        )
    }
}

/// Weighted square distance `|x - z|^2 - w` of `x` from `s`.
#[inline]
pub fn weighted_distance(s: &WeightedSphere, x: &Vec3) -> f64 {
    s.power(x)
}

/// The sphere whose weighted distance function is `sum gamma_i f_i`.
///
/// Coefficients must be non-negative and sum to one (to `1e-12`).
pub fn convex_combination(spheres: &[WeightedSphere], gammas: &[f64]) -> Result<WeightedSphere> {
    if spheres.is_empty() || spheres.len() != gammas.len() {
        return Err(Error::invalid(format!(
            "{} spheres but {} coefficients",
            spheres.len(),
            gammas.len()
        )));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
        return Err(Error::invalid(format!(
            "negative or non-finite coefficient {g}"
        )));
    }
    let total: f64 = gammas.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "coefficients sum to {total}, expected 1"
        )));
    }
    let mut center = Vec3::zeros();
    let mut constant = 0.0;
    for (s, g) in spheres.iter().zip(gammas) {
        center += *g * s.center;
        constant += g * (s.center.norm_squared() - s.weight);
    }
    WeightedSphere::new(center, center.norm_squared() - constant)
}

/// Parse the `.spheres` text format: one `x y z w` record per line, `#`
/// starts a comment, blank lines are ignored.
pub fn parse_spheres(text: &str) -> Result<Vec<WeightedSphere>> {
    let mut spheres = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 4 fields `x y z w`, found {}", fields.len()),
            });
        }
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("`{f}`: {e}"),
            })?;
        }
        let sphere =
            WeightedSphere::new(Vec3::new(vals[0], vals[1], vals[2]), vals[3]).map_err(|e| {
                Error::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                }
            })?;
        spheres.push(sphere);
    }
    Ok(spheres)
}

pub fn read_spheres(path: impl AsRef<Path>) -> Result<Vec<WeightedSphere>> {
    parse_spheres(&std::fs::read_to_string(path)?)
}

pub fn format_spheres(spheres: &[WeightedSphere]) -> String {
    spheres.iter().map(|s| format!("{s}\n")).collect()
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| x[i] >= self.min[i] - tol && x[i] <= self.max[i] + tol)
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.min + self.max)
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    /// Box with the same center and every extent multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Aabb {
        let c = self.center();
        let half = 0.5 * factor * (self.max - self.min);
        Aabb {
            min: c - half,
            max: c + half,
        }
    }

    /// Bounding box of the balls (real radii only), padded to a unit extent
    /// when the input collapses to a point.
    pub fn of_spheres(spheres: &[WeightedSphere]) -> Aabb {
        let mut min = Vec3::repeat(f64::INFINITY);
        let mut max = Vec3::repeat(f64::NEG_INFINITY);
        for s in spheres {
            let r = s.radius().unwrap_or(0.0);
            min = min.inf(&s.center.add_scalar(-r));
            max = max.sup(&s.center.add_scalar(r));
        }
        let extent = (max - min).max();
        let pad = if extent > 0.0 { 0.0 } else { 0.5 };
        let mut bb = Aabb {
            min: min.add_scalar(-pad),
            max: max.add_scalar(pad),
        };
        // flat inputs still need a box with volume
        let ext = bb.max - bb.min;
        let floor = 0.5 * ext.max().max(1.0) * 1e-3;
        for i in 0..3 {
            if ext[i] < floor {
                bb.min[i] -= floor;
                bb.max[i] += floor;
            }
        }
        bb
    }
}
