//! The mixed complex: one cell `(delta + nu) / 2` per Delaunay simplex
//! `delta` and its dual power cell `nu`, each carrying the Standard-Form
//! frame of the quadric patch it contains.
//!
//! Since `aff delta` and `aff nu` are orthogonal and meet in the orthocenter
//! `z`, a point `x = z + p + q` (`p` along `delta`, `q` along `nu`) lies in
//! the cell iff `z + 2p` is in `delta` and `z + 2q` is in `nu`. Both
//! conditions are linear in `x`, which gives the half-space description.
//! Within the cell the skin function is `g(x) = 2|q|^2 - 2|p|^2 + P` with
//! `P` the orthosphere weight.

use nalgebra::Matrix3;
use serde::Serialize;

use super::regular::{build_regular_triangulation, RegularTriangulation, Simplex};
use super::{Aabb, Vec3, WeightedSphere};
use crate::error::{Error, Result};

pub type CellId = usize;

/// Default ratio between the clipping box and the bounding box of the input
/// balls.
pub const DEFAULT_CLIP_FACTOR: f64 = 10.0;

/// `normal . x <= offset`, with a unit normal so that the slack is a
/// Euclidean distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec3,
    pub offset: f64,
}

impl HalfSpace {
    fn new(normal: Vec3, offset: f64) -> Option<Self> {
        let len = normal.norm();
        (len > 1e-300).then(|| HalfSpace {
            normal: normal / len,
            offset: offset / len,
        })
    }

    #[inline]
    pub fn slack(&self, x: &Vec3) -> f64 {
        self.offset - self.normal.dot(x)
    }

    /// Mirror image of `x` across the bounding plane.
    pub fn reflect(&self, x: &Vec3) -> Vec3 {
        x + 2.0 * self.slack(x) * self.normal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    Sphere,
    HyperboloidOneSheet,
    HyperboloidTwoSheet,
}

/// Coordinates `xi = R (x - z)` in which the cell's quadric family reads
/// `s (xi1^2 + xi2^2 + e xi3^2) + c = g / 2`.
///
/// `orientation` is `s`, `axial` is `e`, `offset` is `c = P / 2`. At level
/// `tau` the patch is `xi1^2 + xi2^2 + e xi3^2 = s (tau - c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardFrame {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub patch_kind: PatchKind,
    pub r_squared_at_t0: f64,
    pub orientation: f64,
    pub axial: f64,
    pub offset: f64,
}

impl StandardFrame {
    fn new(dimension: usize, rotation: Matrix3<f64>, translation: Vec3, orthoweight: f64) -> Self {
        let (orientation, axial) = match dimension {
            0 => (1.0, 1.0),
            1 => (1.0, -1.0),
            2 => (-1.0, -1.0),
            _ => (-1.0, 1.0),
        };
        let offset = 0.5 * orthoweight;
        let r_squared_at_t0 = -orientation * offset;
        let mut frame = StandardFrame {
            rotation,
            translation,
            patch_kind: PatchKind::Sphere,
            r_squared_at_t0,
            orientation,
            axial,
            offset,
        };
        frame.patch_kind = frame.patch_kind_at(0.0);
        frame
    }

    #[inline]
    pub fn to_frame(&self, x: &Vec3) -> Vec3 {
        self.rotation * (x - self.translation)
    }

    #[inline]
    pub fn to_world(&self, xi: &Vec3) -> Vec3 {
        self.rotation.transpose() * xi + self.translation
    }

    /// Right-hand side `xi1^2 + xi2^2 + e xi3^2 = r^2(tau)` at level `tau`.
    pub fn r_squared(&self, tau: f64) -> f64 {
        self.orientation * tau + self.r_squared_at_t0
    }

    pub fn patch_kind_at(&self, tau: f64) -> PatchKind {
        if self.axial > 0.0 {
            PatchKind::Sphere
        } else if self.r_squared(tau) >= 0.0 {
            PatchKind::HyperboloidOneSheet
        } else {
            PatchKind::HyperboloidTwoSheet
        }
    }

    /// Standard-Form polynomial, i.e. half the skin function.
    #[inline]
    pub fn level_in_frame(&self, xi: &Vec3) -> f64 {
        self.orientation * (xi.x * xi.x + xi.y * xi.y + self.axial * xi.z * xi.z) + self.offset
    }

    #[inline]
    pub fn level(&self, x: &Vec3) -> f64 {
        self.level_in_frame(&self.to_frame(x))
    }

    /// Gradient of the Standard-Form polynomial in frame coordinates:
    /// `2 s [xi1, xi2, e xi3]`.
    #[inline]
    pub fn frame_gradient(&self, xi: &Vec3) -> Vec3 {
        2.0 * self.orientation * Vec3::new(xi.x, xi.y, self.axial * xi.z)
    }

    #[inline]
    pub fn level_gradient(&self, x: &Vec3) -> Vec3 {
        self.rotation.transpose() * self.frame_gradient(&self.to_frame(x))
    }
}

#[derive(Clone, Debug)]
pub struct MixedCell {
    pub simplex: Simplex,
    pub dimension: usize,
    /// Half-spaces of the polytope, including the domain clip.
    pub halfspaces: Vec<HalfSpace>,
    pub frame: StandardFrame,
}

impl MixedCell {
    /// Smallest slack over all bounding half-spaces; non-negative inside.
    #[inline]
    pub fn slack(&self, x: &Vec3) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.slack(x))
            .fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn contains(&self, x: &Vec3, tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.slack(x) >= -tol)
    }

    /// Orthocenter of the Delaunay simplex, the frame origin.
    pub fn focus(&self) -> Vec3 {
        self.frame.translation
    }
}

/// Immutable mixed complex of a sphere set, clipped to an axis-aligned box.
#[derive(Clone, Debug)]
pub struct MixedComplex {
    triangulation: RegularTriangulation,
    cells: Vec<MixedCell>,
    domain: Aabb,
    tolerance: f64,
}

/// Build the mixed complex of `rt`, clipped to the box `clip_factor` times
/// the bounding box of the input balls.
pub fn build_mixed_complex(rt: RegularTriangulation, clip_factor: f64) -> Result<MixedComplex> {
    if !(clip_factor >= 1.0) {
        return Err(Error::invalid(format!(
            "clip factor {clip_factor} must be at least 1"
        )));
    }
    let domain = Aabb::of_spheres(rt.vertices()).scaled(clip_factor);
    let tolerance = 1e-12 * domain.diagonal();
    let mut cells = Vec::with_capacity(rt.num_simplices());
    for dim in 0..=3 {
        for simplex in rt.simplices(dim) {
            cells.push(build_cell(&rt, simplex, &domain)?);
        }
    }
    Ok(MixedComplex {
        triangulation: rt,
        cells,
        domain,
        tolerance,
    })
}

fn orthonormal_complement(axis: &Vec3) -> (Vec3, Vec3) {
    let a = axis.normalize();
    let helper = if a.x.abs() < 0.6 {
        Vec3::x()
    } else if a.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let e1 = (helper - helper.dot(&a) * a).normalize();
    let e2 = a.cross(&e1);
    (e1, e2)
}

fn build_cell(rt: &RegularTriangulation, simplex: &Simplex, domain: &Aabb) -> Result<MixedCell> {
    let spheres = rt.vertices();
    let k = simplex.len() - 1;
    let (z, orthoweight) = rt.orthocenter(simplex)?;
    let p0 = spheres[simplex[0]].center;
    let edges: Vec<Vec3> = simplex[1..]
        .iter()
        .map(|&i| spheres[i].center - p0)
        .collect();

    // projector onto lin(delta) and dual vectors of its barycentric coordinates
    let mut projector = Matrix3::zeros();
    let mut duals: Vec<Vec3> = Vec::new();
    if k > 0 {
        let mut g = nalgebra::DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                g[(i, j)] = edges[i].dot(&edges[j]);
            }
        }
        let ginv = g.try_inverse().ok_or_else(|| Error::Degenerate {
            simplex: simplex.clone(),
            reason: "singular Gram matrix".into(),
        })?;
        for j in 0..k {
            let mut c = Vec3::zeros();
            for i in 0..k {
                c += ginv[(i, j)] * edges[i];
            }
            duals.push(c);
        }
        for (e, c) in edges.iter().zip(&duals) {
            projector += e * c.transpose();
        }
    }
    let complement = Matrix3::identity() - projector;

    let mut halfspaces = Vec::new();
    // z + 2p inside delta
    let mut dual_sum = Vec3::zeros();
    for c in &duals {
        let offset = c.dot(&(z - p0)) - 2.0 * c.dot(&z);
        halfspaces.extend(HalfSpace::new(-2.0 * c, offset));
        dual_sum += c;
    }
    if k > 0 {
        let offset = 1.0 - dual_sum.dot(&(z - p0)) + 2.0 * dual_sum.dot(&z);
        halfspaces.extend(HalfSpace::new(2.0 * dual_sum, offset));
    }
    // z + 2q inside the power cell of delta
    let a0 = p0.norm_squared() - spheres[simplex[0]].weight;
    for (l, s) in spheres.iter().enumerate() {
        if simplex.contains(&l) {
            continue;
        }
        let d = s.center - p0;
        let qd = complement * d;
        let constant = (s.center.norm_squared() - s.weight) - a0 - 2.0 * z.dot(&d);
        if qd.norm() <= 1e-12 * d.norm().max(1e-300) {
            if constant < 0.0 {
                return Err(Error::Degenerate {
                    simplex: simplex.clone(),
                    reason: format!("empty power cell (sphere {l})"),
                });
            }
            continue;
        }
        halfspaces.extend(HalfSpace::new(4.0 * qd, constant + 4.0 * qd.dot(&z)));
    }
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = 1.0;
        halfspaces.push(HalfSpace {
            normal: e,
            offset: domain.max[i],
        });
        halfspaces.push(HalfSpace {
            normal: -e,
            offset: -domain.min[i],
        });
    }

    let rotation = match k {
        1 => {
            let (e1, e2) = orthonormal_complement(&edges[0]);
            let e3 = edges[0].normalize();
            Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()])
        }
        2 => {
            let e3 = edges[0].cross(&edges[1]).normalize();
            let e1 = edges[0].normalize();
            let e2 = e3.cross(&e1);
            Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()])
        }
        _ => Matrix3::identity(),
    };
    Ok(MixedCell {
        simplex: simplex.clone(),
        dimension: k,
        halfspaces,
        frame: StandardFrame::new(k, rotation, z, orthoweight),
    })
}

/// First cell (lowest index) whose closed polytope contains `x`.
pub fn locate_cell(cells: &[MixedCell], x: &Vec3, tol: f64) -> Option<CellId> {
    cells.iter().position(|c| c.contains(x, tol))
}

impl MixedComplex {
    pub fn new(spheres: &[WeightedSphere]) -> Result<Self> {
        Self::with_clip_factor(spheres, DEFAULT_CLIP_FACTOR)
    }

    pub fn with_clip_factor(spheres: &[WeightedSphere], clip_factor: f64) -> Result<Self> {
        build_mixed_complex(build_regular_triangulation(spheres)?, clip_factor)
    }

    pub fn triangulation(&self) -> &RegularTriangulation {
        &self.triangulation
    }

    pub fn spheres(&self) -> &[WeightedSphere] {
        self.triangulation.vertices()
    }

    pub fn cells(&self) -> &[MixedCell] {
        &self.cells
    }

    pub fn cell(&self, id: CellId) -> &MixedCell {
        &self.cells[id]
    }

    pub fn domain(&self) -> &Aabb {
        &self.domain
    }

    /// Absolute tolerance for face membership tests.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Cell containing `x`; ties on shared faces go to the lowest index.
    pub fn locate(&self, x: &Vec3) -> Result<CellId> {
        if !self.domain.contains(x, self.tolerance) {
            return Err(Error::OutsideDomain {
                x: x.x,
                y: x.y,
                z: x.z,
            });
        }
        if let Some(id) = locate_cell(&self.cells, x, self.tolerance) {
            return Ok(id);
        }
        // float gap along a shared face: take the least violated cell
        let (id, slack) = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.slack(x)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("complex has at least one cell");
        if slack >= -1e3 * self.tolerance {
            Ok(id)
        } else {
            Err(Error::numeric(format!(
                "no mixed cell contains {x:?} (best slack {slack:e})"
            )))
        }
    }

    /// Like [`locate`](Self::locate) but tries `hint` first.
    pub fn locate_near(&self, x: &Vec3, hint: CellId) -> Result<CellId> {
        if self.cells[hint].contains(x, self.tolerance) {
            return Ok(hint);
        }
        self.locate(x)
    }

    /// Skin function `g(x) = min (2 f(x) - f(z))` over the convex hull of the
    /// spheres, evaluated through the Standard Form of the containing cell.
    pub fn skin_value(&self, x: &Vec3) -> Result<f64> {
        Ok(2.0 * self.level(x)?)
    }

    /// `g(x) / 2`, the Standard-Form polynomial of the containing cell.
    pub fn level(&self, x: &Vec3) -> Result<f64> {
        let id = self.locate(x)?;
        Ok(self.cells[id].frame.level(x))
    }

    /// `g(x) / 2` with a cell hint that is updated to the containing cell.
    pub fn level_near(&self, x: &Vec3, hint: &mut CellId) -> Result<f64> {
        *hint = self.locate_near(x, *hint)?;
        Ok(self.cells[*hint].frame.level(x))
    }

    /// Indices of cells whose closed polytopes contain `x`.
    pub fn cells_containing(&self, x: &Vec3, tol: f64) -> Vec<CellId> {
        (0..self.cells.len())
            .filter(|&i| self.cells[i].contains(x, tol))
            .collect()
    }
}

/// Rotation check used by tests and debug assertions.
pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    let err = (m * m.transpose() - Matrix3::identity()).abs().max();
    err <= tol && (m.determinant() - 1.0).abs() <= tol
}
