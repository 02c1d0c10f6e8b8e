//! Motion of surface samples under the growth model.
//!
//! A sample moves normal to the surface with velocity
//! `grad / |grad|^2 = grad / (4 |xi|^2)`, where `grad = 2 s [xi1, xi2, e xi3]`
//! is the gradient of the Standard-Form polynomial of its cell. Its speed is
//! `1 / (2 |xi|)` and its length scale (inverse maximum normal curvature) is
//! `|xi|`. Time is kinetic time; see the crate docs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CellId, HalfSpace, MixedCell, MixedComplex, Vec3};

/// Velocity is undefined closer than this to a patch center.
pub const SINGULAR_LIMIT: f64 = 1e-9;
/// Trajectories are not integrated closer than this to a patch center.
pub const APEX_LIMIT: f64 = 1e-6;

const MAX_PROJECTION_ITERATIONS: usize = 50;

/// A sample on the surface at kinetic time `time`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub world: Vec3,
    pub cell: CellId,
    pub frame_coords: Vec3,
    pub time: f64,
    /// Local length scale `|xi|`.
    pub rho: f64,
}

impl SurfacePoint {
    /// Wrap `world` without projecting it; the caller vouches that it lies
    /// on the level set `time`.
    pub fn at(complex: &MixedComplex, world: Vec3, time: f64) -> Result<Self> {
        let cell = complex.locate(&world)?;
        Ok(Self::in_cell(complex, world, cell, time))
    }

    /// Like [`at`](Self::at) with the containing cell already known.
    pub fn at_cell(complex: &MixedComplex, world: Vec3, cell: CellId, time: f64) -> Self {
        Self::in_cell(complex, world, cell, time)
    }

    fn in_cell(complex: &MixedComplex, world: Vec3, cell: CellId, time: f64) -> Self {
        let frame_coords = complex.cell(cell).frame.to_frame(&world);
        SurfacePoint {
            world,
            cell,
            frame_coords,
            time,
            rho: frame_coords.norm(),
        }
    }

    /// Project `x` onto the surface at kinetic time `time` along the
    /// gradient and wrap the result.
    pub fn on_surface(complex: &MixedComplex, x: Vec3, time: f64) -> Result<Self> {
        let (world, cell) = project_to_level(complex, x, time, None)?;
        Ok(Self::in_cell(complex, world, cell, time))
    }

    pub fn curvature(&self) -> f64 {
        1.0 / self.rho
    }

    /// `g / 2 - time` at the stored position.
    pub fn level_residual(&self, complex: &MixedComplex) -> f64 {
        complex.cell(self.cell).frame.level(&self.world) - self.time
    }
}

/// Skin function `g(x)`.
pub fn skin_value(complex: &MixedComplex, x: &Vec3) -> Result<f64> {
    complex.skin_value(x)
}

/// Newton iteration along the gradient onto `g / 2 = tau`.
pub fn project_to_level(
    complex: &MixedComplex,
    mut x: Vec3,
    tau: f64,
    hint: Option<CellId>,
) -> Result<(Vec3, CellId)> {
    let mut cell = match hint {
        Some(h) => complex.locate_near(&x, h)?,
        None => complex.locate(&x)?,
    };
    for _ in 0..MAX_PROJECTION_ITERATIONS {
        let frame = &complex.cell(cell).frame;
        let xi = frame.to_frame(&x);
        let residual = frame.level_in_frame(&xi) - tau;
        let scale = xi.norm_squared().max(tau.abs()).max(1e-300);
        if residual.abs() <= 1e-14 * scale {
            return Ok((x, cell));
        }
        let grad = frame.level_gradient(&x);
        let g2 = grad.norm_squared();
        if g2 < 4.0 * SINGULAR_LIMIT * SINGULAR_LIMIT {
            return Err(Error::Singular {
                norm: xi.norm(),
                limit: SINGULAR_LIMIT,
            });
        }
        x -= residual / g2 * grad;
        cell = complex.locate_near(&x, cell)?;
    }
    Err(Error::ProjectionFailed {
        iterations: MAX_PROJECTION_ITERATIONS,
    })
}

/// Velocity at `x` prescribed by the quadric family of `cell`, whether or
/// not `x` lies inside the cell.
pub fn family_velocity(cell: &MixedCell, x: &Vec3) -> Result<Vec3> {
    let frame = &cell.frame;
    let xi = frame.to_frame(x);
    let n2 = xi.norm_squared();
    if n2.sqrt() < SINGULAR_LIMIT {
        return Err(Error::Singular {
            norm: n2.sqrt(),
            limit: SINGULAR_LIMIT,
        });
    }
    Ok(frame.rotation.transpose() * frame.frame_gradient(&xi) / (4.0 * n2))
}

/// Velocity `dx/dtau` of a surface sample, in world coordinates.
pub fn velocity(complex: &MixedComplex, p: &SurfacePoint) -> Result<Vec3> {
    family_velocity(complex.cell(p.cell), &p.world)
}

/// Guaranteed range of the length scale after travelling for
/// `(2 theta - theta^2) rho0^2`.
pub fn length_scale_bounds(rho0: f64, theta: f64) -> Result<(f64, f64)> {
    if !(rho0 > 0.0) || !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!(
            "need rho0 > 0 and 0 <= theta <= 1, got {rho0}, {theta}"
        )));
    }
    Ok(((1.0 - theta) * rho0, (1.0 + theta) * rho0))
}

/// Step size control for [`advance`].
#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    /// Local error per step, relative to the length scale.
    pub tolerance: f64,
    /// Bisection resolution for face crossings, relative to the step.
    pub crossing_tolerance: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            tolerance: 1e-9,
            crossing_tolerance: 1e-12,
        }
    }
}

// Dormand-Prince 5(4) tableau
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn guarded_velocity(cell: &MixedCell, x: &Vec3) -> Result<Vec3> {
    let norm = cell.frame.to_frame(x).norm();
    if norm < APEX_LIMIT {
        return Err(Error::Singular {
            norm,
            limit: APEX_LIMIT,
        });
    }
    family_velocity(cell, x)
}

/// One Dormand-Prince step: fifth-order solution and error estimate.
fn dp_step(cell: &MixedCell, x: &Vec3, h: f64) -> Result<(Vec3, Vec3)> {
    let k1 = guarded_velocity(cell, x)?;
    let k2 = guarded_velocity(cell, &(x + h * A21 * k1))?;
    let k3 = guarded_velocity(cell, &(x + h * (A31 * k1 + A32 * k2)))?;
    let k4 = guarded_velocity(cell, &(x + h * (A41 * k1 + A42 * k2 + A43 * k3)))?;
    let k5 = guarded_velocity(cell, &(x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)))?;
    let k6 = guarded_velocity(
        cell,
        &(x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)),
    )?;
    let y = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
    let k7 = guarded_velocity(cell, &y)?;
    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    Ok((y, err))
}

/// Newton correction onto `level = tau` using one cell's quadric.
fn reproject(cell: &MixedCell, x: &mut Vec3, tau: f64) {
    for _ in 0..3 {
        let frame = &cell.frame;
        let residual = frame.level(x) - tau;
        let grad = frame.level_gradient(x);
        let g2 = grad.norm_squared();
        if g2 == 0.0 || residual == 0.0 {
            return;
        }
        *x -= residual / g2 * grad;
    }
}

/// Cell entered when leaving `from` at `x` in direction `dir`.
fn next_cell(complex: &MixedComplex, from: CellId, x: &Vec3, dir: &Vec3) -> Result<CellId> {
    let scale = complex.domain().diagonal();
    let probe = x + 1e-9 * scale * dir.normalize();
    let tol = 1e-9 * scale;
    complex
        .cells()
        .iter()
        .enumerate()
        .filter(|(i, c)| *i != from && c.contains(x, tol))
        .map(|(i, c)| (i, c.slack(&probe)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .map_or_else(|| complex.locate(&probe), Ok)
}

/// Integrate `p` forward by kinetic duration `dt`.
///
/// Adaptive Dormand-Prince steps with a Newton projection back onto the
/// level set after each accepted step. A step that leaves the current cell
/// is bisected to the face crossing and integration continues in the
/// neighbouring cell's frame.
pub fn advance(
    complex: &MixedComplex,
    p: &SurfacePoint,
    dt: f64,
    control: StepControl,
) -> Result<SurfacePoint> {
    if !(dt >= 0.0) {
        return Err(Error::invalid(format!("negative duration {dt}")));
    }
    if dt == 0.0 {
        return Ok(p.clone());
    }
    let target = p.time + dt;
    let mut x = p.world;
    let mut cell = complex.locate_near(&x, p.cell)?;
    let mut tau = p.time;
    let mut h = dt.min(0.05 * p.rho * p.rho).max(1e-14 * dt);
    let face_tol = complex.tolerance();
    let mut steps = 0usize;

    while target - tau > 1e-15 * target.abs().max(1.0) {
        steps += 1;
        if steps > 1_000_000 {
            return Err(Error::numeric(
                "trajectory integration exceeded its step budget",
            ));
        }
        let current = complex.cell(cell);
        h = h.min(target - tau);
        let (y, err) = dp_step(current, &x, h)?;
        let rho = current.frame.to_frame(&x).norm();
        let err_norm = err.norm() / (control.tolerance * rho.max(1e-12));
        if err_norm > 1.0 {
            h *= (0.9 * err_norm.powf(-0.2)).max(0.2);
            continue;
        }
        if !current.contains(&y, face_tol) {
            // bisect on the fraction of the step at which the face is hit
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut exit = y;
            while (hi - lo) > control.crossing_tolerance {
                let mid = 0.5 * (lo + hi);
                let (ym, _) = dp_step(current, &x, mid * h)?;
                if current.contains(&ym, 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                    exit = ym;
                }
            }
            let dir = guarded_velocity(current, &exit)?;
            tau += hi * h;
            x = exit;
            cell = next_cell(complex, cell, &x, &dir)?;
            reproject(complex.cell(cell), &mut x, tau);
            continue;
        }
        x = y;
        tau += h;
        reproject(current, &mut x, tau);
        if !complex.domain().contains(&x, 0.0) {
            return Err(Error::OutsideDomain {
                x: x.x,
                y: x.y,
                z: x.z,
            });
        }
        h *= (0.9 * err_norm.max(1e-10).powf(-0.2)).min(5.0);
    }

    let cell = complex.locate_near(&x, cell)?;
    let mut out = SurfacePoint::in_cell(complex, x, cell, target);
    if out.rho < APEX_LIMIT {
        return Err(Error::Singular {
            norm: out.rho,
            limit: APEX_LIMIT,
        });
    }
    out.time = target;
    Ok(out)
}

/// Advance to an absolute kinetic time.
pub fn advance_to(
    complex: &MixedComplex,
    p: &SurfacePoint,
    time: f64,
    control: StepControl,
) -> Result<SurfacePoint> {
    advance(complex, p, time - p.time, control)
}

/// Segment `uv` folded across the mixed-cell faces it crosses.
#[derive(Clone, Debug)]
pub struct ReflectedPath {
    /// Crossing points `x_1 .. x_k` after all reflections.
    pub waypoints: Vec<Vec3>,
    /// Image of `v` under the composed reflections.
    pub final_image: Vec3,
    /// Face planes crossed, in order from `u` to `v`.
    pub faces: Vec<HalfSpace>,
    /// Cells visited, from `cell(u)` to `cell(v)`.
    pub cells: Vec<CellId>,
}

impl ReflectedPath {
    /// Length of the polygonal path from `source` through the waypoints to
    /// the final image.
    pub fn length(&self, source: &Vec3) -> f64 {
        let mut prev = *source;
        let mut total = 0.0;
        for w in self
            .waypoints
            .iter()
            .chain(std::iter::once(&self.final_image))
        {
            total += (w - prev).norm();
            prev = *w;
        }
        total
    }
}

/// Crossing points of `uv` with mixed-cell faces, folded backward from the
/// last crossing so that the velocity of the final image under the family
/// of `u`'s cell equals the velocity of `v` in its own cell.
pub fn reflect_segment(complex: &MixedComplex, u: &Vec3, v: &Vec3) -> Result<ReflectedPath> {
    let len = (v - u).norm();
    let at = |s: f64| u + s * (v - u);
    let scale = complex.domain().diagonal();
    let generic_tol = 1e-9 * scale;

    let mut cell = complex.locate(u)?;
    complex.locate(v)?;
    let mut cells = vec![cell];
    let mut crossings = Vec::new();
    let mut faces = Vec::new();
    let mut s = 0.0f64;
    while !complex.cell(cell).contains(v, complex.tolerance()) {
        if cells.len() > 4 * complex.cells().len() {
            return Err(Error::numeric("segment walk did not terminate"));
        }
        let current = complex.cell(cell);
        // the segment meets the convex cell in an interval, so membership
        // along [s, 1] switches from true to false exactly once
        let (mut lo, mut hi) = (s, 1.0f64);
        for _ in 0..200 {
            if (hi - lo) * len <= 1e-15 * scale {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if current.contains(&at(mid), 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = at(lo);
        let beyond = at(hi);
        let mut tight: Vec<(usize, f64)> = current
            .halfspaces
            .iter()
            .enumerate()
            .map(|(i, h)| (i, h.slack(&x).abs()))
            .filter(|(_, d)| *d <= generic_tol)
            .collect();
        tight.sort_by(|a, b| a.1.total_cmp(&b.1));
        let violated = current
            .halfspaces
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.slack(&beyond).total_cmp(&b.1.slack(&beyond)))
            .map(|(i, _)| i)
            .unwrap();
        let face = current.halfspaces[violated];
        let distinct: Vec<&(usize, f64)> = tight
            .iter()
            .filter(|(i, _)| {
                let h = current.halfspaces[*i];
                (h.normal - face.normal).norm() > 1e-9
                    || (h.offset - face.offset).abs() > generic_tol
            })
            .collect();
        if !distinct.is_empty() {
            return Err(Error::NonGeneric(format!(
                "segment crosses an edge or vertex of mixed cell {cell} at {x:?}"
            )));
        }
        let next = next_cell(complex, cell, &x, &(v - u))?;
        crossings.push(x);
        faces.push(face);
        cells.push(next);
        cell = next;
        s = hi;
    }

    // fold the tail across each face, last crossing first
    let mut points = crossings.clone();
    points.push(*v);
    for i in (0..faces.len()).rev() {
        for p in points.iter_mut().skip(i + 1) {
            *p = faces[i].reflect(p);
        }
    }
    let final_image = points.pop().unwrap();
    Ok(ReflectedPath {
        waypoints: points,
        final_image,
        faces,
        cells,
    })
}
