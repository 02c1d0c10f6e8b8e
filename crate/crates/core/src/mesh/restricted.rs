//! Restricted Delaunay triangulation of surface samples.
//!
//! Triangle `abc` belongs to the triangulation when the part of its dual
//! Voronoi edge on which `a`, `b`, `c` are nearest crosses the surface. The
//! Voronoi edge lies on the line through the circumcenter along the
//! triangle normal; each other sample cuts it with a linear constraint.

use std::collections::{BTreeSet, HashSet};
use std::num::NonZero;

use kiddo::{ImmutableKdTree, SquaredEuclidean};

use super::{sorted_triangle, SurfaceMesh, Triangle};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, CellId, MixedComplex, Vec3};
use crate::kinetics::{StepControl, SurfacePoint};

#[derive(Clone, Copy, Debug)]
pub struct RdtConfig {
    /// Samples of the level along each Voronoi edge.
    pub samples: usize,
    /// Bisection resolution, relative to the circumradius.
    pub bisection_tol: f64,
    /// The neighbourhood radius of a sample is `radius_factor` times the
    /// distance to its `neighbors`-th nearest sample.
    pub neighbors: usize,
    pub radius_factor: f64,
    /// Lower bound on the neighbourhood radius as a multiple of the
    /// sample's length scale; zero disables it.
    pub rho_factor: f64,
    /// Radius doublings tried when the result is not a manifold.
    pub max_doublings: u32,
}

impl Default for RdtConfig {
    fn default() -> Self {
        RdtConfig {
            samples: 33,
            bisection_tol: 1e-10,
            neighbors: 6,
            radius_factor: 1.2,
            rho_factor: 0.0,
            max_doublings: 3,
        }
    }
}

/// Line through the circumcenter of a triangle along its normal.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DualLine {
    pub center: Vec3,
    pub normal: Vec3,
    pub radius: f64,
}

impl DualLine {
    pub fn new(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Self> {
        let center = super::circumcenter(a, b, c)?;
        let normal = (b - a).cross(&(c - a)).normalize();
        Some(DualLine {
            center,
            normal,
            radius: (center - a).norm(),
        })
    }

    pub fn at(&self, s: f64) -> Vec3 {
        self.center + s * self.normal
    }
}

/// Parameter interval of the dual line on which the triangle's vertices are
/// nearest among `others`, intersected with `[-limit, limit]` and the box.
pub(crate) fn voronoi_interval<'a>(
    line: &DualLine,
    others: impl IntoIterator<Item = &'a Vec3>,
    limit: f64,
    domain: &Aabb,
) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (-limit, limit);
    for i in 0..3 {
        let n = line.normal[i];
        let c = line.center[i];
        if n.abs() < 1e-300 {
            if c < domain.min[i] || c > domain.max[i] {
                return None;
            }
            continue;
        }
        let (s1, s2) = ((domain.min[i] - c) / n, (domain.max[i] - c) / n);
        lo = lo.max(s1.min(s2));
        hi = hi.min(s1.max(s2));
    }
    let r2 = line.radius * line.radius;
    let tiny = 1e-14 * line.radius;
    for p in others {
        let alpha = 2.0 * line.normal.dot(&(p - line.center));
        let beta = (line.center - p).norm_squared() - r2;
        if alpha.abs() <= tiny {
            if beta < 0.0 {
                return None;
            }
        } else if alpha > 0.0 {
            hi = hi.min(beta / alpha);
        } else {
            lo = lo.max(beta / alpha);
        }
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}

/// First crossing of `level = tau` on `[lo, hi]` of the line, found by
/// uniform sampling and bisection.
pub(crate) fn level_crossing(
    complex: &MixedComplex,
    line: &DualLine,
    (lo, hi): (f64, f64),
    tau: f64,
    samples: usize,
    tol: f64,
    hint: &mut CellId,
) -> Option<Vec3> {
    let n = samples.max(2);
    let mut f = |s: f64| complex.level_near(&line.at(s), hint).map(|v| v - tau);
    let mut prev_s = lo;
    let mut prev_f = f(lo).ok()?;
    if prev_f == 0.0 {
        return Some(line.at(lo));
    }
    for k in 1..n {
        let s = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let fs = f(s).ok()?;
        if fs == 0.0 {
            return Some(line.at(s));
        }
        if (fs > 0.0) != (prev_f > 0.0) {
            let (mut a, mut b, mut fa) = (prev_s, s, prev_f);
            while (b - a) > tol * line.radius.max(1e-300) {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = f(m).ok()?;
                if (fm > 0.0) == (fa > 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            return Some(line.at(0.5 * (a + b)));
        }
        prev_s = s;
        prev_f = fs;
    }
    None
}

/// Witness point of a restricted Delaunay triangle: where its restricted
/// Voronoi edge meets the surface, within `limit` of the circumcenter.
pub(crate) fn dual_crossing<'a>(
    complex: &MixedComplex,
    tri: [&Vec3; 3],
    others: impl IntoIterator<Item = &'a Vec3>,
    limit: f64,
    tau: f64,
    cfg: &RdtConfig,
    hint: &mut CellId,
) -> Option<Vec3> {
    let line = DualLine::new(tri[0], tri[1], tri[2])?;
    let interval = voronoi_interval(&line, others, limit, complex.domain())?;
    level_crossing(
        complex,
        &line,
        interval,
        tau,
        cfg.samples,
        cfg.bisection_tol,
        hint,
    )
}

/// A sample as seen by the triangle search: id, position, length scale.
pub(crate) type Site = (usize, Vec3, f64);

fn site_tree(points: &[Site]) -> Result<(Vec<[f64; 3]>, ImmutableKdTree<f64, 3>)> {
    let coords: Vec<[f64; 3]> = points.iter().map(|(_, p, _)| [p.x, p.y, p.z]).collect();
    let tree = ImmutableKdTree::new_from_slice(&coords)
        .map_err(|e| Error::numeric(format!("k-d tree: {e:?}")))?;
    Ok((coords, tree))
}

/// Neighbourhood radius of the sites passing `wanted` (zero for the
/// rest): restricted Delaunay triangles at a site are searched among
/// circumradii up to this value.
pub(crate) fn site_radii(
    points: &[Site],
    cfg: &RdtConfig,
    factor: f64,
    wanted: impl Fn(usize) -> bool,
) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Ok(points.iter().map(|s| cfg.rho_factor * s.2).collect());
    }
    let (coords, tree) = site_tree(points)?;
    let k = (cfg.neighbors + 1).min(points.len());
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if !wanted(s.0) {
                return 0.0;
            }
            let knn = tree
                .query(&coords[i])
                .nearest_n::<SquaredEuclidean<f64>>(NonZero::new(k).unwrap())
                .execute();
            let dk = knn.last().map(|r| r.distance.sqrt()).unwrap_or(0.0);
            (factor * dk).max(cfg.rho_factor * s.2)
        })
        .collect())
}

/// Restricted Delaunay triangles among `points` (all at kinetic time `tau`)
/// that have at least one vertex passing `source`. `radii` comes from
/// [`site_radii`].
pub(crate) fn restricted_triangles(
    complex: &MixedComplex,
    points: &[Site],
    radii: &[f64],
    tau: f64,
    cfg: &RdtConfig,
    source: impl Fn(usize) -> bool,
) -> Result<BTreeSet<Triangle>> {
    let mut out = BTreeSet::new();
    if points.len() < 3 {
        return Ok(out);
    }
    let (coords, tree) = site_tree(points)?;
    let mut hint: CellId = 0;
    let mut nbrs: Vec<usize> = Vec::new();
    for (ia, &(a, pa, _)) in points.iter().enumerate() {
        if !source(a) {
            continue;
        }
        // each triangle is reported by its smallest source vertex
        let owns = |v: usize| v > a || !source(v);
        let r_a = radii[ia];
        let reach = 2.0 * r_a;
        nbrs.clear();
        nbrs.extend(
            tree.query(&coords[ia])
                .within::<SquaredEuclidean<f64>>(reach * reach)
                .execute()
                .into_iter()
                .map(|r| r.item as usize)
                .filter(|&i| i != ia),
        );
        for (jb, &ib) in nbrs.iter().enumerate() {
            let (b, pb, _) = points[ib];
            if !owns(b) {
                continue;
            }
            for &ic in &nbrs[jb + 1..] {
                let (c, pc, _) = points[ic];
                if !owns(c) || (pc - pb).norm() > reach {
                    continue;
                }
                let Some(line) = DualLine::new(&pa, &pb, &pc) else {
                    continue;
                };
                if line.radius > r_a {
                    continue;
                }
                let limit = (r_a * r_a - line.radius * line.radius).sqrt();
                let others = nbrs
                    .iter()
                    .filter(|&&i| i != ib && i != ic)
                    .map(|&i| &points[i].1);
                let Some(interval) = voronoi_interval(&line, others, limit, complex.domain())
                else {
                    continue;
                };
                if level_crossing(
                    complex,
                    &line,
                    interval,
                    tau,
                    cfg.samples,
                    cfg.bisection_tol,
                    &mut hint,
                )
                .is_some()
                {
                    out.insert(sorted_triangle(a, b, c));
                }
            }
        }
    }
    Ok(out)
}

/// Restricted Delaunay triangulation of samples taken at one common time.
/// The neighbourhood radius is doubled until the result is a closed
/// manifold or the doubling budget runs out.
pub fn restricted_delaunay(
    points: &[SurfacePoint],
    complex: &MixedComplex,
    cfg: &RdtConfig,
) -> Result<SurfaceMesh> {
    let mut mesh = SurfaceMesh::from_points(points.to_vec());
    if points.is_empty() {
        return Ok(mesh);
    }
    let tau = points[0].time;
    if let Some(p) = points
        .iter()
        .find(|p| (p.time - tau).abs() > 1e-12 * tau.abs().max(1.0))
    {
        return Err(Error::invalid(format!(
            "samples at different times {tau} and {}",
            p.time
        )));
    }
    rebuild(&mut mesh, complex, tau, cfg)?;
    mesh.take_delta();
    Ok(mesh)
}

fn sites(mesh: &SurfaceMesh, ids: impl IntoIterator<Item = usize>) -> Vec<Site> {
    ids.into_iter()
        .map(|v| {
            let p = mesh.vertex(v).expect("live vertex");
            (v, p.world, p.rho)
        })
        .collect()
}

/// Recompute all triangles of `mesh` from its (synchronised) vertices.
pub(crate) fn rebuild(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    tau: f64,
    cfg: &RdtConfig,
) -> Result<()> {
    let points = sites(mesh, mesh.vertex_ids().collect::<Vec<_>>());
    let mut factor = cfg.radius_factor;
    let mut last_err = None;
    for _ in 0..=cfg.max_doublings {
        let radii = site_radii(&points, cfg, factor, |_| true)?;
        let tris = restricted_triangles(complex, &points, &radii, tau, cfg, |_| true)?;
        mesh.set_triangles(tris);
        match mesh.check_manifold() {
            Ok(()) => return Ok(()),
            Err(e) => last_err = Some(e),
        }
        factor *= 2.0;
    }
    Err(last_err.unwrap())
}

/// Recompute the triangles touching vertices within `radius` of `center`.
/// Vertices are synchronised to `tau` as far as the search needs. Where
/// the patch does not fit the untouched mesh, the region grows; the last
/// resort is a full rebuild.
pub(crate) fn rebuild_local(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    center: &Vec3,
    radius: f64,
    tau: f64,
    cfg: &RdtConfig,
    control: StepControl,
) -> Result<()> {
    let mut radius = radius;
    for _ in 0..4 {
        if patch_region(mesh, complex, center, radius, tau, cfg, control)? {
            return Ok(());
        }
        radius *= 1.6;
    }
    mesh.sync_all(complex, tau, control)?;
    rebuild(mesh, complex, tau, cfg)
}

fn patch_region(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    center: &Vec3,
    radius: f64,
    tau: f64,
    cfg: &RdtConfig,
    control: StepControl,
) -> Result<bool> {
    let inner = mesh.sync_near(complex, center, radius, tau, control)?;
    if inner.is_empty() {
        return Ok(true);
    }
    let inside: HashSet<usize> = inner.iter().copied().collect();
    let mut margin = radius;
    let (points, radii) = loop {
        let ids = mesh.sync_near(complex, center, radius + margin, tau, control)?;
        let points = sites(mesh, ids);
        let radii = site_radii(&points, cfg, cfg.radius_factor, |v| inside.contains(&v))?;
        let need = points
            .iter()
            .zip(&radii)
            .filter(|(s, _)| inside.contains(&s.0))
            .map(|(_, r)| 2.0 * r)
            .fold(0.0, f64::max);
        if need <= margin || points.len() == mesh.num_vertices() {
            break (points, radii);
        }
        margin = 1.5 * need;
    };
    let tris = restricted_triangles(complex, &points, &radii, tau, cfg, |v| inside.contains(&v))?;
    let stale: BTreeSet<Triangle> = inner
        .iter()
        .flat_map(|&v| mesh.star(v).iter().copied())
        .collect();
    for t in stale.difference(&tris) {
        mesh.remove_triangle(t);
    }
    for t in tris {
        mesh.add_triangle(t);
    }
    let mut check: BTreeSet<usize> = inner.iter().copied().collect();
    for &v in &inner {
        check.extend(mesh.neighbors(v));
    }
    let check: Vec<usize> = check.into_iter().collect();
    Ok(mesh.check_manifold_at(&check).is_ok())
}

/// Brute-force check that every triangle of `mesh` is restricted Delaunay
/// with respect to all vertices, and that no missing triple is.
pub fn verify_restricted_delaunay(
    mesh: &SurfaceMesh,
    complex: &MixedComplex,
    tau: f64,
    cfg: &RdtConfig,
) -> Result<()> {
    let ids: Vec<usize> = mesh.vertex_ids().collect();
    let pos: Vec<Vec3> = ids.iter().map(|&v| mesh.position(v)).collect();
    let limit = complex.domain().diagonal();
    let mut hint = 0;
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            for k in j + 1..ids.len() {
                let others = (0..ids.len())
                    .filter(|&m| m != i && m != j && m != k)
                    .map(|m| &pos[m]);
                let present = mesh.has_triangle(&[ids[i], ids[j], ids[k]]);
                let witness = dual_crossing(
                    complex,
                    [&pos[i], &pos[j], &pos[k]],
                    others,
                    limit,
                    tau,
                    cfg,
                    &mut hint,
                );
                if present != witness.is_some() {
                    return Err(Error::NonManifold(format!(
                        "triangle {:?} is {} but should{} be",
                        [ids[i], ids[j], ids[k]],
                        if present { "present" } else { "missing" },
                        if present { " not" } else { "" }
                    )));
                }
            }
        }
    }
    Ok(())
}
