//! Edge contraction, vertex insertion and lazy edge flips.
//!
//! Each operation first edits the connectivity combinatorially and restores
//! the local restricted Delaunay property with flips. A local recomputation
//! then confirms the result; where the two disagree the recomputed
//! triangles win and the disagreement is counted.

use std::collections::{BTreeSet, HashSet};

use super::restricted::{level_crossing, rebuild_local, voronoi_interval, DualLine, RdtConfig};
use super::{
    circumcenter, circumradius, sorted_edge, sorted_triangle, Edge, MeshDelta, SurfaceMesh,
    Triangle,
};
use crate::error::{Error, Result};
use crate::geometry::{MixedComplex, Vec3};
use crate::kinetics::{project_to_level, StepControl, SurfacePoint};

#[derive(Clone, Copy, Debug)]
pub struct MeshConfig {
    pub rdt: RdtConfig,
    pub control: StepControl,
    /// Radius of the recomputed region in units of the largest nearby
    /// circumradius, beyond the operated element.
    pub local_radius: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            rdt: RdtConfig::default(),
            control: StepControl::default(),
            local_radius: 2.2,
        }
    }
}

/// Advance the two-ring of `seeds` to `tau` and return the largest
/// circumradius among the triangles touching it.
fn prepare_neighbourhood(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    seeds: &[usize],
    tau: f64,
    control: StepControl,
) -> Result<f64> {
    let mut ring: BTreeSet<usize> = seeds.iter().copied().collect();
    for _ in 0..2 {
        let next: Vec<usize> = ring.iter().flat_map(|&v| mesh.neighbors(v)).collect();
        ring.extend(next);
    }
    for &v in &ring {
        mesh.advance_vertex(v, complex, tau, control)?;
    }
    let mut r_max: f64 = 0.0;
    for &v in seeds {
        for &u in mesh.neighbors(v).iter().chain([v].iter()) {
            for t in mesh.star(u) {
                if t.iter().all(|x| ring.contains(x)) {
                    r_max = r_max.max(circumradius(
                        &mesh.position(t[0]),
                        &mesh.position(t[1]),
                        &mesh.position(t[2]),
                    ));
                }
            }
        }
    }
    Ok(r_max)
}

/// Replace edge `uv` by one vertex at the surface point nearest its
/// midpoint.
pub fn contract_edge(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    edge: Edge,
    tau: f64,
    cfg: &MeshConfig,
) -> Result<MeshDelta> {
    let [u, v] = edge;
    if !mesh.has_edge(u, v) {
        return Err(Error::invalid(format!("edge {edge:?} is not in the mesh")));
    }
    let r_max = prepare_neighbourhood(mesh, complex, &[u, v], tau, cfg.control)?;
    let center = 0.5 * (mesh.position(u) + mesh.position(v));
    let radius = 0.5 * (mesh.position(u) - mesh.position(v)).norm() + cfg.local_radius * r_max;
    let hint = mesh.vertex(u).unwrap().cell;
    let (x, cell) = project_to_level(complex, center, tau, Some(hint))?;
    let w = mesh.add_vertex(SurfacePoint::at_cell(complex, x, cell, tau));

    let opposite: BTreeSet<usize> = mesh
        .edge_triangles(&edge)
        .iter()
        .flat_map(|t| t.iter().copied())
        .filter(|&x| x != u && x != v)
        .collect();
    let common: BTreeSet<usize> = mesh
        .neighbors(u)
        .intersection(&mesh.neighbors(v))
        .copied()
        .collect();
    let link_ok = opposite.len() == 2 && common == opposite;

    let old: BTreeSet<Triangle> = mesh.star(u).iter().chain(mesh.star(v)).copied().collect();
    for t in &old {
        mesh.remove_triangle(t);
    }
    if link_ok {
        for t in &old {
            if t.contains(&u) && t.contains(&v) {
                continue;
            }
            let [a, b, c] = t.map(|x| if x == u || x == v { w } else { x });
            mesh.add_triangle(sorted_triangle(a, b, c));
        }
    }
    mesh.remove_vertex(u, tau)?;
    mesh.remove_vertex(v, tau)?;
    if link_ok {
        let region: Vec<Edge> = mesh
            .star(w)
            .iter()
            .flat_map(super::triangle_edges)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        flip_edges(mesh, complex, &region, tau, &cfg.rdt)?;
    }
    settle(mesh, complex, &center, radius, tau, cfg)?;
    Ok(mesh.take_delta())
}

/// Add a vertex at the projection of the triangle's circumcenter.
pub fn insert_vertex(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    tri: Triangle,
    tau: f64,
    cfg: &MeshConfig,
) -> Result<MeshDelta> {
    if !mesh.has_triangle(&tri) {
        return Err(Error::invalid(format!(
            "triangle {tri:?} is not in the mesh"
        )));
    }
    let r_max = prepare_neighbourhood(mesh, complex, &tri, tau, cfg.control)?;
    let [a, b, c] = tri.map(|v| mesh.position(v));
    let center = circumcenter(&a, &b, &c)
        .ok_or_else(|| Error::numeric(format!("triangle {tri:?} is degenerate")))?;
    let radius = cfg.local_radius * r_max;
    let hint = mesh.vertex(tri[0]).unwrap().cell;
    let (x, cell) = project_to_level(complex, center, tau, Some(hint))?;
    let w = mesh.add_vertex(SurfacePoint::at_cell(complex, x, cell, tau));
    mesh.remove_triangle(&tri);
    for [p, q] in super::triangle_edges(&tri) {
        mesh.add_triangle(sorted_triangle(p, q, w));
    }
    flip_edges(mesh, complex, &super::triangle_edges(&tri), tau, &cfg.rdt)?;
    settle(mesh, complex, &center, radius, tau, cfg)?;
    Ok(mesh.take_delta())
}

fn settle(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    center: &Vec3,
    radius: f64,
    tau: f64,
    cfg: &MeshConfig,
) -> Result<()> {
    let mut pending = mesh.take_delta();
    rebuild_local(mesh, complex, center, radius, tau, &cfg.rdt, cfg.control)?;
    let correction = mesh.take_delta();
    if !correction.is_empty() {
        mesh.corrections += 1;
    }
    pending.merge(correction);
    mesh.delta = pending;
    Ok(())
}

/// Whether triangle `tri` has a restricted Voronoi crossing when only
/// `other` competes with its vertices.
fn locally_restricted(
    complex: &MixedComplex,
    tri: [&Vec3; 3],
    other: &Vec3,
    limit: f64,
    tau: f64,
    cfg: &RdtConfig,
) -> bool {
    let Some(line) = DualLine::new(tri[0], tri[1], tri[2]) else {
        return false;
    };
    let mut hint = 0;
    voronoi_interval(&line, [other], limit, complex.domain())
        .and_then(|iv| {
            level_crossing(
                complex,
                &line,
                iv,
                tau,
                cfg.samples,
                cfg.bisection_tol,
                &mut hint,
            )
        })
        .is_some()
}

/// Flip edges of `region`, and edges exposed by flips, until each is
/// locally restricted Delaunay. Vertices involved must be at time `tau`.
/// Returns the flips' own changes; earlier pending changes stay pending.
pub fn flip_edges(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    region: &[Edge],
    tau: f64,
    cfg: &RdtConfig,
) -> Result<MeshDelta> {
    let mut pending = mesh.take_delta();
    let flipped = flip_in_place(mesh, complex, region, tau, cfg);
    let own = mesh.take_delta();
    pending.merge(own.clone());
    mesh.delta = pending;
    flipped.map(|_| own)
}

fn flip_in_place(
    mesh: &mut SurfaceMesh,
    complex: &MixedComplex,
    region: &[Edge],
    tau: f64,
    cfg: &RdtConfig,
) -> Result<()> {
    let mut stack: Vec<Edge> = region.to_vec();
    let local: HashSet<Triangle> = region
        .iter()
        .flat_map(|e| e.iter().flat_map(|&v| mesh.star(v).iter().copied()))
        .collect();
    let limit_flips = (local.len() + region.len()).pow(2).max(16);
    let mut flips = 0;
    while let Some(e) = stack.pop() {
        if !mesh.has_edge(e[0], e[1]) {
            continue;
        }
        let tris = mesh.edge_triangles(&e);
        if tris.len() != 2 {
            continue;
        }
        let opp = |t: &Triangle| *t.iter().find(|&&x| x != e[0] && x != e[1]).unwrap();
        let (c, d) = (opp(&tris[0]), opp(&tris[1]));
        if c == d || mesh.has_edge(c, d) {
            continue;
        }
        if [e[0], e[1], c, d]
            .iter()
            .any(|&v| mesh.vertex(v).unwrap().time != tau)
        {
            continue;
        }
        let [pa, pb, pc, pd] = [e[0], e[1], c, d].map(|v| mesh.position(v));
        let limit = [pa, pb, pc, pd]
            .iter()
            .flat_map(|p| [pa, pb, pc, pd].map(|q| (p - q).norm()))
            .fold(0.0, f64::max);
        let ok_now = locally_restricted(complex, [&pa, &pb, &pc], &pd, limit, tau, cfg)
            && locally_restricted(complex, [&pa, &pb, &pd], &pc, limit, tau, cfg);
        if ok_now {
            continue;
        }
        if !convex_in_tangent_plane(complex, &pa, &pb, &pc, &pd) {
            continue;
        }
        let ok_flipped = locally_restricted(complex, [&pc, &pd, &pa], &pb, limit, tau, cfg)
            && locally_restricted(complex, [&pc, &pd, &pb], &pa, limit, tau, cfg);
        if !ok_flipped {
            continue;
        }
        flips += 1;
        if flips > limit_flips {
            return Err(Error::FlipLimit(limit_flips));
        }
        mesh.remove_triangle(&tris[0]);
        mesh.remove_triangle(&tris[1]);
        mesh.add_triangle(sorted_triangle(c, d, e[0]));
        mesh.add_triangle(sorted_triangle(c, d, e[1]));
        for x in [c, d] {
            stack.push(sorted_edge(e[0], x));
            stack.push(sorted_edge(e[1], x));
        }
    }
    Ok(())
}

/// Quad `a c b d` (diagonal `ab`) is convex when projected onto the tangent
/// plane at the midpoint of `ab`, so that `cd` is a valid diagonal.
fn convex_in_tangent_plane(complex: &MixedComplex, a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> bool {
    let m = 0.5 * (a + b);
    let Ok(cell) = complex.locate(&m) else {
        return false;
    };
    let n = complex.cell(cell).frame.level_gradient(&m);
    if n.norm() == 0.0 {
        return false;
    }
    let n = n.normalize();
    let proj = |p: &Vec3| p - n.dot(&(p - m)) * n;
    let (a, b, c, d) = (proj(a), proj(b), proj(c), proj(d));
    let side = |p: &Vec3, q: &Vec3, r: &Vec3| n.dot(&(q - p).cross(&(r - p)));
    // c and d on opposite sides of ab, a and b on opposite sides of cd
    side(&a, &b, &c) * side(&a, &b, &d) < 0.0 && side(&c, &d, &a) * side(&c, &d, &b) < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WeightedSphere;
    use crate::mesh::restricted::verify_restricted_delaunay;
    use crate::mesh::{circumradius, restricted_delaunay};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> MixedComplex {
        MixedComplex::new(&[WeightedSphere::new(Vec3::zeros(), 2.0).unwrap()]).unwrap()
    }

    fn random_sphere_mesh(mc: &MixedComplex, n: usize, seed: u64) -> SurfaceMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<SurfacePoint> = (0..n)
            .map(|_| {
                let d = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                SurfacePoint::on_surface(mc, d.normalize(), 0.0).unwrap()
            })
            .collect();
        restricted_delaunay(&pts, mc, &RdtConfig::default()).unwrap()
    }

    #[test]
    fn contraction_removes_one_vertex_and_stays_delaunay() {
        let mc = unit();
        let mut mesh = random_sphere_mesh(&mc, 80, 3);
        let n = mesh.num_vertices();
        let e = mesh.edges()[5];
        let delta = contract_edge(&mut mesh, &mc, e, 0.0, &MeshConfig::default()).unwrap();
        assert_eq!(mesh.num_vertices(), n - 1);
        assert!(delta
            .removed
            .contains(&crate::scheduler::ElementId::Edge(e)));
        mesh.check_manifold().unwrap();
        assert_eq!(mesh.euler_characteristic(), 2);
        verify_restricted_delaunay(&mesh, &mc, 0.0, &RdtConfig::default()).unwrap();
    }

    #[test]
    fn symmetric_contraction_lands_on_great_circle_midpoint() {
        let mc = unit();
        let mut mesh = random_sphere_mesh(&mc, 60, 11);
        let e = mesh.edges()[0];
        let mid = (mesh.position(e[0]) + mesh.position(e[1])).normalize();
        contract_edge(&mut mesh, &mc, e, 0.0, &MeshConfig::default()).unwrap();
        let w = mesh.vertex_ids().max().unwrap();
        assert!((mesh.position(w) - mid).norm() < 1e-12);
    }

    #[test]
    fn insertion_adds_one_vertex_and_shrinks_the_star() {
        let mc = unit();
        let mut mesh = random_sphere_mesh(&mc, 80, 5);
        let n = mesh.num_vertices();
        let tri = *mesh
            .triangles()
            .max_by(|a, b| {
                let r = |t: &Triangle| {
                    circumradius(
                        &mesh.position(t[0]),
                        &mesh.position(t[1]),
                        &mesh.position(t[2]),
                    )
                };
                r(a).total_cmp(&r(b))
            })
            .unwrap();
        let r0 = circumradius(
            &mesh.position(tri[0]),
            &mesh.position(tri[1]),
            &mesh.position(tri[2]),
        );
        insert_vertex(&mut mesh, &mc, tri, 0.0, &MeshConfig::default()).unwrap();
        assert_eq!(mesh.num_vertices(), n + 1);
        assert!(!mesh.has_triangle(&tri));
        let w = mesh.vertex_ids().max().unwrap();
        for t in mesh.star(w) {
            let r = circumradius(
                &mesh.position(t[0]),
                &mesh.position(t[1]),
                &mesh.position(t[2]),
            );
            assert!(r < r0, "{r} >= {r0}");
        }
        mesh.check_manifold().unwrap();
        verify_restricted_delaunay(&mesh, &mc, 0.0, &RdtConfig::default()).unwrap();
    }

    #[test]
    fn delaunay_mesh_needs_no_flips() {
        let mc = unit();
        let mut mesh = random_sphere_mesh(&mc, 60, 2);
        let edges = mesh.edges();
        let delta = flip_edges(&mut mesh, &mc, &edges, 0.0, &RdtConfig::default()).unwrap();
        assert!(delta.is_empty());
    }

    #[test]
    fn bad_diagonal_on_flat_patch_is_flipped_once() {
        // near-flat patch of a large sphere: quad with the long diagonal
        let mc = MixedComplex::new(&[WeightedSphere::new(Vec3::zeros(), 2.0e4).unwrap()]).unwrap();
        let r = 100.0;
        let on = |x: f64, y: f64| SurfacePoint::on_surface(&mc, Vec3::new(x, y, r), 0.0).unwrap();
        let pts = vec![on(-1.0, 0.0), on(1.0, 0.0), on(0.0, 0.4), on(0.0, -0.4)];
        let mut mesh = SurfaceMesh::from_points(pts);
        mesh.add_triangle([0, 1, 2]);
        mesh.add_triangle([0, 1, 3]);
        let before: Vec<usize> = mesh.vertex_ids().collect();
        mesh.take_delta();
        let delta = flip_edges(&mut mesh, &mc, &[[0, 1]], 0.0, &RdtConfig::default()).unwrap();
        assert!(mesh.has_edge(2, 3) && !mesh.has_edge(0, 1));
        assert_eq!(delta.removed.len(), 3);
        assert_eq!(mesh.vertex_ids().collect::<Vec<_>>(), before);
    }
}
