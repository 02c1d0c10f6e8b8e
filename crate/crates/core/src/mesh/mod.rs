//! The sampled surface mesh: restricted Delaunay connectivity, element
//! measurement, restructuring operations and bootstrap sampling.

pub mod ops;
pub mod restricted;
pub mod sampling;

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{MixedComplex, Vec3};
use crate::kinetics::{advance_to, StepControl, SurfacePoint};
use crate::scheduler::{ElementId, Measurement, Restructure};

pub use ops::{contract_edge, flip_edges, insert_vertex, MeshConfig};
pub use restricted::{restricted_delaunay, RdtConfig};
pub use sampling::{bootstrap_samples, SamplingConfig};

/// Triangle as sorted vertex ids.
pub type Triangle = [usize; 3];
/// Edge as sorted vertex ids.
pub type Edge = [usize; 2];

pub fn sorted_triangle(a: usize, b: usize, c: usize) -> Triangle {
    let mut t = [a, b, c];
    t.sort_unstable();
    t
}

pub fn sorted_edge(a: usize, b: usize) -> Edge {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn triangle_edges(t: &Triangle) -> [Edge; 3] {
    [[t[0], t[1]], [t[0], t[2]], [t[1], t[2]]]
}

/// Net element changes since the last [`SurfaceMesh::take_delta`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshDelta {
    pub removed: BTreeSet<ElementId>,
    pub added: BTreeSet<ElementId>,
}

impl MeshDelta {
    fn remove(&mut self, e: ElementId) {
        if !self.added.remove(&e) {
            self.removed.insert(e);
        }
    }

    fn add(&mut self, e: ElementId) {
        if !self.removed.remove(&e) {
            self.added.insert(e);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }

    /// Compose with a later delta.
    pub fn merge(&mut self, later: MeshDelta) {
        for e in later.removed {
            self.remove(e);
        }
        for e in later.added {
            self.add(e);
        }
    }
}

impl From<MeshDelta> for Restructure {
    fn from(d: MeshDelta) -> Self {
        Restructure {
            removed: d.removed.into_iter().collect(),
            added: d.added.into_iter().collect(),
        }
    }
}

/// Birth and death of a vertex, in kinetic time.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexLife {
    pub birth: f64,
    pub position: Vec3,
    pub death: Option<f64>,
}

/// Vertices carry their own time stamps and are advanced lazily; element
/// measurements assume the caller synchronised the vertices involved.
#[derive(Clone, Debug, Default)]
pub struct SurfaceMesh {
    vertices: Vec<Option<SurfacePoint>>,
    lives: Vec<VertexLife>,
    triangles: BTreeSet<Triangle>,
    edges: HashMap<Edge, u32>,
    star: Vec<Vec<Triangle>>,
    delta: MeshDelta,
    corrections: u64,
}

impl SurfaceMesh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<SurfacePoint>) -> Self {
        let mut mesh = Self::new();
        for p in points {
            mesh.add_vertex(p);
        }
        mesh
    }

    pub fn add_vertex(&mut self, p: SurfacePoint) -> usize {
        self.lives.push(VertexLife {
            birth: p.time,
            position: p.world,
            death: None,
        });
        self.vertices.push(Some(p));
        self.star.push(Vec::new());
        self.vertices.len() - 1
    }

    /// Retire a vertex; it must not be used by any triangle.
    pub fn remove_vertex(&mut self, id: usize, time: f64) -> Result<()> {
        if !self.star[id].is_empty() {
            return Err(Error::NonManifold(format!(
                "vertex {id} removed while still in use"
            )));
        }
        self.vertices[id] = None;
        self.lives[id].death = Some(time);
        Ok(())
    }

    pub fn vertex(&self, id: usize) -> Option<&SurfacePoint> {
        self.vertices.get(id).and_then(|v| v.as_ref())
    }

    pub fn position(&self, id: usize) -> Vec3 {
        self.vertex(id).expect("live vertex").world
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| i)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.iter().filter(|v| v.is_some()).count()
    }

    /// Restructurings whose flipped connectivity had to be corrected by
    /// local recomputation.
    pub fn corrections(&self) -> u64 {
        self.corrections
    }

    /// Every vertex slot ever allocated, including retired ones.
    pub fn lives(&self) -> &[VertexLife] {
        &self.lives
    }

    pub fn triangles(&self) -> impl Iterator<Item = &Triangle> {
        self.triangles.iter()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn has_triangle(&self, t: &Triangle) -> bool {
        self.triangles.contains(t)
    }

    pub fn edges(&self) -> Vec<Edge> {
        let mut e: Vec<Edge> = self.edges.keys().copied().collect();
        e.sort_unstable();
        e
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains_key(&sorted_edge(a, b))
    }

    pub fn star(&self, v: usize) -> &[Triangle] {
        &self.star[v]
    }

    pub fn edge_triangles(&self, e: &Edge) -> Vec<Triangle> {
        self.star[e[0]]
            .iter()
            .filter(|t| t.contains(&e[1]))
            .copied()
            .collect()
    }

    /// Vertices sharing an edge with `v`.
    pub fn neighbors(&self, v: usize) -> BTreeSet<usize> {
        self.star[v]
            .iter()
            .flat_map(|t| t.iter().copied())
            .filter(|&u| u != v)
            .collect()
    }

    pub fn elements(&self) -> Vec<ElementId> {
        let mut out: Vec<ElementId> = self
            .edges()
            .into_iter()
            .map(ElementId::Edge)
            .collect();
        out.extend(self.triangles.iter().map(|t| ElementId::Triangle(*t)));
        out
    }

    pub fn contains_element(&self, id: &ElementId) -> bool {
        match id {
            ElementId::Edge(e) => self.edges.contains_key(e),
            ElementId::Triangle(t) => self.triangles.contains(t),
        }
    }

    pub fn add_triangle(&mut self, t: Triangle) {
        debug_assert!(t[0] < t[1] && t[1] < t[2]);
        if !self.triangles.insert(t) {
            return;
        }
        for v in t {
            self.star[v].push(t);
        }
        for e in triangle_edges(&t) {
            let count = self.edges.entry(e).or_insert(0);
            *count += 1;
            if *count == 1 {
                self.delta.add(ElementId::Edge(e));
            }
        }
        self.delta.add(ElementId::Triangle(t));
    }

    pub fn remove_triangle(&mut self, t: &Triangle) -> bool {
        if !self.triangles.remove(t) {
            return false;
        }
        for v in t {
            let s = &mut self.star[*v];
            if let Some(i) = s.iter().position(|x| x == t) {
                s.swap_remove(i);
            }
        }
        for e in triangle_edges(t) {
            let count = self.edges.get_mut(&e).expect("edge of a live triangle");
            *count -= 1;
            if *count == 0 {
                self.edges.remove(&e);
                self.delta.remove(ElementId::Edge(e));
            }
        }
        self.delta.remove(ElementId::Triangle(*t));
        true
    }

    /// Replace the whole triangle set, touching only what differs.
    pub fn set_triangles(&mut self, triangles: BTreeSet<Triangle>) {
        let stale: Vec<Triangle> = self.triangles.difference(&triangles).copied().collect();
        for t in &stale {
            self.remove_triangle(t);
        }
        for t in triangles {
            self.add_triangle(t);
        }
    }

    pub fn take_delta(&mut self) -> MeshDelta {
        std::mem::take(&mut self.delta)
    }

    /// `V - E + F` over live vertices.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Closed 2-manifold test: every edge has two triangles and every
    /// vertex link is a single cycle.
    pub fn check_manifold(&self) -> Result<()> {
        let ids: Vec<usize> = self.vertex_ids().collect();
        self.check_manifold_at(&ids)
    }

    /// Manifold test restricted to the given vertices and their edges.
    pub fn check_manifold_at(&self, vertices: &[usize]) -> Result<()> {
        let mut problems = Vec::new();
        for &v in vertices {
            if self.vertex(v).is_none() {
                continue;
            }
            if let Err(msg) = self.link_is_cycle(v) {
                problems.push(msg);
            }
            if problems.len() >= 8 {
                break;
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::NonManifold(problems.join("; ")))
        }
    }

    fn link_is_cycle(&self, v: usize) -> std::result::Result<(), String> {
        let star = &self.star[v];
        if star.is_empty() {
            return Err(format!("vertex {v} has no triangles"));
        }
        let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
        for t in star {
            let others: Vec<usize> = t.iter().copied().filter(|&u| u != v).collect();
            adjacency.entry(others[0]).or_default().push(others[1]);
            adjacency.entry(others[1]).or_default().push(others[0]);
        }
        if let Some((u, nb)) = adjacency.iter().find(|(_, nb)| nb.len() != 2) {
            return Err(format!(
                "edge {:?} has {} triangles",
                sorted_edge(v, *u),
                nb.len()
            ));
        }
        // walk the cycle
        let start = *adjacency.keys().next().unwrap();
        let (mut prev, mut cur) = (start, adjacency[&start][0]);
        let mut steps = 1;
        while cur != start {
            let nb = &adjacency[&cur];
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
            steps += 1;
            if steps > adjacency.len() {
                break;
            }
        }
        if steps != adjacency.len() {
            return Err(format!("link of vertex {v} is not a single cycle"));
        }
        Ok(())
    }

    /// Move a vertex forward to kinetic time `time`.
    pub fn advance_vertex(
        &mut self,
        id: usize,
        complex: &MixedComplex,
        time: f64,
        control: StepControl,
    ) -> Result<()> {
        let p = self.vertices[id]
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("vertex {id} is retired")))?;
        if p.time < time {
            let q = advance_to(complex, p, time, control)?;
            self.vertices[id] = Some(q);
        }
        Ok(())
    }

    pub fn sync_all(
        &mut self,
        complex: &MixedComplex,
        time: f64,
        control: StepControl,
    ) -> Result<()> {
        let ids: Vec<usize> = self.vertex_ids().collect();
        for id in ids {
            self.advance_vertex(id, complex, time, control)?;
        }
        Ok(())
    }

    /// Live vertices within `radius` of `center` at kinetic time `time`;
    /// every candidate is advanced to `time` first.
    pub fn sync_near(
        &mut self,
        complex: &MixedComplex,
        center: &Vec3,
        radius: f64,
        time: f64,
        control: StepControl,
    ) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for id in 0..self.vertices.len() {
            let Some(p) = &self.vertices[id] else {
                continue;
            };
            let lag = time - p.time;
            let reach = if lag <= 0.0 {
                0.0
            } else if lag < 0.9 * p.rho * p.rho {
                // speed 1 / (2 rho) with rho^2 shrinking at most at unit rate
                lag / (2.0 * (p.rho * p.rho - lag).sqrt())
            } else {
                f64::INFINITY
            };
            if (p.world - center).norm() > radius + reach {
                continue;
            }
            self.advance_vertex(id, complex, time, control)?;
            if (self.position(id) - center).norm() <= radius {
                out.push(id);
            }
        }
        Ok(out)
    }

    /// Size and length scales of an element from the stored vertex
    /// positions.
    pub fn measure(&self, id: &ElementId) -> Option<Measurement> {
        if !self.contains_element(id) {
            return None;
        }
        let pts: Vec<&SurfacePoint> = id
            .vertices()
            .iter()
            .map(|&v| self.vertex(v))
            .collect::<Option<_>>()?;
        let rho_min = pts.iter().map(|p| p.rho).fold(f64::INFINITY, f64::min);
        Some(match id {
            ElementId::Edge(_) => Measurement {
                size: 0.5 * (pts[0].world - pts[1].world).norm(),
                rho: pts[0].rho.max(pts[1].rho),
                rho_min,
            },
            ElementId::Triangle(_) => Measurement {
                size: circumradius(&pts[0].world, &pts[1].world, &pts[2].world),
                rho: rho_min,
                rho_min,
            },
        })
    }

    /// OFF text with faces oriented along the skin gradient.
    pub fn write_off<W: Write>(&self, complex: &MixedComplex, mut out: W) -> Result<()> {
        let ids: Vec<usize> = self.vertex_ids().collect();
        let index: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        writeln!(out, "OFF")?;
        writeln!(out, "{} {} 0", ids.len(), self.triangles.len())?;
        for v in &ids {
            let p = self.position(*v);
            writeln!(out, "{} {} {}", p.x, p.y, p.z)?;
        }
        for t in &self.triangles {
            let [a, b, c] = t.map(|v| self.position(v));
            let normal = (b - a).cross(&(c - a));
            let centroid = (a + b + c) / 3.0;
            let cell = complex
                .locate(&centroid)
                .unwrap_or(self.vertex(t[0]).unwrap().cell);
            let outward = complex.cell(cell).frame.level_gradient(&centroid);
            let [i, j, k] = t.map(|v| index[&v]);
            if normal.dot(&outward) >= 0.0 {
                writeln!(out, "3 {i} {j} {k}")?;
            } else {
                writeln!(out, "3 {i} {k} {j}")?;
            }
        }
        Ok(())
    }
}

/// Circumradius `|ab| |bc| |ca| / (4 area)`; infinite for collinear points.
pub fn circumradius(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let area2 = (b - a).cross(&(c - a)).norm();
    if area2 == 0.0 {
        return f64::INFINITY;
    }
    (b - a).norm() * (c - b).norm() * (a - c).norm() / (2.0 * area2)
}

/// Circumcenter of a triangle in its own plane.
pub fn circumcenter(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Vec3> {
    let u = b - a;
    let v = c - a;
    let n = u.cross(&v);
    let n2 = n.norm_squared();
    if n2 <= 1e-30 * u.norm_squared() * v.norm_squared() {
        return None;
    }
    Some(a + (u.norm_squared() * v.cross(&n) + v.norm_squared() * n.cross(&u)) / (2.0 * n2))
}

/// Parsed OFF mesh: vertices and triangular faces.
pub fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace());
    let bad = |m: &str| Error::Parse {
        line: 0,
        message: m.to_string(),
    };
    if tokens.next() != Some("OFF") {
        return Err(bad("missing OFF header"));
    }
    let mut next_num = |what: &str| -> Result<f64> {
        tokens
            .next()
            .ok_or_else(|| bad(what))?
            .parse::<f64>()
            .map_err(|e| bad(&format!("{what}: {e}")))
    };
    let nv = next_num("vertex count")? as usize;
    let nf = next_num("face count")? as usize;
    next_num("edge count")?;
    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        verts.push(Vec3::new(next_num("x")?, next_num("y")?, next_num("z")?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        if next_num("face size")? as usize != 3 {
            return Err(bad("only triangular faces are supported"));
        }
        let f = [
            next_num("i")? as usize,
            next_num("j")? as usize,
            next_num("k")? as usize,
        ];
        if f.iter().any(|&i| i >= nv) {
            return Err(bad("face index out of range"));
        }
        faces.push(f);
    }
    Ok((verts, faces))
}
