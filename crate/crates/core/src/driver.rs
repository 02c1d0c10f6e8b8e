//! Growth simulation: bootstrap a mesh, keep it valid with the scheduler,
//! and report snapshots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::MixedComplex;
use crate::mesh::restricted::rebuild;
use crate::mesh::{
    bootstrap_samples, contract_edge, insert_vertex, restricted_delaunay, MeshConfig,
    SamplingConfig, SurfaceMesh,
};
use crate::scheduler::{
    ElementId, ElementTracker, LogEntry, Measurement, ParameterSet, Restructure, Scheduler,
    SchedulerConfig, Stats,
};
use crate::{growth_time, kinetic_time};

#[derive(Clone, Copy, Debug)]
pub struct GrowConfig {
    pub scheduler: SchedulerConfig,
    pub mesh: MeshConfig,
    pub sampling: SamplingConfig,
    /// Window start, growth time.
    pub t_start: f64,
    /// Window end, growth time; at most zero.
    pub t_end: f64,
    /// Growth time between snapshots; `None` for the two window ends only.
    pub snapshot_every: Option<f64>,
    pub seed: u64,
    /// The run aborts when a length scale drops below this.
    pub apex_limit: f64,
}

impl GrowConfig {
    /// Defaults matched to `params`: neighbourhood searches reach past the
    /// largest triangle the upper bound admits.
    pub fn new(params: ParameterSet, t_start: f64, t_end: f64) -> Self {
        let mut mesh = MeshConfig::default();
        mesh.rdt.rho_factor = 1.05 * params.c * params.q1;
        GrowConfig {
            scheduler: SchedulerConfig {
                params,
                ..SchedulerConfig::default()
            },
            mesh,
            sampling: SamplingConfig::default(),
            t_start,
            t_end,
            snapshot_every: None,
            seed: 0,
            apex_limit: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheduler.params.validate()?;
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start <= self.t_end) {
            return Err(Error::invalid(format!(
                "need t_start <= t_end, got {} and {}",
                self.t_start, self.t_end
            )));
        }
        if self.t_end > 0.0 {
            return Err(Error::invalid(format!(
                "growth ends by t = 0, got t_end = {}",
                self.t_end
            )));
        }
        if let Some(dt) = self.snapshot_every {
            if !(dt > 0.0) {
                return Err(Error::invalid(format!(
                    "snapshot interval must be positive, got {dt}"
                )));
            }
        }
        if !(self.scheduler.sigma > 0.0 && self.scheduler.sigma <= 1.0) {
            return Err(Error::invalid(format!(
                "sigma must lie in (0, 1], got {}",
                self.scheduler.sigma
            )));
        }
        Ok(())
    }

    /// Snapshot times in growth units, both window ends included.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut times = vec![self.t_start];
        if let Some(dt) = self.snapshot_every {
            let mut k = 1.0;
            while self.t_start + k * dt < self.t_end - 1e-12 * dt {
                times.push(self.t_start + k * dt);
                k += 1.0;
            }
        }
        if self.t_end > self.t_start {
            times.push(self.t_end);
        }
        times
    }
}

fn apex_error(e: Error, time: f64, limit: f64) -> Error {
    match e {
        Error::Singular { norm, .. } => Error::ApexApproach {
            rho: norm,
            limit,
            time: growth_time(time),
        },
        e => e,
    }
}

/// The mesh as driven by the scheduler: elements are measured after
/// advancing their vertices, restructured by contraction or insertion.
pub struct MeshTracker<'a> {
    complex: &'a MixedComplex,
    mesh: SurfaceMesh,
    cfg: MeshConfig,
    apex_limit: f64,
}

impl<'a> MeshTracker<'a> {
    pub fn new(
        complex: &'a MixedComplex,
        mesh: SurfaceMesh,
        cfg: MeshConfig,
        apex_limit: f64,
    ) -> Self {
        MeshTracker {
            complex,
            mesh,
            cfg,
            apex_limit,
        }
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn into_mesh(self) -> SurfaceMesh {
        self.mesh
    }

    fn guard(&self, rho: f64, time: f64) -> Result<()> {
        if rho < self.apex_limit {
            return Err(Error::ApexApproach {
                rho,
                limit: self.apex_limit,
                time: growth_time(time),
            });
        }
        Ok(())
    }
}

impl ElementTracker for MeshTracker<'_> {
    fn measure(&mut self, id: ElementId, time: f64) -> Result<Option<Measurement>> {
        if !self.mesh.contains_element(&id) {
            return Ok(None);
        }
        for &v in id.vertices() {
            self.mesh
                .advance_vertex(v, self.complex, time, self.cfg.control)
                .map_err(|e| apex_error(e, time, self.apex_limit))?;
            self.guard(self.mesh.vertex(v).unwrap().rho, time)?;
        }
        Ok(self.mesh.measure(&id))
    }

    fn restructure(&mut self, id: ElementId, time: f64) -> Result<Restructure> {
        let delta = match id {
            ElementId::Edge(e) => contract_edge(&mut self.mesh, self.complex, e, time, &self.cfg),
            ElementId::Triangle(t) => {
                insert_vertex(&mut self.mesh, self.complex, t, time, &self.cfg)
            }
        }
        .map_err(|e| apex_error(e, time, self.apex_limit))?;
        if self.mesh.contains_element(&id) {
            return Err(Error::numeric(format!(
                "restructuring left {id:?} in the mesh"
            )));
        }
        Ok(delta.into())
    }
}

/// State of the mesh at one snapshot time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub index: usize,
    /// Growth time.
    pub t: f64,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub euler_characteristic: i64,
    /// Smallest `R_uv / rho_uv` over all edges.
    pub min_edge_ratio: f64,
    /// Largest `R_uvw / rho_uvw` over all triangles.
    pub max_triangle_ratio: f64,
}

/// Receives snapshots and event log entries as the simulation proceeds.
pub trait GrowObserver {
    fn snapshot(
        &mut self,
        snapshot: &Snapshot,
        mesh: &SurfaceMesh,
        complex: &MixedComplex,
    ) -> Result<()>;
    fn events(&mut self, entries: &[LogEntry]) -> Result<()>;
}

impl GrowObserver for () {
    fn snapshot(&mut self, _: &Snapshot, _: &SurfaceMesh, _: &MixedComplex) -> Result<()> {
        Ok(())
    }

    fn events(&mut self, _: &[LogEntry]) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub snapshots: usize,
    pub vertices: usize,
    pub triangles: usize,
    #[serde(flatten)]
    pub stats: Stats,
    /// Restructurings whose flipped connectivity was corrected by local
    /// recomputation.
    pub flip_corrections: u64,
    /// Elements replaced when snapshots re-derived the connectivity.
    pub rebuild_changes: usize,
    pub min_edge_ratio: f64,
    pub max_triangle_ratio: f64,
}

/// Check [L] and [U] at `Q1` on every element and that every element is
/// registered. Returns the extreme ratios.
pub fn verify_size_bounds(mesh: &SurfaceMesh, scheduler: &Scheduler) -> Result<(f64, f64)> {
    let p = &scheduler.config().params;
    let (low, high) = (p.c / p.q1, p.c * p.q1);
    let mut min_edge = f64::INFINITY;
    let mut max_tri: f64 = 0.0;
    let elements = mesh.elements();
    for id in &elements {
        let m = mesh
            .measure(id)
            .ok_or_else(|| Error::numeric(format!("cannot measure {id:?}")))?;
        match id {
            ElementId::Edge(_) => {
                min_edge = min_edge.min(m.ratio());
                if m.ratio() <= low {
                    return Err(Error::SafetyViolation(format!(
                        "edge {id:?} has ratio {} <= C/Q1 = {low}",
                        m.ratio()
                    )));
                }
            }
            ElementId::Triangle(_) => {
                max_tri = max_tri.max(m.ratio());
                if m.ratio() >= high {
                    return Err(Error::SafetyViolation(format!(
                        "triangle {id:?} has ratio {} >= C Q1 = {high}",
                        m.ratio()
                    )));
                }
            }
        }
        if scheduler.element(id).is_none() {
            return Err(Error::numeric(format!(
                "mesh element {id:?} is not registered"
            )));
        }
    }
    if scheduler.len() != elements.len() {
        return Err(Error::numeric(format!(
            "{} registered elements for {} mesh elements",
            scheduler.len(),
            elements.len()
        )));
    }
    Ok((min_edge, max_tri))
}

/// A running growth simulation.
pub struct Growth<'a> {
    complex: &'a MixedComplex,
    config: GrowConfig,
    tracker: MeshTracker<'a>,
    scheduler: Scheduler,
    snapshots: usize,
    rebuild_changes: usize,
    extremes: (f64, f64),
}

impl<'a> Growth<'a> {
    /// Bootstrap samples at `t_start`, triangulate and register every
    /// element. Elements the bootstrap leaves outside the acceptable range
    /// are repaired at once.
    pub fn start(complex: &'a MixedComplex, config: GrowConfig) -> Result<Self> {
        config.validate()?;
        let tau = kinetic_time(config.t_start);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let samples = bootstrap_samples(complex, tau, &config.sampling, &mut rng)?;
        if let Some(p) = samples.iter().find(|p| p.rho < config.apex_limit) {
            return Err(Error::ApexApproach {
                rho: p.rho,
                limit: config.apex_limit,
                time: config.t_start,
            });
        }
        let mesh = restricted_delaunay(&samples, complex, &config.mesh.rdt)?;
        let mut tracker = MeshTracker::new(complex, mesh, config.mesh, config.apex_limit);
        let mut scheduler = Scheduler::new(config.scheduler, tau)?;
        let ids = tracker.mesh.elements();
        scheduler.register(&mut tracker, &ids, tau)?;
        Ok(Growth {
            complex,
            config,
            tracker,
            scheduler,
            snapshots: 0,
            rebuild_changes: 0,
            extremes: (f64::INFINITY, 0.0),
        })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.tracker.mesh
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn config(&self) -> &GrowConfig {
        &self.config
    }

    /// Growth time reached so far.
    pub fn time(&self) -> f64 {
        growth_time(self.scheduler.now())
    }

    /// Process all events up to growth time `t`, move every vertex there,
    /// re-derive the connectivity and register what changed.
    pub fn advance_to<O: GrowObserver + ?Sized>(&mut self, t: f64, observer: &mut O) -> Result<()> {
        let tau = kinetic_time(t);
        self.scheduler.run_until(&mut self.tracker, tau)?;
        observer.events(&self.scheduler.take_log())?;
        let limit = self.config.apex_limit;
        self.tracker
            .mesh
            .sync_all(self.complex, tau, self.config.mesh.control)
            .map_err(|e| apex_error(e, tau, limit))?;
        let min_rho = self
            .tracker
            .mesh
            .vertex_ids()
            .map(|v| self.tracker.mesh.vertex(v).unwrap().rho)
            .fold(f64::INFINITY, f64::min);
        self.tracker.guard(min_rho, tau)?;
        self.tracker.mesh.take_delta();
        rebuild(
            &mut self.tracker.mesh,
            self.complex,
            tau,
            &self.config.mesh.rdt,
        )?;
        let delta = self.tracker.mesh.take_delta();
        self.rebuild_changes += delta.removed.len() + delta.added.len();
        for r in &delta.removed {
            self.scheduler.remove(r);
        }
        let added: Vec<ElementId> = delta.added.into_iter().collect();
        self.scheduler.register(&mut self.tracker, &added, tau)?;
        observer.events(&self.scheduler.take_log())?;
        Ok(())
    }

    /// Verify the size bounds and the registry, then report a snapshot.
    /// Vertices must be synchronised (as after [`advance_to`](Self::advance_to)).
    pub fn snapshot<O: GrowObserver + ?Sized>(&mut self, observer: &mut O) -> Result<Snapshot> {
        let mesh = &self.tracker.mesh;
        let (min_edge, max_tri) = verify_size_bounds(mesh, &self.scheduler)?;
        self.extremes = (self.extremes.0.min(min_edge), self.extremes.1.max(max_tri));
        let snap = Snapshot {
            index: self.snapshots,
            t: self.time(),
            vertices: mesh.num_vertices(),
            edges: mesh.num_edges(),
            triangles: mesh.num_triangles(),
            euler_characteristic: mesh.euler_characteristic(),
            min_edge_ratio: min_edge,
            max_triangle_ratio: max_tri,
        };
        self.snapshots += 1;
        observer.snapshot(&snap, mesh, self.complex)?;
        Ok(snap)
    }

    pub fn summary(&self) -> GrowSummary {
        let mesh = &self.tracker.mesh;
        GrowSummary {
            t_start: self.config.t_start,
            t_end: self.time(),
            snapshots: self.snapshots,
            vertices: mesh.num_vertices(),
            triangles: mesh.num_triangles(),
            stats: self.scheduler.stats(),
            flip_corrections: mesh.corrections(),
            rebuild_changes: self.rebuild_changes,
            min_edge_ratio: self.extremes.0,
            max_triangle_ratio: self.extremes.1,
        }
    }

    /// Run to the end of the window, reporting every snapshot.
    pub fn run<O: GrowObserver + ?Sized>(&mut self, observer: &mut O) -> Result<GrowSummary> {
        let times = self.config.snapshot_times();
        observer.events(&self.scheduler.take_log())?;
        for (i, &t) in times.iter().enumerate() {
            if i > 0 {
                self.advance_to(t, observer)?;
            }
            self.snapshot(observer)?;
        }
        Ok(self.summary())
    }
}

/// Bootstrap and run a whole window.
pub fn grow<O: GrowObserver + ?Sized>(
    complex: &MixedComplex,
    config: GrowConfig,
    observer: &mut O,
) -> Result<GrowSummary> {
    Growth::start(complex, config)?.run(observer)
}
