//! Element classification, closed-form safe intervals and the early-warning
//! event queue.
//!
//! An edge `uv` is measured by its half-length `R` against the larger
//! endpoint length scale, a triangle by its circumradius against the
//! smallest vertex length scale. Safe intervals always use the smallest
//! vertex length scale, since every vertex must stay within the Length Lemma
//! regime for the whole interval.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::epsilon0;
use crate::growth_time;

/// Mesh and sampling constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParameterSet {
    pub epsilon: f64,
    pub c: f64,
    pub q0: f64,
    pub q1: f64,
    pub h: f64,
    pub ell: u32,
    pub m: u32,
}

impl Default for ParameterSet {
    fn default() -> Self {
        ParameterSet {
            epsilon: epsilon0(),
            c: 0.06,
            q0: 1.6,
            q1: 2.3,
            h: 0.993,
            ell: 6,
            m: 80,
        }
    }
}

impl ParameterSet {
    /// Structural checks plus Conditions (I)-(III) on a 128-point grid over
    /// `[q0, q1]`.
    pub fn validate(&self) -> Result<()> {
        let ParameterSet {
            epsilon,
            c,
            q0,
            q1,
            h,
            ..
        } = *self;
        if !(q0 > 0.0 && q0 < q1) {
            return Err(Error::invalid(format!(
                "need 0 < q0 < q1, got q0 = {q0}, q1 = {q1}"
            )));
        }
        if !(c > 0.0) {
            return Err(Error::invalid(format!("need c > 0, got {c}")));
        }
        if !(epsilon > 0.0 && epsilon <= epsilon0()) {
            return Err(Error::invalid(format!(
                "need 0 < epsilon <= {}, got {epsilon}",
                epsilon0()
            )));
        }
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::invalid(format!("need 0 < h < 1, got {h}")));
        }
        crate::feasibility::check_interval(self, 128, None)
    }

    pub fn edge_thresholds(&self) -> (f64, f64) {
        (self.c / self.q1, self.c / self.q0)
    }

    pub fn triangle_thresholds(&self) -> (f64, f64) {
        (self.c * self.q0, self.c * self.q1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Edge,
    Triangle,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Edge => "edge",
            ElementKind::Triangle => "triangle",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Acceptable,
    Borderline,
    Unacceptable,
}

/// Edge or triangle by sorted vertex ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ElementId {
    Edge([usize; 2]),
    Triangle([usize; 3]),
}

impl ElementId {
    pub fn edge(a: usize, b: usize) -> Self {
        ElementId::Edge(if a < b { [a, b] } else { [b, a] })
    }

    pub fn triangle(a: usize, b: usize, c: usize) -> Self {
        let mut v = [a, b, c];
        v.sort_unstable();
        ElementId::Triangle(v)
    }

    pub fn kind(&self) -> ElementKind {
        match self {
            ElementId::Edge(_) => ElementKind::Edge,
            ElementId::Triangle(_) => ElementKind::Triangle,
        }
    }

    pub fn vertices(&self) -> &[usize] {
        match self {
            ElementId::Edge(v) => v,
            ElementId::Triangle(v) => v,
        }
    }
}

/// `acceptable` iff `C/Q0 < r`, `borderline` iff `C/Q1 < r <= C/Q0`.
pub fn classify_edge(r_over_rho: f64, p: &ParameterSet) -> Classification {
    let (low, high) = p.edge_thresholds();
    if r_over_rho > high {
        Classification::Acceptable
    } else if r_over_rho > low {
        Classification::Borderline
    } else {
        Classification::Unacceptable
    }
}

/// `acceptable` iff `r < C Q0`, `borderline` iff `C Q0 <= r < C Q1`.
pub fn classify_triangle(r_over_rho: f64, p: &ParameterSet) -> Classification {
    let (low, high) = p.triangle_thresholds();
    if r_over_rho < low {
        Classification::Acceptable
    } else if r_over_rho < high {
        Classification::Borderline
    } else {
        Classification::Unacceptable
    }
}

pub fn classify(kind: ElementKind, r_over_rho: f64, p: &ParameterSet) -> Classification {
    match kind {
        ElementKind::Edge => classify_edge(r_over_rho, p),
        ElementKind::Triangle => classify_triangle(r_over_rho, p),
    }
}

/// `theta = (R0 Q1 - C rho0) / (R0 Q1 + C rho0)`.
pub fn edge_theta(r0: f64, rho0: f64, p: &ParameterSet) -> Result<f64> {
    if !(r0 > 0.0 && rho0 > 0.0) {
        return Err(Error::invalid(format!(
            "edge needs R0 > 0 and rho0 > 0, got {r0}, {rho0}"
        )));
    }
    let a = r0 * p.q1;
    let b = p.c * rho0;
    if a < b {
        return Err(Error::SafetyViolation(format!(
            "edge ratio {} is below C/Q1 = {}; no safe interval exists",
            r0 / rho0,
            p.c / p.q1
        )));
    }
    Ok((a - b) / (a + b))
}

/// `theta = 1 - (R0 / (C Q1 rho0))^(1/4)`.
pub fn triangle_theta(r0: f64, rho0: f64, p: &ParameterSet) -> Result<f64> {
    if !(r0 > 0.0 && rho0 > 0.0) {
        return Err(Error::invalid(format!(
            "triangle needs R0 > 0 and rho0 > 0, got {r0}, {rho0}"
        )));
    }
    let x = r0 / (p.c * p.q1 * rho0);
    if x > 1.0 {
        return Err(Error::SafetyViolation(format!(
            "triangle ratio {} is above C Q1 = {}; no safe interval exists",
            r0 / rho0,
            p.c * p.q1
        )));
    }
    Ok(1.0 - x.sqrt().sqrt())
}

pub fn theta(kind: ElementKind, r0: f64, rho0: f64, p: &ParameterSet) -> Result<f64> {
    match kind {
        ElementKind::Edge => edge_theta(r0, rho0, p),
        ElementKind::Triangle => triangle_theta(r0, rho0, p),
    }
}

/// `(2 theta - theta^2) rho0^2`.
pub fn safe_interval(theta: f64, rho0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) || !(rho0 > 0.0) {
        return Err(Error::invalid(format!(
            "need 0 <= theta <= 1 and rho0 > 0, got {theta}, {rho0}"
        )));
    }
    Ok((2.0 * theta - theta * theta) * rho0 * rho0)
}

/// Smallest theta an acceptable element can have.
pub fn worst_case_theta(kind: ElementKind, p: &ParameterSet) -> f64 {
    match kind {
        ElementKind::Edge => (p.q1 - p.q0) / (p.q1 + p.q0),
        ElementKind::Triangle => 1.0 - (p.q0 / p.q1).sqrt().sqrt(),
    }
}

/// One row of a safe-interval table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub kind: ElementKind,
    pub a: f64,
    pub theta: f64,
    /// `dt / rho0^2`, kinetic time.
    pub dt: f64,
}

/// Safe intervals at multiples `a` of the acceptable threshold: edges with
/// `R0 = a C rho0 / Q0`, triangles with `R0 = C Q0 rho0 / a`.
pub fn safe_interval_table(
    kind: ElementKind,
    a_values: &[f64],
    p: &ParameterSet,
) -> Result<Vec<TableRow>> {
    if !(p.c > 0.0 && p.q0 > 0.0 && p.q0 <= p.q1) {
        return Err(Error::invalid(format!(
            "need c > 0 and 0 < q0 <= q1, got {p:?}"
        )));
    }
    a_values
        .iter()
        .map(|&a| {
            if !(a >= 1.0) {
                return Err(Error::invalid(format!(
                    "table entries need A >= 1, got {a}"
                )));
            }
            let r0 = match kind {
                ElementKind::Edge => a * p.c / p.q0,
                ElementKind::Triangle => p.c * p.q0 / a,
            };
            let theta = theta(kind, r0, 1.0, p)?.max(0.0);
            Ok(TableRow {
                kind,
                a,
                theta,
                dt: safe_interval(theta, 1.0)?,
            })
        })
        .collect()
}

/// Current size of an element and the length scales around it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Measurement {
    /// `R_uv` (half-length) or `R_uvw` (circumradius).
    pub size: f64,
    /// Scale the size is compared against: `rho_uv` or `rho_uvw`.
    pub rho: f64,
    /// Smallest vertex length scale; sets the safe interval.
    pub rho_min: f64,
}

impl Measurement {
    pub fn ratio(&self) -> f64 {
        self.size / self.rho
    }
}

/// A registered element and the outcome of its latest check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshElement {
    pub id: ElementId,
    pub kind: ElementKind,
    pub size: f64,
    pub rho: f64,
    pub classification: Classification,
    /// Kinetic time of the pending check, if one is queued.
    pub next_check: Option<f64>,
    pub generation: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct ScheduleEvent {
    pub due: f64,
    pub slack: f64,
    pub element: ElementId,
    pub generation: u64,
}

impl PartialEq for ScheduleEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ScheduleEvent {}

impl Ord for ScheduleEvent {
    // reversed: BinaryHeap is a max-heap and the earliest, tightest event
    // must surface first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .due
            .total_cmp(&self.due)
            .then_with(|| other.slack.total_cmp(&self.slack))
            .then_with(|| other.element.cmp(&self.element))
            .then_with(|| other.generation.cmp(&self.generation))
    }
}

impl PartialOrd for ScheduleEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Action {
    #[serde(rename = "check")]
    Check,
    #[serde(rename = "contract-signal")]
    ContractSignal,
    #[serde(rename = "insert-signal")]
    InsertSignal,
}

impl Action {
    fn signal(kind: ElementKind) -> Self {
        match kind {
            ElementKind::Edge => Action::ContractSignal,
            ElementKind::Triangle => Action::InsertSignal,
        }
    }
}

/// One line of the event log, in growth-time units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogEntry {
    pub t: f64,
    pub kind: ElementKind,
    pub action: Action,
    pub ratio: f64,
    pub theta: Option<f64>,
    pub dt: Option<f64>,
}

/// Elements removed and created by a restructuring operation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Restructure {
    pub removed: Vec<ElementId>,
    pub added: Vec<ElementId>,
}

/// The mesh as seen by the scheduler.
pub trait ElementTracker {
    /// Fresh measurement at kinetic time `time`; `None` when the element no
    /// longer exists.
    fn measure(&mut self, id: ElementId, time: f64) -> Result<Option<Measurement>>;

    /// Contract a borderline edge or split a borderline triangle.
    fn restructure(&mut self, id: ElementId, time: f64) -> Result<Restructure>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub checks: u64,
    /// Checks that found the element still acceptable: the warning fired
    /// but no restructuring was needed.
    pub false_positives: u64,
    /// Lazy mode: borderline elements later found acceptable again.
    pub buffer_exits: u64,
    pub contractions: u64,
    pub insertions: u64,
    pub stale_events: u64,
    /// Elements that a restructuring created already inside a buffer or
    /// beyond it and that were repaired on the spot.
    pub repaired_on_creation: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct SchedulerConfig {
    pub params: ParameterSet,
    /// Multiplier on every safe interval, in `(0, 1]`.
    pub sigma: f64,
    /// Reschedule borderline elements with their residual interval instead
    /// of restructuring them at once.
    pub lazy_buffer: bool,
    /// Lazy mode restructures once theta drops below this fraction of the
    /// worst-case acceptable theta.
    pub lazy_floor: f64,
    /// Record every check interval (see [`Scheduler::trace`]).
    pub trace: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            params: ParameterSet::default(),
            sigma: 0.9,
            lazy_buffer: false,
            lazy_floor: 0.25,
            trace: false,
        }
    }
}

/// Span between a check and the moment its verdict was superseded: the
/// next check, a restructuring, or removal of the element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckInterval {
    pub element: ElementId,
    /// Kinetic time of the check.
    pub start: f64,
    /// Kinetic time the next check was scheduled for.
    pub due: f64,
    /// Kinetic time the interval closed; `None` while still open.
    pub end: Option<f64>,
}

/// Outcome of scheduling one measured element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scheduled {
    /// Enqueued for a check at this kinetic time.
    At(f64),
    /// Must be restructured now.
    Restructure,
}

const MAX_REPAIRS_PER_EVENT: usize = 10_000;

pub struct Scheduler {
    config: SchedulerConfig,
    queue: BinaryHeap<ScheduleEvent>,
    registry: HashMap<ElementId, MeshElement>,
    next_generation: u64,
    now: f64,
    stats: Stats,
    log: Vec<LogEntry>,
    trace: Vec<CheckInterval>,
    open: HashMap<ElementId, usize>,
}

impl Scheduler {
    pub fn new(config: SchedulerConfig, start: f64) -> Result<Self> {
        if !(config.sigma > 0.0 && config.sigma <= 1.0) {
            return Err(Error::invalid(format!(
                "sigma must lie in (0, 1], got {}",
                config.sigma
            )));
        }
        Ok(Scheduler {
            config,
            queue: BinaryHeap::new(),
            registry: HashMap::new(),
            next_generation: 0,
            now: start,
            stats: Stats::default(),
            log: Vec::new(),
            trace: Vec::new(),
            open: HashMap::new(),
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<LogEntry> {
        std::mem::take(&mut self.log)
    }

    /// Recorded check intervals, when tracing is enabled.
    pub fn trace(&self) -> &[CheckInterval] {
        &self.trace
    }

    fn close(&mut self, id: &ElementId, at: f64) {
        if let Some(i) = self.open.remove(id) {
            self.trace[i].end = Some(at);
        }
    }

    fn forget(&mut self, id: &ElementId, at: f64) {
        self.registry.remove(id);
        self.close(id, at);
    }

    pub fn element(&self, id: &ElementId) -> Option<&MeshElement> {
        self.registry.get(id)
    }

    pub fn elements(&self) -> impl Iterator<Item = &MeshElement> {
        self.registry.values()
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Earliest pending check.
    pub fn next_due(&mut self) -> Option<f64> {
        while let Some(ev) = self.queue.peek() {
            if self.is_live(ev) {
                return Some(ev.due);
            }
            self.queue.pop();
            self.stats.stale_events += 1;
        }
        None
    }

    fn is_live(&self, ev: &ScheduleEvent) -> bool {
        self.registry
            .get(&ev.element)
            .is_some_and(|e| e.generation == ev.generation)
    }

    fn residual_theta(&self, kind: ElementKind, m: &Measurement) -> Result<f64> {
        theta(kind, m.size, m.rho, &self.config.params)
    }

    /// Classify a fresh measurement and enqueue its next check, or report
    /// that it must be restructured. Any previous event for `id` goes stale.
    pub fn schedule(&mut self, id: ElementId, m: Measurement, now: f64) -> Result<Scheduled> {
        let kind = id.kind();
        let p = &self.config.params;
        let class = classify(kind, m.ratio(), p);
        let generation = self.next_generation;
        self.next_generation += 1;
        let mut element = MeshElement {
            id,
            kind,
            size: m.size,
            rho: m.rho,
            classification: class,
            next_check: None,
            generation,
        };
        let outcome = match class {
            Classification::Unacceptable => {
                self.forget(&id, now);
                return Err(Error::SafetyViolation(format!(
                    "{kind} {:?} reached ratio {} at growth time {}",
                    id.vertices(),
                    m.ratio(),
                    growth_time(now)
                )));
            }
            Classification::Borderline if !self.config.lazy_buffer => Scheduled::Restructure,
            _ => {
                let th = self.residual_theta(kind, &m)?;
                let floor = self.config.lazy_floor * worst_case_theta(kind, p);
                if class == Classification::Borderline && th < floor {
                    Scheduled::Restructure
                } else {
                    let dt = self.config.sigma * safe_interval(th, m.rho_min)?;
                    if !(dt > 0.0) {
                        Scheduled::Restructure
                    } else {
                        let due = now + dt;
                        self.close(&id, now);
                        if self.config.trace {
                            self.open.insert(id, self.trace.len());
                            self.trace.push(CheckInterval {
                                element: id,
                                start: now,
                                due,
                                end: None,
                            });
                        }
                        self.queue.push(ScheduleEvent {
                            due,
                            slack: th,
                            element: id,
                            generation,
                        });
                        element.next_check = Some(due);
                        Scheduled::At(due)
                    }
                }
            }
        };
        if outcome == Scheduled::Restructure {
            self.close(&id, now);
        }
        self.registry.insert(id, element);
        Ok(outcome)
    }

    /// Forget an element; its pending event goes stale.
    pub fn remove(&mut self, id: &ElementId) {
        self.forget(id, self.now);
    }

    /// Measure and schedule new elements, repairing any that need it.
    pub fn register<T: ElementTracker>(
        &mut self,
        tracker: &mut T,
        ids: &[ElementId],
        now: f64,
    ) -> Result<()> {
        let mut pending: Vec<ElementId> = ids.to_vec();
        let mut repairs = 0;
        while let Some(id) = pending.pop() {
            let Some(m) = tracker.measure(id, now)? else {
                self.forget(&id, now);
                continue;
            };
            let class = classify(id.kind(), m.ratio(), &self.config.params);
            if class != Classification::Acceptable {
                self.stats.repaired_on_creation += 1;
            }
            let outcome = if class == Classification::Unacceptable {
                // created by a restructuring, never observed acceptable
                Scheduled::Restructure
            } else {
                self.schedule(id, m, now)?
            };
            if outcome == Scheduled::Restructure {
                repairs += 1;
                if repairs > MAX_REPAIRS_PER_EVENT {
                    return Err(Error::numeric("restructuring cascade did not settle"));
                }
                self.forget(&id, now);
                let change = self.restructure(tracker, id, m, now)?;
                pending.extend(change.added);
                pending.retain(|e| !change.removed.contains(e));
            }
        }
        Ok(())
    }

    fn restructure<T: ElementTracker>(
        &mut self,
        tracker: &mut T,
        id: ElementId,
        m: Measurement,
        now: f64,
    ) -> Result<Restructure> {
        let kind = id.kind();
        self.log.push(LogEntry {
            t: growth_time(now),
            kind,
            action: Action::signal(kind),
            ratio: m.ratio(),
            theta: None,
            dt: None,
        });
        let change = tracker.restructure(id, now)?;
        match kind {
            ElementKind::Edge => self.stats.contractions += 1,
            ElementKind::Triangle => self.stats.insertions += 1,
        }
        for r in &change.removed {
            self.forget(r, now);
        }
        Ok(change)
    }

    /// Pop and process every event due at or before kinetic time `t_end`.
    /// Returns the log entries produced.
    pub fn run_until<T: ElementTracker>(
        &mut self,
        tracker: &mut T,
        t_end: f64,
    ) -> Result<Vec<LogEntry>> {
        let first = self.log.len();
        while let Some(ev) = self.queue.peek().copied() {
            if ev.due > t_end {
                break;
            }
            self.queue.pop();
            if !self.is_live(&ev) {
                self.stats.stale_events += 1;
                continue;
            }
            self.now = self.now.max(ev.due);
            let now = self.now;
            let Some(m) = tracker.measure(ev.element, now)? else {
                self.forget(&ev.element, now);
                continue;
            };
            self.stats.checks += 1;
            let kind = ev.element.kind();
            let was_borderline = self.registry.get(&ev.element).map(|e| e.classification)
                == Some(Classification::Borderline);
            match self.schedule(ev.element, m, now)? {
                Scheduled::At(due) => {
                    let class = classify(kind, m.ratio(), &self.config.params);
                    if class == Classification::Acceptable {
                        self.stats.false_positives += 1;
                        if was_borderline {
                            self.stats.buffer_exits += 1;
                        }
                    }
                    self.log.push(LogEntry {
                        t: growth_time(now),
                        kind,
                        action: Action::Check,
                        ratio: m.ratio(),
                        theta: Some(self.residual_theta(kind, &m)?),
                        dt: Some(growth_time(due - now)),
                    });
                }
                Scheduled::Restructure => {
                    self.forget(&ev.element, now);
                    let change = self.restructure(tracker, ev.element, m, now)?;
                    self.register(tracker, &change.added, now)?;
                }
            }
        }
        self.now = self.now.max(t_end);
        Ok(self.log[first..].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_match_published_rows() {
        let p = ParameterSet::default();
        let a = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];
        let edges = safe_interval_table(ElementKind::Edge, &a, &p).unwrap();
        let tris = safe_interval_table(ElementKind::Triangle, &a, &p).unwrap();
        let e = [
            (0.179, 0.326),
            (0.366, 0.598),
            (0.483, 0.733),
            (0.564, 0.810),
            (0.623, 0.858),
            (0.668, 0.890),
            (0.703, 0.912),
        ];
        let t = [
            (0.086, 0.165),
            (0.174, 0.319),
            (0.232, 0.410),
            (0.273, 0.472),
            (0.306, 0.518),
            (0.332, 0.554),
            (0.354, 0.583),
        ];
        for (row, want) in edges.iter().zip(e).chain(tris.iter().zip(t)) {
            assert!(
                (row.theta - want.0).abs() < 1e-3 && (row.dt - want.1).abs() < 1e-3,
                "{row:?}"
            );
        }
        let flat = ParameterSet { q1: 1.6, ..p };
        assert_eq!(
            safe_interval_table(ElementKind::Edge, &[1.0], &flat).unwrap()[0].theta,
            0.0
        );
        assert_eq!(
            safe_interval_table(ElementKind::Triangle, &[1.0], &flat).unwrap()[0].theta,
            0.0
        );
        assert!(safe_interval_table(ElementKind::Edge, &[0.5], &p).is_err());
    }
    use approx::assert_relative_eq;

    fn params() -> ParameterSet {
        ParameterSet::default()
    }

    #[test]
    fn edge_classification_boundaries() {
        let p = params();
        assert_eq!(classify_edge(0.05, &p), Classification::Acceptable);
        assert_eq!(classify_edge(0.0375, &p), Classification::Borderline);
        assert_eq!(classify_edge(0.06 / 2.3, &p), Classification::Unacceptable);
        assert_eq!(classify_edge(0.02, &p), Classification::Unacceptable);
    }

    #[test]
    fn triangle_classification_boundaries() {
        let p = params();
        assert_eq!(classify_triangle(0.05, &p), Classification::Acceptable);
        assert_eq!(
            classify_triangle(0.06 * 1.6, &p),
            Classification::Borderline
        );
        assert_eq!(
            classify_triangle(0.06 * 2.3, &p),
            Classification::Unacceptable
        );
    }

    #[test]
    fn theta_zero_at_unacceptability() {
        let p = params();
        assert_relative_eq!(
            edge_theta(p.c / p.q1, 1.0, &p).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            triangle_theta(p.c * p.q1, 1.0, &p).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert!(matches!(
            edge_theta(0.5 * p.c / p.q1, 1.0, &p),
            Err(Error::SafetyViolation(_))
        ));
        assert!(matches!(
            triangle_theta(2.0 * p.c * p.q1, 1.0, &p),
            Err(Error::SafetyViolation(_))
        ));
    }

    #[test]
    fn safe_interval_values() {
        assert_eq!(safe_interval(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(safe_interval(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(safe_interval(0.5, 2.0).unwrap(), 3.0);
        assert!(safe_interval(1.2, 1.0).is_err());
    }

    #[test]
    fn event_order_due_then_slack() {
        let mut heap = BinaryHeap::new();
        let e = |due, slack, a| ScheduleEvent {
            due,
            slack,
            element: ElementId::edge(a, a + 1),
            generation: 0,
        };
        heap.push(e(2.0, 0.1, 0));
        heap.push(e(1.0, 0.5, 1));
        heap.push(e(1.0, 0.2, 2));
        let order: Vec<usize> = std::iter::from_fn(|| heap.pop())
            .map(|e| e.element.vertices()[0])
            .collect();
        assert_eq!(order, vec![2, 1, 0]);
    }

    /// Edge with fixed length scale whose half-length decays as `exp(-t/2)`,
    /// which stays within the Length Lemma from every starting time.
    struct WorstCaseEdge {
        r0: f64,
        rho: f64,
        alive: bool,
        contracted_at: Option<f64>,
    }

    impl WorstCaseEdge {
        fn ratio(&self, t: f64) -> f64 {
            self.r0 * (-0.5 * t / (self.rho * self.rho)).exp() / self.rho
        }
    }

    impl ElementTracker for WorstCaseEdge {
        fn measure(&mut self, _: ElementId, t: f64) -> Result<Option<Measurement>> {
            Ok(self.alive.then(|| Measurement {
                size: self.ratio(t) * self.rho,
                rho: self.rho,
                rho_min: self.rho,
            }))
        }

        fn restructure(&mut self, id: ElementId, t: f64) -> Result<Restructure> {
            self.alive = false;
            self.contracted_at = Some(t);
            Ok(Restructure {
                removed: vec![id],
                added: vec![],
            })
        }
    }

    #[test]
    fn shrinking_edge_is_caught_in_the_buffer() {
        let p = params();
        let mut edge = WorstCaseEdge {
            r0: 0.06,
            rho: 1.0,
            alive: true,
            contracted_at: None,
        };
        let mut s = Scheduler::new(SchedulerConfig::default(), 0.0).unwrap();
        let id = ElementId::edge(0, 1);
        s.register(&mut edge, &[id], 0.0).unwrap();
        let log = s.run_until(&mut edge, 10.0).unwrap();
        let checks: Vec<f64> = log
            .iter()
            .filter(|e| e.action == Action::Check)
            .map(|e| e.t)
            .collect();
        assert!(!checks.is_empty());
        let mut prev = 0.0;
        for t in &checks {
            assert!(*t > prev);
            prev = *t;
        }
        let stop = edge.contracted_at.expect("edge must be contracted");
        assert!(edge.ratio(stop) > p.c / p.q1);
        // oracle: the ratio never crosses C/Q1 before the contraction
        for i in 0..=1000 {
            let t = stop * i as f64 / 1000.0;
            assert!(edge.ratio(t) > p.c / p.q1);
        }
        assert_eq!(log.last().unwrap().action, Action::ContractSignal);
    }

    #[test]
    fn empty_queue_gives_empty_log() {
        struct Nothing;
        impl ElementTracker for Nothing {
            fn measure(&mut self, _: ElementId, _: f64) -> Result<Option<Measurement>> {
                Ok(None)
            }
            fn restructure(&mut self, _: ElementId, _: f64) -> Result<Restructure> {
                Ok(Restructure::default())
            }
        }
        let mut s = Scheduler::new(SchedulerConfig::default(), 0.0).unwrap();
        assert!(s.run_until(&mut Nothing, 10.0).unwrap().is_empty());
    }

    #[test]
    fn rescheduling_makes_old_event_stale() {
        let mut s = Scheduler::new(SchedulerConfig::default(), 0.0).unwrap();
        let id = ElementId::triangle(0, 1, 2);
        let m = Measurement {
            size: 0.05,
            rho: 1.0,
            rho_min: 1.0,
        };
        let first = s.schedule(id, m, 0.0).unwrap();
        let second = s.schedule(id, m, 0.1).unwrap();
        assert_ne!(first, second);
        assert_eq!(s.queue_len(), 2);
        assert_eq!(
            s.next_due(),
            match second {
                Scheduled::At(t) => Some(t),
                _ => None,
            }
        );
        assert_eq!(s.stats().stale_events, 1);
    }

    #[test]
    fn borderline_is_signalled_immediately() {
        let mut s = Scheduler::new(SchedulerConfig::default(), 0.0).unwrap();
        let m = Measurement {
            size: 0.1,
            rho: 1.0,
            rho_min: 1.0,
        };
        assert_eq!(
            s.schedule(ElementId::triangle(0, 1, 2), m, 0.0).unwrap(),
            Scheduled::Restructure
        );
        assert_eq!(s.queue_len(), 0);
    }

    #[test]
    fn lazy_buffer_reschedules_inside_the_buffer() {
        let config = SchedulerConfig {
            lazy_buffer: true,
            ..SchedulerConfig::default()
        };
        let mut s = Scheduler::new(config, 0.0).unwrap();
        let m = Measurement {
            size: 0.1,
            rho: 1.0,
            rho_min: 1.0,
        };
        assert!(matches!(
            s.schedule(ElementId::triangle(0, 1, 2), m, 0.0).unwrap(),
            Scheduled::At(_)
        ));
        let close = Measurement {
            size: 0.1375,
            rho: 1.0,
            rho_min: 1.0,
        };
        assert_eq!(
            s.schedule(ElementId::triangle(0, 1, 2), close, 0.0)
                .unwrap(),
            Scheduled::Restructure
        );
    }
}
