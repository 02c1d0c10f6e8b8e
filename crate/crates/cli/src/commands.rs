use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use skinmesh::driver::{grow, GrowConfig, GrowObserver, GrowSummary, Snapshot};
use skinmesh::feasibility::{
    check_conditions_with_sizes, delta, rasterize_region, write_region_csv, ElementSizes,
};
use skinmesh::geometry::read_spheres;
use skinmesh::mesh::SurfaceMesh;
use skinmesh::scheduler::{safe_interval_table, ElementKind, LogEntry, TableRow};
use skinmesh::verify::{
    replay, run_verify, Population, TrialCase, VerifyConfig, VerifyMode, VerifyReport,
};
use skinmesh::{Error, MixedComplex, Result};

use crate::config::Resolved;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create_file(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::Numeric(format!("json: {e}")))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Write to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(format!("json: {e}")))
}

pub fn tables(cfg: &Resolved, a_values: &[f64], csv: bool) -> Result<()> {
    let edges = safe_interval_table(ElementKind::Edge, a_values, &cfg.params)?;
    let triangles = safe_interval_table(ElementKind::Triangle, a_values, &cfg.params)?;
    let mut text = String::from("kind,a,theta,dt_over_rho0_sq\n");
    for row in edges.iter().chain(&triangles) {
        text.push_str(&format!(
            "{},{},{},{}\n",
            row.kind, row.a, row.theta, row.dt
        ));
    }
    if csv {
        emit(&text)?;
    } else {
        let p = &cfg.params;
        let mut pretty = String::new();
        for (name, rows) in [("Edges", &edges), ("Triangles", &triangles)] {
            pretty.push_str(&format!("{name} (Q0 = {}, Q1 = {})\n", p.q0, p.q1));
            pretty.push_str(&format!(
                "{:>6}  {:>10}  {:>12}\n",
                "A", "theta", "dt/rho0^2"
            ));
            for TableRow { a, theta, dt, .. } in rows.iter() {
                pretty.push_str(&format!("{a:>6.2}  {theta:>10.6}  {dt:>12.6}\n"));
            }
            pretty.push('\n');
        }
        emit(&pretty)?;
    }
    if let Some(dir) = &cfg.out_dir {
        create_dir(dir)?;
        fs::write(dir.join("tables.csv"), text)?;
    }
    Ok(())
}

pub struct FeasibleGrid {
    pub c_range: (f64, f64),
    pub q_range: (f64, f64),
    pub steps: (usize, usize),
    pub sizes: Option<ElementSizes>,
}

/// Conditions at the configured `C` over `[Q0, Q1]`.
#[derive(Serialize)]
struct CheckReport {
    c: f64,
    epsilon: f64,
    feasible: bool,
    rows: Vec<CheckRow>,
}

#[derive(Serialize)]
struct CheckRow {
    q: f64,
    delta: f64,
    i: bool,
    ii: bool,
    iii: bool,
    iv: Option<bool>,
    v: Option<bool>,
}

pub fn feasible(cfg: &Resolved, grid: &FeasibleGrid, check: Option<usize>) -> Result<()> {
    let p = &cfg.params;
    if let Some(samples) = check {
        if !(p.q0 <= p.q1) || samples == 0 {
            return Err(Error::InvalidInput(format!(
                "need q0 <= q1 and samples > 0, got {p:?}"
            )));
        }
        let rows: Vec<CheckRow> = (0..samples)
            .map(|k| {
                let q = if samples == 1 {
                    p.q0
                } else {
                    p.q0 + (p.q1 - p.q0) * k as f64 / (samples - 1) as f64
                };
                let r = check_conditions_with_sizes(p, q, grid.sizes.as_ref());
                Ok(CheckRow {
                    q,
                    delta: delta(p.epsilon, p.c, q)?,
                    i: r.i,
                    ii: r.ii,
                    iii: r.iii,
                    iv: r.iv,
                    v: r.v,
                })
            })
            .collect::<Result<_>>()?;
        let feasible = rows
            .iter()
            .all(|r| r.i && r.ii && r.iii && r.iv.unwrap_or(true) && r.v.unwrap_or(true));
        let report = CheckReport {
            c: p.c,
            epsilon: p.epsilon,
            feasible,
            rows,
        };
        return emit(&format!("{}\n", to_json(&report)?));
    }
    let cells = rasterize_region(
        grid.c_range,
        grid.q_range,
        grid.steps,
        p.epsilon,
        p.h,
        grid.sizes.as_ref(),
    )?;
    match &cfg.out_dir {
        Some(dir) => {
            create_dir(dir)?;
            let mut out = create_file(&dir.join("feasible.csv"))?;
            write_region_csv(&cells, &mut out)?;
            out.flush()?;
        }
        None => {
            let mut buf = Vec::new();
            write_region_csv(&cells, &mut buf)?;
            emit(&String::from_utf8_lossy(&buf))?;
        }
    }
    Ok(())
}

/// Writes OFF snapshots and the JSONL event log into a directory.
struct FileObserver {
    dir: PathBuf,
    events: BufWriter<File>,
    snapshots: Vec<Snapshot>,
}

impl GrowObserver for FileObserver {
    fn snapshot(
        &mut self,
        snapshot: &Snapshot,
        mesh: &SurfaceMesh,
        complex: &MixedComplex,
    ) -> Result<()> {
        let mut out = create_file(&self.dir.join(format!("snapshot_{:04}.off", snapshot.index)))?;
        mesh.write_off(complex, &mut out)?;
        out.flush()?;
        self.snapshots.push(snapshot.clone());
        Ok(())
    }

    fn events(&mut self, entries: &[LogEntry]) -> Result<()> {
        for e in entries {
            serde_json::to_writer(&mut self.events, e)
                .map_err(|e| Error::Numeric(format!("json: {e}")))?;
            writeln!(self.events)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct GrowReport<'a> {
    #[serde(flatten)]
    summary: &'a GrowSummary,
    snapshot_list: &'a [Snapshot],
}

pub fn grow_cmd(cfg: &Resolved, spheres_file: &Path) -> Result<()> {
    let spheres = read_spheres(spheres_file).map_err(|e| match e {
        Error::Io(io) => {
            Error::InvalidInput(format!("cannot read {}: {io}", spheres_file.display()))
        }
        e => e,
    })?;
    if spheres.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} contains no spheres",
            spheres_file.display()
        )));
    }
    let (Some(t_start), Some(t_end)) = (cfg.t_start, cfg.t_end) else {
        return Err(Error::InvalidInput(
            "grow needs --t-start and --t-end".into(),
        ));
    };
    let complex = MixedComplex::new(&spheres)?;
    let mut config = GrowConfig::new(cfg.params, t_start, t_end);
    config.scheduler.sigma = cfg.sigma;
    config.scheduler.lazy_buffer = cfg.lazy_buffer;
    config.snapshot_every = cfg.snapshot_every;
    config.seed = cfg.seed;
    config.validate()?;
    let dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("skinmesh-out"));
    create_dir(&dir)?;
    let mut observer = FileObserver {
        events: create_file(&dir.join("events.jsonl"))?,
        dir: dir.clone(),
        snapshots: Vec::new(),
    };
    let result = grow(&complex, config, &mut observer);
    observer.events.flush()?;
    let summary = result?;
    let report = GrowReport {
        summary: &summary,
        snapshot_list: &observer.snapshots,
    };
    write_json(&dir.join("summary.json"), &report)?;
    emit(&format!("{}\n", to_json(&summary)?))
}

pub struct VerifyArgs {
    pub mode: Option<VerifyMode>,
    pub trials: usize,
    pub population: Option<Population>,
    pub replay: Option<PathBuf>,
}

/// Outcome of `verify`: whether every trial stayed within its bounds.
pub fn verify_cmd(cfg: &Resolved, args: &VerifyArgs) -> Result<bool> {
    if let Some(path) = &args.replay {
        let text = fs::read_to_string(path)?;
        let case: TrialCase = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let mode = args.mode.unwrap_or(case.mode);
        let control = VerifyConfig::new(mode, 1, cfg.seed).control;
        let obs = replay(&case, control)?;
        emit(&format!("{}\n", to_json(&obs)?))?;
        return Ok(true);
    }
    let mode = args
        .mode
        .ok_or_else(|| Error::InvalidInput("verify needs a mode or --replay".into()))?;
    let mut vc = VerifyConfig::new(mode, args.trials, cfg.seed);
    vc.params = cfg.params;
    if let Some(p) = args.population {
        vc.population = p;
    }
    let report: VerifyReport = run_verify(&vc)?;
    let text = to_json(&report)?;
    emit(&format!("{text}\n"))?;
    if let Some(dir) = &cfg.out_dir {
        create_dir(dir)?;
        fs::write(dir.join(format!("verify-{mode}.json")), format!("{text}\n"))?;
        for (k, v) in report.violations.iter().enumerate() {
            write_json(&dir.join(format!("violation-{mode}-{k:03}.json")), &v.case)?;
        }
    }
    if !report.passed() {
        eprintln!(
            "{} of {} {mode} trials broke their bounds",
            report.violations.len(),
            report.trials
        );
    }
    Ok(report.passed())
}
