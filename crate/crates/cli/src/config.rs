//! Settings shared by all subcommands: command-line flags, an optional
//! `key = value` file, and defaults, in that order of precedence.

use std::path::{Path, PathBuf};

use clap::Args;
use skinmesh::feasibility::epsilon0;
use skinmesh::scheduler::ParameterSet;
use skinmesh::{Error, Result};

#[derive(Args, Clone, Debug, Default)]
pub struct Settings {
    /// Settings file with `key = value` lines; keys are the long flag names.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Size constant C.
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    /// Lower quality constant Q0.
    #[arg(long, allow_negative_numbers = true)]
    pub q0: Option<f64>,
    /// Upper quality constant Q1.
    #[arg(long, allow_negative_numbers = true)]
    pub q1: Option<f64>,
    /// Sampling constant; defaults to the root of Condition (I).
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Multiplier on every safe interval, in (0, 1].
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Window start, growth time.
    #[arg(long, allow_negative_numbers = true)]
    pub t_start: Option<f64>,
    /// Window end, growth time, at most 0.
    #[arg(long, allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Growth time between snapshots.
    #[arg(long, allow_negative_numbers = true)]
    pub snapshot_every: Option<f64>,
    /// Directory for output files.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Let borderline elements wait in the buffer while their residual
    /// interval lasts.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub lazy_buffer: Option<bool>,
}

/// Settings after merging flags, file and defaults.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub params: ParameterSet,
    pub sigma: f64,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub snapshot_every: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub lazy_buffer: bool,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Parse {
        line,
        message: format!("`{key}`: {e}"),
    })
}

impl Settings {
    /// Fill unset fields from `key = value` text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{body}`"),
            })?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            match key.as_str() {
                "c" => fill(&mut self.c, parse_value(&key, value, line)?),
                "q0" => fill(&mut self.q0, parse_value(&key, value, line)?),
                "q1" => fill(&mut self.q1, parse_value(&key, value, line)?),
                "epsilon" => fill(&mut self.epsilon, parse_value(&key, value, line)?),
                "sigma" => fill(&mut self.sigma, parse_value(&key, value, line)?),
                "t-start" => fill(&mut self.t_start, parse_value(&key, value, line)?),
                "t-end" => fill(&mut self.t_end, parse_value(&key, value, line)?),
                "snapshot-every" => fill(&mut self.snapshot_every, parse_value(&key, value, line)?),
                "out-dir" => fill(&mut self.out_dir, PathBuf::from(value)),
                "seed" => fill(&mut self.seed, parse_value(&key, value, line)?),
                "lazy-buffer" => fill(&mut self.lazy_buffer, parse_value(&key, value, line)?),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        Ok(())
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("cannot read config {}: {e}", path.display()))
        })?;
        self.apply_text(&text)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let mut merged = self.clone();
        if let Some(path) = &self.config {
            merged.apply_file(path)?;
        }
        let defaults = ParameterSet::default();
        let params = ParameterSet {
            c: merged.c.unwrap_or(defaults.c),
            q0: merged.q0.unwrap_or(defaults.q0),
            q1: merged.q1.unwrap_or(defaults.q1),
            epsilon: merged.epsilon.unwrap_or_else(epsilon0),
            ..defaults
        };
        Ok(Resolved {
            params,
            sigma: merged.sigma.unwrap_or(0.9),
            t_start: merged.t_start,
            t_end: merged.t_end,
            snapshot_every: merged.snapshot_every,
            out_dir: merged.out_dir,
            seed: merged.seed.unwrap_or(0),
            lazy_buffer: merged.lazy_buffer.unwrap_or(false),
        })
    }
}

fn fill<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_file_overrides_defaults() {
        let mut s = Settings {
            c: Some(0.05),
            ..Settings::default()
        };
        s.apply_text("# comment\nc = 0.07\nq1 = 2.2\nt_start = -1.5\nlazy-buffer = true\n")
            .unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.params.c, 0.05);
        assert_eq!(r.params.q1, 2.2);
        assert_eq!(r.params.q0, 1.6);
        assert_eq!(r.t_start, Some(-1.5));
        assert!(r.lazy_buffer);
        assert_eq!(r.sigma, 0.9);
        assert_eq!(r.params.epsilon, epsilon0());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(matches!(
            Settings::default().apply_text("c 0.06"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Settings::default().apply_text("\nfoo = 1"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(Settings::default().apply_text("seed = -1").is_err());
    }
}
