//! Parameter conditions (I)-(V) and the feasible `(C, Q)` region.

use std::io::Write;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheduler::ParameterSet;

/// `2 cos(asin(2e/(1-e)) + asin(e)) - 2e/(1-e)`, defined for `e <= 1/3`.
pub fn condition_one_lhs(eps: f64) -> f64 {
    let a = 2.0 * eps / (1.0 - eps);
    2.0 * (a.asin() + eps.asin()).cos() - a
}

const BRACKET: (f64, f64) = (0.1, 0.3);

/// Root of [`condition_one_lhs`] by bisection on `[0.1, 0.3]`.
pub fn epsilon0() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let (mut lo, mut hi) = BRACKET;
        assert!(
            condition_one_lhs(lo) > 0.0 && condition_one_lhs(hi) < 0.0,
            "condition (I) root is not bracketed"
        );
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if condition_one_lhs(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if condition_one_lhs(lo).abs() <= condition_one_lhs(hi).abs() {
            lo
        } else {
            hi
        }
    })
}

/// `delta = eps - 2C(eps + 1) / (Q + 2C)`.
pub fn delta(epsilon: f64, c: f64, q: f64) -> Result<f64> {
    if !(q + 2.0 * c > 0.0) {
        return Err(Error::invalid(format!(
            "need q + 2c > 0, got q = {q}, c = {c}"
        )));
    }
    Ok(epsilon - 2.0 * c * (epsilon + 1.0) / (q + 2.0 * c))
}

/// Sizes of the metamorphosis elements, supplied by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ElementSizes {
    pub r_ab: f64,
    pub r_bc: f64,
    pub r_wx: f64,
    pub r_abc: f64,
    pub r_vwx: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub i: bool,
    pub ii: bool,
    pub iii: bool,
    pub iv: Option<bool>,
    pub v: Option<bool>,
}

impl ConditionReport {
    pub fn all(&self) -> bool {
        self.i && self.ii && self.iii && self.iv.unwrap_or(true) && self.v.unwrap_or(true)
    }
}

/// Conditions (I)-(III) at quality constant `q`.
pub fn check_conditions(p: &ParameterSet, q: f64) -> ConditionReport {
    check_conditions_with_sizes(p, q, None)
}

/// Conditions (I)-(III), plus (IV)-(V) when element sizes are given.
pub fn check_conditions_with_sizes(
    p: &ParameterSet,
    q: f64,
    sizes: Option<&ElementSizes>,
) -> ConditionReport {
    let c = p.c;
    let i = p.epsilon > 0.0 && p.epsilon <= epsilon0();
    let ii = q * q - 4.0 * c * q > 2.0;
    let iii = match delta(p.epsilon, c, q) {
        Ok(d) => {
            let d2 = d * d;
            d2 / (1.0 + d2) - d2 / 4.0 > c * c * q * q
        }
        Err(_) => false,
    };
    let iv = sizes.map(|s| [s.r_ab, s.r_bc, s.r_wx].iter().all(|r| *r > c / q));
    let v = sizes.map(|s| {
        let bound = q.min(2.0 / q) * c * p.h;
        s.r_abc < bound && s.r_vwx < bound
    });
    ConditionReport { i, ii, iii, iv, v }
}

/// Check all conditions on `samples` evenly spaced `Q` values in
/// `[q0, q1]`.
pub fn check_interval(
    p: &ParameterSet,
    samples: usize,
    sizes: Option<&ElementSizes>,
) -> Result<()> {
    let n = samples.max(2);
    for k in 0..n {
        let q = p.q0 + (p.q1 - p.q0) * k as f64 / (n - 1) as f64;
        let report = check_conditions_with_sizes(p, q, sizes);
        if !report.all() {
            return Err(Error::invalid(format!(
                "parameter conditions fail at Q = {q}: {report:?}"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub c: f64,
    pub q: f64,
    pub feasible: bool,
}

/// Evaluate the conditions on a `resolution.0 x resolution.1` lattice of
/// `(C, Q)` pairs spanning both ranges inclusively.
pub fn rasterize_region(
    c_range: (f64, f64),
    q_range: (f64, f64),
    resolution: (usize, usize),
    epsilon: f64,
    h: f64,
    sizes: Option<&ElementSizes>,
) -> Result<Vec<GridCell>> {
    if !(c_range.0 > 0.0 && c_range.1 >= c_range.0 && q_range.0 > 0.0 && q_range.1 >= q_range.0) {
        return Err(Error::invalid(format!(
            "ranges must be positive and ordered: c {c_range:?}, q {q_range:?}"
        )));
    }
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(Error::invalid("grid resolution must be positive"));
    }
    let lerp = |(a, b): (f64, f64), k: usize, n: usize| {
        if n == 1 {
            a
        } else {
            a + (b - a) * k as f64 / (n - 1) as f64
        }
    };
    let mut cells = Vec::with_capacity(resolution.0 * resolution.1);
    for i in 0..resolution.0 {
        let c = lerp(c_range, i, resolution.0);
        for j in 0..resolution.1 {
            let q = lerp(q_range, j, resolution.1);
            let p = ParameterSet {
                epsilon,
                c,
                h,
                ..ParameterSet::default()
            };
            cells.push(GridCell {
                c,
                q,
                feasible: check_conditions_with_sizes(&p, q, sizes).all(),
            });
        }
    }
    Ok(cells)
}

/// CSV with header `c,q,feasible`.
pub fn write_region_csv<W: Write>(cells: &[GridCell], mut out: W) -> Result<()> {
    writeln!(out, "c,q,feasible")?;
    for cell in cells {
        writeln!(out, "{},{},{}", cell.c, cell.q, cell.feasible)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(c: f64) -> ParameterSet {
        ParameterSet {
            c,
            ..ParameterSet::default()
        }
    }

    #[test]
    fn epsilon0_value_and_residual() {
        let e = epsilon0();
        assert!((e - 0.279).abs() < 1e-3, "{e}");
        assert!(condition_one_lhs(e).abs() < 1e-10);
    }

    #[test]
    fn condition_one_changes_sign_once() {
        let values: Vec<f64> = (0..100)
            .map(|k| condition_one_lhs(BRACKET.0 + (BRACKET.1 - BRACKET.0) * k as f64 / 99.0))
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(
            values
                .windows(2)
                .filter(|w| w[0] > 0.0 && w[1] <= 0.0)
                .count(),
            1
        );
    }

    #[test]
    fn delta_values() {
        let d = delta(epsilon0(), 0.08, 1.65).unwrap();
        assert!((d - 0.166).abs() < 2e-3, "{d}");
        assert_eq!(delta(0.2, 0.0, 1.7).unwrap(), 0.2);
        assert!(delta(0.2, 0.1, 1.7).unwrap() < delta(0.2, 0.05, 1.7).unwrap());
        assert!(delta(0.2, 0.1, -1.0).is_err());
    }

    #[test]
    fn recommended_parameters_pass() {
        assert!(check_conditions(&at(0.08), 1.65).all());
        for q in [1.6, 1.95, 2.3] {
            assert!(check_conditions(&at(0.06), q).all(), "Q = {q}");
        }
        assert!(ParameterSet::default().validate().is_ok());
    }

    #[test]
    fn condition_two_failures() {
        assert!(!check_conditions(&at(0.30), 1.0).ii);
        assert!(!check_conditions(&at(0.5), 0.5).ii);
    }

    #[test]
    fn conditions_four_and_five_use_supplied_sizes() {
        let p = at(0.06);
        let ok = ElementSizes {
            r_ab: 0.1,
            r_bc: 0.1,
            r_wx: 0.1,
            r_abc: 0.05,
            r_vwx: 0.05,
        };
        let report = check_conditions_with_sizes(&p, 1.6, Some(&ok));
        assert_eq!((report.iv, report.v), (Some(true), Some(true)));
        let short = ElementSizes { r_ab: 0.01, ..ok };
        assert_eq!(
            check_conditions_with_sizes(&p, 1.6, Some(&short)).iv,
            Some(false)
        );
        let big = ElementSizes { r_vwx: 0.2, ..ok };
        assert_eq!(
            check_conditions_with_sizes(&p, 1.6, Some(&big)).v,
            Some(false)
        );
    }

    #[test]
    fn region_csv() {
        let cells =
            rasterize_region((0.06, 0.08), (1.65, 1.65), (2, 1), epsilon0(), 0.993, None).unwrap();
        assert!(cells.iter().all(|c| c.feasible));
        let mut buf = Vec::new();
        write_region_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("c,q,feasible"));
        assert_eq!(text.lines().count(), 3);
    }
}
