//! Exact rational re-evaluation of the orthosphere predicate, used when the
//! floating-point filter cannot decide a sign.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::WeightedSphere;

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

struct ExactSphere {
    c: [BigRational; 3],
    w: BigRational,
}

impl ExactSphere {
    fn new(s: &WeightedSphere) -> Self {
        ExactSphere {
            c: [rat(s.center.x), rat(s.center.y), rat(s.center.z)],
            w: rat(s.weight),
        }
    }

    fn power(&self, y: &[BigRational; 3]) -> BigRational {
        let mut acc = -self.w.clone();
        for i in 0..3 {
            let d = &y[i] - &self.c[i];
            acc += &d * &d;
        }
        acc
    }
}

fn dot(a: &[BigRational; 3], b: &[BigRational; 3]) -> BigRational {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

fn sub(a: &[BigRational; 3], b: &[BigRational; 3]) -> [BigRational; 3] {
    [&a[0] - &b[0], &a[1] - &b[1], &a[2] - &b[2]]
}

/// Solve `G s = b` by fraction-exact Gaussian elimination. `None` when `G`
/// is singular.
fn solve(mut g: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !g[r][col].is_zero())?;
        g.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r == col || g[r][col].is_zero() {
                continue;
            }
            let f = &g[r][col] / &g[col][col];
            for c in col..n {
                let v = &f * &g[col][c];
                g[r][c] -= v;
            }
            let v = &f * &b[col];
            b[r] -= v;
        }
    }
    Some((0..n).map(|i| &b[i] / &g[i][i]).collect())
}

/// Orthocenter of the simplex spanned by `simplex` inside its affine hull,
/// in exact arithmetic.
fn orthocenter(simplex: &[WeightedSphere]) -> Option<([BigRational; 3], ExactSphere)> {
    let pts: Vec<ExactSphere> = simplex.iter().map(ExactSphere::new).collect();
    let base = &pts[0];
    let edges: Vec<[BigRational; 3]> = pts[1..].iter().map(|p| sub(&p.c, &base.c)).collect();
    let k = edges.len();
    let mut y = base.c.clone();
    if k > 0 {
        let g = (0..k)
            .map(|i| (0..k).map(|j| dot(&edges[i], &edges[j])).collect())
            .collect();
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let b = (0..k)
            .map(|j| (dot(&edges[j], &edges[j]) + &base.w - &pts[j + 1].w) * &half)
            .collect();
        let s = solve(g, b)?;
        for (e, sj) in edges.iter().zip(&s) {
            for i in 0..3 {
                y[i] += &e[i] * sj;
            }
        }
    }
    let base = pts.into_iter().next().unwrap();
    Some((y, base))
}

/// Exact sign of `pi_q(y) - pi_0(y)` where `y` is the orthocenter of
/// `simplex`. `None` if the simplex is affinely degenerate.
pub(crate) fn power_gap_sign(
    simplex: &[WeightedSphere],
    query: &WeightedSphere,
) -> Option<Ordering> {
    let (y, base) = orthocenter(simplex)?;
    let gap = ExactSphere::new(query).power(&y) - base.power(&y);
    Some(if gap.is_zero() {
        Ordering::Equal
    } else if gap.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    })
}

/// Exact affine-independence test for up to four centers.
pub(crate) fn affinely_independent(simplex: &[WeightedSphere]) -> bool {
    orthocenter(simplex).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn cospherical_point_has_zero_gap() {
        let s = |x, y, z| WeightedSphere::new(Vec3::new(x, y, z), 0.0).unwrap();
        let tet = [
            s(1.0, 0.0, 0.0),
            s(-1.0, 0.0, 0.0),
            s(0.0, 1.0, 0.0),
            s(0.0, 0.0, 1.0),
        ];
        assert_eq!(
            power_gap_sign(&tet, &s(0.0, -1.0, 0.0)),
            Some(Ordering::Equal)
        );
        assert_eq!(
            power_gap_sign(&tet, &s(0.0, -2.0, 0.0)),
            Some(Ordering::Greater)
        );
        assert_eq!(
            power_gap_sign(&tet, &s(0.0, -0.5, 0.0)),
            Some(Ordering::Less)
        );
    }

    #[test]
    fn coplanar_tetrahedron_is_degenerate() {
        let s = |x, y| WeightedSphere::new(Vec3::new(x, y, 0.0), 0.0).unwrap();
        assert!(!affinely_independent(&[
            s(0.0, 0.0),
            s(1.0, 0.0),
            s(0.0, 1.0),
            s(1.0, 1.0)
        ]));
        assert!(affinely_independent(&[
            s(0.0, 0.0),
            s(1.0, 0.0),
            s(0.0, 1.0)
        ]));
    }
}
