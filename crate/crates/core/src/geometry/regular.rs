//! Regular (weighted Delaunay) triangulation by exhaustive orthosphere tests.
//!
//! Every `(d+1)`-subset of the input, `d` being the dimension of the affine
//! hull of the centers, is accepted iff the power of every other sphere at
//! its orthocenter exceeds the common power of the subset. Signs the float
//! filter cannot decide are recomputed in exact rational arithmetic; an exact
//! tie means the input is not in general position and is rejected.

use std::cmp::Ordering;

use nalgebra::{Matrix3, Vector3};

use super::exact;
use super::{Vec3, WeightedSphere};
use crate::error::{Error, Result};

/// Sorted vertex indices of a simplex.
pub type Simplex = Vec<usize>;

#[derive(Clone, Debug)]
pub struct RegularTriangulation {
    vertices: Vec<WeightedSphere>,
    simplices: [Vec<Simplex>; 4],
    dimension: usize,
}

impl RegularTriangulation {
    pub fn vertices(&self) -> &[WeightedSphere] {
        &self.vertices
    }

    /// Simplices of dimension `dim` (0..=3), lexicographically sorted.
    pub fn simplices(&self, dim: usize) -> &[Simplex] {
        &self.simplices[dim]
    }

    /// Dimension of the affine hull of the input centers.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn all_simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter().flatten()
    }

    pub fn num_simplices(&self) -> usize {
        self.simplices.iter().map(Vec::len).sum()
    }

    /// Input spheres that are not vertices of the triangulation.
    pub fn redundant(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|i| self.simplices[0].binary_search(&vec![*i]).is_err())
            .collect()
    }

    /// Orthocenter of `simplex` inside its affine hull and the common power
    /// of the simplex's spheres there (the weight of the orthosphere).
    pub fn orthocenter(&self, simplex: &[usize]) -> Result<(Vec3, f64)> {
        let spheres: Vec<&WeightedSphere> = simplex.iter().map(|&i| &self.vertices[i]).collect();
        orthocenter(&spheres).ok_or_else(|| Error::Degenerate {
            simplex: simplex.to_vec(),
            reason: "affinely dependent centers".into(),
        })
    }

    /// Brute-force check: every top simplex's orthosphere has non-negative
    /// power gap to all input spheres.
    pub fn verify(&self, tol: f64) -> Result<()> {
        for simplex in &self.simplices[self.dimension] {
            let (y, p) = self.orthocenter(simplex)?;
            for (l, s) in self.vertices.iter().enumerate() {
                if simplex.contains(&l) {
                    continue;
                }
                let gap = s.power(&y) - p;
                if gap < -tol {
                    return Err(Error::Degenerate {
                        simplex: simplex.clone(),
                        reason: format!("sphere {l} has power gap {gap:e}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Float orthocenter of up to four spheres; `None` if their centers are
/// (numerically) affinely dependent.
pub(crate) fn orthocenter(spheres: &[&WeightedSphere]) -> Option<(Vec3, f64)> {
    let base = spheres[0];
    let k = spheres.len() - 1;
    if k == 0 {
        return Some((base.center, -base.weight));
    }
    let edges: Vec<Vec3> = spheres[1..]
        .iter()
        .map(|s| s.center - base.center)
        .collect();
    let mut g = Matrix3::identity();
    let mut b = Vector3::zeros();
    let mut scale = 1.0;
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = edges[i].dot(&edges[j]);
        }
        b[i] = 0.5 * (edges[i].norm_squared() + base.weight - spheres[i + 1].weight);
        scale *= edges[i].norm_squared();
    }
    if !(g.determinant().abs() > 1e-12 * scale) {
        return None;
    }
    let s = g.lu().solve(&b)?;
    let mut y = base.center;
    for i in 0..k {
        y += s[i] * edges[i];
    }
    Some((y, base.power(&y)))
}

/// Dimension of the affine hull of `points`, with the tolerance relative to
/// the point spread.
fn affine_dimension(points: &[Vec3]) -> usize {
    let origin = points[0];
    let spread = points
        .iter()
        .map(|p| (p - origin).norm())
        .fold(0.0, f64::max);
    if spread == 0.0 {
        return 0;
    }
    let tol = 1e-10 * spread;
    let mut basis: Vec<Vec3> = Vec::new();
    loop {
        let residual = |p: &Vec3| {
            let mut r = p - origin;
            for e in &basis {
                r -= r.dot(e) * e;
            }
            r
        };
        let best = points
            .iter()
            .map(residual)
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        if best.norm() <= tol || basis.len() == 3 {
            return basis.len();
        }
        basis.push(best.normalize());
    }
}

fn combinations(n: usize, k: usize, mut visit: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    if k > n {
        return Ok(());
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx)?;
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Build the regular triangulation of `spheres`.
///
/// Cost is `O(n^(d+2))`; intended for inputs of at most a few dozen spheres.
pub fn build_regular_triangulation(spheres: &[WeightedSphere]) -> Result<RegularTriangulation> {
    if spheres.is_empty() {
        return Err(Error::invalid("at least one sphere is required"));
    }
    let centers: Vec<Vec3> = spheres.iter().map(|s| s.center).collect();
    let dimension = affine_dimension(&centers);
    let n = spheres.len();

    let mut top: Vec<Simplex> = Vec::new();
    if dimension == 0 {
        // coincident centers: the heaviest sphere dominates the rest
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| spheres[*b].weight.total_cmp(&spheres[*a].weight));
        if n > 1 && spheres[order[0]].weight == spheres[order[1]].weight {
            return Err(Error::Degenerate {
                simplex: vec![order[0], order[1]],
                reason: "identical spheres".into(),
            });
        }
        top.push(vec![order[0]]);
    } else {
        let weight_scale = spheres.iter().map(|s| s.weight.abs()).fold(0.0, f64::max);
        let spread = centers
            .iter()
            .map(|c| (c - centers[0]).norm())
            .fold(0.0, f64::max);
        let tol = 1e-10 * (spread * spread + weight_scale);
        combinations(n, dimension + 1, |subset| {
            let members: Vec<&WeightedSphere> = subset.iter().map(|&i| &spheres[i]).collect();
            let Some((y, p)) = orthocenter(&members) else {
                let owned: Vec<WeightedSphere> = members.iter().map(|s| **s).collect();
                if exact::affinely_independent(&owned) {
                    return Err(Error::Degenerate {
                        simplex: subset.to_vec(),
                        reason: "nearly flat simplex".into(),
                    });
                }
                return Ok(());
            };
            for (l, s) in spheres.iter().enumerate() {
                if subset.contains(&l) {
                    continue;
                }
                let gap = s.power(&y) - p;
                if gap < -tol {
                    return Ok(());
                }
                if gap <= tol {
                    let owned: Vec<WeightedSphere> = members.iter().map(|s| **s).collect();
                    match exact::power_gap_sign(&owned, s) {
                        Some(Ordering::Greater) => {}
                        Some(Ordering::Less) => return Ok(()),
                        Some(Ordering::Equal) => {
                            return Err(Error::Degenerate {
                                simplex: subset.to_vec(),
                                reason: format!("sphere {l} lies on the orthosphere"),
                            })
                        }
                        None => return Ok(()),
                    }
                }
            }
            top.push(subset.to_vec());
            Ok(())
        })?;
        if top.is_empty() {
            return Err(Error::Degenerate {
                simplex: Vec::new(),
                reason: "no regular simplex found".into(),
            });
        }
    }

    let mut simplices: [Vec<Simplex>; 4] = Default::default();
    for t in &top {
        for k in 1..=t.len() {
            combinations(t.len(), k, |face| {
                simplices[k - 1].push(face.iter().map(|&i| t[i]).collect());
                Ok(())
            })?;
        }
    }
    for list in simplices.iter_mut() {
        list.sort();
        list.dedup();
    }
    Ok(RegularTriangulation {
        vertices: spheres.to_vec(),
        simplices,
        dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64, y: f64, z: f64, w: f64) -> WeightedSphere {
        WeightedSphere::new(Vec3::new(x, y, z), w).unwrap()
    }

    #[test]
    fn single_sphere_is_a_vertex() {
        let rt = build_regular_triangulation(&[s(0.0, 0.0, 0.0, 1.0)]).unwrap();
        assert_eq!(rt.simplices(0), &[vec![0]]);
        assert!(rt.simplices(1).is_empty());
        assert_eq!(rt.dimension(), 0);
    }

    #[test]
    fn four_spheres_make_one_tetrahedron() {
        let rt = build_regular_triangulation(&[
            s(0.0, 0.0, 0.0, 1.0),
            s(1.0, 0.0, 0.0, 1.0),
            s(0.0, 1.0, 0.0, 1.0),
            s(0.0, 0.0, 1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(rt.simplices(3).len(), 1);
        assert_eq!(rt.simplices(2).len(), 4);
        assert_eq!(rt.simplices(1).len(), 6);
        assert_eq!(rt.simplices(0).len(), 4);
    }

    #[test]
    fn interior_point_splits_tetrahedron() {
        let rt = build_regular_triangulation(&[
            s(0.0, 0.0, 0.0, 1.0),
            s(3.0, 0.0, 0.0, 1.0),
            s(0.0, 3.0, 0.0, 1.0),
            s(0.0, 0.0, 3.0, 1.0),
            s(0.6, 0.7, 0.8, 1.0),
        ])
        .unwrap();
        assert_eq!(rt.simplices(3).len(), 4);
        assert!(rt.simplices(3).iter().all(|t| t.contains(&4)));
        rt.verify(1e-12).unwrap();
    }

    #[test]
    fn light_sphere_can_be_redundant() {
        // a weak sphere between two heavy ones has an empty power cell
        let rt = build_regular_triangulation(&[
            s(0.0, 0.0, 0.0, 4.0),
            s(2.0, 0.0, 0.0, 4.0),
            s(1.0, 0.0, 0.0, -5.0),
        ])
        .unwrap();
        assert_eq!(rt.dimension(), 1);
        assert_eq!(rt.redundant(), vec![2]);
        assert_eq!(rt.simplices(1), &[vec![0, 1]]);
    }

    #[test]
    fn cospherical_input_is_rejected() {
        let err = build_regular_triangulation(&[
            s(1.0, 0.0, 0.0, 0.0),
            s(-1.0, 0.0, 0.0, 0.0),
            s(0.0, 1.0, 0.0, 0.0),
            s(0.0, -1.0, 0.0, 0.0),
            s(0.0, 0.0, 1.0, 0.0),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }), "{err}");
    }

    #[test]
    fn coplanar_input_triangulates_in_plane() {
        let rt = build_regular_triangulation(&[
            s(0.0, 0.0, 0.0, 0.5),
            s(2.0, 0.0, 0.0, 0.5),
            s(0.0, 2.0, 0.0, 0.5),
            s(2.1, 2.3, 0.0, 0.5),
        ])
        .unwrap();
        assert_eq!(rt.dimension(), 2);
        assert_eq!(rt.simplices(2).len(), 2);
        assert_eq!(rt.simplices(1).len(), 5);
    }

    #[test]
    fn identical_spheres_are_degenerate() {
        assert!(
            build_regular_triangulation(&[s(1.0, 1.0, 1.0, 1.0), s(1.0, 1.0, 1.0, 1.0)]).is_err()
        );
        let rt =
            build_regular_triangulation(&[s(1.0, 1.0, 1.0, 1.0), s(1.0, 1.0, 1.0, 2.0)]).unwrap();
        assert_eq!(rt.simplices(0), &[vec![1]]);
    }
}
