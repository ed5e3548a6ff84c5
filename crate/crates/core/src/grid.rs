//! Uniform box partitions with oriented faces and face quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Boundary, DomainSpec};
use crate::quadrature::gauss_legendre_on;

/// Uniform tensor partition of a [`DomainSpec`] into `n_1 x .. x n_d` boxes.
///
/// Boxes are numbered row-major: the last axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    domain: DomainSpec,
    counts: Vec<usize>,
    widths: Vec<f64>,
    strides: Vec<usize>,
}

/// Oriented face from `owner` towards `neighbor` (`None` on a closed boundary).
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub axis: usize,
    /// `+1.0` if the outward normal is `+e_axis`, `-1.0` otherwise.
    pub sign: f64,
    pub measure: f64,
    pub center: Vec<f64>,
}

impl Face {
    pub fn normal(&self, d: usize) -> Vec<f64> {
        let mut n = vec![0.0; d];
        n[self.axis] = self.sign;
        n
    }
}

pub fn make_grid(domain: &DomainSpec, counts: &[usize]) -> Result<BoxGrid> {
    BoxGrid::new(domain.clone(), counts)
}

impl BoxGrid {
    pub fn new(domain: DomainSpec, counts: &[usize]) -> Result<Self> {
        let d = domain.dim();
        if counts.len() != d {
            return Err(Error::InvalidArgument(format!(
                "{} box counts given for a {d}-dimensional domain",
                counts.len()
            )));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidArgument("box counts must be positive".into()));
        }
        let widths = (0..d)
            .map(|k| domain.interval(k).width() / counts[k] as f64)
            .collect();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Ok(Self {
            domain,
            counts: counts.to_vec(),
            widths,
            strides,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of every box.
    pub fn box_measure(&self) -> f64 {
        self.widths.iter().product()
    }

    pub fn multi_index(&self, index: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|k| index / self.strides[k] % self.counts[k])
            .collect()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let i = index / self.strides[k] % self.counts[k];
                self.domain.interval(k).lower + (i as f64 + 0.5) * self.widths[k]
            })
            .collect()
    }

    /// Lower corner of box `index`.
    pub fn lower_corner(&self, index: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let i = index / self.strides[k] % self.counts[k];
                self.domain.interval(k).lower + i as f64 * self.widths[k]
            })
            .collect()
    }

    /// Index of the box containing `x`; periodic axes wrap, closed axes clamp.
    pub fn locate_box(&self, x: &[f64]) -> usize {
        let mut index = 0;
        for k in 0..self.dim() {
            let iv = self.domain.interval(k);
            let n = self.counts[k];
            let t = (x[k] - iv.lower) / self.widths[k];
            let i = match self.domain.boundary(k) {
                Boundary::Periodic => {
                    let i = t.floor().rem_euclid(n as f64);
                    // rem_euclid of a value just below a multiple of n may round to n
                    (i as usize).min(n - 1)
                }
                Boundary::Closed => {
                    if t.is_nan() || t <= 0.0 {
                        0
                    } else {
                        (t.floor() as usize).min(n - 1)
                    }
                }
            };
            index += i * self.strides[k];
        }
        index
    }

    /// Neighbor of `index` one step along `axis` in direction `sign`.
    pub fn neighbor(&self, index: usize, axis: usize, sign: f64) -> Option<usize> {
        let i = index / self.strides[axis] % self.counts[axis];
        let n = self.counts[axis];
        let j = if sign > 0.0 {
            if i + 1 < n {
                i + 1
            } else if self.domain.boundary(axis) == Boundary::Periodic {
                0
            } else {
                return None;
            }
        } else if i > 0 {
            i - 1
        } else if self.domain.boundary(axis) == Boundary::Periodic {
            n - 1
        } else {
            return None;
        };
        Some(index - i * self.strides[axis] + j * self.strides[axis])
    }

    /// The `2d` oriented faces of one box, in axis order, minus side first.
    pub fn box_faces(&self, index: usize) -> Vec<Face> {
        let d = self.dim();
        let center = self.center(index);
        let mut faces = Vec::with_capacity(2 * d);
        let measure_all: f64 = self.box_measure();
        for axis in 0..d {
            for sign in [-1.0, 1.0] {
                let mut c = center.clone();
                c[axis] += sign * 0.5 * self.widths[axis];
                let measure = if d == 1 {
                    1.0
                } else {
                    measure_all / self.widths[axis]
                };
                faces.push(Face {
                    owner: index,
                    neighbor: self.neighbor(index, axis, sign),
                    axis,
                    sign,
                    measure,
                    center: c,
                });
            }
        }
        faces
    }

    /// All oriented faces: every geometric interior face appears once per orientation.
    pub fn enumerate_faces(&self) -> Vec<Face> {
        (0..self.len()).flat_map(|i| self.box_faces(i)).collect()
    }
}

/// Tensor Gauss–Legendre rule on a face. Weights sum to the face measure.
/// In one dimension the face is a point and the rule is that point with weight 1.
pub fn face_quadrature(grid: &BoxGrid, face: &Face, order: usize) -> Vec<(Vec<f64>, f64)> {
    let d = grid.dim();
    if d == 1 {
        return vec![(face.center.clone(), 1.0)];
    }
    let order = order.max(1);
    let tangential: Vec<usize> = (0..d).filter(|&k| k != face.axis).collect();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = tangential
        .iter()
        .map(|&k| {
            let h = grid.widths()[k];
            gauss_legendre_on(order, face.center[k] - 0.5 * h, face.center[k] + 0.5 * h)
        })
        .collect();
    let total = order.pow(tangential.len() as u32);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut x = face.center.clone();
        let mut w = 1.0;
        let mut rem = flat;
        for (t, &k) in tangential.iter().enumerate().rev() {
            let q = rem % order;
            rem /= order;
            x[k] = rules[t].0[q];
            w *= rules[t].1[q];
        }
        out.push((x, w));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn torus(d: usize) -> DomainSpec {
        DomainSpec::unit_torus(d).unwrap()
    }

    fn lorenz_box() -> DomainSpec {
        DomainSpec::new(
            &[(-30.0, 30.0), (-30.0, 30.0), (-10.0, 70.0)],
            &[Boundary::Closed; 3],
        )
        .unwrap()
    }

    #[test]
    fn grid_measures() {
        let g = make_grid(&torus(1), &[4]).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.widths(), &[0.25]);
        assert_eq!(g.box_measure(), 0.25);
        let g = make_grid(&torus(2), &[8, 8]).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.box_measure(), 1.0 / 64.0);
        let g = make_grid(&lorenz_box(), &[128, 128, 128]).unwrap();
        assert_relative_eq!(
            g.box_measure(),
            60.0 * 60.0 * 80.0 / 128f64.powi(3),
            max_relative = 1e-15
        );
        assert!(make_grid(&torus(1), &[0]).is_err());
        assert!(make_grid(&torus(2), &[4]).is_err());
    }

    #[test]
    fn locate() {
        let g = make_grid(&torus(1), &[4]).unwrap();
        assert_eq!(g.locate_box(&[0.30]), 1);
        assert_eq!(g.locate_box(&[1.01]), 0);
        assert_eq!(g.locate_box(&[-0.01]), 3);
        assert_eq!(g.locate_box(&[-1e-18]), 3);
        let g = make_grid(&lorenz_box(), &[8, 8, 8]).unwrap();
        let i = g.locate_box(&[-31.0, 0.0, 0.0]);
        assert_eq!(g.multi_index(i), vec![0, 4, 1]);
        // the last box on a closed axis is closed on the right
        let j = g.locate_box(&[30.0, 30.0, 70.0]);
        assert_eq!(g.multi_index(j), vec![7, 7, 7]);
    }

    #[test]
    fn face_counts() {
        let g = make_grid(&torus(1), &[2]).unwrap();
        let faces = g.enumerate_faces();
        assert_eq!(faces.len(), 4);
        assert!(faces.iter().all(|f| f.neighbor.is_some()));

        let closed = DomainSpec::new(&[(0.0, 1.0)], &[Boundary::Closed]).unwrap();
        let g = make_grid(&closed, &[2]).unwrap();
        let faces = g.enumerate_faces();
        assert_eq!(faces.iter().filter(|f| f.neighbor.is_some()).count(), 2);
        assert_eq!(faces.iter().filter(|f| f.neighbor.is_none()).count(), 2);

        let g = make_grid(&torus(2), &[2, 2]).unwrap();
        assert_eq!(g.enumerate_faces().len(), 16);
    }

    #[test]
    fn quadrature_rules() {
        let g = make_grid(&torus(1), &[2]).unwrap();
        let face = g.box_faces(0).pop().unwrap();
        let q = face_quadrature(&g, &face, 3);
        assert_eq!(q, vec![(vec![0.5], 1.0)]);

        let g = make_grid(&torus(2), &[4, 8]).unwrap();
        let face = &g.box_faces(5)[0];
        let q = face_quadrature(&g, face, 1);
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].0, face.center);
        assert_relative_eq!(q[0].1, 1.0 / 8.0, max_relative = 1e-15);

        let g = make_grid(&lorenz_box(), &[4, 4, 4]).unwrap();
        for face in g.box_faces(21) {
            let q = face_quadrature(&g, &face, 5);
            assert_eq!(q.len(), 25);
            let s: f64 = q.iter().map(|p| p.1).sum();
            assert_relative_eq!(s, face.measure, max_relative = 1e-13);
            assert!(q.iter().all(|p| p.1 > 0.0));
            assert!(q.iter().all(|p| p.0[face.axis] == face.center[face.axis]));
        }
    }

    #[test]
    fn periodic_faces_pair_up() {
        let g = make_grid(&torus(3), &[3, 2, 4]).unwrap();
        let faces = g.enumerate_faces();
        for f in &faces {
            let j = f.neighbor.unwrap();
            assert!(faces.iter().any(|r| r.owner == j
                && r.neighbor == Some(f.owner)
                && r.axis == f.axis
                && r.sign == -f.sign));
        }
    }

    proptest! {
        #[test]
        fn index_maps_are_bijective(n0 in 1usize..6, n1 in 1usize..6, n2 in 1usize..6) {
            let g = make_grid(&torus(3), &[n0, n1, n2]).unwrap();
            for i in 0..g.len() {
                prop_assert_eq!(g.linear_index(&g.multi_index(i)), i);
                prop_assert_eq!(g.locate_box(&g.center(i)), i);
            }
            let total: f64 = (0..g.len()).map(|_| g.box_measure()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
