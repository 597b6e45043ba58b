//! Quasi-momenta on the torus `(-π, π]^d` and uniform grids on it.
//!
//! Grid nodes form the subgroup `{2πj/n}` of the torus, so sums, differences
//! and negatives of on-grid momenta stay on the grid. Index arithmetic is done
//! on integers to keep that closure exact.

use std::f64::consts::PI;
use std::ops::{Add, Neg, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Reduces an angle into `(-π, π]`.
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TWO_PI);
    if y > PI {
        y - TWO_PI
    } else {
        y
    }
}

/// A point of the torus in dimension 1 or 2, always stored in canonical form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Momentum {
    dim: usize,
    c: [f64; 2],
}

impl Momentum {
    /// Wraps every component into `(-π, π]`.
    pub fn new(components: &[f64]) -> Result<Self> {
        let dim = components.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "momentum dimension must be 1 or 2, got {dim}"
            )));
        }
        if let Some(i) = components.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "momentum component",
                index: i,
                value: components[i],
            });
        }
        Ok(Self::wrapped(dim, components))
    }

    pub fn zero(dim: usize) -> Self {
        assert!((1..=2).contains(&dim));
        Self { dim, c: [0.0; 2] }
    }

    /// Same momentum with every component equal to `value` (wrapped).
    pub fn splat(dim: usize, value: f64) -> Self {
        Self::wrapped(dim, &[value, value][..dim])
    }

    fn wrapped(dim: usize, components: &[f64]) -> Self {
        let mut c = [0.0; 2];
        for (dst, src) in c.iter_mut().zip(components) {
            *dst = wrap_angle(*src);
        }
        Self { dim, c }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    /// Componentwise scaling of the canonical representative, then wrapped.
    /// Halving or dividing by three never leaves `(-π, π]`, so `k/2` and `K/3`
    /// are taken on the representative without re-wrapping.
    pub fn scale(&self, factor: f64) -> Self {
        let scaled = [self.c[0] * factor, self.c[1] * factor];
        Self::wrapped(self.dim, &scaled[..self.dim])
    }

    /// Moves `step` along `direction` (not normalised) and wraps.
    pub fn offset(&self, direction: &[f64], step: f64) -> Self {
        let mut c = self.c;
        for (dst, d) in c.iter_mut().zip(direction) {
            *dst += step * d;
        }
        Self::wrapped(self.dim, &c[..self.dim])
    }

    /// Torus distance in the max-norm.
    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other)
            .components()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.components()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Add for Momentum {
    type Output = Momentum;
    fn add(self, rhs: Momentum) -> Momentum {
        debug_assert_eq!(self.dim, rhs.dim);
        let s = [self.c[0] + rhs.c[0], self.c[1] + rhs.c[1]];
        Momentum::wrapped(self.dim, &s[..self.dim])
    }
}

impl Sub for Momentum {
    type Output = Momentum;
    fn sub(self, rhs: Momentum) -> Momentum {
        debug_assert_eq!(self.dim, rhs.dim);
        let s = [self.c[0] - rhs.c[0], self.c[1] - rhs.c[1]];
        Momentum::wrapped(self.dim, &s[..self.dim])
    }
}

impl Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        let s = [-self.c[0], -self.c[1]];
        Momentum::wrapped(self.dim, &s[..self.dim])
    }
}

impl Serialize for Momentum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.components().serialize(s)
    }
}

/// Componentwise reduction into `(-π, π]`.
pub fn wrap(p: &[f64]) -> Result<Momentum> {
    Momentum::new(p)
}

/// Uniform grid of `n^d` nodes `2πj/n` (wrapped), each with weight `1/n^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    axis: Vec<f64>,
    axis_excitation: Vec<f64>,
    nodes: Vec<Momentum>,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "points per axis must be even and at least 8, got {n}"
            )));
        }
        let axis: Vec<f64> = (0..n)
            .map(|j| {
                if 2 * j <= n {
                    TWO_PI * j as f64 / n as f64
                } else {
                    TWO_PI * (j as f64 - n as f64) / n as f64
                }
            })
            .collect();
        let nodes = (0..n.pow(dim as u32))
            .map(|flat| {
                let mut c = [0.0; 2];
                let mut rest = flat;
                for slot in (0..dim).rev() {
                    c[slot] = axis[rest % n];
                    rest /= n;
                }
                Momentum { dim, c }
            })
            .collect();
        let axis_excitation = axis.iter().map(|q| 1.0 - q.cos()).collect();
        Ok(Self {
            dim,
            n,
            axis,
            axis_excitation,
            nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.nodes.len() as f64
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// `1 - cos q` for every axis node `q`.
    pub fn axis_excitation(&self) -> &[f64] {
        &self.axis_excitation
    }

    pub fn nodes(&self) -> &[Momentum] {
        &self.nodes
    }

    pub fn node(&self, flat: usize) -> Momentum {
        self.nodes[flat]
    }

    /// Per-axis integer coordinates of a flat index.
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        let mut out = [0usize; 2];
        let mut rest = flat;
        for slot in (0..self.dim).rev() {
            out[slot] = rest % self.n;
            rest /= self.n;
        }
        out
    }

    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Flat index of `a + b` (mod 2π per axis).
    pub fn add_index(&self, a: usize, b: usize) -> usize {
        let (ia, ib) = (self.unflatten(a), self.unflatten(b));
        self.flatten([(ia[0] + ib[0]) % self.n, (ia[1] + ib[1]) % self.n])
    }

    /// Flat index of `a - b` (mod 2π per axis).
    pub fn sub_index(&self, a: usize, b: usize) -> usize {
        let (ia, ib) = (self.unflatten(a), self.unflatten(b));
        self.flatten([
            (ia[0] + self.n - ib[0]) % self.n,
            (ia[1] + self.n - ib[1]) % self.n,
        ])
    }

    pub fn neg_index(&self, a: usize) -> usize {
        self.sub_index(0, a)
    }

    /// Flat index of the node equal to `p`, if `p` lies on the grid.
    pub fn index_of(&self, p: &Momentum) -> Option<usize> {
        if p.dim() != self.dim {
            return None;
        }
        let h = self.spacing();
        let mut idx = [0usize; 2];
        for (slot, &x) in p.components().iter().enumerate() {
            let t = x.rem_euclid(TWO_PI) / h;
            let j = t.round();
            if (t - j).abs() > 1e-9 {
                return None;
            }
            idx[slot] = (j as usize) % self.n;
        }
        Some(self.flatten(idx))
    }

    pub fn contains(&self, p: &Momentum) -> bool {
        self.index_of(p).is_some()
    }
}

pub fn make_grid(dim: usize, n: usize) -> Result<TorusGrid> {
    TorusGrid::new(dim, n)
}

/// Grid with twice as many points per axis; the original nodes are a subset.
pub fn refine(grid: &TorusGrid) -> TorusGrid {
    TorusGrid::new(grid.dim, 2 * grid.n).expect("doubling a valid grid stays valid")
}

/// Normalised Haar mean of `g` over the grid nodes.
pub fn integrate<F>(g: F, grid: &TorusGrid) -> Result<f64>
where
    F: Fn(&Momentum) -> f64,
{
    let mut sum = 0.0;
    for (i, p) in grid.nodes().iter().enumerate() {
        let v = g(p);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "integrand",
                index: i,
                value: v,
            });
        }
        sum += v;
    }
    Ok(sum * grid.weight())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_grid_of_eight() {
        let g = make_grid(1, 8).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.weight(), 0.125);
        let mut xs: Vec<f64> = g.nodes().iter().map(|p| p.components()[0]).collect();
        xs.sort_by(f64::total_cmp);
        let want = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0].map(|j| j * PI / 4.0);
        for (x, w) in xs.iter().zip(want) {
            assert!((x - w).abs() < 1e-15, "{x} vs {w}");
        }
        assert_eq!(xs[7], PI);
    }

    #[test]
    fn two_dimensional_grid_and_bad_sizes() {
        let g = make_grid(2, 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.weight(), 1.0 / 64.0);
        assert!(make_grid(1, 7).is_err());
        assert!(make_grid(1, 6).is_err());
        assert!(make_grid(3, 8).is_err());
    }

    #[test]
    fn wrap_conventions() {
        assert!((wrap(&[1.5 * PI]).unwrap().components()[0] + 0.5 * PI).abs() < 1e-15);
        assert_eq!(wrap(&[-PI]).unwrap().components()[0], PI);
        assert_eq!(wrap(&[2.0 * PI, 0.0]).unwrap().components(), &[0.0, 0.0]);
        assert!(wrap(&[f64::NAN]).is_err());
    }

    #[test]
    fn refinement_contains_coarse_nodes() {
        for dim in 1..=2 {
            let g = make_grid(dim, 8).unwrap();
            let f = refine(&g);
            assert_eq!(f.n(), 16);
            assert_eq!(f.dim(), dim);
            assert!(g.nodes().iter().all(|p| f.contains(p)));
        }
    }

    #[test]
    fn quadrature_exactness() {
        let g = make_grid(1, 16).unwrap();
        assert_eq!(integrate(|_| 1.0, &g).unwrap(), 1.0);
        assert!(integrate(|p| p.components()[0].cos(), &g).unwrap().abs() < 1e-15);
        let g2 = make_grid(2, 8).unwrap();
        assert_eq!(integrate(|_| 1.0, &g2).unwrap(), 1.0);
    }

    #[test]
    fn watson_integral_by_quadrature() {
        // ∫ dq/(2π) 1/(a - b cos q) = 1/sqrt(a² - b²); here a = 2 - z, b = 2, z = -1
        let g = make_grid(1, 64).unwrap();
        let v = integrate(|p| 1.0 / (3.0 - 2.0 * p.components()[0].cos()), &g).unwrap();
        assert!((v - 1.0 / 5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn non_finite_integrand_names_node() {
        let g = make_grid(1, 8).unwrap();
        let err = integrate(|p| 1.0 / p.components()[0], &g).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0, .. }));
    }

    #[test]
    fn quadrature_error_decays_geometrically() {
        let f = |p: &Momentum| 1.0 / (3.0 - 2.0 * p.components()[0].cos());
        let diffs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let g = make_grid(1, n).unwrap();
                (integrate(f, &g).unwrap() - integrate(f, &refine(&g)).unwrap()).abs()
            })
            .collect();
        assert!(diffs[1] < 0.05 * diffs[0] && diffs[2] < 0.05 * diffs[1]);
    }

    proptest! {
        #[test]
        fn trig_polynomials_integrate_to_zero(m0 in 0i32..16, m1 in 0i32..16) {
            prop_assume!(m0 != 0 || m1 != 0);
            let g = make_grid(2, 16).unwrap();
            let re = integrate(|p| (m0 as f64 * p.components()[0] + m1 as f64 * p.components()[1]).cos(), &g).unwrap();
            let im = integrate(|p| (m0 as f64 * p.components()[0] + m1 as f64 * p.components()[1]).sin(), &g).unwrap();
            prop_assert!(re.abs() < 1e-13 && im.abs() < 1e-13);
        }

        #[test]
        fn grid_is_a_group(a in 0usize..64, b in 0usize..64) {
            let g = make_grid(2, 8).unwrap();
            let s = g.node(a) + g.node(b);
            prop_assert_eq!(g.index_of(&s), Some(g.add_index(a, b)));
            let d = g.node(a) - g.node(b);
            prop_assert_eq!(g.index_of(&d), Some(g.sub_index(a, b)));
            prop_assert_eq!(g.index_of(&(-g.node(a))), Some(g.neg_index(a)));
        }

        #[test]
        fn wrapped_components_in_range(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let p = wrap(&[x, y]).unwrap();
            for &c in p.components() {
                prop_assert!(c > -PI && c <= PI);
            }
        }
    }
}
