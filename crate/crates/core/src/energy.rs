//! Lattice dispersion and the pair / three-particle energy surfaces.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Momentum, TorusGrid};

/// Dimension and (attractive) on-site coupling of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    dim: usize,
    mu: f64,
}

impl ModelParams {
    pub fn new(dim: usize, mu: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(mu.is_finite() && mu < 0.0) {
            return Err(Error::InvalidInput(format!(
                "coupling must be negative, got {mu}"
            )));
        }
        Ok(Self { dim, mu })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidInput(format!(
                "interval bounds out of order: [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `ε(p) = Σ_i (1 - cos p_i)`.
#[inline]
pub fn dispersion(p: &Momentum) -> f64 {
    p.components().iter().map(|x| 1.0 - x.cos()).sum()
}

/// Kinetic energy of a pair with total momentum `k` and relative momentum `p`:
/// `ε(k/2 - p) + ε(k/2 + p) = Σ_i [2 - 2 cos(k_i/2) cos p_i]`.
#[inline]
pub fn pair_energy(k: &Momentum, p: &Momentum) -> f64 {
    k.components()
        .iter()
        .zip(p.components())
        .map(|(ki, pi)| 2.0 - 2.0 * (0.5 * ki).cos() * pi.cos())
        .sum()
}

/// `E(K; p, q) = ε(K - p - q) + ε(p) + ε(q)`.
#[inline]
pub fn three_energy(total: &Momentum, p: &Momentum, q: &Momentum) -> f64 {
    dispersion(&(*total - *p - *q)) + dispersion(p) + dispersion(q)
}

/// Spectrum of the free pair Hamiltonian at total momentum `k`.
pub fn pair_band(k: &Momentum) -> Interval {
    let (lo, hi) = k
        .components()
        .iter()
        .map(|ki| (0.5 * ki).cos())
        .fold((0.0, 0.0), |(lo, hi), c| {
            (lo + 2.0 * (1.0 - c), hi + 2.0 * (1.0 + c))
        });
    Interval { lo, hi }
}

/// Bottom of the free three-particle band, `3 ε(K/3)`.
pub fn three_band_bottom(total: &Momentum) -> f64 {
    3.0 * dispersion(&total.scale(1.0 / 3.0))
}

/// Spectrum `[E_min(K), E_max(K)]` of the free three-particle fiber.
///
/// The bottom is the closed form `3 ε(K/3)`. The top has no closed form: it is
/// the largest of the symmetric candidates `3 ε((K + 2πm)/3)` and a grid
/// maximum polished by coordinate-wise golden-section search.
pub fn three_band(total: &Momentum, grid: &TorusGrid) -> Interval {
    let lo = three_band_bottom(total);
    let dim = total.dim();

    let mut best = f64::NEG_INFINITY;
    for m in 0..3usize.pow(dim as u32) {
        let shift = [(m % 3) as f64, (m / 3) as f64];
        let c: Vec<f64> = total
            .components()
            .iter()
            .zip(shift)
            .map(|(k, s)| (k + 2.0 * PI * s) / 3.0)
            .collect();
        let p = Momentum::new(&c).expect("finite candidate");
        best = best.max(three_energy(total, &p, &p));
    }

    let nodes = grid.nodes();
    let (mut bi, mut bj, mut grid_best) = (0, 0, f64::NEG_INFINITY);
    for (i, p) in nodes.iter().enumerate() {
        for (j, q) in nodes.iter().enumerate() {
            let e = three_energy(total, p, q);
            if e > grid_best {
                grid_best = e;
                bi = i;
                bj = j;
            }
        }
    }
    let mut x = [0.0f64; 4];
    x[..dim].copy_from_slice(nodes[bi].components());
    x[dim..2 * dim].copy_from_slice(nodes[bj].components());
    let eval = |x: &[f64; 4]| {
        let p = Momentum::new(&x[..dim]).expect("finite");
        let q = Momentum::new(&x[dim..2 * dim]).expect("finite");
        three_energy(total, &p, &q)
    };
    let h = grid.spacing();
    for _ in 0..8 {
        for axis in 0..2 * dim {
            let centre = x[axis];
            let t = golden_section_max(
                |t| {
                    let mut y = x;
                    y[axis] = t;
                    eval(&y)
                },
                centre - h,
                centre + h,
                1e-10,
            );
            let mut y = x;
            y[axis] = t;
            if eval(&y) >= eval(&x) {
                x = y;
            }
        }
    }
    Interval {
        lo,
        hi: best.max(grid_best).max(eval(&x)),
    }
}

/// Golden-section search for a maximum of a unimodal function on `[a, b]`.
pub(crate) fn golden_section_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    golden_section_min(|x| -f(x), a, b, tol)
}

/// Golden-section search for a minimum of a unimodal function on `[a, b]`.
pub(crate) fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn m(c: &[f64]) -> Momentum {
        Momentum::new(c).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1, -1.0).is_ok());
        assert!(ModelParams::new(1, 0.0).is_err());
        assert!(ModelParams::new(1, 1.0).is_err());
        assert!(ModelParams::new(3, -1.0).is_err());
        assert!(Interval::new(1.0, 0.0).is_err());
    }

    #[test]
    fn dispersion_extremes() {
        assert_eq!(dispersion(&m(&[0.0])), 0.0);
        assert_eq!(dispersion(&m(&[PI])), 2.0);
        assert_eq!(dispersion(&m(&[PI, PI])), 4.0);
    }

    #[test]
    fn pair_energy_values() {
        assert_eq!(pair_energy(&m(&[0.0]), &m(&[0.0])), 0.0);
        assert_eq!(pair_energy(&m(&[0.0]), &m(&[PI])), 4.0);
        for x in [-2.0, 0.3, 1.0, PI] {
            assert!((pair_energy(&m(&[PI]), &m(&[x])) - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn three_energy_values() {
        let z = m(&[0.0]);
        assert_eq!(three_energy(&z, &z, &z), 0.0);
        assert!((three_energy(&z, &m(&[PI]), &m(&[PI])) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn pair_band_closed_forms() {
        assert_eq!(pair_band(&m(&[0.0])), Interval { lo: 0.0, hi: 4.0 });
        let b = pair_band(&m(&[PI]));
        assert!((b.lo - 2.0).abs() < 1e-15 && (b.hi - 2.0).abs() < 1e-15);
        assert_eq!(pair_band(&m(&[0.0, 0.0])), Interval { lo: 0.0, hi: 8.0 });
    }

    #[test]
    fn pair_band_matches_brute_force_extremes() {
        let g = make_grid(1, 512).unwrap();
        for k in [0.0, 0.7, -2.0, PI] {
            let k = m(&[k]);
            let vals: Vec<f64> = g.nodes().iter().map(|p| pair_energy(&k, p)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let band = pair_band(&k);
            assert!((band.lo - lo).abs() < 1e-12 && (band.hi - hi).abs() < 1e-12);
        }
    }

    /// Independent brute force: dense 256² scan plus local refinement.
    fn brute_force_max(total: &Momentum) -> f64 {
        let n = 256;
        let g = make_grid(1, n).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut arg = (0.0, 0.0);
        for p in g.nodes() {
            for q in g.nodes() {
                let e = three_energy(total, p, q);
                if e > best {
                    best = e;
                    arg = (p.components()[0], q.components()[0]);
                }
            }
        }
        // zoom: repeated 41×41 scans on shrinking boxes around the incumbent
        let mut h = g.spacing();
        let steps = 40;
        for _ in 0..12 {
            let centre = arg;
            for a in 0..=steps {
                for b in 0..=steps {
                    let p = centre.0 - h + 2.0 * h * a as f64 / steps as f64;
                    let q = centre.1 - h + 2.0 * h * b as f64 / steps as f64;
                    let e = three_energy(total, &m(&[p]), &m(&[q]));
                    if e > best {
                        best = e;
                        arg = (p, q);
                    }
                }
            }
            h *= 0.25;
        }
        best
    }

    #[test]
    fn three_band_at_zero_total_momentum() {
        let g = make_grid(1, 32).unwrap();
        let band = three_band(&m(&[0.0]), &g);
        assert_eq!(band.lo, 0.0);
        // maximum sits at p = q = ±2π/3, where 3 ε(2π/3) = 4.5
        let brute = brute_force_max(&m(&[0.0]));
        assert!((brute - 4.5).abs() < 1e-9);
        assert!((band.hi - brute).abs() < 1e-9);
    }

    #[test]
    fn three_band_off_zero() {
        let g = make_grid(1, 32).unwrap();
        for k in [0.4, 1.3, PI] {
            let total = m(&[k]);
            let band = three_band(&total, &g);
            assert!((band.hi - brute_force_max(&total)).abs() < 1e-8, "K = {k}");
        }
        let b2 = three_band(&m(&[PI, PI]), &make_grid(2, 8).unwrap());
        assert!((b2.lo - 3.0).abs() < 1e-14);
    }

    #[test]
    fn three_band_bottom_is_grid_minimum_to_second_order() {
        for k in [0.0, 0.9, 2.5, PI] {
            let total = m(&[k]);
            let lo = three_band_bottom(&total);
            let mut prev_gap = f64::INFINITY;
            for n in [16, 32, 64] {
                let g = make_grid(1, n).unwrap();
                let min = g
                    .nodes()
                    .iter()
                    .flat_map(|p| g.nodes().iter().map(move |q| (p, q)))
                    .map(|(p, q)| three_energy(&total, p, q))
                    .fold(f64::INFINITY, f64::min);
                let gap = min - lo;
                assert!(gap >= -1e-14, "grid minimum below closed form at K = {k}");
                assert!(gap <= g.spacing().powi(2), "gap {gap} too large at n = {n}");
                assert!(gap <= prev_gap + 1e-15);
                prev_gap = gap;
            }
        }
    }

    proptest! {
        #[test]
        fn dispersion_bounds_and_parity(x in -10.0f64..10.0, y in -10.0f64..10.0) {
            let p = m(&[x, y]);
            let e = dispersion(&p);
            prop_assert!((0.0..=4.0).contains(&e));
            prop_assert!((e - dispersion(&-p)).abs() < 1e-14);
        }

        #[test]
        fn pair_energy_two_routes(k0 in -PI..PI, k1 in -PI..PI, p0 in -PI..PI, p1 in -PI..PI) {
            let k = m(&[k0, k1]);
            let p = m(&[p0, p1]);
            let half = k.scale(0.5);
            let direct = dispersion(&(half - p)) + dispersion(&(half + p));
            prop_assert!((pair_energy(&k, &p) - direct).abs() < 1e-14);
            prop_assert!((pair_energy(&k, &p) - pair_energy(&k, &-p)).abs() < 1e-14);
        }

        #[test]
        fn three_energy_permutation_symmetry(a in 0usize..64, b in 0usize..64, c in 0usize..64) {
            let g = make_grid(2, 8).unwrap();
            let total = g.node(c);
            let (p, q) = (g.node(a), g.node(b));
            let r = total - p - q;
            let e = three_energy(&total, &p, &q);
            for (x, y) in [(q, p), (q, r), (r, q), (p, r), (r, p)] {
                prop_assert!((three_energy(&total, &x, &y) - e).abs() < 1e-14);
            }
        }
    }
}
