//! Lattice (coordinate-space) coefficients of momentum-space wavefunctions
//! and exponential decay fits on max-norm shells.

use num_complex::Complex64;
use serde::Serialize;

use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::grid::{Momentum, TorusGrid};
use crate::numerics::linear_fit;
use crate::twobody::closed_form_1d;

/// Shell maxima below this are treated as lost to round-off.
pub const UNDERFLOW_FLOOR: f64 = 1e-14;

/// `c(x) = w Σ_p e^{i p·x} f(p)` on the box `|x|∞ ≤ radius`.
///
/// A grid table (`n^d` values) gives one lattice vector `x`; a grid² table
/// (`n^{2d}` values, row-major in `(p, q)`) gives a pair `(x, y)`. Sites are
/// stored row-major with every axis running over `-radius..=radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeTable {
    axes: usize,
    radius: usize,
    values: Vec<Complex64>,
}

impl LatticeTable {
    pub fn axes(&self) -> usize {
        self.axes
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn side(&self) -> usize {
        2 * self.radius + 1
    }

    fn site_of(&self, flat: usize) -> Vec<i64> {
        let side = self.side();
        let mut rest = flat;
        let mut site = vec![0i64; self.axes];
        for slot in site.iter_mut().rev() {
            *slot = (rest % side) as i64 - self.radius as i64;
            rest /= side;
        }
        site
    }

    /// Coefficient at a lattice site, if inside the box.
    pub fn get(&self, site: &[i64]) -> Option<Complex64> {
        if site.len() != self.axes {
            return None;
        }
        let r = self.radius as i64;
        let mut flat = 0usize;
        for &s in site {
            if s.abs() > r {
                return None;
            }
            flat = flat * self.side() + (s + r) as usize;
        }
        Some(self.values[flat])
    }

    /// `max |c|` over sites whose largest coordinate magnitude equals `r`.
    pub fn shell_max(&self, r: usize) -> f64 {
        (0..self.values.len())
            .filter(|&i| {
                self.site_of(i)
                    .iter()
                    .map(|s| s.unsigned_abs() as usize)
                    .max()
                    == Some(r)
            })
            .map(|i| self.values[i].norm())
            .fold(0.0, f64::max)
    }

    /// `Σ |c|²` over one full period of sites, `-n/2 < x_a ≤ n/2`.
    pub fn period_norm_sqr(&self) -> f64 {
        let r = self.radius as i64;
        (0..self.values.len())
            .filter(|&i| self.site_of(i).iter().all(|&s| s > -r))
            .map(|i| self.values[i].norm_sqr())
            .sum()
    }
}

/// Lattice coefficients of a grid or grid² table up to `|x|∞ ≤ radius`.
pub fn lattice_coefficients(
    values: &[f64],
    grid: &TorusGrid,
    radius: usize,
) -> Result<LatticeTable> {
    if 2 * radius > grid.n() {
        return Err(Error::Aliasing {
            cutoff: radius,
            n: grid.n(),
        });
    }
    let len = grid.len();
    let axes = if values.len() == len {
        grid.dim()
    } else if values.len() == len * len {
        2 * grid.dim()
    } else {
        return Err(Error::InvalidInput(format!(
            "table of {} values matches neither grid ({len}) nor grid² ({})",
            values.len(),
            len * len
        )));
    };
    let n = grid.n();
    let side = 2 * radius + 1;
    let phases: Vec<Complex64> = (0..side)
        .flat_map(|s| {
            let x = s as f64 - radius as f64;
            grid.axis()
                .iter()
                .map(move |q| Complex64::from_polar(1.0 / n as f64, q * x))
        })
        .collect();

    // one axis at a time: shape [outer, n, inner] -> [outer, side, inner]
    let mut current: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let mut shape = vec![n; axes];
    for axis in 0..axes {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut next = vec![Complex64::new(0.0, 0.0); outer * side * inner];
        for o in 0..outer {
            for s in 0..side {
                let row = &phases[s * n..(s + 1) * n];
                let dst = &mut next[(o * side + s) * inner..(o * side + s + 1) * inner];
                for (j, ph) in row.iter().enumerate() {
                    let src = &current[(o * n + j) * inner..(o * n + j + 1) * inner];
                    for (d, v) in dst.iter_mut().zip(src) {
                        *d += ph * v;
                    }
                }
            }
        }
        current = next;
        shape[axis] = side;
    }
    Ok(LatticeTable {
        axes,
        radius,
        values: current,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    /// Decay per lattice step, minus the fitted slope of `ln max|c|`.
    pub rate: f64,
    pub r2: f64,
    pub radii: Vec<usize>,
    pub peak_amplitudes: Vec<f64>,
    pub theoretical_rate: Option<f64>,
}

/// Exponential fit of the shell maxima for `r_min ≤ r ≤ r_max`.
pub fn decay_fit(table: &LatticeTable, r_min: usize, r_max: usize) -> Result<DecayReport> {
    if r_max > table.radius() {
        return Err(Error::InvalidInput(format!(
            "fit radius {r_max} exceeds the table radius {}",
            table.radius()
        )));
    }
    if r_max < r_min + 3 {
        return Err(Error::InvalidInput(format!(
            "fit window [{r_min}, {r_max}] needs at least four shells"
        )));
    }
    let radii: Vec<usize> = (r_min..=r_max).collect();
    let peak_amplitudes: Vec<f64> = radii.iter().map(|&r| table.shell_max(r)).collect();
    if let Some((r, v)) = radii
        .iter()
        .zip(&peak_amplitudes)
        .find(|(_, v)| **v < UNDERFLOW_FLOOR)
    {
        return Err(Error::Underflow {
            radius: *r,
            value: *v,
        });
    }
    let xs: Vec<f64> = radii.iter().map(|&r| r as f64).collect();
    let ys: Vec<f64> = peak_amplitudes.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(DecayReport {
        rate: -fit.slope,
        r2: fit.r2,
        radii,
        peak_amplitudes,
        theoretical_rate: None,
    })
}

/// `arccosh((2 - e_μ(k)) / (2 cos(k/2)))`, the decay rate of the
/// one-dimensional bound pair.
pub fn two_body_decay_rate_1d(k: &Momentum, params: &ModelParams) -> Result<f64> {
    let e = closed_form_1d(k, params)?;
    let k0 = k.components()[0];
    let limit = std::f64::consts::PI - 1e-6;
    if k0.abs() >= limit {
        return Err(Error::Domain {
            context: "two-body decay rate near the flat band",
            z: k0.abs(),
            limit,
        });
    }
    Ok(((2.0 - e) / (2.0 * (0.5 * k0).cos())).acosh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::twobody::eigenfunction;
    use std::f64::consts::PI;

    fn m(c: &[f64]) -> Momentum {
        Momentum::new(c).unwrap()
    }

    #[test]
    fn constant_and_cosine() {
        let g = make_grid(1, 16).unwrap();
        let ones = vec![1.0; 16];
        let t = lattice_coefficients(&ones, &g, 4).unwrap();
        for x in -4..=4i64 {
            let want = if x == 0 { 1.0 } else { 0.0 };
            assert!((t.get(&[x]).unwrap() - want).norm() < 1e-12);
        }
        let cosines: Vec<f64> = g.nodes().iter().map(|p| p.components()[0].cos()).collect();
        let t = lattice_coefficients(&cosines, &g, 4).unwrap();
        assert!((t.get(&[1]).unwrap().re - 0.5).abs() < 1e-12);
        assert!((t.get(&[-1]).unwrap().re - 0.5).abs() < 1e-12);
        assert!(t.get(&[2]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn pair_table_factorizes() {
        let g = make_grid(2, 8).unwrap();
        let len = g.len();
        let mut f = vec![0.0; len * len];
        for (i, p) in g.nodes().iter().enumerate() {
            for (j, q) in g.nodes().iter().enumerate() {
                f[i * len + j] = p.components()[1].cos() * (2.0 * q.components()[0]).cos();
            }
        }
        let t = lattice_coefficients(&f, &g, 3).unwrap();
        assert_eq!(t.axes(), 4);
        assert!((t.get(&[0, 1, 2, 0]).unwrap().re - 0.25).abs() < 1e-12);
        assert!((t.get(&[0, -1, -2, 0]).unwrap().re - 0.25).abs() < 1e-12);
        assert!(t.get(&[1, 1, 2, 0]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn parseval_on_a_full_period() {
        let g = make_grid(1, 32).unwrap();
        let level = eigenfunction(&m(&[0.7]), &ModelParams::new(1, -1.0).unwrap(), &g).unwrap();
        let t = lattice_coefficients(&level.eigenfunction, &g, 16).unwrap();
        assert!((t.period_norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_aliasing() {
        let g = make_grid(1, 16).unwrap();
        assert!(matches!(
            lattice_coefficients(&[1.0; 16], &g, 9),
            Err(Error::Aliasing { cutoff: 9, n: 16 })
        ));
    }

    #[test]
    fn pair_wavefunction_is_even_positive_and_decreasing() {
        let g = make_grid(1, 128).unwrap();
        let level = eigenfunction(&m(&[0.0]), &ModelParams::new(1, -1.0).unwrap(), &g).unwrap();
        let t = lattice_coefficients(&level.eigenfunction, &g, 12).unwrap();
        for x in 0..12i64 {
            let a = t.get(&[x]).unwrap();
            assert!(a.re > 0.0 && a.im.abs() < 1e-14);
            assert!((a - t.get(&[-x]).unwrap()).norm() < 1e-14);
            assert!(t.get(&[x + 1]).unwrap().re < a.re);
        }
    }

    #[test]
    fn pair_decay_matches_analytic_rate() {
        let g = make_grid(1, 128).unwrap();
        for (k, mu) in [(0.0, -1.0), (PI / 2.0, -2.0), (0.0, -0.5)] {
            let params = ModelParams::new(1, mu).unwrap();
            let k = m(&[k]);
            let level = eigenfunction(&k, &params, &g).unwrap();
            let t = lattice_coefficients(&level.eigenfunction, &g, 12).unwrap();
            let fit = decay_fit(&t, 3, 12).unwrap();
            let want = two_body_decay_rate_1d(&k, &params).unwrap();
            assert!(
                (fit.rate - want).abs() < 0.02 * want,
                "{} vs {want}",
                fit.rate
            );
            assert!(fit.r2 > 0.999);
        }
        let rate = two_body_decay_rate_1d(&m(&[0.0]), &ModelParams::new(1, -1.0).unwrap()).unwrap();
        assert!((rate - 0.4812118250596034).abs() < 1e-12);
    }

    #[test]
    fn decay_rate_domain() {
        let p = ModelParams::new(1, -1.0).unwrap();
        assert!(matches!(
            two_body_decay_rate_1d(&m(&[PI]), &p),
            Err(Error::Domain { .. })
        ));
        let weak = two_body_decay_rate_1d(&m(&[1.0]), &ModelParams::new(1, -0.5).unwrap()).unwrap();
        let strong =
            two_body_decay_rate_1d(&m(&[1.0]), &ModelParams::new(1, -2.0).unwrap()).unwrap();
        assert!(strong > weak && weak > 0.0);
    }

    #[test]
    fn fit_window_and_underflow() {
        let g = make_grid(1, 64).unwrap();
        let level = eigenfunction(&m(&[0.0]), &ModelParams::new(1, -5.0).unwrap(), &g).unwrap();
        let t = lattice_coefficients(&level.eigenfunction, &g, 32).unwrap();
        assert!(decay_fit(&t, 3, 5).is_err());
        assert!(decay_fit(&t, 3, 40).is_err());
        assert!(matches!(decay_fit(&t, 3, 32), Err(Error::Underflow { .. })));
    }
}
