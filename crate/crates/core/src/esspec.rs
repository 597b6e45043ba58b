//! Essential spectrum of the three-boson fiber `H_μ(K)`.
//!
//! A bound pair with momentum `k` and a free spectator with momentum
//! `p = K - k` form the two-particle branch `Z_μ(K, k) = e_μ(k) + ε(K - k)`.
//! Its range together with the free three-particle band is the essential
//! spectrum; the bottom `τ_ess` is always attained on the branch.

use std::cell::RefCell;

use serde::Serialize;

use crate::energy::{
    dispersion, golden_section_min, pair_band, three_band, three_energy, Interval, ModelParams,
};
use crate::error::{Error, Result};
use crate::grid::{Momentum, TorusGrid};
use crate::numerics::{linear_fit, LineFit};
use crate::twobody;

/// Accuracy of the pair eigenvalues entering the branch.
const BRANCH_ROOT_TOL: f64 = 1e-13;

/// Momentum accuracy of the local refinement of branch extrema.
const REFINE_TOL: f64 = 1e-9;

/// Values within this distance count as the same minimum.
const DEGENERACY_TOL: f64 = 1e-10;

/// Distances from `p_μ(K)` sampled by the quadratic-vanishing diagnostic.
pub const VANISHING_RADII: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

/// Sorted union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalUnion {
    pub parts: Vec<Interval>,
}

impl IntervalUnion {
    /// Merges overlapping or touching intervals.
    pub fn merge(intervals: &[Interval]) -> Self {
        let mut sorted = intervals.to_vec();
        sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut parts: Vec<Interval> = Vec::with_capacity(sorted.len());
        for iv in sorted {
            match parts.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => parts.push(iv),
            }
        }
        Self { parts }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.parts.iter().any(|iv| iv.contains(x))
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssentialSpectrum {
    #[serde(rename = "K")]
    pub total: Momentum,
    /// `[min_k Z, max_k Z]`.
    pub branch: Interval,
    /// `[E_min(K), E_max(K)]`.
    pub band: Interval,
    pub union: IntervalUnion,
    pub tau_ess: f64,
    /// Minimizing spectator momentum `p_μ(K)`.
    pub p_min: Momentum,
    /// Further spectator momenta attaining `tau_ess` within `1e-10`, away from `p_min`.
    pub degenerate_minimizers: Vec<Momentum>,
    /// `Z(K, 2K/3)`, an explicit point of the branch below `E_min(K)`.
    pub witness: f64,
}

/// Pair eigenvalue plus spectator kinetic energy at pair momentum `k`.
pub fn channel_value(
    total: &Momentum,
    k: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<f64> {
    let e = twobody::eigenvalue(k, params, grid, BRANCH_ROOT_TOL)?;
    Ok(e + dispersion(&(*total - *k)))
}

/// Branch evaluator over raw pair-momentum coordinates that records the first
/// failure instead of aborting the search that calls it.
struct Branch<'a> {
    total: Momentum,
    params: &'a ModelParams,
    grid: &'a TorusGrid,
    failure: RefCell<Option<Error>>,
}

impl Branch<'_> {
    fn at(&self, coords: &[f64]) -> f64 {
        let value = Momentum::new(coords)
            .and_then(|k| channel_value(&self.total, &k, self.params, self.grid));
        match value {
            Ok(v) => v,
            Err(e) => {
                self.failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self.failure.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Coordinate-wise golden-section polish of a minimum of `sign · Z`
    /// starting from a grid node.
    fn polish(&self, start: &Momentum, sign: f64) -> (Momentum, f64) {
        let dim = start.dim();
        let h = self.grid.spacing();
        let mut x = [0.0f64; 2];
        x[..dim].copy_from_slice(start.components());
        let cycles = if dim == 1 { 1 } else { 6 };
        let mut best = sign * self.at(&x[..dim]);
        for _ in 0..cycles {
            for axis in 0..dim {
                let centre = x[axis];
                let t = golden_section_min(
                    |t| {
                        let mut y = x;
                        y[axis] = t;
                        sign * self.at(&y[..dim])
                    },
                    centre - h,
                    centre + h,
                    REFINE_TOL,
                );
                let mut y = x;
                y[axis] = t;
                let v = sign * self.at(&y[..dim]);
                if v <= best {
                    best = v;
                    x = y;
                }
            }
        }
        let k = Momentum::new(&x[..dim]).unwrap_or(*start);
        (k, sign * best)
    }
}

/// Grid nodes whose value is no larger than at any axis neighbour.
fn local_minima(values: &[f64], grid: &TorusGrid) -> Vec<usize> {
    let n = grid.n();
    (0..values.len())
        .filter(|&i| {
            let idx = grid.unflatten(i);
            (0..grid.dim()).all(|axis| {
                [1, n - 1].iter().all(|&step| {
                    let mut j = idx;
                    j[axis] = (j[axis] + step) % n;
                    values[i] <= values[grid.flatten(j)]
                })
            })
        })
        .collect()
}

/// Range of `Z_μ(K, ·)` over the torus.
///
/// Extrema are located on `k_grid` and then polished locally. Besides the
/// interval this returns every minimizer in the spectator convention
/// `p = K - k`, best first; more than one entry means the minimum is attained
/// at separated points.
pub fn channel_branch_all(
    total: &Momentum,
    params: &ModelParams,
    k_grid: &TorusGrid,
) -> Result<(Interval, Vec<Momentum>)> {
    if total.dim() != params.dim() || k_grid.dim() != params.dim() {
        return Err(Error::InvalidInput(
            "dimension mismatch between K, grid and model".into(),
        ));
    }
    let branch = Branch {
        total: *total,
        params,
        grid: k_grid,
        failure: RefCell::new(None),
    };
    let values: Vec<f64> = k_grid
        .nodes()
        .iter()
        .map(|k| branch.at(k.components()))
        .collect();
    branch.check()?;

    let grid_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let grid_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-3 * (grid_max - grid_min) + 1e-12;
    let mut candidates: Vec<(Momentum, f64)> = local_minima(&values, k_grid)
        .into_iter()
        .filter(|&i| values[i] <= grid_min + slack)
        .map(|i| branch.polish(&k_grid.node(i), 1.0))
        .collect();
    branch.check()?;
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let lo = candidates[0].1;

    let mut minimizers: Vec<Momentum> = Vec::new();
    for (k, v) in &candidates {
        if *v - lo > DEGENERACY_TOL {
            break;
        }
        if minimizers
            .iter()
            .all(|m| m.distance(k) > 2.0 * k_grid.spacing())
        {
            minimizers.push(*k);
        }
    }

    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    let hi = local_minima(&negated, k_grid)
        .into_iter()
        .filter(|&i| values[i] >= grid_max - slack)
        .map(|i| branch.polish(&k_grid.node(i), -1.0).1)
        .fold(grid_max, f64::max);
    branch.check()?;

    let spectators = minimizers.iter().map(|k| *total - *k).collect();
    Ok((Interval { lo, hi }, spectators))
}

/// Range of `Z_μ(K, ·)` and the minimizing spectator momentum `p_μ(K)`.
pub fn channel_branch(
    total: &Momentum,
    params: &ModelParams,
    k_grid: &TorusGrid,
) -> Result<(Interval, Momentum)> {
    let (iv, minimizers) = channel_branch_all(total, params, k_grid)?;
    Ok((iv, minimizers[0]))
}

pub fn essential_spectrum(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<EssentialSpectrum> {
    let (branch, mut minimizers) = channel_branch_all(total, params, grid)?;
    let band = three_band(total, grid);
    let tau_ess = branch.lo;
    if !(tau_ess < band.lo) {
        return Err(Error::Internal(format!(
            "branch bottom {tau_ess} is not below the three-particle band {}",
            band.lo
        )));
    }
    let witness = channel_value(total, &total.scale(2.0 / 3.0), params, grid)?;
    let p_min = minimizers.remove(0);
    Ok(EssentialSpectrum {
        total: *total,
        branch,
        band,
        union: IntervalUnion::merge(&[branch, band]),
        tau_ess,
        p_min,
        degenerate_minimizers: minimizers,
        witness,
    })
}

/// `1 + μ ∫ dq / (E(K; p, q) - z)` for spectator momentum `p`.
///
/// Shifting `q = (K - p)/2 + t` turns the integral into the pair integral at
/// momentum `K - p` and energy `z - ε(p)`.
pub fn channel_determinant(
    total: &Momentum,
    p: &Momentum,
    z: f64,
    params: &ModelParams,
) -> Result<f64> {
    twobody::continuum_determinant(&(*total - *p), z - dispersion(p), params)
}

/// Grid counterpart of [`channel_determinant`]: the quadrature sum runs over
/// the grid nodes `t` directly, `1 + μ w Σ_t 1 / (E(K; p, t) - z)`.
pub fn channel_determinant_grid(
    total: &Momentum,
    p: &Momentum,
    z: f64,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<f64> {
    let limit = pair_band(&(*total - *p)).lo + dispersion(p);
    if !(z < limit) {
        return Err(Error::Domain {
            context: "channel determinant",
            z,
            limit,
        });
    }
    let sum: f64 = grid
        .nodes()
        .iter()
        .map(|t| 1.0 / (three_energy(total, p, t) - z))
        .sum();
    Ok(1.0 + params.mu() * grid.weight() * sum)
}

/// Log-log fit of `Δ(K, p, τ_ess)` against `|p - p_μ(K)|` along `direction`.
pub fn quadratic_vanishing_along(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
    direction: &[f64],
) -> Result<LineFit> {
    if direction.len() != params.dim() {
        return Err(Error::InvalidInput(
            "direction has the wrong dimension".into(),
        ));
    }
    let length = direction.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(length > 0.0) {
        return Err(Error::InvalidInput("direction must be non-zero".into()));
    }
    let es = essential_spectrum(total, params, grid)?;
    if let Some(other) = es.degenerate_minimizers.first() {
        return Err(Error::AmbiguousMinimizer {
            first: es.p_min.components().to_vec(),
            second: other.components().to_vec(),
        });
    }
    let mut xs = Vec::with_capacity(VANISHING_RADII.len());
    let mut ys = Vec::with_capacity(VANISHING_RADII.len());
    for r in VANISHING_RADII {
        let p = es.p_min.offset(direction, r / length);
        let value = channel_determinant(total, &p, es.tau_ess, params)?;
        if !(value > 0.0) {
            return Err(Error::Diagnostic { distance: r, value });
        }
        xs.push(r.ln());
        ys.push(value.ln());
    }
    linear_fit(&xs, &ys)
}

/// Quadratic-vanishing diagnostic along the first axis.
pub fn quadratic_vanishing_check(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<LineFit> {
    let mut direction = vec![0.0; params.dim()];
    direction[0] = 1.0;
    quadratic_vanishing_along(total, params, grid, &direction)
}
