//! The two-boson fiber operator `h_μ(k)`: multiplication by the pair energy
//! plus the rank-one on-site attraction `μ·(mean of f)`.
//!
//! Below the band the operator has exactly one eigenvalue `e_μ(k)`, the zero
//! of `Δ(k; z) = 1 + μ ∫ dq / (𝓔_k(q) - z)`. Everything here is phrased in the
//! binding gap `g = 𝓔_min(k) - z > 0`; the integrand then reads
//! `1 / (Σ_i b_i (1 - cos q_i) + g)` with `b_i = 2 cos(k_i / 2)`, which stays
//! free of cancellation right down to the band edge.
//!
//! In one dimension the continuum integral is evaluated by grid quadrature
//! with doubling. In two dimensions the inner axis integrates in closed form
//! and the outer one reduces to a complete elliptic integral, evaluated through
//! the arithmetic-geometric mean; this resolves the exponentially weak binding
//! of 2D pairs that no desk-scale grid can.

use serde::Serialize;

use crate::energy::{pair_band, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{Momentum, TorusGrid};
use crate::numerics::find_root_monotone;

/// Minimum distance below the pair band for the grid pair integral.
pub const BAND_MARGIN: f64 = 1e-9;

/// Largest quadrature grid used when doubling in one dimension.
pub const MAX_QUADRATURE_N_1D: usize = 4096;

/// Relative accuracy targeted by the converged pair integral.
const CONTINUUM_REL_TOL: f64 = 1e-14;

/// Per-axis coefficients `b_i = 2 cos(k_i / 2)` of the pair excitation energy.
fn excitation_coefficients(k: &Momentum) -> [f64; 2] {
    let mut b = [0.0; 2];
    for (dst, ki) in b.iter_mut().zip(k.components()) {
        *dst = 2.0 * (0.5 * ki).cos();
    }
    b
}

/// Mean of `1 / (Σ b_i (1 - cos q_i) + gap)` over the grid.
fn grid_gap_integral(b: [f64; 2], gap: f64, grid: &TorusGrid) -> f64 {
    let ex = grid.axis_excitation();
    let sum: f64 = match grid.dim() {
        1 => ex.iter().map(|e| 1.0 / (b[0] * e + gap)).sum(),
        _ => ex
            .iter()
            .map(|e0| {
                let base = b[0] * e0 + gap;
                ex.iter().map(|e1| 1.0 / (base + b[1] * e1)).sum::<f64>()
            })
            .sum(),
    };
    sum * grid.weight()
}

/// Arithmetic-geometric mean.
fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (an - bn).abs() <= 1e-16 * an {
            return an;
        }
        a = an;
        b = bn;
    }
    0.5 * (a + b)
}

/// `∫∫ η(dq) / (b_1 (1 - cos q_1) + b_2 (1 - cos q_2) + g)` in closed form:
/// `1 / (sqrt((g + 2b_1)(g + 2b_2)) · AGM(1, k'))` with complementary modulus
/// `k'² = g (g + 2b_1 + 2b_2) / ((g + 2b_1)(g + 2b_2))`.
fn elliptic_gap_integral(b: [f64; 2], gap: f64) -> f64 {
    let s1 = gap + 2.0 * b[0];
    let s2 = gap + 2.0 * b[1];
    let kp = (gap * (gap + 2.0 * b[0] + 2.0 * b[1]) / (s1 * s2)).sqrt();
    1.0 / ((s1 * s2).sqrt() * agm(1.0, kp))
}

fn check_below_band(k: &Momentum, z: f64) -> Result<f64> {
    let limit = pair_band(k).lo - BAND_MARGIN;
    if !(z < limit) {
        return Err(Error::Domain {
            context: "pair integral",
            z,
            limit,
        });
    }
    Ok(pair_band(k).lo - z)
}

/// Grid mean of `q ↦ 1 / (𝓔_k(q) - z)`.
pub fn pair_integral(k: &Momentum, z: f64, grid: &TorusGrid) -> Result<f64> {
    if k.dim() != grid.dim() {
        return Err(Error::InvalidInput(
            "momentum and grid dimensions differ".into(),
        ));
    }
    let gap = check_below_band(k, z)?;
    Ok(grid_gap_integral(excitation_coefficients(k), gap, grid))
}

/// `Δ(k; z) = 1 + μ · pair_integral(k, z)` on the given grid.
pub fn determinant(k: &Momentum, z: f64, params: &ModelParams, grid: &TorusGrid) -> Result<f64> {
    Ok(1.0 + params.mu() * pair_integral(k, z, grid)?)
}

/// Continuum pair integral at binding gap `gap > 0`, to near machine precision.
fn continuum_gap_integral(k: &Momentum, gap: f64) -> Result<f64> {
    let b = excitation_coefficients(k);
    match k.dim() {
        1 => {
            let mut n = 32;
            let mut coarse = grid_gap_integral(b, gap, &TorusGrid::new(1, n)?);
            loop {
                let fine = grid_gap_integral(b, gap, &TorusGrid::new(1, 2 * n)?);
                if (fine - coarse).abs() <= CONTINUUM_REL_TOL * fine.abs()
                    || 2 * n >= MAX_QUADRATURE_N_1D
                {
                    return Ok(fine);
                }
                coarse = fine;
                n *= 2;
            }
        }
        _ => Ok(elliptic_gap_integral(b, gap)),
    }
}

/// Converged `∫ η(dq) / (𝓔_k(q) - z)`.
pub fn pair_integral_continuum(k: &Momentum, z: f64) -> Result<f64> {
    let gap = check_below_band(k, z)?;
    continuum_gap_integral(k, gap)
}

/// Converged `Δ(k; z)`.
pub fn continuum_determinant(k: &Momentum, z: f64, params: &ModelParams) -> Result<f64> {
    Ok(1.0 + params.mu() * pair_integral_continuum(k, z)?)
}

/// Outcome of the bound-state search for one pair momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenvalueReport {
    pub energy: f64,
    /// `𝓔_min(k) - e_μ(k) > 0`.
    pub binding: f64,
    /// Final quadrature size (1D only).
    pub quadrature_n: Option<usize>,
    /// `|e_n - e_2n|` at the last doubling (1D), or the root tolerance (2D).
    pub achieved_tol: f64,
    pub converged: bool,
}

/// Zero of `g ↦ 1 + μ I(g)` for a monotone decreasing integral `I`.
///
/// Solved in `s = ln g` so that exponentially small gaps keep full relative
/// precision.
pub(crate) fn solve_gap<F>(mu: f64, mut integral: F) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let strength = mu.abs();
    // Δ ≥ 1 - |μ| / g, so the determinant is positive at g = 1.01 |μ|
    let s_hi = (1.01 * strength).ln();
    let mut s_lo = (0.5 * strength).ln();
    let mut found = false;
    for _ in 0..200 {
        if 1.0 + mu * integral(s_lo.exp()) < 0.0 {
            found = true;
            break;
        }
        s_lo -= 10f64.ln();
        if s_lo < -690.0 {
            break;
        }
    }
    if !found {
        return Err(Error::Internal(
            "pair determinant never changed sign below the band".into(),
        ));
    }
    let s = find_root_monotone(|s| 1.0 + mu * integral(s.exp()), s_lo, s_hi, 1e-14)?;
    Ok(s.exp())
}

/// Bound-state search with diagnostics.
///
/// In one dimension the root is recomputed on doubled grids, starting from
/// `grid`, until `|e_n - e_2n| < tol` or the cap `MAX_QUADRATURE_N_1D` is hit.
/// In two dimensions the closed-form integral is used and `grid` is only
/// checked for dimension.
pub fn eigenvalue_report(
    k: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
    tol: f64,
) -> Result<EigenvalueReport> {
    if k.dim() != params.dim() || grid.dim() != params.dim() {
        return Err(Error::InvalidInput(
            "dimension mismatch between k, grid and model".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let e_min = pair_band(k).lo;
    let b = excitation_coefficients(k);
    let mu = params.mu();
    match params.dim() {
        1 => {
            let mut n = grid.n();
            let mut g_prev = solve_gap(mu, |g| grid_gap_integral(b, g, grid))?;
            loop {
                let fine = TorusGrid::new(1, 2 * n)?;
                let g = solve_gap(mu, |g| grid_gap_integral(b, g, &fine))?;
                let diff = (g - g_prev).abs();
                let converged = diff < tol;
                if converged || 2 * n >= MAX_QUADRATURE_N_1D {
                    return Ok(EigenvalueReport {
                        energy: e_min - g,
                        binding: g,
                        quadrature_n: Some(2 * n),
                        achieved_tol: diff,
                        converged,
                    });
                }
                g_prev = g;
                n *= 2;
            }
        }
        _ => {
            let g = solve_gap(mu, |g| elliptic_gap_integral(b, g))?;
            Ok(EigenvalueReport {
                energy: e_min - g,
                binding: g,
                quadrature_n: None,
                achieved_tol: 1e-14 * g,
                converged: true,
            })
        }
    }
}

/// The unique eigenvalue `e_μ(k)` of `h_μ(k)`, below `𝓔_min(k)`.
pub fn eigenvalue(k: &Momentum, params: &ModelParams, grid: &TorusGrid, tol: f64) -> Result<f64> {
    Ok(eigenvalue_report(k, params, grid, tol)?.energy)
}

/// Exact one-dimensional eigenvalue `2 - sqrt(μ² + 4 cos²(k/2))`.
pub fn closed_form_1d(k: &Momentum, params: &ModelParams) -> Result<f64> {
    if params.dim() != 1 || k.dim() != 1 {
        return Err(Error::InvalidInput(
            "closed form exists only for d = 1".into(),
        ));
    }
    let c = (0.5 * k.components()[0]).cos();
    Ok(2.0 - (params.mu() * params.mu() + 4.0 * c * c).sqrt())
}

/// Bound pair at momentum `k` with its eigenfunction sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoBodyLevel {
    pub k: Momentum,
    pub energy: f64,
    pub binding: f64,
    /// `f(p) = normalizer / (𝓔_k(p) - e)` at every grid node, unit discrete norm.
    pub eigenfunction: Vec<f64>,
    /// Positive amplitude; equals `μ c(k)` in the usual `μ c / (𝓔_k - e)` form.
    pub normalizer: f64,
}

/// Eigenpair of `h_μ(k)`; the eigenfunction is positive and has unit norm
/// `Σ w f² = 1` on `grid`.
pub fn eigenfunction(k: &Momentum, params: &ModelParams, grid: &TorusGrid) -> Result<TwoBodyLevel> {
    let report = eigenvalue_report(k, params, grid, 1e-13)?;
    let b = excitation_coefficients(k);
    let raw: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|p| {
            let ex: f64 = p
                .components()
                .iter()
                .zip(b)
                .map(|(q, bi)| bi * (1.0 - q.cos()))
                .sum();
            1.0 / (ex + report.binding)
        })
        .collect();
    let norm = (grid.weight() * raw.iter().map(|v| v * v).sum::<f64>()).sqrt();
    Ok(TwoBodyLevel {
        k: *k,
        energy: report.energy,
        binding: report.binding,
        eigenfunction: raw.iter().map(|v| v / norm).collect(),
        normalizer: 1.0 / norm,
    })
}

/// `(h_μ(k) f)(p) = 𝓔_k(p) f(p) + μ · mean(f)` on the grid.
pub fn apply_pair_hamiltonian(
    k: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
    f: &[f64],
) -> Vec<f64> {
    let mean = grid.weight() * f.iter().sum::<f64>();
    grid.nodes()
        .iter()
        .zip(f)
        .map(|(p, v)| crate::energy::pair_energy(k, p) * v + params.mu() * mean)
        .collect()
}
