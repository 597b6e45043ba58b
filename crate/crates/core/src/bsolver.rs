//! Birman–Schwinger counting of three-boson bound states.
//!
//! On a grid with weight `w`, the symmetric-sector fiber `H_μ(K)` has exactly
//! as many eigenvalues below `z` as the matrix
//!
//! ```text
//! L_ij = -2μ w Δ_i^{-1/2} Δ_j^{-1/2} / (E(K; p_i, p_j) - z)
//! ```
//!
//! has eigenvalues above one, where `Δ_i = 1 + μ w Σ_t 1 / (E(K; p_i, t) - z)`
//! is the grid channel determinant at spectator `p_i`. This holds whenever
//! every `Δ_i` is positive, i.e. below the threshold `tau_grid` where the
//! first grid determinant vanishes.

use num_complex::Complex64;
use serde::Serialize;

use crate::energy::{three_band_bottom, three_energy, ModelParams};
use crate::error::{Error, Result};
use crate::esspec::{essential_spectrum, EssentialSpectrum};
use crate::grid::{Momentum, TorusGrid};
use crate::numerics::{sym_eigen, sym_eigenvalues, SymmetricMatrix};
use crate::twobody::solve_gap;

/// Eigenvalues of `L` this close to one are flagged as ties.
pub const TIE_TOL: f64 = 1e-10;

/// Number of halvings in the stabilization ladder.
pub const LADDER_STEPS: usize = 20;

/// Reconstruction refuses energies whose nearest `L` eigenvalue is farther from one.
pub const STALE_TOL: f64 = 1e-4;

/// Discretized Birman–Schwinger operator at one spectral parameter.
#[derive(Debug, Clone)]
pub struct BsMatrix {
    pub total: Momentum,
    pub z: f64,
    pub matrix: SymmetricMatrix,
    /// Grid channel determinants `Δ_i`, all positive.
    pub determinants: Vec<f64>,
}

/// Eigenvalue count of `L(z)` above one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountSample {
    pub z: f64,
    pub count: usize,
    /// Some eigenvalue lies within `TIE_TOL` of one.
    pub tie: bool,
}

/// Outcome of the stabilization ladder `z_j = ceiling - Δ₀ 2^{-j}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountProtocol {
    pub count: usize,
    pub converged: bool,
    pub ladder: Vec<CountSample>,
    pub tau_ess: f64,
    pub tau_grid: f64,
    pub ceiling: f64,
    /// `Δ₀ 2^{-J}`: states closer than this to the ceiling can be missed.
    pub resolution_floor: f64,
}

/// Bound states of `H_μ(K)` below the continuum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundStateSet {
    #[serde(rename = "K")]
    pub total: Momentum,
    pub energies: Vec<f64>,
    pub count: usize,
    /// Per energy, `min_j |1 - λ_j(L(E))|` (Birman–Schwinger route) or the
    /// relative eigen-residual (direct diagonalization).
    pub residuals: Vec<f64>,
    /// Two or more states were not separated at the requested width.
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavefunctions: Option<Vec<Vec<f64>>>,
}

/// Continuum and grid thresholds for one total momentum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    pub tau_ess: f64,
    /// Lowest zero of the grid channel determinants over the grid spectators.
    pub tau_grid: f64,
    /// `min(tau_ess, tau_grid)`: both pipelines count strictly below this.
    pub ceiling: f64,
    /// `E_min(K) = 3 ε(K/3)`.
    pub e_min: f64,
}

/// `E(K; p_i, p_j)` over all grid pairs, row-major.
fn energy_table(total: &Momentum, grid: &TorusGrid) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut table = Vec::with_capacity(nodes.len() * nodes.len());
    for p in nodes {
        for q in nodes {
            table.push(three_energy(total, p, q));
        }
    }
    table
}

fn grid_threshold(params: &ModelParams, grid: &TorusGrid, table: &[f64]) -> Result<f64> {
    let len = grid.len();
    let w = grid.weight();
    let mut tau = f64::INFINITY;
    for row in table.chunks(len) {
        let floor = row.iter().copied().fold(f64::INFINITY, f64::min);
        let gap = solve_gap(params.mu(), |g| {
            w * row.iter().map(|e| 1.0 / (e - floor + g)).sum::<f64>()
        })?;
        tau = tau.min(floor - gap);
    }
    Ok(tau)
}

/// Everything needed to count and locate bound states at one total momentum.
#[derive(Debug, Clone)]
pub struct BsProblem {
    total: Momentum,
    params: ModelParams,
    grid: TorusGrid,
    table: Vec<f64>,
    spectrum: EssentialSpectrum,
    thresholds: Thresholds,
    prefactor_sign: f64,
}

impl BsProblem {
    pub fn new(total: &Momentum, params: &ModelParams, grid: &TorusGrid) -> Result<Self> {
        if total.dim() != params.dim() || grid.dim() != params.dim() {
            return Err(Error::InvalidInput(
                "dimension mismatch between K, grid and model".into(),
            ));
        }
        let spectrum = essential_spectrum(total, params, grid)?;
        let table = energy_table(total, grid);
        let tau_grid = grid_threshold(params, grid, &table)?;
        let thresholds = Thresholds {
            tau_ess: spectrum.tau_ess,
            tau_grid,
            ceiling: spectrum.tau_ess.min(tau_grid),
            e_min: three_band_bottom(total),
        };
        Ok(Self {
            total: *total,
            params: *params,
            grid: grid.clone(),
            table,
            spectrum,
            thresholds,
            prefactor_sign: 1.0,
        })
    }

    /// Flips the sign of the `-2μ` prefactor. Only useful to check that the
    /// validation suite notices a broken operator.
    #[doc(hidden)]
    pub fn with_flipped_prefactor(mut self) -> Self {
        self.prefactor_sign = -self.prefactor_sign;
        self
    }

    pub fn total(&self) -> &Momentum {
        &self.total
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn spectrum(&self) -> &EssentialSpectrum {
        &self.spectrum
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    /// `E(K; p_i, p_j)`.
    pub fn energy(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.grid.len() + j]
    }

    /// Grid channel determinants `Δ_i(z)`; errors at the first non-positive one.
    pub fn determinants(&self, z: f64) -> Result<Vec<f64>> {
        self.check_z(z)?;
        let len = self.grid.len();
        let w = self.grid.weight();
        let mu = self.params.mu();
        self.table
            .chunks(len)
            .enumerate()
            .map(|(node, row)| {
                let value = 1.0 + mu * w * row.iter().map(|e| 1.0 / (e - z)).sum::<f64>();
                if value > 0.0 {
                    Ok(value)
                } else {
                    Err(Error::NonPositiveDeterminant { node, z, value })
                }
            })
            .collect()
    }

    fn check_z(&self, z: f64) -> Result<()> {
        let limit = self.thresholds.tau_ess - 1e-12;
        if !(z < limit) {
            return Err(Error::Domain {
                context: "Birman-Schwinger operator",
                z,
                limit,
            });
        }
        Ok(())
    }

    pub fn assemble(&self, z: f64) -> Result<BsMatrix> {
        let determinants = self.determinants(z)?;
        let scale: Vec<f64> = determinants.iter().map(|d| d.sqrt().recip()).collect();
        let c = self.prefactor_sign * -2.0 * self.params.mu() * self.grid.weight();
        let matrix = SymmetricMatrix::from_upper(self.grid.len(), |i, j| {
            c * scale[i] * scale[j] / (self.energy(i, j) - z)
        });
        Ok(BsMatrix {
            total: self.total,
            z,
            matrix,
            determinants,
        })
    }

    pub fn count_at(&self, z: f64) -> Result<CountSample> {
        let values = sym_eigenvalues(&self.assemble(z)?.matrix)?;
        Ok(CountSample {
            z,
            count: values.iter().filter(|&&l| l > 1.0).count(),
            tie: values.iter().any(|l| (l - 1.0).abs() < TIE_TOL),
        })
    }

    /// `Π_j (1 - λ_j)` over the spectrum of `L(z)`.
    pub fn fredholm_det(&self, z: f64) -> Result<f64> {
        let values = sym_eigenvalues(&self.assemble(z)?.matrix)?;
        Ok(values.iter().map(|l| 1.0 - l).product())
    }

    /// Ladder points `ceiling - Δ₀ 2^{-j}`, `j = 0..=LADDER_STEPS`.
    pub fn ladder(&self) -> Vec<f64> {
        let t = &self.thresholds;
        let delta0 = 0.1 * (t.e_min - t.ceiling);
        (0..=LADDER_STEPS)
            .map(|j| t.ceiling - delta0 * 0.5f64.powi(j as i32))
            .collect()
    }

    /// Counts along the whole ladder; the count is the value at the top,
    /// trusted once the last three rungs agree.
    pub fn count_total(&self) -> Result<CountProtocol> {
        let ladder = self
            .ladder()
            .into_iter()
            .map(|z| self.count_at(z))
            .collect::<Result<Vec<_>>>()?;
        let tail = &ladder[ladder.len() - 3..];
        let count = tail[2].count;
        let t = &self.thresholds;
        Ok(CountProtocol {
            count,
            converged: tail.iter().all(|s| s.count == count),
            resolution_floor: t.ceiling - ladder[ladder.len() - 1].z,
            ladder,
            tau_ess: t.tau_ess,
            tau_grid: t.tau_grid,
            ceiling: t.ceiling,
        })
    }

    /// Energies below the top ladder rung by integer bisection on `count_at`,
    /// each located to an interval of width `tol`.
    pub fn bound_state_energies(&self, tol: f64) -> Result<BoundStateSet> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let top = *self.ladder().last().expect("non-empty ladder");
        let lo = self.thresholds.e_min - 3.0 * self.params.mu().abs();
        let c_lo = self.count_at(lo)?.count;
        if c_lo != 0 {
            return Err(Error::Internal(format!(
                "{c_lo} states below the spectral lower bound {lo}"
            )));
        }
        let c_hi = self.count_at(top)?.count;
        let mut energies = Vec::with_capacity(c_hi);
        let mut degenerate = false;
        let mut stack = vec![(lo, c_lo, top, c_hi)];
        while let Some((a, ca, b, cb)) = stack.pop() {
            if ca == cb {
                continue;
            }
            if b - a <= tol {
                degenerate |= cb - ca > 1;
                energies.extend(std::iter::repeat_n(0.5 * (a + b), cb - ca));
                continue;
            }
            let mid = 0.5 * (a + b);
            let cm = self.count_at(mid)?.count;
            stack.push((mid, cm, b, cb));
            stack.push((a, ca, mid, cm));
        }
        energies.sort_by(f64::total_cmp);
        let residuals = energies
            .iter()
            .map(|&e| self.nearest_unit_eigen(e).map(|(l, _)| (1.0 - l).abs()))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundStateSet {
            total: self.total,
            count: energies.len(),
            energies,
            residuals,
            degenerate,
            wavefunctions: None,
        })
    }

    /// Eigenpair of `L(z)` whose eigenvalue is closest to one.
    fn nearest_unit_eigen(&self, z: f64) -> Result<(f64, Vec<f64>)> {
        let eig = sym_eigen(&self.assemble(z)?.matrix)?;
        let j = (0..eig.len())
            .min_by(|&a, &b| {
                (eig.eigenvalues[a] - 1.0)
                    .abs()
                    .total_cmp(&(eig.eigenvalues[b] - 1.0).abs())
            })
            .ok_or_else(|| Error::Internal("empty Birman-Schwinger spectrum".into()))?;
        Ok((eig.eigenvalues[j], eig.vector(j).to_vec()))
    }

    /// Three-body wavefunction `f(p_i, q_j)` at a bound-state energy, stored
    /// row-major over grid², unit discrete norm `Σ w² f² = 1`, positive sum.
    pub fn reconstruct_eigenfunction(&self, energy: f64) -> Result<Vec<f64>> {
        let (lambda, psi) = self.nearest_unit_eigen(energy)?;
        if (lambda - 1.0).abs() > STALE_TOL {
            return Err(Error::StaleEnergy { energy, lambda });
        }
        let determinants = self.determinants(energy)?;
        let phi: Vec<f64> = psi
            .iter()
            .zip(&determinants)
            .map(|(v, d)| v / d.sqrt())
            .collect();
        let len = self.grid.len();
        let third: Vec<f64> = match self.grid.index_of(&self.total) {
            Some(ki) => (0..len * len)
                .map(|ij| {
                    let (i, j) = (ij / len, ij % len);
                    phi[self.grid.sub_index(self.grid.sub_index(ki, i), j)]
                })
                .collect(),
            None => {
                let interp = TrigInterpolant::new(&self.grid, &phi);
                let nodes = self.grid.nodes();
                (0..len * len)
                    .map(|ij| interp.eval(&(self.total - nodes[ij / len] - nodes[ij % len])))
                    .collect()
            }
        };
        let mu = self.params.mu();
        let mut f: Vec<f64> = (0..len * len)
            .map(|ij| {
                let (i, j) = (ij / len, ij % len);
                -mu * (phi[i] + phi[j] + third[ij]) / (self.energy(i, j) - energy)
            })
            .collect();
        let w = self.grid.weight();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt() * w;
        let sign = if f.iter().sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        for v in &mut f {
            *v *= sign / norm;
        }
        Ok(f)
    }
}

/// Trigonometric interpolant through values on a grid: modes `-n/2 < m < n/2`
/// as exponentials and the Nyquist mode as a cosine, per axis.
struct TrigInterpolant {
    dim: usize,
    modes: Vec<i64>,
    coefficients: Vec<Complex64>,
}

impl TrigInterpolant {
    fn new(grid: &TorusGrid, values: &[f64]) -> Self {
        let n = grid.n() as i64;
        let modes: Vec<i64> = (-n / 2 + 1..=n / 2).collect();
        let dim = grid.dim();
        let count = modes.len().pow(dim as u32);
        let w = grid.weight();
        let coefficients = (0..count)
            .map(|c| {
                let m = Self::mode(&modes, dim, c);
                grid.nodes()
                    .iter()
                    .zip(values)
                    .map(|(x, v)| {
                        let phase: f64 = x
                            .components()
                            .iter()
                            .zip(m)
                            .map(|(xa, ma)| xa * ma as f64)
                            .sum();
                        Complex64::from_polar(*v, -phase)
                    })
                    .sum::<Complex64>()
                    * w
            })
            .collect();
        Self {
            dim,
            modes,
            coefficients,
        }
    }

    fn mode(modes: &[i64], dim: usize, flat: usize) -> [i64; 2] {
        let len = modes.len();
        match dim {
            1 => [modes[flat], 0],
            _ => [modes[flat / len], modes[flat % len]],
        }
    }

    fn eval(&self, x: &Momentum) -> f64 {
        let nyquist = *self.modes.last().expect("non-empty");
        let axis_basis = |m: i64, xa: f64| {
            if m == nyquist {
                Complex64::new((m as f64 * xa).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, m as f64 * xa)
            }
        };
        let xs = x.components();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(c, coef)| {
                let m = Self::mode(&self.modes, self.dim, c);
                (0..self.dim).fold(*coef, |acc, a| acc * axis_basis(m[a], xs[a]))
            })
            .sum::<Complex64>()
            .re
    }
}

/// Thresholds of [`BsProblem`] without building the rest of it.
pub fn thresholds(total: &Momentum, params: &ModelParams, grid: &TorusGrid) -> Result<Thresholds> {
    Ok(BsProblem::new(total, params, grid)?.thresholds)
}

pub fn assemble(
    total: &Momentum,
    z: f64,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<BsMatrix> {
    BsProblem::new(total, params, grid)?.assemble(z)
}

pub fn count_at(
    total: &Momentum,
    z: f64,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<CountSample> {
    BsProblem::new(total, params, grid)?.count_at(z)
}

pub fn count_total(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<CountProtocol> {
    BsProblem::new(total, params, grid)?.count_total()
}

pub fn bound_state_energies(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
    tol: f64,
) -> Result<BoundStateSet> {
    BsProblem::new(total, params, grid)?.bound_state_energies(tol)
}

pub fn fredholm_det(
    total: &Momentum,
    z: f64,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<f64> {
    BsProblem::new(total, params, grid)?.fredholm_det(z)
}

pub fn reconstruct_eigenfunction(
    total: &Momentum,
    energy: f64,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<Vec<f64>> {
    BsProblem::new(total, params, grid)?.reconstruct_eigenfunction(energy)
}
