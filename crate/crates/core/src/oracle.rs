//! Brute-force reference: dense diagonalization of the grid-discretized
//! three-boson fiber Hamiltonian
//!
//! ```text
//! (H f)(p, q) = E(K; p, q) f(p, q)
//!             + μ w [Σ_t f(p, t) + Σ_t f(t, q) + Σ_t f(t, p + q - t)]
//! ```
//!
//! on grid², restricted to functions invariant under permutations of the
//! momentum triple `(p, q, K - p - q)`. On that sector the last sum equals
//! `Σ_t f(t, K - p - q)`; written as above the full matrix is symmetric too.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bsolver::{BoundStateSet, BsProblem};
use crate::energy::{three_energy, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{Momentum, TorusGrid};
use crate::numerics::{sym_eigen, SymmetricMatrix};

/// Largest number of grid² points the oracle will discretize.
pub const MAX_ORDER: usize = 8192;

/// Energy width used for the Birman–Schwinger side of a cross-check.
pub const CROSSCHECK_ENERGY_TOL: f64 = 1e-11;

/// Samples closer than this to an oracle eigenvalue are moved away.
pub const SAMPLE_CLEARANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Sector {
    Full,
    Symmetric,
}

#[derive(Debug, Clone)]
pub struct DiscretizedHamiltonian {
    pub total: Momentum,
    pub grid: TorusGrid,
    pub matrix: SymmetricMatrix,
    pub sector: Sector,
    /// For the symmetric sector: grid² flat indices `i·N + j` of each orbit,
    /// one basis vector `|O|^{-1/2} Σ_{x∈O} e_x` per orbit.
    pub orbits: Vec<Vec<usize>>,
}

/// Index tables for grid² with total momentum `K` on the grid.
struct PairIndex {
    len: usize,
    /// `sub[a * len + b]` is the index of `p_a - p_b`.
    sub: Vec<usize>,
    add: Vec<usize>,
    total: usize,
}

impl PairIndex {
    fn new(total: &Momentum, grid: &TorusGrid) -> Result<Self> {
        let ki = grid.index_of(total).ok_or_else(|| {
            Error::InvalidInput(format!(
                "total momentum {:?} is not on the {}-point grid",
                total.components(),
                grid.n()
            ))
        })?;
        let len = grid.len();
        let mut sub = Vec::with_capacity(len * len);
        let mut add = Vec::with_capacity(len * len);
        for a in 0..len {
            for b in 0..len {
                sub.push(grid.sub_index(a, b));
                add.push(grid.add_index(a, b));
            }
        }
        Ok(Self {
            len,
            sub,
            add,
            total: ki,
        })
    }

    /// Index of `K - p_i - p_j`.
    fn third(&self, i: usize, j: usize) -> usize {
        self.sub[self.sub[self.total * self.len + i] * self.len + j]
    }

    /// Grid² images of `(i, j)` under the six permutations of the triple.
    fn images(&self, i: usize, j: usize) -> [usize; 6] {
        let r = self.third(i, j);
        let l = self.len;
        [
            i * l + j,
            j * l + i,
            i * l + r,
            r * l + i,
            j * l + r,
            r * l + j,
        ]
    }

    /// Non-zero entries of column `(a, b)` of the full matrix.
    fn column(
        &self,
        a: usize,
        b: usize,
        diagonal: f64,
        coupling: f64,
        out: &mut BTreeMap<usize, f64>,
    ) {
        let l = self.len;
        out.clear();
        *out.entry(a * l + b).or_default() += diagonal;
        let s = self.add[a * l + b];
        for t in 0..l {
            *out.entry(a * l + t).or_default() += coupling;
            *out.entry(t * l + b).or_default() += coupling;
            *out.entry(t * l + self.sub[s * l + t]).or_default() += coupling;
        }
    }
}

fn check_size(grid: &TorusGrid) -> Result<()> {
    let order = grid.len() * grid.len();
    if order > MAX_ORDER {
        return Err(Error::Resource(format!(
            "grid² has {order} points, the oracle is capped at {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Full grid² matrix. `K` must be a grid node.
pub fn discretize_h(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<DiscretizedHamiltonian> {
    check_size(grid)?;
    let index = PairIndex::new(total, grid)?;
    let len = grid.len();
    let order = len * len;
    let coupling = params.mu() * grid.weight();
    let nodes = grid.nodes();
    let mut rows = vec![0.0; order * order];
    let mut column = BTreeMap::new();
    for y in 0..order {
        let (a, b) = (y / len, y % len);
        index.column(
            a,
            b,
            three_energy(total, &nodes[a], &nodes[b]),
            coupling,
            &mut column,
        );
        for (&x, &v) in &column {
            rows[x * order + y] = v;
        }
    }
    Ok(DiscretizedHamiltonian {
        total: *total,
        grid: grid.clone(),
        matrix: SymmetricMatrix::symmetrized(order, &rows)?,
        sector: Sector::Full,
        orbits: Vec::new(),
    })
}

fn orbits(index: &PairIndex) -> (Vec<Vec<usize>>, Vec<usize>) {
    let l = index.len;
    let mut owner = vec![usize::MAX; l * l];
    let mut list: Vec<Vec<usize>> = Vec::new();
    for x in 0..l * l {
        if owner[x] != usize::MAX {
            continue;
        }
        let mut orbit: Vec<usize> = index.images(x / l, x % l).to_vec();
        orbit.sort_unstable();
        orbit.dedup();
        for &y in &orbit {
            owner[y] = list.len();
        }
        list.push(orbit);
    }
    (list, owner)
}

/// Orthonormal basis of the permutation-symmetric functions, as orbits.
fn symmetric_basis(
    total: &Momentum,
    grid: &TorusGrid,
) -> Result<(PairIndex, Vec<Vec<usize>>, Vec<usize>)> {
    let index = PairIndex::new(total, grid)?;
    let (list, owner) = orbits(&index);
    Ok((index, list, owner))
}

/// Restriction of a full discretization to the symmetric sector.
pub fn symmetric_sector(h: &DiscretizedHamiltonian) -> Result<DiscretizedHamiltonian> {
    if h.sector == Sector::Symmetric {
        return Ok(h.clone());
    }
    let (_, list, _) = symmetric_basis(&h.total, &h.grid)?;
    let dim = list.len();
    let order = h.matrix.order();
    let mut rows = vec![0.0; dim * dim];
    for (b, ob) in list.iter().enumerate() {
        let nb = (ob.len() as f64).sqrt().recip();
        let mut column = vec![0.0; order];
        for &y in ob {
            for (x, c) in column.iter_mut().enumerate() {
                *c += nb * h.matrix.get(x, y);
            }
        }
        for (a, oa) in list.iter().enumerate() {
            let na = (oa.len() as f64).sqrt().recip();
            rows[a * dim + b] = na * oa.iter().map(|&x| column[x]).sum::<f64>();
        }
    }
    Ok(DiscretizedHamiltonian {
        total: h.total,
        grid: h.grid.clone(),
        matrix: SymmetricMatrix::symmetrized(dim, &rows)?,
        sector: Sector::Symmetric,
        orbits: list,
    })
}

/// Symmetric-sector matrix assembled orbit by orbit without the full matrix.
pub fn discretize_symmetric(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<DiscretizedHamiltonian> {
    check_size(grid)?;
    let (index, list, owner) = symmetric_basis(total, grid)?;
    let len = grid.len();
    let dim = list.len();
    let coupling = params.mu() * grid.weight();
    let nodes = grid.nodes();
    let norms: Vec<f64> = list
        .iter()
        .map(|o| (o.len() as f64).sqrt().recip())
        .collect();
    let mut rows = vec![0.0; dim * dim];
    let mut column = BTreeMap::new();
    for (b, ob) in list.iter().enumerate() {
        for &y in ob {
            let (pa, pb) = (y / len, y % len);
            index.column(
                pa,
                pb,
                three_energy(total, &nodes[pa], &nodes[pb]),
                coupling,
                &mut column,
            );
            for (&x, &v) in &column {
                let a = owner[x];
                rows[a * dim + b] += norms[a] * norms[b] * v;
            }
        }
    }
    Ok(DiscretizedHamiltonian {
        total: *total,
        grid: grid.clone(),
        matrix: SymmetricMatrix::symmetrized(dim, &rows)?,
        sector: Sector::Symmetric,
        orbits: list,
    })
}

/// Expands a sector vector into a grid² table with `Σ w² f² = 1`.
fn expand(orbits: &[Vec<usize>], coefficients: &[f64], grid: &TorusGrid) -> Vec<f64> {
    let len = grid.len();
    let mut f = vec![0.0; len * len];
    for (orbit, c) in orbits.iter().zip(coefficients) {
        let v = c / (orbit.len() as f64).sqrt();
        for &x in orbit {
            f[x] = v;
        }
    }
    let w = grid.weight();
    let sign = if f.iter().sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    for v in &mut f {
        *v *= sign / w;
    }
    f
}

/// `H f` for a grid² table, with the third interaction written as
/// `Σ_t f(t, K - p - q)`. Agrees with the stored matrices on symmetric `f`.
pub fn apply_hamiltonian(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
    f: &[f64],
) -> Result<Vec<f64>> {
    let index = PairIndex::new(total, grid)?;
    let len = grid.len();
    if f.len() != len * len {
        return Err(Error::InvalidInput(format!(
            "expected {} grid² values, got {}",
            len * len,
            f.len()
        )));
    }
    let coupling = params.mu() * grid.weight();
    let row_sums: Vec<f64> = f.chunks(len).map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..len)
        .map(|j| (0..len).map(|i| f[i * len + j]).sum())
        .collect();
    let nodes = grid.nodes();
    Ok((0..len * len)
        .map(|x| {
            let (i, j) = (x / len, x % len);
            let r = index.third(i, j);
            three_energy(total, &nodes[i], &nodes[j]) * f[x]
                + coupling * (row_sums[i] + col_sums[j] + col_sums[r])
        })
        .collect())
}

/// Symmetric-sector eigenvalues strictly below the counting ceiling, with
/// their grid² eigenfunctions.
pub fn oracle_bound_states(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<BoundStateSet> {
    let ceiling = BsProblem::new(total, params, grid)?.thresholds().ceiling;
    oracle_below(total, params, grid, ceiling)
}

fn oracle_below(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
    ceiling: f64,
) -> Result<BoundStateSet> {
    let h = discretize_symmetric(total, params, grid)?;
    let eig = sym_eigen(&h.matrix)?;
    let scale = h.matrix.max_abs().max(1.0);
    let mut energies = Vec::new();
    let mut residuals = Vec::new();
    let mut wavefunctions = Vec::new();
    for (j, &e) in eig.eigenvalues.iter().enumerate() {
        if e >= ceiling {
            break;
        }
        let v = eig.vector(j);
        let hv = h.matrix.matvec(v);
        let res = hv
            .iter()
            .zip(v)
            .map(|(a, b)| (a - e * b).powi(2))
            .sum::<f64>()
            .sqrt()
            / scale;
        energies.push(e);
        residuals.push(res);
        wavefunctions.push(expand(&h.orbits, v, grid));
    }
    Ok(BoundStateSet {
        total: *total,
        count: energies.len(),
        degenerate: energies.windows(2).any(|w| w[1] - w[0] < 1e-10),
        energies,
        residuals,
        wavefunctions: Some(wavefunctions),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckSample {
    pub z: f64,
    pub oracle: usize,
    pub birman_schwinger: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    #[serde(rename = "K")]
    pub total: Momentum,
    pub n: usize,
    pub samples: Vec<CrosscheckSample>,
    pub oracle_energies: Vec<f64>,
    pub bs_energies: Vec<f64>,
    /// `|E_bs - E_oracle|` state by state; empty if the counts differ.
    pub energy_deltas: Vec<f64>,
    pub max_oracle_residual: f64,
    pub max_bs_residual: f64,
    pub counts_equal: bool,
    pub energies_match: bool,
}

impl CrosscheckReport {
    pub fn passed(&self) -> bool {
        self.counts_equal && self.energies_match
    }
}

/// Eight spectral parameters spread from below the lowest state up to `top`,
/// each at least `SAMPLE_CLEARANCE` from every eigenvalue.
fn sample_points(eigenvalues: &[f64], floor: f64, top: f64) -> Vec<f64> {
    let lo = eigenvalues.first().map_or(floor, |e| (e - 0.5).max(floor));
    (0..8)
        .map(|s| {
            let mut z = lo + (top - lo) * s as f64 / 7.0;
            while eigenvalues.iter().any(|e| (e - z).abs() < SAMPLE_CLEARANCE) {
                z -= SAMPLE_CLEARANCE;
            }
            z
        })
        .collect()
}

/// Oracle against Birman–Schwinger: counts at eight spectral parameters and
/// state-by-state energies, compared at `energy_tol`.
pub fn crosscheck_with(problem: &BsProblem, energy_tol: f64) -> Result<CrosscheckReport> {
    let (total, params, grid) = (problem.total(), problem.params(), problem.grid());
    let top = *problem.ladder().last().expect("non-empty ladder");
    let oracle = oracle_below(total, params, grid, top)?;
    let sector = discretize_symmetric(total, params, grid)?;
    let all = crate::numerics::sym_eigenvalues(&sector.matrix)?;
    let floor = problem.thresholds().e_min - 3.0 * params.mu().abs();
    let samples = sample_points(&oracle.energies, floor, top)
        .into_iter()
        .map(|z| {
            Ok(CrosscheckSample {
                z,
                oracle: all.iter().filter(|&&e| e < z).count(),
                birman_schwinger: problem.count_at(z)?.count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bs = problem.bound_state_energies(CROSSCHECK_ENERGY_TOL)?;
    let counts_equal =
        samples.iter().all(|s| s.oracle == s.birman_schwinger) && bs.count == oracle.count;
    let energy_deltas: Vec<f64> = if bs.count == oracle.count {
        bs.energies
            .iter()
            .zip(&oracle.energies)
            .map(|(a, b)| (a - b).abs())
            .collect()
    } else {
        Vec::new()
    };
    let energies_match = bs.count == oracle.count && energy_deltas.iter().all(|d| *d <= energy_tol);
    let max = |v: &[f64]| v.iter().copied().fold(0.0_f64, f64::max);
    Ok(CrosscheckReport {
        total: *total,
        n: grid.n(),
        samples,
        max_oracle_residual: max(&oracle.residuals),
        max_bs_residual: max(&bs.residuals),
        oracle_energies: oracle.energies,
        bs_energies: bs.energies,
        energy_deltas,
        counts_equal,
        energies_match,
    })
}

/// [`crosscheck_with`] at energy tolerance `1e-7`.
pub fn crosscheck(
    total: &Momentum,
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<CrosscheckReport> {
    crosscheck_with(&BsProblem::new(total, params, grid)?, 1e-7)
}
