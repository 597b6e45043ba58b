//! The acceptance checks, one per criterion, shared by the `validate`
//! command and the acceptance test target.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bsolver::BsProblem;
use crate::energy::{three_band_bottom, ModelParams};
use crate::error::Result;
use crate::esspec::{essential_spectrum, quadratic_vanishing_check};
use crate::grid::{make_grid, Momentum, TorusGrid};
use crate::oracle::{apply_hamiltonian, crosscheck_with, CrosscheckReport};
use crate::realspace::{decay_fit, lattice_coefficients, two_body_decay_rate_1d};
use crate::twobody::{closed_form_1d, eigenfunction, eigenvalue};

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidationOptions {
    /// Reduced case lists that finish well within two minutes.
    pub quick: bool,
    /// Runs the Birman–Schwinger side with the prefactor sign flipped.
    pub flip_prefactor: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: {} ({:.2} s of {:.0} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

fn outcome(
    id: u8,
    name: &'static str,
    budget: f64,
    started: Instant,
    result: Result<(bool, String)>,
) -> CheckOutcome {
    let seconds = started.elapsed().as_secs_f64();
    let (ok, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    let mut detail = detail;
    if seconds > budget {
        detail.push_str("; over the time budget");
    }
    CheckOutcome {
        id,
        name,
        passed: ok && seconds <= budget,
        detail,
        seconds,
        budget_seconds: budget,
    }
}

fn p(dim: usize, mu: f64) -> ModelParams {
    ModelParams::new(dim, mu).expect("valid model")
}

fn momentum(c: &[f64]) -> Momentum {
    Momentum::new(c).expect("finite momentum")
}

/// Closed-form two-body agreement in one dimension.
pub fn check_closed_form() -> CheckOutcome {
    let started = Instant::now();
    let result = (|| {
        let grid = make_grid(1, 32)?;
        let mut worst = 0.0_f64;
        for mu in [-0.5, -1.0, -2.0, -5.0] {
            let params = p(1, mu);
            for j in 0..33 {
                let k = momentum(&[-PI + 2.0 * PI * j as f64 / 32.0]);
                let e = eigenvalue(&k, &params, &grid, 1e-12)?;
                worst = worst.max((e - closed_form_1d(&k, &params)?).abs());
            }
        }
        Ok((
            worst <= 1e-9,
            format!("max |e - closed form| = {worst:.3e} over 4 couplings x 33 k"),
        ))
    })();
    outcome(1, "closed-form two-body agreement", 10.0, started, result)
}

/// Evenness and the strict minimum at `k = 0`.
pub fn check_pair_dispersion() -> CheckOutcome {
    let started = Instant::now();
    let result = (|| {
        let mut worst_parity = 0.0_f64;
        let mut min_gap = f64::INFINITY;
        for (dim, n) in [(1, 64), (2, 32)] {
            let params = p(dim, -1.0);
            let grid = make_grid(dim, n)?;
            let values = grid
                .nodes()
                .par_iter()
                .map(|k| eigenvalue(k, &params, &grid, 1e-12))
                .collect::<Result<Vec<f64>>>()?;
            let e0 = values[0];
            for (i, e) in values.iter().enumerate() {
                worst_parity = worst_parity.max((e - values[grid.neg_index(i)]).abs());
                if i != 0 {
                    min_gap = min_gap.min(e - e0);
                }
            }
        }
        Ok((
            worst_parity <= 1e-12 && min_gap > 0.0,
            format!("max |e(k) - e(-k)| = {worst_parity:.3e}, min e(k) - e(0) = {min_gap:.3e}"),
        ))
    })();
    outcome(
        2,
        "pair dispersion symmetry and minimum",
        60.0,
        started,
        result,
    )
}

/// `tau_ess(K) < 3 ε(K/3)` with margin above `1e-8` on 16-point K-grids.
pub fn check_threshold_margin(options: &ValidationOptions) -> CheckOutcome {
    let started = Instant::now();
    let dims: &[usize] = if options.quick { &[1] } else { &[1, 2] };
    let result = (|| {
        let mut cases = Vec::new();
        for &dim in dims {
            let k_grid = make_grid(dim, 16)?;
            let scan = make_grid(dim, if dim == 1 { 32 } else { 16 })?;
            for mu in [-0.5, -1.0, -2.0] {
                for total in k_grid.nodes() {
                    cases.push((dim, mu, *total, scan.clone()));
                }
            }
        }
        let margins = cases
            .par_iter()
            .map(|(dim, mu, total, scan)| {
                let es = essential_spectrum(total, &p(*dim, *mu), scan)?;
                Ok(three_band_bottom(total) - es.tau_ess)
            })
            .collect::<Result<Vec<f64>>>()?;
        let failing: Vec<usize> = (0..cases.len()).filter(|&i| !(margins[i] > 1e-8)).collect();
        let (wi, worst) = margins
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i, *v))
            .expect("non-empty sweep");
        let (dim, mu, total, _) = &cases[wi];
        let mut groups: Vec<(usize, f64, usize)> = Vec::new();
        for &i in &failing {
            let (d, m, _, _) = &cases[i];
            match groups.iter_mut().find(|g| g.0 == *d && g.1 == *m) {
                Some(g) => g.2 += 1,
                None => groups.push((*d, *m, 1)),
            }
        }
        let breakdown: Vec<String> = groups
            .iter()
            .map(|(d, m, c)| format!("{c} at d={d} mu={m}"))
            .collect();
        Ok((
            failing.is_empty(),
            format!(
                "{} of {} cases with margin <= 1e-8{}; smallest margin {worst:.3e} at d={dim}, mu={mu}, K={:?}",
                failing.len(),
                cases.len(),
                if breakdown.is_empty() { String::new() } else { format!(" ({})", breakdown.join(", ")) },
                total.components()
            ),
        ))
    })();
    outcome(
        3,
        "continuum threshold below the three-particle band",
        300.0,
        started,
        result,
    )
}

struct OracleCase {
    dim: usize,
    n: usize,
    mu: f64,
    total: Momentum,
}

struct OracleRun {
    report: CrosscheckReport,
    /// `(max relative residual, max symmetry defect)` over reconstructed states.
    reconstruction: Option<(f64, f64)>,
}

fn oracle_cases(quick: bool) -> Vec<OracleCase> {
    let mut cases = Vec::new();
    let sizes: &[usize] = if quick { &[16] } else { &[16, 32] };
    let couplings: &[f64] = if quick {
        &[-1.0, -2.0]
    } else {
        &[-0.5, -1.0, -2.0, -5.0]
    };
    for &n in sizes {
        for k in [0.0, PI / 2.0, PI] {
            for &mu in couplings {
                cases.push(OracleCase {
                    dim: 1,
                    n,
                    mu,
                    total: momentum(&[k]),
                });
            }
        }
    }
    if !quick {
        for mu in [-1.0, -2.0] {
            cases.push(OracleCase {
                dim: 2,
                n: 8,
                mu,
                total: Momentum::zero(2),
            });
        }
    }
    cases
}

/// Largest `|f(x) - f(σx)|` over the permutations of the momentum triple.
fn symmetry_defect(f: &[f64], total: &Momentum, grid: &TorusGrid) -> f64 {
    let len = grid.len();
    let ki = grid.index_of(total).expect("on-grid total momentum");
    let mut worst = 0.0_f64;
    for i in 0..len {
        for j in 0..len {
            let r = grid.sub_index(grid.sub_index(ki, i), j);
            let v = f[i * len + j];
            for x in [
                j * len + i,
                i * len + r,
                r * len + i,
                j * len + r,
                r * len + j,
            ] {
                worst = worst.max((v - f[x]).abs());
            }
        }
    }
    worst
}

fn run_oracle_case(case: &OracleCase, options: &ValidationOptions) -> Result<OracleRun> {
    let params = p(case.dim, case.mu);
    let grid = make_grid(case.dim, case.n)?;
    let mut problem = BsProblem::new(&case.total, &params, &grid)?;
    if options.flip_prefactor {
        problem = problem.with_flipped_prefactor();
    }
    let report = crosscheck_with(&problem, 1e-7)?;
    let reconstruction = if report.counts_equal {
        let mut worst = (0.0_f64, 0.0_f64);
        for &e in &report.bs_energies {
            let f = problem.reconstruct_eigenfunction(e)?;
            let hf = apply_hamiltonian(&case.total, &params, &grid, &f)?;
            let num: f64 = hf.iter().zip(&f).map(|(a, b)| (a - e * b).powi(2)).sum();
            let den: f64 = f.iter().map(|v| v * v).sum();
            worst.0 = worst.0.max((num / den).sqrt());
            worst.1 = worst.1.max(symmetry_defect(&f, &case.total, &grid));
        }
        Some(worst)
    } else {
        None
    };
    Ok(OracleRun {
        report,
        reconstruction,
    })
}

/// Criteria 4, 5 and 8 share one sweep over the oracle cases.
pub fn check_oracle_agreement(options: &ValidationOptions) -> [CheckOutcome; 3] {
    let started = Instant::now();
    let cases = oracle_cases(options.quick);
    let runs: Vec<Result<OracleRun>> = cases
        .par_iter()
        .map(|c| run_oracle_case(c, options))
        .collect();
    let describe = |case: &OracleCase| {
        format!(
            "d={} n={} mu={} K={:?}",
            case.dim,
            case.n,
            case.mu,
            case.total.components()
        )
    };
    let errors: Vec<String> = cases
        .iter()
        .zip(&runs)
        .filter_map(|(c, r)| r.as_ref().err().map(|e| format!("{}: {e}", describe(c))))
        .collect();
    let ok_runs: Vec<(&OracleCase, &OracleRun)> = cases
        .iter()
        .zip(&runs)
        .filter_map(|(c, r)| r.as_ref().ok().map(|r| (c, r)))
        .collect();
    let judge = |id, name, f: &dyn Fn() -> (bool, String)| {
        let result = if errors.is_empty() {
            Ok(f())
        } else {
            Ok((false, format!("errors: {}", errors.join("; "))))
        };
        outcome(id, name, 600.0, started, result)
    };

    let count = judge(4, "Birman-Schwinger count equals oracle count", &|| {
        let bad: Vec<String> = ok_runs
            .iter()
            .filter(|(_, r)| !r.report.counts_equal)
            .map(|(c, _)| describe(c))
            .collect();
        let samples: usize = ok_runs.iter().map(|(_, r)| r.report.samples.len()).sum();
        if bad.is_empty() {
            (
                true,
                format!(
                    "{} cases, {samples} z-samples, all counts equal",
                    ok_runs.len()
                ),
            )
        } else {
            (false, format!("count mismatch in {}", bad.join(", ")))
        }
    });
    let energy = judge(5, "bound-state energies agree with the oracle", &|| {
        let worst = ok_runs
            .iter()
            .flat_map(|(_, r)| r.report.energy_deltas.iter().copied())
            .fold(0.0_f64, f64::max);
        let states: usize = ok_runs
            .iter()
            .map(|(_, r)| r.report.energy_deltas.len())
            .sum();
        let all = ok_runs.iter().all(|(_, r)| r.report.energies_match);
        (
            all,
            format!("{states} states, max |E_bs - E_oracle| = {worst:.3e}"),
        )
    });
    let recon = judge(
        8,
        "reconstructed eigenfunctions solve the grid equation",
        &|| {
            let mut residual = 0.0_f64;
            let mut defect = 0.0_f64;
            let mut missing = 0;
            for (_, r) in &ok_runs {
                match r.reconstruction {
                    Some((a, b)) => {
                        residual = residual.max(a);
                        defect = defect.max(b);
                    }
                    None => missing += 1,
                }
            }
            let mut detail =
                format!("max residual {residual:.3e}, max symmetry defect {defect:.3e}");
            if missing > 0 {
                detail.push_str(&format!(", {missing} cases not reconstructed"));
            }
            (missing == 0 && residual <= 1e-7 && defect <= 1e-12, detail)
        },
    );
    [count, energy, recon]
}

/// Count stability under grid refinement at `K = 0`.
pub fn check_count_stability(options: &ValidationOptions) -> CheckOutcome {
    let started = Instant::now();
    let result = (|| {
        let mut families: Vec<(usize, f64, Vec<usize>)> =
            vec![(1, -1.0, vec![16, 32, 64]), (1, -2.0, vec![16, 32, 64])];
        if !options.quick {
            families.push((2, -2.0, vec![8, 16]));
        }
        let mut ok = true;
        let mut parts = Vec::new();
        for (dim, mu, sizes) in families {
            let reports = sizes
                .par_iter()
                .map(|&n| {
                    let mut problem =
                        BsProblem::new(&Momentum::zero(dim), &p(dim, mu), &make_grid(dim, n)?)?;
                    if options.flip_prefactor {
                        problem = problem.with_flipped_prefactor();
                    }
                    problem.count_total()
                })
                .collect::<Result<Vec<_>>>()?;
            let counts: Vec<usize> = reports.iter().map(|r| r.count).collect();
            let converged = reports.iter().all(|r| r.converged);
            ok &= converged && counts.windows(2).all(|w| w[0] == w[1]) && counts[0] > 0;
            parts.push(format!(
                "d={dim} mu={mu}: counts {counts:?} at n={sizes:?}{}",
                if converged { "" } else { " (not converged)" }
            ));
        }
        Ok((ok, parts.join("; ")))
    })();
    outcome(
        6,
        "bound-state count stable under refinement",
        600.0,
        started,
        result,
    )
}

/// Quadratic vanishing of the channel determinant at the threshold.
pub fn check_quadratic_vanishing() -> CheckOutcome {
    let started = Instant::now();
    let result = (|| {
        let cases = [
            (1, -1.0, vec![0.0]),
            (2, -2.0, vec![0.0, 0.0]),
            (1, -1.0, vec![PI / 4.0]),
            (2, -2.0, vec![PI / 4.0, 0.0]),
        ];
        let fits = cases
            .par_iter()
            .map(|(dim, mu, total)| {
                let grid = make_grid(*dim, if *dim == 1 { 32 } else { 16 })?;
                quadratic_vanishing_check(&momentum(total), &p(*dim, *mu), &grid)
            })
            .collect::<Result<Vec<_>>>()?;
        let ok = fits
            .iter()
            .all(|f| (1.9..=2.1).contains(&f.slope) && f.r2 > 0.999);
        let parts: Vec<String> = cases
            .iter()
            .zip(&fits)
            .map(|((dim, _, total), f)| {
                format!("d={dim} K={total:?}: slope {:.4}, r2 {:.6}", f.slope, f.r2)
            })
            .collect();
        Ok((ok, parts.join("; ")))
    })();
    outcome(
        7,
        "quadratic vanishing at the threshold minimizer",
        120.0,
        started,
        result,
    )
}

/// Exponential decay of two- and three-body bound states.
pub fn check_decay() -> CheckOutcome {
    let started = Instant::now();
    let result = (|| {
        let grid = make_grid(1, 128)?;
        let mut ok = true;
        let mut worst_rel = 0.0_f64;
        let mut worst_r2 = 1.0_f64;
        for k in [0.0, PI / 2.0] {
            for mu in [-1.0, -2.0] {
                let params = p(1, mu);
                let k = momentum(&[k]);
                let level = eigenfunction(&k, &params, &grid)?;
                let fit = decay_fit(
                    &lattice_coefficients(&level.eigenfunction, &grid, 12)?,
                    3,
                    12,
                )?;
                let want = two_body_decay_rate_1d(&k, &params)?;
                let rel = (fit.rate - want).abs() / want;
                worst_rel = worst_rel.max(rel);
                worst_r2 = worst_r2.min(fit.r2);
                ok &= rel <= 0.02 && fit.r2 > 0.999;
            }
        }
        let three = three_body_decay(&p(1, -2.0), &make_grid(1, 64)?)?;
        ok &= three.rate > 0.0 && three.r2 > 0.99;
        Ok((
            ok,
            format!(
                "two-body: max relative rate error {worst_rel:.3e}, min r2 {worst_r2:.6}; three-body: rate {:.4}, r2 {:.5}",
                three.rate, three.r2
            ),
        ))
    })();
    outcome(
        9,
        "exponential decay of bound states",
        120.0,
        started,
        result,
    )
}

/// Decay fit of the one-dimensional three-body ground state at `K = 0`.
pub fn three_body_decay(
    params: &ModelParams,
    grid: &TorusGrid,
) -> Result<crate::realspace::DecayReport> {
    let problem = BsProblem::new(&Momentum::zero(params.dim()), params, grid)?;
    let set = problem.bound_state_energies(1e-11)?;
    let ground = *set
        .energies
        .first()
        .ok_or_else(|| crate::Error::Internal("no three-body bound state to fit".into()))?;
    let f = problem.reconstruct_eigenfunction(ground)?;
    decay_fit(&lattice_coefficients(&f, grid, 12)?, 3, 12)
}

/// Sign changes of the Fredholm determinant against the count.
pub fn check_fredholm(options: &ValidationOptions) -> CheckOutcome {
    let started = Instant::now();
    let result = (|| {
        let mut problem = BsProblem::new(&Momentum::zero(1), &p(1, -1.0), &make_grid(1, 32)?)?;
        if options.flip_prefactor {
            problem = problem.with_flipped_prefactor();
        }
        let count = problem.count_total()?.count;
        let top = *problem.ladder().last().expect("non-empty ladder");
        let lo = problem.thresholds().e_min - 3.0;
        let values = (0..200)
            .into_par_iter()
            .map(|j| problem.fredholm_det(lo + (top - lo) * j as f64 / 199.0))
            .collect::<Result<Vec<f64>>>()?;
        let changes = values
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count();
        Ok((
            changes == count,
            format!("{changes} sign changes on 200 points, count {count}"),
        ))
    })();
    outcome(
        10,
        "Fredholm determinant sign changes match the count",
        60.0,
        started,
        result,
    )
}

/// All criteria in order.
pub fn run_all(options: &ValidationOptions) -> Vec<CheckOutcome> {
    let mut out = vec![
        check_closed_form(),
        check_pair_dispersion(),
        check_threshold_margin(options),
    ];
    let [c4, c5, c8] = check_oracle_agreement(options);
    out.push(c4);
    out.push(c5);
    out.push(check_count_stability(options));
    out.push(check_quadratic_vanishing());
    out.push(c8);
    out.push(check_decay());
    out.push(check_fredholm(options));
    out
}
