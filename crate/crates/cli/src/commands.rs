//! One function per subcommand.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use triboson::bsolver::{BsProblem, CountProtocol, Thresholds};
use triboson::energy::{pair_band, ModelParams};
use triboson::esspec::{channel_value, essential_spectrum};
use triboson::grid::{make_grid, Momentum, TorusGrid};
use triboson::oracle::{crosscheck_with, CrosscheckReport};
use triboson::twobody::eigenvalue_report;
use triboson::validation::{run_all, ValidationOptions};

use crate::config::{Format, RunConfig};
use crate::output::{emit, fmt_float, to_csv, to_json};
use crate::CliError;

/// Energy tolerance of the oracle cross-check.
pub const CROSSCHECK_TOL: f64 = 1e-7;
/// A second difference counts as a jump above this multiple of the median.
pub const JUMP_FACTOR: f64 = 10.0;

/// Results at `|K|_inf` above this are flagged as exploratory.
pub const EXPLORATORY_RADIUS: f64 = std::f64::consts::FRAC_PI_2;

const DEFAULT_TWOBODY_POINTS: usize = 33;
const DEFAULT_BAND_POINTS: usize = 17;

fn setup(c: &RunConfig) -> Result<(ModelParams, TorusGrid), CliError> {
    Ok((ModelParams::new(c.dim, c.mu)?, make_grid(c.dim, c.grid_n)?))
}

/// `points` equally spaced values on `[-π, π]`, both ends included.
fn sweep_axis(points: usize) -> Vec<f64> {
    (0..points)
        .map(|j| -PI + 2.0 * PI * j as f64 / (points - 1) as f64)
        .collect()
}

/// Sweep nodes in row-major order (first component slowest).
fn sweep(dim: usize, points: usize) -> Vec<Vec<f64>> {
    let axis = sweep_axis(points);
    match dim {
        1 => axis.iter().map(|&a| vec![a]).collect(),
        _ => axis
            .iter()
            .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
            .collect(),
    }
}

fn axis_names(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("{prefix}{i}")).collect()
}

fn cells(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_float(v)).collect()
}

fn json_only(c: &RunConfig, command: &str) -> Result<(), CliError> {
    match c.format {
        Some(Format::Csv) => Err(CliError::Usage(format!("{command} writes JSON only"))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoBodyRow {
    pub k: Vec<f64>,
    pub e_mu: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub gap: f64,
}

#[derive(Serialize)]
struct TwoBodyDoc<'a> {
    dim: usize,
    mu: f64,
    rows: &'a [TwoBodyRow],
}

pub fn twobody_rows(c: &RunConfig) -> Result<Vec<TwoBodyRow>, CliError> {
    let (params, grid) = setup(c)?;
    let nodes = sweep(c.dim, c.k_points.unwrap_or(DEFAULT_TWOBODY_POINTS));
    nodes
        .par_iter()
        .map(|raw| {
            let k = Momentum::new(raw)?;
            let report = eigenvalue_report(&k, &params, &grid, c.tol)?;
            if !report.converged {
                return Err(CliError::NonConvergence(format!(
                    "two-body eigenvalue at k = {raw:?} reached only {:e}",
                    report.achieved_tol
                )));
            }
            let band = pair_band(&k);
            let gap = band.lo - report.energy;
            if !(gap > 0.0) {
                return Err(CliError::Validation(format!(
                    "two-body level {} at k = {raw:?} is not below the band",
                    report.energy
                )));
            }
            Ok(TwoBodyRow {
                k: raw.clone(),
                e_mu: report.energy,
                band_lo: band.lo,
                band_hi: band.hi,
                gap,
            })
        })
        .collect()
}

pub fn twobody_band(c: &RunConfig) -> Result<(), CliError> {
    let rows = twobody_rows(c)?;
    let text = match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut header = axis_names("k", c.dim);
            header.extend(["e_mu", "band_lo", "band_hi", "gap"].map(String::from));
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut row = cells(&r.k);
                    row.extend(cells(&[r.e_mu, r.band_lo, r.band_hi, r.gap]));
                    row
                })
                .collect();
            to_csv(&header, &body)
        }
        Format::Json => to_json(&TwoBodyDoc {
            dim: c.dim,
            mu: c.mu,
            rows: &rows,
        })?,
    };
    emit(c.out.as_deref(), &text)
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub p: Momentum,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EssRecord {
    pub dim: usize,
    pub mu: f64,
    pub grid_n: usize,
    #[serde(rename = "K")]
    pub total: Vec<f64>,
    pub branch: [f64; 2],
    pub band: [f64; 2],
    pub union: Vec<[f64; 2]>,
    pub tau_ess: f64,
    pub p_min: Momentum,
    pub degenerate_minimizers: Vec<Momentum>,
    pub witness: Witness,
}

pub fn ess_record(c: &RunConfig) -> Result<EssRecord, CliError> {
    let (params, grid) = setup(c)?;
    let total = Momentum::new(&c.total)?;
    let es = essential_spectrum(&total, &params, &grid)?;
    let p = total.scale(2.0 / 3.0);
    let witness = Witness {
        p,
        value: channel_value(&total, &p, &params, &grid)?,
    };
    if !(es.tau_ess < es.band.lo) || !(es.tau_ess <= witness.value + 1e-12) {
        return Err(CliError::Validation(format!(
            "threshold {} is not below the band bottom {} and the witness {}",
            es.tau_ess, es.band.lo, witness.value
        )));
    }
    Ok(EssRecord {
        dim: c.dim,
        mu: c.mu,
        grid_n: c.grid_n,
        total: c.total.clone(),
        branch: [es.branch.lo, es.branch.hi],
        band: [es.band.lo, es.band.hi],
        union: es.union.parts.iter().map(|i| [i.lo, i.hi]).collect(),
        tau_ess: es.tau_ess,
        p_min: es.p_min,
        degenerate_minimizers: es.degenerate_minimizers,
        witness,
    })
}

pub fn ess_spectrum(c: &RunConfig) -> Result<(), CliError> {
    json_only(c, "ess-spectrum")?;
    emit(c.out.as_deref(), &to_json(&ess_record(c)?)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundStateRecord {
    pub dim: usize,
    pub mu: f64,
    pub grid_n: usize,
    pub tol: f64,
    #[serde(rename = "K")]
    pub total: Vec<f64>,
    pub exploratory: bool,
    pub converged: bool,
    pub count: usize,
    pub energies: Vec<f64>,
    pub residuals: Vec<f64>,
    pub degenerate: bool,
    pub thresholds: Thresholds,
    pub protocol: CountProtocol,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crosscheck: Option<CrosscheckReport>,
}

fn check_energies(energies: &[f64], lower: f64, upper: f64, at: &[f64]) -> Result<(), CliError> {
    match energies.iter().find(|&&e| !(e >= lower && e < upper)) {
        Some(e) => Err(CliError::Validation(format!(
            "bound-state energy {e} at K = {at:?} lies outside [{lower}, {upper})"
        ))),
        None => Ok(()),
    }
}

fn write_wavefunctions(path: &Path, problem: &BsProblem, energies: &[f64]) -> Result<(), CliError> {
    let grid = problem.grid();
    let dim = grid.dim();
    let states = energies
        .iter()
        .map(|&e| problem.reconstruct_eigenfunction(e))
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = axis_names("p", dim);
    header.extend(axis_names("q", dim));
    header.extend((1..=states.len()).map(|j| format!("f{j}")));
    let len = grid.len();
    let rows: Vec<Vec<String>> = (0..len * len)
        .map(|flat| {
            let (i, j) = (flat / len, flat % len);
            let mut row = cells(grid.node(i).components());
            row.extend(cells(grid.node(j).components()));
            row.extend(states.iter().map(|s| fmt_float(s[flat])));
            row
        })
        .collect();
    emit(Some(path), &to_csv(&header, &rows))
}

pub fn bound_states(c: &RunConfig) -> Result<(), CliError> {
    json_only(c, "bound-states")?;
    let (params, grid) = setup(c)?;
    let total = Momentum::new(&c.total)?;
    if c.with_oracle && !grid.contains(&total) {
        return Err(CliError::Usage(format!(
            "--with-oracle needs K on the {}-point grid, got {:?}",
            c.grid_n, c.total
        )));
    }
    let problem = BsProblem::new(&total, &params, &grid)?;
    let protocol = problem.count_total()?;
    let mut record = BoundStateRecord {
        dim: c.dim,
        mu: c.mu,
        grid_n: c.grid_n,
        tol: c.tol,
        total: c.total.clone(),
        exploratory: total.max_abs() > EXPLORATORY_RADIUS + 1e-12,
        converged: protocol.converged,
        count: protocol.count,
        energies: Vec::new(),
        residuals: Vec::new(),
        degenerate: false,
        thresholds: problem.thresholds().clone(),
        protocol,
        crosscheck: None,
    };
    if !record.converged {
        emit(c.out.as_deref(), &to_json(&record)?)?;
        return Err(CliError::NonConvergence(format!(
            "bound-state count did not settle along the ladder (last value {})",
            record.count
        )));
    }
    let set = problem.bound_state_energies(c.tol)?;
    let t = problem.thresholds();
    check_energies(
        &set.energies,
        t.e_min - 3.0 * c.mu.abs(),
        t.ceiling,
        &c.total,
    )?;
    record.count = set.count;
    record.energies = set.energies;
    record.residuals = set.residuals;
    record.degenerate = set.degenerate;
    if let Some(path) = &c.wavefunctions {
        write_wavefunctions(path, &problem, &record.energies)?;
    }
    if c.with_oracle {
        record.crosscheck = Some(crosscheck_with(&problem, CROSSCHECK_TOL)?);
    }
    emit(c.out.as_deref(), &to_json(&record)?)?;
    match &record.crosscheck {
        Some(report) if !report.passed() => Err(CliError::Validation(format!(
            "oracle cross-check failed: counts equal {}, energies match {}",
            report.counts_equal, report.energies_match
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BandRow {
    #[serde(rename = "K")]
    pub total: Vec<f64>,
    pub tau_ess: f64,
    pub e_min: f64,
    pub exploratory: bool,
    pub converged: bool,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Smoothness {
    pub points: usize,
    pub second_differences: usize,
    pub max_second_difference: f64,
    pub median_second_difference: f64,
    pub jump_factor: f64,
    pub jumps: usize,
    pub nonconverged: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct BandDoc<'a> {
    dim: usize,
    mu: f64,
    grid_n: usize,
    rows: &'a [BandRow],
}

pub fn band_rows(c: &RunConfig) -> Result<Vec<BandRow>, CliError> {
    let (params, grid) = setup(c)?;
    let nodes = sweep(c.dim, c.k_points.unwrap_or(DEFAULT_BAND_POINTS));
    nodes
        .par_iter()
        .map(|raw| {
            let total = Momentum::new(raw)?;
            let problem = BsProblem::new(&total, &params, &grid)?;
            let protocol = problem.count_total()?;
            let t = problem.thresholds();
            let energies = if protocol.converged {
                problem.bound_state_energies(c.tol)?.energies
            } else {
                Vec::new()
            };
            check_energies(&energies, t.e_min - 3.0 * c.mu.abs(), t.tau_ess, raw)?;
            Ok(BandRow {
                total: raw.clone(),
                tau_ess: t.tau_ess,
                e_min: t.e_min,
                exploratory: total.max_abs() > EXPLORATORY_RADIUS + 1e-12,
                converged: protocol.converged,
                energies,
            })
        })
        .collect()
}

/// Second differences of the lowest level along the first sweep axis.
pub fn smoothness(rows: &[BandRow], dim: usize, points: usize) -> Smoothness {
    let lines: Vec<Vec<Option<f64>>> = match dim {
        1 => vec![rows.iter().map(|r| r.energies.first().copied()).collect()],
        _ => (0..points)
            .map(|b| {
                (0..points)
                    .map(|a| rows[a * points + b].energies.first().copied())
                    .collect()
            })
            .collect(),
    };
    let mut diffs: Vec<f64> = lines
        .iter()
        .flat_map(|line| {
            line.windows(3).filter_map(|w| match (w[0], w[1], w[2]) {
                (Some(a), Some(b), Some(c)) => Some((a - 2.0 * b + c).abs()),
                _ => None,
            })
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    let max = diffs.last().copied().unwrap_or(0.0);
    let median = match diffs.len() {
        0 => 0.0,
        n if n % 2 == 1 => diffs[n / 2],
        n => 0.5 * (diffs[n / 2 - 1] + diffs[n / 2]),
    };
    Smoothness {
        points,
        second_differences: diffs.len(),
        max_second_difference: max,
        median_second_difference: median,
        jump_factor: JUMP_FACTOR,
        jumps: diffs.iter().filter(|&&d| d > JUMP_FACTOR * median).count(),
        nonconverged: rows
            .iter()
            .filter(|r| !r.converged)
            .map(|r| r.total.clone())
            .collect(),
    }
}

/// `<out>.smoothness.json` next to the band table.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".smoothness.json");
    PathBuf::from(s)
}

pub fn bands(c: &RunConfig) -> Result<(), CliError> {
    let points = c.k_points.unwrap_or(DEFAULT_BAND_POINTS);
    let rows = band_rows(c)?;
    let text = match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let m = rows.iter().map(|r| r.energies.len()).max().unwrap_or(0);
            let mut header = axis_names("K", c.dim);
            header.extend(["tau_ess".into(), "e_min".into()]);
            header.extend((1..=m).map(|j| format!("E{j}")));
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut row = cells(&r.total);
                    row.extend(cells(&[r.tau_ess, r.e_min]));
                    row.extend(cells(&r.energies));
                    row.resize(header.len(), String::new());
                    row
                })
                .collect();
            to_csv(&header, &body)
        }
        Format::Json => to_json(&BandDoc {
            dim: c.dim,
            mu: c.mu,
            grid_n: c.grid_n,
            rows: &rows,
        })?,
    };
    let report = smoothness(&rows, c.dim, points);
    let side = to_json(&report)?;
    emit(c.out.as_deref(), &text)?;
    match &c.out {
        Some(out) => emit(Some(&sidecar_path(out)), &side)?,
        None => eprint!("{side}"),
    }
    if report.nonconverged.is_empty() {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "bound-state count did not settle at {} sweep points",
            report.nonconverged.len()
        )))
    }
}

pub fn validate(c: &RunConfig, inject_sign_flip: bool) -> Result<(), CliError> {
    let outcomes = run_all(&ValidationOptions {
        quick: c.quick,
        flip_prefactor: inject_sign_flip,
    });
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} ({})", o.id, o.name))
        .collect();
    println!(
        "validate: {} passed, {} failed",
        outcomes.len() - failed.len(),
        failed.len()
    );
    if let Some(out) = &c.out {
        emit(
            Some(out),
            &to_json(&serde_json::json!({ "outcomes": outcomes }))?,
        )?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "failing checks: {}",
            failed.join(", ")
        )))
    }
}
