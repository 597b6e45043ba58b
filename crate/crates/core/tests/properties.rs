use std::f64::consts::PI;

use proptest::prelude::*;
use triboson::bsolver::BsProblem;
use triboson::energy::{three_band_bottom, ModelParams};
use triboson::esspec::{channel_value, essential_spectrum};
use triboson::grid::{make_grid, Momentum};
use triboson::numerics::sym_eigenvalues;
use triboson::oracle::discretize_symmetric;
use triboson::realspace::lattice_coefficients;
use triboson::twobody::{closed_form_1d, eigenvalue, pair_integral};

fn m(c: &[f64]) -> Momentum {
    Momentum::new(c).unwrap()
}

/// Independent 2D reference: midpoint rule on a fine grid, accurate only for
/// integrands well away from the band edge.
fn midpoint_pair_integral(k: &[f64; 2], z: f64, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    let (c0, c1) = ((k[0] / 2.0).cos(), (k[1] / 2.0).cos());
    let mut sum = 0.0;
    for a in 0..n {
        let qa = -PI + (a as f64 + 0.5) * h;
        for b in 0..n {
            let qb = -PI + (b as f64 + 0.5) * h;
            sum += 1.0 / (4.0 - 2.0 * c0 * qa.cos() - 2.0 * c1 * qb.cos() - z);
        }
    }
    sum / (n * n) as f64
}

#[test]
fn two_dimensional_pair_integral_against_midpoint_rule() {
    let g = make_grid(2, 64).unwrap();
    for (k, z) in [([0.0, 0.0], -2.0), ([1.0, -2.0], -1.0), ([PI, 0.5], 0.0)] {
        let a = pair_integral(&m(&k), z, &g).unwrap();
        let b = midpoint_pair_integral(&k, z, 256);
        assert!((a - b).abs() < 1e-12 * b, "{a} vs {b}");
    }
}

#[test]
fn oracle_and_birman_schwinger_agree_on_every_small_case() {
    for k in [0.0, PI / 4.0, PI / 2.0, PI] {
        for mu in [-0.3, -1.5, -4.0] {
            let params = ModelParams::new(1, mu).unwrap();
            let grid = make_grid(1, 8).unwrap();
            let total = m(&[k]);
            let bs = BsProblem::new(&total, &params, &grid).unwrap();
            let sector = discretize_symmetric(&total, &params, &grid).unwrap();
            let all = sym_eigenvalues(&sector.matrix).unwrap();
            let top = *bs.ladder().last().unwrap();
            let lo = bs.thresholds().e_min - 3.0 * mu.abs();
            for j in 0..40 {
                let z = lo + (top - lo) * j as f64 / 39.0;
                if all.iter().any(|e| (e - z).abs() < 1e-6) {
                    continue;
                }
                let oracle = all.iter().filter(|&&e| e < z).count();
                assert_eq!(bs.count_at(z).unwrap().count, oracle, "K={k} mu={mu} z={z}");
            }
        }
    }
}

#[test]
fn two_dimensional_counts_match_the_oracle() {
    let params = ModelParams::new(2, -2.0).unwrap();
    let grid = make_grid(2, 8).unwrap();
    let total = m(&[PI / 2.0, 0.0]);
    let bs = BsProblem::new(&total, &params, &grid).unwrap();
    let sector = discretize_symmetric(&total, &params, &grid).unwrap();
    let all = sym_eigenvalues(&sector.matrix).unwrap();
    for z in bs.ladder() {
        let oracle = all.iter().filter(|&&e| e < z).count();
        assert_eq!(bs.count_at(z).unwrap().count, oracle);
    }
}

#[test]
fn levels_are_even_in_total_momentum() {
    let params = ModelParams::new(1, -2.0).unwrap();
    let grid = make_grid(1, 16).unwrap();
    let a = BsProblem::new(&m(&[0.6]), &params, &grid)
        .unwrap()
        .bound_state_energies(1e-11)
        .unwrap();
    let b = BsProblem::new(&m(&[-0.6]), &params, &grid)
        .unwrap()
        .bound_state_energies(1e-11)
        .unwrap();
    assert_eq!(a.count, b.count);
    for (x, y) in a.energies.iter().zip(&b.energies) {
        assert!((x - y).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigenvalue_matches_closed_form(k in -PI..PI, mu in -6.0f64..-0.2) {
        let params = ModelParams::new(1, mu).unwrap();
        let g = make_grid(1, 32).unwrap();
        let k = m(&[k]);
        let e = eigenvalue(&k, &params, &g, 1e-12).unwrap();
        prop_assert!((e - closed_form_1d(&k, &params).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn threshold_sits_below_band_and_witness(k0 in -PI..PI, k1 in -PI..PI, mu in -4.0f64..-0.8) {
        let params = ModelParams::new(2, mu).unwrap();
        let g = make_grid(2, 16).unwrap();
        let total = m(&[k0, k1]);
        let es = essential_spectrum(&total, &params, &g).unwrap();
        prop_assert!(es.tau_ess < three_band_bottom(&total));
        let witness = channel_value(&total, &total.scale(2.0 / 3.0), &params, &g).unwrap();
        prop_assert!(es.tau_ess <= witness + 1e-12);
        prop_assert!(es.union.len() == 1 || es.union.len() == 2);
    }

    #[test]
    fn count_is_nondecreasing(k in -PI..PI, mu in -5.0f64..-0.5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let params = ModelParams::new(1, mu).unwrap();
        let bs = BsProblem::new(&m(&[k]), &params, &make_grid(1, 16).unwrap()).unwrap();
        let top = *bs.ladder().last().unwrap();
        let lo = bs.thresholds().e_min - 3.0 * mu.abs();
        let (za, zb) = (lo + (top - lo) * a.min(b), lo + (top - lo) * a.max(b));
        prop_assert!(bs.count_at(za).unwrap().count <= bs.count_at(zb).unwrap().count);
    }

    #[test]
    fn parseval_holds(values in proptest::collection::vec(-1.0f64..1.0, 16)) {
        let g = make_grid(1, 16).unwrap();
        let t = lattice_coefficients(&values, &g, 8).unwrap();
        let direct: f64 = values.iter().map(|v| v * v).sum::<f64>() * g.weight();
        prop_assert!((t.period_norm_sqr() - direct).abs() < 1e-10);
    }
}
