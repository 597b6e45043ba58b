//! Dense symmetric eigendecomposition, bracketed root finding and
//! least-squares line fitting.
//!
//! The eigensolver is backed by nalgebra's Householder tridiagonalisation
//! followed by implicit symmetric QR; this module only adds input checks and a
//! deterministic ascending ordering.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Real symmetric matrix stored row-major with both triangles populated.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            entries: vec![0.0; order * order],
        }
    }

    /// Builds the matrix by evaluating `f(i, j)` once for every `i <= j` and
    /// mirroring the value into the lower triangle.
    pub fn from_upper<F>(order: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in i..order {
                let v = f(i, j);
                m.entries[i * order + j] = v;
                m.entries[j * order + i] = v;
            }
        }
        m
    }

    /// Builds a symmetric matrix from rows that are symmetric up to rounding by
    /// averaging the two triangles; `(a + b) / 2` is bitwise symmetric in its
    /// arguments, so the result is exactly symmetric.
    pub fn symmetrized(order: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != order * order {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for order {order}, got {}",
                order * order,
                rows.len()
            )));
        }
        Ok(Self::from_upper(order, |i, j| {
            0.5 * (rows[i * order + j] + rows[j * order + i])
        }))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.order + j] = value;
        self.entries[j * self.order + i] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest |A_ij - A_ji|; zero for every matrix built through this type.
    pub fn asymmetry(&self) -> f64 {
        let n = self.order;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.order, "dimension mismatch in matvec");
        (0..self.order)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn check_finite(&self) -> Result<()> {
        match self.entries.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite {
                context: "symmetric matrix",
                index,
                value: self.entries[index],
            }),
            None => Ok(()),
        }
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.order, self.order, &self.entries)
    }
}

/// Eigenpairs in ascending eigenvalue order.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    order: usize,
    /// Column-major: eigenvector `j` occupies `vectors[j * order..(j + 1) * order]`.
    vectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.order..(j + 1) * self.order]
    }
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

/// Full eigendecomposition of a real symmetric matrix.
pub fn sym_eigen(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    a.check_finite()?;
    let n = a.order();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![],
            order: 0,
            vectors: vec![],
        });
    }
    let eig = a.to_nalgebra().symmetric_eigen();
    let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let perm = ascending_order(&raw);
    let mut vectors = Vec::with_capacity(n * n);
    for &j in &perm {
        vectors.extend(eig.eigenvectors.column(j).iter().copied());
    }
    Ok(EigenDecomposition {
        eigenvalues: perm.iter().map(|&j| raw[j]).collect(),
        order: n,
        vectors,
    })
}

/// Eigenvalues only, ascending.
pub fn sym_eigenvalues(a: &SymmetricMatrix) -> Result<Vec<f64>> {
    a.check_finite()?;
    if a.order() == 0 {
        return Ok(vec![]);
    }
    let mut values: Vec<f64> = a
        .to_nalgebra()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn check_bracket(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInput(format!("bad bracket [{lo}, {hi}]")));
    }
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    Ok(())
}

/// Pure bisection. Returns the midpoint of a sign-changing bracket of width
/// at most `tol`.
pub fn find_root_bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa0 = f(a);
    let fb0 = f(b);
    if fa0 == 0.0 {
        return Ok(a);
    }
    if fb0 == 0.0 {
        return Ok(b);
    }
    check_bracket(a, b, fa0, fb0)?;
    let sa = fa0.signum();
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Root of a function that changes sign on `[lo, hi]`.
///
/// Illinois-modified false position; a bisection step is forced whenever two
/// consecutive steps fail to halve the bracket, so convergence is never worse
/// than plain bisection. The returned point lies in a sign-changing bracket of
/// width at most `tol`.
pub fn find_root_monotone<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    check_bracket(a, b, fa, fb)?;
    let tol = tol.max(f64::EPSILON * a.abs().max(b.abs()));
    // side of the last replaced endpoint: -1 left, +1 right
    let mut last_side = 0i8;
    let mut width_two_steps_ago = b - a;
    let mut width_one_step_ago = b - a;
    for _ in 0..400 {
        let width = b - a;
        if width <= tol {
            break;
        }
        let mut x = if width > 0.5 * width_two_steps_ago {
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        let inset = 0.25 * tol;
        if !(x > a + inset && x < b - inset) {
            x = if !x.is_finite() {
                0.5 * (a + b)
            } else if x <= a + inset {
                a + inset.min(0.5 * width)
            } else {
                b - inset.min(0.5 * width)
            };
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if last_side == -1 {
                fb *= 0.5;
            }
            last_side = -1;
        } else {
            b = x;
            fb = fx;
            if last_side == 1 {
                fa *= 0.5;
            }
            last_side = 1;
        }
        width_two_steps_ago = width_one_step_ago;
        width_one_step_ago = width;
    }
    Ok(0.5 * (a + b))
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "abscissae ({}) and ordinates ({}) differ in length",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput(
            "line fit needs at least 3 points".into(),
        ));
    }
    if let Some(i) = xs.iter().chain(ys).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "line fit data",
            index: i,
            value: xs.iter().chain(ys).nth(i).copied().unwrap_or(f64::NAN),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
        return Err(Error::InvalidInput("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LineFit {
        slope,
        intercept,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual_ok(a: &SymmetricMatrix, d: &EigenDecomposition) -> bool {
        let scale = a.max_abs().max(1.0) * a.order() as f64;
        (0..d.len()).all(|j| {
            let v = d.vector(j);
            let av = a.matvec(v);
            let r: f64 = av
                .iter()
                .zip(v)
                .map(|(x, y)| (x - d.eigenvalues[j] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            r <= 1e-10 * scale
        })
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let id = SymmetricMatrix::from_upper(3, |i, j| if i == j { 1.0 } else { 0.0 });
        assert_eq!(sym_eigen(&id).unwrap().eigenvalues, vec![1.0, 1.0, 1.0]);

        let mut diag = SymmetricMatrix::zeros(3);
        diag.set(0, 0, 2.0);
        diag.set(1, 1, -1.0);
        let ev = sym_eigen(&diag).unwrap().eigenvalues;
        assert_eq!(ev, vec![-1.0, 0.0, 2.0]);

        let swap = SymmetricMatrix::from_upper(2, |i, j| if i == j { 0.0 } else { 1.0 });
        let ev = sym_eigen(&swap).unwrap().eigenvalues;
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let mut m = SymmetricMatrix::zeros(2);
        m.set(0, 1, f64::NAN);
        assert!(matches!(sym_eigen(&m), Err(Error::NonFinite { .. })));
        assert!(matches!(sym_eigenvalues(&m), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn symmetrized_is_bitwise_symmetric() {
        let rows = vec![1.0, 0.1 + 0.2, 0.3, 2.0];
        let m = SymmetricMatrix::symmetrized(2, &rows).unwrap();
        assert_eq!(m.asymmetry(), 0.0);
        assert_eq!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn roots_of_simple_functions() {
        let r = find_root_monotone(|x| x - 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() <= 1e-12);
        let r = find_root_monotone(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r - 2f64.sqrt()).abs() <= 1e-13);
        let r = find_root_bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r - 2f64.sqrt()).abs() <= 1e-13);
    }

    #[test]
    fn steep_monotone_root_converges() {
        // 1 - 1/(1 - x) style pole next to the root
        let f = |x: f64| 1.0 - 0.999 / (1.0 - x);
        let r = find_root_monotone(f, -5.0, 1.0 - 1e-12, 1e-14).unwrap();
        assert!((r - 0.001).abs() < 1e-12);
    }

    #[test]
    fn bracket_without_sign_change_fails() {
        let err = find_root_monotone(|x| x * x + 1.0, -1.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
        assert!(find_root_bisect(|x| x + 3.0, 0.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn exact_line_and_constant() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);

        let fit = linear_fit(&xs, &[5.0; 4]).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn degenerate_fit_inputs() {
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn eigen_invariants(order in 1usize..12, seed in proptest::collection::vec(-5.0f64..5.0, 144)) {
            let a = SymmetricMatrix::from_upper(order, |i, j| seed[i * 12 + j]);
            let d = sym_eigen(&a).unwrap();
            let trace: f64 = d.eigenvalues.iter().sum();
            prop_assert!((trace - a.trace()).abs() <= 1e-9 * order as f64 * a.max_abs().max(1.0));
            prop_assert!(d.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(residual_ok(&a, &d));
            for i in 0..order {
                for j in 0..order {
                    let dot: f64 = d.vector(i).iter().zip(d.vector(j)).map(|(x, y)| x * y).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() <= 1e-10);
                }
            }
            let only = sym_eigenvalues(&a).unwrap();
            for (x, y) in only.iter().zip(&d.eigenvalues) {
                prop_assert!((x - y).abs() <= 1e-10 * a.max_abs().max(1.0));
            }
        }

        #[test]
        fn root_lies_in_tight_bracket(root in -3.0f64..3.0, slope in 0.1f64..50.0) {
            let f = |x: f64| (x - root) * slope + (x - root).powi(3);
            let tol = 1e-11;
            let x = find_root_monotone(f, -4.0, 4.0, tol).unwrap();
            prop_assert!((x - root).abs() <= tol);
        }
    }
}
