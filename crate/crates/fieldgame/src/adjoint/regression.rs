//! Least-squares projection machinery for the backward regression solver.
//!
//! One-step conditional expectations E[·|F_{t_k}] are approximated by
//! ordinary least squares onto a feature basis of the current state:
//! monomials in the components of x up to a total degree, optionally
//! augmented with the particle's current observation level Y(t_k) (the
//! natural observable feature under partial observation). Columns are
//! standardized before factorization; columns whose sample variation is
//! negligible are dropped (leaving the intercept to carry their
//! information) so that degenerate ensembles — for instance a state that
//! never moves — stay solvable. The remaining design is factorized once
//! per step by thin SVD and shared across every regressand.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Regression basis configuration: monomials in x up to `degree`, plus
/// the current observation level when `include_y` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisSpec {
    pub degree: usize,
    pub include_y: bool,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec { degree: 2, include_y: true }
    }
}

impl BasisSpec {
    /// All monomial exponent vectors over `n` variables with total
    /// degree at most `degree`, ordered by total degree then
    /// lexicographically; the first is the constant.
    fn exponents(&self, n: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for total in 0..=self.degree as u32 {
            let mut current = vec![0u32; n];
            fill(&mut out, &mut current, 0, total);
        }
        fn fill(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
            if pos + 1 == current.len() {
                current[pos] = remaining;
                out.push(current.clone());
                return;
            }
            for e in (0..=remaining).rev() {
                current[pos] = e;
                fill(out, current, pos + 1, remaining - e);
            }
            current[pos] = 0;
        }
        out
    }

    pub(crate) fn evaluator(&self, n: usize) -> BasisEval {
        BasisEval { exponents: self.exponents(n), include_y: self.include_y }
    }
}

/// Prepared feature map: fills one design-matrix row per particle.
pub(crate) struct BasisEval {
    exponents: Vec<Vec<u32>>,
    include_y: bool,
}

impl BasisEval {
    pub fn column_count(&self) -> usize {
        self.exponents.len() + usize::from(self.include_y)
    }

    pub fn fill_row(&self, x: &[f64], y: f64, row: &mut [f64]) {
        for (slot, expo) in row.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (c, &e) in expo.iter().enumerate() {
                for _ in 0..e {
                    v *= x[c];
                }
            }
            *slot = v;
        }
        if self.include_y {
            row[self.exponents.len()] = y;
        }
    }
}

/// Per-step conditioning diagnostics of the regression design.
#[derive(Clone, Copy, Debug)]
pub struct StepDiagnostics {
    pub step: usize,
    /// Condition number of the standardized design actually factorized.
    pub condition: f64,
    /// Columns kept after dropping near-constant features.
    pub columns_kept: usize,
}

/// Least-squares fit of every column of `targets` on the rows of the
/// raw `design` (first column must be the constant feature). Returns the
/// fitted values — the conditional-expectation estimates — not the
/// coefficients, which standardization makes uninterpretable anyway.
pub(crate) fn fit(
    design: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    step: usize,
) -> Result<(DMatrix<f64>, StepDiagnostics)> {
    let rows = design.nrows();
    let nf = rows as f64;

    // Standardize, dropping features with no sample variation. The
    // intercept (column 0) always stays; a dropped feature's constant
    // contribution is absorbed by the intercept's coefficient.
    let mut kept_columns: Vec<DVector<f64>> = vec![DVector::from_element(rows, 1.0)];
    for j in 1..design.ncols() {
        let col = design.column(j);
        let mean = col.sum() / nf;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        if std <= 1e-12 * mean.abs().max(1.0) {
            continue;
        }
        kept_columns.push(DVector::from_iterator(rows, col.iter().map(|v| (v - mean) / std)));
    }
    let kept = kept_columns.len();
    let reduced = DMatrix::from_columns(&kept_columns);

    let svd = reduced.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let condition = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::Numerical(format!(
            "regression design at step {step} is rank-deficient (condition {condition:.2e}); \
             use a smaller basis degree or more particles"
        )));
    }

    let coeffs = svd
        .solve(targets, 0.0)
        .map_err(|e| Error::Numerical(format!("regression solve failed at step {step}: {e}")))?;
    let fitted = reduced * coeffs;
    Ok((fitted, StepDiagnostics { step, condition, columns_kept: kept }))
}
