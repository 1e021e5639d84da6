//! LMS, BNDR-LMS and regularized affine-projection updates.
//!
//! All three are members of one family. With `X` the `N x L` matrix whose
//! rows are the `N` most recent regressors (newest first), `d` the matching
//! desired samples and `e = d - X w` the a-priori errors, the affine
//! projection update is
//!
//! ```text
//! eps = (X Xᵀ + delta I)^{-1} e
//! w  += mu Xᵀ eps
//! ```
//!
//! `N = 1, delta = 0` is NLMS, `N = 2, delta = 0` is BNDR-LMS and any
//! `delta > 0` gives R-AP. LMS is the unnormalized gradient step
//! `w += mu e x`. Signals are real, so Hermitian transposes reduce to
//! ordinary ones.

use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, solve_regularized, SymMatrix};

/// Adaptive filter weights or plant coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for WeightVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// `N` stacked regressors of length `L`, row 0 the newest.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    row_len: usize,
    data: Vec<f64>,
}

impl DataMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let row_len = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || row_len == 0 {
            return Err(Error::invalid(
                "data_matrix",
                "needs at least one non-empty row",
            ));
        }
        if rows.iter().any(|r| r.len() != row_len) {
            return Err(Error::invalid("data_matrix", "rows differ in length"));
        }
        Ok(Self {
            rows: rows.len(),
            row_len,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// Builds the matrix from an input history stored newest first.
    /// Row `i` is `history[i..i + row_len]`, i.e. the regressor `i` samples
    /// ago.
    pub fn from_history(history: &[f64], rows: usize, row_len: usize) -> Result<Self> {
        if rows == 0 || row_len == 0 {
            return Err(Error::invalid(
                "data_matrix",
                "rows and row length must be positive",
            ));
        }
        let needed = rows + row_len - 1;
        if history.len() < needed {
            return Err(Error::invalid(
                "history",
                format!("need {needed} samples, got {}", history.len()),
            ));
        }
        let mut data = Vec::with_capacity(rows * row_len);
        for i in 0..rows {
            data.extend_from_slice(&history[i..i + row_len]);
        }
        Ok(Self {
            rows,
            row_len,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row_len(&self) -> usize {
        self.row_len
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.row_len..(i + 1) * self.row_len]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.row_len)
    }

    /// `X v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.iter_rows().map(|r| dot(r, v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Lms,
    BndrLms,
    RAp,
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmKind::Lms => "LMS",
            AlgorithmKind::BndrLms => "BNDR-LMS",
            AlgorithmKind::RAp => "R-AP",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    Fixed,
    /// Step recomputed every iteration from the current regressor energy,
    /// see [`AlgorithmConfig::step_size`].
    AutoNormalized,
}

/// Relaxation applied by [`MuMode::AutoNormalized`]; with it the newest
/// a-posteriori errors vanish when `delta = 0`.
pub const NORMALIZED_STEP: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    pub mu: f64,
    pub projection_order: usize,
    pub delta: f64,
    pub filter_length: usize,
    pub mu_mode: MuMode,
}

impl AlgorithmConfig {
    pub fn lms(filter_length: usize, mu: f64) -> Self {
        Self {
            kind: AlgorithmKind::Lms,
            mu,
            projection_order: 1,
            delta: 0.0,
            filter_length,
            mu_mode: MuMode::Fixed,
        }
    }

    pub fn bndr_lms(filter_length: usize, mu_mode: MuMode, mu: f64) -> Self {
        Self {
            kind: AlgorithmKind::BndrLms,
            mu,
            projection_order: 2,
            delta: 0.0,
            filter_length,
            mu_mode,
        }
    }

    pub fn r_ap(
        filter_length: usize,
        projection_order: usize,
        delta: f64,
        mu_mode: MuMode,
        mu: f64,
    ) -> Self {
        Self {
            kind: AlgorithmKind::RAp,
            mu,
            projection_order,
            delta,
            filter_length,
            mu_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.filter_length == 0 {
            return Err(Error::invalid("filter_length", "must be positive"));
        }
        if self.mu_mode == MuMode::Fixed && !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::invalid(
                "mu",
                format!("must be > 0, got {}", self.mu),
            ));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::invalid(
                "delta",
                format!("must be >= 0, got {}", self.delta),
            ));
        }
        match self.kind {
            AlgorithmKind::Lms => {
                if self.projection_order != 1 {
                    return Err(Error::invalid("projection_order", "LMS uses order 1"));
                }
                if self.delta != 0.0 {
                    return Err(Error::invalid("delta", "LMS is unregularized"));
                }
                if self.mu_mode == MuMode::AutoNormalized {
                    return Err(Error::invalid("mu_mode", "LMS uses a fixed step size"));
                }
            }
            AlgorithmKind::BndrLms => {
                if self.projection_order != 2 {
                    return Err(Error::invalid("projection_order", "BNDR-LMS uses order 2"));
                }
                if self.delta != 0.0 {
                    return Err(Error::invalid("delta", "BNDR-LMS is unregularized"));
                }
            }
            AlgorithmKind::RAp => {
                if self.projection_order == 0 {
                    return Err(Error::invalid("projection_order", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Step size for the current regressor.
    ///
    /// Fixed mode returns `mu`. Auto mode returns [`NORMALIZED_STEP`]: the
    /// prescribed `auto_mu = 1 / (N ||x||^2)` normalizes a raw update along
    /// the `N` stacked regressors by their energy (about `N ||x||^2`), and
    /// the projection direction `Xᵀ (X Xᵀ)^{-1} e` already carries that
    /// normalization, which leaves a relaxation of one. A silent regressor
    /// is still an error, as it is for [`auto_mu`].
    pub fn step_size(&self, regressor: &[f64]) -> Result<f64> {
        match self.mu_mode {
            MuMode::Fixed => Ok(self.mu),
            MuMode::AutoNormalized => {
                let order = match self.kind {
                    AlgorithmKind::RAp => self.projection_order,
                    _ => 1,
                };
                auto_mu(regressor, order)?;
                Ok(NORMALIZED_STEP)
            }
        }
    }

    /// Multiplies charged per iteration (corrected convention).
    pub fn step_multiplies(&self) -> u64 {
        step_multiplies(self.kind, self.filter_length, self.projection_order)
    }

    pub fn step_multiplies_literal(&self) -> u64 {
        step_multiplies_literal(self.kind, self.filter_length, self.projection_order)
    }
}

/// Result of one adaptation step. `error_e == desired - output_y` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub output_y: f64,
    pub error_e: f64,
    pub multiplies: u64,
}

/// One LMS iteration: `y = wᵀx`, `e = d - y`, `w += mu e x`.
pub fn lms_step(w: &mut [f64], x: &[f64], d: f64, mu: f64) -> StepOutcome {
    debug_assert_eq!(w.len(), x.len());
    let output_y = dot(w, x);
    let error_e = d - output_y;
    let gain = mu * error_e;
    for (wk, xk) in w.iter_mut().zip(x) {
        *wk += gain * xk;
    }
    StepOutcome {
        output_y,
        error_e,
        multiplies: step_multiplies(AlgorithmKind::Lms, x.len(), 1),
    }
}

/// One affine-projection iteration of order `x.rows()`.
///
/// The reported output and error are those of the newest row.
pub fn ap_step(
    w: &mut [f64],
    x: &DataMatrix,
    d: &[f64],
    mu: f64,
    delta: f64,
) -> Result<StepOutcome> {
    if x.row_len() != w.len() {
        return Err(Error::invalid(
            "data_matrix",
            format!(
                "row length {} does not match {} weights",
                x.row_len(),
                w.len()
            ),
        ));
    }
    if d.len() != x.rows() {
        return Err(Error::invalid(
            "desired",
            format!("{} desired samples for {} rows", d.len(), x.rows()),
        ));
    }
    let outputs = x.mul_vec(w);
    let errors: Vec<f64> = d.iter().zip(&outputs).map(|(di, yi)| di - yi).collect();
    let gram = SymMatrix::gram(&x.iter_rows().collect::<Vec<_>>());
    let eps = solve_regularized(&gram, delta, &errors)?;
    for (row, e) in x.iter_rows().zip(&eps) {
        let gain = mu * e;
        for (wk, xk) in w.iter_mut().zip(row) {
            *wk += gain * xk;
        }
    }
    Ok(StepOutcome {
        output_y: outputs[0],
        error_e: errors[0],
        multiplies: step_multiplies(AlgorithmKind::RAp, x.row_len(), x.rows()),
    })
}

/// BNDR-LMS: the unregularized order-2 projection.
pub fn bndr_lms_step(w: &mut [f64], x: &DataMatrix, d: &[f64], mu: f64) -> Result<StepOutcome> {
    if x.rows() != 2 {
        return Err(Error::invalid(
            "data_matrix",
            format!("BNDR-LMS needs 2 rows, got {}", x.rows()),
        ));
    }
    let outcome = ap_step(w, x, d, mu, 0.0)?;
    Ok(StepOutcome {
        multiplies: step_multiplies(AlgorithmKind::BndrLms, x.row_len(), 2),
        ..outcome
    })
}

/// Upper end of the step-size range `0 < mu < 2 / ||x||^2`.
pub fn max_stable_mu(x: &[f64]) -> Result<f64> {
    let energy = dot(x, x);
    if energy <= 0.0 {
        return Err(Error::ZeroRegressor);
    }
    Ok(2.0 / energy)
}

/// `1 / (N ||x||^2)`.
pub fn auto_mu(x: &[f64], order: usize) -> Result<f64> {
    let energy = dot(x, x);
    if energy <= 0.0 {
        return Err(Error::ZeroRegressor);
    }
    if order == 0 {
        return Err(Error::invalid("projection_order", "must be positive"));
    }
    Ok(1.0 / (order as f64 * energy))
}

/// Cost of inverting an `n x n` matrix, in multiplies.
pub fn i_inv(n: usize) -> u64 {
    (n as u64).pow(3)
}

/// Multiplies per iteration, corrected convention:
/// LMS `2L`, BNDR-LMS `4L + 4 I_inv(2)`, R-AP `2NL + I_inv(N)`.
pub fn step_multiplies(kind: AlgorithmKind, filter_length: usize, order: usize) -> u64 {
    let l = filter_length as u64;
    let n = order as u64;
    match kind {
        AlgorithmKind::Lms => 2 * l,
        AlgorithmKind::BndrLms => 4 * l + 4 * i_inv(2),
        AlgorithmKind::RAp => 2 * n * l + i_inv(order),
    }
}

/// Same as [`step_multiplies`] except that R-AP is charged
/// `2NL + I_inv(N) N^2`, reading the inverse cost as a per-element factor.
pub fn step_multiplies_literal(
    kind: AlgorithmKind,
    filter_length: usize,
    order: usize,
) -> u64 {
    match kind {
        AlgorithmKind::RAp => {
            let n = order as u64;
            2 * n * filter_length as u64 + i_inv(order) * n * n
        }
        _ => step_multiplies(kind, filter_length, order),
    }
}

/// A weight vector together with the rule that updates it.
#[derive(Debug, Clone)]
pub struct AdaptiveFilter {
    config: AlgorithmConfig,
    weights: WeightVector,
}

impl AdaptiveFilter {
    /// Validates `config` and starts from all-zero weights.
    pub fn new(config: AlgorithmConfig) -> Result<Self> {
        config.validate()?;
        let weights = WeightVector::zeros(config.filter_length);
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.config
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn into_weights(self) -> WeightVector {
        self.weights
    }

    /// Adapts on `regressors` (newest row first) and matching `desired`
    /// samples. Fewer rows than the projection order are accepted while the
    /// input history is still filling up; LMS only looks at row 0.
    ///
    /// The outcome is always charged the configured per-step multiply count.
    pub fn adapt(&mut self, regressors: &DataMatrix, desired: &[f64]) -> Result<StepOutcome> {
        let row0 = regressors.row(0);
        let outcome = match self.config.kind {
            AlgorithmKind::Lms => lms_step(&mut self.weights, row0, desired[0], self.config.mu),
            AlgorithmKind::BndrLms if regressors.rows() == 2 => {
                let mu = self.config.step_size(row0)?;
                bndr_lms_step(&mut self.weights, regressors, desired, mu)?
            }
            AlgorithmKind::BndrLms | AlgorithmKind::RAp => {
                let mu = self.config.step_size(row0)?;
                ap_step(
                    &mut self.weights,
                    regressors,
                    desired,
                    mu,
                    self.config.delta,
                )?
            }
        };
        Ok(StepOutcome {
            multiplies: self.config.step_multiplies(),
            ..outcome
        })
    }
}
