//! Randomized consistency checks shipped with the binary.
//!
//! Three suites run on fixed seeds:
//!
//! * order-1 projection against the closed-form NLMS update;
//! * a-posteriori errors of unregularized projections against
//!   `(1 - mu)` times the a-priori errors;
//! * residuals of [`solve_regularized`] on random SPD and near-singular
//!   regularized systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algorithms::{ap_step, DataMatrix};
use crate::linalg::{residual_max_norm, solve_regularized, SymMatrix, RESIDUAL_TOLERANCE};

pub const NLMS_RELATIVE_TOLERANCE: f64 = 1e-12;
pub const CONTRACTION_TOLERANCE: f64 = 1e-10;
pub const CONTRACTION_STEP_SIZES: [f64; 3] = [0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestOptions {
    pub seed: u64,
    pub nlms_instances: usize,
    /// Instances per step size in [`CONTRACTION_STEP_SIZES`].
    pub contraction_instances: usize,
    pub solver_instances: usize,
    /// Added to the regularization handed to the code under test while the
    /// checks keep the nominal value. Non-zero values must make the suites
    /// fail; this is the negative control.
    pub delta_perturbation: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            nlms_instances: 10_000,
            contraction_instances: 1_000,
            solver_instances: 10_000,
            delta_perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    /// Largest observed error, in the suite's own normalization.
    pub worst: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Tally {
    name: &'static str,
    instances: usize,
    failures: usize,
    worst: f64,
    tolerance: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            instances: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
        }
    }

    /// Records one instance; `None` means the code under test returned an
    /// error.
    fn record(&mut self, error: Option<f64>) {
        self.instances += 1;
        match error {
            Some(e) if e <= self.tolerance => self.worst = self.worst.max(e),
            Some(e) => {
                self.failures += 1;
                self.worst = self.worst.max(e);
            }
            None => {
                self.failures += 1;
                self.worst = f64::INFINITY;
            }
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name,
            instances: self.instances,
            failures: self.failures,
            worst: self.worst,
            tolerance: self.tolerance,
        }
    }
}

/// Order-1 projection versus `w + mu e x / ||x||^2`; relative error in the
/// max norm.
pub fn nlms_equivalence_suite(options: &SelftestOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut tally = Tally::new("nlms-equivalence", NLMS_RELATIVE_TOLERANCE);
    for _ in 0..options.nlms_instances {
        let len = rng.random_range(1..=32);
        let w = gaussian_vec(&mut rng, len);
        let x = gaussian_vec(&mut rng, len);
        let d: f64 = rng.sample(StandardNormal);
        let mu = rng.random_range(0.05..1.95);

        let energy: f64 = x.iter().map(|v| v * v).sum();
        let e = d - w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let expected: Vec<f64> = w
            .iter()
            .zip(&x)
            .map(|(wk, xk)| wk + mu * e * xk / energy)
            .collect();

        let mut actual = w.clone();
        let matrix = DataMatrix::from_rows(&[x]).expect("non-empty row");
        let result = ap_step(&mut actual, &matrix, &[d], mu, options.delta_perturbation);
        tally.record(result.ok().map(|_| {
            let scale = max_abs(expected.iter().copied()).max(1.0);
            max_abs(actual.iter().zip(&expected).map(|(a, b)| a - b)) / scale
        }));
    }
    tally.finish()
}

/// Unregularized projections of order 1..=4 must scale the a-priori error
/// vector by exactly `1 - mu`.
pub fn contraction_suite(options: &SelftestOptions) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0xa5a5);
    let mut tally = Tally::new("a-posteriori-contraction", CONTRACTION_TOLERANCE);
    for &mu in &CONTRACTION_STEP_SIZES {
        for _ in 0..options.contraction_instances {
            let order = rng.random_range(1..=4);
            let len = rng.random_range(order + 3..=32);
            let rows: Vec<Vec<f64>> = (0..order).map(|_| gaussian_vec(&mut rng, len)).collect();
            let matrix = DataMatrix::from_rows(&rows).expect("rows share a length");
            let mut w = gaussian_vec(&mut rng, len);
            let d = gaussian_vec(&mut rng, order);

            let prior: Vec<f64> = d
                .iter()
                .zip(matrix.mul_vec(&w))
                .map(|(di, yi)| di - yi)
                .collect();
            let result = ap_step(&mut w, &matrix, &d, mu, options.delta_perturbation);
            tally.record(result.ok().map(|_| {
                let post = d.iter().zip(matrix.mul_vec(&w)).map(|(di, yi)| di - yi);
                max_abs(post.zip(&prior).map(|(p, e)| p - (1.0 - mu) * e))
            }));
        }
    }
    tally.finish()
}

/// Which family of systems a solver instance is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemClass {
    /// `B Bᵀ` with `B` of size `N x (N + 2..=N + 6)`, `delta` 0 or in
    /// `[1e-6, 1)`.
    WellPosed,
    /// Rank-deficient `B Bᵀ`, `delta` in `[1e-6, 1e-2)`, right-hand side in
    /// the range of `B Bᵀ` plus a `delta`-sized perturbation.
    NearSingularConsistent,
    /// Rank-deficient `B Bᵀ`, `delta` in `[1e-4, 1e-2)`, arbitrary
    /// right-hand side.
    NearSingularGeneral,
}

/// A random system `(gram, delta, rhs)` of order 1..=8 from `class`.
/// Factor entries are scaled so the Gram diagonal is O(1).
pub fn random_system(rng: &mut ChaCha8Rng, class: SystemClass) -> (SymMatrix, f64, Vec<f64>) {
    let order = rng.random_range(1..=8);
    let rank = match class {
        SystemClass::WellPosed => order + rng.random_range(2..=6),
        _ => rng.random_range(1..=order),
    };
    let scale = (rank as f64).sqrt();
    let factor: Vec<Vec<f64>> = (0..order)
        .map(|_| {
            gaussian_vec(rng, rank)
                .into_iter()
                .map(|v| v / scale)
                .collect()
        })
        .collect();
    let gram = SymMatrix::gram(&factor);
    let delta = match class {
        SystemClass::WellPosed if rng.random_bool(0.5) => 0.0,
        SystemClass::WellPosed => 10f64.powf(rng.random_range(-6.0..0.0)),
        SystemClass::NearSingularConsistent => 10f64.powf(rng.random_range(-6.0..-2.0)),
        SystemClass::NearSingularGeneral => 10f64.powf(rng.random_range(-4.0..-2.0)),
    };
    let rhs = match class {
        SystemClass::NearSingularConsistent => {
            let z = gaussian_vec(rng, order);
            let u = gaussian_vec(rng, order);
            gram.mul_shifted(0.0, &z)
                .into_iter()
                .zip(u)
                .map(|(a, b)| a + delta * b)
                .collect()
        }
        _ => gaussian_vec(rng, order),
    };
    (gram, delta, rhs)
}

/// Residual of `(A + delta I) x = b` relative to `1 + max|b|`, cycling
/// through every [`SystemClass`].
pub fn solver_residual_suite(options: &SelftestOptions) -> SuiteResult {
    const CLASSES: [SystemClass; 3] = [
        SystemClass::WellPosed,
        SystemClass::NearSingularConsistent,
        SystemClass::NearSingularGeneral,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x5a5a);
    let mut tally = Tally::new("solver-residual", RESIDUAL_TOLERANCE);
    for i in 0..options.solver_instances {
        let (gram, delta, rhs) = random_system(&mut rng, CLASSES[i % CLASSES.len()]);
        let bound_scale = 1.0 + max_abs(rhs.iter().copied());
        let solved = solve_regularized(&gram, delta + options.delta_perturbation, &rhs);
        tally.record(
            solved
                .ok()
                .map(|x| residual_max_norm(&gram, delta, &x, &rhs) / bound_scale),
        );
    }
    tally.finish()
}

pub fn run_selftest(options: &SelftestOptions) -> SelftestReport {
    SelftestReport {
        suites: vec![
            nlms_equivalence_suite(options),
            contraction_suite(options),
            solver_residual_suite(options),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SelftestOptions {
        SelftestOptions {
            nlms_instances: 300,
            contraction_instances: 100,
            solver_instances: 300,
            ..SelftestOptions::default()
        }
    }

    #[test]
    fn suites_pass() {
        let report = run_selftest(&small());
        for suite in &report.suites {
            assert!(suite.passed(), "{suite:?}");
        }
    }

    #[test]
    fn perturbed_delta_fails_every_suite() {
        let report = run_selftest(&SelftestOptions {
            delta_perturbation: 0.1,
            ..small()
        });
        for suite in &report.suites {
            assert!(!suite.passed(), "{suite:?}");
        }
    }
}
