//! Frozen reference values and independent re-implementations.

use apfamily::algorithms::{lms_step, AlgorithmConfig, MuMode};
use apfamily::config::default_delta;
use apfamily::metrics::{compute_tm, max_abs_difference, smooth, MseTrace};
use apfamily::signal::{design_highpass_fir, gaussian_sequence, generate_noise, NoiseSpec};
use apfamily::sysid::{run_ensemble, run_single, ExperimentConfig, PlantModel};

/// 13 taps, cutoff 0.4, evaluated with 40 significant digits.
const HIGHPASS_13_04: [f64; 13] = [
    -0.004030020910049923,
    7.443025954878837e-45,
    0.023424496539665177,
    0.033624313620079074,
    -0.07191867079850246,
    -0.28362431362007906,
    0.6050483903377745,
    -0.28362431362007906,
    -0.07191867079850246,
    0.033624313620079074,
    0.023424496539665177,
    7.443025954878837e-45,
    -0.004030020910049923,
];

#[test]
fn highpass_matches_reference() {
    let h = design_highpass_fir(13, 0.4).unwrap();
    for (a, b) in h.iter().zip(HIGHPASS_13_04) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn regularized_projection_matches_straight_line_loop() {
    let (len, order, iterations) = (13usize, 4usize, 500usize);
    let h = design_highpass_fir(13, 0.4).unwrap();
    let delta = default_delta(len, 1.0);
    let config = ExperimentConfig {
        plant: PlantModel::noiseless(h.clone()),
        algorithm: AlgorithmConfig::r_ap(len, order, delta, MuMode::AutoNormalized, 1.0),
        noise: NoiseSpec::white(1.0, 0),
        iterations,
        ensemble_runs: 1,
        base_seed: 2024,
    };
    let result = run_single(&config, 0).unwrap();

    let x = generate_noise(&NoiseSpec::white(1.0, config.run_seed(0)), iterations).unwrap();
    let sample = |k: isize| if k < 0 { 0.0 } else { x[k as usize] };
    let desired = |n: isize| {
        (0..h.len())
            .map(|k| h[k] * sample(n - k as isize))
            .sum::<f64>()
    };
    let mut w = vec![0.0; len];
    for n in 0..iterations as isize {
        let rows = order.min(n as usize + 1);
        let xs: Vec<Vec<f64>> = (0..rows)
            .map(|i| {
                (0..len)
                    .map(|k| sample(n - i as isize - k as isize))
                    .collect()
            })
            .collect();
        let e: Vec<f64> = (0..rows)
            .map(|i| desired(n - i as isize) - (0..len).map(|k| xs[i][k] * w[k]).sum::<f64>())
            .collect();
        let gram: Vec<Vec<f64>> = (0..rows)
            .map(|i| {
                (0..rows)
                    .map(|j| {
                        let g: f64 = (0..len).map(|k| xs[i][k] * xs[j][k]).sum();
                        if i == j {
                            g + delta
                        } else {
                            g
                        }
                    })
                    .collect()
            })
            .collect();
        let eps = solve_dense(gram, e);
        for k in 0..len {
            w[k] += (0..rows).map(|i| xs[i][k] * eps[i]).sum::<f64>();
        }
    }

    assert!(max_abs_difference(&result.final_weights, &w) < 1e-9);
    assert!(max_abs_difference(&result.final_weights, &h) < 1e-3);
}

#[test]
fn lms_stays_bounded_under_half_the_instantaneous_limit() {
    let len = 13;
    let steps = 100_000;
    let h = design_highpass_fir(13, 0.4).unwrap();
    let x = gaussian_sequence(7, 0, 1.0, steps);
    let regressor = |n: usize| -> Vec<f64> {
        (0..len)
            .map(|k| if n >= k { x[n - k] } else { 0.0 })
            .collect()
    };
    let max_energy = (len - 1..steps)
        .map(|n| regressor(n).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    let mu = 0.5 * 2.0 / max_energy;

    let bound = 10.0 * h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut w = vec![0.0; len];
    for n in 0..steps {
        let xn = regressor(n);
        let d: f64 = h.iter().zip(&xn).map(|(a, b)| a * b).sum();
        lms_step(&mut w, &xn, d, mu);
        assert!(w.iter().all(|v| v.abs() <= bound), "diverged at {n}");
    }
}

#[test]
fn noiseless_exact_model_reaches_minus_100_db() {
    let h = design_highpass_fir(13, 0.4).unwrap();
    let algorithms = [
        AlgorithmConfig::lms(13, 0.05),
        AlgorithmConfig::bndr_lms(13, MuMode::AutoNormalized, 1.0),
        AlgorithmConfig::r_ap(13, 4, default_delta(13, 1.0), MuMode::AutoNormalized, 1.0),
    ];
    for algorithm in algorithms {
        let config = ExperimentConfig {
            plant: PlantModel::noiseless(h.clone()),
            algorithm,
            noise: NoiseSpec::white(1.0, 0),
            iterations: 2000,
            ensemble_runs: 10,
            base_seed: 99,
        };
        let ensemble = run_ensemble(&config, 2).unwrap();
        let smoothed = smooth(&MseTrace::raw(ensemble.mse_db), 10).unwrap();
        let last = smoothed.last().unwrap();
        assert!(last < -100.0, "{:?}: {last}", config.algorithm.kind);
    }
}

#[test]
fn scalar_gain_identified_in_one_step() {
    let config = ExperimentConfig {
        plant: PlantModel::noiseless(vec![1.0]),
        algorithm: AlgorithmConfig::r_ap(1, 1, 0.0, MuMode::Fixed, 1.0),
        noise: NoiseSpec::white(1.0, 0),
        iterations: 50,
        ensemble_runs: 1,
        base_seed: 3,
    };
    let run = run_single(&config, 0).unwrap();
    let x0 = generate_noise(&NoiseSpec::white(1.0, config.run_seed(0)), 1).unwrap()[0];
    assert_eq!(run.mse_trace[0], x0 * x0);
    assert!(run.mse_trace[1..].iter().all(|e2| *e2 == 0.0));
}

#[test]
fn tm_of_decreasing_curve_is_zero() {
    let t = MseTrace::raw((0..200).map(|n| -0.25 * n as f64).collect());
    assert_eq!(compute_tm(&t, 10, 0.1).unwrap().t_m, 0);
}
