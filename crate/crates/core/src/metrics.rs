//! Learning-curve post-processing.

use crate::error::{Error, Result};

pub const DEFAULT_TM_WINDOW: usize = 10;
pub const DEFAULT_TM_SLACK_DB: f64 = 0.1;
/// The convergence knee is the first sample within this many dB of the
/// smoothed minimum.
pub const KNEE_MARGIN_DB: f64 = 3.0;
pub const MISALIGNMENT_FLOOR_DB: f64 = -300.0;

/// An MSE learning curve in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct MseTrace {
    pub values_db: Vec<f64>,
    /// Width of the moving average already applied (1 for a raw trace).
    pub smoothing_window: usize,
}

impl MseTrace {
    pub fn raw(values_db: Vec<f64>) -> Self {
        Self {
            values_db,
            smoothing_window: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values_db.last().copied()
    }
}

/// Centered moving average of width `window`, taken in the linear power
/// domain and converted back to dB. Sample `n` averages
/// `[n - (window - 1) / 2, n + window / 2]`, truncated at the edges.
pub fn smooth(trace: &MseTrace, window: usize) -> Result<MseTrace> {
    let len = trace.len();
    if window == 0 || window > len {
        return Err(Error::invalid(
            "window",
            format!("must lie in 1..={len}, got {window}"),
        ));
    }
    if window == 1 {
        return Ok(trace.clone());
    }
    let linear: Vec<f64> = trace
        .values_db
        .iter()
        .map(|v| 10f64.powf(v / 10.0))
        .collect();
    let before = (window - 1) / 2;
    let after = window / 2;
    let values_db = (0..len)
        .map(|n| {
            let lo = n.saturating_sub(before);
            let hi = (n + after).min(len - 1);
            let slice = &linear[lo..=hi];
            let mean = slice.iter().sum::<f64>() / slice.len() as f64;
            10.0 * mean.log10()
        })
        .collect();
    Ok(MseTrace {
        values_db,
        smoothing_window: window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmReport {
    /// Iteration from which the smoothed curve is non-increasing (within
    /// `slack_db`) up to the convergence knee.
    pub t_m: usize,
    pub window: usize,
    pub slack_db: f64,
    pub knee: usize,
    /// The smoothed curve never fell more than `slack_db` below its peak;
    /// `t_m` is then `T - 1`.
    pub never_monotone: bool,
}

/// Onset of monotone decrease of a learning curve.
///
/// The curve is smoothed with [`smooth`]. The knee is the first index, at or
/// after the highest point preceding the minimum, that lies within
/// [`KNEE_MARGIN_DB`] of the smoothed minimum; searching from the peak keeps
/// a low start-up transient (empty tap line) from being taken as converged.
/// `t_m` is one past the last index `n < knee` with `s[n + 1] > s[n] + slack_db`.
pub fn compute_tm(trace: &MseTrace, window: usize, slack_db: f64) -> Result<TmReport> {
    if trace.is_empty() {
        return Err(Error::invalid("trace", "must not be empty"));
    }
    if !(slack_db >= 0.0) {
        return Err(Error::invalid(
            "slack_db",
            format!("must be >= 0, got {slack_db}"),
        ));
    }
    let window = window.max(1);
    let s = smooth(trace, window.min(trace.len()))?.values_db;
    let (lowest, minimum) = first_extremum(&s, |a, b| a < b);
    let (peak, highest) = first_extremum(&s[..=lowest], |a, b| a > b);
    let knee = (peak..s.len())
        .find(|&n| s[n] <= minimum + KNEE_MARGIN_DB)
        .unwrap_or(lowest);

    if s.len() > 1 && minimum >= highest - slack_db {
        return Ok(TmReport {
            t_m: s.len() - 1,
            window,
            slack_db,
            knee,
            never_monotone: true,
        });
    }

    let t_m = (0..knee)
        .rev()
        .find(|&n| s[n + 1] > s[n] + slack_db)
        .map_or(0, |n| n + 1);
    Ok(TmReport {
        t_m,
        window,
        slack_db,
        knee,
        never_monotone: false,
    })
}

/// Index and value of the first element that no later element beats.
fn first_extremum(values: &[f64], better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, values[0]), |best, (i, v)| {
            if better(v, best.1) {
                (i, v)
            } else {
                best
            }
        })
}

/// `20 log10(||w - h|| / ||h||)`, clamped at [`MISALIGNMENT_FLOOR_DB`]. The
/// shorter vector is zero-padded.
pub fn misalignment_db(w: &[f64], h: &[f64]) -> Result<f64> {
    let len = w.len().max(h.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let reference: f64 = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    let distance: f64 = (0..len)
        .map(|i| (at(w, i) - at(h, i)).powi(2))
        .sum::<f64>()
        .sqrt();
    if distance == 0.0 {
        return Ok(MISALIGNMENT_FLOOR_DB);
    }
    Ok((20.0 * (distance / reference).log10()).max(MISALIGNMENT_FLOOR_DB))
}

/// Largest absolute coefficient difference, zero-padding the shorter vector.
pub fn max_abs_difference(w: &[f64], h: &[f64]) -> f64 {
    let len = w.len().max(h.len());
    (0..len)
        .map(|i| (w.get(i).unwrap_or(&0.0) - h.get(i).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_window_is_identity() {
        let t = MseTrace::raw(vec![-1.0, -7.5, 3.0, -20.0]);
        assert_eq!(smooth(&t, 1).unwrap(), t);
    }

    #[test]
    fn constant_trace_unchanged() {
        let t = MseTrace::raw(vec![-42.0; 20]);
        for w in [2, 5, 10, 20] {
            let s = smooth(&t, w).unwrap();
            for v in s.values_db {
                assert!((v + 42.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ramp_interior_offset() {
        // A linear-in-dB ramp is geometric in the linear domain; averaging
        // r^{n-1}, r^n, r^{n+1} shifts sample n by 10 log10((1/r + 1 + r) / 3).
        let slope = -0.7;
        let t = MseTrace::raw((0..50).map(|n| slope * n as f64).collect());
        let s = smooth(&t, 3).unwrap();
        let r = 10f64.powf(slope / 10.0);
        let offset = 10.0 * ((1.0 / r + 1.0 + r) / 3.0).log10();
        for n in 1..49 {
            assert!((s.values_db[n] - t.values_db[n] - offset).abs() < 1e-9);
        }
        assert!(offset > 0.0 && offset < 0.1);
    }

    #[test]
    fn smooth_rejects_bad_window() {
        let t = MseTrace::raw(vec![0.0; 4]);
        assert!(smooth(&t, 0).is_err());
        assert!(smooth(&t, 5).is_err());
    }

    #[test]
    fn decreasing_trace_starts_at_zero() {
        let t = MseTrace::raw((0..100).map(|n| -0.5 * n as f64).collect());
        let r = compute_tm(&t, DEFAULT_TM_WINDOW, DEFAULT_TM_SLACK_DB).unwrap();
        assert_eq!(r.t_m, 0);
        assert!(!r.never_monotone);
    }

    #[test]
    fn flat_trace_is_never_monotone() {
        let t = MseTrace::raw(vec![-3.0; 40]);
        let r = compute_tm(&t, DEFAULT_TM_WINDOW, DEFAULT_TM_SLACK_DB).unwrap();
        assert!(r.never_monotone);
        assert_eq!(r.t_m, 39);
    }

    #[test]
    fn rising_then_falling() {
        let mut v: Vec<f64> = (0..15).map(|n| n as f64).collect();
        v.extend((0..60).map(|n| 14.0 - 0.8 * n as f64));
        let r = compute_tm(&MseTrace::raw(v), 1, 0.0).unwrap();
        assert_eq!(r.t_m, 14);
    }

    #[test]
    fn jittered_plateau_then_decrease() {
        let mut v: Vec<f64> = (0..30)
            .map(|n| if n % 2 == 0 { 0.05 } else { -0.05 })
            .collect();
        v.extend((1..=70).map(|k| -0.05 - 0.4 * k as f64));
        let r = compute_tm(&MseTrace::raw(v), 1, 0.0).unwrap();
        assert!((25..=35).contains(&r.t_m), "{r:?}");
    }

    #[test]
    fn startup_dip_does_not_place_knee() {
        // low first samples, as when the tap line is still filling
        let mut v = vec![-40.0, -20.0, -8.0, -3.0, 0.0];
        v.extend((1..=120).map(|k| -0.5 * k as f64));
        let r = compute_tm(&MseTrace::raw(v), 1, 0.1).unwrap();
        assert_eq!(r.t_m, 4);
        assert!(r.knee > 100);
    }

    #[test]
    fn offset_invariance() {
        let v: Vec<f64> = (0..80)
            .map(|n| ((n as f64) * 0.37).sin() * 2.0 - 0.3 * n as f64)
            .collect();
        let shifted: Vec<f64> = v.iter().map(|x| x + 17.0).collect();
        let a = compute_tm(&MseTrace::raw(v), 10, 0.1).unwrap();
        let b = compute_tm(&MseTrace::raw(shifted), 10, 0.1).unwrap();
        assert_eq!(a.t_m, b.t_m);
    }

    #[test]
    fn tm_rejects_negative_slack() {
        assert!(compute_tm(&MseTrace::raw(vec![0.0, -1.0]), 1, -0.1).is_err());
    }

    #[test]
    fn misalignment_cases() {
        let h = [0.3, -0.6, 0.9];
        assert_eq!(misalignment_db(&h, &h).unwrap(), MISALIGNMENT_FLOOR_DB);
        assert_eq!(misalignment_db(&[0.0; 3], &h).unwrap(), 0.0);
        let scaled: Vec<f64> = h.iter().map(|x| 1.1 * x).collect();
        assert!((misalignment_db(&scaled, &h).unwrap() + 20.0).abs() < 1e-9);
        assert_eq!(
            misalignment_db(&h, &[0.0; 3]).unwrap_err(),
            Error::ZeroReference
        );
        // zero padding
        assert_eq!(
            misalignment_db(&[1.0], &[1.0, 0.0]).unwrap(),
            MISALIGNMENT_FLOOR_DB
        );
    }

    #[test]
    fn max_abs_difference_pads() {
        assert_eq!(max_abs_difference(&[1.0, 2.0], &[1.0]), 2.0);
    }
}
