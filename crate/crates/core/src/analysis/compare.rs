use thiserror::Error;

use crate::graph::Trace;
use crate::signal::StepSample;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("time grids differ at step {step}: {a:?} vs {b:?}")]
    TimeGridMismatch {
        step: usize,
        a: Option<f64>,
        b: Option<f64>,
    },
    #[error("signal sets differ: {a:?} vs {b:?}")]
    SignalMismatch { a: Vec<String>, b: Vec<String> },
}

/// Largest deviation seen on one signal, relative to the signal's peak
/// magnitude over both traces.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SignalDeviation {
    pub signal: String,
    pub max_left: f64,
    pub max_right: f64,
    /// Largest absolute difference before scaling.
    pub max_abs: f64,
    pub peak: f64,
    /// Time of the largest scaled deviation.
    pub worst_time: Option<f64>,
}

impl SignalDeviation {
    pub fn max(&self) -> f64 {
        self.max_left.max(self.max_right)
    }
}

/// An order-0 impulse in one trace checked against the spike it should
/// leave in the other: `right + coefficient / h` where `h` is the step that
/// ended at the impulse.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ImpulseMatch {
    pub time: f64,
    pub signal: String,
    pub coefficient: f64,
    pub step: f64,
    pub expected: f64,
    pub observed: f64,
    pub relative_error: f64,
    pub within_tolerance: bool,
}

/// A higher-order impulse; the other trace shows it as a burst lasting
/// `order` extra steps, so those steps are left out of the deviation.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DelayFinding {
    pub time: f64,
    pub signal: String,
    pub order: u32,
    pub coefficient: f64,
    pub expected_shift: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CompareReport {
    pub rel_tol: f64,
    pub steps: usize,
    pub signals: Vec<SignalDeviation>,
    pub impulses: Vec<ImpulseMatch>,
    pub delays: Vec<DelayFinding>,
    pub passed: bool,
}

/// Compares two traces recorded on the same time grid.
///
/// Where one trace jumps and the other does not, the continuous value may
/// match either limit. Where one trace carries impulses and the other does
/// not, the impulse is checked as described on [`ImpulseMatch`] and
/// [`DelayFinding`]. Impulses present in both traces are compared
/// coefficient by coefficient.
pub fn compare_traces(a: &Trace, b: &Trace, rel_tol: f64) -> Result<CompareReport, CompareError> {
    let mut names_a = a.signals.clone();
    let mut names_b = b.signals.clone();
    names_a.sort();
    names_b.sort();
    if names_a != names_b {
        return Err(CompareError::SignalMismatch {
            a: a.signals.clone(),
            b: b.signals.clone(),
        });
    }
    for step in 0..a.len().max(b.len()) {
        let (ta, tb) = (a.times.get(step).copied(), b.times.get(step).copied());
        if ta != tb {
            return Err(CompareError::TimeGridMismatch { step, a: ta, b: tb });
        }
    }

    let mut signals = Vec::new();
    let mut impulses = Vec::new();
    let mut delays = Vec::new();
    for (ka, name) in a.signals.iter().enumerate() {
        let kb = b.signal_index(name).expect("same signal sets");
        let (sa, sb) = (&a.samples[ka], &b.samples[kb]);
        let mut skip = vec![false; a.len()];
        for step in 0..a.len() {
            let (x, y) = (&sa[step], &sb[step]);
            if x.has_impulses() == y.has_impulses() {
                continue;
            }
            let imp = if x.has_impulses() { x } else { y };
            let other = if x.has_impulses() { y } else { x };
            skip[step] = true;
            for (order, coefficient) in imp.impulses.iter() {
                if order == 0 {
                    let h = a.step_size(step).unwrap_or(f64::NAN);
                    let expected = imp.right + coefficient / h;
                    let observed = other.right;
                    let relative_error = (observed - expected).abs() / expected.abs();
                    impulses.push(ImpulseMatch {
                        time: a.times[step],
                        signal: name.clone(),
                        coefficient,
                        step: h,
                        expected,
                        observed,
                        relative_error,
                        within_tolerance: relative_error <= rel_tol,
                    });
                } else {
                    let h = a
                        .step_size(step + 1)
                        .or(a.step_size(step))
                        .unwrap_or(f64::NAN);
                    for s in skip.iter_mut().skip(step).take(order as usize + 1) {
                        *s = true;
                    }
                    delays.push(DelayFinding {
                        time: a.times[step],
                        signal: name.clone(),
                        order,
                        coefficient,
                        expected_shift: order as f64 * h,
                    });
                }
            }
        }
        signals.push(deviation(name, sa, sb, &a.times, &skip));
    }

    let passed =
        signals.iter().all(|s| s.max() <= rel_tol) && impulses.iter().all(|m| m.within_tolerance);
    Ok(CompareReport {
        rel_tol,
        steps: a.len(),
        signals,
        impulses,
        delays,
        passed,
    })
}

fn deviation(
    name: &str,
    sa: &[StepSample],
    sb: &[StepSample],
    times: &[f64],
    skip: &[bool],
) -> SignalDeviation {
    let mut peak = 0.0f64;
    let mut diffs = Vec::new();
    for (step, (x, y)) in sa.iter().zip(sb).enumerate() {
        if skip[step] {
            continue;
        }
        peak = peak
            .max(x.left.abs())
            .max(x.right.abs())
            .max(y.left.abs())
            .max(y.right.abs());
        let (dl, dr) = if x.is_discontinuous() == y.is_discontinuous() {
            let mut dl = (x.left - y.left).abs();
            let dr = (x.right - y.right).abs();
            for (order, c) in x.impulses.iter().chain(y.impulses.iter()) {
                let d = (x.impulses.get(order) - y.impulses.get(order)).abs();
                peak = peak.max(c.abs());
                dl = dl.max(d);
            }
            (dl, dr)
        } else {
            let (jump, flat) = if x.is_discontinuous() { (x, y) } else { (y, x) };
            let d = (flat.left - jump.left)
                .abs()
                .min((flat.left - jump.right).abs());
            (d, d)
        };
        diffs.push((times[step], dl, dr));
    }
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let mut out = SignalDeviation {
        signal: name.to_string(),
        max_left: 0.0,
        max_right: 0.0,
        max_abs: 0.0,
        peak,
        worst_time: None,
    };
    let mut worst = -1.0;
    for (t, dl, dr) in diffs {
        out.max_left = out.max_left.max(dl / scale);
        out.max_right = out.max_right.max(dr / scale);
        out.max_abs = out.max_abs.max(dl).max(dr);
        if dl.max(dr) > worst {
            worst = dl.max(dr);
            out.worst_time = Some(t);
        }
    }
    if worst <= 0.0 {
        out.worst_time = None;
    }
    out
}
