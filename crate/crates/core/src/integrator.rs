//! Dormand–Prince 5(4) with dense output.
//!
//! The integrator works on one smooth segment `[t0, t1]` at a time; callers
//! split at discontinuities themselves. Every accepted step is handed to an
//! observer as a [`DenseStep`] that can be evaluated anywhere inside it.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepMode {
    Adaptive { rtol: f64, atol: f64 },
    Fixed { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    pub mode: StepMode,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            mode: StepMode::Adaptive {
                rtol: 1e-9,
                atol: 1e-12,
            },
            h_min: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64, last: Vec<f64> },
    #[error("step limit {limit} reached at t = {t:e}")]
    TooManySteps {
        t: f64,
        limit: usize,
        last: Vec<f64>,
    },
    #[error("right-hand side failed at t = {t:e}: {reason}")]
    Rhs {
        t: f64,
        reason: String,
        last: Vec<f64>,
    },
    #[error("non-finite state at t = {t:e}")]
    NonFinite { t: f64, last: Vec<f64> },
}

impl IntegrationError {
    /// Last state accepted before the failure.
    pub fn last_state(&self) -> &[f64] {
        match self {
            IntegrationError::StepUnderflow { last, .. }
            | IntegrationError::TooManySteps { last, .. }
            | IntegrationError::Rhs { last, .. }
            | IntegrationError::NonFinite { last, .. } => last,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SegmentStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for SegmentStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        let th = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let th1 = 1.0 - th;
        let r = &self.r;
        std::array::from_fn(|i| {
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }

    /// Time derivative of the continuous extension.
    pub fn derivative(&self, t: f64) -> [f64; N] {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return [0.0; N];
        }
        let th = (t - self.t0) / h;
        let th1 = 1.0 - th;
        let r = &self.r;
        std::array::from_fn(|i| {
            let q = r[3][i] + th1 * r[4][i];
            let p = r[2][i] + th * q;
            let rr = r[1][i] + th1 * p;
            let dq = -r[4][i];
            let dp = q + th * dq;
            let drr = -p + th1 * dp;
            (rr + th * drr) / h
        })
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

struct Trial<const N: usize> {
    y1: [f64; N],
    k7: [f64; N],
    err: [f64; N],
    dense: [[f64; N]; 5],
}

fn dp_step<const N: usize, F>(
    rhs: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    evals: &mut usize,
) -> Result<Trial<N>, String>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], String>,
{
    let mut call = |tt: f64, yy: [f64; N]| {
        *evals += 1;
        if !finite(&yy) {
            return Err("non-finite stage state".to_string());
        }
        rhs(tt, &yy)
    };
    let k2 = call(t + C2 * h, combine(y, h, &[(A21, k1)]))?;
    let k3 = call(t + C3 * h, combine(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = call(
        t + C4 * h,
        combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]),
    )?;
    let k5 = call(
        t + C5 * h,
        combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = call(
        t + h,
        combine(
            y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    )?;
    let y1 = combine(
        y,
        h,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = call(t + h, y1)?;
    let err = std::array::from_fn(|i| {
        h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
    });
    let dense = {
        let r2: [f64; N] = std::array::from_fn(|i| y1[i] - y[i]);
        let r3: [f64; N] = std::array::from_fn(|i| h * k1[i] - r2[i]);
        let r4: [f64; N] = std::array::from_fn(|i| r2[i] - h * k7[i] - r3[i]);
        let r5: [f64; N] = std::array::from_fn(|i| {
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
        });
        [*y, r2, r3, r4, r5]
    };
    Ok(Trial { y1, k7, err, dense })
}

fn error_norm<const N: usize>(
    y0: &[f64; N],
    y1: &[f64; N],
    err: &[f64; N],
    rtol: f64,
    atol: f64,
) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize>(
    t0: f64,
    t1: f64,
    y0: &[f64; N],
    k1: &[f64; N],
    rtol: f64,
    atol: f64,
) -> f64 {
    let sc: [f64; N] = std::array::from_fn(|i| atol + rtol * y0[i].abs());
    let d0 = (y0
        .iter()
        .zip(&sc)
        .map(|(y, s)| (y / s).powi(2))
        .sum::<f64>()
        / N as f64)
        .sqrt();
    let d1 = (k1
        .iter()
        .zip(&sc)
        .map(|(k, s)| (k / s).powi(2))
        .sum::<f64>()
        / N as f64)
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(t1 - t0)
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t1`, calling `observe` on every
/// accepted step. Returns the end state and step statistics.
pub fn integrate<const N: usize, F, O>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &IntegratorOptions,
    mut observe: O,
) -> Result<([f64; N], SegmentStats), IntegrationError>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], String>,
    O: FnMut(&DenseStep<N>),
{
    let mut stats = SegmentStats::default();
    if t1 <= t0 {
        return Ok((y0, stats));
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y).map_err(|reason| IntegrationError::Rhs {
        t,
        reason,
        last: y.to_vec(),
    })?;
    stats.evaluations += 1;

    match opts.mode {
        StepMode::Fixed { dt } => {
            let n = ((t1 - t0) / dt).ceil().max(1.0) as usize;
            if n > opts.max_steps {
                return Err(IntegrationError::TooManySteps {
                    t,
                    limit: opts.max_steps,
                    last: y.to_vec(),
                });
            }
            let h = (t1 - t0) / n as f64;
            for i in 0..n {
                let tn = if i + 1 == n {
                    t1
                } else {
                    t0 + (i + 1) as f64 * h
                };
                let hh = tn - t;
                let trial = dp_step(&mut rhs, t, &y, &k1, hh, &mut stats.evaluations).map_err(
                    |reason| IntegrationError::Rhs {
                        t,
                        reason,
                        last: y.to_vec(),
                    },
                )?;
                if !finite(&trial.y1) {
                    return Err(IntegrationError::NonFinite {
                        t,
                        last: y.to_vec(),
                    });
                }
                observe(&DenseStep {
                    t0: t,
                    t1: tn,
                    y0: y,
                    y1: trial.y1,
                    r: trial.dense,
                });
                stats.accepted += 1;
                t = tn;
                y = trial.y1;
                k1 = trial.k7;
            }
            Ok((y, stats))
        }
        StepMode::Adaptive { rtol, atol } => {
            let mut h = initial_step(t0, t1, &y, &k1, rtol, atol);
            let mut last_reject = false;
            loop {
                if stats.accepted + stats.rejected >= opts.max_steps {
                    return Err(IntegrationError::TooManySteps {
                        t,
                        limit: opts.max_steps,
                        last: y.to_vec(),
                    });
                }
                let remaining = t1 - t;
                // Land exactly on t1 rather than leaving a sliver.
                let final_step = h >= remaining * (1.0 - 1e-12);
                if final_step {
                    h = remaining;
                }
                if h < opts.h_min && !final_step {
                    return Err(IntegrationError::StepUnderflow {
                        t,
                        h,
                        last: y.to_vec(),
                    });
                }
                let trial = dp_step(&mut rhs, t, &y, &k1, h, &mut stats.evaluations);
                let (trial, err, reason) = match trial {
                    Ok(tr) if finite(&tr.y1) => {
                        let e = error_norm(&y, &tr.y1, &tr.err, rtol, atol);
                        (Some(tr), e, None)
                    }
                    Ok(_) => (None, f64::INFINITY, None),
                    Err(r) => (None, f64::INFINITY, Some(r)),
                };
                if err <= 1.0 {
                    let tr = trial.expect("accepted trial");
                    let tn = if final_step { t1 } else { t + h };
                    observe(&DenseStep {
                        t0: t,
                        t1: tn,
                        y0: y,
                        y1: tr.y1,
                        r: tr.dense,
                    });
                    stats.accepted += 1;
                    t = tn;
                    y = tr.y1;
                    k1 = tr.k7;
                    if final_step {
                        return Ok((y, stats));
                    }
                    let mut fac = if err == 0.0 {
                        10.0
                    } else {
                        0.9 * err.powf(-0.2)
                    };
                    fac = fac.clamp(0.2, 10.0);
                    if last_reject {
                        fac = fac.min(1.0);
                    }
                    h *= fac;
                    last_reject = false;
                } else {
                    stats.rejected += 1;
                    let fac = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
                    } else {
                        0.25
                    };
                    h *= fac;
                    last_reject = true;
                    if h < opts.h_min {
                        return Err(match (reason, trial) {
                            (Some(reason), _) => IntegrationError::Rhs {
                                t,
                                reason,
                                last: y.to_vec(),
                            },
                            (None, None) => IntegrationError::NonFinite {
                                t,
                                last: y.to_vec(),
                            },
                            (None, Some(_)) => IntegrationError::StepUnderflow {
                                t,
                                h,
                                last: y.to_vec(),
                            },
                        });
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn oscillator(_t: f64, y: &[f64; 2]) -> Result<[f64; 2], String> {
        Ok([y[1], -y[0]])
    }

    #[test]
    fn harmonic_oscillator_end_state() {
        let opts = IntegratorOptions::default();
        let (y, stats) = integrate(oscillator, 0.0, [1.0, 0.0], 10.0, &opts, |_| {}).unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-8, "{y:?}");
        assert!((y[1] + 10f64.sin()).abs() < 1e-8);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn exponential_growth() {
        let opts = IntegratorOptions::default();
        let (y, _) =
            integrate(|_, y: &[f64; 1]| Ok([y[0]]), 0.0, [1.0], 2.0, &opts, |_| {}).unwrap();
        assert_relative_eq!(y[0], 2f64.exp(), max_relative = 1e-8);
    }

    #[test]
    fn dense_output_is_accurate() {
        let opts = IntegratorOptions {
            mode: StepMode::Adaptive {
                rtol: 1e-10,
                atol: 1e-12,
            },
            ..Default::default()
        };
        let mut worst: f64 = 0.0;
        let mut last_t1 = 0.0;
        integrate(oscillator, 0.0, [1.0, 0.0], 20.0, &opts, |s| {
            assert_eq!(s.t0, last_t1);
            last_t1 = s.t1;
            for k in 0..=8 {
                let t = s.t0 + (s.t1 - s.t0) * k as f64 / 8.0;
                let y = s.eval(t);
                worst = worst
                    .max((y[0] - t.cos()).abs())
                    .max((y[1] + t.sin()).abs());
            }
            assert_eq!(s.eval(s.t0), s.y0);
        })
        .unwrap();
        assert_eq!(last_t1, 20.0);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn dense_derivative_matches_flow() {
        let opts = IntegratorOptions::default();
        let mut worst: f64 = 0.0;
        integrate(oscillator, 0.0, [1.0, 0.0], 5.0, &opts, |s| {
            for k in 0..=4 {
                let t = s.t0 + (s.t1 - s.t0) * k as f64 / 4.0;
                let d = s.derivative(t);
                worst = worst
                    .max((d[0] + t.sin()).abs())
                    .max((d[1] + t.cos()).abs());
            }
        })
        .unwrap();
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn fixed_step_order_five() {
        let run = |dt: f64| {
            let opts = IntegratorOptions {
                mode: StepMode::Fixed { dt },
                ..Default::default()
            };
            let (y, _) = integrate(oscillator, 0.0, [1.0, 0.0], 5.0, &opts, |_| {}).unwrap();
            (y[0] - 5f64.cos()).hypot(y[1] + 5f64.sin())
        };
        let (e1, e2) = (run(0.1), run(0.05));
        let order = (e1 / e2).log2();
        assert!((order - 5.0).abs() < 0.6, "observed order {order}");
    }

    #[test]
    fn rhs_failure_reports_last_state() {
        let opts = IntegratorOptions::default();
        let err = integrate(
            |t, y: &[f64; 1]| {
                if t > 0.5 {
                    Err("outside".into())
                } else {
                    Ok([y[0] * 0.0 + 1.0])
                }
            },
            0.0,
            [0.0],
            1.0,
            &opts,
            |_| {},
        )
        .unwrap_err();
        assert!(matches!(err, IntegrationError::Rhs { .. }));
        let last = err.last_state()[0];
        assert!(last <= 0.5 + 1e-9 && last > 0.4, "{err}");
    }

    #[test]
    fn empty_interval() {
        let opts = IntegratorOptions::default();
        let (y, s) = integrate(oscillator, 1.0, [3.0, 4.0], 1.0, &opts, |_| {}).unwrap();
        assert_eq!(y, [3.0, 4.0]);
        assert_eq!(s.accepted, 0);
    }
}
