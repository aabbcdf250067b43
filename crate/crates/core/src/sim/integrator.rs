//! Dormand–Prince 5(4) embedded Runge–Kutta pair with adaptive step size.
//!
//! Local error is measured against `atol + rtol·max(|y|, |y_new|)` in the
//! max norm, so every component meets the tolerance on its own. The stage-7 derivative is reused as the next step's first
//! stage (FSAL), so accepted steps cost six right-hand-side evaluations.

use std::ops::ControlFlow;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    /// Components in `(-atol, 0)` after an accepted step are set to zero.
    pub clamp_undershoot: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrateError {
    StepLimit { t: f64, steps: usize },
    StepUnderflow { t: f64, h: f64 },
}

/// One accepted step, with both endpoints, their derivatives, and the
/// extra coefficient of the fourth-order continuous extension.
pub struct Step<'a> {
    pub t0: f64,
    pub y0: &'a [f64],
    pub f0: &'a [f64],
    pub t1: f64,
    pub y1: &'a [f64],
    pub f1: &'a [f64],
    dense: &'a [f64],
}

impl Step<'_> {
    /// Dense output of the state at `t ∈ [t0, t1]`. Reduces to cubic
    /// Hermite interpolation plus a quartic correction.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let h = self.t1 - self.t0;
        if h <= 0.0 {
            out.copy_from_slice(self.y1);
            return;
        }
        let s = (t - self.t0) / h;
        let s1 = 1.0 - s;
        for i in 0..out.len() {
            let dy = self.y1[i] - self.y0[i];
            let b = h * self.f0[i] - dy;
            let c = dy - h * self.f1[i] - b;
            out[i] = self.y0[i] + s * (dy + s1 * (b + s * (c + s1 * self.dense[i])));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateStats {
    pub t: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub stopped_early: bool,
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

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], ctl: &StepControl) -> f64 {
    err.iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| (e / (ctl.atol + ctl.rtol * a.abs().max(b.abs()))).abs())
        .fold(0.0, f64::max)
}

fn initial_step<S: OdeSystem>(sys: &S, t0: f64, y0: &[f64], f0: &[f64], ctl: &StepControl) -> f64 {
    let n = y0.len().max(1) as f64;
    let sc = |y: f64| ctl.atol + ctl.rtol * y.abs();
    let d0 = (y0.iter().map(|y| (y / sc(*y)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0
        .iter()
        .zip(y0)
        .map(|(f, y)| (f / sc(*y)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    sys.rhs(t0 + h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .zip(y0)
        .map(|((a, b), y)| ((a - b) / sc(*y)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

/// Integrates `sys` from `(t0, y)` to `t_end`, leaving the final state in
/// `y`. `observe` sees every accepted step and may stop early by returning
/// `ControlFlow::Break`.
pub fn integrate<S, F>(
    sys: &S,
    t0: f64,
    y: &mut [f64],
    t_end: f64,
    ctl: &StepControl,
    mut observe: F,
) -> Result<IntegrateStats, IntegrateError>
where
    S: OdeSystem,
    F: FnMut(&Step<'_>) -> ControlFlow<()>,
{
    let n = sys.dim();
    assert_eq!(y.len(), n, "state length must match system dimension");
    let mut stats = IntegrateStats {
        t: t0,
        accepted: 0,
        rejected: 0,
        stopped_early: false,
    };
    if t_end <= t0 {
        return Ok(stats);
    }

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut dense = vec![0.0; n];

    let mut t = t0;
    sys.rhs(t, y, &mut k1);
    let mut h = initial_step(sys, t, y, &k1, ctl).min(t_end - t);
    let mut steps = 0usize;

    while t < t_end {
        if steps >= ctl.max_steps {
            return Err(IntegrateError::StepLimit { t, steps });
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= f64::EPSILON * t.abs().max(1.0) {
            return Err(IntegrateError::StepUnderflow { t, h });
        }

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, &tmp, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if last { t_end } else { t + h };
        sys.rhs(t_new, &y_new, &mut k7);
        for i in 0..n {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&err, y, &y_new, ctl);
        if !e.is_finite() {
            h *= FAC_MIN;
            stats.rejected += 1;
            continue;
        }

        if e <= 1.0 {
            if ctl.clamp_undershoot {
                let mut clamped = false;
                for v in &mut y_new {
                    if *v < 0.0 && *v > -ctl.atol {
                        *v = 0.0;
                        clamped = true;
                    }
                }
                if clamped {
                    sys.rhs(t_new, &y_new, &mut k7);
                }
            }
            for i in 0..n {
                dense[i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            stats.accepted += 1;
            let flow = observe(&Step {
                t0: t,
                y0: y,
                f0: &k1,
                t1: t_new,
                y1: &y_new,
                f1: &k7,
                dense: &dense,
            });
            t = t_new;
            y.copy_from_slice(&y_new);
            std::mem::swap(&mut k1, &mut k7);
            stats.t = t;
            if flow.is_break() {
                stats.stopped_early = t < t_end;
                return Ok(stats);
            }
            let fac = if e == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * e.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (SAFETY * e.powf(-0.2)).clamp(FAC_MIN, 1.0);
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    struct Oscillator;
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    const TIGHT: StepControl = StepControl {
        atol: 1e-12,
        rtol: 1e-10,
        max_steps: 100_000,
        clamp_undershoot: false,
    };

    #[test]
    fn exponential_decay() {
        for t_end in [1.0, 5.0, 10.0] {
            let mut y = [1.0];
            integrate(&Decay(1.0), 0.0, &mut y, t_end, &TIGHT, |_| ControlFlow::Continue(()))
                .unwrap();
            assert!((y[0] - (-t_end).exp()).abs() < 1e-10, "t={t_end}: {}", y[0]);
        }
    }

    #[test]
    fn harmonic_oscillator_period() {
        let mut y = [1.0, 0.0];
        let tau = 2.0 * std::f64::consts::PI;
        integrate(&Oscillator, 0.0, &mut y, tau, &TIGHT, |_| ControlFlow::Continue(())).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
    }

    #[test]
    fn error_tracks_tolerance() {
        let mut prev = f64::INFINITY;
        for tol in [1e-4, 1e-6, 1e-8] {
            let ctl = StepControl { atol: tol, rtol: tol, ..TIGHT };
            let mut y = [1.0, 0.0];
            integrate(&Oscillator, 0.0, &mut y, 10.0, &ctl, |_| ControlFlow::Continue(())).unwrap();
            let e = (y[0] - 10f64.cos()).abs() + (y[1] + 10f64.sin()).abs();
            assert!(e < prev);
            assert!(e < 100.0 * tol, "tol {tol}: err {e}");
            prev = e;
        }
    }

    #[test]
    fn step_limit_reports_error() {
        let ctl = StepControl { max_steps: 3, ..TIGHT };
        let mut y = [1.0];
        let r = integrate(&Decay(1.0), 0.0, &mut y, 100.0, &ctl, |_| ControlFlow::Continue(()));
        assert!(matches!(r, Err(IntegrateError::StepLimit { steps: 3, .. })));
    }

    #[test]
    fn observer_can_stop() {
        let mut y = [1.0];
        let stats = integrate(&Decay(1.0), 0.0, &mut y, 100.0, &TIGHT, |s| {
            if s.t1 > 2.0 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert!(stats.stopped_early && stats.t > 2.0 && stats.t < 100.0);
    }

    #[test]
    fn dense_output_is_accurate() {
        let mut y = [1.0];
        let mut worst: f64 = 0.0;
        let ctl = StepControl { atol: 1e-10, rtol: 1e-8, ..TIGHT };
        integrate(&Decay(1.0), 0.0, &mut y, 5.0, &ctl, |s| {
            let mut out = [0.0];
            let mid = 0.5 * (s.t0 + s.t1);
            s.interpolate(mid, &mut out);
            worst = worst.max((out[0] - (-mid).exp()).abs());
            ControlFlow::Continue(())
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }
}
