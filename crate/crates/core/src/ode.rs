//! Dormand–Prince 5(4) with PI step-size control.

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct OdeControls {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeControls {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            min_step: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OdeStatus {
    Completed,
    /// Step size fell below `min_step` at time `t`.
    StepUnderflow { t: f64, h: f64 },
    StepLimit { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights are the last row of A; E = b5 - b4.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// `stops` (sorted, inside `(t0, t_end]`) are hit exactly. After each accepted
/// step `on_accept(t, y, at_stop)` may re-project `y` in place.
pub fn integrate<F, G>(
    mut y: Vec<f64>,
    t0: f64,
    t_end: f64,
    stops: &[f64],
    controls: &OdeControls,
    mut rhs: F,
    mut on_accept: G,
) -> Result<(OdeStatus, OdeStats)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    G: FnMut(f64, &mut Vec<f64>, bool) -> Result<()>,
{
    let n = y.len();
    let mut stats = OdeStats {
        accepted: 0,
        rejected: 0,
        rhs_evals: 0,
    };
    let mut t = t0;
    if t_end <= t0 {
        return Ok((OdeStatus::Completed, stats));
    }
    let mut stop_iter = stops.iter().copied().filter(|&s| s > t0 && s < t_end).peekable();

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = rhs(t, &y)?;
    stats.rhs_evals += 1;

    let err_norm = |y0: &[f64], y1: &[f64], e: &[f64]| -> f64 {
        if n == 0 {
            return 0.0;
        }
        let s: f64 = (0..n)
            .map(|i| {
                let sc = controls.atol + controls.rtol * y0[i].abs().max(y1[i].abs());
                (e[i] / sc).powi(2)
            })
            .sum();
        (s / n as f64).sqrt()
    };

    // initial step (Hairer's heuristic)
    let mut h = {
        let d0 = err_norm(&y, &y, &y);
        let d1 = err_norm(&y, &y, &k[0]);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(t_end - t0).min(controls.max_step)
    };
    let mut err_prev: f64 = 1e-4;
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut evec = vec![0.0; n];

    loop {
        if stats.accepted + stats.rejected >= controls.max_steps {
            return Ok((OdeStatus::StepLimit { t }, stats));
        }
        let target = stop_iter.peek().copied().unwrap_or(t_end);
        let mut hit = false;
        if t + h >= target - 1e-14 * target.abs().max(1.0) {
            h = target - t;
            hit = true;
        }
        if h < controls.min_step && !hit {
            return Ok((OdeStatus::StepUnderflow { t, h }, stats));
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += h * A[s][r] * kr[i];
                }
                ytmp[i] = acc;
            }
            k[s] = rhs(t + C[s] * h, &ytmp)?;
            stats.rhs_evals += 1;
        }
        ynew.copy_from_slice(&ytmp);
        for i in 0..n {
            evec[i] = h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
        }
        let err = err_norm(&y, &ynew, &evec);
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            if h < controls.min_step {
                return Ok((OdeStatus::StepUnderflow { t, h }, stats));
            }
            continue;
        }

        if err <= 1.0 {
            let fac = if err == 0.0 {
                5.0
            } else {
                (SAFETY * err.powf(-ALPHA) * err_prev.powf(BETA)).clamp(0.2, 5.0)
            };
            err_prev = err.max(1e-4);
            t = if hit { target } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            stats.accepted += 1;
            let at_stop = hit && stop_iter.peek().is_some();
            if at_stop {
                stop_iter.next();
            }
            on_accept(t, &mut y, hit)?;
            if hit && t >= t_end {
                return Ok((OdeStatus::Completed, stats));
            }
            // state may have been re-projected: no FSAL reuse
            k[0] = rhs(t, &y)?;
            stats.rhs_evals += 1;
            h = (h * fac).min(controls.max_step);
        } else {
            stats.rejected += 1;
            h *= (SAFETY * err.powf(-ALPHA)).clamp(0.2, 1.0);
            if h < controls.min_step {
                return Ok((OdeStatus::StepUnderflow { t, h }, stats));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_hits_stops() {
        let mut seen = Vec::new();
        let (status, stats) = integrate(
            vec![1.0],
            0.0,
            2.0,
            &[0.5, 1.0],
            &OdeControls::default(),
            |_, y| Ok(vec![-y[0]]),
            |t, y, stop| {
                if stop {
                    seen.push((t, y[0]));
                }
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(status, OdeStatus::Completed);
        assert!(stats.accepted > 3);
        let times: Vec<f64> = seen.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.5, 1.0, 2.0]);
        for (t, v) in seen {
            assert!((v - (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn finite_time_blowup_underflows() {
        // y' = y², y(0) = 1 blows up at t = 1
        let (status, _) = integrate(
            vec![1.0],
            0.0,
            2.0,
            &[],
            &OdeControls::default(),
            |_, y| Ok(vec![y[0] * y[0]]),
            |_, _, _| Ok(()),
        )
        .unwrap();
        match status {
            OdeStatus::StepUnderflow { t, .. } => assert!((t - 1.0).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let run = |rtol: f64| {
            let mut last = 0.0;
            let c = OdeControls {
                rtol,
                atol: rtol * 1e-2,
                ..OdeControls::default()
            };
            integrate(
                vec![1.0, 0.0],
                0.0,
                10.0,
                &[],
                &c,
                |_, y| Ok(vec![y[1], -y[0]]),
                |_, y, _| {
                    last = y[0];
                    Ok(())
                },
            )
            .unwrap();
            (last - 10f64.cos()).abs()
        };
        assert!(run(1e-9) * 4.0 < run(1e-6));
    }
}
