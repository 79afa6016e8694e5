//! Adaptive Dormand-Prince 5(4) integration of scalar ODEs with event location.
//!
//! Every curve this crate integrates (adiabats in `V`, slides in `Theta`, join
//! adiabats along a straight work-coordinate path) reduces to one unknown, so
//! the solver is scalar.

use crate::error::{Error, Result};
use crate::numerics::roots::{brent, RootOptions};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t: f64,
    pub y: f64,
    /// Index of the event that stopped integration, if any.
    pub event: Option<usize>,
    /// Accepted step endpoints, starting with the initial point.
    pub points: Vec<(f64, f64)>,
}

/// A scalar event function; integration stops where it changes sign.
pub type Event<'a> = &'a dyn Fn(f64, f64) -> f64;

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
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince step; returns the fifth-order value and the error estimate.
fn step<F>(f: &F, t: f64, y: f64, h: f64) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let mut k = [0.0; 7];
    for i in 0..7 {
        let yi = y + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
        k[i] = f(t + C[i] * h, yi)?;
    }
    let y5 = y + h * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
    let err = h * (0..7).map(|j| E[j] * k[j]).sum::<f64>();
    Ok((y5, err))
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(
    f: F,
    t0: f64,
    y0: f64,
    t1: f64,
    opts: OdeOptions,
    events: &[Event<'_>],
) -> Result<OdeSolution>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let mut points = vec![(t0, y0)];
    if t0 == t1 {
        return Ok(OdeSolution {
            t: t0,
            y: y0,
            event: None,
            points,
        });
    }
    let span = t1 - t0;
    let dir = span.signum();
    let mut h = span / 64.0;
    let (mut t, mut y) = (t0, y0);
    let min_h = 1e-14 * t0.abs().max(t1.abs()).max(span.abs());
    let mut last_g: Vec<f64> = events.iter().map(|g| g(t, y)).collect();

    for _ in 0..opts.max_steps {
        if (t1 - t) * dir <= 0.0 {
            break;
        }
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        let (y_new, err) = match step(&f, t, y, h) {
            Ok(r) => r,
            Err(Error::Domain(_)) => {
                // A trial stage wandered outside where the system is defined.
                h *= 0.25;
                if h.abs() < min_h {
                    return Err(Error::StiffnessFailure { t });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let scale = opts.atol + opts.rtol * y.abs().max(y_new.abs());
        let ratio = err.abs() / scale;
        if !ratio.is_finite() || ratio > 1.0 {
            let fac = if ratio.is_finite() {
                (0.9 * ratio.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h *= fac;
            if h.abs() < min_h {
                return Err(Error::StiffnessFailure { t });
            }
            continue;
        }
        let t_new = if (t + h - t1).abs() <= f64::EPSILON * t1.abs() {
            t1
        } else {
            t + h
        };

        let mut hit: Option<(usize, f64, f64)> = None;
        for (idx, g) in events.iter().enumerate() {
            let g0 = last_g[idx];
            let g1 = g(t_new, y_new);
            if g0 != 0.0 && (g1 == 0.0 || g0.signum() != g1.signum()) {
                let (tt, yy) = locate(&f, g, t, y, t_new - t)?;
                if hit.is_none_or(|(_, th, _)| (tt - th) * dir < 0.0) {
                    hit = Some((idx, tt, yy));
                }
            }
        }
        if let Some((idx, tt, yy)) = hit {
            points.push((tt, yy));
            return Ok(OdeSolution {
                t: tt,
                y: yy,
                event: Some(idx),
                points,
            });
        }

        t = t_new;
        y = y_new;
        points.push((t, y));
        for (idx, g) in events.iter().enumerate() {
            last_g[idx] = g(t, y);
        }
        let fac = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= fac;
    }
    if (t1 - t) * dir > 0.0 {
        return Err(Error::StiffnessFailure { t });
    }
    Ok(OdeSolution {
        t,
        y,
        event: None,
        points,
    })
}

/// Finds the partial step length at which `g` vanishes.
fn locate<F>(f: &F, g: Event<'_>, t: f64, y: f64, h: f64) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let along = |s: f64| -> Result<f64> {
        if s == 0.0 {
            return Ok(y);
        }
        Ok(step(f, t, y, s)?.0)
    };
    let opts = RootOptions {
        xtol: 1e-15 * h.abs(),
        rtol: 2.0 * f64::EPSILON,
        max_iter: 200,
    };
    let s = brent(|s| Ok(g(t + s, along(s)?)), 0.0, h, opts)?;
    Ok((t + s, along(s)?))
}
