//! Absolute temperature, entropy, adiabats and thermal equilibrium derived from
//! an equation of state.
//!
//! Adiabats of a thermal join are integrated with the common empirical
//! temperature as the unknown. Along a straight path `V_j(tau)` in the work
//! coordinates, `dU + sum P_j dV_j = 0` with `U = sum lambda_j u_j(theta, V_j / lambda_j)`
//! gives
//!
//! ```text
//! dtheta/dtau = -sum_j (P_j + du_j/dv) dV_j/dtau / sum_j lambda_j du_j/dtheta
//! ```
//!
//! so the equilibrium split is carried by the state itself and never has to be
//! re-solved inside a step. A simple system is the join with one part.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::eos::{EosSpec, SimpleState, SpaceRegistry};
use crate::error::{Error, Result};
use crate::numerics::ode::{self, Event, OdeOptions};
use crate::numerics::quad::{self, QuadOptions};
use crate::numerics::roots::{brent, RootOptions};
use crate::numerics::MonotoneCubic;

/// Numerical tolerances shared by the derivation and the oracle.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub quad: QuadOptions,
    pub ode: OdeOptions,
    /// Relative energy tolerance for declaring two states equivalent.
    pub equality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quad: QuadOptions::default(),
            ode: OdeOptions::default(),
            equality: 1e-9,
        }
    }
}

// Entropy integrals feed finite-difference checks of 1/T, so they are held
// tighter than the user-facing quadrature tolerance.
const ENTROPY_QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-13,
    max_intervals: 500,
};

const T_REFINE_TOL: f64 = 1e-11;
const T_MAX_NODES: usize = 4097;

fn planck_integrand(spec: &EosSpec, theta: f64, v: f64) -> Result<f64> {
    let denominator = spec.planck_denominator(theta, v)?;
    if !(denominator > 0.0) {
        return Err(Error::SingularIntegrand { theta, denominator });
    }
    Ok(spec.p_theta(theta, v)? / denominator)
}

/// `ln(T(b) / T(a))` at volume `v`.
fn log_temperature_ratio(spec: &EosSpec, a: f64, b: f64, v: f64, opts: QuadOptions) -> Result<f64> {
    quad::integrate(|t| planck_integrand(spec, t, v), a, b, opts)
}

/// Absolute temperature by direct Planck quadrature from the anchor `(theta_0, T_0)`.
pub fn planck_temperature(spec: &EosSpec, theta: f64, v_probe: f64, anchor: (f64, f64)) -> Result<f64> {
    planck_temperature_with(spec, theta, v_probe, anchor, QuadOptions::default())
}

pub fn planck_temperature_with(
    spec: &EosSpec,
    theta: f64,
    v_probe: f64,
    anchor: (f64, f64),
    opts: QuadOptions,
) -> Result<f64> {
    spec.pressure(theta, v_probe)?;
    spec.pressure(anchor.0, v_probe)?;
    if !(anchor.1 > 0.0) {
        return Err(Error::Domain(format!("anchor temperature {} must be positive", anchor.1)));
    }
    Ok(anchor.1 * log_temperature_ratio(spec, anchor.0, theta, v_probe, opts)?.exp())
}

/// `T(theta)` tabulated on an adaptive grid and interpolated in `(ln theta, ln T)`.
#[derive(Debug, Clone)]
pub struct TemperatureMap {
    pub space_id: String,
    pub anchor: (f64, f64),
    range: (f64, f64),
    log_axis: bool,
    curve: MonotoneCubic,
}

impl TemperatureMap {
    pub fn build(spec: &EosSpec, opts: QuadOptions) -> Result<Self> {
        let (lo, hi) = spec.domain.theta;
        let v_probe = spec.reference.1;
        let anchor = spec.anchor;
        let log_axis = lo > 0.0;
        let to_x = |t: f64| if log_axis { t.ln() } else { t };
        let from_x = |x: f64| if log_axis { x.exp() } else { x };

        let mut thetas: Vec<f64> = (0..=32)
            .map(|i| from_x(to_x(lo) + (to_x(hi) - to_x(lo)) * i as f64 / 32.0))
            .collect();
        thetas[0] = lo;
        thetas[32] = hi;
        if !thetas.contains(&anchor.0) {
            thetas.push(anchor.0);
            thetas.sort_by(f64::total_cmp);
        }
        let k0 = thetas.iter().position(|&t| t == anchor.0).expect("anchor inserted");
        let mut logt = vec![0.0; thetas.len()];
        logt[k0] = anchor.1.ln();
        for k in k0 + 1..thetas.len() {
            logt[k] = logt[k - 1] + log_temperature_ratio(spec, thetas[k - 1], thetas[k], v_probe, opts)?;
        }
        for k in (0..k0).rev() {
            logt[k] = logt[k + 1] - log_temperature_ratio(spec, thetas[k], thetas[k + 1], v_probe, opts)?;
        }

        loop {
            let xs: Vec<f64> = thetas.iter().map(|&t| to_x(t)).collect();
            let curve = MonotoneCubic::new(xs.clone(), logt.clone())?;
            if thetas.len() >= T_MAX_NODES {
                return Ok(Self::finish(spec, anchor, log_axis, curve));
            }
            let mut inserts = Vec::new();
            for k in 0..thetas.len() - 1 {
                let xm = 0.5 * (xs[k] + xs[k + 1]);
                let tm = from_x(xm);
                let exact = logt[k] + log_temperature_ratio(spec, thetas[k], tm, v_probe, opts)?;
                if (curve.eval(xm) - exact).abs() > T_REFINE_TOL {
                    inserts.push((tm, exact));
                }
            }
            if inserts.is_empty() {
                return Ok(Self::finish(spec, anchor, log_axis, curve));
            }
            let mut merged: Vec<(f64, f64)> = thetas.into_iter().zip(logt).chain(inserts).collect();
            merged.sort_by(|a, b| a.0.total_cmp(&b.0));
            merged.truncate(T_MAX_NODES);
            (thetas, logt) = merged.into_iter().unzip();
        }
    }

    fn finish(spec: &EosSpec, anchor: (f64, f64), log_axis: bool, curve: MonotoneCubic) -> Self {
        Self {
            space_id: spec.id().to_string(),
            anchor,
            range: spec.domain.theta,
            log_axis,
            curve,
        }
    }

    fn x(&self, theta: f64) -> f64 {
        if self.log_axis {
            theta.ln()
        } else {
            theta
        }
    }

    pub fn theta_range(&self) -> (f64, f64) {
        self.range
    }

    pub fn temperature(&self, theta: f64) -> Result<f64> {
        if !(theta >= self.range.0 && theta <= self.range.1) {
            return Err(Error::OutOfRange {
                value: theta,
                lo: self.range.0,
                hi: self.range.1,
            });
        }
        Ok(self.temperature_unchecked(theta))
    }

    pub(crate) fn temperature_unchecked(&self, theta: f64) -> f64 {
        self.curve.eval(self.x(theta)).exp()
    }

    /// `dT/dtheta` of the interpolant.
    pub fn slope(&self, theta: f64) -> f64 {
        let dx = if self.log_axis { 1.0 / theta } else { 1.0 };
        self.temperature_unchecked(theta) * self.curve.derivative(self.x(theta)) * dx
    }

    pub fn theta_of_temperature(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.range;
        let (tlo, thi) = (self.temperature_unchecked(lo), self.temperature_unchecked(hi));
        if !(t >= tlo && t <= thi) {
            return Err(Error::OutOfRange { value: t, lo: tlo, hi: thi });
        }
        brent(|th| Ok(self.temperature_unchecked(th) - t), lo, hi, RootOptions::default())
    }

    /// Grid nodes as `(theta, T)`.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        self.curve
            .xs()
            .iter()
            .zip(self.curve.ys())
            .map(|(&x, &y)| (if self.log_axis { x.exp() } else { x }, y.exp()))
            .collect()
    }
}

/// Entropy of one space, `S(lambda X) = lambda (a s(X / lambda) + b)`.
///
/// `s` is evaluated by quadrature along the reference isotherm and then the
/// isochore through the state.
#[derive(Debug, Clone)]
pub struct EntropyFn {
    spec: EosSpec,
    temperature: TemperatureMap,
    pub a: f64,
    pub b: f64,
    log_v: bool,
    log_theta: bool,
}

pub fn derive_entropy(spec: &EosSpec, temperature: &TemperatureMap) -> Result<EntropyFn> {
    if temperature.space_id != spec.id() {
        return Err(Error::InvalidSpec(format!(
            "temperature map of `{}` used for `{}`",
            temperature.space_id,
            spec.id()
        )));
    }
    Ok(EntropyFn {
        log_v: spec.domain.v.0 > 0.0,
        log_theta: spec.domain.theta.0 > 0.0,
        spec: spec.clone(),
        temperature: temperature.clone(),
        a: 1.0,
        b: 0.0,
    })
}

/// Integrates `f` over `[a, b]`, substituting `x = ln t` when both ends are positive.
fn integrate_positive<F>(mut f: F, a: f64, b: f64, log: bool, opts: QuadOptions) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if log {
        quad::integrate(
            |x| {
                let t = x.exp();
                Ok(f(t)? * t)
            },
            a.ln(),
            b.ln(),
            opts,
        )
    } else {
        quad::integrate(f, a, b, opts)
    }
}

impl EntropyFn {
    pub fn derive(spec: &EosSpec, opts: QuadOptions) -> Result<Self> {
        derive_entropy(spec, &TemperatureMap::build(spec, opts)?)
    }

    pub fn spec(&self) -> &EosSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        self.spec.id()
    }

    pub fn temperature_map(&self) -> &TemperatureMap {
        &self.temperature
    }

    pub fn temperature(&self, theta: f64) -> Result<f64> {
        self.temperature.temperature(theta)
    }

    /// Uncalibrated entropy per unit matter at `(theta, v)`.
    pub fn raw(&self, theta: f64, v: f64) -> Result<f64> {
        self.spec.energy(theta, v)?;
        let (theta0, v0) = self.spec.reference;
        let t0 = self.temperature.temperature_unchecked(theta0);
        let isotherm = integrate_positive(
            |w| Ok(self.spec.planck_denominator(theta0, w)? / t0),
            v0,
            v,
            self.log_v,
            ENTROPY_QUAD,
        )?;
        let isochore = integrate_positive(
            |t| Ok(self.spec.u_theta(t, v)? / self.temperature.temperature_unchecked(t)),
            theta0,
            theta,
            self.log_theta,
            ENTROPY_QUAD,
        )?;
        Ok(self.spec.reference_entropy + isotherm + isochore)
    }

    pub fn raw_uv(&self, u: f64, v: f64) -> Result<f64> {
        self.raw(self.spec.theta_from_energy(u, v)?, v)
    }

    /// Calibrated entropy per unit matter.
    pub fn per_unit(&self, theta: f64, v: f64) -> Result<f64> {
        Ok(self.a * self.raw(theta, v)? + self.b)
    }

    pub fn of_state(&self, state: &SimpleState) -> Result<f64> {
        let (u, v) = state.intensive();
        Ok(state.scale * (self.a * self.raw_uv(u, v)? + self.b))
    }

    /// Uncalibrated extensive entropy `lambda s(X / lambda)`.
    pub fn raw_of_state(&self, state: &SimpleState) -> Result<f64> {
        let (u, v) = state.intensive();
        Ok(state.scale * self.raw_uv(u, v)?)
    }

    pub fn with_constants(mut self, a: f64, b: f64) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    /// Tabulates calibrated entropy on a grid refined until interpolation
    /// reproduces midpoints within `rel_tol` (or the grid reaches 257 per axis).
    pub fn table(&self, rel_tol: f64) -> Result<EntropyTable> {
        let axis = |lo: f64, hi: f64, log: bool, n: usize| -> Vec<f64> {
            let mut out: Vec<f64> = (0..n)
                .map(|i| {
                    let f = i as f64 / (n - 1) as f64;
                    if log {
                        (lo.ln() + (hi.ln() - lo.ln()) * f).exp()
                    } else {
                        lo + (hi - lo) * f
                    }
                })
                .collect();
            out[0] = lo;
            out[n - 1] = hi;
            out
        };
        let (tlo, thi) = self.spec.domain.theta;
        let (vlo, vhi) = self.spec.domain.v;
        let mut n = 17;
        loop {
            let thetas = axis(tlo, thi, self.log_theta, n);
            let vs = axis(vlo, vhi, self.log_v, n);
            let values = thetas
                .par_iter()
                .map(|&t| vs.iter().map(|&v| self.per_unit(t, v)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let table = EntropyTable::new(thetas, vs, values, self.log_theta, self.log_v)?;
            let fine_t = axis(tlo, thi, self.log_theta, 2 * n - 1);
            let fine_v = axis(vlo, vhi, self.log_v, 2 * n - 1);
            let worst = (1..fine_t.len())
                .step_by(2)
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&i| {
                    let mut worst = 0.0f64;
                    for j in (1..fine_v.len()).step_by(2) {
                        let exact = self.per_unit(fine_t[i], fine_v[j])?;
                        let approx = table.eval(fine_t[i], fine_v[j])?;
                        worst = worst.max((approx - exact).abs() / exact.abs().max(1.0));
                    }
                    Ok(worst)
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            if worst <= rel_tol || n >= 257 {
                return Ok(table);
            }
            n = 2 * n - 1;
        }
    }
}

/// Entropy sampled on a `(theta, v)` grid.
#[derive(Debug, Clone)]
pub struct EntropyTable {
    pub thetas: Vec<f64>,
    pub vs: Vec<f64>,
    /// `values[i][j]` is the entropy per unit at `(thetas[i], vs[j])`.
    pub values: Vec<Vec<f64>>,
    log_theta: bool,
    log_v: bool,
    rows: Vec<MonotoneCubic>,
}

impl EntropyTable {
    pub fn new(thetas: Vec<f64>, vs: Vec<f64>, values: Vec<Vec<f64>>, log_theta: bool, log_v: bool) -> Result<Self> {
        let xv: Vec<f64> = vs.iter().map(|&v| if log_v { v.ln() } else { v }).collect();
        let rows = values
            .iter()
            .map(|row| MonotoneCubic::new(xv.clone(), row.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            thetas,
            vs,
            values,
            log_theta,
            log_v,
            rows,
        })
    }

    /// Interpolates along `v` in each row, then along `theta`.
    pub fn eval(&self, theta: f64, v: f64) -> Result<f64> {
        let pv = if self.log_v { v.ln() } else { v };
        let column: Vec<f64> = self.rows.iter().map(|r| r.eval(pv)).collect();
        let xt: Vec<f64> = self
            .thetas
            .iter()
            .map(|&t| if self.log_theta { t.ln() } else { t })
            .collect();
        let pt = if self.log_theta { theta.ln() } else { theta };
        Ok(MonotoneCubic::new(xt, column)?.eval(pt))
    }
}

/// Temperature maps and entropies of every space in a registry.
#[derive(Debug, Clone, Default)]
pub struct DerivedRegistry {
    spaces: BTreeMap<String, EntropyFn>,
    pub tolerances: Tolerances,
}

impl DerivedRegistry {
    pub fn derive(registry: &SpaceRegistry) -> Result<Self> {
        Self::derive_with(registry, Tolerances::default())
    }

    pub fn derive_with(registry: &SpaceRegistry, tolerances: Tolerances) -> Result<Self> {
        let specs: Vec<&EosSpec> = registry.iter().collect();
        let derived = specs
            .par_iter()
            .map(|s| EntropyFn::derive(s, tolerances.quad))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spaces: derived.into_iter().map(|e| (e.id().to_string(), e)).collect(),
            tolerances,
        })
    }

    pub fn get(&self, id: &str) -> Result<&EntropyFn> {
        self.spaces.get(id).ok_or_else(|| Error::UnknownSpace(id.to_string()))
    }

    pub fn spec(&self, id: &str) -> Result<&EosSpec> {
        Ok(self.get(id)?.spec())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.spaces.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntropyFn> {
        self.spaces.values()
    }

    pub fn insert(&mut self, entropy: EntropyFn) {
        self.spaces.insert(entropy.id().to_string(), entropy);
    }

    /// Uncalibrated extensive entropy of a simple state.
    pub fn raw_entropy(&self, state: &SimpleState) -> Result<f64> {
        self.get(&state.space)?.raw_of_state(state)
    }
}

/// One component of a thermal join: a scaled copy with extensive volume.
#[derive(Debug, Clone, Copy)]
pub struct JoinPart<'a> {
    pub spec: &'a EosSpec,
    pub scale: f64,
    pub volume: f64,
}

impl<'a> JoinPart<'a> {
    pub fn new(spec: &'a EosSpec, scale: f64, volume: f64) -> Self {
        Self { spec, scale, volume }
    }

    fn v(&self) -> f64 {
        self.volume / self.scale
    }
}

fn common_theta_range(parts: &[JoinPart<'_>]) -> (f64, f64) {
    parts.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), p| {
        (lo.max(p.spec.domain.theta.0), hi.min(p.spec.domain.theta.1))
    })
}

fn total_energy(parts: &[JoinPart<'_>], theta: f64) -> Result<f64> {
    parts.iter().map(|p| Ok(p.scale * p.spec.u(theta, p.v())?)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub theta: f64,
    /// Extensive energy of each part at the common temperature.
    pub energies: Vec<f64>,
}

/// Splits `u_total` over the parts so that they share one empirical temperature.
pub fn equilibrate(parts: &[JoinPart<'_>], u_total: f64) -> Result<Equilibrium> {
    if parts.is_empty() {
        return Err(Error::InvalidSpec("empty thermal join".into()));
    }
    for p in parts {
        let v = p.v();
        if !(p.scale > 0.0) || !(v >= p.spec.domain.v.0 && v <= p.spec.domain.v.1) {
            return Err(Error::Domain(format!(
                "{}: scale {} and volume {} put v = {v} outside the domain",
                p.spec.id(),
                p.scale,
                p.volume
            )));
        }
    }
    let (lo, hi) = common_theta_range(parts);
    if lo > hi {
        return Err(Error::UnreachableTemperature { lo, hi });
    }
    let (elo, ehi) = (total_energy(parts, lo)?, total_energy(parts, hi)?);
    if !(u_total >= elo && u_total <= ehi) {
        return Err(Error::OutOfRange {
            value: u_total,
            lo: elo,
            hi: ehi,
        });
    }
    let theta = brent(|t| Ok(total_energy(parts, t)? - u_total), lo, hi, RootOptions::default())?;
    let energies = parts
        .iter()
        .map(|p| Ok(p.scale * p.spec.u(theta, p.v())?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Equilibrium { theta, energies })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdiabatPoint {
    pub volumes: Vec<f64>,
    pub theta: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdiabatCurve {
    pub label: String,
    pub points: Vec<AdiabatPoint>,
}

impl AdiabatCurve {
    pub fn end(&self) -> &AdiabatPoint {
        self.points.last().expect("curve has a start point")
    }

    pub fn end_energy(&self) -> f64 {
        self.end().energy
    }
}

fn join_label(parts: &[JoinPart<'_>]) -> String {
    parts
        .iter()
        .map(|p| {
            if p.scale == 1.0 {
                p.spec.id().to_string()
            } else {
                format!("{}*{}", p.scale, p.spec.id())
            }
        })
        .collect::<Vec<_>>()
        .join("+")
}

/// Integrates the adiabat of the join from total energy `u_start` to the work
/// coordinates `targets` along the straight line between them.
pub fn adiabat_integrate(
    parts: &[JoinPart<'_>],
    u_start: f64,
    targets: &[f64],
    opts: OdeOptions,
) -> Result<AdiabatCurve> {
    if targets.len() != parts.len() {
        return Err(Error::InvalidSpec(format!(
            "{} target volumes for {} components",
            targets.len(),
            parts.len()
        )));
    }
    let start = equilibrate(parts, u_start)?;
    for (p, &t) in parts.iter().zip(targets) {
        let v = t / p.scale;
        if !(v >= p.spec.domain.v.0 && v <= p.spec.domain.v.1) {
            return Err(Error::LeftDomain {
                coords: targets.to_vec(),
            });
        }
    }
    let deltas: Vec<f64> = parts.iter().zip(targets).map(|(p, &t)| t - p.volume).collect();
    let volumes_at = |tau: f64| -> Vec<f64> {
        parts
            .iter()
            .zip(&deltas)
            .map(|(p, d)| if tau == 1.0 { p.volume + d } else { p.volume + tau * d })
            .collect()
    };
    let rhs = |tau: f64, theta: f64| -> Result<f64> {
        let mut work = 0.0;
        let mut capacity = 0.0;
        for (p, d) in parts.iter().zip(&deltas) {
            let v = (p.volume + tau * d) / p.scale;
            work += p.spec.planck_denominator(theta, v)? * d;
            capacity += p.scale * p.spec.u_theta(theta, v)?;
        }
        if !(capacity > 0.0) {
            return Err(Error::Domain(format!("heat capacity {capacity} at theta = {theta}")));
        }
        Ok(-work / capacity)
    };
    if deltas.iter().all(|&d| d == 0.0) {
        return Ok(AdiabatCurve {
            label: join_label(parts),
            points: vec![AdiabatPoint {
                volumes: volumes_at(0.0),
                theta: start.theta,
                energy: u_start,
            }],
        });
    }
    let (lo, hi) = common_theta_range(parts);
    let below = move |_t: f64, th: f64| th - lo;
    let above = move |_t: f64, th: f64| hi - th;
    let events: [Event<'_>; 2] = [&below, &above];
    let sol = ode::integrate(rhs, 0.0, start.theta, 1.0, opts, &events)?;
    if sol.event.is_some() {
        let mut coords = volumes_at(sol.t);
        coords.push(sol.y);
        return Err(Error::LeftDomain { coords });
    }
    let points = sol
        .points
        .iter()
        .map(|&(tau, theta)| {
            let volumes = volumes_at(tau);
            let energy = parts
                .iter()
                .zip(&volumes)
                .map(|(p, &vol)| Ok(p.scale * p.spec.u(theta, vol / p.scale)?))
                .sum::<Result<f64>>()?;
            Ok(AdiabatPoint {
                volumes,
                theta,
                energy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AdiabatCurve {
        label: join_label(parts),
        points,
    })
}

/// Adiabat of a single scaled simple system from `(U, V)` to volume `v_target`.
pub fn adiabat_simple(
    spec: &EosSpec,
    scale: f64,
    energy: f64,
    volume: f64,
    v_target: f64,
    opts: OdeOptions,
) -> Result<AdiabatCurve> {
    adiabat_integrate(&[JoinPart::new(spec, scale, volume)], energy, &[v_target], opts)
}

/// Samples the adiabat at each of `targets` (extensive volumes) in order.
pub fn adiabat_trace(
    spec: &EosSpec,
    scale: f64,
    energy: f64,
    volume: f64,
    targets: &[f64],
    opts: OdeOptions,
) -> Result<Vec<(f64, f64)>> {
    let mut out = vec![(volume, energy)];
    let (mut u, mut v) = (energy, volume);
    for &t in targets {
        u = adiabat_simple(spec, scale, u, v, t, opts)?.end_energy();
        v = t;
        out.push((v, u));
    }
    Ok(out)
}

/// `dtheta/dx` along an adiabat of one simple system, with `x = ln v` when `log`.
fn slide_rhs(spec: &EosSpec, log: bool) -> impl Fn(f64, f64) -> Result<f64> + '_ {
    move |x: f64, theta: f64| {
        let v = if log { x.exp() } else { x };
        let d = -spec.planck_denominator(theta, v)? / spec.u_theta(theta, v)?;
        Ok(if log { d * v } else { d })
    }
}

fn slide_axis(spec: &EosSpec) -> (bool, impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let log = spec.domain.v.0 > 0.0;
    (
        log,
        move |v: f64| if log { v.ln() } else { v },
        move |x: f64| if log { x.exp() } else { x },
    )
}

/// Empirical temperatures reachable from `(theta, v)` along its adiabat within the domain.
pub fn reachable_theta_range(spec: &EosSpec, theta: f64, v: f64, opts: OdeOptions) -> Result<(f64, f64)> {
    spec.energy(theta, v)?;
    let (tlo, thi) = spec.domain.theta;
    let (log, to_x, _) = slide_axis(spec);
    let rhs = slide_rhs(spec, log);
    let below = move |_x: f64, th: f64| th - tlo;
    let above = move |_x: f64, th: f64| thi - th;
    // Theta falls as v grows along an adiabat.
    let lo = match ode::integrate(&rhs, to_x(v), theta, to_x(spec.domain.v.1), opts, &[&below]) {
        Ok(sol) if sol.event.is_some() => tlo,
        Ok(sol) => sol.y.max(tlo),
        Err(e) => return Err(e),
    };
    let hi = match ode::integrate(&rhs, to_x(v), theta, to_x(spec.domain.v.0), opts, &[&above]) {
        Ok(sol) if sol.event.is_some() => thi,
        Ok(sol) => sol.y.min(thi),
        Err(e) => return Err(e),
    };
    Ok((lo.min(theta), hi.max(theta)))
}

/// Volume per unit at which the adiabat through `(theta, v)` reaches `theta_star`.
pub fn slide_to_theta(spec: &EosSpec, theta: f64, v: f64, theta_star: f64, opts: OdeOptions) -> Result<f64> {
    if theta == theta_star {
        return Ok(v);
    }
    let (log, to_x, from_x) = slide_axis(spec);
    let end = if theta_star < theta {
        spec.domain.v.1
    } else {
        spec.domain.v.0
    };
    let (tlo, thi) = spec.domain.theta;
    let hit = move |_x: f64, th: f64| th - theta_star;
    let below = move |_x: f64, th: f64| th - tlo;
    let above = move |_x: f64, th: f64| thi - th;
    let sol = ode::integrate(slide_rhs(spec, log), to_x(v), theta, to_x(end), opts, &[&hit, &below, &above])?;
    match sol.event {
        Some(0) => Ok(from_x(sol.t).clamp(spec.domain.v.0, spec.domain.v.1)),
        None if sol.y == theta_star => Ok(end),
        _ => Err(Error::UnreachableTemperature {
            lo: sol.y.min(theta),
            hi: sol.y.max(theta),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsothermPoint {
    pub v: f64,
    pub u: f64,
    pub p: f64,
    pub s: f64,
}

/// Per-unit `(V, U, P, S)` at fixed `theta`, sampled uniformly over `v_range`.
pub fn isotherm_trace(
    entropy: &EntropyFn,
    theta: f64,
    v_range: (f64, f64),
    samples: usize,
) -> Result<Vec<IsothermPoint>> {
    let spec = entropy.spec();
    let n = samples.max(1);
    (0..n)
        .map(|i| {
            let v = if n == 1 {
                v_range.0
            } else {
                v_range.0 + (v_range.1 - v_range.0) * i as f64 / (n - 1) as f64
            };
            Ok(IsothermPoint {
                v,
                u: spec.energy(theta, v)?,
                p: spec.pressure(theta, v)?,
                s: entropy.per_unit(theta, v)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::Units;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reduced() -> DerivedRegistry {
        DerivedRegistry::derive(&SpaceRegistry::bundled(Units::Reduced)).unwrap()
    }

    fn si() -> SpaceRegistry {
        SpaceRegistry::bundled(Units::Si)
    }

    // Closed-form entropy oracles (R = 1, c = 1.5, reference (1, 1), s_ref = 0).
    fn ideal_s(theta: f64, v: f64) -> f64 {
        1.5 * theta.ln() + v.ln()
    }

    fn vdw_s(theta: f64, v: f64) -> f64 {
        1.5 * theta.ln() + ((v - 0.02) / (1.0 - 0.02)).ln()
    }

    #[test]
    fn planck_reduces_to_theta_for_ideal_gas() {
        let reg = si();
        let spec = reg.get("ideal_gas").unwrap();
        let t = planck_temperature(spec, 600.0, 0.02, (300.0, 300.0)).unwrap();
        assert!((t - 600.0).abs() < 1e-8);
        assert_eq!(planck_temperature(spec, 300.0, 0.02, (300.0, 300.0)).unwrap(), 300.0);
    }

    #[test]
    fn planck_reduces_to_theta_for_van_der_waals() {
        let reg = si();
        let spec = reg.get("van_der_waals").unwrap();
        let t = planck_temperature(spec, 450.0, 0.005, (300.0, 300.0)).unwrap();
        assert!((t - 450.0).abs() < 1e-8);
    }

    #[test]
    fn planck_is_independent_of_the_probe_volume() {
        let reg = si();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in reg.iter() {
            for _ in 0..20 {
                let theta = rng.gen_range(100.0..1000.0);
                let v1 = rng.gen_range(1e-3..0.1);
                let v2 = rng.gen_range(1e-3..0.1);
                let a = planck_temperature(spec, theta, v1, spec.anchor).unwrap();
                let b = planck_temperature(spec, theta, v2, spec.anchor).unwrap();
                assert!(((a - b) / a).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn singular_integrand_is_reported() {
        let reg = SpaceRegistry::from_json(
            r#"{"spaces":[{"id":"bad","U":"theta + 2*v","P":"theta/v","constants":{},
            "domain":{"theta":[1,10],"v":[1,10]},"reference":{"theta":2,"v":2}}]}"#,
        )
        .unwrap();
        let spec = reg.get("bad").unwrap();
        // P + dU/dv = theta/v + 2 > 0, so make a negative one instead
        assert!(planck_temperature(spec, 5.0, 2.0, (2.0, 2.0)).is_ok());
        let reg = SpaceRegistry::from_json(
            r#"{"spaces":[{"id":"bad","U":"theta - 20*v","P":"theta/v","constants":{},
            "domain":{"theta":[1,10],"v":[1,10]},"reference":{"theta":2,"v":2}}]}"#,
        )
        .unwrap();
        assert!(matches!(
            planck_temperature(reg.get("bad").unwrap(), 5.0, 2.0, (2.0, 2.0)),
            Err(Error::SingularIntegrand { .. })
        ));
    }

    #[test]
    fn temperature_map_is_anchored_and_increasing() {
        let mut reg = SpaceRegistry::bundled(Units::Reduced);
        let mut decl = reg.get("vdw_reduced").unwrap().decl().clone();
        decl.id = "vdw_anchored".into();
        decl.anchor = Some(crate::eos::AnchorDecl {
            theta: 1.0,
            temperature: 2.0,
        });
        reg.insert(EosSpec::new(decl).unwrap()).unwrap();
        let derived = DerivedRegistry::derive(&reg).unwrap();
        for e in derived.iter() {
            let map = e.temperature_map();
            let (t0, big_t0) = map.anchor;
            assert!((map.temperature(t0).unwrap() - big_t0).abs() < 1e-12 * big_t0);
            let nodes = map.nodes();
            assert!(nodes.windows(2).all(|w| w[1].1 > w[0].1 && w[0].1 > 0.0));
            let ratio = big_t0 / t0;
            for &(theta, t) in &nodes {
                assert!((t - ratio * theta).abs() <= 1e-9 * t);
            }
            let back = map.theta_of_temperature(ratio * 3.3).unwrap();
            assert!((back - 3.3).abs() < 1e-9);
        }
        assert!(derived.get("ideal_reduced").unwrap().temperature(100.0).is_err());
    }

    #[test]
    fn curved_temperature_scale_is_refined() {
        // U = theta^2 / 2, P = theta^2 / v: T grows like theta^2, not linearly.
        let reg = SpaceRegistry::from_json(
            r#"{"spaces":[{"id":"q","U":"theta^2/2","P":"theta^2/v","constants":{},
            "domain":{"theta":[0.5,5],"v":[0.1,10]},"reference":{"theta":1,"v":1}}]}"#,
        )
        .unwrap();
        let spec = reg.get("q").unwrap();
        let map = TemperatureMap::build(spec, QuadOptions::default()).unwrap();
        for k in 0..50 {
            let theta = 0.5 + 4.5 * k as f64 / 49.0;
            let exact = planck_temperature(spec, theta, 1.0, (1.0, 1.0)).unwrap();
            assert!((map.temperature(theta).unwrap() - exact).abs() < 1e-10 * exact);
            // integrand is 2/theta, so T = theta^2
            assert!((exact - theta * theta).abs() < 1e-8 * exact);
        }
    }

    #[test]
    fn isothermal_doubling_gives_ln2() {
        let derived = reduced();
        let e = derived.get("ideal_reduced").unwrap();
        let ds = e.raw(1.7, 2.0).unwrap() - e.raw(1.7, 1.0).unwrap();
        assert!((ds - std::f64::consts::LN_2).abs() < 1e-10);
        assert_eq!(e.raw(1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn entropy_matches_closed_forms() {
        let derived = reduced();
        let ideal = derived.get("ideal_reduced").unwrap();
        let vdw = derived.get("vdw_reduced").unwrap();
        for &(t, v) in &[(0.5, 0.2), (3.0, 40.0), (9.0, 999.0), (1.0, 1.0)] {
            assert!((ideal.raw(t, v).unwrap() - ideal_s(t, v)).abs() < 1e-10);
            assert!((vdw.raw(t, v).unwrap() - vdw_s(t, v)).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_is_path_independent() {
        let derived = reduced();
        for e in derived.iter() {
            let spec = e.spec();
            let (theta0, v0) = spec.reference;
            let (theta, v) = (4.2, 17.0);
            // isochore at v0 first, then the isotherm at theta
            let isochore = quad::integrate(
                |t| Ok(spec.u_theta(t, v0)? / e.temperature(t)?),
                theta0,
                theta,
                ENTROPY_QUAD,
            )
            .unwrap();
            let t = e.temperature(theta).unwrap();
            let isotherm = integrate_positive(
                |w| Ok(spec.planck_denominator(theta, w)? / t),
                v0,
                v,
                true,
                ENTROPY_QUAD,
            )
            .unwrap();
            let rectangle = spec.reference_entropy + isochore + isotherm;
            assert!((rectangle - e.raw(theta, v).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn inverse_temperature_is_entropy_slope() {
        let derived = reduced();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for e in derived.iter() {
            let spec = e.spec();
            for _ in 0..100 {
                let theta = rng.gen_range(spec.domain.theta.0 * 1.1..spec.domain.theta.1 * 0.9);
                let v = rng.gen_range(spec.domain.v.0 * 1.1..spec.domain.v.1 * 0.9);
                let u = spec.energy(theta, v).unwrap();
                let h = 1e-5 * u.abs();
                let ds = (e.raw_uv(u + h, v).unwrap() - e.raw_uv(u - h, v).unwrap()) / (2.0 * h);
                let inv_t = 1.0 / e.temperature(theta).unwrap();
                assert!(((ds - inv_t) / inv_t).abs() < 1e-5, "{} at ({theta}, {v})", e.id());
            }
        }
    }

    #[test]
    fn entropy_is_concave_and_increasing_in_energy() {
        let derived = reduced();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for e in derived.iter() {
            let spec = e.spec();
            let draw = |rng: &mut ChaCha8Rng| {
                let t = rng.gen_range(spec.domain.theta.0..spec.domain.theta.1);
                let v = (rng.gen_range(spec.domain.v.0.ln()..spec.domain.v.1.ln())).exp();
                (spec.energy(t, v).unwrap(), v)
            };
            let mut checked = 0;
            while checked < 500 {
                let (x, y) = (draw(&mut rng), draw(&mut rng));
                for t in [0.25, 0.5, 0.75] {
                    let m = (t * x.0 + (1.0 - t) * y.0, t * x.1 + (1.0 - t) * y.1);
                    if !spec.contains_uv(m.0, m.1) {
                        continue;
                    }
                    let lhs = e.raw_uv(m.0, m.1).unwrap();
                    let rhs = t * e.raw_uv(x.0, x.1).unwrap() + (1.0 - t) * e.raw_uv(y.0, y.1).unwrap();
                    assert!(lhs >= rhs - 1e-9);
                }
                checked += 1;
                assert!(e.raw_uv(x.0 * 1.0001, x.1).unwrap_or(f64::INFINITY) > e.raw_uv(x.0, x.1).unwrap());
            }
        }
    }

    #[test]
    fn entropy_is_extensive() {
        let derived = reduced();
        let e = derived.get("ideal_reduced").unwrap();
        let x = SimpleState::from_intensive("ideal_reduced", 1.0, 2.0, 3.0);
        let s1 = e.of_state(&x).unwrap();
        let s3 = e.of_state(&x.scaled(3.0)).unwrap();
        assert!((s3 - 3.0 * s1).abs() < 1e-12);
        let shifted = e.clone().with_constants(2.0, 0.5);
        assert!((shifted.of_state(&x.scaled(3.0)).unwrap() - 3.0 * (2.0 * s1 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn entropy_table_meets_its_refinement_target() {
        let derived = reduced();
        let e = derived.get("vdw_reduced").unwrap();
        let table = e.table(1e-6).unwrap();
        for &(t, v) in &[(0.7, 0.3), (3.3, 55.0), (12.0, 1500.0)] {
            let exact = e.per_unit(t, v).unwrap();
            assert!((table.eval(t, v).unwrap() - exact).abs() <= 1e-6 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn ideal_adiabat_closed_form() {
        let derived = reduced();
        let spec = derived.spec("ideal_reduced").unwrap();
        // U = 1 means theta = 2/3
        let curve = adiabat_simple(spec, 1.0, 1.0, 1.0, 8.0, OdeOptions::default()).unwrap();
        assert!((curve.end_energy() - 0.25).abs() < 1e-9 * 0.25);
        for p in &curve.points {
            let inv = p.energy * p.volumes[0].powf(2.0 / 3.0);
            assert!((inv - 1.0).abs() < 1e-9);
        }
        let same = adiabat_simple(spec, 1.0, 1.0, 1.0, 1.0, OdeOptions::default()).unwrap();
        assert_eq!(same.end_energy(), 1.0);
        assert_eq!(same.points.len(), 1);
    }

    #[test]
    fn van_der_waals_first_integral() {
        let derived = reduced();
        let spec = derived.spec("vdw_reduced").unwrap();
        let (a, b) = (0.05, 0.02);
        let inv = |u: f64, v: f64| (u + a / v) * (v - b).powf(1.0 / 1.5);
        let u0 = spec.energy(15.0, 0.5).unwrap();
        let targets: Vec<f64> = (1..100).map(|k| 0.5 + 49.5 * k as f64 / 99.0).collect();
        let curve = adiabat_trace(spec, 1.0, u0, 0.5, &targets, OdeOptions::default()).unwrap();
        assert_eq!(curve.len(), 100);
        let start = inv(u0, 0.5);
        for &(v, u) in &curve {
            assert!(((inv(u, v) - start) / start).abs() < 1e-8);
        }
    }

    #[test]
    fn adiabat_that_leaves_the_domain_is_reported() {
        let derived = reduced();
        let spec = derived.spec("ideal_reduced").unwrap();
        // theta 0.2 at v = 1 falls below 0.1 once v exceeds 2^(3/2)
        let u = spec.energy(0.2, 1.0).unwrap();
        assert!(matches!(
            adiabat_simple(spec, 1.0, u, 1.0, 100.0, OdeOptions::default()),
            Err(Error::LeftDomain { .. })
        ));
        assert!(matches!(
            adiabat_simple(spec, 1.0, 1.0, 1.0, 5000.0, OdeOptions::default()),
            Err(Error::LeftDomain { .. })
        ));
    }

    #[test]
    fn adiabats_are_entropy_level_sets() {
        let derived = reduced();
        for e in derived.iter() {
            let spec = e.spec();
            let u0 = spec.energy(8.0, 0.6).unwrap();
            let curve = adiabat_simple(spec, 2.0, 2.0 * u0, 1.2, 10.0, OdeOptions::default()).unwrap();
            let s0 = e.raw(8.0, 0.6).unwrap();
            let mut smin = f64::INFINITY;
            let mut smax = f64::NEG_INFINITY;
            let mut worst = 0.0f64;
            for p in &curve.points {
                let s = e.raw(p.theta, p.volumes[0] / 2.0).unwrap();
                worst = worst.max((s - s0).abs());
            }
            for k in 0..20 {
                let t = spec.domain.theta.0 + (spec.domain.theta.1 - spec.domain.theta.0) * k as f64 / 19.0;
                let s = e.raw(t, 0.6).unwrap();
                smin = smin.min(s);
                smax = smax.max(s);
            }
            assert!(worst <= 1e-6 * (smax - smin), "{}: {worst}", e.id());
        }
    }

    #[test]
    fn join_adiabat_conserves_total_entropy() {
        let derived = reduced();
        let ideal = derived.get("ideal_reduced").unwrap();
        let vdw = derived.get("vdw_reduced").unwrap();
        let parts = [JoinPart::new(ideal.spec(), 1.0, 2.0), JoinPart::new(vdw.spec(), 0.5, 1.0)];
        let u = ideal.spec().energy(3.0, 2.0).unwrap() + 0.5 * vdw.spec().energy(3.0, 2.0).unwrap();
        let curve = adiabat_integrate(&parts, u, &[20.0, 3.0], OdeOptions::default()).unwrap();
        let end = curve.end();
        let s = |theta: f64, vols: &[f64]| {
            ideal.raw(theta, vols[0]).unwrap() + 0.5 * vdw.raw(theta, vols[1] / 0.5).unwrap()
        };
        assert!((s(end.theta, &end.volumes) - s(3.0, &[2.0, 1.0])).abs() < 1e-8);
        assert_eq!(curve.label, "ideal_reduced+0.5*vdw_reduced");
    }

    #[test]
    fn equilibrate_averages_equal_heat_capacities() {
        let reg = si();
        let spec = reg.get("ideal_gas").unwrap();
        let parts = [JoinPart::new(spec, 1.0, 0.01), JoinPart::new(spec, 1.0, 0.01)];
        let u = spec.energy(300.0, 0.01).unwrap() + spec.energy(500.0, 0.01).unwrap();
        let eq = equilibrate(&parts, u).unwrap();
        assert!((eq.theta - 400.0).abs() < 1e-9 * 400.0);
        let single = equilibrate(&parts[..1], 3000.0).unwrap();
        assert!((single.theta - spec.theta_from_energy(3000.0, 0.01).unwrap()).abs() < 1e-10);
        let at = 2.0 * spec.energy(350.0, 0.01).unwrap();
        let fixed = equilibrate(&parts, at).unwrap();
        assert!((fixed.energies[0] - at / 2.0).abs() < 1e-9);
        assert!(matches!(equilibrate(&parts, 1e9), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn slides_reach_the_requested_temperature() {
        let derived = reduced();
        let spec = derived.spec("vdw_reduced").unwrap();
        let (lo, hi) = reachable_theta_range(spec, 2.0, 3.0, OdeOptions::default()).unwrap();
        assert!(lo < 2.0 && hi > 2.0);
        // theta (v - b)^(2/3) is conserved, so v = 0.2 sets the upper end
        let top = 2.0 * (2.98f64 / 0.18).powf(1.0 / 1.5);
        assert!((hi - top).abs() < 1e-8 * top);
        for target in [lo * 1.01, 1.0, 2.0, 7.0, hi * 0.99] {
            let v = slide_to_theta(spec, 2.0, 3.0, target, OdeOptions::default()).unwrap();
            // closed-form adiabat: theta (v - b)^(2/3) constant
            let lhs = target * (v - 0.02).powf(1.0 / 1.5);
            let rhs = 2.0 * (3.0f64 - 0.02).powf(1.0 / 1.5);
            assert!(((lhs - rhs) / rhs).abs() < 1e-8, "{target}");
        }
        assert!(matches!(
            slide_to_theta(spec, 2.0, 3.0, lo * 0.5, OdeOptions::default()),
            Err(Error::UnreachableTemperature { .. })
        ));
    }

    #[test]
    fn isotherms() {
        let derived = reduced();
        let ideal = derived.get("ideal_reduced").unwrap();
        let curve = isotherm_trace(ideal, 2.0, (1.0, 10.0), 10).unwrap();
        assert!(curve.iter().all(|p| p.u == 3.0));
        assert!(curve.windows(2).all(|w| w[1].s > w[0].s));
        assert_eq!(isotherm_trace(ideal, 2.0, (1.0, 10.0), 1).unwrap().len(), 1);
        let vdw = derived.get("vdw_reduced").unwrap();
        let curve = isotherm_trace(vdw, 2.0, (0.3, 10.0), 20).unwrap();
        assert!(curve.windows(2).all(|w| w[1].u > w[0].u));
        assert!(isotherm_trace(vdw, 2.0, (0.1, 10.0), 20).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn heat_flows_from_hot_to_cold(
            ta in 0.6f64..9.0, tb in 0.6f64..9.0,
            va in 0.3f64..100.0, vb in 0.3f64..100.0,
            la in 0.2f64..3.0, lb in 0.2f64..3.0,
        ) {
            let derived = reduced();
            let a = derived.get("ideal_reduced").unwrap();
            let b = derived.get("vdw_reduced").unwrap();
            let ua = la * a.spec().energy(ta, va).unwrap();
            let ub = lb * b.spec().energy(tb, vb).unwrap();
            let parts = [JoinPart::new(a.spec(), la, la * va), JoinPart::new(b.spec(), lb, lb * vb)];
            let eq = equilibrate(&parts, ua + ub).unwrap();
            let (hot, cold) = (a.temperature(ta).unwrap(), b.temperature(tb).unwrap());
            if hot > cold {
                prop_assert!(eq.energies[0] < ua);
            } else if hot < cold {
                prop_assert!(eq.energies[0] > ua);
            }
            let before = la * a.raw(ta, va).unwrap() + lb * b.raw(tb, vb).unwrap();
            let after = la * a.raw(eq.theta, va).unwrap() + lb * b.raw(eq.theta, vb).unwrap();
            prop_assert!(after >= before - 1e-9);
            if (ta - tb).abs() > 1e-3 {
                prop_assert!(after > before);
            }
        }
    }
}
