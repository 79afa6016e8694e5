//! Operational adiabatic accessibility between compound states, and entropy
//! reconstructed from the order relation alone.
//!
//! A query slides every component reversibly along its own adiabat to one
//! common empirical temperature, so both sides become equilibrium thermal
//! joins. Splitting and recombining matter at that temperature lines the two
//! joins up piece by piece, and a single join adiabat from one side to the
//! other's work coordinates decides the order: states above the adiabat are
//! accessible, states below are not.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::eos::{EosSpec, SimpleState};
use crate::error::{Error, Result};
use crate::thermo::{adiabat_integrate, reachable_theta_range, slide_to_theta, DerivedRegistry, JoinPart};

const SAME_STATE: f64 = 1e-12;

/// An ordered collection of scaled simple-system states.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompoundState {
    pub components: Vec<SimpleState>,
}

impl CompoundState {
    pub fn new(components: Vec<SimpleState>) -> Self {
        Self { components }
    }

    pub fn single(state: SimpleState) -> Self {
        Self::new(vec![state])
    }

    /// `(X, Y)` as one compound state.
    pub fn join(&self, other: &CompoundState) -> Self {
        let mut components = self.components.clone();
        components.extend(other.components.iter().cloned());
        Self { components }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.components.iter().map(|c| c.scaled(factor)).collect())
    }

    /// Total matter content per space.
    pub fn signature(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for c in &self.components {
            *out.entry(c.space.clone()).or_insert(0.0) += c.scale;
        }
        out
    }

    pub fn signature_string(&self) -> String {
        self.signature()
            .iter()
            .map(|(k, v)| format!("{k}:{v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl From<SimpleState> for CompoundState {
    fn from(s: SimpleState) -> Self {
        Self::single(s)
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Recombines scaled copies of the same intensive state and sorts components
/// by space, then by intensive energy and volume.
pub fn canonicalize(c: &CompoundState) -> CompoundState {
    let mut merged: Vec<SimpleState> = Vec::new();
    for s in &c.components {
        let (u, v) = s.intensive();
        if let Some(m) = merged.iter_mut().find(|m| {
            let (mu, mv) = m.intensive();
            m.space == s.space && close(mu, u, SAME_STATE) && close(mv, v, SAME_STATE)
        }) {
            let scale = m.scale + s.scale;
            let (mu, mv) = m.intensive();
            *m = SimpleState::from_intensive(m.space.clone(), scale, mu, mv);
        } else {
            merged.push(s.clone());
        }
    }
    merged.sort_by(|a, b| {
        let (au, av) = a.intensive();
        let (bu, bv) = b.intensive();
        a.space
            .cmp(&b.space)
            .then(au.total_cmp(&bu))
            .then(av.total_cmp(&bv))
    });
    CompoundState::new(merged)
}

/// Outcome of comparing two compound states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccessVerdict {
    /// `A ≺ B`.
    pub forward: bool,
    /// `B ≺ A`.
    pub backward: bool,
    /// Signed relative energy gap of `B` above the adiabat through `A`.
    pub gap: f64,
    pub tolerance: f64,
}

impl AccessVerdict {
    pub fn from_gap(gap: f64, tolerance: f64) -> Self {
        Self {
            forward: gap >= -tolerance,
            backward: gap <= tolerance,
            gap,
            tolerance,
        }
    }

    /// Verdict for an oracle that only knows the two directions.
    pub fn from_bools(forward: bool, backward: bool) -> Self {
        let gap = match (forward, backward) {
            (true, true) => 0.0,
            (true, false) => 1.0,
            (false, true) => -1.0,
            (false, false) => f64::NAN,
        };
        Self {
            forward,
            backward,
            gap,
            tolerance: 0.0,
        }
    }

    pub fn equivalent(&self) -> bool {
        self.forward && self.backward
    }

    pub fn strict(&self) -> bool {
        self.forward != self.backward
    }

    pub fn incomparable(&self) -> bool {
        !self.forward && !self.backward
    }

    /// `A ≺≺ B` with a margin of ten tolerances.
    pub fn strictly_precedes(&self) -> bool {
        self.forward && !self.backward && self.gap > 10.0 * self.tolerance
    }

    pub fn reversed(&self) -> Self {
        Self {
            forward: self.backward,
            backward: self.forward,
            gap: -self.gap,
            tolerance: self.tolerance,
        }
    }
}

impl fmt::Display for AccessVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match (self.forward, self.backward) {
            (true, true) => "equivalent",
            (true, false) => "forward",
            (false, true) => "backward",
            (false, false) => "incomparable",
        };
        write!(f, "{rel} (gap {:e})", self.gap)
    }
}

/// Anything that can decide adiabatic accessibility.
pub trait AccessOracle: Sync {
    fn verdict(&self, a: &CompoundState, b: &CompoundState) -> Result<AccessVerdict>;

    fn precedes(&self, a: &CompoundState, b: &CompoundState) -> Result<bool> {
        Ok(self.verdict(a, b)?.forward)
    }
}

type StateKey = (String, u64, u64);

fn key(space: &str, theta: f64, v: f64) -> StateKey {
    (space.to_string(), theta.to_bits(), v.to_bits())
}

/// The slide-and-join accessibility oracle.
pub struct OperationalOracle<'a> {
    registry: &'a DerivedRegistry,
    /// Position of the common temperature inside the admissible interval.
    pub theta_fraction: f64,
    pub tolerance: f64,
    ranges: Mutex<HashMap<StateKey, (f64, f64)>>,
    slides: Mutex<HashMap<(StateKey, u64), f64>>,
}

/// A component slid to the common temperature.
#[derive(Debug, Clone)]
struct Slid<'a> {
    spec: &'a EosSpec,
    scale: f64,
    v: f64,
}

impl<'a> OperationalOracle<'a> {
    pub fn new(registry: &'a DerivedRegistry) -> Self {
        Self {
            registry,
            theta_fraction: 0.5,
            tolerance: registry.tolerances.equality,
            ranges: Mutex::new(HashMap::new()),
            slides: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_theta_fraction(mut self, fraction: f64) -> Self {
        self.theta_fraction = fraction;
        self
    }

    pub fn registry(&self) -> &'a DerivedRegistry {
        self.registry
    }

    fn theta_of(&self, s: &SimpleState) -> Result<(&'a EosSpec, f64, f64)> {
        let spec = self.registry.spec(&s.space)?;
        if !(s.scale > 0.0) {
            return Err(Error::Domain(format!("{}: scale {} must be positive", s.space, s.scale)));
        }
        let (u, v) = s.intensive();
        Ok((spec, spec.theta_from_energy(u, v)?, v))
    }

    fn range(&self, spec: &EosSpec, theta: f64, v: f64) -> Result<(f64, f64)> {
        let k = key(spec.id(), theta, v);
        if let Some(r) = self.ranges.lock().expect("cache lock").get(&k) {
            return Ok(*r);
        }
        let r = reachable_theta_range(spec, theta, v, self.registry.tolerances.ode)?;
        self.ranges.lock().expect("cache lock").insert(k, r);
        Ok(r)
    }

    fn slide(&self, spec: &EosSpec, theta: f64, v: f64, star: f64) -> Result<f64> {
        let k = (key(spec.id(), theta, v), star.to_bits());
        if let Some(r) = self.slides.lock().expect("cache lock").get(&k) {
            return Ok(*r);
        }
        let r = slide_to_theta(spec, theta, v, star, self.registry.tolerances.ode)?;
        self.slides.lock().expect("cache lock").insert(k, r);
        Ok(r)
    }

    /// The admissible interval of common temperatures and the chosen one.
    pub fn common_theta(&self, a: &CompoundState, b: &CompoundState) -> Result<((f64, f64), f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for s in a.components.iter().chain(&b.components) {
            let (spec, theta, v) = self.theta_of(s)?;
            let (rlo, rhi) = self.range(spec, theta, v)?;
            lo = lo.max(rlo);
            hi = hi.min(rhi);
        }
        if !(lo <= hi) {
            return Err(Error::UnreachableTemperature { lo, hi });
        }
        Ok(((lo, hi), lo + self.theta_fraction * (hi - lo)))
    }

    fn slide_all(&self, c: &CompoundState, star: f64) -> Result<Vec<Slid<'a>>> {
        c.components
            .iter()
            .map(|s| {
                let (spec, theta, v) = self.theta_of(s)?;
                Ok(Slid {
                    spec,
                    scale: s.scale,
                    v: self.slide(spec, theta, v, star)?,
                })
            })
            .collect()
    }

    /// Verdict computed at an explicit common temperature.
    pub fn verdict_at(&self, a: &CompoundState, b: &CompoundState, star: f64) -> Result<AccessVerdict> {
        let ca = canonicalize(a);
        let cb = canonicalize(b);
        check_signatures(&ca, &cb)?;
        let sa = self.slide_all(&ca, star)?;
        let sb = self.slide_all(&cb, star)?;
        let pieces = align(&sa, &sb);
        let energy = |side: fn(&Piece<'a>) -> f64| -> Result<f64> {
            pieces
                .iter()
                .map(|p| Ok(p.scale * p.spec.u(star, side(p))?))
                .sum()
        };
        let ua = energy(|p| p.va)?;
        let ub = energy(|p| p.vb)?;
        let gap = |target_u: f64, end_u: f64| (target_u - end_u) / target_u.abs().max(end_u.abs());
        let tol = self.tolerance;

        // The straight path settles the query whenever its adiabat stays in the domain.
        let direct = match self.leg(&pieces, |p| p.va, ua, |p| p.vb)? {
            Leg::Reached(e) => return Ok(AccessVerdict::from_gap(gap(ub, e), tol)),
            Leg::Exited(err) => err,
        };
        if let Leg::Reached(e) = self.leg(&pieces, |p| p.vb, ub, |p| p.va)? {
            return Ok(AccessVerdict::from_gap(-gap(ua, e), tol));
        }

        // Both adiabats expanding to the componentwise larger volumes only cool,
        // so leaving through the bottom of the domain means the other side ends
        // above the coldest state there.
        let (lo, hi) = pieces.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), p| {
            (lo.max(p.spec.domain.theta.0), hi.min(p.spec.domain.theta.1))
        });
        for (meet, bound) in [(f64::max as fn(f64, f64) -> f64, lo), (f64::min, hi)] {
            let target = |p: &Piece<'_>| meet(p.va, p.vb);
            let la = self.leg(&pieces, |p| p.va, ua, target)?;
            let lb = self.leg(&pieces, |p| p.vb, ub, target)?;
            let edge: f64 = pieces
                .iter()
                .map(|p| Ok(p.scale * p.spec.u(bound, target(p))?))
                .sum::<Result<f64>>()?;
            let cooling = bound == lo;
            let strict = |forward: bool, g: f64| AccessVerdict {
                forward,
                backward: !forward,
                gap: g,
                tolerance: tol,
            };
            match (la, lb) {
                (Leg::Reached(ea), Leg::Reached(eb)) => return Ok(AccessVerdict::from_gap(gap(eb, ea), tol)),
                (Leg::Exited(_), Leg::Reached(eb)) => {
                    return Ok(strict(cooling, gap(eb, edge)));
                }
                (Leg::Reached(ea), Leg::Exited(_)) => {
                    return Ok(strict(!cooling, gap(edge, ea)));
                }
                _ => {}
            }
        }
        Err(direct)
    }

    /// Join adiabat from per-unit volumes `from` at energy `u` to per-unit volumes `to`.
    fn leg(
        &self,
        pieces: &[Piece<'a>],
        from: impl Fn(&Piece<'a>) -> f64,
        u: f64,
        to: impl Fn(&Piece<'a>) -> f64,
    ) -> Result<Leg> {
        let parts: Vec<JoinPart<'_>> = pieces
            .iter()
            .map(|p| JoinPart::new(p.spec, p.scale, p.scale * from(p)))
            .collect();
        let targets: Vec<f64> = pieces.iter().map(|p| p.scale * to(p)).collect();
        match adiabat_integrate(&parts, u, &targets, self.registry.tolerances.ode) {
            Ok(curve) => Ok(Leg::Reached(curve.end_energy())),
            Err(e @ (Error::LeftDomain { .. } | Error::StiffnessFailure { .. })) => Ok(Leg::Exited(e)),
            Err(e) => Err(e),
        }
    }
}

enum Leg {
    Reached(f64),
    Exited(Error),
}

impl AccessOracle for OperationalOracle<'_> {
    fn verdict(&self, a: &CompoundState, b: &CompoundState) -> Result<AccessVerdict> {
        let (_, star) = self.common_theta(a, b)?;
        self.verdict_at(a, b, star)
    }
}

fn check_signatures(a: &CompoundState, b: &CompoundState) -> Result<()> {
    let (sa, sb) = (a.signature(), b.signature());
    let same = sa.len() == sb.len()
        && sa
            .iter()
            .zip(&sb)
            .all(|((ka, va), (kb, vb))| ka == kb && close(*va, *vb, SAME_STATE));
    if same {
        Ok(())
    } else {
        Err(Error::SignatureMismatch {
            left: a.signature_string(),
            right: b.signature_string(),
        })
    }
}

/// Matter of one space at volume `va` per unit on side A and `vb` on side B.
#[derive(Debug, Clone)]
struct Piece<'a> {
    spec: &'a EosSpec,
    scale: f64,
    va: f64,
    vb: f64,
}

/// Common refinement of the two sides' matter, space by space.
fn align<'a>(a: &[Slid<'a>], b: &[Slid<'a>]) -> Vec<Piece<'a>> {
    let mut out = Vec::new();
    let mut spaces: Vec<&str> = a.iter().map(|s| s.spec.id()).collect();
    spaces.sort_unstable();
    spaces.dedup();
    for space in spaces {
        let mut la: Vec<&Slid<'a>> = a.iter().filter(|s| s.spec.id() == space).collect();
        let mut lb: Vec<&Slid<'a>> = b.iter().filter(|s| s.spec.id() == space).collect();
        la.sort_by(|x, y| x.v.total_cmp(&y.v));
        lb.sort_by(|x, y| x.v.total_cmp(&y.v));
        let total: f64 = la.iter().map(|s| s.scale).sum();
        let eps = 1e-12 * total;
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (la[0].scale, lb[0].scale);
        loop {
            let (last_a, last_b) = (i + 1 == la.len(), j + 1 == lb.len());
            // the final piece absorbs rounding in the two totals
            let m = if last_a && last_b { ra.max(rb) } else { ra.min(rb) };
            if m > 0.0 {
                out.push(Piece {
                    spec: la[i].spec,
                    scale: m,
                    va: la[i].v,
                    vb: lb[j].v,
                });
            }
            if last_a && last_b {
                break;
            }
            ra -= m;
            rb -= m;
            if ra <= eps && !last_a {
                i += 1;
                ra = la[i].scale;
            }
            if rb <= eps && !last_b {
                j += 1;
                rb = lb[j].scale;
            }
            if (ra <= eps && last_a && !last_b) || (rb <= eps && last_b && !last_a) {
                // one side ran out early by rounding; hand the rest to the last piece
                if let Some(p) = out.last_mut() {
                    p.scale += ra.max(rb).max(0.0);
                }
                break;
            }
        }
    }
    out
}

/// Lower and upper entropy brackets for one target state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructionResult {
    /// Supremum of `lambda` with `((1 - lambda) X0, lambda X1) ≺ X`.
    pub lambda_minus: f64,
    /// Infimum of `lambda` with `X ≺ ((1 - lambda) X0, lambda X1)`.
    pub lambda_plus: f64,
    pub entropy: f64,
    pub iterations: usize,
}

impl ReconstructionResult {
    pub fn gap(&self) -> f64 {
        self.lambda_plus - self.lambda_minus
    }
}

pub const MAX_BISECTIONS: usize = 60;

/// `((1 - lambda) X0, lambda X1)` against `X`, with negative coefficients moved
/// to the other side and zero coefficients dropped.
fn mixture_query(x0: &SimpleState, x1: &SimpleState, x: &SimpleState, lambda: f64) -> (CompoundState, CompoundState) {
    let mut left = Vec::new();
    let mut right = vec![x.clone()];
    for (state, coeff) in [(x0, 1.0 - lambda), (x1, lambda)] {
        if coeff > 0.0 {
            left.push(state.with_scale(coeff));
        } else if coeff < 0.0 {
            right.push(state.with_scale(-coeff));
        }
    }
    (CompoundState::new(left), CompoundState::new(right))
}

/// Finds the switch point of a monotone predicate: `holds(lo)` and `!holds(hi)`.
fn bisect_switch(
    mut holds: impl FnMut(f64) -> Result<bool>,
    start: (f64, f64),
    tol: f64,
    iterations: &mut usize,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = start;
    let mut width = hi - lo;
    while !holds(lo)? {
        *iterations += 1;
        if *iterations > MAX_BISECTIONS {
            return Err(Error::NonConvergence { iterations: *iterations });
        }
        hi = lo;
        width *= 2.0;
        lo -= width;
    }
    while holds(hi)? {
        *iterations += 1;
        if *iterations > MAX_BISECTIONS {
            return Err(Error::NonConvergence { iterations: *iterations });
        }
        lo = hi;
        width *= 2.0;
        hi += width;
    }
    while hi - lo > tol {
        *iterations += 1;
        if *iterations > 2 * MAX_BISECTIONS {
            return Err(Error::NonConvergence { iterations: *iterations });
        }
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Entropy of `x` on the scale fixed by `S(x0) = 0`, `S(x1) = 1`, using only
/// the oracle's order relation. States are taken per unit matter.
pub fn reconstruct_entropy(
    oracle: &dyn AccessOracle,
    x0: &SimpleState,
    x1: &SimpleState,
    x: &SimpleState,
    tol: f64,
) -> Result<ReconstructionResult> {
    if x0.space != x1.space || x0.space != x.space {
        return Err(Error::SignatureMismatch {
            left: format!("{}, {}", x0.space, x1.space),
            right: x.space.clone(),
        });
    }
    let (x0, x1, x) = (x0.with_scale(1.0), x1.with_scale(1.0), x.with_scale(1.0));
    let refs = oracle.verdict(&x0.clone().into(), &x1.clone().into())?;
    let strict = if refs.tolerance > 0.0 {
        refs.strictly_precedes()
    } else {
        refs.forward && !refs.backward
    };
    if !strict {
        return Err(Error::ReferenceNotStrict);
    }
    let mut iterations = 0;
    let (minus, _) = bisect_switch(
        |l| {
            let (mix, target) = mixture_query(&x0, &x1, &x, l);
            oracle.precedes(&mix, &target)
        },
        (0.0, 1.0),
        tol,
        &mut iterations,
    )?;
    // X ≺ mix holds above the switch point, so bisect its negation.
    let (_, plus) = bisect_switch(
        |l| {
            let (mix, target) = mixture_query(&x0, &x1, &x, l);
            Ok(!oracle.precedes(&target, &mix)?)
        },
        (0.0, 1.0),
        tol,
        &mut iterations,
    )?;
    Ok(ReconstructionResult {
        lambda_minus: minus,
        lambda_plus: plus,
        entropy: 0.5 * (minus + plus),
        iterations,
    })
}

/// `lambda_plus - lambda_minus`; at most `2 tol` when `x` is comparable with every mixture.
pub fn comparability_gap(
    oracle: &dyn AccessOracle,
    x0: &SimpleState,
    x1: &SimpleState,
    x: &SimpleState,
    tol: f64,
) -> Result<f64> {
    Ok(reconstruct_entropy(oracle, x0, x1, x, tol)?.gap())
}

/// `(S(x) - S(x0)) / (S(x1) - S(x0))` from the integrated entropy.
pub fn integral_lambda(
    registry: &DerivedRegistry,
    x0: &SimpleState,
    x1: &SimpleState,
    x: &SimpleState,
) -> Result<f64> {
    let e = registry.get(&x.space)?;
    let s = |st: &SimpleState| {
        let (u, v) = st.intensive();
        e.raw_uv(u, v)
    };
    let s0 = s(x0)?;
    Ok((s(x)? - s0) / (s(x1)? - s0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::{SpaceRegistry, Units};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn reduced() -> &'static DerivedRegistry {
        static REG: OnceLock<DerivedRegistry> = OnceLock::new();
        REG.get_or_init(|| DerivedRegistry::derive(&SpaceRegistry::bundled(Units::Reduced)).unwrap())
    }

    const GAS: &str = "ideal_reduced";

    fn st(scale: f64, u: f64, v: f64) -> SimpleState {
        SimpleState::new(GAS, scale, u, v)
    }

    // s = 1.5 ln U + ln V per unit for the reduced ideal gas
    fn s_ideal(u: f64, v: f64) -> f64 {
        1.5 * u.ln() + v.ln()
    }

    #[test]
    fn canonicalize_recombines_splits() {
        let x = st(1.0, 2.0, 3.0);
        let split = CompoundState::new(vec![x.scaled(0.3), x.scaled(0.7)]);
        let c = canonicalize(&split);
        assert_eq!(c.components.len(), 1);
        assert!((c.components[0].scale - 1.0).abs() < 1e-15);
        assert!((c.components[0].energy - 2.0).abs() < 1e-15);
        let single = CompoundState::single(x.clone());
        assert_eq!(canonicalize(&single), single);
        let two = CompoundState::new(vec![st(1.0, 5.0, 1.0), st(1.0, 2.0, 1.0)]);
        let c = canonicalize(&two);
        assert_eq!(c.components[0].energy, 2.0);
        assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn reflexive() {
        let oracle = OperationalOracle::new(reduced());
        let a = CompoundState::single(st(1.0, 1.0, 1.0));
        assert!(oracle.verdict(&a, &a).unwrap().equivalent());
    }

    #[test]
    fn more_energy_at_equal_volume_is_strictly_later() {
        let oracle = OperationalOracle::new(reduced());
        let a = CompoundState::single(st(1.0, 1.0, 1.0));
        let b = CompoundState::single(st(1.0, 1.2, 1.0));
        let v = oracle.verdict(&a, &b).unwrap();
        assert!(v.strictly_precedes(), "{v}");
        assert!(!oracle.verdict(&b, &a).unwrap().forward);
    }

    #[test]
    fn forward_sector_is_above_the_adiabat() {
        let oracle = OperationalOracle::new(reduced());
        let a = CompoundState::single(st(1.0, 1.0, 1.0));
        // the adiabat through (1, 1) is U = V^(-2/3)
        for v in [0.5f64, 2.0, 8.0] {
            let on = v.powf(-2.0 / 3.0);
            let above = CompoundState::single(st(1.0, on * 1.01, v));
            let below = CompoundState::single(st(1.0, on * 0.99, v));
            let exact = CompoundState::single(st(1.0, on, v));
            assert!(oracle.verdict(&a, &above).unwrap().strictly_precedes());
            assert!(!oracle.verdict(&a, &below).unwrap().forward);
            assert!(oracle.verdict(&a, &exact).unwrap().equivalent());
        }
    }

    #[test]
    fn mixture_of_two_states_matches_mean_entropy() {
        let oracle = OperationalOracle::new(reduced());
        let (x0, x1) = ((1.0, 1.0), (3.0, 5.0));
        let target = 0.5 * (s_ideal(x0.0, x0.1) + s_ideal(x1.0, x1.1));
        // M at V = 2 with s(M) = target
        let vm = 2.0f64;
        let um = ((target - vm.ln()) / 1.5).exp();
        let a = CompoundState::new(vec![st(0.5, 0.5 * x0.0, 0.5 * x0.1), st(0.5, 0.5 * x1.0, 0.5 * x1.1)]);
        let b = CompoundState::single(st(1.0, um, vm));
        let v = oracle.verdict(&a, &b).unwrap();
        assert!(v.equivalent(), "{v}");
    }

    #[test]
    fn signature_mismatch_is_refused() {
        let oracle = OperationalOracle::new(reduced());
        let a = CompoundState::single(st(1.0, 1.0, 1.0));
        let b = CompoundState::single(st(2.0, 2.0, 2.0));
        assert!(matches!(oracle.verdict(&a, &b), Err(Error::SignatureMismatch { .. })));
        let c = CompoundState::single(SimpleState::new("vdw_reduced", 1.0, 1.0, 1.0));
        assert!(matches!(oracle.verdict(&a, &c), Err(Error::SignatureMismatch { .. })));
    }

    #[test]
    fn cross_space_joins_follow_total_entropy() {
        let reg = reduced();
        let oracle = OperationalOracle::new(reg);
        let ideal = reg.get(GAS).unwrap();
        let vdw = reg.get("vdw_reduced").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let mut draw = |space: &str, spec: &EosSpec| {
                let t = rng.gen_range(1.0..8.0);
                let v = rng.gen_range(0.5..50.0);
                SimpleState::from_intensive(space, 1.0, spec.energy(t, v).unwrap(), v)
            };
            let a = CompoundState::new(vec![draw(GAS, ideal.spec()), draw("vdw_reduced", vdw.spec())]);
            let b = CompoundState::new(vec![draw(GAS, ideal.spec()), draw("vdw_reduced", vdw.spec())]);
            let s = |c: &CompoundState| -> f64 { c.components.iter().map(|x| reg.raw_entropy(x).unwrap()).sum() };
            let v = oracle.verdict(&a, &b).unwrap();
            assert_eq!(v.forward, s(&a) <= s(&b), "{v}");
            assert_eq!(v.backward, s(&b) <= s(&a), "{v}");
        }
    }

    #[test]
    fn alignment_covers_all_matter() {
        let reg = reduced();
        let spec = reg.spec(GAS).unwrap();
        let a = [
            Slid { spec, scale: 0.3, v: 1.0 },
            Slid { spec, scale: 0.7, v: 2.0 },
        ];
        let b = [
            Slid { spec, scale: 0.5, v: 3.0 },
            Slid { spec, scale: 0.2, v: 4.0 },
            Slid { spec, scale: 0.3, v: 5.0 },
        ];
        let pieces = align(&a, &b);
        let total: f64 = pieces.iter().map(|p| p.scale).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let va: f64 = pieces.iter().map(|p| p.scale * p.va).sum();
        let vb: f64 = pieces.iter().map(|p| p.scale * p.vb).sum();
        assert!((va - 1.7).abs() < 1e-14);
        assert!((vb - (1.5 + 0.8 + 1.5)).abs() < 1e-14);
        assert_eq!(pieces.len(), 4);
    }

    #[test]
    fn reconstruction_of_the_midpoint() {
        let oracle = OperationalOracle::new(reduced());
        let e = std::f64::consts::E;
        let x0 = st(1.0, 1.0, 1.0);
        let x1 = st(1.0, e, 1.0);
        let x = st(1.0, e.sqrt(), 1.0);
        let r = reconstruct_entropy(&oracle, &x0, &x1, &x, 1e-4).unwrap();
        assert!((r.entropy - 0.5).abs() < 1e-3, "{r:?}");
        assert!(r.gap() <= 2e-4);
        let r0 = reconstruct_entropy(&oracle, &x0, &x1, &x0, 1e-4).unwrap();
        assert!(r0.entropy.abs() <= 1e-4);
        let r1 = reconstruct_entropy(&oracle, &x0, &x1, &x1, 1e-4).unwrap();
        assert!((r1.entropy - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn reconstruction_outside_the_reference_interval() {
        let oracle = OperationalOracle::new(reduced());
        let e = std::f64::consts::E;
        let x0 = st(1.0, 1.0, 1.0);
        let x1 = st(1.0, e, 1.0);
        for (u, v) in [(e * e, 1.0), (0.5, 1.0), (2.0, 7.0)] {
            let x = st(1.0, u, v);
            let r = reconstruct_entropy(&oracle, &x0, &x1, &x, 1e-4).unwrap();
            let exact = s_ideal(u, v) / 1.5;
            assert!((r.entropy - exact).abs() < 1e-3, "{r:?} vs {exact}");
        }
    }

    #[test]
    fn reference_must_be_strict() {
        let oracle = OperationalOracle::new(reduced());
        let x0 = st(1.0, 1.0, 1.0);
        assert!(matches!(
            reconstruct_entropy(&oracle, &x0, &x0, &x0, 1e-4),
            Err(Error::ReferenceNotStrict)
        ));
        let x1 = st(1.0, 2.0, 1.0);
        assert!(matches!(
            reconstruct_entropy(&oracle, &x1, &x0, &x0, 1e-4),
            Err(Error::ReferenceNotStrict)
        ));
    }

    #[test]
    fn incomparable_band_opens_a_gap() {
        let reg = reduced();
        let e = std::f64::consts::E;
        let x0 = st(1.0, 1.0, 1.0);
        let x1 = st(1.0, e, 1.0);
        let x = st(1.0, e.sqrt(), 1.0);
        let oracle = OperationalOracle::new(reg);
        assert!(comparability_gap(&oracle, &x0, &x1, &x, 1e-4).unwrap() <= 2e-4);
        let band = crate::axioms::stubs::IncomparableBand::new(reg, &x0, &x1, 0.4, 0.6).unwrap();
        let gap = comparability_gap(&band, &x0, &x1, &x, 1e-4).unwrap();
        assert!(gap > 2e-4, "{gap}");
    }

    #[test]
    fn verdicts_do_not_depend_on_the_common_temperature() {
        let reg = reduced();
        let mid = OperationalOracle::new(reg);
        let low = OperationalOracle::new(reg).with_theta_fraction(0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let spec = reg.spec(GAS).unwrap();
        for _ in 0..40 {
            let mut draw = |scale: f64| {
                let t = rng.gen_range(0.5..8.0);
                let v = rng.gen_range(0.1..100.0);
                SimpleState::from_intensive(GAS, scale, spec.energy(t, v).unwrap(), v)
            };
            let a = CompoundState::new(vec![draw(0.4), draw(0.6)]);
            let b = CompoundState::single(draw(1.0));
            assert_eq!(mid.verdict(&a, &b).unwrap().forward, low.verdict(&a, &b).unwrap().forward);
        }
    }
}
