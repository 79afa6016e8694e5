//! Seeded randomized checks of the order axioms, the simple-system and
//! thermal axioms, the comparison hypothesis and the temperature theorem.
//!
//! Each law draws from its own ChaCha stream derived from the seed and the
//! law's name, so laws can run in parallel and a report is reproducible byte
//! for byte.

pub mod stubs;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::eos::{probe_lipschitz, EosSpec, PressureSurface, SimpleState};
use crate::error::{Error, Result};
use crate::oracle::{comparability_gap, AccessOracle, CompoundState};
use crate::thermo::{adiabat_simple, equilibrate, DerivedRegistry, EntropyFn, JoinPart};

/// The A6 epsilon ladder.
pub const EPSILON_LADDER: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Temperature resolution for the zeroth law.
const T3_RESOLUTION: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub samples: usize,
    /// Fraction of each (log) domain axis kept clear at both ends.
    pub margin: f64,
    pub lipschitz_bound: f64,
    /// Bisection tolerance for reconstructions.
    pub reconstruction_tol: f64,
    /// Record wall-clock time per law. Off by default so reports stay reproducible.
    pub timing: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            samples: 100,
            margin: 0.25,
            lipschitz_bound: crate::eos::DEFAULT_LIPSCHITZ_BOUND,
            reconstruction_tol: 1e-4,
            timing: false,
        }
    }
}

impl SamplerConfig {
    pub fn check(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::InvalidSpec("samples per law must be at least 1".into()));
        }
        if !(self.margin >= 0.0 && self.margin < 0.5) {
            return Err(Error::InvalidSpec(format!("margin {} outside [0, 0.5)", self.margin)));
        }
        Ok(())
    }

    fn rng(&self, law: &str, space: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(law.bytes().chain([0]).chain(space.bytes())))
    }
}

pub(crate) fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    bytes.fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "NOT-TESTED")]
    NotTested,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotTested => "NOT-TESTED",
        })
    }
}

/// States that reproduce a failure when fed back to the same check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub note: String,
    pub states: Vec<SimpleState>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.note)?;
        for s in &self.states {
            write!(f, "; {}[{}] U={:e} V={:e}", s.space, s.scale, s.energy, s.volume)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawResult {
    pub law: String,
    pub space: String,
    pub status: Status,
    pub trials: usize,
    pub failures: usize,
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub seed: u64,
    pub samples: usize,
    pub laws: Vec<LawResult>,
}

impl AxiomReport {
    pub fn new(cfg: &SamplerConfig) -> Self {
        Self {
            seed: cfg.seed,
            samples: cfg.samples,
            laws: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.laws.iter().all(|l| l.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LawResult> {
        self.laws.iter().filter(|l| l.status == Status::Fail)
    }

    /// First result whose law name starts with `prefix`, optionally for one space.
    pub fn find(&self, prefix: &str, space: Option<&str>) -> Option<&LawResult> {
        self.laws
            .iter()
            .find(|l| l.law.starts_with(prefix) && space.is_none_or(|s| l.space == s))
    }

    pub fn extend(&mut self, other: AxiomReport) {
        self.laws.extend(other.laws);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed {}, {} samples per law", self.seed, self.samples)?;
        for l in &self.laws {
            write!(f, "{:<10} {} [{}] {} trials, {} failures", l.status, l.law, l.space, l.trials, l.failures)?;
            if let Some(ms) = l.elapsed_ms {
                write!(f, " ({ms:.1} ms)")?;
            }
            if !l.note.is_empty() {
                write!(f, " ({})", l.note)?;
            }
            writeln!(f)?;
            if let Some(w) = &l.witness {
                writeln!(f, "           witness: {w}")?;
            }
        }
        let failed = self.failures().count();
        if failed == 0 {
            writeln!(f, "all laws pass")
        } else {
            writeln!(f, "{failed} laws failed")
        }
    }
}

/// Running count for one law.
#[derive(Debug, Default)]
pub struct Tally {
    trials: usize,
    failures: usize,
    witness: Option<Witness>,
    note: String,
}

impl Tally {
    fn record(&mut self, ok: bool, witness: impl FnOnce() -> Witness) {
        self.trials += 1;
        if !ok {
            self.failures += 1;
            if self.witness.is_none() {
                self.witness = Some(witness());
            }
        }
    }

    fn fail(&mut self, note: String, states: Vec<SimpleState>) {
        self.record(false, || Witness { note, states });
    }
}

fn witness(note: impl Into<String>, states: &[&SimpleState]) -> Witness {
    Witness {
        note: note.into(),
        states: states.iter().map(|s| (*s).clone()).collect(),
    }
}

type LawFn<'a> = Box<dyn Fn(&mut ChaCha8Rng, &mut Tally) -> Result<()> + Sync + Send + 'a>;

fn run_laws(space: &str, cfg: &SamplerConfig, laws: Vec<(&'static str, LawFn<'_>)>) -> AxiomReport {
    let results = laws
        .into_par_iter()
        .map(|(name, law)| {
            let start = Instant::now();
            let mut rng = cfg.rng(name, space);
            let mut tally = Tally::default();
            if let Err(e) = law(&mut rng, &mut tally) {
                tally.fail(format!("aborted: {e}"), Vec::new());
            }
            let status = if tally.failures > 0 {
                Status::Fail
            } else if tally.trials == 0 {
                Status::NotTested
            } else {
                Status::Pass
            };
            LawResult {
                law: name.to_string(),
                space: space.to_string(),
                status,
                trials: tally.trials,
                failures: tally.failures,
                witness: tally.witness,
                note: tally.note,
                elapsed_ms: cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
            }
        })
        .collect();
    AxiomReport {
        seed: cfg.seed,
        samples: cfg.samples,
        laws: results,
    }
}

fn shrink(lo: f64, hi: f64, margin: f64) -> (f64, f64, bool) {
    if lo > 0.0 {
        let (a, b) = (lo.ln(), hi.ln());
        let w = b - a;
        (a + margin * w, b - margin * w, true)
    } else {
        let w = hi - lo;
        (lo + margin * w, hi - margin * w, false)
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi, log): (f64, f64, bool)) -> f64 {
    let x = if lo < hi { rng.gen_range(lo..hi) } else { lo };
    if log {
        x.exp()
    } else {
        x
    }
}

/// A random state of unit matter away from the domain edges.
pub fn sample_state(spec: &EosSpec, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<SimpleState> {
    let theta = draw(rng, shrink(spec.domain.theta.0, spec.domain.theta.1, cfg.margin));
    let v = draw(rng, shrink(spec.domain.v.0, spec.domain.v.1, cfg.margin));
    SimpleState::at(spec, 1.0, theta, v)
}

fn sample_v(spec: &EosSpec, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> f64 {
    draw(rng, shrink(spec.domain.v.0, spec.domain.v.1, cfg.margin))
}

fn one(s: &SimpleState) -> CompoundState {
    CompoundState::single(s.clone())
}

fn pair(a: &SimpleState, b: &SimpleState) -> CompoundState {
    CompoundState::new(vec![a.clone(), b.clone()])
}

/// Orders two states by the oracle, or `None` if it compares neither way.
fn orient(oracle: &dyn AccessOracle, a: SimpleState, b: SimpleState) -> Result<Option<(SimpleState, SimpleState)>> {
    let v = oracle.verdict(&one(&a), &one(&b))?;
    Ok(if v.forward {
        Some((a, b))
    } else if v.backward {
        Some((b, a))
    } else {
        None
    })
}

/// A random state in the forward sector of `x`: a point on its adiabat at
/// another volume, lifted by up to half its energy.
fn forward_point(
    registry: &DerivedRegistry,
    x: &SimpleState,
    rng: &mut ChaCha8Rng,
) -> Result<Option<SimpleState>> {
    let spec = registry.spec(&x.space)?;
    let (u, v) = x.intensive();
    let vt = (v * rng.gen_range(-1.0f64..1.0).exp()).clamp(spec.domain.v.0, spec.domain.v.1);
    let lift = rng.gen_range(0.0..0.5);
    let ua = match adiabat_simple(spec, 1.0, u, v, vt, registry.tolerances.ode) {
        Ok(c) => c.end_energy(),
        Err(Error::LeftDomain { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let ut = ua + lift * ua.abs();
    Ok(spec.contains_uv(ut, vt).then(|| SimpleState::new(&x.space, 1.0, ut, vt)))
}

/// A1 to A6 for one space.
pub fn check_general_axioms(
    oracle: &dyn AccessOracle,
    registry: &DerivedRegistry,
    space: &str,
    cfg: &SamplerConfig,
) -> Result<AxiomReport> {
    cfg.check()?;
    let spec = registry.spec(space)?;
    let n = cfg.samples;
    let laws: Vec<(&'static str, LawFn<'_>)> = vec![
        (
            "A1 Reflexivity",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let v = oracle.verdict(&one(&x), &one(&x))?;
                    t.record(v.equivalent(), || witness(format!("X vs X: {v}"), &[&x]));
                }
                Ok(())
            }),
        ),
        (
            "A2 Transitivity",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let xs = [
                        sample_state(spec, cfg, rng)?,
                        sample_state(spec, cfg, rng)?,
                        sample_state(spec, cfg, rng)?,
                    ];
                    let mut fw = [[true; 3]; 3];
                    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                        let v = oracle.verdict(&one(&xs[i]), &one(&xs[j]))?;
                        fw[i][j] = v.forward;
                        fw[j][i] = v.backward;
                    }
                    let mut exercised = false;
                    let mut broken = None;
                    for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)] {
                        if fw[a][b] && fw[b][c] {
                            exercised = true;
                            if !fw[a][c] && broken.is_none() {
                                broken = Some((a, b, c));
                            }
                        }
                    }
                    if exercised {
                        t.record(broken.is_none(), || {
                            let (a, b, c) = broken.unwrap();
                            witness("A < B and B < C but not A < C", &[&xs[a], &xs[b], &xs[c]])
                        });
                    }
                }
                Ok(())
            }),
        ),
        (
            "A3 Consistency",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let a = orient(oracle, sample_state(spec, cfg, rng)?, sample_state(spec, cfg, rng)?)?;
                    let b = orient(oracle, sample_state(spec, cfg, rng)?, sample_state(spec, cfg, rng)?)?;
                    let (Some((a0, a1)), Some((b0, b1))) = (a, b) else { continue };
                    let v = oracle.verdict(&pair(&a0, &b0), &pair(&a1, &b1))?;
                    t.record(v.forward, || {
                        witness(format!("A < A', B < B' but (A,B) vs (A',B'): {v}"), &[&a0, &a1, &b0, &b1])
                    });
                }
                Ok(())
            }),
        ),
        (
            "A4 Scaling invariance",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let a = sample_state(spec, cfg, rng)?;
                    let b = sample_state(spec, cfg, rng)?;
                    let v = oracle.verdict(&one(&a), &one(&b))?;
                    for l in [0.5, 2.0] {
                        let w = oracle.verdict(&one(&a.scaled(l)), &one(&b.scaled(l)))?;
                        let same = v.forward == w.forward && v.backward == w.backward;
                        t.record(same, || witness(format!("verdict {v} but scaled by {l}: {w}"), &[&a, &b]));
                    }
                }
                Ok(())
            }),
        ),
        (
            "A5 Splitting and recombination",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let l = rng.gen_range(0.05..0.95);
                    let split = pair(&x.with_scale(1.0 - l), &x.with_scale(l));
                    let v = oracle.verdict(&one(&x), &split)?;
                    t.record(v.equivalent(), || {
                        witness(format!("X vs ((1-l)X, lX) at l={l}: {v}"), &[&x])
                    });
                }
                Ok(())
            }),
        ),
        (
            "A6 Stability",
            Box::new(move |rng, t| {
                let mut exercised = 0;
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let y = sample_state(spec, cfg, rng)?;
                    let z = orient(oracle, sample_state(spec, cfg, rng)?, sample_state(spec, cfg, rng)?)?;
                    let Some((z0, z1)) = z else { continue };
                    let mut premise = true;
                    for eps in EPSILON_LADDER {
                        let lhs = pair(&x, &z0.scaled(eps));
                        let rhs = pair(&y, &z1.scaled(eps));
                        if !oracle.verdict(&lhs, &rhs)?.forward {
                            premise = false;
                            break;
                        }
                    }
                    if premise {
                        exercised += 1;
                        let v = oracle.verdict(&one(&x), &one(&y))?;
                        t.record(v.forward, || {
                            witness(format!("(X, eZ0) < (Y, eZ1) on the ladder but X vs Y: {v}"), &[&x, &y, &z0, &z1])
                        });
                    }
                }
                t.note = format!("premise held in {exercised} of {n} draws");
                Ok(())
            }),
        ),
    ];
    Ok(run_laws(space, cfg, laws))
}

/// A7 as convexity of forward sectors and concavity of the entropy.
pub fn check_convexity(
    oracle: &dyn AccessOracle,
    registry: &DerivedRegistry,
    space: &str,
    cfg: &SamplerConfig,
) -> Result<AxiomReport> {
    cfg.check()?;
    let entropy = registry.get(space)?;
    let spec = entropy.spec();
    let n = cfg.samples;
    let laws: Vec<(&'static str, LawFn<'_>)> = vec![
        (
            "A7 Convex combinations",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let (Some(y), Some(z)) = (forward_point(registry, &x, rng)?, forward_point(registry, &x, rng)?)
                    else {
                        continue;
                    };
                    let s = rng.gen_range(0.0..1.0);
                    let m = SimpleState::new(
                        space,
                        1.0,
                        s * y.energy + (1.0 - s) * z.energy,
                        s * y.volume + (1.0 - s) * z.volume,
                    );
                    let v = oracle.verdict(&one(&x), &one(&m))?;
                    t.record(v.forward, || {
                        witness(format!("Y, Z in the forward sector of X but not tY+(1-t)Z, t={s}: {v}"), &[&x, &y, &z])
                    });
                }
                Ok(())
            }),
        ),
        (
            "A7 Entropy concavity",
            Box::new(move |rng, t| {
                for i in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let y = sample_state(spec, cfg, rng)?;
                    // the endpoints are degenerate combinations and must hold with equality
                    let s = match i % 10 {
                        0 => 0.0,
                        1 => 1.0,
                        _ => rng.gen_range(0.0..1.0),
                    };
                    let (mu, mv) = (s * x.energy + (1.0 - s) * y.energy, s * x.volume + (1.0 - s) * y.volume);
                    if !spec.contains_uv(mu, mv) {
                        continue;
                    }
                    let sx = entropy.raw_uv(x.energy, x.volume)?;
                    let sy = entropy.raw_uv(y.energy, y.volume)?;
                    let sm = entropy.raw_uv(mu, mv)?;
                    let chord = s * sx + (1.0 - s) * sy;
                    let ok = sm >= chord - 1e-9 * (1.0 + chord.abs());
                    t.record(ok, || witness(format!("S(tX+(1-t)Y) = {sm} below chord {chord} at t={s}"), &[&x, &y]));
                }
                Ok(())
            }),
        ),
    ];
    Ok(run_laws(space, cfg, laws))
}

/// Lipschitz bound on any pressure surface, reported as S2.
pub fn check_lipschitz<S: PressureSurface + Sync + ?Sized>(surface: &S, space: &str, cfg: &SamplerConfig) -> LawResult {
    let mut tally = Tally::default();
    match probe_lipschitz(surface, 16, 30) {
        Ok(p) => {
            tally.record(p.ratio <= cfg.lipschitz_bound, || Witness {
                note: format!(
                    "pressure difference quotient {:e} exceeds {:e} at theta={}, v={}",
                    p.ratio, cfg.lipschitz_bound, p.theta, p.v
                ),
                states: Vec::new(),
            });
            tally.note = format!("max normalized quotient {:.3e}", p.ratio);
        }
        Err(e) => tally.fail(format!("probe failed: {e}"), Vec::new()),
    }
    LawResult {
        law: "S2 Tangent planes".into(),
        space: space.into(),
        status: if tally.failures > 0 { Status::Fail } else { Status::Pass },
        trials: tally.trials,
        failures: tally.failures,
        witness: tally.witness,
        note: tally.note,
        elapsed_ms: None,
    }
}

/// S1, S2, S3 and nestedness of forward sectors.
pub fn check_simple_axioms(
    oracle: &dyn AccessOracle,
    registry: &DerivedRegistry,
    space: &str,
    cfg: &SamplerConfig,
) -> Result<AxiomReport> {
    cfg.check()?;
    let spec = registry.spec(space)?;
    let n = cfg.samples;
    let laws: Vec<(&'static str, LawFn<'_>)> = vec![
        (
            "S1 Irreversible state changes",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let delta = 1e-3 * x.energy.abs().max(1e-300);
                    let y = SimpleState::new(space, 1.0, x.energy + delta, x.volume);
                    if !spec.contains_uv(y.energy, y.volume) {
                        continue;
                    }
                    let v = oracle.verdict(&one(&x), &one(&y))?;
                    t.record(v.strictly_precedes(), || witness(format!("X vs (U+d, V): {v}"), &[&x, &y]));
                }
                Ok(())
            }),
        ),
        (
            "S2 Tangent planes",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let theta = spec.theta_from_energy(x.energy, x.volume)?;
                    let p = spec.pressure(theta, x.volume)?;
                    t.record(p.is_finite(), || witness(format!("pressure {p}"), &[&x]));
                }
                let lip = check_lipschitz(spec, space, cfg);
                t.note = lip.note.clone();
                if lip.status == Status::Fail {
                    let w = lip.witness.expect("failed probe has a witness");
                    t.fail(w.note, w.states);
                } else {
                    t.trials += 1;
                }
                Ok(())
            }),
        ),
        (
            "S3 Connectedness of the boundary",
            Box::new(move |_rng, t| {
                t.note = "one work coordinate: each adiabat is a curve".into();
                Ok(())
            }),
        ),
        (
            "S Nested forward sectors",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let xy = orient(oracle, sample_state(spec, cfg, rng)?, sample_state(spec, cfg, rng)?)?;
                    let Some((x, y)) = xy else { continue };
                    let Some(z) = forward_point(registry, &y, rng)? else { continue };
                    let v = oracle.verdict(&one(&x), &one(&z))?;
                    t.record(v.forward, || witness(format!("X < Y, Z in A_Y, X vs Z: {v}"), &[&x, &y, &z]));
                }
                Ok(())
            }),
        ),
    ];
    Ok(run_laws(space, cfg, laws))
}

/// Overlap of the absolute temperature ranges of two spaces.
fn temperature_overlap(a: &EntropyFn, b: &EntropyFn) -> Result<(f64, f64)> {
    let range = |e: &EntropyFn| -> Result<(f64, f64)> {
        let (lo, hi) = e.spec().domain.theta;
        Ok((e.temperature(lo)?, e.temperature(hi)?))
    };
    let ((alo, ahi), (blo, bhi)) = (range(a)?, range(b)?);
    Ok((alo.max(blo), ahi.min(bhi)))
}

/// A unit state of `e` at absolute temperature `t` and a sampled volume.
fn state_at_temperature(e: &EntropyFn, t: f64, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Result<SimpleState> {
    let theta = e.temperature_map().theta_of_temperature(t)?;
    SimpleState::at(e.spec(), 1.0, theta, sample_v(e.spec(), cfg, rng))
}

fn sample_temperature(range: (f64, f64), cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> f64 {
    draw(rng, shrink(range.0, range.1, cfg.margin))
}

fn join_of<'a>(registry: &'a DerivedRegistry, xs: &[&SimpleState]) -> Result<Vec<JoinPart<'a>>> {
    xs.iter()
        .map(|x| Ok(JoinPart::new(registry.spec(&x.space)?, x.scale, x.volume)))
        .collect()
}

/// Equilibrates the states at fixed volumes and returns them.
fn equilibrated(registry: &DerivedRegistry, xs: &[&SimpleState]) -> Result<Vec<SimpleState>> {
    let parts = join_of(registry, xs)?;
    let eq = equilibrate(&parts, xs.iter().map(|x| x.energy).sum())?;
    Ok(xs
        .iter()
        .zip(eq.energies)
        .map(|(x, u)| SimpleState::new(&x.space, x.scale, u, x.volume))
        .collect())
}

/// T1 to T5 for a pair of spaces, which may be the same space.
pub fn check_thermal_axioms(
    oracle: &dyn AccessOracle,
    registry: &DerivedRegistry,
    pair_ids: (&str, &str),
    cfg: &SamplerConfig,
) -> Result<AxiomReport> {
    cfg.check()?;
    let (ea, eb) = (registry.get(pair_ids.0)?, registry.get(pair_ids.1)?);
    let label = format!("{}+{}", pair_ids.0, pair_ids.1);
    let overlap = temperature_overlap(ea, eb)?;
    let n = cfg.samples;
    let disjoint = move || Error::UnreachableTemperature {
        lo: overlap.0,
        hi: overlap.1,
    };
    let laws: Vec<(&'static str, LawFn<'_>)> = vec![
        (
            "T1 Forming a thermal join",
            Box::new(move |rng, t| {
                if overlap.0 >= overlap.1 {
                    return Err(disjoint());
                }
                for _ in 0..n {
                    let x = state_at_temperature(ea, sample_temperature(overlap, cfg, rng), cfg, rng)?;
                    let y = state_at_temperature(eb, sample_temperature(overlap, cfg, rng), cfg, rng)?;
                    let joined = equilibrated(registry, &[&x, &y])?;
                    let before = registry.raw_entropy(&x)? + registry.raw_entropy(&y)?;
                    let after = registry.raw_entropy(&joined[0])? + registry.raw_entropy(&joined[1])?;
                    let v = oracle.verdict(&pair(&x, &y), &CompoundState::new(joined.clone()))?;
                    let ok = v.forward && after >= before - 1e-9 * (1.0 + before.abs());
                    t.record(ok, || {
                        witness(format!("join: {v}, entropy {before} -> {after}"), &[&x, &y, &joined[0], &joined[1]])
                    });
                }
                Ok(())
            }),
        ),
        (
            "T2 Splitting a thermal join",
            Box::new(move |rng, t| {
                if overlap.0 >= overlap.1 {
                    return Err(disjoint());
                }
                for _ in 0..n {
                    let temp = sample_temperature(overlap, cfg, rng);
                    let x = state_at_temperature(ea, temp, cfg, rng)?;
                    let y = state_at_temperature(eb, temp, cfg, rng)?;
                    let split = equilibrated(registry, &[&x, &y])?;
                    let before = registry.raw_entropy(&x)? + registry.raw_entropy(&y)?;
                    let after = registry.raw_entropy(&split[0])? + registry.raw_entropy(&split[1])?;
                    let moved = (split[0].energy - x.energy).abs();
                    let v = oracle.verdict(&pair(&x, &y), &CompoundState::new(split.clone()))?;
                    let ok = v.equivalent()
                        && (after - before).abs() <= 1e-9 * (1.0 + before.abs())
                        && moved <= 1e-9 * (x.energy.abs() + y.energy.abs());
                    t.record(ok, || {
                        witness(format!("equal-T round trip: {v}, moved {moved:e}, entropy {before} -> {after}"), &[&x, &y])
                    });
                }
                Ok(())
            }),
        ),
        (
            "T3 Zeroth law",
            Box::new(move |rng, t| {
                if overlap.0 >= overlap.1 {
                    return Err(disjoint());
                }
                for _ in 0..n {
                    let temp = sample_temperature(overlap, cfg, rng);
                    let jitter = |rng: &mut ChaCha8Rng| temp * (1.0 + rng.gen_range(-0.4..0.4) * T3_RESOLUTION);
                    let x = state_at_temperature(ea, temp, cfg, rng)?;
                    let y = state_at_temperature(eb, jitter(rng), cfg, rng)?;
                    let z = state_at_temperature(ea, jitter(rng), cfg, rng)?;
                    let xz = equilibrated(registry, &[&x, &z])?;
                    let moved = (xz[0].energy - x.energy).abs();
                    let scale = x.energy.abs() + z.energy.abs();
                    t.record(moved <= T3_RESOLUTION * scale, || {
                        witness(format!("X~Y, Y~Z but X and Z exchange {moved:e}"), &[&x, &y, &z])
                    });
                }
                Ok(())
            }),
        ),
        (
            "T4 Transversality",
            Box::new(move |rng, t| {
                let spec = ea.spec();
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let theta = spec.theta_from_energy(x.energy, x.volume)?;
                    let mut found = false;
                    for f in [2.0, 1.25, 1.05, 1.01] {
                        let (v0, v1) = (x.volume / f, x.volume * f);
                        if !spec.domain.contains(theta, v0) || !spec.domain.contains(theta, v1) {
                            continue;
                        }
                        let x0 = SimpleState::at(spec, 1.0, theta, v0)?;
                        let x1 = SimpleState::at(spec, 1.0, theta, v1)?;
                        let lower = oracle.verdict(&one(&x0), &one(&x))?;
                        let upper = oracle.verdict(&one(&x), &one(&x1))?;
                        if lower.strictly_precedes() && upper.strictly_precedes() {
                            found = true;
                            break;
                        }
                    }
                    t.record(found, || witness("no strictly lower and higher states on the isotherm", &[&x]));
                }
                Ok(())
            }),
        ),
        (
            "T5 Universal temperature range",
            Box::new(move |_rng, t| {
                t.record(overlap.0 < overlap.1, || Witness {
                    note: format!("temperature ranges do not overlap: [{}, {}] is empty", overlap.0, overlap.1),
                    states: Vec::new(),
                });
                if overlap.0 >= overlap.1 {
                    return Ok(());
                }
                // a partner state exists at every prescribed volume of either space
                for e in [ea, eb] {
                    let spec = e.spec();
                    let (tl, th, tlog) = shrink(overlap.0, overlap.1, 0.0);
                    let (vl, vh, vlog) = shrink(spec.domain.v.0, spec.domain.v.1, 0.0);
                    for i in 0..8 {
                        for j in 0..8 {
                            let grid = |lo: f64, hi: f64, log: bool, k: usize| {
                                let x = lo + (hi - lo) * k as f64 / 7.0;
                                if log {
                                    x.exp()
                                } else {
                                    x
                                }
                            };
                            let temp = grid(tl, th, tlog, i).clamp(overlap.0, overlap.1);
                            let v = grid(vl, vh, vlog, j).clamp(spec.domain.v.0, spec.domain.v.1);
                            let ok = e
                                .temperature_map()
                                .theta_of_temperature(temp)
                                .and_then(|theta| {
                                    spec.energy(theta.clamp(spec.domain.theta.0, spec.domain.theta.1), v)
                                })
                                .is_ok();
                            t.record(ok, || Witness {
                                note: format!("{} has no state at T={temp}, V={v}", spec.id()),
                                states: Vec::new(),
                            });
                        }
                    }
                }
                Ok(())
            }),
        ),
    ];
    Ok(run_laws(&label, cfg, laws))
}

/// The comparison hypothesis on `(1 - l) Gamma x l Gamma`, plus comparability
/// certified by reconstruction.
pub fn check_ch(
    oracle: &dyn AccessOracle,
    registry: &DerivedRegistry,
    space: &str,
    cfg: &SamplerConfig,
) -> Result<AxiomReport> {
    cfg.check()?;
    let spec = registry.spec(space)?;
    let n = cfg.samples;
    let tol = cfg.reconstruction_tol;
    let laws: Vec<(&'static str, LawFn<'_>)> = vec![
        (
            "CH Comparison hypothesis",
            Box::new(move |rng, t| {
                for i in 0..n {
                    let l = rng.gen_range(0.05..0.95);
                    let (x, y) = (sample_state(spec, cfg, rng)?, sample_state(spec, cfg, rng)?);
                    let a = pair(&x.with_scale(1.0 - l), &y.with_scale(l));
                    // every tenth draw compares a mixture with itself
                    let (x2, y2) = if i % 10 == 0 {
                        (x.clone(), y.clone())
                    } else {
                        (sample_state(spec, cfg, rng)?, sample_state(spec, cfg, rng)?)
                    };
                    let b = pair(&x2.with_scale(1.0 - l), &y2.with_scale(l));
                    let v = oracle.verdict(&a, &b)?;
                    let ok = if i % 10 == 0 { v.equivalent() } else { !v.incomparable() };
                    t.record(ok, || {
                        witness(
                            format!("((1-l)X, lY) vs ((1-l)X', lY') at l={l}: {v}"),
                            &[&a.components[0], &a.components[1], &b.components[0], &b.components[1]],
                        )
                    });
                }
                Ok(())
            }),
        ),
        (
            "CH Comparability gap",
            Box::new(move |rng, t| {
                let refs = loop {
                    let r = orient(oracle, sample_state(spec, cfg, rng)?, sample_state(spec, cfg, rng)?)?;
                    match r {
                        Some((a, b)) if oracle.verdict(&one(&a), &one(&b))?.strictly_precedes() => break (a, b),
                        None => {
                            let (a, b) = (sample_state(spec, cfg, rng)?, sample_state(spec, cfg, rng)?);
                            t.fail("reference candidates are incomparable".into(), vec![a, b]);
                            return Ok(());
                        }
                        _ => {}
                    }
                };
                let (x0, x1) = refs;
                for _ in 0..n.min(50) {
                    let x = sample_state(spec, cfg, rng)?;
                    match comparability_gap(oracle, &x0, &x1, &x, tol) {
                        Ok(gap) => t.record(gap <= 2.0 * tol + 1e-12, || {
                            witness(format!("lambda_plus - lambda_minus = {gap:e}"), &[&x0, &x1, &x])
                        }),
                        Err(e) => t.fail(format!("reconstruction failed: {e}"), vec![x0.clone(), x1.clone(), x]),
                    }
                }
                Ok(())
            }),
        ),
    ];
    Ok(run_laws(space, cfg, laws))
}

/// Positivity of T, `1/T = dS/dU`, equilibrium at equal T and heat flowing
/// from hot to cold. `partner` supplies the second system for the flow checks.
pub fn check_temperature_theorem(
    registry: &DerivedRegistry,
    space: &str,
    partner: &str,
    cfg: &SamplerConfig,
) -> Result<AxiomReport> {
    cfg.check()?;
    let (ea, eb) = (registry.get(space)?, registry.get(partner)?);
    let spec = ea.spec();
    let overlap = temperature_overlap(ea, eb)?;
    let n = cfg.samples;
    let laws: Vec<(&'static str, LawFn<'_>)> = vec![
        (
            "Thm5 Positive temperature",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let theta = spec.theta_from_energy(x.energy, x.volume)?;
                    let temp = ea.temperature(theta)?;
                    t.record(temp > 0.0 && temp.is_finite(), || witness(format!("T = {temp}"), &[&x]));
                }
                Ok(())
            }),
        ),
        (
            "Thm5 Inverse temperature is dS/dU",
            Box::new(move |rng, t| {
                for _ in 0..n {
                    let x = sample_state(spec, cfg, rng)?;
                    let (u, v) = (x.energy, x.volume);
                    let h = 1e-4 * u.abs().max(1e-3);
                    if !spec.contains_uv(u - h, v) || !spec.contains_uv(u + h, v) {
                        continue;
                    }
                    let ds = (ea.raw_uv(u + h, v)? - ea.raw_uv(u - h, v)?) / (2.0 * h);
                    let inv = 1.0 / ea.temperature(spec.theta_from_energy(u, v)?)?;
                    let rel = (ds - inv).abs() / inv;
                    t.record(rel <= 1e-5, || witness(format!("dS/dU = {ds}, 1/T = {inv}"), &[&x]));
                }
                Ok(())
            }),
        ),
        (
            "Thm5 Equal temperature means no flow",
            Box::new(move |rng, t| {
                if overlap.0 >= overlap.1 {
                    return Err(Error::UnreachableTemperature {
                        lo: overlap.0,
                        hi: overlap.1,
                    });
                }
                for i in 0..n {
                    let temp = sample_temperature(overlap, cfg, rng);
                    let x = state_at_temperature(ea, temp, cfg, rng)?;
                    // alternate draws are 10 percent apart and must exchange energy
                    let other = if i % 2 == 0 { temp } else { (temp * 1.1).min(overlap.1) };
                    if other == temp && i % 2 == 1 {
                        continue;
                    }
                    let y = state_at_temperature(eb, other, cfg, rng)?;
                    let eq = equilibrated(registry, &[&x, &y])?;
                    let moved = (eq[0].energy - x.energy).abs();
                    let tiny = moved <= 1e-9 * (x.energy.abs() + y.energy.abs());
                    t.record(tiny == (i % 2 == 0), || {
                        witness(format!("T {temp} vs {other}: energy moved {moved:e}"), &[&x, &y])
                    });
                }
                Ok(())
            }),
        ),
        (
            "Thm5 Heat flows from hot to cold",
            Box::new(move |rng, t| {
                if overlap.0 >= overlap.1 {
                    return Err(Error::UnreachableTemperature {
                        lo: overlap.0,
                        hi: overlap.1,
                    });
                }
                for _ in 0..n {
                    let (ta, tb) = (sample_temperature(overlap, cfg, rng), sample_temperature(overlap, cfg, rng));
                    let x = state_at_temperature(ea, ta, cfg, rng)?;
                    let y = state_at_temperature(eb, tb, cfg, rng)?;
                    let eq = equilibrated(registry, &[&x, &y])?;
                    let dx = eq[0].energy - x.energy;
                    let ok = if ta > tb { dx <= 0.0 } else { dx >= 0.0 };
                    t.record(ok, || witness(format!("T {ta} and {tb}: first system gains {dx:e}"), &[&x, &y]));
                }
                Ok(())
            }),
        ),
    ];
    Ok(run_laws(space, cfg, laws))
}

/// Groups of laws selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    General,
    Convexity,
    Simple,
    Thermal,
    Ch,
    Temperature,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::General,
        Suite::Convexity,
        Suite::Simple,
        Suite::Thermal,
        Suite::Ch,
        Suite::Temperature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::General => "general",
            Suite::Convexity => "convexity",
            Suite::Simple => "simple",
            Suite::Thermal => "thermal",
            Suite::Ch => "ch",
            Suite::Temperature => "temperature",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown suite `{s}`")))
    }
}

/// Runs the selected suites over every space of the registry. Thermal laws
/// run for each unordered pair of distinct spaces, or a space with itself
/// when the registry has only one.
pub fn run_suite(
    oracle: &dyn AccessOracle,
    registry: &DerivedRegistry,
    suites: &[Suite],
    cfg: &SamplerConfig,
) -> Result<AxiomReport> {
    cfg.check()?;
    let ids: Vec<&str> = registry.ids().collect();
    let mut report = AxiomReport::new(cfg);
    for &suite in suites {
        match suite {
            Suite::Thermal => {
                let mut pairs = Vec::new();
                for (i, a) in ids.iter().enumerate() {
                    for b in &ids[i + 1..] {
                        pairs.push((*a, *b));
                    }
                }
                if pairs.is_empty() {
                    pairs.extend(ids.first().map(|a| (*a, *a)));
                }
                for p in pairs {
                    report.extend(check_thermal_axioms(oracle, registry, p, cfg)?);
                }
            }
            _ => {
                for (i, id) in ids.iter().enumerate() {
                    let part = match suite {
                        Suite::General => check_general_axioms(oracle, registry, id, cfg)?,
                        Suite::Convexity => check_convexity(oracle, registry, id, cfg)?,
                        Suite::Simple => check_simple_axioms(oracle, registry, id, cfg)?,
                        Suite::Ch => check_ch(oracle, registry, id, cfg)?,
                        Suite::Temperature => {
                            let partner = ids[(i + 1) % ids.len()];
                            check_temperature_theorem(registry, id, partner, cfg)?
                        }
                        Suite::Thermal => unreachable!(),
                    };
                    report.extend(part);
                }
            }
        }
    }
    Ok(report)
}
