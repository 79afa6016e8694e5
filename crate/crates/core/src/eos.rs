//! Simple systems declared by `U(theta, v)` and `P(theta, v)` per unit matter.
//!
//! `theta` is an empirical temperature shared by every space in a registry:
//! two states are in thermal equilibrium exactly when their `theta` agree.
//! Extensive states scale as `lambda X = (lambda U, lambda V)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Bindings, Expr, Var};
use crate::numerics::roots::{brent, RootOptions};

const REDUCED_JSON: &str = include_str!("../data/registry_reduced.json");
const SI_JSON: &str = include_str!("../data/registry_si.json");
const MIXING_JSON: &str = include_str!("../data/mixing_registry.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Si,
    Reduced,
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "si" => Ok(Units::Si),
            "reduced" => Ok(Units::Reduced),
            other => Err(Error::InvalidSpec(format!("unknown units `{other}`"))),
        }
    }
}

/// Registry entry as written in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDecl {
    pub id: String,
    #[serde(rename = "U")]
    pub energy: String,
    #[serde(rename = "P")]
    pub pressure: String,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    pub domain: DomainDecl,
    pub reference: ReferenceDecl,
    /// Absolute-temperature anchor; defaults to `T = theta` at the reference point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainDecl {
    pub theta: [f64; 2],
    pub v: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDecl {
    pub theta: f64,
    pub v: f64,
    #[serde(default)]
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorDecl {
    pub theta: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryDecl {
    pub spaces: Vec<SpaceDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub theta: (f64, f64),
    pub v: (f64, f64),
}

impl Domain {
    pub fn contains(&self, theta: f64, v: f64) -> bool {
        theta >= self.theta.0 && theta <= self.theta.1 && v >= self.v.0 && v <= self.v.1
    }
}

/// A validated simple system with its symbolic partial derivatives.
#[derive(Debug, Clone)]
pub struct EosSpec {
    decl: SpaceDecl,
    energy: Expr,
    pressure: Expr,
    du_dtheta: Expr,
    du_dv: Expr,
    dp_dtheta: Expr,
    pub domain: Domain,
    pub reference: (f64, f64),
    pub reference_entropy: f64,
    /// `(theta_0, T_0)` anchoring the absolute temperature scale.
    pub anchor: (f64, f64),
}

impl EosSpec {
    pub fn new(decl: SpaceDecl) -> Result<Self> {
        let id = decl.id.clone();
        let invalid = |msg: String| Error::InvalidSpec(format!("{id}: {msg}"));
        let [tlo, thi] = decl.domain.theta;
        let [vlo, vhi] = decl.domain.v;
        if !(tlo < thi) || !(vlo < vhi) || ![tlo, thi, vlo, vhi].iter().all(|x| x.is_finite()) {
            return Err(invalid("domain bounds must satisfy lo < hi".into()));
        }
        let r = decl.reference;
        if !(r.theta > tlo && r.theta < thi && r.v > vlo && r.v < vhi) {
            return Err(invalid("reference point must lie strictly inside the domain".into()));
        }
        let anchor = decl.anchor.map_or((r.theta, r.theta), |a| (a.theta, a.temperature));
        if !(anchor.0 >= tlo && anchor.0 <= thi) || !(anchor.1 > 0.0) {
            return Err(invalid("anchor must lie in the theta range with T > 0".into()));
        }
        let bindings = Bindings::from(decl.constants.clone());
        let mut allowed: BTreeSet<String> = decl.constants.keys().cloned().collect();
        allowed.insert("theta".into());
        allowed.insert("v".into());
        let prepare = |text: &str| -> Result<Expr> {
            let e = parse(text)?;
            if let Some(bad) = e.free_names().into_iter().find(|n| !allowed.contains(n)) {
                return Err(Error::MissingBinding(bad));
            }
            Ok(e.substitute(&bindings))
        };
        let energy = prepare(&decl.energy)?;
        let pressure = prepare(&decl.pressure)?;
        Ok(Self {
            du_dtheta: energy.differentiate(Var::Theta),
            du_dv: energy.differentiate(Var::V),
            dp_dtheta: pressure.differentiate(Var::Theta),
            energy,
            pressure,
            domain: Domain {
                theta: (tlo, thi),
                v: (vlo, vhi),
            },
            reference: (r.theta, r.v),
            reference_entropy: r.entropy,
            anchor,
            decl,
        })
    }

    pub fn id(&self) -> &str {
        &self.decl.id
    }

    pub fn decl(&self) -> &SpaceDecl {
        &self.decl
    }

    fn check(&self, theta: f64, v: f64) -> Result<()> {
        if self.domain.contains(theta, v) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{}: (theta, v) = ({theta}, {v}) outside [{}, {}] x [{}, {}]",
                self.id(),
                self.domain.theta.0,
                self.domain.theta.1,
                self.domain.v.0,
                self.domain.v.1
            )))
        }
    }

    /// Energy per unit matter; errors outside the domain rectangle.
    pub fn energy(&self, theta: f64, v: f64) -> Result<f64> {
        self.check(theta, v)?;
        self.u(theta, v)
    }

    pub fn pressure(&self, theta: f64, v: f64) -> Result<f64> {
        self.check(theta, v)?;
        self.p(theta, v)
    }

    // Unchecked evaluators used inside integrators; callers enforce the domain.
    pub(crate) fn u(&self, theta: f64, v: f64) -> Result<f64> {
        self.energy.eval_at(theta, v)
    }

    pub(crate) fn p(&self, theta: f64, v: f64) -> Result<f64> {
        self.pressure.eval_at(theta, v)
    }

    pub(crate) fn u_theta(&self, theta: f64, v: f64) -> Result<f64> {
        self.du_dtheta.eval_at(theta, v)
    }

    pub(crate) fn u_v(&self, theta: f64, v: f64) -> Result<f64> {
        self.du_dv.eval_at(theta, v)
    }

    pub(crate) fn p_theta(&self, theta: f64, v: f64) -> Result<f64> {
        self.dp_dtheta.eval_at(theta, v)
    }

    /// `P + (dU/dV)_theta`, the denominator of Planck's integrand.
    pub fn planck_denominator(&self, theta: f64, v: f64) -> Result<f64> {
        Ok(self.p(theta, v)? + self.u_v(theta, v)?)
    }

    /// Heat capacity per unit matter at fixed volume, `(dU/dtheta)_V`.
    pub fn heat_capacity(&self, theta: f64, v: f64) -> Result<f64> {
        self.check(theta, v)?;
        self.u_theta(theta, v)
    }

    /// Energy interval available at volume `v`.
    pub fn energy_bracket(&self, v: f64) -> Result<(f64, f64)> {
        Ok((self.energy(self.domain.theta.0, v)?, self.energy(self.domain.theta.1, v)?))
    }

    pub fn theta_from_energy(&self, u: f64, v: f64) -> Result<f64> {
        let (lo, hi) = self.energy_bracket(v)?;
        if !(u >= lo && u <= hi) {
            return Err(Error::OutOfRange { value: u, lo, hi });
        }
        let (tlo, thi) = self.domain.theta;
        brent(|t| Ok(self.u(t, v)? - u), tlo, thi, RootOptions::default())
    }

    pub fn contains_uv(&self, u: f64, v: f64) -> bool {
        if !(v >= self.domain.v.0 && v <= self.domain.v.1) {
            return false;
        }
        matches!(self.energy_bracket(v), Ok((lo, hi)) if u >= lo && u <= hi)
    }

    pub fn validate(&self, grid: usize) -> Result<ValidationReport> {
        validate_spec(self, grid)
    }
}

/// Anything whose pressure can be sampled as a function of the state.
pub trait PressureSurface {
    fn theta_range(&self) -> (f64, f64);
    fn v_range(&self) -> (f64, f64);
    /// `(U per unit, P)` at `(theta, v)`.
    fn sample(&self, theta: f64, v: f64) -> Result<(f64, f64)>;
}

impl PressureSurface for EosSpec {
    fn theta_range(&self) -> (f64, f64) {
        self.domain.theta
    }

    fn v_range(&self) -> (f64, f64) {
        self.domain.v
    }

    fn sample(&self, theta: f64, v: f64) -> Result<(f64, f64)> {
        Ok((self.u(theta, v)?, self.p(theta, v)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzProbe {
    /// Largest normalized difference quotient `|dP|/P_ref / |dX|_rel` seen.
    pub ratio: f64,
    pub theta: f64,
    pub v: f64,
}

const BEAM: usize = 6;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Bounds the pressure's difference quotients over a grid, refining every
/// grid edge toward its steepest pieces so that jumps show up as diverging ratios.
pub fn probe_lipschitz<S: PressureSurface + ?Sized>(
    surface: &S,
    grid: usize,
    refinements: usize,
) -> Result<LipschitzProbe> {
    let (tlo, thi) = surface.theta_range();
    let (vlo, vhi) = surface.v_range();
    // Positive axes are probed in log coordinates so that power laws look
    // equally smooth across decades.
    let (tlog, vlog) = (tlo > 0.0, vlo > 0.0);
    let fwd = |x: f64, log: bool| if log { x.ln() } else { x };
    let back = |x: f64, log: bool| if log { x.exp() } else { x };
    let thetas: Vec<f64> = linspace(fwd(tlo, tlog), fwd(thi, tlog), grid);
    let vs: Vec<f64> = linspace(fwd(vlo, vlog), fwd(vhi, vlog), grid);
    let (mut umin, mut umax, mut pref) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &t in &thetas {
        for &v in &vs {
            let s = surface.sample(back(t, tlog), back(v, vlog))?;
            umin = umin.min(s.0);
            umax = umax.max(s.0);
            pref = pref.max(s.1.abs());
        }
    }
    let uspan = (umax - umin).max(f64::MIN_POSITIVE);
    let vspan = if vlog { 1.0 } else { vhi - vlo };
    let floor = (pref * 1e-9).max(f64::MIN_POSITIVE);
    let dp = |a: (f64, f64, f64), b: (f64, f64, f64)| (a.2 - b.2).abs() / a.2.abs().max(b.2.abs()).max(floor);
    let ratio = |a: (f64, f64, f64), b: (f64, f64, f64)| -> f64 {
        // a, b are (u, mapped v, P)
        let dx = (((a.0 - b.0) / uspan).powi(2) + ((a.1 - b.1) / vspan).powi(2)).sqrt();
        if dx == 0.0 {
            0.0
        } else {
            dp(a, b) / dx
        }
    };
    let mut worst = LipschitzProbe {
        ratio: 0.0,
        theta: tlo,
        v: vlo,
    };
    let mut edges = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            if i + 1 < grid {
                edges.push(((thetas[i], vs[j]), (thetas[i + 1], vs[j])));
            }
            if j + 1 < grid {
                edges.push(((thetas[i], vs[j]), (thetas[i], vs[j + 1])));
            }
        }
    }
    type Node = ((f64, f64), (f64, f64), (f64, f64, f64), (f64, f64, f64));
    let eval = |(t, v): (f64, f64)| -> Result<(f64, f64, f64)> {
        let (u, p) = surface.sample(back(t, tlog), back(v, vlog))?;
        Ok((u, v, p))
    };
    for (a, b) in edges {
        let mut beam: Vec<Node> = vec![(a, b, eval(a)?, eval(b)?)];
        for level in 0..=refinements {
            for &(a, b, fa, fb) in &beam {
                let r = ratio(fa, fb);
                if r > worst.ratio {
                    worst = LipschitzProbe {
                        ratio: r,
                        theta: back(0.5 * (a.0 + b.0), tlog),
                        v: back(0.5 * (a.1 + b.1), vlog),
                    };
                }
            }
            if level == refinements {
                break;
            }
            let mut next = Vec::with_capacity(2 * beam.len());
            for &(a, b, fa, fb) in &beam {
                let m = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
                let fm = eval(m)?;
                next.push((a, m, fa, fm));
                next.push((m, b, fm, fb));
            }
            // Keep the halves with the largest pressure change; a jump keeps its
            // full size while smooth variation halves with every level.
            next.sort_by(|x, y| dp(y.2, y.3).total_cmp(&dp(x.2, x.3)));
            next.truncate(BEAM);
            beam = next;
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: String,
    pub theta: f64,
    pub v: f64,
    pub value: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at theta={}, v={} (value {:e})",
            self.check, self.theta, self.v, self.value
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub space_id: String,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
    pub lipschitz_ratio: f64,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            writeln!(f, "{}: all checks pass", self.space_id)?;
        }
        for v in &self.violations {
            writeln!(f, "{}: violation: {v}", self.space_id)?;
        }
        for w in &self.warnings {
            writeln!(f, "{}: warning: {w}", self.space_id)?;
        }
        Ok(())
    }
}

/// Normalized Lipschitz bound on the pressure used by validation.
pub const DEFAULT_LIPSCHITZ_BOUND: f64 = 1e6;

pub fn validate_spec(spec: &EosSpec, grid: usize) -> Result<ValidationReport> {
    if grid < 8 {
        return Err(Error::InvalidSpec(format!("validation grid {grid} < 8")));
    }
    let mut report = ValidationReport {
        space_id: spec.id().to_string(),
        ..Default::default()
    };
    let thetas = linspace(spec.domain.theta.0, spec.domain.theta.1, grid);
    let vs = linspace(spec.domain.v.0, spec.domain.v.1, grid);
    let mut push = |check: &str, theta: f64, v: f64, value: f64| {
        report.violations.push(Violation {
            check: check.to_string(),
            theta,
            v,
            value,
        })
    };
    let mut evaluable = true;
    for &t in &thetas {
        for &v in &vs {
            let checks: [(&str, Result<f64>); 3] = [
                ("(dU/dTheta)_V <= 0", spec.u_theta(t, v)),
                ("P <= 0", spec.p(t, v)),
                ("P + (dU/dV)_Theta <= 0", spec.planck_denominator(t, v)),
            ];
            if let Err(e) = spec.u(t, v) {
                push(&format!("U not evaluable: {e}"), t, v, f64::NAN);
                evaluable = false;
            }
            for (name, value) in checks {
                match value {
                    Ok(x) if x > 0.0 => {}
                    Ok(x) => push(name, t, v, x),
                    Err(e) => {
                        push(&format!("{name}: {e}"), t, v, f64::NAN);
                        evaluable = false;
                    }
                }
            }
        }
    }
    if evaluable {
        match probe_lipschitz(spec, grid, 30) {
            Ok(probe) => {
                report.lipschitz_ratio = probe.ratio;
                if probe.ratio > DEFAULT_LIPSCHITZ_BOUND {
                    push("P not Lipschitz", probe.theta, probe.v, probe.ratio);
                }
            }
            Err(e) => push(&format!("Lipschitz probe failed: {e}"), f64::NAN, f64::NAN, f64::NAN),
        }
        report.warnings.extend(convexity_warnings(spec, &thetas, &vs));
    }
    Ok(report)
}

/// Midpoints of boundary states that fall outside the induced `(U, V)` region.
fn convexity_warnings(spec: &EosSpec, thetas: &[f64], vs: &[f64]) -> Vec<String> {
    let mut boundary = Vec::new();
    let (nt, nv) = (thetas.len(), vs.len());
    for (i, &t) in thetas.iter().enumerate() {
        for (j, &v) in vs.iter().enumerate() {
            if i == 0 || j == 0 || i == nt - 1 || j == nv - 1 {
                if let Ok(u) = spec.u(t, v) {
                    boundary.push((u, v));
                }
            }
        }
    }
    let mut out = Vec::new();
    for a in 0..boundary.len() {
        for b in a + 1..boundary.len() {
            let (u, v) = (
                0.5 * (boundary[a].0 + boundary[b].0),
                0.5 * (boundary[a].1 + boundary[b].1),
            );
            if !spec.contains_uv(u, v) {
                out.push(format!(
                    "(U, V) region not convex: midpoint ({u}, {v}) of boundary states lies outside"
                ));
                if out.len() >= 5 {
                    return out;
                }
            }
        }
    }
    out
}

/// A state of a scaled copy `lambda * Gamma` of a simple system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleState {
    pub space: String,
    pub scale: f64,
    #[serde(rename = "U")]
    pub energy: f64,
    #[serde(rename = "V")]
    pub volume: f64,
}

impl SimpleState {
    pub fn new(space: impl Into<String>, scale: f64, energy: f64, volume: f64) -> Self {
        Self {
            space: space.into(),
            scale,
            energy,
            volume,
        }
    }

    pub fn from_intensive(space: impl Into<String>, scale: f64, u: f64, v: f64) -> Self {
        Self::new(space, scale, scale * u, scale * v)
    }

    /// Builds the state at empirical temperature `theta` and volume per unit `v`.
    pub fn at(spec: &EosSpec, scale: f64, theta: f64, v: f64) -> Result<Self> {
        Ok(Self::from_intensive(spec.id(), scale, spec.energy(theta, v)?, v))
    }

    pub fn intensive(&self) -> (f64, f64) {
        (self.energy / self.scale, self.volume / self.scale)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.space.clone(),
            self.scale * factor,
            self.energy * factor,
            self.volume * factor,
        )
    }

    /// The same intensive state carrying matter content `scale`.
    pub fn with_scale(&self, scale: f64) -> Self {
        self.scaled(scale / self.scale)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SpaceRegistry {
    spaces: BTreeMap<String, EosSpec>,
}

impl SpaceRegistry {
    pub fn from_decl(decl: RegistryDecl) -> Result<Self> {
        let mut spaces = BTreeMap::new();
        for s in decl.spaces {
            let id = s.id.clone();
            if spaces.insert(id.clone(), EosSpec::new(s)?).is_some() {
                return Err(Error::InvalidSpec(format!("duplicate space id `{id}`")));
            }
        }
        Ok(Self { spaces })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_decl(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn bundled(units: Units) -> Self {
        let text = match units {
            Units::Si => SI_JSON,
            Units::Reduced => REDUCED_JSON,
        };
        Self::from_json(text).expect("bundled registry is valid")
    }

    /// Two distinguishable reduced ideal gases and their mixture.
    pub fn mixing_demo() -> Self {
        Self::from_json(MIXING_JSON).expect("bundled registry is valid")
    }

    pub fn insert(&mut self, spec: EosSpec) -> Result<()> {
        let id = spec.id().to_string();
        if self.spaces.contains_key(&id) {
            return Err(Error::InvalidSpec(format!("duplicate space id `{id}`")));
        }
        self.spaces.insert(id, spec);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&EosSpec> {
        self.spaces
            .get(id)
            .ok_or_else(|| Error::UnknownSpace(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.spaces.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EosSpec> {
        self.spaces.values()
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    pub fn to_decl(&self) -> RegistryDecl {
        RegistryDecl {
            spaces: self.spaces.values().map(|s| s.decl.clone()).collect(),
        }
    }
}
