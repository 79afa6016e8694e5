//! Entropy constants across different systems: multiplicative scales from
//! calibrator quads, and additive constants from declared processes that turn
//! one kind of matter into another.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::eos::SimpleState;
use crate::error::{Error, Result};
use crate::numerics::roots::{brent, RootOptions};
use crate::oracle::{AccessOracle, CompoundState, OperationalOracle};
use crate::thermo::DerivedRegistry;

/// `(X0, Y1) ~ (X1, Y0)` with `X0 ≺≺ X1` in one space and `Y0 ≺≺ Y1` in another.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratorQuad {
    pub x0: SimpleState,
    pub x1: SimpleState,
    pub y0: SimpleState,
    pub y1: SimpleState,
    /// Relative energy gap left in `(X0, Y1) ~ (X1, Y0)`.
    pub residual: f64,
}

fn isochore_point(oracle: &OperationalOracle<'_>, space: &str, theta: f64, v: f64) -> Result<SimpleState> {
    SimpleState::at(oracle.registry().spec(space)?, 1.0, theta, v)
}

/// Log-interpolated point `q` of the way through `[lo, hi]`.
fn quantile(lo: f64, hi: f64, q: f64) -> f64 {
    if lo > 0.0 {
        (lo.ln() + q * (hi.ln() - lo.ln())).exp()
    } else {
        lo + q * (hi - lo)
    }
}

/// Searches an isochore of `g2` for the state `Y1` that balances a step
/// `X0 -> X1` along an isochore of `g1`.
pub fn find_calibrators(oracle: &OperationalOracle<'_>, g1: &str, g2: &str, seed: u64) -> Result<CalibratorQuad> {
    let registry = oracle.registry();
    let (s1, s2) = (registry.spec(g1)?, registry.spec(g2)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ crate::axioms::fnv1a(g1.bytes().chain([0]).chain(g2.bytes())));
    let v1 = quantile(s1.domain.v.0, s1.domain.v.1, rng.gen_range(0.35..0.65));
    let t0 = quantile(s1.domain.theta.0, s1.domain.theta.1, rng.gen_range(0.3..0.4));
    let t1 = quantile(s1.domain.theta.0, s1.domain.theta.1, rng.gen_range(0.45..0.55));
    let x0 = isochore_point(oracle, g1, t0, v1)?;
    let x1 = isochore_point(oracle, g1, t1, v1)?;
    if g1 == g2 {
        return Ok(CalibratorQuad {
            y0: x0.clone(),
            y1: x1.clone(),
            x0,
            x1,
            residual: 0.0,
        });
    }
    let step = oracle.verdict(&x0.clone().into(), &x1.clone().into())?;
    if !step.strictly_precedes() {
        return Err(Error::ReferenceNotStrict);
    }
    let v2 = quantile(s2.domain.v.0, s2.domain.v.1, rng.gen_range(0.35..0.65));
    let (lo, hi) = s2.domain.theta;
    let ty0 = quantile(lo, hi, rng.gen_range(0.2..0.3));
    let t_top = quantile(lo, hi, 0.98);
    let y0 = isochore_point(oracle, g2, ty0, v2)?;
    let rhs = CompoundState::new(vec![x1.clone(), y0.clone()]);
    let gap = |t: f64| -> Result<f64> {
        let y1 = isochore_point(oracle, g2, t, v2)?;
        let lhs = CompoundState::new(vec![x0.clone(), y1]);
        match oracle.verdict(&lhs, &rhs) {
            Ok(v) => Ok(v.gap),
            Err(Error::UnreachableTemperature { .. }) => Err(Error::NoBracket),
            Err(e) => Err(e),
        }
    };
    let (g_lo, g_hi) = (gap(ty0)?, gap(t_top)?);
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::NoBracket);
    }
    let t = brent(gap, ty0, t_top, RootOptions::default())?;
    let y1 = isochore_point(oracle, g2, t, v2)?;
    let residual = gap(t)?.abs();
    Ok(CalibratorQuad { x0, x1, y0, y1, residual })
}

/// Entropy steps of one quad in the raw entropies of its two spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEdge {
    pub from: String,
    pub to: String,
    /// `S_from(X1) - S_from(X0)`.
    pub delta_from: f64,
    /// `S_to(Y1) - S_to(Y0)`.
    pub delta_to: f64,
}

impl ScaleEdge {
    pub fn from_quad(quad: &CalibratorQuad, registry: &DerivedRegistry) -> Result<Self> {
        let s = |x: &SimpleState| registry.raw_entropy(x);
        Ok(Self {
            from: quad.x0.space.clone(),
            to: quad.y0.space.clone(),
            delta_from: s(&quad.x1)? - s(&quad.x0)?,
            delta_to: s(&quad.y1)? - s(&quad.y0)?,
        })
    }

    /// `a_to / a_from` forced by `a_from dS_from = a_to dS_to`.
    pub fn ratio(&self) -> f64 {
        self.delta_from / self.delta_to
    }
}

pub const SCALE_CONSISTENCY: f64 = 1e-6;

/// Multiplicative constants with `a = 1` on `reference`, propagated along a
/// breadth-first spanning tree; every edge off the tree is checked against it.
pub fn calibrate_scales(spaces: &[String], reference: &str, edges: &[ScaleEdge]) -> Result<BTreeMap<String, f64>> {
    if !spaces.iter().any(|s| s == reference) {
        return Err(Error::UnknownSpace(reference.to_string()));
    }
    let mut adj: BTreeMap<&str, Vec<(&str, f64)>> = spaces.iter().map(|s| (s.as_str(), Vec::new())).collect();
    for e in edges {
        if e.from == e.to {
            continue;
        }
        for id in [&e.from, &e.to] {
            if !adj.contains_key(id.as_str()) {
                return Err(Error::UnknownSpace(id.clone()));
            }
        }
        let r = e.ratio();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "calibrator {} -> {} has entropy steps {} and {}",
                e.from, e.to, e.delta_from, e.delta_to
            )));
        }
        adj.get_mut(e.from.as_str()).unwrap().push((e.to.as_str(), r));
        adj.get_mut(e.to.as_str()).unwrap().push((e.from.as_str(), 1.0 / r));
    }
    let mut scale: BTreeMap<&str, f64> = BTreeMap::new();
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    scale.insert(reference, 1.0);
    let mut queue = VecDeque::from([reference]);
    while let Some(n) = queue.pop_front() {
        for &(m, r) in &adj[n] {
            if !scale.contains_key(m) {
                scale.insert(m, scale[n] * r);
                parent.insert(m, n);
                queue.push_back(m);
            }
        }
    }
    let missing: Vec<String> = spaces.iter().filter(|s| !scale.contains_key(s.as_str())).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::DisconnectedGraph(missing));
    }
    for e in edges.iter().filter(|e| e.from != e.to) {
        let (a, b) = (scale[e.from.as_str()], scale[e.to.as_str()]);
        let mismatch = (b - a * e.ratio()).abs() / b.abs();
        if mismatch > SCALE_CONSISTENCY {
            return Err(Error::InconsistentQuads {
                cycle: tree_cycle(&parent, &e.from, &e.to),
                mismatch,
            });
        }
    }
    Ok(scale.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

/// The cycle closed by edge `a - b` over the spanning tree.
fn tree_cycle(parent: &BTreeMap<&str, &str>, a: &str, b: &str) -> Vec<String> {
    let path = |start: &str| {
        let mut out = vec![start.to_string()];
        let mut n = start;
        while let Some((_, &p)) = parent.get_key_value(n) {
            out.push(p.to_string());
            n = p;
        }
        out
    };
    let (pa, pb) = (path(a), path(b));
    let common = pa.iter().find(|n| pb.contains(n)).cloned().unwrap_or_default();
    let mut cycle: Vec<String> = pa.iter().take_while(|n| **n != common).cloned().collect();
    cycle.push(common.clone());
    let mut back: Vec<String> = pb.iter().take_while(|n| **n != common).cloned().collect();
    back.reverse();
    cycle.extend(back);
    cycle.push(a.to_string());
    cycle
}

/// Calibrated entropy `sum a_Gamma S_Gamma(X_i)` with no additive constants.
pub fn calibrated_entropy(registry: &DerivedRegistry, scales: &BTreeMap<String, f64>, c: &CompoundState) -> Result<f64> {
    c.components
        .iter()
        .map(|x| {
            let a = scales.get(&x.space).ok_or_else(|| Error::UnknownSpace(x.space.clone()))?;
            Ok(a * registry.raw_entropy(x)?)
        })
        .sum()
}

/// A declared adiabatic process, possibly between different kinds of matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessDecl {
    pub id: String,
    pub source: Vec<SimpleState>,
    pub target: Vec<SimpleState>,
    #[serde(default)]
    pub note: String,
}

impl ProcessDecl {
    pub fn source_state(&self) -> CompoundState {
        CompoundState::new(self.source.clone())
    }

    pub fn target_state(&self) -> CompoundState {
        CompoundState::new(self.target.clone())
    }
}

/// The node a compound belongs to: its spaces with their matter content.
pub fn node_of(states: &[SimpleState]) -> String {
    CompoundState::new(states.to_vec()).signature_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessGraph {
    /// Extra nodes with no processes attached.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<String>,
    pub processes: Vec<ProcessDecl>,
}

impl ProcessGraph {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn mixing_demo() -> Self {
        Self::from_json(include_str!("../data/mixing_graph.json")).expect("bundled graph parses")
    }

    /// Every node touched by the graph, sorted.
    pub fn node_ids(&self) -> Vec<String> {
        let mut set: BTreeSet<String> = self.nodes.iter().cloned().collect();
        for p in &self.processes {
            set.insert(node_of(&p.source));
            set.insert(node_of(&p.target));
        }
        set.into_iter().collect()
    }
}

fn serialize_extended<S: Serializer>(m: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<Option<f64>>> = m
        .iter()
        .map(|r| r.iter().map(|x| x.is_finite().then_some(*x)).collect())
        .collect();
    rows.serialize(s)
}

/// Entropy offsets between nodes; infinite where no chain of processes leads.
/// Serialized with `null` for infinity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchMatrix {
    pub nodes: Vec<String>,
    #[serde(serialize_with = "serialize_extended")]
    pub f: Vec<Vec<f64>>,
    /// A directed cycle with negative total weight exists.
    pub negative_cycle: bool,
}

impl MismatchMatrix {
    pub fn new(nodes: Vec<String>) -> Self {
        let n = nodes.len();
        let mut f = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in f.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        Self {
            nodes,
            f,
            negative_cycle: false,
        }
    }

    pub fn index(&self, node: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == node)
            .ok_or_else(|| Error::UnknownSpace(node.to_string()))
    }

    pub fn get(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.f[self.index(a)?][self.index(b)?])
    }

    pub fn set(&mut self, a: &str, b: &str, value: f64) -> Result<()> {
        let (i, j) = (self.index(a)?, self.index(b)?);
        self.f[i][j] = value;
        Ok(())
    }

    /// Shortest-path closure; afterwards `F(a, c) <= F(a, b) + F(b, c)`.
    pub fn close(&mut self) {
        let n = self.nodes.len();
        for k in 0..n {
            for i in 0..n {
                if self.f[i][k] == f64::INFINITY {
                    continue;
                }
                for j in 0..n {
                    let through = self.f[i][k] + self.f[k][j];
                    if through < self.f[i][j] {
                        self.f[i][j] = through;
                    }
                }
            }
        }
        self.negative_cycle = (0..n).any(|i| self.f[i][i] < 0.0);
    }
}

/// Tightest offsets `S(target) - S(source)` over the declared processes,
/// closed over chains. `entropy` is the calibrated entropy without additive constants.
pub fn compute_f(graph: &ProcessGraph, entropy: impl Fn(&CompoundState) -> Result<f64>) -> Result<MismatchMatrix> {
    let mut m = MismatchMatrix::new(graph.node_ids());
    for p in &graph.processes {
        let (a, b) = (node_of(&p.source), node_of(&p.target));
        if a == b {
            continue;
        }
        let w = entropy(&p.target_state())? - entropy(&p.source_state())?;
        if w < m.get(&a, &b)? {
            m.set(&a, &b, w)?;
        }
    }
    m.close();
    Ok(m)
}

/// Ordered pairs `(from, to)` where `to` can be reached but never left back: `to` is a sink.
pub fn check_axiom_m(f: &MismatchMatrix) -> Vec<(String, String)> {
    let n = f.nodes.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && f.f[i][j].is_finite() && f.f[j][i] == f64::INFINITY {
                out.push((f.nodes[i].clone(), f.nodes[j].clone()));
            }
        }
    }
    out
}

/// Interval `[-F(b, a), F(a, b)]` allowed for `B(a) - B(b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEntry {
    pub a: String,
    pub b: String,
    #[serde(serialize_with = "serialize_bound")]
    pub lower: f64,
    #[serde(serialize_with = "serialize_bound")]
    pub upper: f64,
}

fn serialize_bound<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    x.is_finite().then_some(*x).serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantAssignment {
    pub reference: String,
    /// Additive constant per node.
    pub constants: BTreeMap<String, f64>,
    pub feasible: bool,
    pub gaps: Vec<GapEntry>,
    /// Pairs whose constants violate the allowed interval (empty unless something is broken).
    pub violations: Vec<(String, String)>,
}

impl ConstantAssignment {
    pub fn constant(&self, node: &str) -> f64 {
        self.constants.get(node).copied().unwrap_or(0.0)
    }
}

/// Solves `B(a) - B(b) <= F(a, b)` as difference constraints by Bellman-Ford
/// relaxation from a virtual source, then pins the first node to zero.
pub fn assign_additive_constants(f: &MismatchMatrix) -> Result<ConstantAssignment> {
    let n = f.nodes.len();
    // B(i) - B(j) <= F(i, j) is the edge j -> i with weight F(i, j)
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && f.f[i][j].is_finite() {
                edges.push((j, i, f.f[i][j]));
            }
        }
    }
    let mut dist = vec![0.0; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut last = None;
    for _ in 0..=n {
        last = None;
        for &(u, v, w) in &edges {
            if dist[u] + w < dist[v] - 1e-12 * (1.0 + dist[v].abs()) {
                dist[v] = dist[u] + w;
                pred[v] = Some(u);
                last = Some(v);
            }
        }
        if last.is_none() {
            break;
        }
    }
    if let Some(mut v) = last {
        for _ in 0..n {
            v = pred[v].expect("relaxed node has a predecessor");
        }
        let mut cycle = vec![v];
        let mut u = pred[v].expect("cycle node has a predecessor");
        while u != v {
            cycle.push(u);
            u = pred[u].expect("cycle node has a predecessor");
        }
        // predecessors run against the constraint edges; list nodes in process order
        let total: f64 = cycle
            .iter()
            .zip(cycle.iter().cycle().skip(1))
            .map(|(&a, &b)| f.f[a][b])
            .sum();
        let mut names: Vec<String> = cycle.iter().map(|&i| f.nodes[i].clone()).collect();
        names.push(names[0].clone());
        return Err(Error::Infeasible { cycle: names, total });
    }
    let shift = dist.first().copied().unwrap_or(0.0);
    let constants: BTreeMap<String, f64> = f
        .nodes
        .iter()
        .zip(&dist)
        .map(|(k, d)| (k.clone(), d - shift))
        .collect();
    let mut gaps = Vec::new();
    let mut violations = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (upper, lower) = (f.f[i][j], -f.f[j][i]);
            if upper.is_finite() || lower.is_finite() {
                if lower < upper {
                    gaps.push(GapEntry {
                        a: f.nodes[i].clone(),
                        b: f.nodes[j].clone(),
                        lower,
                        upper,
                    });
                }
                let d = dist[i] - dist[j];
                let slack = 1e-9 * (1.0 + d.abs());
                if d > upper + slack || d < lower - slack {
                    violations.push((f.nodes[i].clone(), f.nodes[j].clone()));
                }
            }
        }
    }
    Ok(ConstantAssignment {
        reference: f.nodes.first().cloned().unwrap_or_default(),
        constants,
        feasible: true,
        gaps,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessCheck {
    pub id: String,
    pub source_entropy: f64,
    pub target_entropy: f64,
    pub increase: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub processes: Vec<ProcessCheck>,
    pub passed: bool,
}

/// Universal entropy `calibrated + B(node)` must not decrease along any declared process.
pub fn verify_universal_monotonicity(
    graph: &ProcessGraph,
    assignment: &ConstantAssignment,
    entropy: impl Fn(&CompoundState) -> Result<f64>,
) -> Result<MonotonicityReport> {
    let mut processes = Vec::new();
    for p in &graph.processes {
        let s = entropy(&p.source_state())? + assignment.constant(&node_of(&p.source));
        let t = entropy(&p.target_state())? + assignment.constant(&node_of(&p.target));
        processes.push(ProcessCheck {
            id: p.id.clone(),
            source_entropy: s,
            target_entropy: t,
            increase: t - s,
            monotone: s <= t + 1e-9,
        });
    }
    let passed = processes.iter().all(|p| p.monotone);
    Ok(MonotonicityReport { processes, passed })
}

/// Everything the calibrate command reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub reference: String,
    pub quads: Vec<CalibratorQuad>,
    pub scales: BTreeMap<String, f64>,
    pub mismatch: MismatchMatrix,
    /// `(from, sink)` pairs.
    pub sinks: Vec<(String, String)>,
    pub assignment: ConstantAssignment,
    pub monotonicity: MonotonicityReport,
}

/// Scales every space of the registry against the first one, with one extra
/// quad closing a cycle when there are three or more spaces, then assigns
/// additive constants over the process graph.
pub fn calibrate(oracle: &OperationalOracle<'_>, graph: &ProcessGraph, seed: u64) -> Result<CalibrationReport> {
    let registry = oracle.registry();
    let spaces: Vec<String> = registry.ids().map(str::to_string).collect();
    let reference = spaces.first().cloned().ok_or_else(|| Error::InvalidSpec("empty registry".into()))?;
    let mut quads = Vec::new();
    for other in &spaces[1..] {
        quads.push(find_calibrators(oracle, &reference, other, seed)?);
    }
    if spaces.len() >= 3 {
        quads.push(find_calibrators(oracle, &spaces[1], &spaces[2], seed)?);
    }
    let edges = quads
        .iter()
        .map(|q| ScaleEdge::from_quad(q, registry))
        .collect::<Result<Vec<_>>>()?;
    let scales = calibrate_scales(&spaces, &reference, &edges)?;
    let entropy = |c: &CompoundState| calibrated_entropy(registry, &scales, c);
    let mismatch = compute_f(graph, entropy)?;
    let sinks = check_axiom_m(&mismatch);
    let assignment = assign_additive_constants(&mismatch)?;
    let monotonicity = verify_universal_monotonicity(graph, &assignment, entropy)?;
    Ok(CalibrationReport {
        reference,
        quads,
        scales,
        mismatch,
        sinks,
        assignment,
        monotonicity,
    })
}
