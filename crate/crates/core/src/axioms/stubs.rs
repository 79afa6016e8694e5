//! Deliberately broken relations and surfaces used to show that the suite
//! detects violations.

use crate::eos::{
    AnchorDecl, DomainDecl, EosSpec, PressureSurface, ReferenceDecl, SimpleState, SpaceDecl, SpaceRegistry,
};
use crate::error::Result;
use crate::oracle::{AccessOracle, AccessVerdict, CompoundState};
use crate::thermo::DerivedRegistry;

fn total_entropy(registry: &DerivedRegistry, c: &CompoundState) -> Result<f64> {
    c.components.iter().map(|x| registry.raw_entropy(x)).sum()
}

/// The order induced by integrated entropy, up to a relative tolerance.
pub struct EntropyOrder<'a> {
    pub registry: &'a DerivedRegistry,
    pub tolerance: f64,
}

impl<'a> EntropyOrder<'a> {
    pub fn new(registry: &'a DerivedRegistry) -> Self {
        Self {
            registry,
            tolerance: 1e-9,
        }
    }
}

impl AccessOracle for EntropyOrder<'_> {
    fn verdict(&self, a: &CompoundState, b: &CompoundState) -> Result<AccessVerdict> {
        let (sa, sb) = (total_entropy(self.registry, a)?, total_entropy(self.registry, b)?);
        let scale = sa.abs().max(sb.abs()).max(1.0);
        Ok(AccessVerdict::from_gap((sb - sa) / scale, self.tolerance))
    }
}

/// Accepts any step that loses at most `slack` entropy. Each step looks
/// harmless but two of them chain into one the relation refuses.
pub struct TransitivityHole<'a> {
    pub registry: &'a DerivedRegistry,
    pub slack: f64,
}

impl AccessOracle for TransitivityHole<'_> {
    fn verdict(&self, a: &CompoundState, b: &CompoundState) -> Result<AccessVerdict> {
        let (sa, sb) = (total_entropy(self.registry, a)?, total_entropy(self.registry, b)?);
        Ok(AccessVerdict::from_bools(sb >= sa - self.slack, sa >= sb - self.slack))
    }
}

/// Componentwise order on total `(U, V)`: `(1, 2)` and `(2, 1)` are not comparable.
pub struct ComponentwiseOrder;

fn totals(c: &CompoundState) -> (f64, f64) {
    c.components
        .iter()
        .fold((0.0, 0.0), |(u, v), x| (u + x.energy, v + x.volume))
}

impl AccessOracle for ComponentwiseOrder {
    fn verdict(&self, a: &CompoundState, b: &CompoundState) -> Result<AccessVerdict> {
        let ((ua, va), (ub, vb)) = (totals(a), totals(b));
        Ok(AccessVerdict::from_bools(ua <= ub && va <= vb, ub <= ua && vb <= va))
    }
}

/// Entropy order that refuses every mixture query touching a state whose
/// normalized entropy lies strictly inside `(lo, hi)`.
pub struct IncomparableBand<'a> {
    pub registry: &'a DerivedRegistry,
    /// Raw entropies mapped to 0 and 1.
    pub reference: (f64, f64),
    pub lo: f64,
    pub hi: f64,
}

impl<'a> IncomparableBand<'a> {
    pub fn new(registry: &'a DerivedRegistry, x0: &SimpleState, x1: &SimpleState, lo: f64, hi: f64) -> Result<Self> {
        let s = |x: &SimpleState| registry.raw_entropy(&x.with_scale(1.0));
        Ok(Self {
            registry,
            reference: (s(x0)?, s(x1)?),
            lo,
            hi,
        })
    }
}

impl AccessOracle for IncomparableBand<'_> {
    fn verdict(&self, a: &CompoundState, b: &CompoundState) -> Result<AccessVerdict> {
        let (s0, s1) = self.reference;
        let inside = |c: &CompoundState| -> Result<bool> {
            for x in &c.components {
                let l = (self.registry.raw_entropy(&x.with_scale(1.0))? - s0) / (s1 - s0);
                if l > self.lo && l < self.hi {
                    return Ok(true);
                }
            }
            Ok(false)
        };
        if a.components.len() + b.components.len() > 2 && (inside(a)? || inside(b)?) {
            return Ok(AccessVerdict::from_bools(false, false));
        }
        EntropyOrder::new(self.registry).verdict(a, b)
    }
}

/// A pressure surface with a jump across `v = at`.
pub struct SteppedPressure {
    pub spec: EosSpec,
    pub at: f64,
    pub factor: f64,
}

impl PressureSurface for SteppedPressure {
    fn theta_range(&self) -> (f64, f64) {
        self.spec.domain.theta
    }

    fn v_range(&self) -> (f64, f64) {
        self.spec.domain.v
    }

    fn sample(&self, theta: f64, v: f64) -> Result<(f64, f64)> {
        let (u, p) = self.spec.sample(theta, v)?;
        Ok((u, if v > self.at { p * self.factor } else { p }))
    }
}

fn ideal_decl(id: &str, theta: [f64; 2], reference_theta: f64) -> SpaceDecl {
    SpaceDecl {
        id: id.into(),
        energy: "1.5*theta".into(),
        pressure: "theta/v".into(),
        constants: Default::default(),
        domain: DomainDecl {
            theta,
            v: [0.001, 1000.0],
        },
        reference: ReferenceDecl {
            theta: reference_theta,
            v: 1.0,
            entropy: 0.0,
        },
        anchor: Some(AnchorDecl {
            theta: reference_theta,
            temperature: reference_theta,
        }),
    }
}

/// Two reduced ideal gases whose temperature ranges do not overlap.
pub fn disjoint_pair() -> Result<DerivedRegistry> {
    let mut reg = SpaceRegistry::default();
    reg.insert(EosSpec::new(ideal_decl("cold_gas", [0.1, 1.0], 0.5))?)?;
    reg.insert(EosSpec::new(ideal_decl("hot_gas", [2.0, 10.0], 5.0))?)?;
    DerivedRegistry::derive(&reg)
}
