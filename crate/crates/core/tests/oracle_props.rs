use std::sync::OnceLock;

use adiabat_core::eos::{SimpleState, SpaceRegistry, Units};
use adiabat_core::numerics::roots::{brent, RootOptions};
use adiabat_core::oracle::{integral_lambda, reconstruct_entropy, AccessOracle, CompoundState, OperationalOracle};
use adiabat_core::thermo::DerivedRegistry;
use proptest::prelude::*;

const SPACES: [&str; 2] = ["ideal_reduced", "vdw_reduced"];

fn registry() -> &'static DerivedRegistry {
    static REG: OnceLock<DerivedRegistry> = OnceLock::new();
    REG.get_or_init(|| DerivedRegistry::derive(&SpaceRegistry::bundled(Units::Reduced)).unwrap())
}

fn oracle() -> &'static OperationalOracle<'static> {
    static ORACLE: OnceLock<OperationalOracle<'static>> = OnceLock::new();
    ORACLE.get_or_init(|| OperationalOracle::new(registry()))
}

/// A unit-scale state well inside the domain, drawn in log coordinates.
fn state(space: &'static str) -> impl Strategy<Value = SimpleState> {
    (0.3f64..0.7, 0.3f64..0.7).prop_map(move |(ft, fv)| {
        let spec = registry().spec(space).unwrap();
        let lerp = |(lo, hi): (f64, f64), f: f64| (lo.ln() + f * (hi.ln() - lo.ln())).exp();
        SimpleState::at(spec, 1.0, lerp(spec.domain.theta, ft), lerp(spec.domain.v, fv)).unwrap()
    })
}

fn any_state() -> impl Strategy<Value = SimpleState> {
    prop_oneof![state(SPACES[0]), state(SPACES[1])]
}

fn one(x: &SimpleState) -> CompoundState {
    x.clone().into()
}

fn entropy(x: &SimpleState) -> f64 {
    registry().raw_entropy(x).unwrap()
}

/// Reference pair on a common isochore with a clear entropy step.
fn references(space: &str) -> (SimpleState, SimpleState) {
    let spec = registry().spec(space).unwrap();
    let (lo, hi) = spec.domain.theta;
    let v = spec.reference.1;
    let at = |f: f64| SimpleState::at(spec, 1.0, (lo.ln() + f * (hi.ln() - lo.ln())).exp(), v).unwrap();
    (at(0.35), at(0.6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn verdicts_do_not_depend_on_the_common_temperature(
        a in any_state(),
        b in any_state(),
        c in any_state(),
        d in any_state(),
        split in 0.2f64..0.8,
    ) {
        // two-component compounds with the same matter content on both sides
        let left = CompoundState::new(vec![a.with_scale(split), c.with_scale(1.0 - split)]);
        let right = CompoundState::new(vec![b.with_scale(split), d.with_scale(1.0 - split)]);
        let lhs_sig = left.signature();
        prop_assume!(lhs_sig == right.signature());
        let mid = oracle().verdict(&left, &right);
        let other = OperationalOracle::new(registry()).with_theta_fraction(0.2).verdict(&left, &right);
        match (mid, other) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!((x.forward, x.backward), (y.forward, y.backward));
            }
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }

    #[test]
    fn transitivity(a in state("vdw_reduced"), b in state("vdw_reduced"), c in state("vdw_reduced")) {
        let mut t = [a, b, c];
        t.sort_by(|x, y| entropy(x).total_cmp(&entropy(y)));
        let o = oracle();
        prop_assume!(o.precedes(&one(&t[0]), &one(&t[1])).unwrap());
        prop_assume!(o.precedes(&one(&t[1]), &one(&t[2])).unwrap());
        prop_assert!(o.precedes(&one(&t[0]), &one(&t[2])).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn consistency(a in any_state(), a2 in any_state(), b in any_state(), b2 in any_state()) {
        let o = oracle();
        // put each pair on one space and in order
        let (a, a2) = (a.clone(), SimpleState { space: a.space.clone(), ..a2 });
        let (b, b2) = (b.clone(), SimpleState { space: b.space.clone(), ..b2 });
        let order = |x: SimpleState, y: SimpleState| {
            let spec = registry().spec(&x.space).unwrap();
            let ok = |s: &SimpleState| spec.contains_uv(s.energy, s.volume);
            if !ok(&y) { return None; }
            Some(if entropy(&x) <= entropy(&y) { (x, y) } else { (y, x) })
        };
        let (Some((a, a2)), Some((b, b2))) = (order(a, a2), order(b, b2)) else {
            return Err(TestCaseError::reject("state outside its domain"));
        };
        prop_assume!(o.precedes(&one(&a), &one(&a2)).unwrap() && o.precedes(&one(&b), &one(&b2)).unwrap());
        let left = CompoundState::new(vec![a, b]);
        let right = CompoundState::new(vec![a2, b2]);
        prop_assert!(o.precedes(&left, &right).unwrap());
    }

    #[test]
    fn scaling_leaves_verdicts_unchanged(a in state("vdw_reduced"), b in state("vdw_reduced"), big in any::<bool>()) {
        let o = oracle();
        let t = if big { 2.0 } else { 0.5 };
        let base = o.verdict(&one(&a), &one(&b)).unwrap();
        let scaled = o.verdict(&one(&a.scaled(t)), &one(&b.scaled(t))).unwrap();
        prop_assert_eq!((base.forward, base.backward), (scaled.forward, scaled.backward));
    }

    #[test]
    fn reconstruction_is_an_affine_image_of_the_integral(which in 0usize..2, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let space = SPACES[which];
        let (x0, x1) = references(space);
        let spec = registry().spec(space).unwrap();
        let lerp = |(lo, hi): (f64, f64), f: f64| (lo.ln() + (0.3 + 0.4 * f) * (hi.ln() - lo.ln())).exp();
        let t = SimpleState::at(spec, 1.0, lerp(spec.domain.theta, x), lerp(spec.domain.v, y)).unwrap();
        let r = reconstruct_entropy(oracle(), &x0, &x1, &t, 1e-4).unwrap();
        let exact = integral_lambda(registry(), &x0, &x1, &t).unwrap();
        prop_assert!((r.entropy - exact).abs() <= 1e-3, "{:?} vs {}", r, exact);
        prop_assert!(r.gap() <= 2e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn mixture_states_reconstruct_to_their_weight(which in 0usize..2, lambda in 0.05f64..0.95, fv in 0.3f64..0.7) {
        let space = SPACES[which];
        let (x0, x1) = references(space);
        let (s0, s1) = (entropy(&x0), entropy(&x1));
        let goal = (1.0 - lambda) * s0 + lambda * s1;
        // the state on an isochore whose entropy equals that of ((1 - lambda) X0, lambda X1)
        let spec = registry().spec(space).unwrap();
        let (vlo, vhi) = spec.domain.v;
        let v = (vlo.ln() + fv * (vhi.ln() - vlo.ln())).exp();
        let e = registry().get(space).unwrap();
        let (tlo, thi) = spec.domain.theta;
        let f = |t: f64| Ok(e.raw(t, v)? - goal);
        prop_assume!(f(tlo).unwrap() < 0.0 && f(thi).unwrap() > 0.0);
        let theta = brent(f, tlo, thi, RootOptions::default()).unwrap();
        let x = SimpleState::at(spec, 1.0, theta, v).unwrap();
        let r = reconstruct_entropy(oracle(), &x0, &x1, &x, 1e-4).unwrap();
        prop_assert!((r.entropy - lambda).abs() <= 1e-3, "{:?} vs {}", r, lambda);
    }
}
