use proptest::prelude::*;

use dicke_fcs::fcs::cumulants_resolvent;
use dicke_fcs::fluctuation::symmetry_check;
use dicke_fcs::transient::{
    pn_distribution, propagate_n_resolved, NResolvedState, TransientOptions,
};
use dicke_fcs::{ReservoirLabel, SystemParams};

fn occupation() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))]
}

fn rate() -> impl Strategy<Value = f64> {
    (-1.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

/// Moderate rates keep the count window (and the run time) small.
fn moderate(max_atoms: usize) -> impl Strategy<Value = SystemParams> {
    (1..=max_atoms, 0.2f64..3.0, 0.0f64..5.0, 0.2f64..3.0, 0.0f64..5.0)
        .prop_map(|(n, gs, ns, gd, nd)| SystemParams::two_terminal(n, gs, ns, gd, nd).unwrap())
}

fn scenario(max_atoms: usize) -> impl Strategy<Value = SystemParams> {
    (1..=max_atoms, rate(), occupation(), rate(), occupation())
        .prop_map(|(n, gs, ns, gd, nd)| SystemParams::two_terminal(n, gs, ns, gd, nd).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noise_is_nonnegative(p in scenario(32)) {
        let set = cumulants_resolvent(&p, ReservoirLabel::Drain, 2).unwrap();
        prop_assert!(set.c(2) >= -1e-12 * set.c(1).abs());
    }

    #[test]
    fn swapping_terminals_flips_odd_cumulants(p in scenario(16)) {
        let a = cumulants_resolvent(&p, ReservoirLabel::Drain, 4).unwrap();
        let b = cumulants_resolvent(&p.swapped().unwrap(), ReservoirLabel::Drain, 4).unwrap();
        let scale = a.values().iter().map(|v| v.abs()).fold(1e-300, f64::max);
        for k in 1..=4 {
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            prop_assert!((b.c(k) - sign * a.c(k)).abs() <= 1e-8 * scale, "k={} {} {}", k, a.c(k), b.c(k));
        }
    }

    #[test]
    fn probability_is_conserved(p in moderate(6), t in 0.0f64..5.0) {
        let s = propagate_n_resolved(&NResolvedState::stationary(&p).unwrap(), &p, t, &TransientOptions::default()).unwrap();
        prop_assert!((s.total_probability() - 1.0).abs() < 1e-10);
        prop_assert!(s.min_entry() >= 0.0);
        let pn = pn_distribution(&s);
        prop_assert!((pn.total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn vacuum_emission_stays_within_n(n in 1usize..8, t in 0.0f64..3.0) {
        let p = SystemParams::single_bath(n, 1.0, 0.0).unwrap();
        let s = propagate_n_resolved(&NResolvedState::all_excited(n), &p, t, &TransientOptions::default()).unwrap();
        for (k, q) in pn_distribution(&s).iter() {
            if !(0..=n as i64).contains(&k) {
                prop_assert!(q == 0.0, "P_{} = {}", k, q);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn six_atom_symmetry(
        gs in rate(), gd in rate(),
        ns in (-2.0f64..2.0).prop_map(|e| 10f64.powf(e)),
        nd in (-2.0f64..2.0).prop_map(|e| 10f64.powf(e)),
        chi in -3.0f64..3.0,
    ) {
        let p = SystemParams::two_terminal(6, gs, ns, gd, nd).unwrap();
        let r = symmetry_check(&p, &[chi], ReservoirLabel::Drain, None).unwrap();
        prop_assert!(r.polynomial_violation <= 1e-8, "{:?}", r);
        if let Some(v) = r.eigenvalue_violation {
            prop_assert!(v <= 1e-8, "{:?}", r);
        }
    }
}
