use cachepriv::error::Error;
use cachepriv::lift::{dual_example_scheme, example1_scheme, lift_private, theorem1_scheme};
use cachepriv::linear::LinearScheme;
use cachepriv::model::{Rational, SchemeInstance};
use cachepriv::schemes::{baseline_uncoded, small_cache_2x4_matrices};
use cachepriv::verifier::{
    check_decodability, check_lemma1, check_privacy, measure_rates, plaintext_header_control,
    privacy_table, EnumerationOrder, VerifyConfig,
};
use std::sync::Arc;

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn cfg(width: usize, order: EnumerationOrder) -> VerifyConfig {
    VerifyConfig {
        width,
        budget: 1 << 26,
        order,
    }
}

fn plaintext() -> SchemeInstance {
    plaintext_header_control(baseline_uncoded(2, 2, r(0, 1)).unwrap())
}

#[test]
fn verdicts_do_not_depend_on_enumeration_order() {
    let orders = [
        EnumerationOrder::Natural,
        EnumerationOrder::Reversed,
        EnumerationOrder::Shuffled(1),
        EnumerationOrder::Shuffled(99),
    ];
    for s in [example1_scheme(), plaintext(), theorem1_scheme(3, 2, r(0, 1)).unwrap()] {
        let base = cfg(1, EnumerationOrder::Natural);
        let dec = check_decodability(s.as_ref(), &base).unwrap().pass;
        let table = privacy_table(s.as_ref(), 0, &base).unwrap();
        for order in orders {
            let c = cfg(1, order);
            assert_eq!(check_decodability(s.as_ref(), &c).unwrap().pass, dec);
            assert_eq!(privacy_table(s.as_ref(), 0, &c).unwrap(), table);
        }
    }
}

#[test]
fn theorem1_schemes_pass_exhaustively() {
    for (n, k, m) in [(2, 2, r(0, 1)), (2, 2, r(1, 1)), (2, 2, r(2, 1)), (3, 2, r(0, 1)), (4, 2, r(0, 1)), (3, 3, r(1, 1)), (3, 2, r(3, 1))] {
        let s = theorem1_scheme(n, k, m).unwrap();
        let c = cfg(1, EnumerationOrder::Natural);
        assert!(check_decodability(s.as_ref(), &c).unwrap().pass, "{n},{k},{m}");
        for u in 0..k {
            let v = check_privacy(s.as_ref(), u, &c).unwrap();
            assert!(v.pass, "{n},{k},{m} user {u}");
            assert!(v.mutual_information_bits.unwrap().abs() < 1e-12);
        }
        let meas = measure_rates(s.as_ref(), 1).unwrap();
        let baseline = Rational::from_integer(n.min(k) as i64) * (Rational::from_integer(1) - m / n as i64);
        assert_eq!(meas.rate, baseline, "{n},{k},{m}");
    }
}

#[test]
fn wider_symbols_still_pass() {
    let c = cfg(2, EnumerationOrder::Natural);
    for s in [example1_scheme(), dual_example_scheme()] {
        let v = check_decodability(s.as_ref(), &c).unwrap();
        assert!(v.pass);
        assert_eq!(v.atoms, 16 * (1 << 12));
        assert!(check_privacy(s.as_ref(), 1, &c).unwrap().pass);
    }
}

#[test]
fn corrupted_inner_scheme_yields_a_counterexample() {
    let mut m = small_cache_2x4_matrices();
    m.delivery[2].1[3] = m.delivery[2].1[0];
    let lifted = lift_private(Arc::new(LinearScheme::new(m).unwrap()), 2, 2).unwrap();
    let v = check_decodability(lifted.as_ref(), &VerifyConfig::default()).unwrap();
    assert!(!v.pass);
    let ce = v.counterexample.clone().expect("counterexample");
    assert_eq!(ce.files.len(), 6);
    assert!(ce.user.is_some());
    assert_eq!(ce.demands.len(), 2);
    assert_eq!(ce.shared_keys.len(), 2);
    let json = v.to_json();
    assert!(json.contains("\"pass\": false"));
}

#[test]
fn plaintext_header_leaks_one_bit() {
    let s = plaintext();
    let c = VerifyConfig::default();
    assert!(check_decodability(s.as_ref(), &c).unwrap().pass);
    for u in 0..2 {
        let v = check_privacy(s.as_ref(), u, &c).unwrap();
        assert!(!v.pass);
        assert!((v.mutual_information_bits.unwrap() - 1.0).abs() < 1e-12);
        assert!(v.counterexample.is_some());
    }
    assert!(!check_lemma1(s.as_ref(), &c).unwrap().pass);
    assert!(check_lemma1(example1_scheme().as_ref(), &c).unwrap().pass);
    assert!(check_lemma1(dual_example_scheme().as_ref(), &c).unwrap().pass);
}

#[test]
fn budget_is_enforced_before_enumeration() {
    let s = theorem1_scheme(3, 2, r(0, 1)).unwrap();
    let c = VerifyConfig {
        budget: 1000,
        ..VerifyConfig::default()
    };
    match check_decodability(s.as_ref(), &c) {
        Err(Error::BudgetExceeded { required, budget }) => assert_eq!((required, budget), (2304, 1000)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn non_private_schemes_are_not_privacy_checked() {
    let s = baseline_uncoded(2, 2, r(1, 1)).unwrap();
    assert!(check_decodability(s.as_ref(), &VerifyConfig::default()).unwrap().pass);
    assert!(check_privacy(s.as_ref(), 0, &VerifyConfig::default()).is_err());
}
