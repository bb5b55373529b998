use cachepriv::error::{Error, Result};
use cachepriv::lift::{dual_example_scheme, example1_scheme, theorem1_scheme};
use cachepriv::model::{
    Bits, CacheContent, DeliveryMessage, DemandVector, FileStore, KeyAssignment, PrivacyClass,
    Rational, Scheme, SchemeInstance, SchemeParams, UserView,
};
use cachepriv::schemes::{baseline_uncoded, small_cache_2x4_scheme};
use cachepriv::session::{run_session, simulate_session, Frame, SessionTranscript};
use cachepriv::verifier::{plaintext_header_control, privacy_table, AtomSpace, JointDistribution, VerifyConfig};

fn dv(e: &[usize], n: usize) -> DemandVector {
    DemandVector::new(e.to_vec(), n).unwrap()
}

#[test]
fn every_demand_decodes_for_the_two_user_schemes() {
    for s in [example1_scheme(), dual_example_scheme()] {
        for d in DemandVector::all(2, 2) {
            for seed in 0..8 {
                let t = simulate_session(s.as_ref(), &d, seed, 3).unwrap();
                assert!(t.all_match());
                assert!(t.is_well_ordered());
                assert_eq!(t.reports().count(), 2);
                let Some(Frame::Delivery { header, .. }) = t.delivery() else { panic!() };
                assert_eq!(header.len(), 2);
            }
        }
    }
}

#[test]
fn transcripts_are_deterministic_and_reparse() {
    let s = theorem1_scheme(3, 2, Rational::from_integer(1)).unwrap();
    let d = dv(&[2, 2], 3);
    let a = simulate_session(s.as_ref(), &d, 42, 4).unwrap();
    let b = simulate_session(s.as_ref(), &d, 42, 4).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(SessionTranscript::from_bytes(&a.to_bytes()).unwrap(), a);
    let c = simulate_session(s.as_ref(), &d, 43, 4).unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
}

#[test]
fn non_private_sessions_reject_unserved_demands() {
    let s = small_cache_2x4_scheme();
    assert!(simulate_session(s.as_ref(), &dv(&[0, 1, 1, 0], 2), 0, 1).unwrap().all_match());
    assert!(matches!(
        simulate_session(s.as_ref(), &dv(&[0, 0, 0, 0], 2), 0, 1),
        Err(Error::DemandNotServed(_))
    ));
}

/// Delivers the right payload with its last bit flipped.
#[derive(Debug)]
struct FlipLastBit(SchemeInstance);

impl Scheme for FlipLastBit {
    fn name(&self) -> String {
        "flip".into()
    }
    fn params(&self) -> SchemeParams {
        self.0.params()
    }
    fn privacy(&self) -> PrivacyClass {
        self.0.privacy()
    }
    fn key_alphabet(&self) -> Vec<u64> {
        self.0.key_alphabet()
    }
    fn private_alphabet(&self, width: usize) -> Vec<u64> {
        self.0.private_alphabet(width)
    }
    fn header_widths(&self) -> Vec<u32> {
        self.0.header_widths()
    }
    fn place(&self, user: usize, keys: &KeyAssignment, files: &FileStore) -> Result<CacheContent> {
        self.0.place(user, keys, files)
    }
    fn deliver(&self, files: &FileStore, demands: &DemandVector, keys: &KeyAssignment) -> Result<DeliveryMessage> {
        let mut m = self.0.deliver(files, demands, keys)?;
        let last = m.payload.len() - 1;
        let bit = !m.payload[last];
        m.payload.set(last, bit);
        Ok(m)
    }
    fn decode(&self, view: &UserView<'_>) -> Result<Bits> {
        self.0.decode(view)
    }
}

#[test]
fn decode_mismatch_returns_the_transcript() {
    let s = FlipLastBit(baseline_uncoded(2, 2, Rational::from_integer(0)).unwrap());
    match simulate_session(&s, &dv(&[0, 1], 2), 5, 2) {
        Err(Error::SessionMismatch { users, transcript }) => {
            assert_eq!(users, vec![1]);
            assert!(!transcript.all_match());
            assert_eq!(transcript.reports().count(), 2);
        }
        other => panic!("{other:?}"),
    }
}

/// Joint counts of the other user's demand against what user `user` sees
/// on the wire, over the verifier's atom space.
fn wire_table(s: &dyn Scheme, user: usize) -> JointDistribution {
    let space = AtomSpace::new(s, 1, 1 << 20).unwrap();
    let mut table = JointDistribution::new(2);
    for i in 0..space.total() {
        let atom = space.atom(i);
        let t = run_session(s, &atom.files, &atom.demands, &atom.keys).unwrap();
        let mut obs = t.user_view(user).unwrap();
        obs.push(atom.demands.get(user) as u8);
        table.add(atom.demands.get(1 - user), obs);
    }
    table
}

#[test]
fn wire_observations_match_the_verifier() {
    let cfg = VerifyConfig::default();
    for s in [
        example1_scheme(),
        dual_example_scheme(),
        plaintext_header_control(baseline_uncoded(2, 2, Rational::from_integer(0)).unwrap()),
    ] {
        for user in 0..2 {
            let wire = wire_table(s.as_ref(), user);
            let verifier = privacy_table(s.as_ref(), user, &cfg).unwrap();
            assert_eq!(wire.shape(), verifier.shape(), "{}", s.name());
            assert_eq!(wire.is_independent(), verifier.is_independent());
        }
    }
}
