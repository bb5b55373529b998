//! Demand-private coded caching: scheme constructions, an exhaustive
//! bit-exact verifier, a GF(2) search for linear schemes and the exact
//! two-user memory-rate region.

pub mod cli;
pub mod error;
pub mod gf2;
pub mod lift;
pub mod linear;
pub mod model;
pub mod region;
pub mod schemes;
pub mod search;
pub mod session;
pub mod verifier;

pub use error::{Error, Result};
pub use lift::{dual_example_scheme, example1_scheme, lift_private, theorem1_scheme};
pub use linear::{LinearScheme, LinearSchemeMatrices};
pub use model::{
    cyclic_shift, expand_demand, xor_symbols, Bits, DemandVector, FileStore, KeyAssignment,
    PrivacyClass, Rational, Scheme, SchemeInstance, SchemeParams, Symbol,
};
pub use region::{check_inequalities, corner_points_2x2, emit_region, optimal_private_rate_2x2};
pub use schemes::{
    baseline_uncoded, memory_share, restricted_demand_set, DemandLabel, DemandSubset,
};
pub use search::{search_linear_scheme, verify_linear, SearchConfig, Strategy};
pub use session::{simulate_session, SessionTranscript};
pub use verifier::{
    check_decodability, check_lemma1, check_privacy, measure_rates, Verdict, VerifyConfig,
};
