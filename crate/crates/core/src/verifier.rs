//! Exhaustive verification.
//!
//! An atom is one joint realization of files, demands, shared keys and the
//! server's private randomness. Under the model all atoms are equally
//! likely, so every probability is a count over the atom space and every
//! verdict is an integer identity. Mutual information is computed only as a
//! diagnostic.

use std::collections::HashMap;
use std::sync::Arc;

use num_integer::Integer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    bits_for, packed_bytes, Bits, CacheContent, DeliveryMessage, DemandVector, FileStore,
    KeyAssignment, PrivacyClass, Rational, Scheme, SchemeInstance, SchemeParams, UserView,
};

pub const DEFAULT_BUDGET: u128 = 1 << 28;
pub const BUDGET_ENV: &str = "CACHEPRIV_BUDGET";

/// Budget from `CACHEPRIV_BUDGET`, falling back to 2^28 atoms.
pub fn budget_from_env() -> u128 {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

/// Order in which atoms are visited. Verdicts must not depend on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnumerationOrder {
    Natural,
    Reversed,
    /// Affine permutation `j -> (a j + b) mod n` with `a` derived from the seed.
    Shuffled(u64),
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub width: usize,
    pub budget: u128,
    pub order: EnumerationOrder,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            width: 1,
            budget: budget_from_env(),
            order: EnumerationOrder::Natural,
        }
    }
}

impl VerifyConfig {
    pub fn with_width(width: usize) -> Self {
        Self {
            width,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    /// Row-major file bits.
    pub files: String,
    pub demands: Vec<usize>,
    pub shared_keys: Vec<u64>,
    pub private: Vec<u64>,
    pub user: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub pass: bool,
    pub counterexample: Option<Counterexample>,
    pub mutual_information_bits: Option<f64>,
    pub atoms: u128,
    pub cases: u128,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// One realization of everything random in the system.
#[derive(Clone, Debug)]
pub struct Atom {
    pub files: FileStore,
    pub demands: DemandVector,
    pub keys: KeyAssignment,
}

impl Atom {
    fn counterexample(&self, user: Option<usize>, detail: String) -> Counterexample {
        let files = self
            .files
            .symbols()
            .iter()
            .map(|s| format!("{s:?}"))
            .collect::<String>();
        Counterexample {
            files,
            demands: self.demands.entries().to_vec(),
            shared_keys: self.keys.shared.clone(),
            private: self.keys.private.clone(),
            user,
            detail,
        }
    }
}

fn radix_product(radices: &[u64]) -> u128 {
    radices.iter().map(|&r| r.max(1) as u128).product()
}

fn unrank_digits(mut index: u128, radices: &[u64]) -> Vec<u64> {
    let mut digits = vec![0; radices.len()];
    for (d, &r) in digits.iter_mut().zip(radices).rev() {
        let r = r.max(1) as u128;
        *d = (index % r) as u64;
        index /= r;
    }
    digits
}

/// Mixed-radix space of atoms: files (least significant), then demand,
/// shared keys, private randomness.
#[derive(Clone, Debug)]
pub struct AtomSpace {
    params: SchemeParams,
    width: usize,
    demands: Vec<DemandVector>,
    shared: Vec<u64>,
    private: Vec<u64>,
    file_count: u128,
    total: u128,
}

impl AtomSpace {
    pub fn new(scheme: &dyn Scheme, width: usize, budget: u128) -> Result<Self> {
        Self::with_demands(scheme, width, budget, scheme.served_demands())
    }

    pub fn with_demands(
        scheme: &dyn Scheme,
        width: usize,
        budget: u128,
        demands: Vec<DemandVector>,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::ZeroWidth);
        }
        let params = scheme.params();
        let shared = scheme.key_alphabet();
        let private = scheme.private_alphabet(width);
        let file_bits = params.n_files * params.subpacketization * width;
        let too_big = Error::BudgetExceeded {
            required: u128::MAX,
            budget,
        };
        if file_bits >= 128 {
            return Err(too_big);
        }
        let file_count = 1u128 << file_bits;
        let total = [
            Some(file_count),
            Some(demands.len() as u128),
            Some(radix_product(&shared)),
            private
                .iter()
                .try_fold(1u128, |acc, &r| acc.checked_mul(r.max(1) as u128)),
        ]
        .into_iter()
        .try_fold(1u128, |acc, x| acc.checked_mul(x?))
        .ok_or(too_big)?;
        if total > budget {
            return Err(Error::BudgetExceeded {
                required: total,
                budget,
            });
        }
        Ok(Self {
            params,
            width,
            demands,
            shared,
            private,
            file_count,
            total,
        })
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn demands(&self) -> &[DemandVector] {
        &self.demands
    }

    pub fn atom(&self, index: u128) -> Atom {
        let files_index = index % self.file_count;
        let mut rest = index / self.file_count;
        let nd = self.demands.len() as u128;
        let demand = (rest % nd) as usize;
        rest /= nd;
        let ns = radix_product(&self.shared);
        let shared = unrank_digits(rest % ns, &self.shared);
        rest /= ns;
        let private = unrank_digits(rest, &self.private);
        Atom {
            files: FileStore::from_index(
                self.params.n_files,
                self.params.subpacketization,
                self.width,
                files_index,
            )
            .expect("atom space checked file size"),
            demands: self.demands[demand].clone(),
            keys: KeyAssignment::new(shared, private),
        }
    }

    /// Atom index visited at position `pos` under `order`.
    pub fn position(&self, pos: u128, order: EnumerationOrder) -> u128 {
        let n = self.total;
        match order {
            EnumerationOrder::Natural => pos,
            EnumerationOrder::Reversed => n - 1 - pos,
            EnumerationOrder::Shuffled(seed) => {
                let mut a = (seed as u128 % n) | 1;
                while a.gcd(&n) != 1 {
                    a += 2;
                }
                (a % n * pos + seed as u128 % n) % n
            }
        }
    }

    /// Folds every atom in parallel chunks and merges the partial results.
    fn fold<T, I, F, M>(&self, order: EnumerationOrder, init: I, step: F, merge: M) -> T
    where
        T: Send,
        I: Fn() -> T + Sync + Send,
        F: Fn(&mut T, u128, Atom) + Sync,
        M: Fn(T, T) -> T + Sync + Send,
    {
        const CHUNK: u128 = 256;
        let chunks = self.total.div_ceil(CHUNK);
        (0..chunks as u64)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let start = c as u128 * CHUNK;
                let end = (start + CHUNK).min(self.total);
                for pos in start..end {
                    step(&mut acc, pos, self.atom(self.position(pos, order)));
                }
                acc
            })
            .reduce(&init, &merge)
    }
}

fn view<'a>(
    scheme_private: bool,
    user: usize,
    atom: &'a Atom,
    cache: &'a CacheContent,
    message: &'a DeliveryMessage,
) -> UserView<'a> {
    UserView {
        user,
        demand: atom.demands.get(user),
        key: cache.key,
        cache,
        message,
        demand_vector: if scheme_private {
            None
        } else {
            Some(&atom.demands)
        },
    }
}

/// Runs placement, delivery and every user's decoder on one atom. Returns
/// the first failing user and the reason.
fn decode_atom(scheme: &dyn Scheme, private: bool, atom: &Atom) -> Option<(Option<usize>, String)> {
    let k = scheme.params().n_users;
    let message = match scheme.deliver(&atom.files, &atom.demands, &atom.keys) {
        Ok(m) => m,
        Err(e) => return Some((None, format!("delivery failed: {e}"))),
    };
    for user in 0..k {
        let cache = match scheme.place(user, &atom.keys, &atom.files) {
            Ok(c) => c,
            Err(e) => return Some((Some(user), format!("placement failed: {e}"))),
        };
        let wanted = atom.files.file_bits(atom.demands.get(user));
        match scheme.decode(&view(private, user, atom, &cache, &message)) {
            Ok(bits) if bits == wanted => {}
            Ok(_) => return Some((Some(user), "decoded bits differ from the demanded file".into())),
            Err(e) => return Some((Some(user), e.to_string())),
        }
    }
    None
}

/// Every user recovers its demanded file for every atom. Non-private
/// schemes are checked on their served demands only.
pub fn check_decodability(scheme: &dyn Scheme, cfg: &VerifyConfig) -> Result<Verdict> {
    let space = AtomSpace::new(scheme, cfg.width, cfg.budget)?;
    let private = scheme.privacy().is_private();
    let first_failure = space.fold(
        cfg.order,
        || None::<u128>,
        |acc, pos, atom| {
            if acc.is_none() && decode_atom(scheme, private, &atom).is_some() {
                *acc = Some(pos);
            }
        },
        |a, b| match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        },
    );
    let counterexample = first_failure.map(|pos| {
        let atom = space.atom(space.position(pos, cfg.order));
        let (user, detail) = decode_atom(scheme, private, &atom).expect("failure reproduces");
        atom.counterexample(user, detail)
    });
    Ok(Verdict {
        check: format!("decodability[{}]", scheme.name()),
        pass: counterexample.is_none(),
        counterexample,
        mutual_information_bits: None,
        atoms: space.total(),
        cases: space.total() * scheme.params().n_users as u128,
    })
}

/// Exact joint counts of a class variable against an observation. Cells
/// map the canonical bytes of an observation to its count per class.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JointDistribution {
    classes: usize,
    cells: HashMap<Vec<u8>, Vec<u64>>,
}

impl JointDistribution {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            cells: HashMap::new(),
        }
    }

    pub fn add(&mut self, class: usize, observation: Vec<u8>) {
        let classes = self.classes;
        self.cells.entry(observation).or_insert_with(|| vec![0; classes])[class] += 1;
    }

    pub fn merge(mut self, other: JointDistribution) -> JointDistribution {
        for (obs, counts) in other.cells {
            let cell = self.cells.entry(obs).or_insert_with(|| vec![0; counts.len()]);
            for (c, n) in cell.iter_mut().zip(counts) {
                *c += n;
            }
        }
        self
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn observations(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&Vec<u8>, &Vec<u64>)> {
        self.cells.iter()
    }

    pub fn total(&self) -> u128 {
        self.cells.values().flatten().map(|&c| c as u128).sum()
    }

    pub fn class_marginals(&self) -> Vec<u128> {
        let mut out = vec![0u128; self.classes];
        for counts in self.cells.values() {
            for (o, &c) in out.iter_mut().zip(counts) {
                *o += c as u128;
            }
        }
        out
    }

    /// First observation violating `count(c, o) * total = count(c) * count(o)`.
    pub fn independence_violation(&self) -> Option<(&[u8], usize)> {
        let total = self.total();
        let marginals = self.class_marginals();
        let mut keys: Vec<&Vec<u8>> = self.cells.keys().collect();
        keys.sort();
        for obs in keys {
            let counts = &self.cells[obs];
            let obs_total: u128 = counts.iter().map(|&c| c as u128).sum();
            for (class, &c) in counts.iter().enumerate() {
                if c as u128 * total != marginals[class] * obs_total {
                    return Some((obs, class));
                }
            }
        }
        None
    }

    pub fn is_independent(&self) -> bool {
        self.independence_violation().is_none()
    }

    /// `I(class; observation)` in bits.
    pub fn mutual_information_bits(&self) -> f64 {
        let total = self.total() as f64;
        if total == 0.0 {
            return 0.0;
        }
        let marginals = self.class_marginals();
        let mut mi = 0.0;
        for counts in self.cells.values() {
            let obs_total: u64 = counts.iter().sum();
            for (class, &c) in counts.iter().enumerate() {
                if c > 0 {
                    let joint = c as f64 / total;
                    let indep = (marginals[class] as f64 / total) * (obs_total as f64 / total);
                    mi += joint * (joint / indep).log2();
                }
            }
        }
        mi.max(0.0)
    }

    /// Count vectors sorted, a relabeling-free fingerprint of the table.
    pub fn shape(&self) -> Vec<Vec<u64>> {
        let mut v: Vec<Vec<u64>> = self.cells.values().cloned().collect();
        v.sort();
        v
    }
}

fn push_bits(out: &mut Vec<u8>, bits: &Bits) {
    out.extend_from_slice(&(bits.len() as u32).to_le_bytes());
    out.extend_from_slice(&packed_bytes(bits));
}

fn push_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Canonical bytes of `(Z_k, X, D_k)`.
pub fn user_observation(cache: &CacheContent, message: &DeliveryMessage, demand: usize) -> Vec<u8> {
    let mut out = Vec::new();
    push_bits(&mut out, &cache.bits);
    push_u64(&mut out, cache.key);
    push_bits(&mut out, &message.payload);
    out.extend_from_slice(&(message.header.len() as u32).to_le_bytes());
    for &h in &message.header {
        push_u64(&mut out, h);
    }
    push_u64(&mut out, demand as u64);
    out
}

fn others_class(d: &DemandVector, user: usize) -> usize {
    let n = d.n_files();
    d.without(user).iter().fold(0, |acc, &x| acc * n + x)
}

fn require_private(scheme: &dyn Scheme) -> Result<()> {
    if scheme.privacy().is_private() {
        Ok(())
    } else {
        Err(Error::ParameterMismatch(format!(
            "{} does not claim demand privacy",
            scheme.name()
        )))
    }
}

fn observe(scheme: &dyn Scheme, user: usize, atom: &Atom) -> Result<Vec<u8>> {
    let cache = scheme.place(user, &atom.keys, &atom.files)?;
    let message = scheme.deliver(&atom.files, &atom.demands, &atom.keys)?;
    Ok(user_observation(&cache, &message, atom.demands.get(user)))
}

/// Joint counts of `D_{-k}` against `(Z_k, X, D_k)` over all atoms.
pub fn privacy_table(scheme: &dyn Scheme, user: usize, cfg: &VerifyConfig) -> Result<JointDistribution> {
    require_private(scheme)?;
    let p = scheme.params();
    if user >= p.n_users {
        return Err(Error::ParameterMismatch(format!("no user {user}")));
    }
    let space = AtomSpace::new(scheme, cfg.width, cfg.budget)?;
    let classes = p.n_files.pow(p.n_users as u32 - 1);
    Ok(space.fold(
        cfg.order,
        || JointDistribution::new(classes),
        |acc, _pos, atom| {
            let obs = observe(scheme, user, &atom).expect("served demand");
            acc.add(others_class(&atom.demands, user), obs);
        },
        JointDistribution::merge,
    ))
}

/// `I(D_{-k}; Z_k, X, D_k) = 0`, decided by exact count factorization.
pub fn check_privacy(scheme: &dyn Scheme, user: usize, cfg: &VerifyConfig) -> Result<Verdict> {
    let table = privacy_table(scheme, user, cfg)?;
    let space = AtomSpace::new(scheme, cfg.width, cfg.budget)?;
    let counterexample = match table.independence_violation() {
        None => None,
        Some((obs, class)) => {
            let obs = obs.to_vec();
            let witness = (0..space.total())
                .map(|pos| space.atom(space.position(pos, cfg.order)))
                .find(|atom| {
                    others_class(&atom.demands, user) == class
                        && observe(scheme, user, atom).ok().as_deref() == Some(&obs[..])
                });
            witness.map(|atom| {
                atom.counterexample(
                    Some(user),
                    format!("observation frequency depends on the other demands (class {class})"),
                )
            })
        }
    };
    Ok(Verdict {
        check: format!("privacy[{}, user {user}]", scheme.name()),
        pass: table.is_independent(),
        counterexample,
        mutual_information_bits: Some(table.mutual_information_bits()),
        atoms: space.total(),
        cases: space.total(),
    })
}

/// For `N = K = 2`: the law of `(X, Z_k, W_j)` given `D_k = j` does not
/// change when additionally conditioning on either value of `D_{1-k}`.
pub fn check_lemma1(scheme: &dyn Scheme, cfg: &VerifyConfig) -> Result<Verdict> {
    require_private(scheme)?;
    let p = scheme.params();
    if p.n_files != 2 || p.n_users != 2 {
        return Err(Error::ParameterMismatch("the two-user check needs N = K = 2".into()));
    }
    let space = AtomSpace::new(scheme, cfg.width, cfg.budget)?;
    // tables[k][j] has class = D_{1-k}, observation = (X, Z_k, W_j)
    let tables: Vec<JointDistribution> = space.fold(
        cfg.order,
        || (0..4).map(|_| JointDistribution::new(2)).collect(),
        |acc: &mut Vec<JointDistribution>, _pos, atom| {
            let message = scheme
                .deliver(&atom.files, &atom.demands, &atom.keys)
                .expect("served demand");
            for k in 0..2 {
                let cache = scheme.place(k, &atom.keys, &atom.files).expect("placement");
                let j = atom.demands.get(k);
                let mut obs = user_observation(&cache, &message, j);
                push_bits(&mut obs, &atom.files.file_bits(j));
                acc[2 * k + j].add(atom.demands.get(1 - k), obs);
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
    );
    let mut failure = None;
    for (idx, table) in tables.iter().enumerate() {
        let (k, j) = (idx / 2, idx % 2);
        let n = table.class_marginals();
        let n_all = n[0] + n[1];
        let mismatch = table.cells().find(|(_, c)| {
            let (c0, c1) = (c[0] as u128, c[1] as u128);
            c0 * n[1] != c1 * n[0] || c0 * n_all != (c0 + c1) * n[0]
        });
        if mismatch.is_some() {
            failure = Some((k, j));
            break;
        }
    }
    let counterexample = failure.map(|(k, j)| Counterexample {
        files: String::new(),
        demands: Vec::new(),
        shared_keys: Vec::new(),
        private: Vec::new(),
        user: Some(k),
        detail: format!(
            "(X, Z_{k}, W_{j}) given D_{k}={j} depends on D_{}",
            1 - k
        ),
    });
    Ok(Verdict {
        check: format!("lemma1[{}]", scheme.name()),
        pass: failure.is_none(),
        counterexample,
        mutual_information_bits: None,
        atoms: space.total(),
        cases: space.total() * 2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measurement {
    pub memory: Rational,
    pub rate: Rational,
    pub header_bits: u64,
}

/// Bits actually produced by placement and delivery, divided by the file
/// size. Shared keys and the header are excluded from `M` and `R`.
pub fn measure_rates(scheme: &dyn Scheme, width: usize) -> Result<Measurement> {
    let p = scheme.params();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let files = FileStore::random(p.n_files, p.subpacketization, width, &mut rng)?;
    let keys = KeyAssignment::sample(&scheme.key_alphabet(), &scheme.private_alphabet(width), &mut rng);
    let demands = scheme
        .served_demands()
        .into_iter()
        .next()
        .ok_or_else(|| Error::ParameterMismatch("scheme serves no demand".into()))?;
    let file_bits = files.file_bits_len() as i64;
    let mut cache_bits = None;
    for user in 0..p.n_users {
        let len = scheme.place(user, &keys, &files)?.bits.len();
        match cache_bits {
            None => cache_bits = Some(len),
            Some(prev) if prev != len => {
                return Err(Error::ParameterMismatch(format!(
                    "users cache {prev} and {len} bits"
                )))
            }
            _ => {}
        }
    }
    let message = scheme.deliver(&files, &demands, &keys)?;
    Ok(Measurement {
        memory: Rational::new(cache_bits.unwrap_or(0) as i64, file_bits),
        rate: Rational::new(message.payload.len() as i64, file_bits),
        header_bits: message.header_bits(),
    })
}

/// Negative control: a non-private scheme that broadcasts the demand
/// vector in the clear but claims to be private.
#[derive(Debug)]
pub struct PlaintextHeader {
    inner: SchemeInstance,
}

pub fn plaintext_header_control(inner: SchemeInstance) -> SchemeInstance {
    Arc::new(PlaintextHeader { inner })
}

impl Scheme for PlaintextHeader {
    fn name(&self) -> String {
        format!("plaintext({})", self.inner.name())
    }

    fn params(&self) -> SchemeParams {
        self.inner.params()
    }

    fn privacy(&self) -> PrivacyClass {
        PrivacyClass::Private
    }

    fn key_alphabet(&self) -> Vec<u64> {
        self.inner.key_alphabet()
    }

    fn private_alphabet(&self, width: usize) -> Vec<u64> {
        self.inner.private_alphabet(width)
    }

    fn header_widths(&self) -> Vec<u32> {
        let p = self.inner.params();
        let mut widths = vec![bits_for(p.n_files as u64); p.n_users];
        widths.extend(self.inner.header_widths());
        widths
    }

    fn place(&self, user: usize, keys: &KeyAssignment, files: &FileStore) -> Result<CacheContent> {
        self.inner.place(user, keys, files)
    }

    fn deliver(&self, files: &FileStore, demands: &DemandVector, keys: &KeyAssignment) -> Result<DeliveryMessage> {
        let inner = self.inner.deliver(files, demands, keys)?;
        let mut header: Vec<u64> = demands.entries().iter().map(|&d| d as u64).collect();
        header.extend(inner.header);
        Ok(DeliveryMessage {
            payload: inner.payload,
            header,
            header_widths: self.header_widths(),
        })
    }

    fn decode(&self, view: &UserView<'_>) -> Result<Bits> {
        let p = self.inner.params();
        let entries = view.message.header[..p.n_users].iter().map(|&d| d as usize).collect();
        let demands = DemandVector::new(entries, p.n_files)?;
        let message = DeliveryMessage {
            payload: view.message.payload.clone(),
            header: view.message.header[p.n_users..].to_vec(),
            header_widths: view.message.header_widths[p.n_users..].to_vec(),
        };
        self.inner.decode(&UserView {
            message: &message,
            demand_vector: Some(&demands),
            ..*view
        })
    }
}
