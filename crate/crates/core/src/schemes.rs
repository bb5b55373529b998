//! Non-private constructions and demand-set utilities: the uncoded baseline,
//! the (2, 4, 1/3, 4/3) scheme serving the restricted shift demands, its
//! frozen (4/3, 1/3) counterpart, and memory sharing between two schemes.

use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linear::{LinearScheme, LinearSchemeMatrices};
use crate::model::{
    cyclic_shift, expand_shifts, Bits, CacheContent, DeliveryMessage, DemandVector, FileStore,
    KeyAssignment, PrivacyClass, Rational, Scheme, SchemeInstance, SchemeParams, UserView,
};

/// Witness for the (2, 4, 4/3, 1/3) restricted-demand scheme, produced by
/// `cachepriv search --target 4/3,1/3 --out crates/core/data/dual_corner.toml`.
pub const DUAL_CORNER_DESCRIPTOR: &str = include_str!("../data/dual_corner.toml");

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DemandLabel {
    Full,
    Type(Vec<usize>),
    RestrictedShift,
    Explicit,
}

/// A set of demand vectors over `n_files` files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemandSubset {
    n_files: usize,
    label: DemandLabel,
    members: Vec<DemandVector>,
}

impl DemandSubset {
    pub fn from_members(n_files: usize, label: DemandLabel, members: Vec<DemandVector>) -> Self {
        Self {
            n_files,
            label,
            members,
        }
    }

    pub fn full(n_files: usize, n_users: usize) -> Self {
        Self::from_members(n_files, DemandLabel::Full, DemandVector::all(n_files, n_users))
    }

    /// All demands whose per-file request counts equal `counts`.
    pub fn type_class(n_files: usize, counts: &[usize]) -> Self {
        let n_users = counts.iter().sum();
        let members = DemandVector::all(n_files, n_users)
            .into_iter()
            .filter(|d| demand_type(d) == counts)
            .collect();
        Self::from_members(n_files, DemandLabel::Type(counts.to_vec()), members)
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn label(&self) -> &DemandLabel {
        &self.label
    }

    pub fn members(&self) -> &[DemandVector] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, d: &DemandVector) -> bool {
        self.members.contains(d)
    }

    pub fn is_subset_of(&self, other: &DemandSubset) -> bool {
        self.members.iter().all(|d| other.contains(d))
    }
}

/// Restricted shift demands for `n_files` files and `n_files * k_stacks`
/// virtual users: every length-`n_files` block is a right cyclic shift of
/// `(0, 1, ..., n_files - 1)`. Members are ordered by shift vector, first
/// block most significant.
pub fn restricted_demand_set(n_files: usize, k_stacks: usize) -> DemandSubset {
    let members = DemandVector::all(n_files, k_stacks)
        .iter()
        .map(|shifts| expand_shifts(shifts.entries(), n_files))
        .collect();
    DemandSubset::from_members(n_files, DemandLabel::RestrictedShift, members)
}

/// Shift vector `c(d)` of a restricted demand, or `None` if some block is
/// not a cyclic shift of the identity.
pub fn shift_vector(d: &DemandVector) -> Option<Vec<usize>> {
    let n = d.n_files();
    if n == 0 || !d.len().is_multiple_of(n) {
        return None;
    }
    let identity: Vec<usize> = (0..n).collect();
    d.entries()
        .chunks(n)
        .map(|block| (0..n).find(|&c| cyclic_shift(&identity, c) == block))
        .collect()
}

/// Number of users requesting each file.
pub fn demand_type(d: &DemandVector) -> Vec<usize> {
    let mut counts = vec![0; d.n_files()];
    for &f in d.entries() {
        counts[f] += 1;
    }
    counts
}

/// `(t, c)` such that caching `c` of `t` subfiles of every file stores
/// `memory` files in total.
pub(crate) fn cache_split(n_files: usize, memory: Rational) -> Result<(usize, usize)> {
    let per_file = memory / Rational::from_integer(n_files as i64);
    if memory < Rational::zero() || per_file > Rational::one() {
        return Err(Error::NonIntegralSplit(format!(
            "M={memory} outside [0, {n_files}]"
        )));
    }
    Ok((*per_file.denom() as usize, *per_file.numer() as usize))
}

/// Every user caches the same leading `cached` subfiles of every file; the
/// broadcast carries all the rest, whatever the demand.
#[derive(Debug)]
pub struct UncodedScheme {
    n_files: usize,
    n_users: usize,
    subpacketization: usize,
    cached: usize,
    private: bool,
}

impl UncodedScheme {
    pub(crate) fn new(n_files: usize, n_users: usize, memory: Rational, private: bool) -> Result<Self> {
        if n_files == 0 || n_users == 0 {
            return Err(Error::ParameterMismatch("need at least one file and user".into()));
        }
        let (subpacketization, cached) = cache_split(n_files, memory)?;
        Ok(Self {
            n_files,
            n_users,
            subpacketization,
            cached,
            private,
        })
    }
}

/// Cache of every uncoded-style scheme: leading `cached` subfiles of each file.
pub(crate) fn cached_parts(files: &FileStore, cached: usize) -> Bits {
    let mut bits = Bits::with_capacity(files.n_files() * cached * files.width());
    for f in 0..files.n_files() {
        for s in 0..cached {
            bits.extend_from_bitslice(files.symbol(f, s).bits());
        }
    }
    bits
}

/// Remaining subfiles of `file`.
pub(crate) fn uncached_part(files: &FileStore, file: usize, cached: usize) -> Bits {
    let mut bits = Bits::new();
    for s in cached..files.subpacketization() {
        bits.extend_from_bitslice(files.symbol(file, s).bits());
    }
    bits
}

impl Scheme for UncodedScheme {
    fn name(&self) -> String {
        let m = Rational::new(
            (self.cached * self.n_files) as i64,
            self.subpacketization as i64,
        );
        let kind = if self.private { "thm1" } else { "baseline" };
        format!("{kind}:{},{},{m}", self.n_files, self.n_users)
    }

    fn params(&self) -> SchemeParams {
        SchemeParams {
            n_files: self.n_files,
            n_users: self.n_users,
            subpacketization: self.subpacketization,
            cache_symbols: self.n_files * self.cached,
            payload_symbols: self.n_files * (self.subpacketization - self.cached),
        }
    }

    fn privacy(&self) -> PrivacyClass {
        if self.private {
            PrivacyClass::Private
        } else {
            PrivacyClass::NonPrivate(DemandSubset::full(self.n_files, self.n_users))
        }
    }

    fn key_alphabet(&self) -> Vec<u64> {
        vec![1; self.n_users]
    }

    fn private_alphabet(&self, _width: usize) -> Vec<u64> {
        Vec::new()
    }

    fn header_widths(&self) -> Vec<u32> {
        Vec::new()
    }

    fn place(&self, _user: usize, _keys: &KeyAssignment, files: &FileStore) -> Result<CacheContent> {
        Ok(CacheContent {
            bits: cached_parts(files, self.cached),
            key: 0,
        })
    }

    fn deliver(&self, files: &FileStore, demands: &DemandVector, _keys: &KeyAssignment) -> Result<DeliveryMessage> {
        if demands.len() != self.n_users || demands.n_files() != self.n_files {
            return Err(Error::DemandNotServed(demands.clone()));
        }
        let mut payload = Bits::new();
        for f in 0..self.n_files {
            payload.extend_from_bitslice(&uncached_part(files, f, self.cached));
        }
        Ok(DeliveryMessage::new(payload))
    }

    fn decode(&self, view: &UserView<'_>) -> Result<Bits> {
        let t = self.subpacketization;
        let width = if self.cached > 0 {
            view.cache.bits.len() / (self.n_files * self.cached)
        } else {
            view.message.payload.len() / (self.n_files * t)
        };
        let f = view.demand;
        let c = self.cached;
        let mut out = Bits::with_capacity(t * width);
        out.extend_from_bitslice(&view.cache.bits[f * c * width..(f + 1) * c * width]);
        let u = t - c;
        out.extend_from_bitslice(&view.message.payload[f * u * width..(f + 1) * u * width]);
        Ok(out)
    }
}

/// Non-private uncoded scheme serving every demand at rate `N - M`.
pub fn baseline_uncoded(n_files: usize, n_users: usize, memory: Rational) -> Result<SchemeInstance> {
    Ok(Arc::new(UncodedScheme::new(n_files, n_users, memory, false)?))
}

const A1: u64 = 1 << 0;
const A2: u64 = 1 << 1;
const A3: u64 = 1 << 2;
const B1: u64 = 1 << 3;
const B2: u64 = 1 << 4;
const B3: u64 = 1 << 5;
const ALL_A: u64 = A1 | A2 | A3;
const ALL_B: u64 = B1 | B2 | B3;

/// Matrices of the (2, 4, 1/3, 4/3) restricted-demand scheme. Virtual user
/// `2i + j` caches `C_{i,j}`; demand with shift vector `(i, j)` is served by
/// `T_(i,j)`, four symbols in table order.
pub fn small_cache_2x4_matrices() -> LinearSchemeMatrices {
    let caches = [[A1 | B1], [A3 | B3], [A2 | B2], [ALL_A | ALL_B]];
    let transmissions: [[u64; 4]; 4] = [
        [B1, B2, A3, ALL_A],
        [A2, A3, B1, ALL_B],
        [B2, B3, A1, ALL_A],
        [A1, A2, B3, ALL_B],
    ];
    let set = restricted_demand_set(2, 2);
    LinearSchemeMatrices {
        name: "small-cache-2x4".into(),
        n_files: 2,
        n_users: 4,
        subpacketization: 3,
        cache_dim: 1,
        tx_dim: 4,
        placement: caches.iter().map(|c| c.to_vec()).collect(),
        delivery: set
            .members()
            .iter()
            .zip(transmissions.iter())
            .map(|(d, t)| (d.clone(), t.to_vec()))
            .collect(),
        demand_label: DemandLabel::RestrictedShift,
    }
}

pub fn small_cache_2x4_scheme() -> SchemeInstance {
    Arc::new(LinearScheme::new(small_cache_2x4_matrices()).expect("table matrices are well formed"))
}

pub fn dual_corner_matrices() -> LinearSchemeMatrices {
    LinearSchemeMatrices::from_descriptor(DUAL_CORNER_DESCRIPTOR)
        .expect("committed dual-corner witness parses")
}

/// The (2, 4, 4/3, 1/3) restricted-demand scheme from the committed witness.
pub fn dual_corner_scheme() -> SchemeInstance {
    Arc::new(LinearScheme::new(dual_corner_matrices()).expect("committed witness is well formed"))
}

/// Runs `a` on a leading `lambda` fraction of every file and `b` on the
/// rest. Each side sees subfiles grouped into wider symbols so both
/// segments stay whole.
#[derive(Debug)]
pub struct MemoryShare {
    a: SchemeInstance,
    b: SchemeInstance,
    lambda: Rational,
    group_a: usize,
    group_b: usize,
    params: SchemeParams,
}

impl MemoryShare {
    fn split_keys(&self, keys: &KeyAssignment, width: usize) -> (KeyAssignment, KeyAssignment) {
        let ra = self.a.key_alphabet();
        let shared_a = keys.shared.iter().zip(&ra).map(|(k, r)| k % r).collect();
        let shared_b = keys.shared.iter().zip(&ra).map(|(k, r)| k / r).collect();
        let na = self.a.private_alphabet(width * self.group_a).len().min(keys.private.len());
        (
            KeyAssignment::new(shared_a, keys.private[..na].to_vec()),
            KeyAssignment::new(shared_b, keys.private[na..].to_vec()),
        )
    }

    fn segments(&self, files: &FileStore) -> Result<(FileStore, FileStore)> {
        let ta = self.a.params().subpacketization;
        let tb = self.b.params().subpacketization;
        Ok((
            files.segment(0, ta, self.group_a)?,
            files.segment(ta * self.group_a, tb, self.group_b)?,
        ))
    }

    pub fn lambda(&self) -> Rational {
        self.lambda
    }
}

impl Scheme for MemoryShare {
    fn name(&self) -> String {
        format!("share:{}:{}:{}", self.lambda, self.a.name(), self.b.name())
    }

    fn params(&self) -> SchemeParams {
        self.params
    }

    fn privacy(&self) -> PrivacyClass {
        self.a.privacy()
    }

    fn key_alphabet(&self) -> Vec<u64> {
        self.a
            .key_alphabet()
            .iter()
            .zip(self.b.key_alphabet())
            .map(|(ra, rb)| ra * rb)
            .collect()
    }

    fn private_alphabet(&self, width: usize) -> Vec<u64> {
        let mut radices = self.a.private_alphabet(width * self.group_a);
        radices.extend(self.b.private_alphabet(width * self.group_b));
        radices
    }

    fn header_widths(&self) -> Vec<u32> {
        let mut widths = self.a.header_widths();
        widths.extend(self.b.header_widths());
        widths
    }

    fn place(&self, user: usize, keys: &KeyAssignment, files: &FileStore) -> Result<CacheContent> {
        let (ka, kb) = self.split_keys(keys, files.width());
        let (fa, fb) = self.segments(files)?;
        let ca = self.a.place(user, &ka, &fa)?;
        let cb = self.b.place(user, &kb, &fb)?;
        let mut bits = ca.bits;
        bits.extend_from_bitslice(&cb.bits);
        Ok(CacheContent {
            bits,
            key: ca.key + self.a.key_alphabet()[user] * cb.key,
        })
    }

    fn deliver(&self, files: &FileStore, demands: &DemandVector, keys: &KeyAssignment) -> Result<DeliveryMessage> {
        let (ka, kb) = self.split_keys(keys, files.width());
        let (fa, fb) = self.segments(files)?;
        let xa = self.a.deliver(&fa, demands, &ka)?;
        let xb = self.b.deliver(&fb, demands, &kb)?;
        let mut msg = xa;
        msg.payload.extend_from_bitslice(&xb.payload);
        msg.header.extend(xb.header);
        msg.header_widths.extend(xb.header_widths);
        Ok(msg)
    }

    fn decode(&self, view: &UserView<'_>) -> Result<Bits> {
        let p = self.params;
        let width = view
            .cache
            .bits
            .len()
            .checked_div(p.cache_symbols)
            .or_else(|| view.message.payload.len().checked_div(p.payload_symbols))
            .ok_or_else(|| Error::Decode("scheme stores and sends nothing".into()))?;
        let pa = self.a.params();
        let cache_a = pa.cache_symbols * self.group_a * width;
        let payload_a = pa.payload_symbols * self.group_a * width;
        let header_a = self.a.header_widths().len();
        let ra = self.a.key_alphabet()[view.user];
        let (cache_bits_a, cache_bits_b) = view.cache.bits.split_at(cache_a);
        let (payload_bits_a, payload_bits_b) = view.message.payload.split_at(payload_a);
        let cache_a = CacheContent {
            bits: cache_bits_a.to_bitvec(),
            key: view.cache.key % ra,
        };
        let cache_b = CacheContent {
            bits: cache_bits_b.to_bitvec(),
            key: view.cache.key / ra,
        };
        let msg_a = DeliveryMessage {
            payload: payload_bits_a.to_bitvec(),
            header: view.message.header[..header_a].to_vec(),
            header_widths: view.message.header_widths[..header_a].to_vec(),
        };
        let msg_b = DeliveryMessage {
            payload: payload_bits_b.to_bitvec(),
            header: view.message.header[header_a..].to_vec(),
            header_widths: view.message.header_widths[header_a..].to_vec(),
        };
        let mut out = self.a.decode(&UserView {
            key: cache_a.key,
            cache: &cache_a,
            message: &msg_a,
            ..*view
        })?;
        out.extend_from_bitslice(&self.b.decode(&UserView {
            key: cache_b.key,
            cache: &cache_b,
            message: &msg_b,
            ..*view
        })?);
        Ok(out)
    }
}

/// Memory sharing: a `lambda` fraction of every file handled by `a`, the
/// rest by `b`. The result has `M = lambda M_a + (1 - lambda) M_b` and the
/// same combination for `R`.
pub fn memory_share(a: SchemeInstance, b: SchemeInstance, lambda: Rational) -> Result<SchemeInstance> {
    let (pa, pb) = (a.params(), b.params());
    if pa.n_files != pb.n_files || pa.n_users != pb.n_users {
        return Err(Error::ParameterMismatch(format!(
            "cannot share ({}, {}) with ({}, {})",
            pa.n_files, pa.n_users, pb.n_files, pb.n_users
        )));
    }
    if a.privacy() != b.privacy() {
        return Err(Error::ParameterMismatch("schemes differ in privacy class".into()));
    }
    if lambda < Rational::zero() || lambda > Rational::one() {
        return Err(Error::ParameterMismatch(format!("lambda {lambda} outside [0, 1]")));
    }
    if lambda.is_one() {
        return Ok(a);
    }
    if lambda.is_zero() {
        return Ok(b);
    }
    let (p, q) = (*lambda.numer() as usize, *lambda.denom() as usize);
    let l = pa.subpacketization.lcm(&pb.subpacketization);
    let group_a = p * l / pa.subpacketization;
    let group_b = (q - p) * l / pb.subpacketization;
    let params = SchemeParams {
        n_files: pa.n_files,
        n_users: pa.n_users,
        subpacketization: q * l,
        cache_symbols: pa.cache_symbols * group_a + pb.cache_symbols * group_b,
        payload_symbols: pa.payload_symbols * group_a + pb.payload_symbols * group_b,
    };
    Ok(Arc::new(MemoryShare {
        a,
        b,
        lambda,
        group_a,
        group_b,
        params,
    }))
}
