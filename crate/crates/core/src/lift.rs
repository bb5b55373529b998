//! Private constructions.
//!
//! [`theorem1_scheme`] achieves `min(N, K)(1 - M/N)` with uncoded caches.
//! When `N > K` the server places each distinct demanded file in a random
//! payload slot, fills the other slots with random bits, and tells user `k`
//! its slot through the one-time-padded header `(P_k + S_k) mod K`.
//!
//! [`lift_private`] turns a non-private scheme for `N` files and `N K`
//! virtual users, serving the restricted shift demands, into a private
//! scheme for `K` users. User `k` with key `S_k` takes the place of virtual
//! user `k N + S_k`; the header `(S_k - D_k) mod N` picks the virtual demand.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{
    bits_for, expand_shifts, mod_sub_vec, Bits, CacheContent, DeliveryMessage, DemandVector,
    FileStore, KeyAssignment, PrivacyClass, Rational, Scheme, SchemeInstance, SchemeParams,
    UserView,
};
use crate::schemes::{
    cache_split, cached_parts, dual_corner_scheme, restricted_demand_set, small_cache_2x4_scheme,
    uncached_part, UncodedScheme,
};

/// Payload slot of every user's file in the `N > K` branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionAssignment {
    positions: Vec<usize>,
}

impl PositionAssignment {
    /// Users are visited in order. A user whose file was already placed
    /// reuses that slot; otherwise the `m`-th new file takes the
    /// `choices[m]`-th unused slot in ascending order, `choices[m] < K - m`.
    pub fn assign(demands: &DemandVector, choices: &[u64]) -> Self {
        let k = demands.len();
        let mut free: Vec<usize> = (0..k).collect();
        let mut placed: Vec<(usize, usize)> = Vec::new();
        let mut positions = Vec::with_capacity(k);
        for &file in demands.entries() {
            let slot = match placed.iter().find(|(f, _)| *f == file) {
                Some(&(_, slot)) => slot,
                None => {
                    let pick = choices[placed.len()] as usize % free.len();
                    let slot = free.remove(pick);
                    placed.push((file, slot));
                    slot
                }
            };
            positions.push(slot);
        }
        Self { positions }
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn get(&self, user: usize) -> usize {
        self.positions[user]
    }
}

/// The `N > K` branch of the uncoded private scheme.
#[derive(Debug)]
pub struct SlotScheme {
    n_files: usize,
    n_users: usize,
    subpacketization: usize,
    cached: usize,
}

impl SlotScheme {
    fn slot_bits(&self, width: usize) -> usize {
        (self.subpacketization - self.cached) * width
    }
}

impl Scheme for SlotScheme {
    fn name(&self) -> String {
        let m = Rational::new((self.cached * self.n_files) as i64, self.subpacketization as i64);
        format!("thm1:{},{},{m}", self.n_files, self.n_users)
    }

    fn params(&self) -> SchemeParams {
        SchemeParams {
            n_files: self.n_files,
            n_users: self.n_users,
            subpacketization: self.subpacketization,
            cache_symbols: self.n_files * self.cached,
            payload_symbols: self.n_users * (self.subpacketization - self.cached),
        }
    }

    fn privacy(&self) -> PrivacyClass {
        PrivacyClass::Private
    }

    fn key_alphabet(&self) -> Vec<u64> {
        vec![self.n_users as u64; self.n_users]
    }

    /// Slot choices `u_m` in `[K - m]`, then one filler bit per payload bit.
    fn private_alphabet(&self, width: usize) -> Vec<u64> {
        let k = self.n_users as u64;
        let mut radices: Vec<u64> = (0..k).map(|m| k - m).collect();
        radices.extend(std::iter::repeat_n(2, self.n_users * self.slot_bits(width)));
        radices
    }

    fn header_widths(&self) -> Vec<u32> {
        vec![bits_for(self.n_users as u64); self.n_users]
    }

    fn place(&self, user: usize, keys: &KeyAssignment, files: &FileStore) -> Result<CacheContent> {
        Ok(CacheContent {
            bits: cached_parts(files, self.cached),
            key: keys.shared[user],
        })
    }

    fn deliver(&self, files: &FileStore, demands: &DemandVector, keys: &KeyAssignment) -> Result<DeliveryMessage> {
        if demands.len() != self.n_users || demands.n_files() != self.n_files {
            return Err(Error::DemandNotServed(demands.clone()));
        }
        keys.check(&self.key_alphabet(), &self.private_alphabet(files.width()))?;
        let k = self.n_users;
        let assignment = PositionAssignment::assign(demands, &keys.private[..k]);
        let filler = &keys.private[k..];
        let slot_bits = self.slot_bits(files.width());
        let mut payload = Bits::with_capacity(k * slot_bits);
        for slot in 0..k {
            match assignment.positions().iter().position(|&p| p == slot) {
                Some(user) => {
                    payload.extend_from_bitslice(&uncached_part(files, demands.get(user), self.cached))
                }
                None => payload.extend(
                    filler[slot * slot_bits..(slot + 1) * slot_bits]
                        .iter()
                        .map(|&b| b == 1),
                ),
            }
        }
        let header = (0..k)
            .map(|u| (assignment.get(u) as u64 + keys.shared[u]) % k as u64)
            .collect();
        Ok(DeliveryMessage {
            payload,
            header,
            header_widths: self.header_widths(),
        })
    }

    fn decode(&self, view: &UserView<'_>) -> Result<Bits> {
        let k = self.n_users as u64;
        let slot = ((view.message.header[view.user] + k - view.key % k) % k) as usize;
        let slot_bits = view.message.payload.len() / self.n_users;
        let width = slot_bits / (self.subpacketization - self.cached);
        let c = self.cached * width;
        let f = view.demand;
        let mut out = Bits::with_capacity(self.subpacketization * width);
        out.extend_from_bitslice(&view.cache.bits[f * c..(f + 1) * c]);
        out.extend_from_bitslice(&view.message.payload[slot * slot_bits..(slot + 1) * slot_bits]);
        Ok(out)
    }
}

/// Private scheme at `(M, min(N, K)(1 - M/N))`.
pub fn theorem1_scheme(n_files: usize, n_users: usize, memory: Rational) -> Result<SchemeInstance> {
    if n_files <= n_users {
        return Ok(Arc::new(UncodedScheme::new(n_files, n_users, memory, true)?));
    }
    let (subpacketization, cached) = cache_split(n_files, memory)?;
    if cached == subpacketization {
        // Everything cached: nothing to send, so the N <= K form is private too.
        return Ok(Arc::new(UncodedScheme::new(n_files, n_users, memory, true)?));
    }
    Ok(Arc::new(SlotScheme {
        n_files,
        n_users,
        subpacketization,
        cached,
    }))
}

#[derive(Debug)]
pub struct LiftedScheme {
    inner: SchemeInstance,
    n_files: usize,
    n_users: usize,
    name: String,
}

impl LiftedScheme {
    fn inner_keys(keys: &KeyAssignment, stacked_users: usize) -> KeyAssignment {
        KeyAssignment::new(vec![0; stacked_users], keys.private.clone())
    }

    pub fn inner(&self) -> &SchemeInstance {
        &self.inner
    }
}

impl Scheme for LiftedScheme {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn params(&self) -> SchemeParams {
        SchemeParams {
            n_users: self.n_users,
            ..self.inner.params()
        }
    }

    fn privacy(&self) -> PrivacyClass {
        PrivacyClass::Private
    }

    fn key_alphabet(&self) -> Vec<u64> {
        vec![self.n_files as u64; self.n_users]
    }

    fn private_alphabet(&self, width: usize) -> Vec<u64> {
        self.inner.private_alphabet(width)
    }

    fn header_widths(&self) -> Vec<u32> {
        vec![bits_for(self.n_files as u64); self.n_users]
    }

    fn place(&self, user: usize, keys: &KeyAssignment, files: &FileStore) -> Result<CacheContent> {
        let key = keys.shared[user];
        let virtual_user = user * self.n_files + key as usize;
        let inner = Self::inner_keys(keys, self.n_files * self.n_users);
        let cache = self.inner.place(virtual_user, &inner, files)?;
        Ok(CacheContent { bits: cache.bits, key })
    }

    fn deliver(&self, files: &FileStore, demands: &DemandVector, keys: &KeyAssignment) -> Result<DeliveryMessage> {
        if demands.len() != self.n_users || demands.n_files() != self.n_files {
            return Err(Error::DemandNotServed(demands.clone()));
        }
        keys.check(&self.key_alphabet(), &self.private_alphabet(files.width()))?;
        let shifts = mod_sub_vec(&keys.shared, demands);
        let expanded = expand_shifts(&shifts, self.n_files);
        let inner = Self::inner_keys(keys, self.n_files * self.n_users);
        let msg = self.inner.deliver(files, &expanded, &inner)?;
        Ok(DeliveryMessage {
            payload: msg.payload,
            header: shifts.iter().map(|&c| c as u64).collect(),
            header_widths: self.header_widths(),
        })
    }

    fn decode(&self, view: &UserView<'_>) -> Result<Bits> {
        let shifts: Vec<usize> = view.message.header.iter().map(|&c| c as usize).collect();
        if shifts.len() != self.n_users || shifts.iter().any(|&c| c >= self.n_files) {
            return Err(Error::Decode(format!("malformed header {shifts:?}")));
        }
        let expanded = expand_shifts(&shifts, self.n_files);
        let virtual_user = view.user * self.n_files + view.key as usize;
        let cache = CacheContent {
            bits: view.cache.bits.clone(),
            key: 0,
        };
        let message = DeliveryMessage::new(view.message.payload.clone());
        self.inner.decode(&UserView {
            user: virtual_user,
            demand: expanded.get(virtual_user),
            key: 0,
            cache: &cache,
            message: &message,
            demand_vector: Some(&expanded),
        })
    }
}

/// Private `(N, K, M, R)` scheme from a non-private `(N, N K, M, R)` scheme
/// that serves every restricted shift demand.
pub fn lift_private(inner: SchemeInstance, n_files: usize, n_users: usize) -> Result<SchemeInstance> {
    let name = format!("lift({})", inner.name());
    lift_named(inner, n_files, n_users, name)
}

fn lift_named(inner: SchemeInstance, n_files: usize, n_users: usize, name: String) -> Result<SchemeInstance> {
    let p = inner.params();
    if p.n_files != n_files || p.n_users != n_files * n_users {
        return Err(Error::ParameterMismatch(format!(
            "inner scheme is ({}, {}), lifting to ({n_files}, {n_users}) needs ({n_files}, {})",
            p.n_files,
            p.n_users,
            n_files * n_users
        )));
    }
    let served = match inner.privacy() {
        PrivacyClass::NonPrivate(set) => set,
        PrivacyClass::Private => {
            return Err(Error::ParameterMismatch("inner scheme must be non-private".into()))
        }
    };
    if !restricted_demand_set(n_files, n_users).is_subset_of(&served) {
        return Err(Error::ParameterMismatch(
            "inner scheme does not serve every restricted shift demand".into(),
        ));
    }
    if inner.key_alphabet().iter().any(|&r| r != 1) {
        return Err(Error::ParameterMismatch("inner scheme must not use shared keys".into()));
    }
    Ok(Arc::new(LiftedScheme {
        inner,
        n_files,
        n_users,
        name,
    }))
}

/// `(2, 2, 1/3, 4/3)` private scheme.
pub fn example1_scheme() -> SchemeInstance {
    lift_named(small_cache_2x4_scheme(), 2, 2, "example1".into()).expect("table scheme serves D_RS")
}

/// `(2, 2, 4/3, 1/3)` private scheme.
pub fn dual_example_scheme() -> SchemeInstance {
    lift_named(dual_corner_scheme(), 2, 2, "dual".into()).expect("witness serves D_RS")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::baseline_uncoded;
    use proptest::prelude::*;

    fn dv(e: &[usize], n: usize) -> DemandVector {
        DemandVector::new(e.to_vec(), n).unwrap()
    }

    #[test]
    fn same_demand_same_slot() {
        let a = PositionAssignment::assign(&dv(&[1, 1], 3), &[1, 0]);
        assert_eq!(a.get(0), a.get(1));
        assert_eq!(a.get(0), 1);
    }

    #[test]
    fn slot_choice_unranks_ascending() {
        // second new file picks among the slots left after the first
        let a = PositionAssignment::assign(&dv(&[2, 0, 2], 4), &[1, 1, 0]);
        assert_eq!(a.positions(), &[1, 2, 1]);
        let a = PositionAssignment::assign(&dv(&[0, 1, 2], 4), &[2, 1, 0]);
        assert_eq!(a.positions(), &[2, 1, 0]);
    }

    proptest! {
        #[test]
        fn positions_separate_distinct_files(
            k in 1usize..6, n in 1usize..6, seed in any::<u64>()
        ) {
            let d = DemandVector::from_index(seed % (n as u64).pow(k as u32), k, n);
            let choices: Vec<u64> = (0..k as u64).map(|m| (seed >> (m * 5)) % (k as u64 - m)).collect();
            let a = PositionAssignment::assign(&d, &choices);
            for i in 0..k {
                prop_assert!(a.get(i) < k);
                for j in 0..k {
                    prop_assert_eq!(d.get(i) == d.get(j), a.get(i) == a.get(j));
                }
            }
        }
    }

    #[test]
    fn thm1_small_branch_is_uncoded() {
        let s = theorem1_scheme(2, 3, 1.into()).unwrap();
        assert!(s.privacy().is_private());
        assert_eq!(s.params().rate(), 1.into());
        assert!(s.header_widths().is_empty());
    }

    #[test]
    fn thm1_large_branch_slots() {
        let s = theorem1_scheme(3, 2, 0.into()).unwrap();
        assert_eq!(s.params().rate(), 2.into());
        assert_eq!(s.key_alphabet(), vec![2, 2]);
        assert_eq!(s.private_alphabet(1), vec![2, 1, 2, 2]);
        assert_eq!(s.header_widths(), vec![1, 1]);

        let files = FileStore::from_index(3, 1, 1, 0b010).unwrap();
        let d = dv(&[1, 1], 3);
        let keys = KeyAssignment::new(vec![1, 0], vec![1, 0, 1, 1]);
        let msg = s.deliver(&files, &d, &keys).unwrap();
        // both users in slot 1 carrying W_1 = 1; slot 0 holds filler bit 1
        assert_eq!(msg.payload.iter().map(|b| *b).collect::<Vec<_>>(), vec![true, true]);
        assert_eq!(msg.header, vec![0, 1]);
        for user in 0..2 {
            let cache = s.place(user, &keys, &files).unwrap();
            let out = s
                .decode(&UserView {
                    user,
                    demand: 1,
                    key: keys.shared[user],
                    cache: &cache,
                    message: &msg,
                    demand_vector: None,
                })
                .unwrap();
            assert_eq!(out, files.file_bits(1));
        }
    }

    #[test]
    fn lift_selects_shift_indexed_transmission() {
        // D=(0,1), S=(1,0): header (1,1) selects T_(1,1) = (A1, A2, B3, B1+B2+B3)
        let s = example1_scheme();
        let files = FileStore::from_index(2, 3, 1, 0b101_011).unwrap();
        let keys = KeyAssignment::new(vec![1, 0], vec![]);
        let msg = s.deliver(&files, &dv(&[0, 1], 2), &keys).unwrap();
        assert_eq!(msg.header, vec![1, 1]);
        let expected = [true, true, true, false];
        assert_eq!(msg.payload.iter().map(|b| *b).collect::<Vec<_>>(), expected);
        assert_eq!(msg.header_bits(), 2);
    }

    #[test]
    fn lift_preserves_rates() {
        let s = example1_scheme();
        assert_eq!(s.params().memory(), Rational::new(1, 3));
        assert_eq!(s.params().rate(), Rational::new(4, 3));
        assert_eq!(s.params().n_users, 2);
    }

    #[test]
    fn lift_rejects_mismatched_inner() {
        let wrong_users = baseline_uncoded(2, 3, 0.into()).unwrap();
        assert!(lift_private(wrong_users, 2, 2).is_err());
        let private = theorem1_scheme(2, 4, 0.into()).unwrap();
        assert!(lift_private(private, 2, 2).is_err());
        let full = baseline_uncoded(2, 4, 0.into()).unwrap();
        assert!(lift_private(full, 2, 2).is_ok());
    }
}
