//! Domain types shared by every construction: packed subfile symbols, the
//! file store, demand and key vectors, cache and delivery payloads, and the
//! [`Scheme`] interface.

use std::fmt;
use std::sync::Arc;

use bitvec::prelude::*;
use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::schemes::DemandSubset;

/// Packed bit vector, least-significant bit first within each octet.
pub type Bits = BitVec<u8, Lsb0>;

/// Exact rational used for memory and rate values.
pub type Rational = Ratio<i64>;

/// Number of bits needed to carry a value in `[radix]`.
pub fn bits_for(radix: u64) -> u32 {
    if radix <= 1 {
        0
    } else {
        64 - (radix - 1).leading_zeros()
    }
}

/// Bytes of a bit vector with the dead bits of the last octet cleared.
pub fn packed_bytes(bits: &BitSlice<u8, Lsb0>) -> Vec<u8> {
    let mut owned: Bits = bits.to_bitvec();
    owned.set_uninitialized(false);
    owned.into_vec()
}

/// One subfile: a fixed-width bit string.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Symbol(Bits);

impl Symbol {
    pub fn zero(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::ZeroWidth);
        }
        Ok(Self(BitVec::repeat(false, width)))
    }

    pub fn from_bits(bits: Bits) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::ZeroWidth);
        }
        Ok(Self(bits))
    }

    /// Parses a string of `0`/`1` characters, first character is bit 0.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Bits::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(Error::Decode(format!("bad symbol character {c:?}"))),
            }
        }
        Self::from_bits(bits)
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &BitSlice<u8, Lsb0> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.not_any()
    }

    pub fn xor(&self, other: &Symbol) -> Result<Symbol> {
        let mut out = self.clone();
        out.xor_assign(other)?;
        Ok(out)
    }

    pub fn xor_assign(&mut self, other: &Symbol) -> Result<()> {
        if self.width() != other.width() {
            return Err(Error::WidthMismatch {
                left: self.width(),
                right: other.width(),
            });
        }
        xor_into(&mut self.0, &other.0);
        Ok(())
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0.iter() {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Free-standing XOR of two equal-width symbols.
pub fn xor_symbols(a: &Symbol, b: &Symbol) -> Result<Symbol> {
    a.xor(b)
}

fn xor_into(dst: &mut BitSlice<u8, Lsb0>, src: &BitSlice<u8, Lsb0>) {
    debug_assert_eq!(dst.len(), src.len());
    for (mut d, s) in dst.iter_mut().zip(src.iter()) {
        *d ^= *s;
    }
}

/// The server's library: `n_files` files of `subpacketization` symbols each,
/// stored row-major by (file, subfile).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileStore {
    n_files: usize,
    subpacketization: usize,
    width: usize,
    symbols: Vec<Symbol>,
}

impl FileStore {
    pub fn new(n_files: usize, subpacketization: usize, symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.len() != n_files * subpacketization {
            return Err(Error::ParameterMismatch(format!(
                "{} symbols for {n_files} files of {subpacketization} subfiles",
                symbols.len()
            )));
        }
        let width = symbols.first().map(Symbol::width).unwrap_or(1);
        if let Some(bad) = symbols.iter().find(|s| s.width() != width) {
            return Err(Error::WidthMismatch {
                left: width,
                right: bad.width(),
            });
        }
        Ok(Self {
            n_files,
            subpacketization,
            width,
            symbols,
        })
    }

    /// Files drawn uniformly and independently, one fresh draw per bit.
    pub fn random<R: Rng + ?Sized>(
        n_files: usize,
        subpacketization: usize,
        width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::ZeroWidth);
        }
        let symbols = (0..n_files * subpacketization)
            .map(|_| {
                let bits: Bits = (0..width).map(|_| rng.random::<bool>()).collect();
                Symbol(bits)
            })
            .collect();
        Self::new(n_files, subpacketization, symbols)
    }

    /// The file realization whose concatenated row-major bits spell `index`
    /// (bit 0 of `index` is bit 0 of file 0, subfile 0).
    pub fn from_index(n_files: usize, subpacketization: usize, width: usize, index: u128) -> Result<Self> {
        if width == 0 {
            return Err(Error::ZeroWidth);
        }
        let total = n_files * subpacketization * width;
        if total > 128 {
            return Err(Error::ParameterMismatch(format!(
                "{total} file bits cannot be indexed by a 128-bit atom"
            )));
        }
        let symbols = (0..n_files * subpacketization)
            .map(|s| {
                let bits: Bits = (0..width)
                    .map(|b| (index >> (s * width + b)) & 1 == 1)
                    .collect();
                Symbol(bits)
            })
            .collect();
        Self::new(n_files, subpacketization, symbols)
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn subpacketization(&self) -> usize {
        self.subpacketization
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// File size in bits.
    pub fn file_bits_len(&self) -> usize {
        self.subpacketization * self.width
    }

    pub fn symbol(&self, file: usize, subfile: usize) -> &Symbol {
        &self.symbols[file * self.subpacketization + subfile]
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn file_bits(&self, file: usize) -> Bits {
        let mut out = Bits::with_capacity(self.file_bits_len());
        for s in 0..self.subpacketization {
            out.extend_from_bitslice(self.symbol(file, s).bits());
        }
        out
    }

    /// A store over subfiles `[first, first + count * group)` of every file,
    /// merging each run of `group` consecutive subfiles into one wider symbol.
    pub fn segment(&self, first: usize, count: usize, group: usize) -> Result<FileStore> {
        if group == 0 || first + count * group > self.subpacketization {
            return Err(Error::ParameterMismatch(format!(
                "segment [{first}, +{count}x{group}) outside {} subfiles",
                self.subpacketization
            )));
        }
        let mut symbols = Vec::with_capacity(self.n_files * count);
        for f in 0..self.n_files {
            for c in 0..count {
                let mut bits = Bits::with_capacity(group * self.width);
                for g in 0..group {
                    bits.extend_from_bitslice(self.symbol(f, first + c * group + g).bits());
                }
                symbols.push(Symbol(bits));
            }
        }
        FileStore::new(self.n_files, count, symbols)
    }

    /// XOR of the symbols selected by `mask`, bit `i` meaning the `i`-th
    /// symbol in row-major order.
    pub fn combine(&self, mask: u64) -> Symbol {
        let mut acc = BitVec::repeat(false, self.width);
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            xor_into(&mut acc, self.symbols[i].bits());
            m &= m - 1;
        }
        Symbol(acc)
    }
}

/// Demands of all users, each entry a file index in `[n_files]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DemandVector {
    entries: Vec<usize>,
    n_files: usize,
}

impl DemandVector {
    pub fn new(entries: Vec<usize>, n_files: usize) -> Result<Self> {
        if let Some(&entry) = entries.iter().find(|&&e| e >= n_files) {
            return Err(Error::DemandOutOfRange { entry, n_files });
        }
        Ok(Self { entries, n_files })
    }

    /// The `index`-th vector of `[n_files]^len` in mixed radix, user 0 most
    /// significant.
    pub fn from_index(mut index: u64, len: usize, n_files: usize) -> Self {
        let mut entries = vec![0; len];
        for e in entries.iter_mut().rev() {
            *e = (index % n_files as u64) as usize;
            index /= n_files as u64;
        }
        Self { entries, n_files }
    }

    /// All of `[n_files]^len` in mixed-radix order.
    pub fn all(n_files: usize, len: usize) -> Vec<DemandVector> {
        let count = (n_files as u64).pow(len as u32);
        (0..count).map(|i| Self::from_index(i, len, n_files)).collect()
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, user: usize) -> usize {
        self.entries[user]
    }

    /// Demands of everyone except `user`.
    pub fn without(&self, user: usize) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != user)
            .map(|(_, &d)| d)
            .collect()
    }
}

impl fmt::Debug for DemandVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.entries)
    }
}

impl fmt::Display for DemandVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Right cyclic shift applied `times` times: one shift maps
/// `(t1, ..., tN)` to `(tN, t1, ..., tN-1)`.
pub fn cyclic_shift(v: &[usize], times: usize) -> Vec<usize> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    let mut out = v.to_vec();
    out.rotate_right(times % n);
    out
}

/// Componentwise `(keys[k] - demands[k]) mod n`.
pub fn mod_sub_vec(keys: &[u64], demands: &DemandVector) -> Vec<usize> {
    let n = demands.n_files() as u64;
    keys.iter()
        .zip(demands.entries())
        .map(|(&s, &d)| ((s % n + n - d as u64) % n) as usize)
        .collect()
}

/// Demand vector for `n * K` virtual users whose `k`-th block is the
/// identity permutation shifted by `shifts[k]`.
pub fn expand_shifts(shifts: &[usize], n_files: usize) -> DemandVector {
    let identity: Vec<usize> = (0..n_files).collect();
    let entries = shifts
        .iter()
        .flat_map(|&c| cyclic_shift(&identity, c))
        .collect();
    DemandVector {
        entries,
        n_files,
    }
}

/// Expanded demand for the virtual problem: block `k` is the identity
/// shifted by `(S_k - D_k) mod N`.
pub fn expand_demand(demands: &DemandVector, keys: &[u64]) -> DemandVector {
    expand_shifts(&mod_sub_vec(keys, demands), demands.n_files())
}

/// Shared keys (one per user) and the server's private randomness, each
/// component a digit in the radix the scheme declares.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct KeyAssignment {
    pub shared: Vec<u64>,
    pub private: Vec<u64>,
}

impl KeyAssignment {
    pub fn new(shared: Vec<u64>, private: Vec<u64>) -> Self {
        Self { shared, private }
    }

    /// Uniform draw over the given alphabets.
    pub fn sample<R: Rng + ?Sized>(shared: &[u64], private: &[u64], rng: &mut R) -> Self {
        Self {
            shared: shared.iter().map(|&r| rng.random_range(0..r.max(1))).collect(),
            private: private.iter().map(|&r| rng.random_range(0..r.max(1))).collect(),
        }
    }

    pub fn check(&self, shared: &[u64], private: &[u64]) -> Result<()> {
        let ok = self.shared.len() == shared.len()
            && self.private.len() == private.len()
            && self.shared.iter().zip(shared).all(|(v, r)| v < r)
            && self.private.iter().zip(private).all(|(v, r)| v < r);
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterMismatch(format!(
                "keys {self:?} outside alphabets {shared:?} / {private:?}"
            )))
        }
    }
}

/// What user `k` stores: coded file bits plus its shared key.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheContent {
    pub bits: Bits,
    pub key: u64,
}

/// Broadcast: the payload counted toward the rate plus a short header.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeliveryMessage {
    pub payload: Bits,
    pub header: Vec<u64>,
    pub header_widths: Vec<u32>,
}

impl DeliveryMessage {
    pub fn new(payload: Bits) -> Self {
        Self {
            payload,
            header: Vec::new(),
            header_widths: Vec::new(),
        }
    }

    pub fn header_bits(&self) -> u64 {
        self.header_widths.iter().map(|&w| w as u64).sum()
    }

    /// Header values packed at their declared widths, LSB first.
    pub fn header_packed(&self) -> Bits {
        let mut out = Bits::with_capacity(self.header_bits() as usize);
        for (&v, &w) in self.header.iter().zip(&self.header_widths) {
            for b in 0..w {
                out.push((v >> b) & 1 == 1);
            }
        }
        out
    }
}

/// Size and shape of a scheme. Memory and rate are whole numbers of
/// subfile symbols per user and per broadcast.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchemeParams {
    pub n_files: usize,
    pub n_users: usize,
    pub subpacketization: usize,
    pub cache_symbols: usize,
    pub payload_symbols: usize,
}

impl SchemeParams {
    pub fn memory(&self) -> Rational {
        Rational::new(self.cache_symbols as i64, self.subpacketization as i64)
    }

    pub fn rate(&self) -> Rational {
        Rational::new(self.payload_symbols as i64, self.subpacketization as i64)
    }
}

/// Which demands a scheme must serve and whether it promises privacy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PrivacyClass {
    Private,
    NonPrivate(DemandSubset),
}

impl PrivacyClass {
    pub fn is_private(&self) -> bool {
        matches!(self, PrivacyClass::Private)
    }
}

/// Everything a single user holds at decode time. `demand_vector` is set
/// only for non-private schemes, where the full demand is public.
#[derive(Clone, Copy, Debug)]
pub struct UserView<'a> {
    pub user: usize,
    pub demand: usize,
    pub key: u64,
    pub cache: &'a CacheContent,
    pub message: &'a DeliveryMessage,
    pub demand_vector: Option<&'a DemandVector>,
}

/// Placement, delivery and per-user decoding of a caching scheme.
///
/// Randomness is always an explicit argument, so every method is a pure
/// function of its inputs.
pub trait Scheme: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn params(&self) -> SchemeParams;

    fn privacy(&self) -> PrivacyClass;

    /// Radix of each user's shared key.
    fn key_alphabet(&self) -> Vec<u64>;

    /// Radices of the server's private randomness at subfile width `width`.
    fn private_alphabet(&self, width: usize) -> Vec<u64>;

    /// Bit widths of the header values; depends on (N, K) only.
    fn header_widths(&self) -> Vec<u32>;

    fn place(&self, user: usize, keys: &KeyAssignment, files: &FileStore) -> Result<CacheContent>;

    fn deliver(
        &self,
        files: &FileStore,
        demands: &DemandVector,
        keys: &KeyAssignment,
    ) -> Result<DeliveryMessage>;

    /// Recovers the bits of the file `view.demand`.
    fn decode(&self, view: &UserView<'_>) -> Result<Bits>;

    /// Demand vectors the scheme must satisfy.
    fn served_demands(&self) -> Vec<DemandVector> {
        let p = self.params();
        match self.privacy() {
            PrivacyClass::Private => DemandVector::all(p.n_files, p.n_users),
            PrivacyClass::NonPrivate(set) => set.members().to_vec(),
        }
    }
}

pub type SchemeInstance = Arc<dyn Scheme>;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym(s: &str) -> Symbol {
        Symbol::parse(s).unwrap()
    }

    #[test]
    fn xor_examples() {
        assert_eq!(xor_symbols(&sym("101"), &sym("011")).unwrap(), sym("110"));
        let x = sym("1101");
        assert!(xor_symbols(&x, &x).unwrap().is_zero());
        assert_eq!(xor_symbols(&x, &sym("0000")).unwrap(), x);
    }

    #[test]
    fn xor_width_mismatch() {
        assert!(matches!(
            xor_symbols(&sym("10"), &sym("101")),
            Err(Error::WidthMismatch { left: 2, right: 3 })
        ));
        assert!(matches!(Symbol::zero(0), Err(Error::ZeroWidth)));
    }

    #[test]
    fn cyclic_shift_examples() {
        assert_eq!(cyclic_shift(&[0, 1], 1), vec![1, 0]);
        assert_eq!(cyclic_shift(&[0, 1, 2], 3), vec![0, 1, 2]);
        assert_eq!(cyclic_shift(&[0, 1, 2], 1), vec![2, 0, 1]);
    }

    #[test]
    fn mod_sub_examples() {
        let d = DemandVector::new(vec![0, 1], 2).unwrap();
        assert_eq!(mod_sub_vec(&[1, 0], &d), vec![1, 1]);
        assert_eq!(mod_sub_vec(&[0, 1], &d), vec![0, 0]);
        let d = DemandVector::new(vec![1, 0], 3).unwrap();
        assert_eq!(mod_sub_vec(&[0, 2], &d), vec![2, 2]);
    }

    #[test]
    fn expand_demand_examples() {
        let d = DemandVector::new(vec![0, 1], 2).unwrap();
        assert_eq!(expand_demand(&d, &[0, 0]).entries(), &[0, 1, 1, 0]);
        let d = DemandVector::new(vec![0, 0], 2).unwrap();
        assert_eq!(expand_demand(&d, &[0, 0]).entries(), &[0, 1, 0, 1]);
    }

    #[test]
    fn demand_range_checked() {
        assert!(matches!(
            DemandVector::new(vec![0, 2], 2),
            Err(Error::DemandOutOfRange { entry: 2, n_files: 2 })
        ));
    }

    #[test]
    fn store_index_layout() {
        // bit 0 -> file 0 subfile 0, bit 3 -> file 1 subfile 0
        let store = FileStore::from_index(2, 3, 1, 0b001001).unwrap();
        assert_eq!(store.symbol(0, 0), &sym("1"));
        assert_eq!(store.symbol(1, 0), &sym("1"));
        assert_eq!(store.symbol(0, 1), &sym("0"));
        assert_eq!(store.combine(0b001001), sym("0"));
        assert_eq!(store.combine(0b000001), sym("1"));
    }

    #[test]
    fn segment_groups_symbols() {
        let store = FileStore::from_index(1, 4, 1, 0b0110).unwrap();
        let seg = store.segment(1, 1, 2).unwrap();
        assert_eq!(seg.symbol(0, 0), &sym("11"));
        assert!(store.segment(3, 1, 2).is_err());
    }

    #[test]
    fn bits_for_radix() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(3), 2);
        assert_eq!(bits_for(4), 2);
        assert_eq!(bits_for(5), 3);
    }

    fn symbol_strategy(width: usize) -> impl Strategy<Value = Symbol> {
        prop::collection::vec(any::<bool>(), width)
            .prop_map(|v| Symbol::from_bits(v.into_iter().collect()).unwrap())
    }

    proptest! {
        #[test]
        fn xor_is_associative_and_commutative(
            (a, b, c) in (1usize..40).prop_flat_map(|w| (symbol_strategy(w), symbol_strategy(w), symbol_strategy(w)))
        ) {
            prop_assert_eq!(a.xor(&b).unwrap(), b.xor(&a).unwrap());
            prop_assert_eq!(a.xor(&b).unwrap().xor(&c).unwrap(), a.xor(&b.xor(&c).unwrap()).unwrap());
            prop_assert!(a.xor(&a).unwrap().is_zero());
        }

        #[test]
        fn shift_is_a_bijection_of_order_n(v in prop::collection::vec(0usize..7, 1..8), times in 0usize..20) {
            let n = v.len();
            let shifted = cyclic_shift(&v, times);
            prop_assert_eq!(cyclic_shift(&shifted, n - times % n), v.clone());
            prop_assert_eq!(cyclic_shift(&v, n), v);
        }

        #[test]
        fn expanded_demand_pivot_recovers_own_demand(
            n in 1usize..5, k in 1usize..4, seed in any::<u64>()
        ) {
            let d = DemandVector::from_index(seed % (n as u64).pow(k as u32), k, n);
            let keys: Vec<u64> = (0..k).map(|i| (seed >> (8 * i)) % n as u64).collect();
            let expanded = expand_demand(&d, &keys);
            prop_assert_eq!(expanded.len(), n * k);
            for (user, &key) in keys.iter().enumerate() {
                prop_assert_eq!(expanded.get(user * n + key as usize), d.get(user));
            }
        }
    }
}
