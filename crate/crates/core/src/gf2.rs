//! GF(2) linear algebra on bit-packed rows. A row is a `u64`; bit `j` is
//! column `j`, so spaces of dimension up to 64 are supported.

use rand::Rng;

/// Fully reduced echelon basis. Each stored vector has a distinct pivot
/// (its lowest set bit) and is zero at every other pivot. Alongside each
/// vector it keeps the set of inserted rows that XOR to it.
#[derive(Clone, Debug, Default)]
pub struct EchelonBasis {
    vectors: Vec<u64>,
    combos: Vec<u128>,
}

impl EchelonBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: &[u64]) -> Self {
        let mut basis = Self::new();
        for (i, &r) in rows.iter().enumerate() {
            basis.insert(r, 1u128 << i);
        }
        basis
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[u64] {
        &self.vectors
    }

    /// Residual of `v` after elimination and the combination consumed.
    pub fn reduce(&self, mut v: u64) -> (u64, u128) {
        let mut combo = 0u128;
        for (&b, &c) in self.vectors.iter().zip(&self.combos) {
            if v & (b & b.wrapping_neg()) != 0 {
                v ^= b;
                combo ^= c;
            }
        }
        (v, combo)
    }

    pub fn contains(&self, v: u64) -> bool {
        self.reduce(v).0 == 0
    }

    /// Which inserted rows XOR to `v`, if any.
    pub fn express(&self, v: u64) -> Option<u128> {
        match self.reduce(v) {
            (0, combo) => Some(combo),
            _ => None,
        }
    }

    /// Inserts `v` tagged with `combo`; returns whether the span grew.
    pub fn insert(&mut self, v: u64, combo: u128) -> bool {
        let (r, rc) = self.reduce(v);
        if r == 0 {
            return false;
        }
        let combo = combo ^ rc;
        let pivot = r & r.wrapping_neg();
        for (b, c) in self.vectors.iter_mut().zip(self.combos.iter_mut()) {
            if *b & pivot != 0 {
                *b ^= r;
                *c ^= combo;
            }
        }
        let at = self
            .vectors
            .iter()
            .position(|&b| (b & b.wrapping_neg()) > pivot)
            .unwrap_or(self.vectors.len());
        self.vectors.insert(at, r);
        self.combos.insert(at, combo);
        true
    }
}

pub fn rank(rows: &[u64]) -> usize {
    EchelonBasis::from_rows(rows).dim()
}

/// Reduced row echelon form of the row space, ordered by pivot column.
pub fn rref(rows: &[u64]) -> Vec<u64> {
    EchelonBasis::from_rows(rows).vectors().to_vec()
}

/// Whether every row of `sub` lies in the span of `rows`.
pub fn spans(rows: &[u64], sub: &[u64]) -> bool {
    let basis = EchelonBasis::from_rows(rows);
    sub.iter().all(|&v| basis.contains(v))
}

/// Number of `k`-dimensional subspaces of GF(2)^n.
pub fn gaussian_binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut num = 1u128;
    let mut den = 1u128;
    for i in 0..k {
        num *= (1u128 << (n - i)) - 1;
        den *= (1u128 << (i + 1)) - 1;
    }
    num / den
}

/// Every `k`-dimensional subspace of GF(2)^n as its RREF basis, in a fixed
/// order (pivot sets lexicographically, then free entries counting up).
pub fn subspaces(n: usize, k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut pivots = Vec::with_capacity(k);
    pivot_sets(n, k, 0, &mut pivots, &mut out);
    out
}

fn pivot_sets(n: usize, k: usize, start: usize, pivots: &mut Vec<usize>, out: &mut Vec<Vec<u64>>) {
    if pivots.len() == k {
        fill_free(n, pivots, out);
        return;
    }
    for p in start..n {
        pivots.push(p);
        pivot_sets(n, k, p + 1, pivots, out);
        pivots.pop();
    }
}

fn fill_free(n: usize, pivots: &[usize], out: &mut Vec<Vec<u64>>) {
    let pivot_mask: u64 = pivots.iter().fold(0, |m, &p| m | (1 << p));
    // Free positions of each row: non-pivot columns after its pivot.
    let free: Vec<Vec<usize>> = pivots
        .iter()
        .map(|&p| ((p + 1)..n).filter(|c| pivot_mask & (1 << c) == 0).collect())
        .collect();
    let total_free: usize = free.iter().map(Vec::len).sum();
    for assignment in 0u64..(1u64 << total_free) {
        let mut bit = 0;
        let rows = pivots
            .iter()
            .zip(&free)
            .map(|(&p, cols)| {
                let mut row = 1u64 << p;
                for &c in cols {
                    if (assignment >> bit) & 1 == 1 {
                        row |= 1 << c;
                    }
                    bit += 1;
                }
                row
            })
            .collect();
        out.push(rows);
    }
}

/// Uniform random `k x n` matrix of full row rank (rejection sampling).
pub fn random_full_rank<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Vec<u64> {
    assert!(k <= n && n <= 64);
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    loop {
        let rows: Vec<u64> = (0..k).map(|_| rng.random::<u64>() & mask).collect();
        if rank(&rows) == k {
            return rows;
        }
    }
}

pub fn row_to_string(row: u64, n: usize) -> String {
    (0..n).map(|j| if (row >> j) & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn row_from_str(s: &str) -> Option<u64> {
    if s.len() > 64 {
        return None;
    }
    let mut row = 0u64;
    for (j, c) in s.chars().enumerate() {
        match c {
            '1' => row |= 1 << j,
            '0' => {}
            _ => return None,
        }
    }
    Some(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_small() {
        assert_eq!(rank(&[0b011, 0b110, 0b101]), 2);
        assert_eq!(rank(&[0b001, 0b010, 0b100]), 3);
        assert_eq!(rank(&[0, 0]), 0);
    }

    #[test]
    fn express_tracks_combination() {
        let rows = [0b0011, 0b0110, 0b1000];
        let basis = EchelonBasis::from_rows(&rows);
        let combo = basis.express(0b1101).unwrap();
        let rebuilt = (0..3).filter(|i| combo >> i & 1 == 1).fold(0, |acc, i| acc ^ rows[i]);
        assert_eq!(rebuilt, 0b1101);
        assert_eq!(basis.express(0b0001), None);
    }

    #[test]
    fn subspace_counts_match_gaussian_binomial() {
        for n in 0..=6 {
            for k in 0..=n {
                assert_eq!(subspaces(n, k).len() as u128, gaussian_binomial(n, k), "n={n} k={k}");
            }
        }
        assert_eq!(gaussian_binomial(6, 4), 651);
        assert_eq!(gaussian_binomial(6, 1), 63);
    }

    #[test]
    fn subspaces_are_distinct_rref() {
        let all = subspaces(5, 2);
        let mut seen = std::collections::HashSet::new();
        for s in &all {
            assert_eq!(&rref(s), s);
            assert!(seen.insert(s.clone()));
        }
    }

    #[test]
    fn row_strings() {
        assert_eq!(row_to_string(0b000101, 6), "101000");
        assert_eq!(row_from_str("101000"), Some(0b000101));
        assert_eq!(row_from_str("10x"), None);
    }

    proptest! {
        #[test]
        fn rref_preserves_span(rows in prop::collection::vec(0u64..256, 0..8)) {
            let r = rref(&rows);
            prop_assert_eq!(r.len(), rank(&rows));
            prop_assert!(spans(&rows, &r));
            prop_assert!(spans(&r, &rows));
        }

        #[test]
        fn rank_bounded_by_brute_force(rows in prop::collection::vec(0u64..64, 0..6)) {
            // span size by enumerating all 2^m combinations
            let mut span = std::collections::HashSet::new();
            for mask in 0u32..(1 << rows.len()) {
                let v = (0..rows.len()).filter(|i| mask >> i & 1 == 1).fold(0u64, |a, i| a ^ rows[i]);
                span.insert(v);
            }
            prop_assert_eq!(span.len(), 1usize << rank(&rows));
        }
    }
}
