//! Search for GF(2)-linear non-private schemes.
//!
//! Decodability of a linear scheme is a rank condition: user `u` with
//! demand `f` decodes iff every unit row of file `f` lies in the span of its
//! placement rows stacked with the delivery rows. The search samples
//! placements and then completes each demand's delivery.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf2::{self, EchelonBasis};
use crate::linear::LinearSchemeMatrices;
use crate::model::DemandVector;
use crate::schemes::DemandSubset;
use crate::verifier::{Counterexample, Verdict};

pub const DEFAULT_TRIALS: u64 = 1_000_000;

/// Largest number of candidate delivery subspaces enumerated per demand.
const SUBSPACE_LIMIT: u128 = 1 << 16;

/// Draws per user within one restart before giving up on it.
const USER_ATTEMPTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    RandomRestarts,
    Exhaustive,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub trials: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::RandomRestarts,
            seed: 0,
            trials: DEFAULT_TRIALS,
        }
    }
}

fn file_rows(file: usize, t: usize) -> impl Iterator<Item = u64> {
    (0..t).map(move |s| 1u64 << (file * t + s))
}

/// Rank test of every (demand, user, subfile) triple in `demands`.
pub fn verify_linear(m: &LinearSchemeMatrices, demands: &DemandSubset) -> Result<Verdict> {
    m.check_dimensions()?;
    let t = m.subpacketization;
    let mut failure = None;
    'outer: for d in demands.members() {
        if d.len() != m.n_users {
            return Err(Error::ParameterMismatch(format!("demand {d} has wrong length")));
        }
        let Some((_, tx)) = m.delivery.iter().find(|(dd, _)| dd == d) else {
            failure = Some((d.clone(), None, "no delivery matrix for this demand".to_string()));
            break;
        };
        for (u, cache) in m.placement.iter().enumerate() {
            let stacked: Vec<u64> = cache.iter().chain(tx).copied().collect();
            let basis = EchelonBasis::from_rows(&stacked);
            let file = d.get(u);
            if let Some(s) = file_rows(file, t).position(|row| !basis.contains(row)) {
                failure = Some((
                    d.clone(),
                    Some(u),
                    format!("subfile {s} of file {file} is outside the span"),
                ));
                break 'outer;
            }
        }
    }
    let counterexample = failure.map(|(d, user, detail)| Counterexample {
        files: String::new(),
        demands: d.entries().to_vec(),
        shared_keys: Vec::new(),
        private: Vec::new(),
        user,
        detail,
    });
    Ok(Verdict {
        check: format!("linear-rank[{}]", m.name),
        pass: counterexample.is_none(),
        counterexample,
        mutual_information_bits: None,
        atoms: demands.len() as u128,
        cases: (demands.len() * m.n_users * t) as u128,
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Representative of a placement subspace under independent relabeling of
/// the subfiles of each file: the smallest RREF over all relabelings.
pub fn canonical_placement(rows: &[u64], n_files: usize, t: usize) -> Vec<u64> {
    let perms = permutations(t);
    let mut best = gf2::rref(rows);
    let mut choice = vec![0usize; n_files];
    loop {
        let permuted: Vec<u64> = rows
            .iter()
            .map(|&r| {
                let mut out = 0u64;
                for f in 0..n_files {
                    for (s, &to) in perms[choice[f]].iter().enumerate() {
                        if r >> (f * t + s) & 1 == 1 {
                            out |= 1 << (f * t + to);
                        }
                    }
                }
                out
            })
            .collect();
        let candidate = gf2::rref(&permuted);
        if candidate < best {
            best = candidate;
        }
        // next relabeling in mixed radix
        let mut f = 0;
        while f < n_files {
            choice[f] += 1;
            if choice[f] < perms.len() {
                break;
            }
            choice[f] = 0;
            f += 1;
        }
        if f == n_files {
            return best;
        }
    }
}

struct Problem<'a> {
    n_files: usize,
    n_users: usize,
    t: usize,
    cache_dim: usize,
    tx_dim: usize,
    demands: &'a DemandSubset,
    candidates: Option<Vec<Vec<u64>>>,
}

type Bitset = Vec<u64>;
type Rows = Vec<u64>;

fn bitset_and(a: &mut Bitset, b: &Bitset) {
    for (x, y) in a.iter_mut().zip(b) {
        *x &= y;
    }
}

fn first_set(b: &Bitset) -> Option<usize> {
    b.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

impl Problem<'_> {
    fn cols(&self) -> usize {
        self.n_files * self.t
    }

    /// Candidate deliveries `T` with `file` inside `span(placement + T)`.
    fn compat(&self, placement: &[u64], file: usize) -> Bitset {
        let candidates = self.candidates.as_ref().expect("enumerable candidates");
        let mut bits = vec![0u64; candidates.len().div_ceil(64)];
        let base = EchelonBasis::from_rows(placement);
        // residuals of the wanted rows modulo the cache
        let residual: Vec<u64> = file_rows(file, self.t)
            .map(|r| base.reduce(r).0)
            .filter(|&r| r != 0)
            .collect();
        for (i, tx) in candidates.iter().enumerate() {
            let mut b = base.clone();
            for &r in tx {
                b.insert(r, 0);
            }
            if residual.iter().all(|&r| b.contains(r)) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        bits
    }

    fn complete_enumerated(&self, placements: &[Vec<u64>]) -> Option<Vec<Vec<u64>>> {
        let candidates = self.candidates.as_ref()?;
        let mut table: Vec<Vec<Option<Bitset>>> = vec![vec![None; self.n_files]; self.n_users];
        let mut out = Vec::with_capacity(self.demands.len());
        for d in self.demands.members() {
            let mut acc = vec![u64::MAX; candidates.len().div_ceil(64)];
            for u in 0..self.n_users {
                let f = d.get(u);
                let entry = table[u][f].get_or_insert_with(|| self.compat(&placements[u], f));
                bitset_and(&mut acc, entry);
            }
            let idx = first_set(&acc).filter(|&i| i < candidates.len())?;
            out.push(candidates[idx].clone());
        }
        Some(out)
    }

    fn complete_greedy<R: Rng>(&self, placements: &[Vec<u64>], rng: &mut R) -> Option<Vec<Vec<u64>>> {
        let mask = if self.cols() == 64 { u64::MAX } else { (1u64 << self.cols()) - 1 };
        let mut out = Vec::with_capacity(self.demands.len());
        for d in self.demands.members() {
            let mut tx: Vec<u64> = Vec::new();
            for (u, cache) in placements.iter().enumerate() {
                for row in file_rows(d.get(u), self.t) {
                    let basis = EchelonBasis::from_rows(&[cache.as_slice(), &tx].concat());
                    if basis.contains(row) {
                        continue;
                    }
                    let mut v = row;
                    for &c in cache {
                        if rng.random::<bool>() {
                            v ^= c;
                        }
                    }
                    tx.push(v);
                    if tx.len() > self.tx_dim {
                        return None;
                    }
                }
            }
            while tx.len() < self.tx_dim {
                let v = rng.random::<u64>() & mask;
                if gf2::rank(&[tx.as_slice(), &[v]].concat()) == tx.len() + 1 {
                    tx.push(v);
                }
            }
            out.push(tx);
        }
        Some(out)
    }

    fn matrices(&self, placements: Vec<Vec<u64>>, deliveries: Vec<Vec<u64>>) -> LinearSchemeMatrices {
        LinearSchemeMatrices {
            name: format!(
                "linear-{}x{}-t{}-c{}-x{}",
                self.n_files, self.n_users, self.t, self.cache_dim, self.tx_dim
            ),
            n_files: self.n_files,
            n_users: self.n_users,
            subpacketization: self.t,
            cache_dim: self.cache_dim,
            tx_dim: self.tx_dim,
            placement: placements,
            delivery: self
                .demands
                .members()
                .iter()
                .cloned()
                .zip(deliveries)
                .collect::<Vec<(DemandVector, Vec<u64>)>>(),
            demand_label: self.demands.label().clone(),
        }
    }

    fn sample_placement(&self, user: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let rows = gf2::random_full_rank(self.cache_dim, self.cols(), rng);
        if user == 0 {
            canonical_placement(&rows, self.n_files, self.t)
        } else {
            gf2::rref(&rows)
        }
    }

    /// Draws users one at a time, redrawing a user whose placement leaves
    /// some demand without a compatible delivery.
    fn sample_pruned(&self, rng: &mut ChaCha8Rng) -> Option<(Vec<Rows>, Vec<Rows>)> {
        let candidates = self.candidates.as_ref()?;
        let words = candidates.len().div_ceil(64);
        let mut acc: Vec<Bitset> = vec![vec![u64::MAX; words]; self.demands.len()];
        let mut placements = Vec::with_capacity(self.n_users);
        for user in 0..self.n_users {
            let accepted = (0..USER_ATTEMPTS).find_map(|_| {
                let placement = self.sample_placement(user, rng);
                let compat: Vec<Bitset> = (0..self.n_files).map(|f| self.compat(&placement, f)).collect();
                let next: Vec<Bitset> = acc
                    .iter()
                    .zip(self.demands.members())
                    .map(|(b, d)| {
                        let mut n = b.clone();
                        bitset_and(&mut n, &compat[d.get(user)]);
                        n
                    })
                    .collect();
                next.iter()
                    .all(|b| first_set(b).is_some_and(|i| i < candidates.len()))
                    .then_some((placement, next))
            });
            let (placement, next) = accepted?;
            placements.push(placement);
            acc = next;
        }
        let deliveries = acc
            .iter()
            .map(|b| candidates[first_set(b).expect("non-empty")].clone())
            .collect();
        Some((placements, deliveries))
    }

    fn restart(&self, seed: u64, trial: u64) -> Option<LinearSchemeMatrices> {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&trial.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        let (placements, deliveries) = if self.candidates.is_some() {
            self.sample_pruned(&mut rng)?
        } else {
            let placements: Vec<Vec<u64>> =
                (0..self.n_users).map(|u| self.sample_placement(u, &mut rng)).collect();
            let deliveries = self.complete_greedy(&placements, &mut rng)?;
            (placements, deliveries)
        };
        Some(self.matrices(placements, deliveries))
    }

    fn exhaustive(&self) -> Result<Option<LinearSchemeMatrices>> {
        if self.candidates.is_none() {
            return Err(Error::ParameterMismatch(
                "exhaustive search needs an enumerable delivery space".into(),
            ));
        }
        if gf2::gaussian_binomial(self.cols(), self.cache_dim) > SUBSPACE_LIMIT {
            return Err(Error::ParameterMismatch(
                "exhaustive search needs an enumerable placement space".into(),
            ));
        }
        let spaces = gf2::subspaces(self.cols(), self.cache_dim);
        let mut firsts: Vec<Vec<u64>> = spaces
            .iter()
            .map(|s| canonical_placement(s, self.n_files, self.t))
            .collect();
        firsts.sort();
        firsts.dedup();
        let compat: Vec<Vec<Bitset>> = spaces
            .par_iter()
            .map(|s| (0..self.n_files).map(|f| self.compat(s, f)).collect())
            .collect();
        let words = self.candidates.as_ref().map_or(0, |c| c.len().div_ceil(64));
        let first_compat: Vec<Vec<Bitset>> = firsts
            .iter()
            .map(|s| (0..self.n_files).map(|f| self.compat(s, f)).collect())
            .collect();
        let found = (0..firsts.len()).into_par_iter().find_map_first(|fi| {
            let mut acc: Vec<Bitset> = self
                .demands
                .members()
                .iter()
                .map(|d| {
                    let mut b = vec![u64::MAX; words];
                    bitset_and(&mut b, &first_compat[fi][d.get(0)]);
                    b
                })
                .collect();
            if acc.iter().any(|b| first_set(b).is_none()) {
                return None;
            }
            let mut chosen = vec![0usize; self.n_users];
            if self.dfs(1, &mut acc, &mut chosen, &compat) {
                let mut placements = vec![firsts[fi].clone()];
                placements.extend(chosen[1..].iter().map(|&i| spaces[i].clone()));
                let deliveries = self.complete_enumerated(&placements)?;
                Some(self.matrices(placements, deliveries))
            } else {
                None
            }
        });
        Ok(found)
    }

    fn dfs(&self, user: usize, acc: &mut [Bitset], chosen: &mut [usize], compat: &[Vec<Bitset>]) -> bool {
        if user == self.n_users {
            return true;
        }
        for (i, per_file) in compat.iter().enumerate() {
            let next: Vec<Bitset> = acc
                .iter()
                .zip(self.demands.members())
                .map(|(b, d)| {
                    let mut n = b.clone();
                    bitset_and(&mut n, &per_file[d.get(user)]);
                    n
                })
                .collect();
            if next.iter().all(|b| first_set(b).is_some()) {
                let mut next = next;
                chosen[user] = i;
                if self.dfs(user + 1, &mut next, chosen, compat) {
                    return true;
                }
            }
        }
        false
    }
}

/// Looks for a linear scheme with `cache_dim` cached and `tx_dim` sent
/// symbols per file-subpacketization `t` that serves every demand in
/// `demands`. `Ok(None)` only comes from a completed exhaustive run;
/// random restarts report [`Error::SearchExhausted`] instead.
pub fn search_linear_scheme(
    n_files: usize,
    n_users: usize,
    t: usize,
    cache_dim: usize,
    tx_dim: usize,
    demands: &DemandSubset,
    cfg: &SearchConfig,
) -> Result<Option<LinearSchemeMatrices>> {
    let cols = n_files * t;
    if cols == 0 || cols > 64 {
        return Err(Error::ParameterMismatch(format!("{cols} columns; need 1..=64")));
    }
    if cache_dim > cols || tx_dim > cols {
        return Err(Error::ParameterMismatch(format!(
            "dimensions ({cache_dim}, {tx_dim}) exceed {cols}"
        )));
    }
    let candidates = (gf2::gaussian_binomial(cols, tx_dim) <= SUBSPACE_LIMIT)
        .then(|| gf2::subspaces(cols, tx_dim));
    let problem = Problem {
        n_files,
        n_users,
        t,
        cache_dim,
        tx_dim,
        demands,
        candidates,
    };
    if cache_dim == cols {
        let identity: Vec<u64> = (0..cols).map(|j| 1u64 << j).collect();
        let tx: Vec<u64> = identity[..tx_dim].to_vec();
        let m = problem.matrices(vec![identity; n_users], vec![tx; demands.len()]);
        return Ok(Some(m));
    }
    let found = match cfg.strategy {
        Strategy::Exhaustive => problem.exhaustive()?,
        Strategy::RandomRestarts => {
            let hit = (0..cfg.trials)
                .into_par_iter()
                .find_map_first(|trial| problem.restart(cfg.seed, trial));
            match hit {
                Some(m) => Some(m),
                None => return Err(Error::SearchExhausted { trials: cfg.trials }),
            }
        }
    };
    if let Some(m) = &found {
        let verdict = verify_linear(m, demands)?;
        if !verdict.pass || !m.is_full_rank() {
            return Err(Error::ParameterMismatch(format!(
                "search produced an invalid witness: {verdict:?}"
            )));
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{restricted_demand_set, small_cache_2x4_matrices, DemandLabel};

    #[test]
    fn table_scheme_passes_rank_test() {
        let v = verify_linear(&small_cache_2x4_matrices(), &restricted_demand_set(2, 2)).unwrap();
        assert!(v.pass, "{v:?}");
        assert_eq!(v.cases, 4 * 4 * 3);
    }

    #[test]
    fn corrupted_table_fails_rank_test() {
        let mut m = small_cache_2x4_matrices();
        m.delivery[0].1[3] = m.delivery[0].1[0];
        let v = verify_linear(&m, &restricted_demand_set(2, 2)).unwrap();
        assert!(!v.pass);
        assert!(v.counterexample.is_some());
    }

    #[test]
    fn full_cache_passes_anything() {
        let set = DemandSubset::full(2, 3);
        let m = search_linear_scheme(2, 3, 2, 4, 0, &set, &SearchConfig::default())
            .unwrap()
            .unwrap();
        assert_eq!(m.placement[0], vec![1, 2, 4, 8]);
        assert!(m.delivery.iter().all(|(_, rows)| rows.is_empty()));
        assert!(verify_linear(&m, &set).unwrap().pass);
    }

    #[test]
    fn empty_cache_and_short_delivery_fails() {
        let d = DemandVector::new(vec![0, 1], 2).unwrap();
        let set = DemandSubset::from_members(2, DemandLabel::Explicit, vec![d.clone()]);
        let m = LinearSchemeMatrices {
            name: "short".into(),
            n_files: 2,
            n_users: 2,
            subpacketization: 3,
            cache_dim: 0,
            tx_dim: 2,
            placement: vec![vec![], vec![]],
            delivery: vec![(d, vec![1, 2])],
            demand_label: DemandLabel::Explicit,
        };
        assert!(!verify_linear(&m, &set).unwrap().pass);
    }

    #[test]
    fn missing_delivery_fails() {
        let mut m = small_cache_2x4_matrices();
        m.delivery.pop();
        assert!(!verify_linear(&m, &restricted_demand_set(2, 2)).unwrap().pass);
    }

    #[test]
    fn canonical_form_is_relabeling_invariant() {
        // A1+B1 and A3+B2 are the same up to relabeling
        let a = canonical_placement(&[0b001001], 2, 3);
        let b = canonical_placement(&[0b010100], 2, 3);
        assert_eq!(a, b);
        let c = canonical_placement(&[0b000111], 2, 3);
        assert_ne!(a, c);
    }

    #[test]
    fn finds_low_memory_corner() {
        let set = restricted_demand_set(2, 2);
        let cfg = SearchConfig { trials: 20_000, ..SearchConfig::default() };
        let m = search_linear_scheme(2, 4, 3, 1, 4, &set, &cfg).unwrap().unwrap();
        assert!(verify_linear(&m, &set).unwrap().pass);
    }

    #[test]
    fn search_is_reproducible() {
        let set = restricted_demand_set(2, 2);
        let cfg = SearchConfig { trials: 20_000, seed: 7, ..SearchConfig::default() };
        let a = search_linear_scheme(2, 4, 3, 1, 4, &set, &cfg).unwrap();
        let b = search_linear_scheme(2, 4, 3, 1, 4, &set, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn greedy_completion_finds_uncoded_delivery() {
        // 2 files, t = 6: 12 columns, too many 6-dim subspaces to enumerate
        let members = vec![
            DemandVector::new(vec![0, 0], 2).unwrap(),
            DemandVector::new(vec![1, 1], 2).unwrap(),
        ];
        let set = DemandSubset::from_members(2, DemandLabel::Explicit, members);
        let cfg = SearchConfig { trials: 2_000, ..SearchConfig::default() };
        let m = search_linear_scheme(2, 2, 6, 0, 6, &set, &cfg).unwrap().unwrap();
        assert!(verify_linear(&m, &set).unwrap().pass);
    }
}
