//! GF(2)-linear non-private schemes: the matrix description, its text
//! descriptor, and the executable scheme compiled from it.
//!
//! Column `f * t + s` of every matrix selects subfile `s` of file `f`.
//! Caches and transmissions are the row-wise XOR combinations of the
//! selected subfile symbols.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{self, EchelonBasis};
use crate::model::{
    Bits, CacheContent, DeliveryMessage, DemandVector, FileStore, KeyAssignment, PrivacyClass,
    Scheme, SchemeParams, UserView,
};
use crate::schemes::{DemandLabel, DemandSubset};

pub const DESCRIPTOR_FORMAT: &str = "cachepriv-linear-v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSchemeMatrices {
    pub name: String,
    pub n_files: usize,
    pub n_users: usize,
    pub subpacketization: usize,
    pub cache_dim: usize,
    pub tx_dim: usize,
    /// One `cache_dim`-row matrix per user.
    pub placement: Vec<Vec<u64>>,
    /// One `tx_dim`-row matrix per served demand.
    pub delivery: Vec<(DemandVector, Vec<u64>)>,
    pub demand_label: DemandLabel,
}

impl LinearSchemeMatrices {
    pub fn columns(&self) -> usize {
        self.n_files * self.subpacketization
    }

    pub fn params(&self) -> SchemeParams {
        SchemeParams {
            n_files: self.n_files,
            n_users: self.n_users,
            subpacketization: self.subpacketization,
            cache_symbols: self.cache_dim,
            payload_symbols: self.tx_dim,
        }
    }

    pub fn demand_subset(&self) -> DemandSubset {
        DemandSubset::from_members(
            self.n_files,
            self.demand_label.clone(),
            self.delivery.iter().map(|(d, _)| d.clone()).collect(),
        )
    }

    /// Shape checks: matrix counts, row counts, column range.
    pub fn check_dimensions(&self) -> Result<()> {
        let cols = self.columns();
        if cols == 0 || cols > 64 {
            return Err(Error::ParameterMismatch(format!(
                "{cols} columns; linear schemes support 1..=64"
            )));
        }
        if self.cache_dim + self.tx_dim > 128 {
            return Err(Error::ParameterMismatch("more than 128 stacked rows".into()));
        }
        let mask = if cols == 64 { u64::MAX } else { (1u64 << cols) - 1 };
        if self.placement.len() != self.n_users {
            return Err(Error::ParameterMismatch(format!(
                "{} placement matrices for {} users",
                self.placement.len(),
                self.n_users
            )));
        }
        for (u, rows) in self.placement.iter().enumerate() {
            if rows.len() != self.cache_dim || rows.iter().any(|r| r & !mask != 0) {
                return Err(Error::ParameterMismatch(format!(
                    "placement of user {u} is not {}x{cols}",
                    self.cache_dim
                )));
            }
        }
        for (d, rows) in &self.delivery {
            if d.len() != self.n_users || d.n_files() != self.n_files {
                return Err(Error::ParameterMismatch(format!("demand {d} has wrong shape")));
            }
            if rows.len() != self.tx_dim || rows.iter().any(|r| r & !mask != 0) {
                return Err(Error::ParameterMismatch(format!(
                    "delivery for {d} is not {}x{cols}",
                    self.tx_dim
                )));
            }
        }
        Ok(())
    }

    /// Whether every matrix has full row rank.
    pub fn is_full_rank(&self) -> bool {
        self.placement.iter().all(|m| gf2::rank(m) == m.len())
            && self.delivery.iter().all(|(_, m)| gf2::rank(m) == m.len())
    }

    pub fn to_descriptor(&self) -> String {
        let cols = self.columns();
        let doc = Descriptor {
            format: DESCRIPTOR_FORMAT.to_string(),
            name: self.name.clone(),
            files: self.n_files,
            users: self.n_users,
            subpacketization: self.subpacketization,
            cache_dim: self.cache_dim,
            tx_dim: self.tx_dim,
            demand_set: match &self.demand_label {
                DemandLabel::Full => "full".into(),
                DemandLabel::RestrictedShift => "restricted".into(),
                DemandLabel::Type(t) => format!(
                    "type:{}",
                    t.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                ),
                DemandLabel::Explicit => "explicit".into(),
            },
            placement: self
                .placement
                .iter()
                .enumerate()
                .map(|(user, rows)| PlacementEntry {
                    user,
                    rows: rows.iter().map(|&r| gf2::row_to_string(r, cols)).collect(),
                })
                .collect(),
            delivery: self
                .delivery
                .iter()
                .map(|(d, rows)| DeliveryEntry {
                    demand: d.entries().to_vec(),
                    rows: rows.iter().map(|&r| gf2::row_to_string(r, cols)).collect(),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("descriptor serializes")
    }

    pub fn from_descriptor(text: &str) -> Result<Self> {
        let doc: Descriptor =
            toml::from_str(text).map_err(|e| Error::Descriptor(e.to_string()))?;
        if doc.format != DESCRIPTOR_FORMAT {
            return Err(Error::Descriptor(format!("unknown format `{}`", doc.format)));
        }
        let parse_rows = |rows: &[String]| -> Result<Vec<u64>> {
            rows.iter()
                .map(|r| {
                    if r.len() != doc.files * doc.subpacketization {
                        return Err(Error::Descriptor(format!("row `{r}` has wrong length")));
                    }
                    gf2::row_from_str(r).ok_or_else(|| Error::Descriptor(format!("bad row `{r}`")))
                })
                .collect()
        };
        let mut placement = vec![Vec::new(); doc.users];
        for entry in &doc.placement {
            if entry.user >= doc.users {
                return Err(Error::Descriptor(format!("placement for unknown user {}", entry.user)));
            }
            placement[entry.user] = parse_rows(&entry.rows)?;
        }
        let delivery = doc
            .delivery
            .iter()
            .map(|e| Ok((DemandVector::new(e.demand.clone(), doc.files)?, parse_rows(&e.rows)?)))
            .collect::<Result<Vec<_>>>()?;
        let demand_label = match doc.demand_set.as_str() {
            "full" => DemandLabel::Full,
            "restricted" => DemandLabel::RestrictedShift,
            "explicit" => DemandLabel::Explicit,
            other => match other.strip_prefix("type:") {
                Some(t) => DemandLabel::Type(
                    t.split(',')
                        .map(|x| x.trim().parse().map_err(|_| Error::Descriptor(format!("bad type `{t}`"))))
                        .collect::<Result<_>>()?,
                ),
                None => return Err(Error::Descriptor(format!("unknown demand set `{other}`"))),
            },
        };
        let m = Self {
            name: doc.name,
            n_files: doc.files,
            n_users: doc.users,
            subpacketization: doc.subpacketization,
            cache_dim: doc.cache_dim,
            tx_dim: doc.tx_dim,
            placement,
            delivery,
            demand_label,
        };
        m.check_dimensions()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_descriptor(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct Descriptor {
    format: String,
    name: String,
    files: usize,
    users: usize,
    subpacketization: usize,
    cache_dim: usize,
    tx_dim: usize,
    demand_set: String,
    placement: Vec<PlacementEntry>,
    delivery: Vec<DeliveryEntry>,
}

#[derive(Serialize, Deserialize)]
struct PlacementEntry {
    user: usize,
    rows: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct DeliveryEntry {
    demand: Vec<usize>,
    rows: Vec<String>,
}

/// Executable form of a [`LinearSchemeMatrices`]. Decoding coefficients are
/// solved once per (demand, user); targets outside the span stay `None` and
/// surface as decode errors.
#[derive(Debug)]
pub struct LinearScheme {
    matrices: LinearSchemeMatrices,
    demand_index: HashMap<DemandVector, usize>,
    // [demand][user][subfile] -> combination of stacked (cache, delivery) rows
    decoders: Vec<Vec<Vec<Option<u128>>>>,
}

impl LinearScheme {
    pub fn new(matrices: LinearSchemeMatrices) -> Result<Self> {
        matrices.check_dimensions()?;
        let t = matrices.subpacketization;
        let mut demand_index = HashMap::new();
        let mut decoders = Vec::with_capacity(matrices.delivery.len());
        for (di, (d, tx)) in matrices.delivery.iter().enumerate() {
            demand_index.insert(d.clone(), di);
            let per_user = matrices
                .placement
                .iter()
                .enumerate()
                .map(|(u, cache)| {
                    let stacked: Vec<u64> = cache.iter().chain(tx).copied().collect();
                    let basis = EchelonBasis::from_rows(&stacked);
                    let file = d.get(u);
                    (0..t).map(|s| basis.express(1u64 << (file * t + s))).collect()
                })
                .collect();
            decoders.push(per_user);
        }
        Ok(Self {
            matrices,
            demand_index,
            decoders,
        })
    }

    pub fn matrices(&self) -> &LinearSchemeMatrices {
        &self.matrices
    }

    fn encode(rows: &[u64], files: &FileStore) -> Bits {
        let mut out = Bits::with_capacity(rows.len() * files.width());
        for &r in rows {
            out.extend_from_bitslice(files.combine(r).bits());
        }
        out
    }
}

impl Scheme for LinearScheme {
    fn name(&self) -> String {
        self.matrices.name.clone()
    }

    fn params(&self) -> SchemeParams {
        self.matrices.params()
    }

    fn privacy(&self) -> PrivacyClass {
        PrivacyClass::NonPrivate(self.matrices.demand_subset())
    }

    fn key_alphabet(&self) -> Vec<u64> {
        vec![1; self.matrices.n_users]
    }

    fn private_alphabet(&self, _width: usize) -> Vec<u64> {
        Vec::new()
    }

    fn header_widths(&self) -> Vec<u32> {
        Vec::new()
    }

    fn place(&self, user: usize, _keys: &KeyAssignment, files: &FileStore) -> Result<CacheContent> {
        let rows = self
            .matrices
            .placement
            .get(user)
            .ok_or_else(|| Error::ParameterMismatch(format!("no user {user}")))?;
        Ok(CacheContent {
            bits: Self::encode(rows, files),
            key: 0,
        })
    }

    fn deliver(&self, files: &FileStore, demands: &DemandVector, _keys: &KeyAssignment) -> Result<DeliveryMessage> {
        let &di = self
            .demand_index
            .get(demands)
            .ok_or_else(|| Error::DemandNotServed(demands.clone()))?;
        Ok(DeliveryMessage::new(Self::encode(&self.matrices.delivery[di].1, files)))
    }

    fn decode(&self, view: &UserView<'_>) -> Result<Bits> {
        let demands = view
            .demand_vector
            .ok_or_else(|| Error::Decode("non-private decoder needs the demand vector".into()))?;
        let &di = self
            .demand_index
            .get(demands)
            .ok_or_else(|| Error::DemandNotServed(demands.clone()))?;
        let m = &self.matrices;
        let width = view
            .cache
            .bits
            .len()
            .checked_div(m.cache_dim)
            .or_else(|| view.message.payload.len().checked_div(m.tx_dim))
            .ok_or_else(|| Error::Decode("scheme stores and sends nothing".into()))?;
        let stacked_symbol = |i: usize| {
            if i < m.cache_dim {
                &view.cache.bits[i * width..(i + 1) * width]
            } else {
                let j = i - m.cache_dim;
                &view.message.payload[j * width..(j + 1) * width]
            }
        };
        let mut out = Bits::with_capacity(m.subpacketization * width);
        for (s, combo) in self.decoders[di][view.user].iter().enumerate() {
            let combo = combo.ok_or_else(|| {
                Error::Decode(format!(
                    "user {} cannot reach subfile {s} of file {} under demand {demands}",
                    view.user,
                    demands.get(view.user)
                ))
            })?;
            let mut acc: Bits = Bits::repeat(false, width);
            for i in 0..(m.cache_dim + m.tx_dim) {
                if combo >> i & 1 == 1 {
                    for (mut a, b) in acc.iter_mut().zip(stacked_symbol(i).iter()) {
                        *a ^= *b;
                    }
                }
            }
            out.extend_from_bitslice(&acc);
        }
        Ok(out)
    }
}
