//! What-if cost estimation.
//!
//! [`WhatIfOracle`] is the contract the enumerator searches against: cost a
//! query under a hypothetical index set without building anything.
//! [`SyntheticWorkloadSpec`] is a deterministic desk-scale stand-in with two
//! channels. The estimated channel multiplies each access by its error factor
//! `eps`; the true channel ignores `eps` and is scaled to milliseconds.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{Ident, IndexDefinition};
use crate::error::{Error, Result};

/// Multiplier on `selectivity * rows` when a seek must look up base rows.
pub const LOOKUP_PENALTY: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub query_id: String,
    pub config_digest: String,
    pub estimated_cost: f64,
}

/// Order-independent digest of an index set (16 hex digits).
pub fn config_digest(config: &[IndexDefinition]) -> String {
    let mut keys: Vec<_> = config.iter().map(IndexDefinition::structural_key).collect();
    keys.sort();
    keys.dedup();
    let mut hasher = Sha256::new();
    for key in keys {
        hasher.update(key.table.as_bytes());
        hasher.update(b"(");
        hasher.update(key.keys.join(",").as_bytes());
        hasher.update(b"|");
        hasher.update(key.includes.join(",").as_bytes());
        hasher.update(b")");
    }
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hypothetical-configuration cost estimation. Implementations must be pure:
/// equal arguments give equal estimates.
pub trait WhatIfOracle: Send + Sync {
    fn estimate_query(&self, config: &[IndexDefinition], query: &str) -> Result<CostEstimate>;

    /// Queries this oracle can cost, in a stable order.
    fn query_ids(&self) -> Vec<String>;
}

/// Sum of per-query estimates; an empty workload costs 0.
pub fn estimate_workload<O: WhatIfOracle + ?Sized>(
    oracle: &O,
    config: &[IndexDefinition],
    workload: &[String],
) -> Result<f64> {
    workload.iter().try_fold(0.0, |sum, q| {
        Ok(sum + oracle.estimate_query(config, q)?.estimated_cost)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableAccess {
    pub table: Ident,
    pub rows: u64,
    pub selectivity: f64,
    #[serde(default)]
    pub needed: Vec<Ident>,
    #[serde(default)]
    pub seek_col: Option<Ident>,
    #[serde(default = "unit")]
    pub eps: f64,
}

fn unit() -> f64 {
    1.0
}

impl TableAccess {
    /// Cost units of the cheapest access path `config` offers: a covering
    /// seek, a seek with base-row lookups, or a full scan.
    pub fn base_cost(&self, config: &[IndexDefinition]) -> f64 {
        let rows = self.rows as f64;
        let mut best = rows;
        let Some(seek) = &self.seek_col else {
            return best;
        };
        for index in config.iter().filter(|ix| ix.table == self.table) {
            if index.key_columns.first() != Some(seek) {
                continue;
            }
            let covering = self
                .needed
                .iter()
                .all(|c| index.key_columns.contains(c) || index.included_columns.contains(c));
            let fetch = if covering { 1.0 } else { LOOKUP_PENALTY };
            best = best.min((rows + 1.0).log2() + self.selectivity * rows * fetch);
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticQuery {
    pub id: String,
    pub accesses: Vec<TableAccess>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticWorkloadSpec {
    pub time_per_unit_ms: f64,
    pub queries: Vec<SyntheticQuery>,
    #[serde(skip)]
    lookup: HashMap<String, usize>,
}

impl PartialEq for SyntheticWorkloadSpec {
    fn eq(&self, other: &Self) -> bool {
        self.time_per_unit_ms == other.time_per_unit_ms && self.queries == other.queries
    }
}

impl SyntheticWorkloadSpec {
    pub fn new(time_per_unit_ms: f64, queries: Vec<SyntheticQuery>) -> Result<Self> {
        if !time_per_unit_ms.is_finite() || time_per_unit_ms < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "time_per_unit_ms must be non-negative, got {time_per_unit_ms}"
            )));
        }
        let mut lookup = HashMap::new();
        for (pos, q) in queries.iter().enumerate() {
            if lookup.insert(q.id.clone(), pos).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate query id `{}`", q.id)));
            }
            for a in &q.accesses {
                if !(0.0..=1.0).contains(&a.selectivity) {
                    return Err(Error::InvalidParameter(format!(
                        "query `{}`: selectivity {} on `{}` is outside [0, 1]",
                        q.id, a.selectivity, a.table
                    )));
                }
                if !(a.eps.is_finite() && a.eps > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "query `{}`: eps {} on `{}` must be positive",
                        q.id, a.eps, a.table
                    )));
                }
            }
        }
        Ok(SyntheticWorkloadSpec {
            time_per_unit_ms,
            queries,
            lookup,
        })
    }

    pub fn from_json(document: &str) -> Result<Self> {
        let raw: SyntheticWorkloadSpec =
            serde_json::from_str(document).map_err(|e| Error::parse("synthetic workload", e))?;
        SyntheticWorkloadSpec::new(raw.time_per_unit_ms, raw.queries)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn query(&self, id: &str) -> Result<&SyntheticQuery> {
        self.lookup
            .get(id)
            .map(|&pos| &self.queries[pos])
            .ok_or_else(|| Error::UnknownQuery(id.to_string()))
    }

    /// Estimated channel: each access cost scaled by its `eps`.
    pub fn estimated_cost(&self, config: &[IndexDefinition], query: &str) -> Result<f64> {
        Ok(self
            .query(query)?
            .accesses
            .iter()
            .map(|a| a.eps * a.base_cost(config))
            .sum())
    }

    /// True channel in cost units (error factors ignored).
    pub fn true_cost(&self, config: &[IndexDefinition], query: &str) -> Result<f64> {
        Ok(self
            .query(query)?
            .accesses
            .iter()
            .map(|a| a.base_cost(config))
            .sum())
    }

    /// Simulated execution time in milliseconds.
    pub fn true_time(&self, config: &[IndexDefinition], query: &str) -> Result<f64> {
        Ok(self.true_cost(config, query)? * self.time_per_unit_ms)
    }

    /// Largest row count recorded for `table`, if any access reads it.
    pub fn table_rows(&self, table: &Ident) -> Option<u64> {
        self.queries
            .iter()
            .flat_map(|q| &q.accesses)
            .filter(|a| &a.table == table)
            .map(|a| a.rows)
            .max()
    }
}

impl WhatIfOracle for SyntheticWorkloadSpec {
    fn estimate_query(&self, config: &[IndexDefinition], query: &str) -> Result<CostEstimate> {
        Ok(CostEstimate {
            query_id: query.to_string(),
            config_digest: config_digest(config),
            estimated_cost: self.estimated_cost(config, query)?,
        })
    }

    fn query_ids(&self) -> Vec<String> {
        self.queries.iter().map(|q| q.id.clone()).collect()
    }
}
