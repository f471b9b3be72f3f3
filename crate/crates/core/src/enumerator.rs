//! Workload-level configuration search under a maximum index count.
//!
//! Candidates from any number of sources are merged into one pool. Phase one
//! picks the best few indexes for each query on its own. Phase two greedily
//! assembles a workload configuration from the phase-one winners.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, IndexDefinition, IndexKey};
use crate::cost_oracle::{estimate_workload, WhatIfOracle};
use crate::error::{Error, Result};

/// A step must lower the estimate by more than this fraction of the current cost.
pub const MIN_RELATIVE_IMPROVEMENT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: IndexDefinition,
    pub sources: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidatePool {
    pub candidates: Vec<Candidate>,
}

impl CandidatePool {
    /// A pool whose candidates all come from `source`; structural duplicates collapse.
    pub fn from_source(source: &str, indexes: impl IntoIterator<Item = IndexDefinition>) -> Self {
        let mut pool = CandidatePool::default();
        for index in indexes {
            pool.insert(index, std::iter::once(source.to_string()));
        }
        pool
    }

    fn insert(&mut self, index: IndexDefinition, sources: impl IntoIterator<Item = String>) {
        let key = index.structural_key();
        match self
            .candidates
            .iter_mut()
            .find(|c| c.index.structural_key() == key)
        {
            Some(existing) => existing.sources.extend(sources),
            None => self.candidates.push(Candidate {
                index,
                sources: sources.into_iter().collect(),
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn indexes(&self) -> impl Iterator<Item = &IndexDefinition> {
        self.candidates.iter().map(|c| &c.index)
    }

    pub fn sources_of(&self, index: &IndexDefinition) -> Option<&BTreeSet<String>> {
        let key = index.structural_key();
        self.candidates
            .iter()
            .find(|c| c.index.structural_key() == key)
            .map(|c| &c.sources)
    }

    pub fn contains(&self, index: &IndexDefinition) -> bool {
        self.sources_of(index).is_some()
    }
}

/// Union of pools with structural dedup, ordered by table name then digest.
/// The first name seen for an index is kept; sources are unioned.
pub fn merge_pools(pools: &[CandidatePool]) -> CandidatePool {
    let mut merged = CandidatePool::default();
    for pool in pools {
        for c in &pool.candidates {
            merged.insert(c.index.clone(), c.sources.iter().cloned());
        }
    }
    merged.candidates.sort_by_cached_key(|c| {
        (
            c.index.table.folded().to_string(),
            c.index.digest(),
            c.index.structural_key(),
        )
    });
    merged
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    #[serde(rename = "k")]
    pub constraint_k: usize,
    pub indexes: Vec<IndexDefinition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_workload_cost: Option<f64>,
}

impl Configuration {
    pub fn new(constraint_k: usize, indexes: Vec<IndexDefinition>) -> Result<Self> {
        let config = Configuration {
            constraint_k,
            indexes,
            estimated_workload_cost: None,
        };
        config.check_size()?;
        Ok(config)
    }

    fn check_size(&self) -> Result<()> {
        if self.constraint_k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.indexes.len() > self.constraint_k {
            return Err(Error::ConfigurationTooLarge {
                count: self.indexes.len(),
                k: self.constraint_k,
            });
        }
        Ok(())
    }

    /// Size constraint plus catalog validity of every index.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        self.check_size()?;
        for index in &self.indexes {
            if let Some(v) = catalog.validate_index(index).into_iter().next() {
                return Err(Error::Catalog(format!("index `{}`: {v}", index.name)));
            }
        }
        Ok(())
    }

    pub fn from_json(document: &str) -> Result<Self> {
        let mut config: Configuration =
            serde_json::from_str(document).map_err(|e| Error::parse("configuration", e))?;
        config.indexes = config
            .indexes
            .into_iter()
            .map(IndexDefinition::with_default_name)
            .collect();
        config.check_size()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GreedyOptions {
    /// Run phase two over the whole pool instead of the phase-one winners.
    pub full_pool_phase2: bool,
}

fn improves(current: f64, candidate: f64) -> bool {
    current - candidate > MIN_RELATIVE_IMPROVEMENT * current.abs()
}

/// Forward greedy selection over `candidates` until no strict improvement or
/// `cap` picks. Ties go to the lower estimate, then the earlier candidate.
fn greedy<F>(candidates: &[&IndexDefinition], cap: usize, cost: F) -> Result<Vec<IndexDefinition>>
where
    F: Fn(&[IndexDefinition]) -> Result<f64> + Sync,
{
    let mut chosen: Vec<IndexDefinition> = Vec::new();
    let mut taken = vec![false; candidates.len()];
    let mut current = cost(&chosen)?;
    while chosen.len() < cap {
        let trials: Vec<(usize, f64)> = candidates
            .par_iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .map(|(i, cand)| {
                let mut trial = chosen.clone();
                trial.push((*cand).clone());
                cost(&trial).map(|c| (i, c))
            })
            .collect::<Result<_>>()?;
        // trials keep candidate order, so strict `<` keeps the earliest on ties
        let best = trials.into_iter().fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
            Some((_, b)) if c >= b => best,
            _ => Some((i, c)),
        });
        match best {
            Some((i, c)) if improves(current, c) => {
                taken[i] = true;
                chosen.push(candidates[i].clone());
                current = c;
            }
            _ => break,
        }
    }
    Ok(chosen)
}

/// Best indexes for a single query, at most `per_query_cap` of them.
pub fn query_level_best<O: WhatIfOracle + ?Sized>(
    pool: &CandidatePool,
    query: &str,
    oracle: &O,
    per_query_cap: usize,
) -> Result<Vec<IndexDefinition>> {
    if per_query_cap == 0 {
        return Err(Error::InvalidParameter("per-query cap must be at least 1".into()));
    }
    let candidates: Vec<&IndexDefinition> = pool.indexes().collect();
    greedy(&candidates, per_query_cap, |config| {
        Ok(oracle.estimate_query(config, query)?.estimated_cost)
    })
}

/// Two-phase greedy selection of at most `k` indexes for `workload`.
pub fn greedy_select<O: WhatIfOracle + ?Sized>(
    pool: &CandidatePool,
    workload: &[String],
    k: usize,
    oracle: &O,
    options: GreedyOptions,
) -> Result<Configuration> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }

    let seed: Vec<&IndexDefinition> = if options.full_pool_phase2 {
        pool.indexes().collect()
    } else {
        let mut winners: BTreeSet<IndexKey> = BTreeSet::new();
        for query in workload {
            for index in query_level_best(pool, query, oracle, k)? {
                winners.insert(index.structural_key());
            }
        }
        // keep pool order
        pool.indexes()
            .filter(|ix| winners.contains(&ix.structural_key()))
            .collect()
    };

    let chosen = greedy(&seed, k, |config| estimate_workload(oracle, config, workload))?;
    let cost = estimate_workload(oracle, &chosen, workload)?;
    let mut config = Configuration::new(k, chosen)?;
    config.estimated_workload_cost = Some(cost);
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_oracle::{SyntheticQuery, SyntheticWorkloadSpec, TableAccess};

    fn access(table: &str, rows: u64, seek: &str) -> TableAccess {
        TableAccess {
            table: table.into(),
            rows,
            selectivity: 0.0,
            needed: vec![seek.into()],
            seek_col: Some(seek.into()),
            eps: 1.0,
        }
    }

    #[test]
    fn merge_dedups_and_unions_sources() {
        let a = IndexDefinition::new("T", ["a"], ["b"]);
        let mut a2 = IndexDefinition::new("t", ["A"], ["B"]);
        a2.name = "from_llm".into();
        let merged = merge_pools(&[
            CandidatePool::from_source("rule_tuner", [a.clone()]),
            CandidatePool::from_source("llm", [a2]),
        ]);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.candidates[0].index.name, a.name);
        assert_eq!(
            merged.sources_of(&a).unwrap().iter().cloned().collect::<Vec<_>>(),
            vec!["llm".to_string(), "rule_tuner".to_string()]
        );
        assert!(merge_pools(&[CandidatePool::default(), CandidatePool::default()]).is_empty());
    }

    #[test]
    fn picks_the_larger_benefit_at_k1() {
        // scans of 31 and 51 rows; a seek costs log2(rows + 1) = 5 and 5.7
        let spec = SyntheticWorkloadSpec::new(
            1.0,
            vec![SyntheticQuery {
                id: "q".into(),
                accesses: vec![access("T", 31, "a"), access("U", 63, "x")],
            }],
        )
        .unwrap();
        let small = IndexDefinition::new("T", ["a"], Vec::<&str>::new());
        let large = IndexDefinition::new("U", ["x"], Vec::<&str>::new());
        let pool = CandidatePool::from_source("t", [small, large.clone()]);
        let config =
            greedy_select(&pool, &["q".into()], 1, &spec, GreedyOptions::default()).unwrap();
        assert_eq!(config.indexes, vec![large]);
        assert_eq!(config.estimated_workload_cost, Some(31.0 + 6.0));
    }

    #[test]
    fn useless_pool_gives_empty_configuration() {
        let spec = SyntheticWorkloadSpec::new(
            1.0,
            vec![SyntheticQuery {
                id: "q".into(),
                accesses: vec![access("T", 100, "a")],
            }],
        )
        .unwrap();
        let pool = CandidatePool::from_source("t", [IndexDefinition::new("T", ["b"], ["a"])]);
        let config =
            greedy_select(&pool, &["q".into()], 5, &spec, GreedyOptions::default()).unwrap();
        assert!(config.indexes.is_empty());
        assert!(query_level_best(&CandidatePool::default(), "q", &spec, 3)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn configuration_size_is_enforced() {
        let ix = IndexDefinition::new("T", ["a"], Vec::<&str>::new());
        assert!(Configuration::new(1, vec![ix.clone()]).is_ok());
        assert!(matches!(
            Configuration::new(1, vec![ix.clone(), ix.clone()]),
            Err(Error::ConfigurationTooLarge { count: 2, k: 1 })
        ));
        assert!(Configuration::new(0, vec![]).is_err());
        let doc = r#"{"k":2,"indexes":[{"table":"T","key_columns":["a"]}]}"#;
        let parsed = Configuration::from_json(doc).unwrap();
        assert!(parsed.indexes[0].name.starts_with("ix_T_"));
    }
}
