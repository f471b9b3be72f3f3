#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use idxtune::catalog::{load_catalog, Catalog, IndexDefinition};
use idxtune::cost_oracle::{SyntheticQuery, SyntheticWorkloadSpec, TableAccess};
use idxtune::enumerator::CandidatePool;
use idxtune::plan::{parse_plan, OpKind, PlanNode, PlanTree};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn tpch_catalog() -> Catalog {
    load_catalog(&read("tpch/catalog.json")).unwrap()
}

pub const TPCH_QUERIES: [&str; 5] = ["q03", "q04", "q06", "q12", "q15"];

/// (sql, plan) for each TPC-H fixture query, in `TPCH_QUERIES` order.
pub fn tpch_queries(catalog: &Catalog) -> Vec<(String, PlanTree)> {
    TPCH_QUERIES
        .iter()
        .map(|q| {
            let plan = parse_plan(&read(&format!("tpch/plans/{q}.json")), catalog).unwrap();
            (read(&format!("tpch/plans/{q}.sql")), plan)
        })
        .collect()
}

pub fn tpch_sim() -> SyntheticWorkloadSpec {
    SyntheticWorkloadSpec::from_json(&read("tpch/sim.json")).unwrap()
}

/// Structural triple used to compare recommendations without names.
pub type Rec = (String, Vec<String>, BTreeSet<String>);

pub fn as_rec(ix: &IndexDefinition) -> Rec {
    (
        ix.table.folded().to_string(),
        ix.key_columns.iter().map(|c| c.folded().to_string()).collect(),
        ix.included_columns
            .iter()
            .map(|c| c.folded().to_string())
            .collect(),
    )
}

/// Post-order node list built with an explicit two-stack walk.
fn post_order(root: &PlanNode) -> Vec<&PlanNode> {
    let mut stack = vec![root];
    let mut out = Vec::new();
    while let Some(n) = stack.pop() {
        out.push(n);
        stack.extend(n.children.iter());
    }
    // reversed (root, right..left) order is post-order with children left to right
    out.reverse();
    out
}

fn key(table: &str, column: &str) -> (String, String) {
    (table.trim().to_lowercase(), column.trim().to_lowercase())
}

/// Naive per-table restatement of the recommender: for every table, scan the
/// post-order node list once for cost/columns and once for key columns.
pub fn reference_recommend(plan: &PlanTree, alpha: f64) -> Vec<Rec> {
    let nodes = post_order(&plan.root);
    let is_access = |n: &PlanNode| matches!(n.op_kind, OpKind::Scan | OpKind::IndexSeek);
    let tables: BTreeSet<String> = nodes
        .iter()
        .filter(|n| is_access(n))
        .map(|n| n.table.as_ref().unwrap().as_str().trim().to_lowercase())
        .collect();
    let mut out = Vec::new();
    for t in tables {
        let mut cost = 0.0;
        let mut refs: BTreeSet<String> = BTreeSet::new();
        let mut keys: Vec<String> = Vec::new();
        for n in &nodes {
            let same = n
                .table
                .as_ref()
                .map(|x| x.as_str().trim().to_lowercase() == t)
                .unwrap_or(false);
            if is_access(n) && same {
                cost += n.self_cost;
                for c in &n.all_ref_cols {
                    refs.insert(key(c.table.as_str(), c.column.as_str()).1);
                }
            }
            let lists = [
                &n.seek_cols,
                &n.predicate_cols,
                &n.group_by_cols,
                &n.order_by_cols,
                &n.join_key_cols,
            ];
            for list in lists {
                for c in list {
                    let (ct, cc) = key(c.table.as_str(), c.column.as_str());
                    if ct == t && !keys.contains(&cc) {
                        keys.push(cc);
                    }
                }
            }
        }
        if cost > alpha * plan.root.subtree_cost && !keys.is_empty() {
            let includes = refs.into_iter().filter(|c| !keys.contains(c)).collect();
            out.push((t, keys, includes));
        }
    }
    out
}

/// Brute-force: the sum of every node's self cost.
pub fn brute_total_cost(plan: &PlanTree) -> f64 {
    post_order(&plan.root).iter().map(|n| n.self_cost).sum()
}

/// Random synthetic workload plus candidate pool for enumerator trials.
pub struct EnumTrial {
    pub spec: SyntheticWorkloadSpec,
    pub workload: Vec<String>,
    pub pool: CandidatePool,
}

pub fn random_enum_trial(rng: &mut impl Rng, max_pool: usize) -> EnumTrial {
    let tables = rng.gen_range(1..=4);
    let columns = ["a", "b", "c", "d", "e"];
    let mut queries = Vec::new();
    for q in 0..rng.gen_range(1..=6) {
        let accesses = (0..rng.gen_range(1..=3))
            .map(|_| {
                let t = rng.gen_range(0..tables);
                let n = rng.gen_range(1..=3);
                let needed: Vec<&str> = columns
                    .choose_multiple(rng, n)
                    .copied()
                    .collect();
                TableAccess {
                    table: format!("t{t}").into(),
                    rows: [100u64, 1_000, 10_000, 100_000][t % 4] * rng.gen_range(1..5),
                    selectivity: [0.001, 0.01, 0.05, 0.2, 0.5][rng.gen_range(0..5)],
                    seek_col: rng.gen_bool(0.85).then(|| needed[0].into()),
                    needed: needed.iter().map(|c| (*c).into()).collect(),
                    eps: [0.5, 1.0, 1.0, 2.0][rng.gen_range(0..4)],
                }
            })
            .collect();
        queries.push(SyntheticQuery {
            id: format!("q{q}"),
            accesses,
        });
    }
    let spec = SyntheticWorkloadSpec::new(0.01, queries).unwrap();
    let workload = spec.queries.iter().map(|q| q.id.clone()).collect();
    let candidates: Vec<IndexDefinition> = (0..rng.gen_range(0..=max_pool))
        .map(|_| {
            let t = rng.gen_range(0..tables);
            let mut cols = columns.to_vec();
            cols.shuffle(rng);
            let nk = rng.gen_range(1..=2);
            let ni = rng.gen_range(0..=3);
            IndexDefinition::new(
                format!("t{t}"),
                cols[..nk].iter().copied(),
                cols[nk..nk + ni].iter().copied(),
            )
        })
        .collect();
    EnumTrial {
        spec,
        workload,
        pool: CandidatePool::from_source("random", candidates),
    }
}

/// All subsets of `items` with at most `max` elements (including the empty set).
pub fn subsets_up_to<T: Clone>(items: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for mask in 1u32..(1 << items.len()) {
        if mask.count_ones() as usize <= max {
            out.push(
                (0..items.len())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| items[i].clone())
                    .collect(),
            );
        }
    }
    out
}

/// Order statistic oracle for one run vector under a cap, in nanoseconds.
pub fn median_oracle(runs_ns: &[u64], cap_ns: u64) -> (u64, bool) {
    let mut clamped: Vec<u64> = runs_ns.iter().map(|r| (*r).min(cap_ns)).collect();
    clamped.sort_unstable();
    (clamped[2], runs_ns.iter().any(|r| *r >= cap_ns))
}
