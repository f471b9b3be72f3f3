//! Plan-driven covering-index recommender.
//!
//! One post-order walk of the original plan collects, per base table, the
//! key columns in order of first use by a selective or ordering operator,
//! every column the table's accesses reference, and the accumulated access
//! cost. Tables whose access cost clears `alpha * total_cost` get one
//! covering index: those keys, with the remaining referenced columns included.

use std::collections::{BTreeMap, BTreeSet};

use crate::catalog::{ColumnRef, Ident, IndexDefinition};
use crate::error::{Error, Result};
use crate::plan::{referenced_tables, total_cost, PlanNode, PlanTree};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TableAccumulator {
    /// Ordered, duplicate-free.
    pub key_columns: Vec<ColumnRef>,
    pub referenced_columns: BTreeSet<ColumnRef>,
    pub access_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerParams {
    alpha: f64,
}

impl TunerParams {
    /// `alpha` is the fraction of total plan cost a table must exceed; `0 <= alpha < 1`.
    pub fn new(alpha: f64) -> Result<Self> {
        if (0.0..1.0).contains(&alpha) {
            Ok(TunerParams { alpha })
        } else {
            Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1), got {alpha}"
            )))
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for TunerParams {
    fn default() -> Self {
        TunerParams { alpha: 0.0 }
    }
}

pub type Accumulators = BTreeMap<Ident, TableAccumulator>;

/// Empty accumulators for every table the plan accesses.
pub fn init_accumulators(plan: &PlanTree) -> Accumulators {
    referenced_tables(plan)
        .into_iter()
        .map(|t| (t, TableAccumulator::default()))
        .collect()
}

/// Post-order walk updating `acc`; children are visited left to right.
pub fn traverse(node: &PlanNode, acc: &mut Accumulators) -> Result<()> {
    for child in &node.children {
        traverse(child, acc)?;
    }
    if node.op_kind.is_table_access() {
        if let Some(table) = &node.table {
            let entry = acc.get_mut(table).ok_or_else(|| Error::UnscannedTable {
                table: table.to_string(),
                column: String::from("*"),
            })?;
            entry.access_cost += node.self_cost;
            entry.referenced_columns.extend(node.all_ref_cols.iter().cloned());
        }
    }
    for col in node.role_columns() {
        let entry = acc.get_mut(&col.table).ok_or_else(|| Error::UnscannedTable {
            table: col.table.to_string(),
            column: col.to_string(),
        })?;
        if !entry.key_columns.contains(col) {
            entry.key_columns.push(col.clone());
        }
    }
    Ok(())
}

/// Runs the walk and returns the per-table accumulators.
pub fn accumulate(plan: &PlanTree) -> Result<Accumulators> {
    let mut acc = init_accumulators(plan);
    traverse(&plan.root, &mut acc)?;
    Ok(acc)
}

/// At most one covering index per table, ordered by table name.
///
/// Tables with no selective or ordering column are skipped even when costly,
/// since an index needs at least one key column.
pub fn simple_index_recommendation(
    plan: &PlanTree,
    params: TunerParams,
) -> Result<Vec<IndexDefinition>> {
    let threshold = params.alpha * total_cost(plan);
    let acc = accumulate(plan)?;
    Ok(acc
        .into_iter()
        .filter(|(_, a)| a.access_cost > threshold && !a.key_columns.is_empty())
        .map(|(table, a)| build_index(table, &a))
        .collect())
}

fn build_index(table: Ident, acc: &TableAccumulator) -> IndexDefinition {
    let keys: Vec<Ident> = acc.key_columns.iter().map(|c| c.column.clone()).collect();
    let included: BTreeSet<Ident> = acc
        .referenced_columns
        .iter()
        .filter(|c| !acc.key_columns.contains(c))
        .map(|c| c.column.clone())
        .collect();
    let mut index = IndexDefinition {
        table,
        name: String::new(),
        key_columns: keys,
        included_columns: included,
        clustered: false,
    };
    index.name = index.generated_name("rt");
    index
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::OpKind;

    fn col(t: &str, c: &str) -> ColumnRef {
        ColumnRef::new(t, c)
    }

    fn scan(id: i64, table: &str, cost: f64, refs: &[&str]) -> PlanNode {
        let mut n = PlanNode::new(id, OpKind::Scan, cost);
        n.table = Some(table.into());
        n.all_ref_cols = refs.iter().map(|c| col(table, c)).collect();
        n
    }

    fn filter_over_scan() -> PlanTree {
        let mut filter = PlanNode::new(1, OpKind::Filter, 2.0);
        filter.predicate_cols = vec![col("T", "a")];
        filter.children.push(scan(2, "T", 10.0, &["a", "b"]));
        filter.recompute_subtree_costs();
        PlanTree {
            query_id: "q".into(),
            root: filter,
        }
    }

    #[test]
    fn filter_over_scan_accumulates() {
        let acc = accumulate(&filter_over_scan()).unwrap();
        let t = &acc[&Ident::new("T")];
        assert_eq!(t.key_columns, vec![col("T", "a")]);
        assert_eq!(t.referenced_columns.len(), 2);
        assert_eq!(t.access_cost, 10.0);
    }

    #[test]
    fn alpha_zero_and_threshold() {
        let plan = filter_over_scan();
        let out = simple_index_recommendation(&plan, TunerParams::new(0.0).unwrap()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].key_columns, vec![Ident::new("a")]);
        assert_eq!(
            out[0].included_columns.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
            vec!["b"]
        );
        assert!(out[0].name.starts_with("rt_T_"));
        // 10 <= 0.9 * 12
        let none = simple_index_recommendation(&plan, TunerParams::new(0.9).unwrap()).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn bare_scan_yields_nothing() {
        let plan = PlanTree {
            query_id: "q".into(),
            root: scan(1, "T", 50.0, &["a"]),
        };
        assert!(simple_index_recommendation(&plan, TunerParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn alpha_out_of_range() {
        assert!(TunerParams::new(1.0).is_err());
        assert!(TunerParams::new(-0.01).is_err());
        assert!(TunerParams::new(f64::NAN).is_err());
        assert!(TunerParams::new(0.99).is_ok());
    }

    #[test]
    fn join_keys_route_to_their_own_tables() {
        let mut join = PlanNode::new(1, OpKind::Join, 1.0);
        join.join_key_cols = vec![col("T", "a"), col("U", "x")];
        join.children = vec![scan(2, "T", 5.0, &["a"]), scan(3, "U", 5.0, &["x", "y"])];
        join.recompute_subtree_costs();
        let plan = PlanTree {
            query_id: "q".into(),
            root: join,
        };
        let out = simple_index_recommendation(&plan, TunerParams::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].table.as_str(), "T");
        assert_eq!(out[1].key_columns, vec![Ident::new("x")]);
        assert!(out[1].included_columns.contains(&Ident::new("y")));
    }

    #[test]
    fn column_of_unscanned_table_is_an_error() {
        let mut filter = PlanNode::new(1, OpKind::Filter, 1.0);
        filter.predicate_cols = vec![col("Z", "q")];
        filter.children.push(scan(2, "T", 1.0, &["a"]));
        filter.recompute_subtree_costs();
        let plan = PlanTree {
            query_id: "q".into(),
            root: filter,
        };
        assert!(matches!(
            simple_index_recommendation(&plan, TunerParams::default()),
            Err(Error::UnscannedTable { .. })
        ));
    }
}
