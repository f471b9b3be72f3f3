//! Seeded generators for synthetic catalogs, plans and workloads.

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::catalog::{Catalog, ColumnDef, ColumnRef, Ident, TableDef};
use crate::cost_oracle::{SyntheticQuery, SyntheticWorkloadSpec, TableAccess};
use crate::plan::{OpKind, PlanNode, PlanTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanShape {
    pub max_depth: usize,
    pub max_tables: usize,
}

impl Default for PlanShape {
    fn default() -> Self {
        PlanShape {
            max_depth: 8,
            max_tables: 6,
        }
    }
}

pub fn random_catalog(rng: &mut impl Rng, tables: usize) -> Catalog {
    let tables = (0..tables)
        .map(|t| TableDef {
            name: Ident::new(format!("t{t}")),
            row_count: 10u64.pow(rng.gen_range(2..7)) * rng.gen_range(1..10),
            columns: (0..rng.gen_range(3..9))
                .map(|c| ColumnDef {
                    name: Ident::new(format!("c{c}")),
                    data_type: ["int", "bigint", "date", "varchar(32)"][c % 4].to_string(),
                })
                .collect(),
        })
        .collect();
    Catalog::new(tables, Vec::new(), Vec::new()).expect("generated catalog is valid")
}

fn columns_of(catalog: &Catalog, table: &Ident) -> Vec<ColumnRef> {
    catalog
        .table(table.as_str())
        .map(|t| {
            t.columns
                .iter()
                .map(|c| ColumnRef::new(t.name.clone(), c.name.clone()))
                .collect()
        })
        .unwrap_or_default()
}

fn pick_cost(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..10) {
        0 => 0.0,
        1..=3 => rng.gen_range(0.0..1.0),
        _ => (rng.gen_range(0.0..500.0f64) * 1000.0).round() / 1000.0,
    }
}

struct PlanBuilder<'a, R: Rng> {
    rng: &'a mut R,
    catalog: &'a Catalog,
    tables: Vec<Ident>,
    shape: PlanShape,
}

impl<R: Rng> PlanBuilder<'_, R> {
    fn leaf(&mut self) -> (PlanNode, BTreeSet<Ident>) {
        let table = self.tables.choose(self.rng).expect("tables").clone();
        let cols = columns_of(self.catalog, &table);
        let op = if self.rng.gen_bool(0.25) {
            OpKind::IndexSeek
        } else {
            OpKind::Scan
        };
        let mut node = PlanNode::new(0, op, pick_cost(self.rng));
        node.est_rows = self.rng.gen_range(0..100_000) as f64;
        node.table = Some(table.clone());
        let n = self.rng.gen_range(1..=cols.len());
        node.all_ref_cols = cols.choose_multiple(self.rng, n).cloned().collect();
        if op == OpKind::IndexSeek {
            let k = self.rng.gen_range(1..=2.min(cols.len()));
            node.seek_cols = cols.choose_multiple(self.rng, k).cloned().collect();
        } else if self.rng.gen_bool(0.3) {
            node.predicate_cols = cols.choose_multiple(self.rng, 1).cloned().collect();
        }
        node.detail = format!("{op} on {table}");
        (node, BTreeSet::from([table]))
    }

    fn node(&mut self, depth: usize) -> (PlanNode, BTreeSet<Ident>) {
        if depth + 1 >= self.shape.max_depth || self.rng.gen_bool(0.3) {
            return self.leaf();
        }
        let op = [
            OpKind::Filter,
            OpKind::Join,
            OpKind::GroupBy,
            OpKind::OrderBy,
            OpKind::Other,
        ]
        .choose(self.rng)
        .copied()
        .expect("ops");
        let arity = match op {
            OpKind::Join => 2,
            OpKind::Other => self.rng.gen_range(1..=2),
            _ => 1,
        };
        let mut node = PlanNode::new(0, op, pick_cost(self.rng));
        node.est_rows = self.rng.gen_range(0..100_000) as f64;
        let mut seen = BTreeSet::new();
        for _ in 0..arity {
            let (child, tables) = self.node(depth + 1);
            node.children.push(child);
            seen.extend(tables);
        }
        let visible: Vec<ColumnRef> = seen
            .iter()
            .flat_map(|t| columns_of(self.catalog, t))
            .collect();
        let take = |rng: &mut R, max: usize| -> Vec<ColumnRef> {
            let n = rng.gen_range(0..=max.min(visible.len()));
            visible.choose_multiple(rng, n).cloned().collect()
        };
        match op {
            OpKind::Filter => node.predicate_cols = take(self.rng, 3),
            OpKind::Join => node.join_key_cols = take(self.rng, 4),
            OpKind::GroupBy => node.group_by_cols = take(self.rng, 3),
            OpKind::OrderBy => node.order_by_cols = take(self.rng, 3),
            _ => {}
        }
        node.detail = format!("{op} over {} input(s)", arity);
        (node, seen)
    }
}

fn renumber(node: &mut PlanNode, next: &mut i64) {
    node.node_id = *next;
    *next += 1;
    for child in &mut node.children {
        renumber(child, next);
    }
}

/// A random plan over up to `shape.max_tables` tables of `catalog`.
pub fn random_plan(
    rng: &mut impl Rng,
    catalog: &Catalog,
    shape: PlanShape,
    query_id: &str,
) -> PlanTree {
    let mut names: Vec<Ident> = catalog.tables.iter().map(|t| t.name.clone()).collect();
    names.shuffle(rng);
    let count = rng.gen_range(1..=shape.max_tables.min(names.len()).max(1));
    names.truncate(count);
    let mut builder = PlanBuilder {
        rng,
        catalog,
        tables: names,
        shape,
    };
    let (mut root, _) = builder.node(0);
    renumber(&mut root, &mut 1);
    root.recompute_subtree_costs();
    PlanTree {
        query_id: query_id.to_string(),
        root,
    }
}

/// Catalog, plans with SQL text, and a matching synthetic cost spec.
#[derive(Debug, Clone)]
pub struct SyntheticWorkload {
    pub catalog: Catalog,
    pub queries: Vec<(String, PlanTree)>,
    pub spec: SyntheticWorkloadSpec,
}

fn sql_for(plan: &PlanTree) -> String {
    let nodes = plan.root.preorder();
    let tables: BTreeSet<&Ident> = nodes.iter().filter_map(|(_, n)| n.table.as_ref()).collect();
    let refs: BTreeSet<String> = nodes
        .iter()
        .flat_map(|(_, n)| n.all_ref_cols.iter().map(ToString::to_string))
        .collect();
    let preds: BTreeSet<String> = nodes
        .iter()
        .flat_map(|(_, n)| n.seek_cols.iter().chain(&n.predicate_cols))
        .map(|c| format!("{c} = @p"))
        .collect();
    let mut sql = format!(
        "SELECT {}\nFROM {}",
        refs.into_iter().collect::<Vec<_>>().join(", "),
        tables
            .into_iter()
            .map(Ident::as_str)
            .collect::<Vec<_>>()
            .join(", ")
    );
    if !preds.is_empty() {
        sql.push_str("\nWHERE ");
        sql.push_str(&preds.into_iter().collect::<Vec<_>>().join("\n  AND "));
    }
    sql
}

/// Derives one access per Scan/IndexSeek node; the seek column is the first
/// selective column the plan applies to that table.
fn accesses_for(rng: &mut impl Rng, catalog: &Catalog, plan: &PlanTree) -> Vec<TableAccess> {
    let nodes = plan.root.preorder();
    nodes
        .iter()
        .filter(|(_, n)| n.op_kind.is_table_access())
        .map(|(_, n)| {
            let table = n.table.clone().expect("access node has a table");
            let seek = nodes
                .iter()
                .flat_map(|(_, m)| m.role_columns())
                .find(|c| c.table == table)
                .map(|c| c.column.clone());
            TableAccess {
                rows: catalog.table(table.as_str()).map_or(0, |t| t.row_count),
                selectivity: [0.0001, 0.001, 0.01, 0.1, 0.5][rng.gen_range(0..5)],
                needed: n.all_ref_cols.iter().map(|c| c.column.clone()).collect(),
                seek_col: seek,
                eps: [0.2, 0.5, 1.0, 1.0, 1.0, 2.0, 4.0][rng.gen_range(0..7)],
                table,
            }
        })
        .collect()
}

pub fn random_workload(seed: u64, tables: usize, queries: usize, shape: PlanShape) -> SyntheticWorkload {
    let mut rng = StdRng::seed_from_u64(seed);
    let catalog = random_catalog(&mut rng, tables);
    let mut plans = Vec::new();
    let mut spec_queries = Vec::new();
    for q in 0..queries {
        let id = format!("q{:02}", q + 1);
        let plan = random_plan(&mut rng, &catalog, shape, &id);
        spec_queries.push(SyntheticQuery {
            id: id.clone(),
            accesses: accesses_for(&mut rng, &catalog, &plan),
        });
        plans.push((sql_for(&plan), plan));
    }
    let spec = SyntheticWorkloadSpec::new(0.001, spec_queries).expect("generated spec is valid");
    SyntheticWorkload {
        catalog,
        queries: plans,
        spec,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{parse_plan, render_json};

    #[test]
    fn generated_plans_parse_back() {
        let mut rng = StdRng::seed_from_u64(7);
        let catalog = random_catalog(&mut rng, 6);
        for i in 0..50 {
            let plan = random_plan(&mut rng, &catalog, PlanShape::default(), &format!("p{i}"));
            let depth = plan.root.preorder().iter().map(|(d, _)| *d).max().unwrap();
            assert!(depth < 8);
            let back = parse_plan(&render_json(&plan), &catalog).unwrap();
            assert_eq!(back, plan);
        }
    }

    #[test]
    fn workload_is_seed_deterministic() {
        let a = random_workload(3, 5, 4, PlanShape::default());
        let b = random_workload(3, 5, 4, PlanShape::default());
        assert_eq!(a.spec, b.spec);
        assert_eq!(a.queries, b.queries);
        assert_eq!(a.catalog, b.catalog);
    }
}
