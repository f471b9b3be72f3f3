//! Physical query plans: JSON ingestion, cost/structure checks, and the
//! tabular rendering fed to advisors.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ColumnRef, Ident};
use crate::error::{Error, Result};

/// Relative tolerance on `subtree_cost = self_cost + Σ children.subtree_cost`.
pub const COST_IDENTITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Scan,
    IndexSeek,
    Filter,
    Join,
    GroupBy,
    OrderBy,
    Other,
}

impl OpKind {
    pub const ALL: [OpKind; 7] = [
        OpKind::Scan,
        OpKind::IndexSeek,
        OpKind::Filter,
        OpKind::Join,
        OpKind::GroupBy,
        OpKind::OrderBy,
        OpKind::Other,
    ];

    /// Base-table access operators; these must name a table.
    pub fn is_table_access(self) -> bool {
        matches!(self, OpKind::Scan | OpKind::IndexSeek)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Scan => "Scan",
            OpKind::IndexSeek => "IndexSeek",
            OpKind::Filter => "Filter",
            OpKind::Join => "Join",
            OpKind::GroupBy => "GroupBy",
            OpKind::OrderBy => "OrderBy",
            OpKind::Other => "Other",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let folded: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .collect::<String>()
            .to_lowercase();
        OpKind::ALL
            .into_iter()
            .find(|k| k.as_str().to_lowercase() == folded)
            .ok_or_else(|| Error::parse("operator kind", format!("unknown operator `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanNode {
    pub node_id: i64,
    pub op_kind: OpKind,
    pub detail: String,
    /// Operator cost excluding children.
    pub self_cost: f64,
    /// Operator cost including the whole subtree.
    pub subtree_cost: f64,
    pub est_rows: f64,
    pub table: Option<Ident>,
    pub all_ref_cols: BTreeSet<ColumnRef>,
    pub seek_cols: Vec<ColumnRef>,
    pub predicate_cols: Vec<ColumnRef>,
    pub group_by_cols: Vec<ColumnRef>,
    pub order_by_cols: Vec<ColumnRef>,
    pub join_key_cols: Vec<ColumnRef>,
    pub children: Vec<PlanNode>,
}

impl PlanNode {
    /// A node with no columns and no children.
    pub fn new(node_id: i64, op_kind: OpKind, self_cost: f64) -> Self {
        PlanNode {
            node_id,
            op_kind,
            detail: String::new(),
            self_cost,
            subtree_cost: self_cost,
            est_rows: 0.0,
            table: None,
            all_ref_cols: BTreeSet::new(),
            seek_cols: Vec::new(),
            predicate_cols: Vec::new(),
            group_by_cols: Vec::new(),
            order_by_cols: Vec::new(),
            join_key_cols: Vec::new(),
            children: Vec::new(),
        }
    }

    /// Role columns in the order the tuner consumes them:
    /// seek, predicate, group-by, order-by, join-key.
    pub fn role_columns(&self) -> impl Iterator<Item = &ColumnRef> {
        self.seek_cols
            .iter()
            .chain(&self.predicate_cols)
            .chain(&self.group_by_cols)
            .chain(&self.order_by_cols)
            .chain(&self.join_key_cols)
    }

    fn role_lists(&self) -> [(&'static str, &Vec<ColumnRef>); 5] {
        [
            ("seek", &self.seek_cols),
            ("predicate", &self.predicate_cols),
            ("group_by", &self.group_by_cols),
            ("order_by", &self.order_by_cols),
            ("join_key", &self.join_key_cols),
        ]
    }

    /// Sets every subtree cost in this subtree from self costs.
    pub fn recompute_subtree_costs(&mut self) -> f64 {
        let children: f64 = self
            .children
            .iter_mut()
            .map(PlanNode::recompute_subtree_costs)
            .sum();
        self.subtree_cost = self.self_cost + children;
        self.subtree_cost
    }

    pub fn preorder(&self) -> Vec<(usize, &PlanNode)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, self)];
        while let Some((depth, node)) = stack.pop() {
            out.push((depth, node));
            for child in node.children.iter().rev() {
                stack.push((depth + 1, child));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanTree {
    pub query_id: String,
    pub root: PlanNode,
}

impl PlanTree {
    pub fn node_count(&self) -> usize {
        self.root.preorder().len()
    }
}

/// Total plan cost: the root's subtree cost.
pub fn total_cost(plan: &PlanTree) -> f64 {
    plan.root.subtree_cost
}

/// Every table read by a Scan or IndexSeek node.
pub fn referenced_tables(plan: &PlanTree) -> BTreeSet<Ident> {
    plan.root
        .preorder()
        .into_iter()
        .filter(|(_, n)| n.op_kind.is_table_access())
        .filter_map(|(_, n)| n.table.clone())
        .collect()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawCols {
    #[serde(default)]
    all_ref: Vec<String>,
    #[serde(default)]
    seek: Vec<String>,
    #[serde(default)]
    predicate: Vec<String>,
    #[serde(default)]
    group_by: Vec<String>,
    #[serde(default)]
    order_by: Vec<String>,
    #[serde(default)]
    join_key: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawNode {
    id: i64,
    parent: Option<i64>,
    op: String,
    #[serde(default)]
    table: Option<String>,
    #[serde(default)]
    detail: String,
    est_rows: f64,
    self_cost: f64,
    subtree_cost: f64,
    #[serde(default)]
    cols: RawCols,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPlan {
    query_id: String,
    nodes: Vec<RawNode>,
}

/// Parses a plan JSON document and checks it against `catalog`.
pub fn parse_plan(document: &str, catalog: &Catalog) -> Result<PlanTree> {
    let raw: RawPlan = serde_json::from_str(document).map_err(|e| Error::parse("plan", e))?;
    let qid = raw.query_id.as_str();

    let mut by_id = HashMap::new();
    for (pos, node) in raw.nodes.iter().enumerate() {
        if by_id.insert(node.id, pos).is_some() {
            return Err(Error::plan(qid, format!("duplicate node id {}", node.id)));
        }
    }
    let roots: Vec<_> = raw.nodes.iter().filter(|n| n.parent.is_none()).collect();
    match roots.len() {
        1 => {}
        0 if raw.nodes.is_empty() => return Err(Error::plan(qid, "plan has no nodes")),
        0 => return Err(Error::plan(qid, "no root node (cycle through every node)")),
        n => return Err(Error::plan(qid, format!("{n} nodes have no parent; expected one root"))),
    }

    let mut children: HashMap<i64, Vec<usize>> = HashMap::new();
    for (pos, node) in raw.nodes.iter().enumerate() {
        if let Some(parent) = node.parent {
            if !by_id.contains_key(&parent) {
                return Err(Error::plan(
                    qid,
                    format!("node {} references missing parent {parent}", node.id),
                ));
            }
            children.entry(parent).or_default().push(pos);
        }
    }

    let root_pos = by_id[&roots[0].id];
    let mut visited = HashSet::new();
    let root = build_node(&raw, root_pos, &children, catalog, &mut visited)?;
    if visited.len() != raw.nodes.len() {
        let stray = raw
            .nodes
            .iter()
            .find(|n| !visited.contains(&n.id))
            .map(|n| n.id)
            .unwrap_or_default();
        return Err(Error::plan(
            qid,
            format!("node {stray} is unreachable from the root (parent cycle)"),
        ));
    }
    Ok(PlanTree {
        query_id: raw.query_id.clone(),
        root,
    })
}

fn build_node(
    raw: &RawPlan,
    pos: usize,
    children: &HashMap<i64, Vec<usize>>,
    catalog: &Catalog,
    visited: &mut HashSet<i64>,
) -> Result<PlanNode> {
    let qid = raw.query_id.as_str();
    let src = &raw.nodes[pos];
    if !visited.insert(src.id) {
        return Err(Error::plan(qid, format!("cycle through node {}", src.id)));
    }
    let op_kind: OpKind = src.op.parse()?;

    for (name, value) in [
        ("est_rows", src.est_rows),
        ("self_cost", src.self_cost),
        ("subtree_cost", src.subtree_cost),
    ] {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::plan(
                qid,
                format!("node {}: {name} must be a non-negative number", src.id),
            ));
        }
    }

    let table = match (&src.table, op_kind.is_table_access()) {
        (Some(t), true) => {
            let def = catalog.table(t).ok_or_else(|| {
                Error::plan(qid, format!("node {}: unknown base table `{t}`", src.id))
            })?;
            Some(def.name.clone())
        }
        (None, true) => {
            return Err(Error::plan(qid, format!("{op_kind} node {} has no table", src.id)))
        }
        (Some(t), false) => {
            return Err(Error::plan(
                qid,
                format!("{op_kind} node {} must not name a table (got `{t}`)", src.id),
            ))
        }
        (None, false) => None,
    };

    let resolve = |list: &[String]| -> Result<Vec<ColumnRef>> {
        list.iter()
            .map(|text| {
                let parsed = ColumnRef::parse(text)?;
                catalog
                    .resolve_column(parsed.table.as_str(), parsed.column.as_str())
                    .map_err(|e| Error::plan(qid, format!("node {}: {e}", src.id)))
            })
            .collect()
    };

    let mut node = PlanNode {
        node_id: src.id,
        op_kind,
        detail: src.detail.clone(),
        self_cost: src.self_cost,
        subtree_cost: src.subtree_cost,
        est_rows: src.est_rows,
        table,
        all_ref_cols: resolve(&src.cols.all_ref)?.into_iter().collect(),
        seek_cols: resolve(&src.cols.seek)?,
        predicate_cols: resolve(&src.cols.predicate)?,
        group_by_cols: resolve(&src.cols.group_by)?,
        order_by_cols: resolve(&src.cols.order_by)?,
        join_key_cols: resolve(&src.cols.join_key)?,
        children: Vec::new(),
    };

    for (role, list) in node.role_lists() {
        let mut seen = HashSet::new();
        if let Some(dup) = list.iter().find(|c| !seen.insert(*c)) {
            return Err(Error::plan(
                qid,
                format!("node {}: column {dup} repeated in {role} list", src.id),
            ));
        }
    }
    if let Some(table) = &node.table {
        if let Some(stray) = node.all_ref_cols.iter().find(|c| &c.table != table) {
            return Err(Error::plan(
                qid,
                format!("node {}: referenced column {stray} is not in `{table}`", src.id),
            ));
        }
    }

    for &child in children.get(&src.id).map(Vec::as_slice).unwrap_or_default() {
        node.children
            .push(build_node(raw, child, children, catalog, visited)?);
    }

    let expected = node.self_cost + node.children.iter().map(|c| c.subtree_cost).sum::<f64>();
    let tolerance = COST_IDENTITY_TOLERANCE * node.subtree_cost.abs().max(1.0);
    if (node.subtree_cost - expected).abs() > tolerance {
        return Err(Error::plan(
            qid,
            format!(
                "node {}: subtree_cost {} differs from self_cost + children = {expected}",
                src.id, node.subtree_cost
            ),
        ));
    }
    Ok(node)
}

/// Serializes a plan back into the plan JSON schema, nodes in pre-order.
pub fn render_json(plan: &PlanTree) -> String {
    fn names(cols: &[ColumnRef]) -> Vec<String> {
        cols.iter().map(ToString::to_string).collect()
    }
    fn walk(node: &PlanNode, parent: Option<i64>, out: &mut Vec<RawNode>) {
        out.push(RawNode {
            id: node.node_id,
            parent,
            op: node.op_kind.to_string(),
            table: node.table.as_ref().map(ToString::to_string),
            detail: node.detail.clone(),
            est_rows: node.est_rows,
            self_cost: node.self_cost,
            subtree_cost: node.subtree_cost,
            cols: RawCols {
                all_ref: node.all_ref_cols.iter().map(ToString::to_string).collect(),
                seek: names(&node.seek_cols),
                predicate: names(&node.predicate_cols),
                group_by: names(&node.group_by_cols),
                order_by: names(&node.order_by_cols),
                join_key: names(&node.join_key_cols),
            },
        });
        for child in &node.children {
            walk(child, Some(node.node_id), out);
        }
    }
    let mut nodes = Vec::new();
    walk(&plan.root, None, &mut nodes);
    serde_json::to_string_pretty(&RawPlan {
        query_id: plan.query_id.clone(),
        nodes,
    })
    .expect("plan serializes")
}

fn escape_cell(text: &str) -> String {
    text.replace('\\', "\\\\")
        .replace('|', "\\|")
        .replace('\n', "\\n")
}

/// One row per operator in pre-order, operator names indented by depth.
pub fn render_plan_table(plan: &PlanTree) -> String {
    let mut out = String::from("| Id | Operator | Detail | Est. Rows | Cost | Subtree Cost |\n");
    out.push_str("|----|----------|--------|-----------|------|--------------|\n");
    for (depth, node) in plan.root.preorder() {
        let mut op = format!("{}{}", "  ".repeat(depth), node.op_kind);
        if let Some(table) = &node.table {
            op.push_str(&format!(" [{table}]"));
        }
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            node.node_id,
            escape_cell(&op),
            escape_cell(&node.detail),
            node.est_rows,
            node.self_cost,
            node.subtree_cost
        ));
    }
    out
}
