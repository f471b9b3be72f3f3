//! Advisor prompt assembly.
//!
//! Each query contributes one block: the schema of the tables and views it
//! touches, its SQL text, and the tabular rendering of its current plan. A
//! single-query prompt wraps one block. A multi-query prompt concatenates
//! every block unabridged and states the workload size and index budget.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{Catalog, Ident, ViewDef};
use crate::error::{Error, Result};
use crate::plan::{referenced_tables, render_plan_table, PlanTree};

pub const TEMPLATE_VERSION: &str = "v1";

const SINGLE_V1: &str = include_str!("../templates/single_query.v1.txt");
const MULTI_V1: &str = include_str!("../templates/multi_query.v1.txt");
const BLOCK_V1: &str = include_str!("../templates/query_block.v1.txt");

/// Separator placed between consecutive query blocks.
pub const BLOCK_SEPARATOR: &str = "\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub single: String,
    pub multi: String,
    pub block: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            single: SINGLE_V1.to_string(),
            multi: MULTI_V1.to_string(),
            block: BLOCK_V1.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads `single_query.<v>.txt`, `multi_query.<v>.txt` and `query_block.<v>.txt` from `dir`.
    pub fn from_dir(dir: &Path, version: &str) -> Result<Self> {
        let read = |stem: &str| {
            let path = dir.join(format!("{stem}.{version}.txt"));
            std::fs::read_to_string(&path).map_err(|source| Error::Io { path, source })
        };
        Ok(PromptTemplates {
            single: read("single_query")?,
            multi: read("multi_query")?,
            block: read("query_block")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Single,
    Multi,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub text: String,
    pub kind: PromptKind,
    pub query_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_constraint: Option<usize>,
}

impl PromptBundle {
    /// Advisory size; no token limit is enforced.
    pub fn char_count(&self) -> usize {
        self.text.chars().count()
    }

    /// SHA-256 of the prompt text, first 16 hex digits.
    pub fn digest(&self) -> String {
        prompt_digest(&self.text)
    }
}

pub fn prompt_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Substitutes `{{name}}` placeholders. Unknown or unclosed placeholders are
/// errors; substituted values are not rescanned.
pub fn render_template(template: &str, values: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| Error::Template("unclosed `{{` placeholder".into()))?;
        let name = after[..end].trim();
        let value = values
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Template(format!("no value for placeholder `{name}`")))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Views whose names occur as identifiers in the query text.
fn referenced_views<'a>(query_text: &str, catalog: &'a Catalog) -> Vec<&'a ViewDef> {
    let cleaned: String = query_text
        .chars()
        .map(|c| if matches!(c, '[' | ']' | '"' | '`') { ' ' } else { c })
        .collect();
    let tokens: BTreeSet<Ident> = cleaned
        .split(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '.' | '#' | '@' | '$')))
        .filter(|t| !t.is_empty())
        .flat_map(|t| {
            // `dbo.v` should match both `dbo.v` and `v`
            let last = t.rsplit('.').next().unwrap_or(t);
            [Ident::new(t), Ident::new(last)]
        })
        .collect();
    catalog
        .views
        .iter()
        .filter(|v| tokens.contains(&v.name))
        .collect()
}

/// Schema text for the tables `plan` reads and the views `query_text` names.
pub fn render_schema(query_text: &str, catalog: &Catalog, plan: &PlanTree) -> Result<String> {
    let mut out = String::new();
    for name in referenced_tables(plan) {
        let table = catalog
            .table(name.as_str())
            .ok_or_else(|| Error::UnknownTable(name.to_string()))?;
        let _ = writeln!(out, "Table {} ({} rows)", table.name, table.row_count);
        let columns: Vec<String> = table
            .columns
            .iter()
            .map(|c| {
                if c.data_type.is_empty() {
                    c.name.to_string()
                } else {
                    format!("{} {}", c.name, c.data_type)
                }
            })
            .collect();
        let _ = writeln!(out, "  Columns: {}", columns.join(", "));
        let existing: Vec<_> = catalog.indexes_on(table.name.as_str()).collect();
        if existing.is_empty() {
            out.push_str("  Existing indexes: none\n");
        } else {
            out.push_str("  Existing indexes:\n");
            for ix in existing {
                let _ = write!(
                    out,
                    "    - {} {} ({})",
                    ix.name,
                    if ix.clustered { "CLUSTERED" } else { "NONCLUSTERED" },
                    ix.key_columns
                        .iter()
                        .map(Ident::as_str)
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                if !ix.included_columns.is_empty() {
                    let _ = write!(
                        out,
                        " INCLUDE ({})",
                        ix.included_columns
                            .iter()
                            .map(Ident::as_str)
                            .collect::<Vec<_>>()
                            .join(", ")
                    );
                }
                out.push('\n');
            }
        }
    }
    for view in referenced_views(query_text, catalog) {
        let _ = writeln!(out, "View {}:\n  {}", view.name, view.definition_text.trim());
    }
    Ok(out)
}

/// One query's block: schema, SQL text and plan table.
pub fn render_query_block(
    templates: &PromptTemplates,
    query_text: &str,
    catalog: &Catalog,
    plan: &PlanTree,
) -> Result<String> {
    let schema = render_schema(query_text, catalog, plan)?;
    let table = render_plan_table(plan);
    render_template(
        &templates.block,
        &[
            ("query_id", plan.query_id.as_str()),
            ("schema", schema.as_str()),
            ("query_text", query_text.trim()),
            ("plan", table.as_str()),
        ],
    )
}

pub fn build_single_query_prompt(
    templates: &PromptTemplates,
    query_text: &str,
    catalog: &Catalog,
    plan: &PlanTree,
) -> Result<PromptBundle> {
    let block = render_query_block(templates, query_text, catalog, plan)?;
    let text = render_template(&templates.single, &[("query_block", block.as_str())])?;
    Ok(PromptBundle {
        text,
        kind: PromptKind::Single,
        query_ids: vec![plan.query_id.clone()],
        k_constraint: None,
    })
}

pub fn build_multi_query_prompt(
    templates: &PromptTemplates,
    queries: &[(String, PlanTree)],
    catalog: &Catalog,
    k: usize,
) -> Result<PromptBundle> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if queries.is_empty() {
        return Err(Error::InvalidParameter("workload has no queries".into()));
    }
    let blocks = queries
        .iter()
        .map(|(sql, plan)| render_query_block(templates, sql, catalog, plan))
        .collect::<Result<Vec<_>>>()?;
    let size = queries.len().to_string();
    let k_text = k.to_string();
    let joined = blocks.join(BLOCK_SEPARATOR);
    let text = render_template(
        &templates.multi,
        &[
            ("workload_size", size.as_str()),
            ("max_indexes", k_text.as_str()),
            ("query_blocks", joined.as_str()),
        ],
    )?;
    Ok(PromptBundle {
        text,
        kind: PromptKind::Multi,
        query_ids: queries.iter().map(|(_, p)| p.query_id.clone()).collect(),
        k_constraint: Some(k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_catalog;
    use crate::plan::parse_plan;

    fn fixture() -> (Catalog, PlanTree) {
        let cat = load_catalog(
            r#"{"tables":[
                {"name":"T","row_count":100,"columns":[{"name":"a","type":"int"},{"name":"b","type":"varchar(10)"}]},
                {"name":"U","row_count":7,"columns":[{"name":"x","type":"int"}]}],
               "views":[{"name":"V","definition":"SELECT a FROM T WHERE b = 'z'"}],
               "indexes":[{"table":"T","name":"pk_t","key_columns":["a"],"clustered":true}]}"#,
        )
        .unwrap();
        let plan = parse_plan(
            r#"{"query_id":"q1","nodes":[{"id":1,"parent":null,"op":"Scan","table":"T","detail":"","est_rows":100,"self_cost":10,"subtree_cost":10,"cols":{"all_ref":["T.a"]}}]}"#,
            &cat,
        )
        .unwrap();
        (cat, plan)
    }

    #[test]
    fn template_substitution() {
        assert_eq!(
            render_template("a {{ x }} b {{y}}", &[("x", "{{y}}"), ("y", "2")]).unwrap(),
            "a {{y}} b 2"
        );
        assert!(render_template("{{missing}}", &[]).is_err());
        assert!(render_template("{{open", &[]).is_err());
    }

    #[test]
    fn single_prompt_restricts_schema() {
        let (cat, plan) = fixture();
        let p = build_single_query_prompt(&PromptTemplates::default(), "SELECT a FROM T", &cat, &plan)
            .unwrap();
        assert!(p.text.contains("Table T (100 rows)"));
        assert!(!p.text.contains("Table U"));
        assert!(!p.text.contains("View V"));
        assert!(p.text.contains("pk_t CLUSTERED (a)"));
        assert!(p.text.contains("Do not create indexes on views."));
        assert!(!p.text.contains("{{"));
        let again =
            build_single_query_prompt(&PromptTemplates::default(), "SELECT a FROM T", &cat, &plan)
                .unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn view_definitions_follow_the_query_text() {
        let (cat, plan) = fixture();
        let p = build_single_query_prompt(
            &PromptTemplates::default(),
            "SELECT * FROM [dbo].[v] JOIN T ON 1=1",
            &cat,
            &plan,
        )
        .unwrap();
        assert!(p.text.contains("View V:\n  SELECT a FROM T WHERE b = 'z'"));
    }

    #[test]
    fn sections_appear_in_order() {
        let (cat, plan) = fixture();
        let p = build_single_query_prompt(&PromptTemplates::default(), "SELECT a FROM T", &cat, &plan)
            .unwrap();
        let pos = |s: &str| p.text.find(s).unwrap();
        assert!(pos("Task:") < pos("#### Database schema"));
        assert!(pos("#### Database schema") < pos("#### SQL text"));
        assert!(pos("#### SQL text") < pos("| Id | Operator"));
        assert!(pos("| Id | Operator") < pos("## Output format"));
    }

    #[test]
    fn multi_prompt_rejects_bad_arguments() {
        let (cat, plan) = fixture();
        let t = PromptTemplates::default();
        assert!(build_multi_query_prompt(&t, &[], &cat, 5).is_err());
        assert!(build_multi_query_prompt(&t, &[("SELECT 1".into(), plan)], &cat, 0).is_err());
    }

    #[test]
    fn missing_table_is_an_error() {
        let (_, plan) = fixture();
        let other = load_catalog(r#"{"tables":[]}"#).unwrap();
        assert!(matches!(
            build_single_query_prompt(&PromptTemplates::default(), "SELECT 1", &other, &plan),
            Err(Error::UnknownTable(_))
        ));
    }
}
