//! Schema model: base tables with cardinalities, views, and pre-existing indexes.
//!
//! Identifiers compare case-insensitively after trimming but keep the case
//! they were written with. Every other module resolves names through here.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{Error, Result};

/// A SQL identifier. Equality, ordering and hashing ignore case.
#[derive(Clone)]
pub struct Ident {
    text: String,
    folded: String,
}

impl Ident {
    pub fn new(text: impl AsRef<str>) -> Self {
        let text = text.as_ref().trim().to_string();
        let folded = text.to_lowercase();
        Ident { text, folded }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Case-folded form used for comparisons.
    pub fn folded(&self) -> &str {
        &self.folded
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    pub fn matches(&self, other: &str) -> bool {
        self.folded == other.trim().to_lowercase()
    }
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.folded == other.folded
    }
}

impl Eq for Ident {}

impl Hash for Ident {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.folded.hash(state);
    }
}

impl PartialOrd for Ident {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ident {
    fn cmp(&self, other: &Self) -> Ordering {
        self.folded.cmp(&other.folded)
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.text)
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident::new(s)
    }
}

impl From<String> for Ident {
    fn from(s: String) -> Self {
        Ident::new(s)
    }
}

impl Serialize for Ident {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Ident {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer).map(Ident::new)
    }
}

/// A table-qualified column, written `table.column` on the wire.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub table: Ident,
    pub column: Ident,
}

impl ColumnRef {
    pub fn new(table: impl Into<Ident>, column: impl Into<Ident>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }

    /// Splits `table.column` at the last dot so schema-qualified table names survive.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text.rsplit_once('.') {
            Some((table, column)) if !table.trim().is_empty() && !column.trim().is_empty() => {
                Ok(ColumnRef::new(table, column))
            }
            _ => Err(Error::parse(
                "column reference",
                format!("`{text}` is not of the form table.column"),
            )),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

impl fmt::Debug for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for ColumnRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ColumnRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        ColumnRef::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: Ident,
    /// Opaque type tag, only used when rendering DDL or prompts.
    #[serde(rename = "type", default)]
    pub data_type: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: Ident,
    pub row_count: u64,
    pub columns: Vec<ColumnDef>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name.matches(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDef {
    pub name: Ident,
    #[serde(rename = "definition")]
    pub definition_text: String,
}

/// Ordered key columns plus unordered included columns on a single table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexDefinition {
    pub table: Ident,
    #[serde(default)]
    pub name: String,
    pub key_columns: Vec<Ident>,
    #[serde(default)]
    pub included_columns: BTreeSet<Ident>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub clustered: bool,
}

/// Identity of an index ignoring its name: table, key list, include set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexKey {
    pub table: String,
    pub keys: Vec<String>,
    pub includes: Vec<String>,
}

impl IndexDefinition {
    /// Builds an index with a generated `ix_<table>_<digest>` name.
    pub fn new(
        table: impl Into<Ident>,
        key_columns: impl IntoIterator<Item = impl Into<Ident>>,
        included_columns: impl IntoIterator<Item = impl Into<Ident>>,
    ) -> Self {
        let mut index = IndexDefinition {
            table: table.into(),
            name: String::new(),
            key_columns: key_columns.into_iter().map(Into::into).collect(),
            included_columns: included_columns.into_iter().map(Into::into).collect(),
            clustered: false,
        };
        index.name = index.generated_name("ix");
        index
    }

    pub fn structural_key(&self) -> IndexKey {
        IndexKey {
            table: self.table.folded().to_string(),
            keys: self.key_columns.iter().map(|c| c.folded().to_string()).collect(),
            // BTreeSet<Ident> iterates in folded order already
            includes: self
                .included_columns
                .iter()
                .map(|c| c.folded().to_string())
                .collect(),
        }
    }

    pub fn same_structure(&self, other: &IndexDefinition) -> bool {
        self.structural_key() == other.structural_key()
    }

    /// First 8 hex digits of a SHA-256 over the key and include lists.
    pub fn digest(&self) -> String {
        let key = self.structural_key();
        let mut hasher = Sha256::new();
        hasher.update(key.keys.join(",").as_bytes());
        hasher.update(b"|");
        hasher.update(key.includes.join(",").as_bytes());
        hasher
            .finalize()
            .iter()
            .take(4)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn generated_name(&self, prefix: &str) -> String {
        format!("{prefix}_{}_{}", self.table, self.digest())
    }

    /// Assigns a generated name when none was supplied.
    pub fn with_default_name(mut self) -> Self {
        if self.name.trim().is_empty() {
            self.name = self.generated_name("ix");
        }
        self
    }

    pub fn to_ddl(&self) -> String {
        let kind = if self.clustered { "CLUSTERED" } else { "NONCLUSTERED" };
        let keys = join_idents(self.key_columns.iter());
        let mut ddl = format!("CREATE {kind} INDEX {} ON {} ({keys})", self.name, self.table);
        if !self.included_columns.is_empty() {
            ddl.push_str(&format!(" INCLUDE ({})", join_idents(self.included_columns.iter())));
        }
        ddl.push(';');
        ddl
    }
}

fn join_idents<'a>(idents: impl Iterator<Item = &'a Ident>) -> String {
    idents.map(Ident::as_str).collect::<Vec<_>>().join(", ")
}

/// A reason an index cannot be built against the catalog.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexViolation {
    #[error("table `{0}` does not exist")]
    UnknownTable(String),
    #[error("`{0}` is a view; indexes on views are prohibited")]
    TargetIsView(String),
    #[error("index has no key columns")]
    EmptyKey,
    #[error("column `{0}` does not exist in the target table")]
    UnknownColumn(String),
    #[error("column `{0}` is both a key and an included column")]
    KeyIncludeOverlap(String),
    #[error("key column `{0}` is listed more than once")]
    DuplicateKeyColumn(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Catalog {
    pub tables: Vec<TableDef>,
    #[serde(default)]
    pub views: Vec<ViewDef>,
    #[serde(rename = "indexes", default)]
    pub preexisting_indexes: Vec<IndexDefinition>,
}

impl Catalog {
    /// Validates the parts and assembles a catalog.
    pub fn new(
        tables: Vec<TableDef>,
        views: Vec<ViewDef>,
        preexisting_indexes: Vec<IndexDefinition>,
    ) -> Result<Self> {
        let catalog = Catalog {
            tables,
            views,
            preexisting_indexes: preexisting_indexes
                .into_iter()
                .map(IndexDefinition::with_default_name)
                .collect(),
        };
        catalog.check()?;
        Ok(catalog)
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name.matches(name))
    }

    pub fn view(&self, name: &str) -> Option<&ViewDef> {
        self.views.iter().find(|v| v.name.matches(name))
    }

    /// Pre-existing indexes on one table, in catalog order.
    pub fn indexes_on<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a IndexDefinition> {
        self.preexisting_indexes
            .iter()
            .filter(move |ix| ix.table.matches(table))
    }

    /// Canonical reference to a base-table column. Views are not resolvable.
    pub fn resolve_column(&self, table: &str, column: &str) -> Result<ColumnRef> {
        let def = self
            .table(table)
            .ok_or_else(|| Error::UnknownTable(table.trim().to_string()))?;
        let col = def.column(column).ok_or_else(|| Error::UnknownColumn {
            table: def.name.to_string(),
            column: column.trim().to_string(),
        })?;
        Ok(ColumnRef::new(def.name.clone(), col.name.clone()))
    }

    /// Every reason `index` cannot be built; empty when it is valid.
    pub fn validate_index(&self, index: &IndexDefinition) -> Vec<IndexViolation> {
        let mut violations = Vec::new();
        if index.key_columns.is_empty() {
            violations.push(IndexViolation::EmptyKey);
        }
        let Some(table) = self.table(index.table.as_str()) else {
            if self.view(index.table.as_str()).is_some() {
                violations.push(IndexViolation::TargetIsView(index.table.to_string()));
            } else {
                violations.push(IndexViolation::UnknownTable(index.table.to_string()));
            }
            return violations;
        };

        let mut seen = HashSet::new();
        for key in &index.key_columns {
            if table.column(key.as_str()).is_none() {
                violations.push(IndexViolation::UnknownColumn(key.to_string()));
            }
            if !seen.insert(key) {
                violations.push(IndexViolation::DuplicateKeyColumn(key.to_string()));
            }
        }
        for inc in &index.included_columns {
            if table.column(inc.as_str()).is_none() {
                violations.push(IndexViolation::UnknownColumn(inc.to_string()));
            }
            if seen.contains(inc) {
                violations.push(IndexViolation::KeyIncludeOverlap(inc.to_string()));
            }
        }
        violations
    }

    fn check(&self) -> Result<()> {
        let mut names = HashSet::new();
        for table in &self.tables {
            if table.name.is_empty() {
                return Err(Error::Catalog("table with empty name".into()));
            }
            if !names.insert(table.name.clone()) {
                return Err(Error::Catalog(format!("duplicate table `{}`", table.name)));
            }
            let mut cols = HashSet::new();
            for col in &table.columns {
                if col.name.is_empty() {
                    return Err(Error::Catalog(format!(
                        "table `{}` has a column with an empty name",
                        table.name
                    )));
                }
                if !cols.insert(&col.name) {
                    return Err(Error::Catalog(format!(
                        "duplicate column `{}` in table `{}`",
                        col.name, table.name
                    )));
                }
            }
        }
        for view in &self.views {
            if view.name.is_empty() {
                return Err(Error::Catalog("view with empty name".into()));
            }
            if !names.insert(view.name.clone()) {
                return Err(Error::Catalog(format!(
                    "view `{}` collides with another table or view",
                    view.name
                )));
            }
        }
        for index in &self.preexisting_indexes {
            if let Some(violation) = self.validate_index(index).into_iter().next() {
                return Err(Error::Catalog(format!(
                    "index `{}` on `{}`: {violation}",
                    index.name, index.table
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }
}

/// Parses and validates a catalog JSON document.
pub fn load_catalog(document: &str) -> Result<Catalog> {
    let raw: Catalog = serde_json::from_str(document).map_err(|e| Error::parse("catalog", e))?;
    Catalog::new(raw.tables, raw.views, raw.preexisting_indexes)
}
