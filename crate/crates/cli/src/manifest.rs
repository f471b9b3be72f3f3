use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Run settings loaded from a TOML file; command-line flags override fields.
/// Relative paths in a manifest file resolve against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plans: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plans_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_OUT: &str = "idxtune-run";
pub const SYNTHETIC_ORACLE: &str = "synthetic";

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut manifest: RunManifest = toml::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        manifest.rebase(base);
        Ok(manifest)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.plans.iter_mut().for_each(join);
        for p in [
            &mut self.catalog,
            &mut self.plans_dir,
            &mut self.sim,
            &mut self.stub,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }

    /// Fields set in `other` replace ours; plan lists replace rather than append.
    pub fn overlay(mut self, other: RunManifest) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(catalog, plans_dir, sim, oracle, alpha, k, n, stub, out, seed);
        if !other.plans.is_empty() {
            self.plans = other.plans;
        }
        self
    }

    /// Range checks that are usage errors rather than bad input files.
    pub fn check(&self) -> Result<(), CliError> {
        if let Some(alpha) = self.alpha {
            if !(0.0..1.0).contains(&alpha) {
                return Err(CliError::usage(format!("alpha must be in [0, 1), got {alpha}")));
            }
        }
        if self.k == Some(0) {
            return Err(CliError::usage("k must be at least 1"));
        }
        if self.n == Some(0) {
            return Err(CliError::usage("n must be at least 1"));
        }
        if let Some(oracle) = &self.oracle {
            if oracle != SYNTHETIC_ORACLE {
                return Err(CliError::usage(format!(
                    "unsupported oracle `{oracle}` (available: {SYNTHETIC_ORACLE})"
                )));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(DEFAULT_K)
    }

    pub fn require<'a>(field: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        let path = field
            .as_deref()
            .ok_or_else(|| CliError::usage(format!("--{flag} is required")))?;
        if !path.exists() {
            return Err(CliError::input(format!("{}: no such file or directory", path.display())));
        }
        Ok(path)
    }

    /// Explicit plan files followed by the `*.json` files of `plans_dir` in name order.
    pub fn plan_files(&self) -> Result<Vec<PathBuf>, CliError> {
        let mut files = self.plans.clone();
        if let Some(dir) = &self.plans_dir {
            let entries = std::fs::read_dir(dir)
                .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        }
        for f in &files {
            if !f.is_file() {
                return Err(CliError::input(format!("{}: no such file", f.display())));
            }
        }
        Ok(files)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}
