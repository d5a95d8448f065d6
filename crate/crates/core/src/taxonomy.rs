//! Raw attack label → category mapping and the three evaluation tasks.
//!
//! A taxonomy is an ordered rule list; the first rule that matches a raw
//! label decides its category. The default rules group labels by prefix into
//! Benign, DDoS, DoS, MQTT, Recon and Spoofing. `DDoS` is listed before `DoS`
//! so the overlapping prefix resolves to the distributed variant.
//!
//! Text form, one rule per line, `#` starts a comment line:
//!
//! ```text
//! exact,Benign,Benign
//! prefix,DDoS,DDoS
//! contains,Spoofing,Spoofing
//! ```

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Label granularity a model is trained and evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Task {
    /// Benign vs. Attack.
    Binary,
    /// Benign plus the five attack categories.
    Category,
    /// Raw labels unchanged.
    Multiclass,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Category => "category",
            Task::Multiclass => "multiclass",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "category" => Ok(Task::Category),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(Error::Validation(format!(
                "unknown task `{other}` (expected binary, category or multiclass)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MatchKind {
    Exact,
    Prefix,
    Contains,
}

impl MatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::Exact => "exact",
            MatchKind::Prefix => "prefix",
            MatchKind::Contains => "contains",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rule {
    pub kind: MatchKind,
    pub pattern: String,
    pub category: String,
}

impl Rule {
    pub fn new(kind: MatchKind, pattern: &str, category: &str) -> Self {
        Rule {
            kind,
            pattern: pattern.into(),
            category: category.into(),
        }
    }

    pub fn matches(&self, label: &str) -> bool {
        match self.kind {
            MatchKind::Exact => label == self.pattern,
            MatchKind::Prefix => label.starts_with(self.pattern.as_str()),
            MatchKind::Contains => label.contains(self.pattern.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Taxonomy {
    pub rules: Vec<Rule>,
    /// Category reported as `Benign` in the binary task; everything else is `Attack`.
    pub binary_positive: String,
}

pub const BENIGN: &str = "Benign";
pub const ATTACK: &str = "Attack";

impl Default for Taxonomy {
    fn default() -> Self {
        use MatchKind::*;
        Taxonomy {
            rules: [
                (Exact, "Benign", "Benign"),
                (Prefix, "DDoS", "DDoS"),
                (Prefix, "DoS", "DoS"),
                (Prefix, "MQTT", "MQTT"),
                (Prefix, "Recon", "Recon"),
                (Prefix, "ARP", "Spoofing"),
                (Contains, "Spoofing", "Spoofing"),
            ]
            .iter()
            .map(|&(k, p, c)| Rule::new(k, p, c))
            .collect(),
            binary_positive: BENIGN.into(),
        }
    }
}

impl Taxonomy {
    /// Parses the line-oriented rule format. Blank lines and `#` lines are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.splitn(3, ',').map(str::trim).collect();
            let [kind, pattern, category] = parts[..] else {
                return Err(Error::Taxonomy(format!(
                    "line {}: expected `kind,pattern,category`, got `{line}`",
                    lineno + 1
                )));
            };
            let kind = match kind {
                "exact" => MatchKind::Exact,
                "prefix" => MatchKind::Prefix,
                "contains" => MatchKind::Contains,
                other => {
                    return Err(Error::Taxonomy(format!(
                        "line {}: unknown match kind `{other}`",
                        lineno + 1
                    )))
                }
            };
            if pattern.is_empty() || category.is_empty() {
                return Err(Error::Taxonomy(format!(
                    "line {}: empty pattern or category",
                    lineno + 1
                )));
            }
            rules.push(Rule::new(kind, pattern, category));
        }
        if rules.is_empty() {
            return Err(Error::Taxonomy("taxonomy has no rules".into()));
        }
        Ok(Taxonomy {
            rules,
            binary_positive: BENIGN.into(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            out.push_str(r.kind.as_str());
            out.push(',');
            out.push_str(&r.pattern);
            out.push(',');
            out.push_str(&r.category);
            out.push('\n');
        }
        out
    }

    /// Category of the first matching rule.
    pub fn category_of(&self, label: &str) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| r.matches(label))
            .map(|r| r.category.as_str())
    }

    /// Fails listing every distinct label no rule covers.
    pub fn check_coverage<S: AsRef<str>>(&self, raw_labels: &[S]) -> Result<()> {
        let missing: BTreeSet<&str> = raw_labels
            .iter()
            .map(AsRef::as_ref)
            .filter(|l| self.category_of(l).is_none())
            .collect();
        if missing.is_empty() {
            return Ok(());
        }
        let list: Vec<&str> = missing.into_iter().collect();
        Err(Error::Taxonomy(format!(
            "no taxonomy rule matches label(s): {}",
            list.join(", ")
        )))
    }

    pub fn map_label(&self, label: &str, task: Task) -> Result<String> {
        if task == Task::Multiclass {
            // still enforce coverage so every task rejects the same inputs
            self.check_coverage(&[label])?;
            return Ok(label.to_string());
        }
        let cat = self.category_of(label).ok_or_else(|| {
            Error::Taxonomy(format!("no taxonomy rule matches label(s): {label}"))
        })?;
        Ok(match task {
            Task::Category => cat.to_string(),
            _ if cat == self.binary_positive => BENIGN.to_string(),
            _ => ATTACK.to_string(),
        })
    }

    pub fn map_labels<S: AsRef<str>>(&self, raw_labels: &[S], task: Task) -> Result<Vec<String>> {
        self.check_coverage(raw_labels)?;
        raw_labels
            .iter()
            .map(|l| self.map_label(l.as_ref(), task))
            .collect()
    }
}
