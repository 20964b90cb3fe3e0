//! Flat `key = value` run configuration.
//!
//! Each subcommand declares a table of [`KeySpec`] entries. Values come from
//! three layers, later layers overriding earlier ones: built-in defaults, an
//! optional config file, and `--key value` command-line flags. Every value is
//! validated against its declared kind and range at resolve time, and errors
//! name the offending key together with the config-file line it came from.
//!
//! The file format is deliberately minimal: one `key = value` pair per line,
//! `#` starts a comment, blank lines are skipped, and `[section]` headers are
//! allowed purely as visual grouping (keys stay global).

use std::collections::BTreeMap;
use std::fmt;

/// A configuration error: unknown key, malformed line, bad type, or a value
/// outside its documented range.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Value type of a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Floating point number.
    F64,
    /// Unsigned integer.
    Usize,
    /// Boolean: true/false, yes/no, 1/0.
    Bool,
    /// Free-form text (field names, mode names, lists).
    Text,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::F64 => "number",
            Kind::Usize => "non-negative integer",
            Kind::Bool => "boolean (true/false)",
            Kind::Text => "text",
        }
    }
}

/// Admissible range for numeric keys; `Any` for the rest.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Range {
    Any,
    /// Strictly positive.
    Positive,
    /// Zero or greater.
    NonNegative,
    /// Strictly inside (0, 1).
    UnitOpen,
    /// Integer >= 1.
    AtLeastOne,
}

impl Range {
    fn describe(self) -> &'static str {
        match self {
            Range::Any => "any",
            Range::Positive => "> 0",
            Range::NonNegative => ">= 0",
            Range::UnitOpen => "in (0, 1)",
            Range::AtLeastOne => ">= 1",
        }
    }
}

/// Declaration of one configuration key: name, type, textual default,
/// admissible range, and the help line printed by `--help`.
#[derive(Debug)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub range: Range,
    pub help: &'static str,
}

/// Where a resolved value came from, for error messages.
#[derive(Clone, Copy, Debug)]
enum Source {
    Default,
    File(usize),
    Flag,
}

impl Source {
    fn describe(self) -> String {
        match self {
            Source::Default => "built-in default".to_string(),
            Source::File(line) => format!("config file line {line}"),
            Source::Flag => "command-line flag".to_string(),
        }
    }
}

/// Fully resolved and validated configuration for one subcommand run.
#[derive(Debug)]
pub struct Resolved {
    values: BTreeMap<&'static str, String>,
}

impl Resolved {
    /// Look up a float key. Panics on a key absent from the spec table;
    /// values were validated at resolve time so parsing cannot fail.
    pub fn f64(&self, name: &str) -> f64 {
        self.raw(name).parse().expect("validated at resolve time")
    }

    /// Look up an integer key.
    pub fn usize(&self, name: &str) -> usize {
        self.raw(name).parse().expect("validated at resolve time")
    }

    /// Look up a boolean key.
    pub fn bool(&self, name: &str) -> bool {
        parse_bool(self.raw(name)).expect("validated at resolve time")
    }

    /// Look up a text key.
    pub fn text(&self, name: &str) -> &str {
        self.raw(name)
    }

    fn raw(&self, name: &str) -> &str {
        self.values
            .get(name)
            .unwrap_or_else(|| panic!("key '{name}' missing from spec table"))
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn check_value(spec: &KeySpec, value: &str, source: Source) -> Result<(), ConfigError> {
    let place = source.describe();
    match spec.kind {
        Kind::Text => return Ok(()),
        Kind::Bool => {
            if parse_bool(value).is_none() {
                return Err(ConfigError(format!(
                    "key '{}': expected {}, got '{}' ({place})",
                    spec.name,
                    spec.kind.describe(),
                    value
                )));
            }
            return Ok(());
        }
        Kind::F64 | Kind::Usize => {}
    }
    let number: f64 = match spec.kind {
        Kind::Usize => match value.parse::<usize>() {
            Ok(n) => n as f64,
            Err(_) => {
                return Err(ConfigError(format!(
                    "key '{}': expected {}, got '{}' ({place})",
                    spec.name,
                    spec.kind.describe(),
                    value
                )))
            }
        },
        _ => match value.parse::<f64>() {
            Ok(x) if x.is_finite() => x,
            _ => {
                return Err(ConfigError(format!(
                    "key '{}': expected {}, got '{}' ({place})",
                    spec.name,
                    spec.kind.describe(),
                    value
                )))
            }
        },
    };
    let ok = match spec.range {
        Range::Any => true,
        Range::Positive => number > 0.0,
        Range::NonNegative => number >= 0.0,
        Range::UnitOpen => number > 0.0 && number < 1.0,
        Range::AtLeastOne => number >= 1.0,
    };
    if !ok {
        return Err(ConfigError(format!(
            "key '{}': value {} out of range, expected {} ({place})",
            spec.name,
            value,
            spec.range.describe()
        )));
    }
    Ok(())
}

/// Parse config-file text into `(line_number, key, value)` triples.
/// Structure errors (a line that is neither a pair, comment, blank, nor
/// section header) are reported with their line number.
pub fn parse_file(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ConfigError(format!(
                "line {line_no}: expected 'key = value', got '{line}'"
            )));
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if key.is_empty() {
            return Err(ConfigError(format!("line {line_no}: empty key")));
        }
        pairs.push((line_no, key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

/// Layer defaults, file pairs, and flag pairs into a validated [`Resolved`]
/// map. Unknown keys are rejected with their origin; every value is checked
/// against the key's kind and range.
pub fn resolve(
    specs: &[KeySpec],
    file_text: Option<&str>,
    flags: &[(String, String)],
) -> Result<Resolved, ConfigError> {
    let mut staged: BTreeMap<&'static str, (String, Source)> = BTreeMap::new();
    for spec in specs {
        staged.insert(spec.name, (spec.default.to_string(), Source::Default));
    }
    if let Some(text) = file_text {
        for (line_no, key, value) in parse_file(text)? {
            let Some(spec) = specs.iter().find(|s| s.name == key) else {
                return Err(ConfigError(format!(
                    "unknown key '{key}' (config file line {line_no})"
                )));
            };
            staged.insert(spec.name, (value, Source::File(line_no)));
        }
    }
    for (key, value) in flags {
        let Some(spec) = specs.iter().find(|s| s.name == key) else {
            return Err(ConfigError(format!("unknown key '--{key}'")));
        };
        staged.insert(spec.name, (value.clone(), Source::Flag));
    }
    let mut values = BTreeMap::new();
    for spec in specs {
        let (value, source) = staged.remove(spec.name).expect("seeded above");
        check_value(spec, &value, source)?;
        values.insert(spec.name, value);
    }
    Ok(Resolved { values })
}

/// Render the key table of one subcommand for `--help`.
pub fn help_table(specs: &[KeySpec]) -> String {
    let mut out = String::new();
    for spec in specs {
        let range = match spec.range {
            Range::Any => String::new(),
            r => format!(", {}", r.describe()),
        };
        out.push_str(&format!(
            "  {:<18} {}{} (default: {})\n      {}\n",
            spec.name,
            spec.kind.describe(),
            range,
            if spec.default.is_empty() { "empty" } else { spec.default },
            spec.help
        ));
    }
    out
}
