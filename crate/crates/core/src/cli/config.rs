//! Flat `key = value` configuration files checked against a per-command
//! schema.
//!
//! ```text
//! # three-site imprint
//! hubbard.u_hz = 1700
//! hubbard.j_hz = 3
//! imprint.delta_v_hz = 12400
//! ```
//!
//! Keys are case-insensitive, one per line; `#` starts a comment. Unknown or
//! repeated keys and unparsable values are configuration errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float,
    Int,
    Bool,
    Text,
    Choice(&'static [&'static str]),
    FloatList,
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Float => "float".into(),
            Kind::Int => "integer".into(),
            Kind::Bool => "true|false".into(),
            Kind::Text => "text".into(),
            Kind::Choice(c) => c.join("|"),
            Kind::FloatList => "comma-separated floats".into(),
        }
    }

    fn check(&self, key: &str, v: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key} = '{v}': expected {what}"));
        match self {
            Kind::Float => parse_float(v).map(|_| ()).ok_or_else(|| bad("a finite number")),
            Kind::Int => v.parse::<usize>().map(|_| ()).map_err(|_| bad("a nonnegative integer")),
            Kind::Bool => parse_bool(v).map(|_| ()).ok_or_else(|| bad("true or false")),
            Kind::Text => Ok(()),
            Kind::Choice(c) => {
                if c.iter().any(|o| o.eq_ignore_ascii_case(v)) {
                    Ok(())
                } else {
                    Err(bad(&format!("one of {}", c.join(", "))))
                }
            }
            Kind::FloatList => {
                if v.trim().is_empty() || split_list(v).all(|x| parse_float(x).is_some()) {
                    Ok(())
                } else {
                    Err(bad("comma-separated numbers"))
                }
            }
        }
    }
}

/// One accepted key. `default = None` marks an optional key that is unset
/// unless given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeySpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn key(key: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        key,
        kind,
        default: Some(default),
        help,
    }
}

pub const fn optional(key: &'static str, kind: Kind, help: &'static str) -> KeySpec {
    KeySpec {
        key,
        kind,
        default: None,
        help,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub command: &'static str,
    pub keys: Vec<KeySpec>,
}

impl Schema {
    pub fn new(command: &'static str, groups: &[&[KeySpec]]) -> Self {
        Self {
            command,
            keys: groups.iter().flat_map(|g| g.iter().copied()).collect(),
        }
    }

    fn find(&self, key: &str) -> Option<&KeySpec> {
        self.keys.iter().find(|k| k.key.eq_ignore_ascii_case(key))
    }

    /// Key reference appended to the command's `--help`.
    pub fn help_text(&self) -> String {
        let width = self.keys.iter().map(|k| k.key.len()).max().unwrap_or(0);
        let mut s = String::from("Config keys (file given with --config, or --set KEY=VALUE):\n");
        for k in &self.keys {
            let default = match k.default {
                Some("") => " [default: empty]".to_string(),
                Some(d) => format!(" [default: {d}]"),
                None => " [optional]".to_string(),
            };
            let _ = writeln!(s, "  {:width$}  {} <{}>{}", k.key, k.help, k.kind.describe(), default);
        }
        s
    }

    /// Resolves `text` (a config file body) plus `overrides` (`key=value`)
    /// against the schema, filling defaults.
    pub fn resolve(&self, text: &str, origin: &str, overrides: &[String]) -> Result<Config> {
        let mut given: BTreeMap<&'static str, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{origin}:{}: expected 'key = value', got '{line}'", i + 1))
            })?;
            let spec = self.lookup(k.trim(), &format!("{origin}:{}", i + 1))?;
            if given.insert(spec.key, v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("{origin}:{}: key '{}' given twice", i + 1, spec.key)));
            }
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set '{o}': expected KEY=VALUE")))?;
            let spec = self.lookup(k.trim(), "--set")?;
            given.insert(spec.key, v.trim().to_string());
        }
        let mut values = BTreeMap::new();
        for k in &self.keys {
            let v = match given.remove(k.key) {
                Some(v) => v,
                None => match k.default {
                    Some(d) => d.to_string(),
                    None => continue,
                },
            };
            k.kind.check(k.key, &v)?;
            let v = match k.kind {
                Kind::Choice(_) | Kind::Bool => v.to_ascii_lowercase(),
                _ => v,
            };
            values.insert(k.key.to_string(), v);
        }
        Ok(Config {
            command: self.command,
            values,
        })
    }

    pub fn resolve_file(&self, path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                self.resolve(&text, &p.display().to_string(), overrides)
            }
            None => self.resolve("", "<defaults>", overrides),
        }
    }

    fn lookup(&self, key: &str, at: &str) -> Result<&KeySpec> {
        self.find(key).ok_or_else(|| {
            let prefix = key.split('.').next().unwrap_or(key);
            let near: Vec<&str> = self
                .keys
                .iter()
                .filter(|k| k.key.starts_with(prefix))
                .map(|k| k.key)
                .collect();
            let hint = if near.is_empty() {
                format!("run `kagome {} --help` for the accepted keys", self.command)
            } else {
                format!("did you mean one of: {}?", near.join(", "))
            };
            Error::Config(format!("{at}: unknown key '{key}' for '{}'; {hint}", self.command))
        })
    }
}

/// Fully resolved configuration: every key with a value, defaults included.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    command: &'static str,
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn command(&self) -> &'static str {
        self.command
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key '{key}' missing from the '{}' schema", self.command))
    }

    pub fn f64(&self, key: &str) -> f64 {
        parse_float(self.raw(key)).expect("validated")
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(|v| parse_float(v))
    }

    pub fn usize(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated")
    }

    pub fn bool(&self, key: &str) -> bool {
        parse_bool(self.raw(key)).expect("validated")
    }

    pub fn text(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        let v = self.raw(key);
        if v.trim().is_empty() {
            return Vec::new();
        }
        split_list(v).map(|x| parse_float(x).expect("validated")).collect()
    }

    /// Positive value or a config error naming the key.
    pub fn positive(&self, key: &str) -> Result<f64> {
        let v = self.f64(key);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Config(format!("{key} must be > 0, got {v}")))
        }
    }

    /// Canonical `key = value` text; parsing it back gives the same config.
    pub fn render(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn parse_float(v: &str) -> Option<f64> {
    v.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim)
}
