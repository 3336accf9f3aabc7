//! Resolved experiment configuration: defaults, then the config file, then
//! command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DVector;

/// Errors detected before any numerical work starts (exit code 1).
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Keys are stored with dashes; `max_iters` and `max-iters` are the same key.
pub fn normalize_key(k: &str) -> String {
    k.trim().replace('_', "-")
}

/// Flat `key = value` configuration with a fixed set of known keys.
#[derive(Debug, Clone)]
pub struct Config {
    command: &'static str,
    values: BTreeMap<String, String>,
}

impl Config {
    /// Starts from `defaults`, which also fixes the set of accepted keys.
    pub fn new(command: &'static str, defaults: &[(&str, &str)]) -> Self {
        Config {
            command,
            values: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let key = normalize_key(key);
        match self.values.get_mut(&key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => usage(format!("unknown key '{key}' for '{}'", self.command)),
        }
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> Result<(), UsageError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("{origin}:{}: expected 'key = value'", no + 1));
            };
            let v = v.trim().trim_matches('"');
            self.set(k, v).map_err(|e| UsageError(format!("{origin}:{}: {}", no + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        self.merge_text(&text, &path.display().to_string())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key '{key}' has no default"))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, UsageError> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| UsageError(format!("invalid value '{v}' for '{key}'")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, UsageError> {
        match self.raw(key) {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            v => usage(format!("invalid boolean '{v}' for '{key}'")),
        }
    }

    pub fn positive(&self, key: &str) -> Result<f64, UsageError> {
        let v: f64 = self.parse(key)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            usage(format!("'{key}' must be positive and finite, got {v}"))
        }
    }

    pub fn choice<'a>(&self, key: &str, allowed: &[&'a str]) -> Result<&'a str, UsageError> {
        let v = self.raw(key);
        allowed
            .iter()
            .find(|a| **a == v)
            .copied()
            .ok_or_else(|| UsageError(format!("'{key}' must be one of {}, got '{v}'", allowed.join("|"))))
    }

    pub fn vector(&self, key: &str) -> Result<DVector<f64>, UsageError> {
        parse_spectrum(self.raw(key)).map_err(|e| UsageError(format!("'{key}': {}", e.0)))
    }

    /// Comment header embedding every resolved key.
    pub fn header(&self) -> String {
        let mut out = format!("# riemann-opt {}\n", self.command);
        for (k, v) in &self.values {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out
    }
}

/// `a..b` (integer ramp, either direction), `diag:v1,v2,...` or
/// `file:<path>` (numbers separated by whitespace or commas).
pub fn parse_spectrum(spec: &str) -> Result<DVector<f64>, UsageError> {
    let spec = spec.trim();
    let numbers = |body: &str| -> Result<Vec<f64>, UsageError> {
        body.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| UsageError(format!("invalid number '{s}'")))
            })
            .collect()
    };
    let v = if let Some(body) = spec.strip_prefix("diag:") {
        numbers(body)?
    } else if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {path}: {e}")))?;
        numbers(&text)?
    } else if let Some((a, b)) = spec.split_once("..") {
        let parse = |s: &str| {
            s.trim()
                .parse::<i64>()
                .map_err(|_| UsageError(format!("invalid ramp bound '{s}' in '{spec}'")))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if a >= b {
            (b..=a).rev().map(|x| x as f64).collect()
        } else {
            (a..=b).map(|x| x as f64).collect()
        }
    } else {
        return usage(format!("spectrum '{spec}' is not 'a..b', 'diag:...' or 'file:...'"));
    };
    if v.is_empty() {
        return usage(format!("spectrum '{spec}' is empty"));
    }
    Ok(DVector::from_vec(v))
}

/// Comma-separated positive integers.
pub fn parse_list(key: &str, s: &str) -> Result<Vec<usize>, UsageError> {
    let v: Result<Vec<usize>, _> = s.split(',').map(|x| x.trim().parse::<usize>()).collect();
    match v {
        Ok(v) if !v.is_empty() && v.iter().all(|&x| x > 0) => Ok(v),
        _ => usage(format!("'{key}' must be a list of positive integers, got '{s}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_grammar() {
        assert_eq!(parse_spectrum("3..1").unwrap().as_slice(), &[3.0, 2.0, 1.0]);
        assert_eq!(parse_spectrum("1..3").unwrap().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(parse_spectrum("diag:2.5, -1,4").unwrap().as_slice(), &[2.5, -1.0, 4.0]);
        assert!(parse_spectrum("diag:").is_err());
        assert!(parse_spectrum("diag:1,x").is_err());
        assert!(parse_spectrum("7").is_err());
        assert!(parse_spectrum("a..3").is_err());
        assert!(parse_spectrum("file:/nonexistent/spectrum").is_err());
    }

    #[test]
    fn config_layers_and_rejects_unknown_keys() {
        let mut c = Config::new("eig", &[("seed", "0"), ("max-iters", "10")]);
        c.merge_text("# comment\nseed = 4\nmax_iters=7 # trailing\n\n", "f").unwrap();
        assert_eq!(c.parse::<u64>("seed").unwrap(), 4);
        assert_eq!(c.parse::<usize>("max-iters").unwrap(), 7);
        c.set("seed", "9").unwrap();
        assert_eq!(c.raw("seed"), "9");
        assert!(c.merge_text("bogus = 1", "f").is_err());
        assert!(c.merge_text("seed", "f").is_err());
        assert!(c.header().contains("# seed = 9\n"));
    }

    #[test]
    fn typed_getters_validate() {
        let mut c = Config::new("x", &[("a", "true"), ("b", "-1"), ("m", "cg")]);
        assert!(c.flag("a").unwrap());
        assert!(c.positive("b").is_err());
        assert_eq!(c.choice("m", &["cg", "sd"]).unwrap(), "cg");
        c.set("m", "qr").unwrap();
        assert!(c.choice("m", &["cg", "sd"]).is_err());
        assert_eq!(parse_list("ns", "4, 8").unwrap(), vec![4, 8]);
        assert!(parse_list("ns", "4,0").is_err());
    }
}
