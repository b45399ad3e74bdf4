//! Experiment specification files.
//!
//! The flat format is one `key = value` pair per line; `#` starts a comment
//! and lists are comma-separated. A document whose first non-blank character
//! is `{` is read as a JSON object with the same keys.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::Value;

use crate::schemes::SchemeKind;
use crate::{Error, Result, SystemConfig};

/// Which schemes a spec runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSelection {
    One(SchemeKind),
    All,
}

impl SchemeSelection {
    pub fn kinds(self) -> Vec<SchemeKind> {
        match self {
            SchemeSelection::One(k) => vec![k],
            SchemeSelection::All => SchemeKind::ALL.to_vec(),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SchemeSelection::One(k) => k.as_str(),
            SchemeSelection::All => "all",
        }
    }
}

impl std::str::FromStr for SchemeSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(SchemeSelection::All)
        } else {
            s.parse().map(SchemeSelection::One)
        }
    }
}

/// How the channel multiplexing gain `r_c` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatePolicy {
    /// The exponent-optimal gain of each scheme.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scheme: SchemeSelection,
    pub cfg: SystemConfig,
    pub rate: RatePolicy,
    pub output: Option<PathBuf>,
    /// Stop a grid point once the MSE standard error falls below this
    /// fraction of the mean.
    pub early_stop: Option<f64>,
    /// SNR interval (dB) used for the slope fit instead of the upper half.
    pub fit_range: Option<(f64, f64)>,
}

const KEYS: [&str; 15] = [
    "scheme",
    "K",
    "Nt",
    "M",
    "b",
    "S",
    "snr_db",
    "trials",
    "seed",
    "per_user_snr_db",
    "rc",
    "output",
    "early_stop",
    "fit_min_db",
    "fit_max_db",
];

const REQUIRED: [&str; 6] = ["scheme", "K", "M", "b", "S", "snr_db"];

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentSpec {
    pub fn new(scheme: SchemeSelection, cfg: SystemConfig) -> Self {
        ExperimentSpec {
            scheme,
            cfg,
            rate: RatePolicy::Auto,
            output: None,
            early_stop: None,
            fit_range: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.cfg.snr_db_grid.is_empty() {
            return Err(Error::Config("snr_db grid is empty".into()));
        }
        if self.cfg.snr_db_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("snr_db grid must be strictly increasing".into()));
        }
        if let RatePolicy::Fixed(r) = self.rate {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Config(format!("rc = {r} must be non-negative")));
            }
        }
        if let Some(e) = self.early_stop {
            if !(e > 0.0) {
                return Err(Error::Config(format!("early_stop = {e} must be positive")));
            }
        }
        if let Some((lo, hi)) = self.fit_range {
            if !(lo < hi) {
                return Err(Error::Config(format!("fit range [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        let c = &self.cfg;
        let mut out = vec![
            ("scheme", self.scheme.as_str().to_string()),
            ("K", c.users.to_string()),
            ("Nt", c.user_antennas.to_string()),
            ("M", c.bs_antennas.to_string()),
            ("b", c.b.to_string()),
            ("S", c.source_len.to_string()),
            ("snr_db", join(&c.snr_db_grid)),
            ("trials", c.trials.to_string()),
            ("seed", c.seed.to_string()),
        ];
        if let Some(p) = &c.per_user_snr_db {
            out.push(("per_user_snr_db", join(p)));
        }
        out.push((
            "rc",
            match self.rate {
                RatePolicy::Auto => "auto".into(),
                RatePolicy::Fixed(r) => r.to_string(),
            },
        ));
        if let Some(o) = &self.output {
            out.push(("output", o.display().to_string()));
        }
        out.push((
            "early_stop",
            self.early_stop.map_or("off".into(), |e| e.to_string()),
        ));
        if let Some((lo, hi)) = self.fit_range {
            out.push(("fit_min_db", lo.to_string()));
            out.push(("fit_max_db", hi.to_string()));
        }
        out
    }

    /// Flat `key = value` text, keys in a fixed order.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn emit_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for (k, v) in self.pairs() {
            let value = match k {
                "scheme" | "rc" | "output" | "early_stop" => Value::String(v),
                "snr_db" | "per_user_snr_db" => Value::Array(
                    v.split(',')
                        .map(|x| serde_json::from_str(x.trim()).expect("formatted float"))
                        .collect(),
                ),
                _ => serde_json::from_str(&v).expect("formatted number"),
            };
            map.insert(k.to_string(), value);
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("plain JSON");
        s.push('\n');
        s
    }

    /// Parses either format.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_flat(text)
        }
    }

    pub fn parse_flat(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, line, "expected `key = value`"))?;
            entries.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_entries(entries)
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), "json", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse(1, "json", "top level must be an object"))?;
        let mut entries = Vec::new();
        for (k, v) in obj {
            let line = text
                .lines()
                .position(|l| l.contains(&format!("\"{k}\"")))
                .map_or(1, |p| p + 1);
            let flat = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Array(xs) => {
                    let mut parts = Vec::with_capacity(xs.len());
                    for x in xs {
                        match x {
                            Value::Number(n) => parts.push(n.to_string()),
                            _ => return Err(Error::parse(line, k, "list entries must be numbers")),
                        }
                    }
                    parts.join(", ")
                }
                Value::Null => continue,
                _ => return Err(Error::parse(line, k, "unsupported value type")),
            };
            entries.push((line, k.clone(), flat));
        }
        entries.sort_by_key(|e| e.0);
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<(usize, String, String)>) -> Result<Self> {
        let mut seen: Vec<(&str, usize, String)> = Vec::new();
        for (line, k, v) in &entries {
            let key = KEYS
                .iter()
                .find(|x| **x == k.as_str())
                .ok_or_else(|| Error::parse(*line, k, "unknown key"))?;
            if let Some((_, first, _)) = seen.iter().find(|s| s.0 == *key) {
                return Err(Error::parse(*line, k, format!("duplicate key (first on line {first})")));
            }
            seen.push((key, *line, v.clone()));
        }
        let last_line = entries.iter().map(|e| e.0).max().unwrap_or(1);
        for r in REQUIRED {
            if !seen.iter().any(|s| s.0 == r) {
                return Err(Error::parse(last_line, r, "missing required key"));
            }
        }
        let get = |key: &str| seen.iter().find(|s| s.0 == key).map(|s| (s.1, s.2.as_str()));
        fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::parse(line, key, format!("cannot parse '{v}'")))
        }
        fn list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
            v.split(',')
                .map(|x| num::<f64>(line, key, x.trim()))
                .collect()
        }
        let req = |key: &str| get(key).expect("checked above");

        let (l, v) = req("scheme");
        let scheme: SchemeSelection = v.parse().map_err(|_| {
            Error::parse(l, "scheme", format!("'{v}' is not analog, separated, hybrid, ideal or all"))
        })?;
        let (lk, v) = req("K");
        let k: usize = num(lk, "K", v)?;
        let nt: usize = match get("Nt") {
            Some((l, v)) => num(l, "Nt", v)?,
            None => 1,
        };
        let (lm, v) = req("M");
        let m: usize = num(lm, "M", v)?;
        let (lb, v) = req("b");
        let b: f64 = num(lb, "b", v)?;
        let (ls, v) = req("S");
        let s: usize = num(ls, "S", v)?;
        let mut cfg = SystemConfig::new(k, nt, m, b, s)
            .map_err(|e| Error::parse(lb, "b", e.to_string()))?;
        let (lg, v) = req("snr_db");
        cfg.snr_db_grid = list(lg, "snr_db", v)?;
        if let Some((l, v)) = get("trials") {
            cfg.trials = num(l, "trials", v)?;
        } else {
            cfg.trials = 100_000;
        }
        if let Some((l, v)) = get("seed") {
            cfg.seed = num(l, "seed", v)?;
        }
        if let Some((l, v)) = get("per_user_snr_db") {
            cfg.per_user_snr_db = Some(list(l, "per_user_snr_db", v)?);
        }
        let rate = match get("rc") {
            None | Some((_, "auto")) => RatePolicy::Auto,
            Some((l, v)) => RatePolicy::Fixed(num(l, "rc", v)?),
        };
        let output = get("output").map(|(_, v)| PathBuf::from(v));
        let early_stop = match get("early_stop") {
            None | Some((_, "off")) => None,
            Some((l, v)) => Some(num(l, "early_stop", v)?),
        };
        let fit_range = match (get("fit_min_db"), get("fit_max_db")) {
            (None, None) => None,
            (Some((l1, v1)), Some((l2, v2))) => {
                Some((num(l1, "fit_min_db", v1)?, num(l2, "fit_max_db", v2)?))
            }
            (Some((l, _)), None) | (None, Some((l, _))) => {
                return Err(Error::parse(l, "fit_min_db", "fit_min_db and fit_max_db go together"))
            }
        };
        let spec = ExperimentSpec {
            scheme,
            cfg,
            rate,
            output,
            early_stop,
            fit_range,
        };
        spec.validate().map_err(|e| {
            let field = match &e {
                Error::Config(msg) if msg.contains("per_user") => "per_user_snr_db",
                Error::Config(msg) if msg.contains("snr_db") => "snr_db",
                Error::Config(msg) if msg.contains("trials") => "trials",
                _ => "spec",
            };
            let line = get(field).map_or(last_line, |g| g.0);
            Error::parse(line, field, e.to_string())
        })?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# Fig. 3 style sweep
scheme = separated
K = 4
M = 4
b = 4
S = 1
snr_db = 12.0412, 18, 24.0824
trials = 1000
seed = 7
";

    #[test]
    fn parses_with_defaults() {
        let s = ExperimentSpec::parse(SAMPLE).unwrap();
        assert_eq!(s.scheme, SchemeSelection::One(SchemeKind::Separated));
        assert_eq!(s.cfg.user_antennas, 1);
        assert_eq!(s.cfg.slot_len, 4);
        assert_eq!(s.cfg.snr_db_grid, vec![12.0412, 18.0, 24.0824]);
        assert_eq!(s.rate, RatePolicy::Auto);
        assert_eq!(s.early_stop, None);
    }

    #[test]
    fn flat_and_json_round_trip() {
        let mut s = ExperimentSpec::parse(SAMPLE).unwrap();
        s.cfg.per_user_snr_db = Some(vec![12.0, 12.0, 24.0, 24.0]);
        s.rate = RatePolicy::Fixed(0.5);
        s.output = Some("out/run".into());
        s.early_stop = Some(0.01);
        s.fit_range = Some((12.0, 24.5));
        let text = s.emit();
        let back = ExperimentSpec::parse(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.emit(), text);
        let json = s.emit_json();
        let back = ExperimentSpec::parse(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.emit_json(), json);
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let bad = SAMPLE.replace("b = 4", "b = four");
        match ExperimentSpec::parse(&bad) {
            Err(Error::Parse { line, field, .. }) => assert_eq!((line, field.as_str()), (5, "b")),
            other => panic!("{other:?}"),
        }
        let bad = format!("{SAMPLE}colour = blue\n");
        match ExperimentSpec::parse(&bad) {
            Err(Error::Parse { line, field, .. }) => assert_eq!((line, field.as_str()), (10, "colour")),
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("scheme = separated", "scheme = digital");
        assert!(matches!(ExperimentSpec::parse(&bad), Err(Error::Parse { line: 2, .. })));
        let bad = SAMPLE.replace("K = 4\n", "");
        assert!(matches!(ExperimentSpec::parse(&bad), Err(Error::Parse { .. })));
        let bad = format!("{SAMPLE}per_user_snr_db = 1, 2\n");
        match ExperimentSpec::parse(&bad) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!((line, field.as_str()), (10, "per_user_snr_db"))
            }
            other => panic!("{other:?}"),
        }
        assert!(ExperimentSpec::parse("scheme separated").is_err());
        assert!(ExperimentSpec::parse("{\"scheme\": [true]}").is_err());
        let dup = format!("{SAMPLE}seed = 8\n");
        assert!(matches!(ExperimentSpec::parse(&dup), Err(Error::Parse { line: 10, .. })));
    }
}
