//! Config files: flat `key = value` lines under `[section]` headers.
//!
//! Every key is checked against the known schema, so a misspelling is a
//! hard error instead of a silently applied default. Blank lines and lines
//! starting with `#` or `;` are ignored.

use std::collections::BTreeMap;
use std::sync::Arc;

use pmc_core::solver::{ContinuationSchedule, NewtonOptions};
use pmc_core::{AbsorptionSpec, DatumClass, DatumSpec, Grid, GridSpec};

use crate::expr;

const SCHEMA: &[(&str, &[&str])] = &[
    ("grid", &[
        "kind", "a", "b", "nodes", "x0", "x1", "y0", "y1", "nx", "ny", "rmin", "rmax", "dim",
    ]),
    ("datum", &["expr", "constant", "name", "class"]),
    ("absorption", &["name", "q", "c0", "cap"]),
    ("solver", &["p", "residual_tol", "max_iter", "backtrack", "min_step", "seed"]),
    ("schedule", &["kmax", "stop_tol"]),
];

/// Parsed config: raw text plus section -> key -> value.
#[derive(Debug)]
pub struct Config {
    pub text: String,
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

pub fn parse(text: &str) -> Result<Config, String> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| format!("line {lineno}: unterminated section header"))?
                .trim()
                .to_string();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(format!("line {lineno}: unknown section [{name}]"));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {lineno}: expected 'key = value', got '{line}'"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let section = current
            .clone()
            .ok_or_else(|| format!("line {lineno}: key '{key}' before any [section]"))?;
        let allowed = SCHEMA.iter().find(|(s, _)| *s == section).unwrap().1;
        if !allowed.contains(&key.as_str()) {
            return Err(format!(
                "line {lineno}: unknown key '{key}' in [{section}] (known: {})",
                allowed.join(", ")
            ));
        }
        let entry = sections.get_mut(&section).unwrap();
        if entry.insert(key.clone(), value).is_some() {
            return Err(format!("line {lineno}: duplicate key '{key}' in [{section}]"));
        }
    }
    Ok(Config { text: text.to_string(), sections })
}

impl Config {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(|v| v.as_str())
    }

    fn f64_key(&self, section: &str, key: &str) -> Result<Option<f64>, String> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| format!("[{section}] {key}: not a number: '{v}'")),
        }
    }

    fn usize_key(&self, section: &str, key: &str) -> Result<Option<usize>, String> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| format!("[{section}] {key}: not a count: '{v}'")),
        }
    }

    fn required_usize(&self, section: &str, key: &str) -> Result<usize, String> {
        self.usize_key(section, key)?
            .ok_or_else(|| format!("[{section}] {key} is required"))
    }

    pub fn grid(&self) -> Result<Arc<Grid>, String> {
        let kind = self
            .get("grid", "kind")
            .ok_or("[grid] kind is required (interval, rectangle, or radial)")?;
        let spec = match kind {
            "interval" => GridSpec::Interval {
                a: self.f64_key("grid", "a")?.unwrap_or(0.0),
                b: self.f64_key("grid", "b")?.unwrap_or(1.0),
                nodes: self.required_usize("grid", "nodes")?,
            },
            "rectangle" => GridSpec::Rectangle {
                x: (
                    self.f64_key("grid", "x0")?.unwrap_or(0.0),
                    self.f64_key("grid", "x1")?.unwrap_or(1.0),
                ),
                y: (
                    self.f64_key("grid", "y0")?.unwrap_or(0.0),
                    self.f64_key("grid", "y1")?.unwrap_or(1.0),
                ),
                nodes: (
                    self.required_usize("grid", "nx")?,
                    self.required_usize("grid", "ny")?,
                ),
            },
            "radial" => GridSpec::Radial {
                r_min: self.f64_key("grid", "rmin")?.unwrap_or(0.0),
                r_max: self.f64_key("grid", "rmax")?.unwrap_or(1.0),
                nodes: self.required_usize("grid", "nodes")?,
                dim: self.usize_key("grid", "dim")?.unwrap_or(3),
            },
            other => return Err(format!("[grid] kind: unknown kind '{other}'")),
        };
        Grid::build(&spec).map(Arc::new).map_err(|e| format!("[grid]: {e}"))
    }

    pub fn datum(&self, grid: &Grid) -> Result<DatumSpec, String> {
        let class = match self.get("datum", "class") {
            None => DatumClass::Linf,
            Some(c) => match c.to_ascii_lowercase().as_str() {
                "linf" => DatumClass::Linf,
                "ln" => DatumClass::LN,
                "lnweak" | "weakln" => DatumClass::WeakLN,
                "lq" => DatumClass::Lq,
                "l1" => DatumClass::L1,
                other => return Err(format!("[datum] class: unknown class '{other}'")),
            },
        };
        let named = match self.get("datum", "name") {
            None => None,
            Some("zero") => Some("0"),
            Some("one") => Some("1"),
            Some("plateau") => Some("5*chi(x-0.25,0.75-x)*chi(y-0.25,0.75-y)"),
            Some(other) => {
                return Err(format!(
                    "[datum] name: unknown name '{other}' (known: zero, one, plateau)"
                ))
            }
        };
        let sources = [
            self.get("datum", "expr"),
            self.get("datum", "constant"),
            named,
        ];
        if sources.iter().flatten().count() != 1 {
            return Err("[datum]: give exactly one of expr, constant, or name".into());
        }
        if let Some(c) = self.get("datum", "constant") {
            let v: f64 = c
                .parse()
                .map_err(|_| format!("[datum] constant: not a number: '{c}'"))?;
            return Ok(DatumSpec::constant(v));
        }
        let src = self.get("datum", "expr").or(named).unwrap();
        let compiled = expr::parse(src).map_err(|e| format!("[datum] expr: {e}"))?;
        if let Some(axis) = compiled.max_axis {
            if axis >= grid.axes() {
                return Err(format!(
                    "[datum] expr: uses coordinate axis {} but the grid has {} coordinate(s)",
                    axis + 1,
                    grid.axes()
                ));
            }
        }
        let label = format!("expr({src})");
        Ok(DatumSpec::analytic(label, class, move |c: &[f64]| compiled.eval(c)))
    }

    pub fn absorption(&self) -> Result<AbsorptionSpec, String> {
        let name = self.get("absorption", "name").unwrap_or("identity");
        let q = self.f64_key("absorption", "q")?;
        let c0 = self.f64_key("absorption", "c0")?;
        if name != "power" && (q.is_some() || c0.is_some()) {
            return Err("[absorption]: q and c0 only apply to name = power".into());
        }
        let base = if name == "power" {
            let q = q.ok_or("[absorption]: name = power needs q")?;
            AbsorptionSpec::power(q, c0.unwrap_or(1.0))
        } else {
            AbsorptionSpec::registry(name).ok_or_else(|| {
                format!("[absorption] name: unknown name '{name}' (known: identity, atan, zero, power)")
            })?
        };
        match self.f64_key("absorption", "cap")? {
            Some(cap) if cap > 0.0 => Ok(base.truncated(cap)),
            Some(cap) => Err(format!("[absorption] cap: must be positive, got {cap}")),
            None => Ok(base),
        }
    }

    pub fn newton(&self) -> Result<NewtonOptions, String> {
        let mut o = NewtonOptions::default();
        if let Some(v) = self.f64_key("solver", "residual_tol")? {
            o.residual_tol = v;
        }
        if let Some(v) = self.usize_key("solver", "max_iter")? {
            o.max_iter = v;
        }
        if let Some(v) = self.f64_key("solver", "backtrack")? {
            o.backtrack = v;
        }
        if let Some(v) = self.f64_key("solver", "min_step")? {
            o.min_step = v;
        }
        Ok(o)
    }

    pub fn schedule(&self) -> Result<ContinuationSchedule, String> {
        let kmax = self.usize_key("schedule", "kmax")?.unwrap_or(24) as u32;
        let stop = self.f64_key("schedule", "stop_tol")?.unwrap_or(1e-6);
        if stop <= 0.0 {
            return Err(format!("[schedule] stop_tol: must be positive, got {stop}"));
        }
        Ok(ContinuationSchedule::geometric(kmax, stop))
    }

    pub fn solver_p(&self) -> Result<Option<f64>, String> {
        self.f64_key("solver", "p")
    }

    pub fn seed(&self) -> Result<u64, String> {
        match self.get("solver", "seed") {
            None => Ok(0),
            Some(v) => v.parse().map_err(|_| format!("[solver] seed: not an integer: '{v}'")),
        }
    }
}
