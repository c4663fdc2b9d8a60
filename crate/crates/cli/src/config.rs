//! JSON configuration merged with command-line flags.
//!
//! Every command has a config struct whose fields match its flags by name.
//! Resolution starts from the documented defaults, overlays the config
//! file, then overlays every flag that was given.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use elastic_lens::model::Mode;
use elastic_lens::sim::Edge;

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (_, Value::Null) => {}
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults, then `file`, then the non-null fields of `flags`.
pub fn resolve<C>(file: Option<&Path>, flags: &impl Serialize) -> anyhow::Result<C>
where
    C: Default + Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(C::default())?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let doc: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if !doc.is_object() {
            bail!("config {} must be a JSON object", path.display());
        }
        overlay(&mut value, doc);
    }
    overlay(&mut value, serde_json::to_value(flags)?);
    serde_json::from_value(value).map_err(|e| anyhow!("invalid configuration: {e}"))
}

pub fn required<'a, T>(v: &'a Option<T>, name: &str) -> anyhow::Result<&'a T> {
    v.as_ref().ok_or_else(|| anyhow!("missing required setting '{name}'"))
}

/// Two comma-separated numbers.
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("'{x}' is not a number")))
        .collect::<Result<_, _>>()?;
    <[f64; 2]>::try_from(v).map_err(|_| format!("expected two comma-separated numbers, got '{s}'"))
}

pub fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "p" | "P" => Ok(Mode::P),
        "s" | "S" => Ok(Mode::S),
        _ => Err(format!("mode must be p or s, got '{s}'")),
    }
}

/// `key=value` list where a bare value continues the previous key, so that
/// `pol=0.7,0.7` stays one entry.
pub fn parse_keyed(s: &str) -> Result<Vec<(String, Vec<String>)>, String> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match tok.split_once('=') {
            Some((k, v)) => out.push((k.trim().to_string(), vec![v.trim().to_string()])),
            None => match out.last_mut() {
                Some((_, vals)) => vals.push(tok.to_string()),
                None => return Err(format!("'{tok}' has no key")),
            },
        }
    }
    Ok(out)
}

fn one_number(key: &str, vals: &[String]) -> Result<f64, String> {
    match vals {
        [v] => v.parse().map_err(|_| format!("{key}: '{v}' is not a number")),
        _ => Err(format!("{key} takes one value")),
    }
}

fn edge_name(v: &[String]) -> Result<Edge, String> {
    match v {
        [e] => e.parse().map_err(|e: elastic_lens::Error| e.to_string()),
        _ => Err(format!("edge takes one value, got '{}'", v.join(","))),
    }
}

/// Boundary source patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub edge: Edge,
    pub center: f64,
    pub width: f64,
    /// Length of each cos² ramp; half the width when absent.
    #[serde(default)]
    pub taper: Option<f64>,
    pub f0: f64,
    pub pol: [f64; 2],
}

impl std::str::FromStr for SourceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (mut edge, mut center, mut width, mut taper, mut f0, mut pol) = (None, None, None, None, None, None);
        for (k, v) in parse_keyed(s)? {
            match k.as_str() {
                "edge" => edge = Some(edge_name(&v)?),
                "center" => center = Some(one_number(&k, &v)?),
                "width" => width = Some(one_number(&k, &v)?),
                "taper" => taper = Some(one_number(&k, &v)?),
                "f0" => f0 = Some(one_number(&k, &v)?),
                "pol" => {
                    pol = Some(parse_pair(&v.join(","))?);
                }
                _ => return Err(format!("unknown source key '{k}'")),
            }
        }
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| format!("source needs {k}="));
        Ok(Self {
            edge: edge.ok_or("source needs edge=")?,
            center: need(center, "center")?,
            width: need(width, "width")?,
            taper,
            f0: need(f0, "f0")?,
            pol: pol.ok_or("source needs pol=")?,
        })
    }
}

/// Receivers evenly spaced along one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub edge: Edge,
    pub count: usize,
    /// Edge coordinates of the first and last receiver; without them the
    /// receivers split the edge into `count + 1` equal parts.
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub to: Option<f64>,
}

impl std::str::FromStr for ReceiverSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (mut edge, mut count, mut from, mut to) = (None, None, None, None);
        for (k, v) in parse_keyed(s)? {
            match k.as_str() {
                "edge" => edge = Some(edge_name(&v)?),
                "count" => {
                    let n = one_number(&k, &v)?;
                    if n < 1.0 || n.fract() != 0.0 {
                        return Err(format!("count must be a positive integer, got {n}"));
                    }
                    count = Some(n as usize);
                }
                "from" => from = Some(one_number(&k, &v)?),
                "to" => to = Some(one_number(&k, &v)?),
                _ => return Err(format!("unknown receiver key '{k}'")),
            }
        }
        Ok(Self { edge: edge.ok_or("receivers need edge=")?, count: count.ok_or("receivers need count=")?, from, to })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        a: f64,
        b: Option<String>,
        inner: Inner,
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Inner {
        x: usize,
        y: usize,
    }

    impl Default for Inner {
        fn default() -> Self {
            Self { x: 1, y: 2 }
        }
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"a": 3.0, "inner": {"y": 7}}"#).unwrap();
        let flags = serde_json::json!({"a": null, "b": "given"});
        let c: Demo = resolve(Some(&path), &flags).unwrap();
        assert_eq!(c, Demo { a: 3.0, b: Some("given".into()), inner: Inner { x: 1, y: 7 } });
        let flags = serde_json::json!({"a": 5.0});
        let c: Demo = resolve(Some(&path), &flags).unwrap();
        assert_eq!(c.a, 5.0);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"typo": 1}"#).unwrap();
        assert!(resolve::<Demo>(Some(&path), &serde_json::json!({})).is_err());
    }

    #[test]
    fn source_strings() {
        let s: SourceSpec = "edge=left,center=0.5,width=0.1,f0=20,pol=0.6,0.8".parse().unwrap();
        assert_eq!(s.edge, Edge::Left);
        assert_eq!(s.pol, [0.6, 0.8]);
        assert_eq!(s.taper, None);
        assert!("edge=left,center=0.5".parse::<SourceSpec>().is_err());
        assert!("edge=middle,center=0.5,width=0.1,f0=1,pol=1,0".parse::<SourceSpec>().is_err());
        let r: ReceiverSpec = "edge=right,count=16".parse().unwrap();
        assert_eq!((r.count, r.from), (16, None));
        assert!("edge=right,count=1.5".parse::<ReceiverSpec>().is_err());
    }

    #[test]
    fn pairs() {
        assert_eq!(parse_pair("0.1, 1").unwrap(), [0.1, 1.0]);
        assert!(parse_pair("1").is_err());
        assert!(parse_pair("a,b").is_err());
    }
}
