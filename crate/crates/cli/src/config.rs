//! Flag and JSON-file inputs.
//!
//! Every subcommand's arguments are a struct of optional fields that is both a
//! clap `Args` and a serde type with the same names. The effective
//! configuration is the config file with every flag that was given laid on top.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use entropic_core::geometry::BodySpec;
use entropic_core::ConvexBody;
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

/// A body given inline or as a path to a JSON body file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BodySource {
    Inline(BodySpec),
    Path(PathBuf),
}

impl FromStr for BodySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim_start().starts_with('{') {
            serde_json::from_str(s).map(BodySource::Inline).map_err(|e| format!("inline body: {e}"))
        } else {
            Ok(BodySource::Path(PathBuf::from(s)))
        }
    }
}

impl BodySource {
    /// Relative paths are taken against `base`.
    pub fn resolve(self, base: &Path) -> Result<BodySpec, Failure> {
        match self {
            BodySource::Inline(spec) => Ok(spec),
            BodySource::Path(p) => {
                let path = if p.is_relative() { base.join(p) } else { p };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Failure::Config(format!("cannot read body file {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Failure::Config(format!("malformed body file {}: {e}", path.display())))
            }
        }
    }
}

/// A real vector written as a JSON array, e.g. `"[0, 0.5]"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(pub Vec<f64>);

impl FromStr for Vector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map(Vector).map_err(|e| format!("expected a JSON array of numbers: {e}"))
    }
}

impl Vector {
    pub fn to_dvector(&self, n: usize, name: &str) -> Result<DVector<f64>, Failure> {
        if self.0.len() != n {
            return Err(Failure::Config(format!("{name} has length {}, body dimension is {n}", self.0.len())));
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Failure::Config(format!("{name} has non-finite entries")));
        }
        Ok(DVector::from_column_slice(&self.0))
    }
}

/// Any JSON value given on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Json<T>(pub T);

impl<T: DeserializeOwned> FromStr for Json<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map(Json).map_err(|e| e.to_string())
    }
}

/// A backend as JSON or as the bare kind (`closed_form`, `grid_quadrature`, ...).
pub fn parse_backend(s: &str) -> Result<Json<entropic_core::Backend>, String> {
    let text = if s.trim_start().starts_with('{') { s.to_string() } else { format!("{{\"kind\": \"{s}\"}}") };
    serde_json::from_str(&text).map(Json).map_err(|e| format!("backend: {e}"))
}

/// The config file, if any, as a JSON object, with the directory that relative
/// paths inside it are resolved against.
pub struct ConfigFile {
    pub path: Option<PathBuf>,
    pub values: Map<String, Value>,
    pub base: PathBuf,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(ConfigFile { path: None, values: Map::new(), base: PathBuf::from(".") });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("malformed config {}: {e}", path.display())))?;
        let Value::Object(values) = value else {
            return Err(Failure::Config(format!("config {} must be a JSON object", path.display())));
        };
        let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(ConfigFile { path: Some(path.to_path_buf()), values, base })
    }

    /// Removes a shared key such as `out` or `jobs`.
    pub fn take<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, Failure> {
        match self.values.remove(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v).map(Some).map_err(|e| Failure::Config(format!("config key {key}: {e}"))),
        }
    }

    /// File values overridden by every flag that was given. Body paths from
    /// flags are made relative to the working directory, body paths from the
    /// file to the file's directory.
    pub fn merge<T: Serialize + DeserializeOwned>(self, flags: &T) -> Result<(T, PathBuf), Failure> {
        let Value::Object(given) = serde_json::to_value(flags).map_err(|e| Failure::Config(e.to_string()))? else {
            unreachable!("argument structs serialize to objects")
        };
        let mut merged = self.values;
        let mut base = self.base;
        for (key, value) in given {
            if value.is_null() {
                continue;
            }
            if key == "body" {
                base = PathBuf::from(".");
            }
            merged.insert(key, value);
        }
        let config = serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::Config(format!("config: {e}")))?;
        Ok((config, base))
    }
}

/// Builds the body and returns it with its inline description.
pub fn load_body(source: Option<BodySource>, base: &Path) -> Result<(ConvexBody, BodySpec), Failure> {
    let source = source.ok_or_else(|| Failure::Config("missing body (--body or \"body\" in the config)".into()))?;
    let spec = source.resolve(base)?;
    let body = ConvexBody::try_from(spec.clone())?;
    Ok((body, spec))
}
