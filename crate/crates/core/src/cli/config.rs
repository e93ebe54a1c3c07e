use faer::{c64, Mat};
use serde::Deserialize;

use crate::discretize::{Discretization, Grid};
use crate::potentials::{catalog_with, CatalogParams, OperatorFamily, PotentialSpec};
use crate::stability::{Restriction, Side};
use crate::{Error, Result};

/// Energy ceiling used to size the default finite-difference grid.
pub const DEFAULT_E_MAX: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Spectrum,
    Track,
    Rspe,
    Project,
    Stability,
    Numrange,
    Verify,
    Audit,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::Track => "track",
            Task::Rspe => "rspe",
            Task::Project => "project",
            Task::Stability => "stability",
            Task::Numrange => "numrange",
            Task::Verify => "verify",
            Task::Audit => "audit",
        }
    }
}

/// A real number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(&self) -> c64 {
        match *self {
            ComplexValue::Real(r) => c64::new(r, 0.0),
            ComplexValue::Pair([re, im]) => c64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Value(f64),
    Uniform { max: f64, steps: usize },
    List { values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSchrodinger {
    pub v: PotentialSpec,
    pub w: PotentialSpec,
    pub epsilon_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineMatrix {
    pub h0: Vec<Vec<ComplexValue>>,
    pub w: Vec<Vec<ComplexValue>>,
    pub p: Vec<Vec<f64>>,
    pub epsilon_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FamilyConfig {
    Name(String),
    Catalog {
        catalog: String,
        #[serde(default)]
        params: CatalogParams,
    },
    Schrodinger {
        schrodinger: InlineSchrodinger,
    },
    Matrix {
        matrix: InlineMatrix,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RestrictionConfig {
    Full,
    AbsGreater { cut: f64 },
    Greater { cut: f64 },
    Less { cut: f64 },
}

impl RestrictionConfig {
    pub fn restriction(&self) -> Restriction {
        match *self {
            RestrictionConfig::Full => Restriction::Full,
            RestrictionConfig::AbsGreater { cut } => Restriction::AbsGreater(cut),
            RestrictionConfig::Greater { cut } => Restriction::Greater(cut),
            RestrictionConfig::Less { cut } => Restriction::Less(cut),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideConfig {
    Both,
    Plus,
    Minus,
}

impl SideConfig {
    pub fn side(&self) -> Side {
        match self {
            SideConfig::Both => Side::Both,
            SideConfig::Plus => Side::Plus,
            SideConfig::Minus => Side::Minus,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub task: Task,
    #[serde(default)]
    pub discretization: Option<Discretization>,
    /// Second resolution for error estimates (`convergence_gap`, series drift).
    #[serde(default)]
    pub coarse_discretization: Option<Discretization>,
    #[serde(default)]
    pub epsilon: Option<EpsilonSpec>,
    /// Strictly decreasing positive ε values for `stability`.
    #[serde(default)]
    pub epsilons: Option<Vec<f64>>,
    #[serde(rename = "E", default)]
    pub e: Option<ComplexValue>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub n_angles: Option<usize>,
    #[serde(default)]
    pub restriction: Option<RestrictionConfig>,
    #[serde(default)]
    pub z: Option<ComplexValue>,
    #[serde(default)]
    pub cuts: Option<Vec<f64>>,
    #[serde(default)]
    pub side: Option<SideConfig>,
    /// `[lo, hi]` for locating an exceptional point during `track`.
    #[serde(default)]
    pub interval: Option<[f64; 2]>,
    #[serde(default)]
    pub pair: Option<[usize; 2]>,
    /// Criterion ids for `verify`.
    #[serde(default)]
    pub only: Option<Vec<u32>>,
    /// Prefix of the emitted files (default: the task name).
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Parses a config, reporting the byte offset of syntax errors and the JSON
/// path of schema violations.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            let offset = byte_offset(text, inner.line(), inner.column());
            Error::Config(format!("parse error at byte {offset} (line {}, column {}): {inner}", inner.line(), inner.column()))
        } else {
            Error::Config(format!("schema error at `{path}`: {inner}"))
        }
    })?;
    de.end().map_err(|e| {
        let offset = byte_offset(text, e.line(), e.column());
        Error::Config(format!("parse error at byte {offset}: trailing characters"))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::Config(format!("`{name}` must be positive, got {x}"))),
        _ => Ok(()),
    }
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        positive("tol", self.tol)?;
        positive("r", self.r)?;
        if let Some(EpsilonSpec::List { values }) = &self.epsilon {
            if self.task == Task::Track {
                if values.first() != Some(&0.0) || values.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("`epsilon.values` must increase strictly from 0".into()));
                }
            }
        }
        if let Some(EpsilonSpec::Uniform { max, steps }) = &self.epsilon {
            if !(*max > 0.0) || *steps == 0 {
                return Err(Error::Config("`epsilon` grid needs max > 0 and steps ≥ 1".into()));
            }
        }
        if let Some(eps) = &self.epsilons {
            if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::Config("`epsilons` must be positive and strictly decreasing".into()));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<OperatorFamily> {
        Ok(match &self.family {
            FamilyConfig::Name(name) => catalog_with(name, &CatalogParams::default())?,
            FamilyConfig::Catalog { catalog, params } => catalog_with(catalog, params)?,
            FamilyConfig::Schrodinger { schrodinger: s } => {
                OperatorFamily::schrodinger(s.v.clone(), s.w.clone(), s.epsilon_max).named("inline")
            }
            FamilyConfig::Matrix { matrix: m } => {
                let cm = |rows: &Vec<Vec<ComplexValue>>, label: &str| -> Result<crate::CMat> {
                    let n = rows.len();
                    if rows.iter().any(|r| r.len() != n) {
                        return Err(Error::Config(format!("`family.matrix.{label}` must be square")));
                    }
                    Ok(Mat::from_fn(n, n, |i, j| rows[i][j].value()))
                };
                let n = m.p.len();
                if m.p.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("`family.matrix.p` must be square".into()));
                }
                let p = Mat::from_fn(n, n, |i, j| m.p[i][j]);
                OperatorFamily::matrix(cm(&m.h0, "h0")?, cm(&m.w, "w")?, p, m.epsilon_max)?.named("inline")
            }
        })
    }

    /// The configured discretization, or an automatic grid for Schrödinger families.
    pub fn discretization(&self, family: &OperatorFamily) -> Result<Option<Discretization>> {
        if family.schrodinger_family().is_none() {
            return Ok(None);
        }
        match self.discretization {
            Some(d) => Ok(Some(d)),
            None => Ok(Some(Discretization::FiniteDifference(Grid::auto(family, family.epsilon_max, DEFAULT_E_MAX)?))),
        }
    }

    /// Single ε for tasks evaluated at one parameter value.
    pub fn single_epsilon(&self) -> Result<f64> {
        match &self.epsilon {
            None => Ok(0.0),
            Some(EpsilonSpec::Value(v)) => Ok(*v),
            Some(_) => Err(Error::Config(format!("task `{}` needs a single `epsilon` value", self.task.as_str()))),
        }
    }

    pub fn epsilon_grid(&self, family: &OperatorFamily) -> Result<Vec<f64>> {
        match &self.epsilon {
            None => Ok(crate::perturbation::uniform_grid(family.epsilon_max, 20)),
            Some(EpsilonSpec::Uniform { max, steps }) => Ok(crate::perturbation::uniform_grid(*max, *steps)),
            Some(EpsilonSpec::List { values }) => Ok(values.clone()),
            Some(EpsilonSpec::Value(_)) => Err(Error::Config("`epsilon` for track must be a grid".into())),
        }
    }

    pub fn require_e(&self) -> Result<c64> {
        self.e.map(|v| v.value()).ok_or_else(|| Error::Config(format!("task `{}` needs `E`", self.task.as_str())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_track_config() {
        let c = parse_config(r#"{"family":"jordan2x2","task":"track","epsilon":{"max":1,"steps":100}}"#).unwrap();
        assert_eq!(c.task, Task::Track);
        assert_eq!(c.epsilon, Some(EpsilonSpec::Uniform { max: 1.0, steps: 100 }));
        assert!(c.family().unwrap().matrix_family().is_some());
    }

    #[test]
    fn syntax_error_reports_byte_offset() {
        let text = "{\"family\": \"gap2x2\",\n \"task\": spectrum}";
        let e = parse_config(text).unwrap_err().to_string();
        assert!(e.contains("byte 30"), "{e}");
    }

    #[test]
    fn schema_error_reports_path() {
        let e = parse_config(r#"{"family":"gap2x2","task":"spectrum","discretization":{"method":"basis","n_modes":"x","omega":1}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("discretization"), "{e}");
        let e = parse_config(r#"{"family":"gap2x2","task":"spectrum","tol":-1}"#).unwrap_err().to_string();
        assert!(e.contains("tol"), "{e}");
    }

    #[test]
    fn inline_families() {
        let c = parse_config(
            r#"{"family":{"schrodinger":{"v":{"even":[{"kind":"monomial","coefficient":1,"power":2}]},"w":{"odd":[{"kind":"monomial","coefficient":1,"power":3}]},"epsilon_max":0.1}},"task":"spectrum"}"#,
        )
        .unwrap();
        assert!(c.family().unwrap().schrodinger_family().is_some());
        let c = parse_config(
            r#"{"family":{"matrix":{"h0":[[0,0],[0,2]],"w":[[0,[0,1]],[[0,1],0]],"p":[[1,0],[0,-1]],"epsilon_max":2}},"task":"spectrum"}"#,
        )
        .unwrap();
        assert_eq!(c.family().unwrap().matrix_family().unwrap().dim(), 2);
    }
}
