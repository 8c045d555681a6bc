//! Experiment configuration: a TOML document with the sections `geometry`,
//! `exponents`, `weights`, `solver` and `options`, plus the top-level keys
//! `task`, `seed` and `output`. Missing optional keys take their defaults,
//! and the resolved value is echoed in full by the run report.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eigensolve::SolverConfig;
use crate::error::{Error, Result};
use crate::grid::{Geometry, GeometryMode, WeightDescriptor, WeightSpec};
use crate::modular::{Exponents, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Norms,
    SinglePhase,
    NehariScan,
    MinMax,
    PiconeAudit,
    ScalingLimit,
    Nonexistence,
    RSweep,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Norms,
        Task::SinglePhase,
        Task::NehariScan,
        Task::MinMax,
        Task::PiconeAudit,
        Task::ScalingLimit,
        Task::Nonexistence,
        Task::RSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Norms => "Norms",
            Task::SinglePhase => "SinglePhase",
            Task::NehariScan => "NehariScan",
            Task::MinMax => "MinMax",
            Task::PiconeAudit => "PiconeAudit",
            Task::ScalingLimit => "ScalingLimit",
            Task::Nonexistence => "Nonexistence",
            Task::RSweep => "RSweep",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Task::ALL.iter().map(|t| t.name()).collect();
                Error::config(
                    "task",
                    format!("unknown task `{s}`, expected one of {names:?}"),
                )
            })
    }
}

/// Multipliers of `μ̂₁` scanned by `Nonexistence` when none are given.
pub const NONEXISTENCE_MULTIPLIERS: [f64; 6] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.1];

/// Task parameters. Fields irrelevant to the chosen task are ignored.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskOptions {
    /// Eigenpairs requested from `SinglePhase` and `MinMax`.
    pub modes: usize,
    /// Scan points as multiples of `μ̂₁`.
    pub multipliers: Vec<f64>,
    /// Scan points as absolute values of `λ`.
    pub lambdas: Vec<f64>,
    /// Truncation radii for `RSweep`; the resolution scales with the radius.
    pub radii: Vec<f64>,
    /// Random fields for the norm suites.
    pub samples: usize,
    /// Random pairs for the Picone audit and the functional identities.
    pub pairs: usize,
    /// Random fields per functional for the gradient check.
    pub gradient_samples: usize,
    /// Regularizations at which gradients are checked.
    pub eps: Vec<f64>,
    /// `λ` used by the functional checks in `Norms`.
    pub lambda: f64,
    /// Constant in the integrated monotonicity bound.
    pub monotonicity_c: f64,
    pub dump_fields: bool,
    /// Rerun the task and compare `results.csv` bytes.
    pub check_determinism: bool,
}

impl Default for TaskOptions {
    fn default() -> Self {
        Self {
            modes: 2,
            multipliers: Vec::new(),
            lambdas: Vec::new(),
            radii: Vec::new(),
            samples: 200,
            pairs: 100,
            gradient_samples: 20,
            eps: vec![1e-4, 1e-6],
            lambda: 1.0,
            monotonicity_c: 4.0,
            dump_fields: true,
            check_determinism: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub output: PathBuf,
    pub geometry: Geometry,
    pub exponents: Exponents,
    pub weights: WeightSpec,
    pub solver: SolverConfig,
    pub options: TaskOptions,
}

// Raw document: every key optional so that missing ones can be named.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Option<String>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    geometry: Option<RawGeometry>,
    exponents: Option<RawExponents>,
    weights: Option<RawWeights>,
    solver: Option<toml::Value>,
    options: Option<RawOptions>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    mode: Option<GeometryMode>,
    radius: Option<f64>,
    resolution: Option<usize>,
    dimension: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExponents {
    p: Option<f64>,
    q: Option<f64>,
    r: Option<f64>,
    #[serde(rename = "N")]
    n: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawWeights {
    a: Option<toml::Value>,
    m1: Option<toml::Value>,
    m2: Option<toml::Value>,
    omega_exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawOptions {
    modes: Option<usize>,
    multipliers: Option<Vec<f64>>,
    lambdas: Option<Vec<f64>>,
    radii: Option<Vec<f64>>,
    samples: Option<usize>,
    pairs: Option<usize>,
    gradient_samples: Option<usize>,
    eps: Option<Vec<f64>>,
    lambda: Option<f64>,
    monotonicity_c: Option<f64>,
    dump_fields: Option<bool>,
    check_determinism: Option<bool>,
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub task: Option<Task>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn required<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(field, "missing required key"))
}

fn descriptor(v: Option<toml::Value>, field: &str) -> Result<Option<WeightDescriptor>> {
    v.map(|v| {
        v.try_into()
            .map_err(|e: toml::de::Error| Error::config(field, e.message().to_string()))
    })
    .transpose()
}

impl ExperimentConfig {
    pub fn from_path(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("document", e.message().to_string()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().message().to_string()))?;
        let cfg = Self::resolve(raw, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<Self> {
        let task = match overrides.task {
            Some(t) => t,
            None => required(raw.task, "task")?.parse()?,
        };
        let seed = overrides.seed.or(raw.seed).unwrap_or(0);
        let output = overrides
            .output
            .clone()
            .or(raw.output)
            .unwrap_or_else(|| PathBuf::from("out"));

        let e = required(raw.exponents, "exponents")?;
        let q = required(e.q, "exponents.q")?;
        let exponents = Exponents {
            p: required(e.p, "exponents.p")?,
            q,
            r: e.r.unwrap_or(q),
            n: required(e.n, "exponents.N")?,
        };

        let gm = required(raw.geometry, "geometry")?;
        let dimension = gm.dimension.unwrap_or(exponents.n);
        if dimension != exponents.n {
            return Err(Error::config(
                "geometry.dimension",
                format!("{dimension} differs from exponents.N = {}", exponents.n),
            ));
        }
        let geometry = Geometry {
            mode: gm.mode.unwrap_or(GeometryMode::Interval1D),
            dimension,
            radius: required(gm.radius, "geometry.radius")?,
            resolution: required(gm.resolution, "geometry.resolution")?,
        };

        let w = required(raw.weights, "weights")?;
        let weights = WeightSpec {
            a: required(descriptor(w.a, "weights.a")?, "weights.a")?,
            m1: required(descriptor(w.m1, "weights.m1")?, "weights.m1")?,
            m2: descriptor(w.m2, "weights.m2")?.unwrap_or(WeightDescriptor::constant(0.0)),
            omega_exponent: w.omega_exponent.unwrap_or(q),
        };

        let mut solver: SolverConfig = match raw.solver {
            Some(v) => v
                .try_into()
                .map_err(|e: toml::de::Error| Error::config("solver", e.message().to_string()))?,
            None => SolverConfig::default(),
        };
        solver.seed = seed;

        let o = raw.options.unwrap_or_default();
        let d = TaskOptions::default();
        let options = TaskOptions {
            modes: o.modes.unwrap_or(match task {
                Task::MinMax => 3,
                _ => d.modes,
            }),
            multipliers: o.multipliers.unwrap_or_else(|| match task {
                Task::Nonexistence => NONEXISTENCE_MULTIPLIERS.to_vec(),
                Task::RSweep => vec![1.5],
                _ => Vec::new(),
            }),
            lambdas: o.lambdas.unwrap_or_default(),
            radii: o.radii.unwrap_or_default(),
            samples: o.samples.unwrap_or(d.samples),
            pairs: o.pairs.unwrap_or(d.pairs),
            gradient_samples: o.gradient_samples.unwrap_or(d.gradient_samples),
            eps: o.eps.unwrap_or(d.eps),
            lambda: o.lambda.unwrap_or(d.lambda),
            monotonicity_c: o.monotonicity_c.unwrap_or(d.monotonicity_c),
            dump_fields: o.dump_fields.unwrap_or(d.dump_fields),
            check_determinism: o.check_determinism.unwrap_or(d.check_determinism),
        };

        Ok(Self {
            task,
            seed,
            output,
            geometry,
            exponents,
            weights,
            solver,
            options,
        })
    }

    /// Field-level validation, including the regime each task needs.
    pub fn validate(&self) -> Result<()> {
        let field = |f: &'static str| move |e: Error| Error::config(f, e.to_string());
        self.exponents.validate().map_err(field("exponents"))?;
        self.geometry.validate().map_err(field("geometry"))?;
        self.solver.validate()?;
        if !(self.weights.omega_exponent > 0.0) {
            return Err(Error::config("weights.omegaExponent", "must be > 0"));
        }

        let o = &self.options;
        let regime = self.exponents.regime();
        let need = |want: Regime, what: &str| {
            if regime == want {
                Ok(())
            } else {
                Err(Error::config(
                    "exponents",
                    format!("task {} needs {what}", self.task),
                ))
            }
        };
        match self.task {
            Task::NehariScan => {
                need(Regime::PLessQ, "p < q")?;
                if o.multipliers.is_empty() && o.lambdas.is_empty() {
                    return Err(Error::config(
                        "options",
                        "NehariScan needs `multipliers` or `lambdas`",
                    ));
                }
            }
            Task::Nonexistence => {
                need(Regime::PLessQ, "p < q")?;
                if o.multipliers.is_empty() {
                    return Err(Error::config("options.multipliers", "must not be empty"));
                }
            }
            Task::MinMax => need(Regime::QLessP, "q < p")?,
            Task::RSweep => {
                if o.radii.is_empty() {
                    return Err(Error::config("options.radii", "RSweep needs radii"));
                }
                if o.radii.iter().any(|r| !(*r > 0.0)) {
                    return Err(Error::config("options.radii", "radii must be positive"));
                }
                if regime == Regime::PLessQ && o.multipliers.is_empty() {
                    return Err(Error::config("options.multipliers", "must not be empty"));
                }
            }
            _ => {}
        }
        if o.modes < 1 {
            return Err(Error::config("options.modes", "must be ≥ 1"));
        }
        if o.multipliers.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::config(
                "options.multipliers",
                "must be finite and ≥ 0",
            ));
        }
        if o.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(Error::config("options.lambdas", "must be finite and ≥ 0"));
        }
        if o.samples < 1 {
            return Err(Error::config("options.samples", "must be ≥ 1"));
        }
        if o.pairs < 1 {
            return Err(Error::config("options.pairs", "must be ≥ 1"));
        }
        if o.gradient_samples < 1 {
            return Err(Error::config("options.gradientSamples", "must be ≥ 1"));
        }
        if o.eps.is_empty() || o.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::config(
                "options.eps",
                "must be a nonempty list of positive values",
            ));
        }
        if !(o.lambda >= 0.0) {
            return Err(Error::config("options.lambda", "must be ≥ 0"));
        }
        if !(o.monotonicity_c > 0.0) {
            return Err(Error::config("options.monotonicityC", "must be > 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
task = "MinMax"
seed = 7

[geometry]
radius = 8.0
resolution = 64

[exponents]
p = 3.0
q = 2.0
N = 4

[weights.a]
kind = "compact_bump"
amplitude = 1.0
radius = 6.0

[weights.m1]
kind = "gaussian"
amplitude = 1.0
width = 1.0
"#;

    #[test]
    fn defaults_are_filled_in() {
        let c = ExperimentConfig::from_toml(BASE, &Overrides::default()).unwrap();
        assert_eq!(c.task, Task::MinMax);
        assert_eq!(c.exponents.r, 2.0);
        assert_eq!(c.weights.omega_exponent, 2.0);
        assert_eq!(c.weights.m2, WeightDescriptor::constant(0.0));
        assert_eq!(c.geometry.mode, GeometryMode::Interval1D);
        assert_eq!(c.geometry.dimension, 4);
        assert_eq!(c.solver.seed, 7);
        assert_eq!(c.options.modes, 3);
        let echo = serde_json::to_value(&c).unwrap();
        assert_eq!(echo["solver"]["restarts"], 4);
        assert_eq!(echo["options"]["monotonicityC"], 4.0);
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            task: Some(Task::PiconeAudit),
            output: Some("elsewhere".into()),
            seed: Some(3),
        };
        let c = ExperimentConfig::from_toml(BASE, &o).unwrap();
        assert_eq!((c.task, c.seed, c.solver.seed), (Task::PiconeAudit, 3, 3));
        assert_eq!(c.output, PathBuf::from("elsewhere"));
    }

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_toml(text, &Overrides::default()) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&BASE.replace("N = 4", "")), "exponents.N");
        assert_eq!(field_of(&BASE.replace("MinMax", "NehariScan")), "exponents");
        assert_eq!(field_of(&BASE.replace("MinMax", "Bogus")), "task");
        assert_eq!(field_of(&BASE.replace("width = 1.0", "")), "weights.m1");
        assert_eq!(
            field_of(&format!("{BASE}\n[solver]\nrestarts = 0\n")),
            "solver.restarts"
        );
        assert_eq!(
            field_of(&format!("{BASE}\n[options]\nmodes = 0\n")),
            "options.modes"
        );
        assert_eq!(
            field_of(&BASE.replace("radius = 8.0", "radius = 8.0\ndimension = 3")),
            "geometry.dimension"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("[geometry]", "[geometry]\nradiuss = 1.0");
        assert_eq!(field_of(&text), "geometry.radiuss");
    }

    #[test]
    fn task_names_parse_case_insensitively() {
        for t in Task::ALL {
            assert_eq!(t.name().to_lowercase().parse::<Task>().unwrap(), t);
        }
    }
}
