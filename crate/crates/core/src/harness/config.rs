//! Declarative experiment configuration: one text file of
//! `key = value` entries grouped into per-module sections, every default
//! stated, bit-exact through a serialize/parse round trip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial interface profiles `theta -> r(theta)`, written in configs as
/// `"circle 0.5"`, `"ellipse 0.6 0.4"`, `"star 0.35 0.1 3"` or
/// `"square 0.45"`.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeProfile {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// `base + amplitude * cos(lobes * theta)`.
    Star { base: f64, amplitude: f64, lobes: u32 },
    /// Axis-aligned square with kinks, for the regularization schedule.
    Square { half_side: f64 },
}

impl ShapeProfile {
    pub fn radius(&self, theta: f64) -> f64 {
        match *self {
            ShapeProfile::Circle { radius } => radius,
            ShapeProfile::Ellipse { a, b } => {
                a * b / ((b * theta.cos()).powi(2) + (a * theta.sin()).powi(2)).sqrt()
            }
            ShapeProfile::Star { base, amplitude, lobes } => {
                base + amplitude * (lobes as f64 * theta).cos()
            }
            ShapeProfile::Square { half_side } => {
                half_side / theta.cos().abs().max(theta.sin().abs())
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let bad = || Error::Config(format!("cannot parse shape profile {text:?}"));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["circle", r] => Ok(ShapeProfile::Circle { radius: num(r)? }),
            ["ellipse", a, b] => Ok(ShapeProfile::Ellipse { a: num(a)?, b: num(b)? }),
            ["star", base, amp, lobes] => Ok(ShapeProfile::Star {
                base: num(base)?,
                amplitude: num(amp)?,
                lobes: lobes.parse().map_err(|_| bad())?,
            }),
            ["square", s] => Ok(ShapeProfile::Square { half_side: num(s)? }),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for ShapeProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ShapeProfile::Circle { radius } => write!(f, "circle {radius}"),
            ShapeProfile::Ellipse { a, b } => write!(f, "ellipse {a} {b}"),
            ShapeProfile::Star { base, amplitude, lobes } => {
                write!(f, "star {base} {amplitude} {lobes}")
            }
            ShapeProfile::Square { half_side } => write!(f, "square {half_side}"),
        }
    }
}

impl Serialize for ShapeProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ShapeProfile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        ShapeProfile::parse(&text).map_err(serde::de::Error::custom)
    }
}

macro_rules! section {
    ($name:ident { $($(#[$meta:meta])* $field:ident : $ty:ty = $default:expr),+ $(,)? }) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $( $(#[$meta])* pub $field: $ty, )+
        }
        impl Default for $name {
            fn default() -> Self {
                Self { $( $field: $default, )+ }
            }
        }
    };
}

section!(ModelSection {
    /// Diffusivity outside the interface.
    k1: f64 = 1.0,
    /// Diffusivity inside the interface.
    k2: f64 = 0.001,
    final_time: f64 = 20.0,
    n_steps: usize = 30,
});

section!(RegularizationSection {
    /// Perimeter weight after the decay phase.
    mu: f64 = 1e-6,
    /// Initial perimeter weight for non-smooth starts.
    mu_init: f64 = 0.01,
    /// Iterations over which mu decays geometrically from mu_init to mu;
    /// zero disables the schedule.
    decay_iters: usize = 0,
});

section!(ElasticitySection {
    /// Young's modulus; stiffness of the mesh deformation, the primary
    /// step-size control.
    young: f64 = 0.1,
    poisson: f64 = 0.01,
});

section!(SobolevSection {
    /// Laplace-Beltrami smoothing weight of the surface metric.
    a_param: f64 = 0.01,
});

section!(MeshSection {
    edge_length: f64 = 0.1,
    /// Target-data mesh resolution; differs from `edge_length` so the
    /// observation always transfers between non-matching grids.
    target_edge_length: f64 = 0.08,
    initial_shape: ShapeProfile = ShapeProfile::Ellipse { a: 0.6, b: 0.4 },
    target_shape: ShapeProfile = ShapeProfile::Circle { radius: 0.5 },
});

section!(OptimizerSection {
    method: String = "lbfgs".to_string(),
    /// Gradients kept in l-BFGS memory.
    memory: usize = 3,
    max_iterations: usize = 30,
    /// Stop when the metric gradient norm falls below this.
    grad_tol: f64 = 1e-8,
    /// Armijo backtracking on top of the stiffness-controlled step; turn
    /// off for the fixed-step mode.
    armijo: bool = true,
    /// Restrict the volume-form load to interface-patch test functions.
    restrict: bool = true,
    /// Assert the representation identity a(U,V) = DJ[V] every iteration.
    metric_check: bool = true,
});

section!(SolverSection {
    pcg_tol: f64 = 1e-10,
});

section!(OutputSection {
    directory: String = "out".to_string(),
    seed: u64 = 42,
});

/// Full experiment configuration; defaults reproduce the reference setup.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub regularization: RegularizationSection,
    pub elasticity: ElasticitySection,
    pub sobolev: SobolevSection,
    pub mesh: MeshSection,
    pub optimizer: OptimizerSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serialize: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("parse: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Applies `section.key=value` overrides; the value is parsed with the
    /// type the field already has.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut value: toml::Value =
            toml::from_str(&self.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
        for entry in overrides {
            let (path, raw) = entry
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {entry:?} is not key=value")))?;
            let path = path.trim();
            let raw = raw.trim();
            let mut cursor = &mut value;
            let mut segments = path.split('.').peekable();
            loop {
                let seg = segments
                    .next()
                    .ok_or_else(|| Error::Config(format!("empty override path {path:?}")))?;
                let table = cursor
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("{path:?} does not address a table")))?;
                let slot = table
                    .get_mut(seg)
                    .ok_or_else(|| Error::Config(format!("unknown config key {path:?}")))?;
                if segments.peek().is_none() {
                    *slot = parse_typed(slot, raw)?;
                    break;
                }
                cursor = slot;
            }
        }
        let text = toml::to_string(&value).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_toml(&text)
    }
}

fn parse_typed(existing: &toml::Value, raw: &str) -> Result<toml::Value> {
    use toml::Value;
    let bad = |what: &str| Error::Config(format!("cannot parse {raw:?} as {what}"));
    Ok(match existing {
        Value::Boolean(_) => Value::Boolean(raw.parse().map_err(|_| bad("bool"))?),
        Value::Integer(_) => Value::Integer(raw.parse().map_err(|_| bad("integer"))?),
        Value::Float(_) => Value::Float(raw.parse().map_err(|_| bad("float"))?),
        Value::String(_) => Value::String(raw.to_string()),
        other => {
            return Err(Error::Config(format!(
                "cannot override entries of type {}",
                other.type_str()
            )))
        }
    })
}
