//! Strict key-value experiment configuration: `key = value` lines, `#`
//! comments, no unknown keys (typo safety), errors with line numbers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    FixedBox,
    Comoving,
}

#[derive(Debug, Clone)]
pub enum InitialData {
    Gaussian {
        epsilon: f64,
        width: f64,
    },
    /// CSV of `x,re,im` rows sampling `f_1` on the run grid's x nodes.
    Tabulated {
        path: PathBuf,
    },
}

/// Everything a `simulate` run needs; the oracle subcommand has its own
/// section sharing the same file format.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub engine: Engine,
    pub lambdas: Vec<f64>,
    pub initial: InitialData,
    pub grid_n: usize,
    pub grid_half_width: f64,
    pub t_end: f64,
    pub dt_base: f64,
    pub dsigma: f64,
    pub output_ratio: f64,
    pub extra_outputs: Vec<f64>,
    pub fit_t_min: Option<f64>,
    pub fit_t_max: Option<f64>,
    pub expansion_order: usize,
    pub richardson_check: bool,
    /// Canonical text used for the run-directory hash.
    pub canonical: String,
}

/// Oracle-table parameters (the `oracle.*` section).
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub amplitude: f64,
    pub width: f64,
    pub t_list: Vec<f64>,
    pub xi_samples: Vec<f64>,
    pub eta_node_cap: usize,
    pub grid_n: usize,
    pub grid_half_width: f64,
    pub canonical: String,
}

const KNOWN_KEYS: &[&str] = &[
    "engine",
    "nonlinearity.lambdas",
    "initial.family",
    "initial.epsilon",
    "initial.width",
    "initial.path",
    "grid.n",
    "grid.half_width",
    "time.t_end",
    "time.dt_base",
    "time.dsigma",
    "time.output_ratio",
    "time.extra_outputs",
    "expansion.fit_t_min",
    "expansion.fit_t_max",
    "expansion.order",
    "richardson_check",
    "oracle.amplitude",
    "oracle.width",
    "oracle.t_list",
    "oracle.xi_samples",
    "oracle.eta_node_cap",
];

struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
    canonical: String,
}

fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let mut entries = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            err(
                Some(line_no),
                format!("expected 'key = value', got {line:?}"),
            )
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(err(Some(line_no), format!("unknown key {key:?}")));
        }
        if entries.insert(key.clone(), (line_no, value)).is_some() {
            return Err(err(Some(line_no), format!("duplicate key {key:?}")));
        }
    }
    let canonical = entries
        .iter()
        .map(|(k, (_, v))| format!("{k} = {v}\n"))
        .collect();
    Ok(RawConfig { entries, canonical })
}

impl RawConfig {
    fn take(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn required(&self, key: &str) -> Result<(usize, &str), ConfigError> {
        self.take(key)
            .ok_or_else(|| err(None, format!("missing required key {key:?}")))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            Some((line, v)) => v
                .parse()
                .map_err(|_| err(Some(line), format!("{key}: not a number: {v:?}"))),
            None => Ok(default),
        }
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| err(Some(line), format!("{key}: not a number: {v:?}"))),
            None => Ok(None),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            Some((line, v)) => v
                .parse()
                .map_err(|_| err(Some(line), format!("{key}: not an integer: {v:?}"))),
            None => Ok(default),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.take(key) {
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| err(Some(line), format!("{key}: bad number {s:?}")))
                })
                .collect(),
            None => Ok(Vec::new()),
        }
    }
}

pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw = parse_raw(text)?;
    let engine = match raw.take("engine") {
        Some((_, "box")) => Engine::FixedBox,
        Some((_, "comoving")) => Engine::Comoving,
        Some((line, other)) => {
            return Err(err(
                Some(line),
                format!("engine must be 'box' or 'comoving', got {other:?}"),
            ))
        }
        None => Engine::FixedBox,
    };
    let (lline, lam_text) = raw.required("nonlinearity.lambdas")?;
    let lambdas: Vec<f64> = lam_text
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| err(Some(lline), format!("bad lambda {s:?}")))
        })
        .collect::<Result<_, _>>()?;

    let initial = match raw.take("initial.family") {
        Some((_, "gaussian")) | None => InitialData::Gaussian {
            epsilon: raw.f64_or("initial.epsilon", 0.1)?,
            width: raw.f64_or("initial.width", 1.0)?,
        },
        Some((line, "tabulated")) => {
            let (_, path) = raw
                .required("initial.path")
                .map_err(|e| err(Some(line), e.message))?;
            InitialData::Tabulated {
                path: PathBuf::from(path),
            }
        }
        Some((line, other)) => {
            return Err(err(
                Some(line),
                format!("initial.family must be 'gaussian' or 'tabulated', got {other:?}"),
            ))
        }
    };

    let config = ExperimentConfig {
        engine,
        lambdas,
        initial,
        grid_n: raw.usize_or("grid.n", 4096)?,
        grid_half_width: raw.f64_or("grid.half_width", 64.0)?,
        t_end: raw.f64_or("time.t_end", 1000.0)?,
        dt_base: raw.f64_or("time.dt_base", 0.005)?,
        dsigma: raw.f64_or("time.dsigma", 5e-4)?,
        output_ratio: raw.f64_or("time.output_ratio", 2f64.powf(0.25))?,
        extra_outputs: raw.f64_list("time.extra_outputs")?,
        fit_t_min: raw.f64_opt("expansion.fit_t_min")?,
        fit_t_max: raw.f64_opt("expansion.fit_t_max")?,
        expansion_order: raw.usize_or("expansion.order", 1)?,
        richardson_check: match raw.take("richardson_check") {
            Some((_, "true")) => true,
            Some((_, "false")) | None => false,
            Some((line, other)) => {
                return Err(err(
                    Some(line),
                    format!("richardson_check must be true or false, got {other:?}"),
                ))
            }
        },
        canonical: raw.canonical.clone(),
    };
    if config.expansion_order > 1 {
        return Err(err(None, "expansion.order beyond 1 is not implemented"));
    }
    Ok(config)
}

pub fn parse_oracle(text: &str) -> Result<OracleConfig, ConfigError> {
    let raw = parse_raw(text)?;
    let t_list = raw.f64_list("oracle.t_list")?;
    let xi_samples = raw.f64_list("oracle.xi_samples")?;
    Ok(OracleConfig {
        amplitude: raw.f64_or("oracle.amplitude", 1.0)?,
        width: raw.f64_or("oracle.width", 0.75)?,
        t_list: if t_list.is_empty() {
            vec![5.0, 10.0, 20.0, 40.0]
        } else {
            t_list
        },
        xi_samples: if xi_samples.is_empty() {
            vec![0.0, 0.3, 0.6]
        } else {
            xi_samples
        },
        eta_node_cap: raw.usize_or("oracle.eta_node_cap", 4096)?,
        grid_n: raw.usize_or("grid.n", 4096)?,
        grid_half_width: raw.f64_or("grid.half_width", 128.0)?,
        canonical: raw.canonical.clone(),
    })
}

pub fn load(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path)
        .map_err(|e| err(None, format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
engine = comoving
nonlinearity.lambdas = 1.0, 0.5
initial.epsilon = 0.08
initial.width = 1.0
grid.n = 4096
grid.half_width = 64
time.t_end = 1000
time.dsigma = 0.00025
";
        let cfg = parse_experiment(text).unwrap();
        assert_eq!(cfg.engine, Engine::Comoving);
        assert_eq!(cfg.lambdas, vec![1.0, 0.5]);
        assert_eq!(cfg.grid_n, 4096);
        assert!(cfg.canonical.contains("time.t_end = 1000"));
    }

    #[test]
    fn rejects_unknown_key_with_line_number() {
        let text = "nonlinearity.lambdas = 1.0\ngrid.npoints = 4096\n";
        let e = parse_experiment(text).unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("unknown key"));
    }

    #[test]
    fn rejects_duplicates_and_bad_numbers() {
        let e =
            parse_experiment("nonlinearity.lambdas = 1\nnonlinearity.lambdas = 2\n").unwrap_err();
        assert!(e.message.contains("duplicate"));
        let e = parse_experiment("nonlinearity.lambdas = fish\n").unwrap_err();
        assert!(e.message.contains("bad lambda"));
        assert!(parse_experiment("")
            .unwrap_err()
            .message
            .contains("missing"));
    }

    #[test]
    fn comments_and_blank_lines_are_fine() {
        let cfg = parse_experiment(
            "# preset\nnonlinearity.lambdas = 0.0   # free mode\n\nengine = box\n",
        )
        .unwrap();
        assert_eq!(cfg.engine, Engine::FixedBox);
        assert!(cfg.lambdas == vec![0.0]);
    }
}
