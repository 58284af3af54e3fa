//! Experiment configuration: defaults, optional TOML file, command-line
//! flags, merged in that precedence order.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use fpf_core::experiments::{Method, KERNEL_BANDWIDTH, KERNEL_MAX_ITER_FACTOR, KERNEL_TOL};
use fpf_core::filters::TimeMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Gain,
    Filter,
    Mc,
    Scaling,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gain" => Ok(Self::Gain),
            "filter" => Ok(Self::Filter),
            "mc" => Ok(Self::Mc),
            "scaling" => Ok(Self::Scaling),
            other => Err(format!(
                "experiment: unknown kind '{other}' (expected gain|filter|mc|scaling)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A number or a list, as TOML/flags allow either for epsilon.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Raw configuration file contents; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub np: Option<usize>,
    pub epsilon: Option<OneOrMany>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub runs: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub mode: Option<String>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub np: usize,
    pub epsilons: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub runs: usize,
    pub methods: Vec<Method>,
    pub mode: TimeMode,
    pub format: OutputFormat,
    pub out: PathBuf,
    pub kernel_bandwidth: f64,
    pub kernel_tol: f64,
    pub kernel_max_iter: usize,
}

/// Flag values as parsed (everything optional; defaults fill the gaps).
#[derive(Debug, Default)]
pub struct FlagConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub np: Option<usize>,
    pub epsilon: Option<String>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub runs: Option<usize>,
    pub methods: Option<String>,
    pub mode: Option<String>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>, String> {
    let mut methods = Vec::new();
    for name in names {
        let m: Method = name
            .parse()
            .map_err(|_| format!("methods: unknown method '{name}'"))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err("methods: list must not be empty".into());
    }
    Ok(methods)
}

fn parse_epsilons(text: &str) -> Result<Vec<f64>, String> {
    let vals: Result<Vec<f64>, _> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect();
    vals.map_err(|_| format!("epsilon: cannot parse '{text}' as a number list"))
}

/// Merges defaults, the optional config file, and flags; validates ranges.
/// Error strings name the offending field.
pub fn resolve(file: FileConfig, flags: FlagConfig) -> Result<Resolved, String> {
    let experiment_name = flags
        .experiment
        .or(file.experiment)
        .ok_or_else(|| "experiment: missing (use --experiment gain|filter|mc|scaling)".to_string())?;
    let experiment = ExperimentKind::parse(&experiment_name)?;

    let mode = match flags
        .mode
        .or(file.mode)
        .unwrap_or_else(|| "continuous".into())
        .to_ascii_lowercase()
        .as_str()
    {
        "continuous" => TimeMode::Continuous,
        "discrete" => TimeMode::Discrete,
        other => return Err(format!("mode: unknown mode '{other}' (continuous|discrete)")),
    };

    let seed = flags.seed.or(file.seed).unwrap_or(42);
    let np = flags.np.or(file.np).unwrap_or(match experiment {
        ExperimentKind::Gain => 200,
        _ => 50,
    });

    let epsilons = match (flags.epsilon, file.epsilon) {
        (Some(text), _) => parse_epsilons(&text)?,
        (None, Some(v)) => v.into_vec(),
        (None, None) => match experiment {
            ExperimentKind::Gain => vec![0.05, 0.2, 1.0],
            _ => vec![0.01],
        },
    };

    let dt = flags.dt.or(file.dt).unwrap_or(match mode {
        TimeMode::Continuous => 0.01,
        TimeMode::Discrete => 1.0,
    });
    let horizon = flags.horizon.or(file.horizon).unwrap_or(40.0);
    let runs = flags.runs.or(file.runs).unwrap_or(100);

    let methods = match (flags.methods, file.methods) {
        (Some(text), _) => {
            let names: Vec<String> = text.split(',').map(|s| s.trim().to_string()).collect();
            parse_methods(&names)?
        }
        (None, Some(names)) => parse_methods(&names)?,
        (None, None) => Method::ALL.to_vec(),
    };

    let format = match flags
        .format
        .or(file.format)
        .unwrap_or_else(|| "csv".into())
        .to_ascii_lowercase()
        .as_str()
    {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => return Err(format!("format: unknown format '{other}' (csv|json)")),
    };

    let out = flags.out.or(file.out).unwrap_or_else(|| {
        PathBuf::from(match experiment {
            ExperimentKind::Gain => "gain.csv",
            ExperimentKind::Filter => "filter.csv",
            ExperimentKind::Mc => "mc_runs.csv",
            ExperimentKind::Scaling => "scaling.csv",
        })
    });

    if np == 0 {
        return Err("np: particle count must be at least 1".into());
    }
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err("epsilon: every bandwidth must be positive and finite".into());
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err("dt: time step must be positive".into());
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err("horizon: must be positive".into());
    }

    Ok(Resolved {
        experiment,
        seed,
        np,
        epsilons,
        dt,
        horizon,
        runs,
        methods,
        mode,
        format,
        out,
        kernel_bandwidth: KERNEL_BANDWIDTH,
        kernel_tol: KERNEL_TOL,
        kernel_max_iter: KERNEL_MAX_ITER_FACTOR * np,
    })
}

/// JSON-friendly echo of the configuration for summary documents.
#[derive(Debug, Serialize)]
pub struct ConfigEcho<'a> {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub np: usize,
    pub epsilon: &'a [f64],
    pub dt: f64,
    pub horizon: f64,
    pub runs: usize,
    pub methods: Vec<&'static str>,
    pub mode: &'static str,
}

impl<'a> ConfigEcho<'a> {
    pub fn new(cfg: &'a Resolved) -> Self {
        Self {
            experiment: cfg.experiment,
            seed: cfg.seed,
            np: cfg.np,
            epsilon: &cfg.epsilons,
            dt: cfg.dt,
            horizon: cfg.horizon,
            runs: cfg.runs,
            methods: cfg.methods.iter().map(|m| m.label()).collect(),
            mode: match cfg.mode {
                TimeMode::Continuous => "continuous",
                TimeMode::Discrete => "discrete",
            },
        }
    }
}
