//! Run configuration: experiment defaults, then the config file, then flags.

use std::path::{Path, PathBuf};

use abelconv::attack::StepSize;
use abelconv::convop::OffsetPolicy;
use abelconv::error::Error;
use abelconv::group::GroupSpec;
use abelconv::network::Activation;
use abelconv::signal::SignalKind;
use abelconv::verify::{Experiment, ExperimentConfig, Format, FrobeniusMode};
use clap::Args;
use serde::Deserialize;

/// Environment variable consulted for the master seed when neither the
/// config file nor `--seed` sets one.
pub const SEED_ENV: &str = "ABELCONV_SEED";

/// Settings shared by the config file and the command line. Every field is
/// optional; unset fields keep the experiment's defaults.
#[derive(Clone, Debug, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Group moduli, e.g. `4,4` for Z_4 x Z_4
    #[arg(long, global = true, value_delimiter = ',')]
    pub group: Option<Vec<usize>>,
    /// Channel widths d_0..d_t (`d,q` for `spectra`)
    #[arg(long, global = true, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Offsets per layer (one value applies to every layer)
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Offset policy: uniform | contiguous-window
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// Activation: identity | shifted-softplus | gelu-like
    #[arg(long, global = true)]
    pub activation: Option<String>,
    /// Input distribution: gaussian | rademacher | bounded-uniform
    #[arg(long, global = true)]
    pub input: Option<String>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Master seed (default: $ABELCONV_SEED, then 0)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Lower end of the singular-value band
    #[arg(long, global = true)]
    pub band_a: Option<f64>,
    /// Upper end of the singular-value band
    #[arg(long, global = true)]
    pub band_b: Option<f64>,
    /// Width-ratio constant for the hypothesis report
    #[arg(long, global = true)]
    pub c_w: Option<f64>,
    /// Ball radius for the robustness experiment
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub ball_probes: Option<usize>,
    /// Frobenius norm mode: hutchinson | exact
    #[arg(long, global = true)]
    pub frobenius: Option<String>,
    #[arg(long, global = true)]
    pub hutchinson_probes: Option<usize>,
    /// Attack step constant a (default 10 sup|sigma'|^t)
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Use a = |H_b(f)| for the attack step
    #[arg(long, global = true)]
    #[serde(default)]
    pub oracle_step: bool,
    /// Sweep group (repeatable), e.g. `--sweep-group 16 --sweep-group 2,8`
    #[arg(long = "sweep-group", global = true)]
    #[serde(skip)]
    pub sweep_group: Vec<String>,
    /// Sweep groups in the config file, e.g. `sweep_groups = [[16], [2, 8]]`
    #[arg(skip)]
    pub sweep_groups: Option<Vec<Vec<usize>>>,
    /// Upper limit on asserted pass-rate thresholds
    #[arg(long, global = true)]
    pub pass_rate: Option<f64>,
    /// Directory for output files (nothing is written without it)
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Format of per-trial tables: csv | json
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Experiment for `verify`
    #[arg(long, global = true)]
    pub experiment: Option<String>,
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: field.into(),
        reason: reason.into(),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(field: &str, value: &Option<String>) -> Result<Option<T>, Error> {
    value
        .as_deref()
        .map(|s| {
            s.parse().map_err(|e| match e {
                Error::InvalidConfig { reason, .. } => invalid(field, reason),
                other => other,
            })
        })
        .transpose()
}

fn group(field: &str, moduli: Vec<usize>) -> Result<GroupSpec, Error> {
    GroupSpec::new(moduli).map_err(|e| match e {
        Error::InvalidConfig { reason, .. } => invalid(field, reason),
        other => other,
    })
}

impl Settings {
    /// Read a flat TOML file. Unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<Settings, Error> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.message().to_owned();
            // "unknown field `foo`, expected ..." names the offending key
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field"))
                .map(str::to_owned)
                .or_else(|| e.span().map(|s| key_at(&text, s.start)))
                .unwrap_or_else(|| "config".to_owned());
            invalid(&field, msg)
        })
    }

    /// `other` wins wherever it sets a value.
    pub fn overlay(self, other: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: other.$f.or(self.$f),)* ..self } };
        }
        let oracle_step = self.oracle_step || other.oracle_step;
        let sweep_group = if other.sweep_group.is_empty() {
            self.sweep_group.clone()
        } else {
            other.sweep_group.clone()
        };
        let merged = pick!(
            group, widths, n, policy, activation, input, trials, seed, band_a, band_b, c_w, delta,
            ball_probes, frobenius, hutchinson_probes, a, sweep_groups, pass_rate, out_dir, format,
            experiment
        );
        Settings {
            oracle_step,
            sweep_group,
            ..merged
        }
    }
}

/// The key on the line containing byte `offset`, for error reporting.
fn key_at(text: &str, offset: usize) -> String {
    let start = text[..offset.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    text[start..]
        .split(['=', '\n'])
        .next()
        .map(|k| k.trim().to_owned())
        .filter(|k| !k.is_empty())
        .unwrap_or_else(|| "config".to_owned())
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub out_dir: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    /// Resolve `settings` on top of the defaults for `experiment`. `env_seed`
    /// is used only when no seed was given explicitly.
    pub fn resolve(experiment: Experiment, s: Settings, env_seed: Option<String>) -> Result<RunConfig, Error> {
        let experiment = parse::<Experiment>("experiment", &s.experiment)?.unwrap_or(experiment);
        let mut cfg = ExperimentConfig::defaults(experiment);
        if let Some(g) = s.group {
            cfg.group = group("group", g)?;
        }
        if let Some(w) = s.widths {
            cfg.widths = w;
        }
        match s.n {
            Some(n) => cfg.n = n,
            // the default offset count shrinks to fit small groups
            None => cfg.n.iter_mut().for_each(|n| *n = (*n).min(cfg.group.order())),
        }
        if let Some(p) = parse::<OffsetPolicy>("policy", &s.policy)? {
            cfg.policy = p;
        }
        if let Some(a) = parse::<Activation>("activation", &s.activation)? {
            cfg.activation = a;
        }
        if let Some(k) = parse::<SignalKind>("input", &s.input)? {
            cfg.input = k;
        }
        if let Some(t) = s.trials {
            cfg.trials = t;
        }
        cfg.master_seed = match (s.seed, env_seed) {
            (Some(seed), _) => seed,
            (None, Some(v)) => v
                .trim()
                .parse()
                .map_err(|_| invalid("seed", format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
            (None, None) => 0,
        };
        if let Some(v) = s.band_a {
            cfg.band_a = v;
        }
        if let Some(v) = s.band_b {
            cfg.band_b = v;
        }
        if let Some(v) = s.c_w {
            cfg.c_w = v;
        }
        if let Some(v) = s.delta {
            cfg.delta = v;
        }
        if let Some(v) = s.ball_probes {
            cfg.ball_probes = v;
        }
        if let Some(m) = s.frobenius.as_deref() {
            cfg.frobenius = match m {
                "hutchinson" => FrobeniusMode::Hutchinson,
                "exact" => FrobeniusMode::Exact,
                other => return Err(invalid("frobenius", format!("unknown mode `{other}`"))),
            };
        }
        if let Some(v) = s.hutchinson_probes {
            cfg.hutchinson_probes = v;
        }
        cfg.step = match (s.a, s.oracle_step) {
            (Some(_), true) => return Err(invalid("a", "`a` and `oracle_step` are exclusive")),
            (Some(a), false) => StepSize::Fixed(a),
            (None, true) => StepSize::Oracle,
            (None, false) => StepSize::Envelope,
        };
        if !s.sweep_group.is_empty() {
            cfg.sweep_groups = s
                .sweep_group
                .iter()
                .map(|text| {
                    let moduli = text
                        .split(',')
                        .map(|m| m.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| invalid("sweep_group", format!("`{text}` is not a list of moduli")))?;
                    group("sweep_group", moduli)
                })
                .collect::<Result<_, _>>()?;
        } else if let Some(gs) = s.sweep_groups {
            cfg.sweep_groups = gs
                .into_iter()
                .map(|g| group("sweep_groups", g))
                .collect::<Result<_, _>>()?;
        }
        if let Some(v) = s.pass_rate {
            cfg.pass_rate = v;
        }
        let format = parse::<Format>("format", &s.format)?.unwrap_or(Format::Csv);
        cfg.validate()?;
        Ok(RunConfig {
            experiment: cfg,
            out_dir: s.out_dir,
            format,
        })
    }
}
