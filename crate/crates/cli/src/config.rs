//! Run configuration: experiment-specific defaults, a TOML file and
//! `--section.key value` flags, merged in that order.
//!
//! Unknown keys are errors, with the closest valid key suggested.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use cbo_games::lab::decay::check_decay_regime;
use cbo_games::{builtin_game, CboParams, Diffusion, GameSpec, Law};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    VarianceDecay,
    MfRate,
    IidConsensus,
    StabilityProbe,
    MomentMonitor,
    NashSearch,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Simulate,
        Experiment::VarianceDecay,
        Experiment::MfRate,
        Experiment::IidConsensus,
        Experiment::StabilityProbe,
        Experiment::MomentMonitor,
        Experiment::NashSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::VarianceDecay => "variance-decay",
            Experiment::MfRate => "mf-rate",
            Experiment::IidConsensus => "iid-consensus",
            Experiment::StabilityProbe => "stability-probe",
            Experiment::MomentMonitor => "moment-monitor",
            Experiment::NashSearch => "nash-search",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub name: String,
    #[serde(rename = "M")]
    pub players: usize,
    pub d: usize,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_list: Vec<usize>,
    pub n_ref: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub base_seed: u64,
    pub count: usize,
}

impl SeedSection {
    pub fn list(&self) -> Vec<u64> {
        (0..self.count as u64).map(|k| self.base_seed.wrapping_add(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<Format>,
}

/// Cost used by `iid-consensus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IidCost {
    /// `1 / (1 + |x|²)`.
    BoundedBump,
    /// Player 1's cost in the configured game, opponents frozen at the
    /// game's equilibrium (or the origin).
    Game,
}

/// Knobs of individual experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub p: f64,
    pub trials: usize,
    pub radius: f64,
    pub oracle_samples: usize,
    pub oracle_batches: usize,
    pub probe_budget: usize,
    pub probe_radius: f64,
    pub cost: IidCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub record_every: usize,
    pub game: GameSection,
    pub params: CboParams,
    pub particles: ParticleSection,
    pub seeds: SeedSection,
    pub output: OutputSection,
    pub init: Law,
    pub analysis: AnalysisSection,
}

impl RunConfig {
    /// Fully populated defaults for `experiment`.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut cfg = RunConfig {
            experiment,
            record_every: 10,
            game: GameSection {
                name: "decoupled-quadratic".into(),
                players: 2,
                d: 2,
                coupling: 0.0,
            },
            params: CboParams {
                lambda: 1.0,
                sigma: 0.5,
                alpha: 40.0,
                xi: 1.0,
                dt: 0.01,
                t_end: 10.0,
                diffusion: Diffusion::Anisotropic,
            },
            particles: ParticleSection {
                n: 200,
                n_list: vec![16, 32, 64, 128, 256],
                n_ref: 4096,
            },
            seeds: SeedSection { base_seed: 0, count: 8 },
            output: OutputSection {
                directory: format!("cbo-output/{experiment}"),
                formats: vec![Format::Csv, Format::Json],
            },
            init: Law::Uniform { low: -3.0, high: 3.0 },
            analysis: AnalysisSection {
                p: 2.0,
                trials: 200,
                radius: 10.0,
                oracle_samples: 10_000_000,
                oracle_batches: 3,
                probe_budget: 20_000,
                probe_radius: 3.0,
                cost: IidCost::BoundedBump,
            },
        };
        match experiment {
            Experiment::Simulate => cfg.seeds.count = 1,
            Experiment::VarianceDecay => {}
            Experiment::MfRate => cfg.seeds.count = 16,
            Experiment::IidConsensus => {
                cfg.params.alpha = 1.0;
                cfg.init = Law::Gaussian { mean: 0.0, std: 1.0 };
                cfg.particles.n_list = vec![100, 1_000, 10_000, 100_000];
                cfg.seeds.count = 1;
            }
            Experiment::StabilityProbe => {
                cfg.params.alpha = 1.0;
                cfg.analysis.trials = 1000;
                cfg.seeds.count = 1;
            }
            Experiment::MomentMonitor => cfg.seeds.count = 4,
            Experiment::NashSearch => {
                cfg.game.name = "rastrigin-coupled".into();
                cfg.game.coupling = 0.1;
                cfg.params.alpha = 100.0;
                cfg.params.sigma = 0.3;
                cfg.params.t_end = 20.0;
                cfg.particles.n = 400;
            }
        }
        cfg
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Encode(e.to_string()))
    }

    pub fn build_game(&self) -> Result<GameSpec> {
        let g = &self.game;
        Ok(builtin_game(&g.name, g.players, g.d, g.coupling)?)
    }

    /// Checks the invariants that do not depend on the file system.
    pub fn validate(&self) -> Result<()> {
        let invalid = |what: String| Err(CliError::Config(what));
        self.build_game()?;
        self.params.validate()?;
        if self.record_every == 0 {
            return invalid("record_every must be >= 1".into());
        }
        if self.seeds.count == 0 {
            return invalid("seeds.count must be >= 1".into());
        }
        if self.particles.n == 0 || self.particles.n_ref == 0 || self.particles.n_list.contains(&0) {
            return invalid("particle counts must be >= 1".into());
        }
        if self.output.formats.is_empty() {
            return invalid("output.formats must name at least one of csv, json".into());
        }
        if let Law::Point { at } = &self.init {
            if at.len() != self.game.d {
                return invalid(format!("init.at has {} entries but game.d = {}", at.len(), self.game.d));
            }
        }
        if self.experiment == Experiment::VarianceDecay {
            check_decay_regime(&self.params)?;
        }
        Ok(())
    }
}

fn to_table<T: Serialize>(value: &T) -> Table {
    match Value::try_from(value) {
        Ok(Value::Table(t)) => t,
        _ => unreachable!("configuration sections serialize to tables"),
    }
}

/// Every valid dotted key; `init` accepts the fields of every law.
fn known_keys(defaults: &Table) -> Vec<String> {
    let mut keys = Vec::new();
    for (k, v) in defaults {
        match v {
            Value::Table(t) if k != "init" => keys.extend(t.keys().map(|s| format!("{k}.{s}"))),
            Value::Table(_) => {}
            _ => keys.push(k.clone()),
        }
    }
    keys.extend(["kind", "low", "high", "mean", "std", "at"].map(|s| format!("init.{s}")));
    keys
}

fn nearest<'a>(key: &str, candidates: &'a [String]) -> Option<&'a str> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    candidates
        .iter()
        .map(|c| {
            let c_leaf = c.rsplit('.').next().unwrap_or(c);
            let score = strsim::normalized_levenshtein(key, c).max(strsim::normalized_levenshtein(leaf, c_leaf));
            (score, c.as_str())
        })
        .filter(|(score, _)| *score >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

fn unknown_key(key: &str, known: &[String]) -> CliError {
    match nearest(key, known) {
        Some(s) => CliError::Config(format!("unknown key `{key}`; did you mean `{s}`?")),
        None => CliError::Config(format!("unknown key `{key}`; valid keys: {}", known.join(", "))),
    }
}

fn check_keys(table: &Table, known: &[String]) -> Result<()> {
    for (k, v) in table {
        match v {
            Value::Table(inner) => {
                let is_section = known.iter().any(|c| c.starts_with(&format!("{k}.")));
                if !is_section {
                    return Err(unknown_key(k, known));
                }
                for ik in inner.keys() {
                    let dotted = format!("{k}.{ik}");
                    if !known.contains(&dotted) {
                        return Err(unknown_key(&dotted, known));
                    }
                }
            }
            _ if known.contains(k) => {}
            _ => return Err(unknown_key(k, known)),
        }
    }
    Ok(())
}

/// Merges `over` into `base`. A table that sets `init.kind` replaces the
/// whole `init` section, since the fields of one law mean nothing to another.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => {
                if k == "init" && o.contains_key("kind") {
                    *b = o;
                } else {
                    b.extend(o);
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_flag_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn overrides_table(overrides: &[(String, String)]) -> Table {
    let mut table = Table::new();
    for (key, raw) in overrides {
        let value = parse_flag_value(raw);
        match key.split_once('.') {
            Some((section, leaf)) => {
                let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
                if let Value::Table(t) = entry {
                    t.insert(leaf.to_string(), value);
                }
            }
            None => {
                table.insert(key.clone(), value);
            }
        }
    }
    table
}

/// Builds the configuration of `experiment` from its defaults, the optional
/// TOML `text` and the flag `overrides`, then validates it.
pub fn parse_config_str(experiment: Experiment, text: Option<(&str, &str)>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let defaults = to_table(&RunConfig::defaults(experiment));
    let known = known_keys(&defaults);
    let mut merged = defaults;
    if let Some((source_name, text)) = text {
        let file: Table = toml::from_str(text).map_err(|e| CliError::Parse {
            source_name: source_name.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        check_keys(&file, &known)?;
        if let Some(named) = file.get("experiment") {
            if named.as_str() != Some(experiment.name()) {
                return Err(CliError::Config(format!(
                    "config file is for experiment {named}, but `{experiment}` was requested"
                )));
            }
        }
        merge(&mut merged, file);
    }
    let flags = overrides_table(overrides);
    check_keys(&flags, &known)?;
    if flags.contains_key("experiment") {
        return Err(CliError::Config("the experiment is chosen by the subcommand".into()));
    }
    merge(&mut merged, flags);
    let cfg: RunConfig = Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("invalid configuration: {}", e.to_string().trim_end())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// [`parse_config_str`] reading the TOML from `path` when given.
pub fn parse_config(experiment: Experiment, path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            parse_config_str(experiment, Some((&path.display().to_string(), &text)), overrides)
        }
        None => parse_config_str(experiment, None, overrides),
    }
}

/// `(dotted key, raw value)` pairs from the command line.
pub type Overrides = Vec<(String, String)>;

/// Pulls `--section.key value`, `--section.key=value` and
/// `--record_every value` out of `args`, returning the remaining arguments
/// and the overrides in order.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !(key.contains('.') || key == "record_every") {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => iter
                .next()
                .ok_or_else(|| CliError::Config(format!("flag `--{key}` needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

/// Key reference for `--help`: the defaults of every section.
pub fn defaults_help() -> String {
    let base = RunConfig::defaults(Experiment::VarianceDecay);
    let mut out = String::from(
        "CONFIGURATION:\n  Keys may be set in a TOML file (--config) or as flags `--section.key value`;\n  flags win over the file, the file over the defaults. Defaults (variance-decay):\n\n",
    );
    for line in base.to_toml().unwrap_or_default().lines() {
        out.push_str("    ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(
        "\n  Other experiments change these defaults:\n\
         \x20   simulate          seeds.count = 1\n\
         \x20   mf-rate           seeds.count = 16\n\
         \x20   iid-consensus     params.alpha = 1, init = gaussian(0, 1), particles.n_list = [100, 1000, 10000, 100000], seeds.count = 1\n\
         \x20   stability-probe   params.alpha = 1, analysis.trials = 1000, seeds.count = 1\n\
         \x20   moment-monitor    seeds.count = 4\n\
         \x20   nash-search       game = rastrigin-coupled (coupling 0.1), params.alpha = 100, params.sigma = 0.3, params.t_end = 20, particles.N = 400\n\
         \x20 output.directory defaults to cbo-output/<experiment>.\n\n\
         ENVIRONMENT:\n  CBO_GAMES_THREADS  worker threads (0 or unset = all cores)\n\n\
         EXIT STATUS:\n  0 all gates passed, 2 a gate failed, 1 error\n",
    );
    out
}
