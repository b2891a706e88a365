//! Experiment configurations: a flat key–value format with list values.
//!
//! ```text
//! format 1
//! scenario shannon
//! p 1/2, 1/2
//! model measure_algebra
//! r 16, 64, 256
//! delta 0.01
//! eps 0.001
//! normalization r
//! packing_norm one
//! mode MS
//! engine count
//! term_depth 1
//! states mu
//! fchain_depths 1
//! closure_depth 1
//! e_grid full
//! statistic last
//! log_base e
//! out out/shannon
//! ```
//!
//! Decimals in the `delta`/`eps`/`p`/`weights` grids are expanded to exact
//! rationals. `#` starts a comment.

use std::collections::BTreeMap;

use crate::entropy::{EngineMode, LogBase, Normalization, PackingNorm, TailStatistic};
use crate::microstate::MicrostateMode;
use crate::rat::{fmt_rat, parse_number, rat, Rat};

use super::lex::{ParseError, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EGridSpec {
    Full,
    Singletons,
}

impl EGridSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            EGridSpec::Full => "full",
            EGridSpec::Singletons => "singletons",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub source: Option<String>,
    pub genset: Option<String>,
    pub masses: Option<Vec<Rat>>,
    pub model: Option<String>,
    pub schedule: Vec<u64>,
    pub deltas: Vec<Rat>,
    pub epsilons: Vec<Rat>,
    pub term_depths: Vec<usize>,
    pub states: Vec<String>,
    pub fchain_depths: Vec<usize>,
    pub closure_depth: usize,
    pub e_grid: EGridSpec,
    pub normalization: Normalization,
    pub packing_norm: PackingNorm,
    pub log_base: LogBase,
    pub mode: MicrostateMode,
    pub engine: EngineMode,
    pub statistic: TailStatistic,
    pub atoms: Option<usize>,
    pub weights: Option<Vec<Rat>>,
    pub partition: Option<Vec<String>>,
    /// Per group element, the one-line action on the source atoms.
    pub actions: Vec<(String, Vec<u32>)>,
    pub window: Vec<String>,
    pub sofic: Option<String>,
    pub out: Option<String>,
    pub greedy_restarts: u32,
    pub seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: String::new(),
            source: None,
            genset: None,
            masses: None,
            model: None,
            schedule: Vec::new(),
            deltas: Vec::new(),
            epsilons: Vec::new(),
            term_depths: vec![1],
            states: Vec::new(),
            fchain_depths: vec![1],
            closure_depth: 1,
            e_grid: EGridSpec::Full,
            normalization: Normalization::R,
            packing_norm: PackingNorm::One,
            log_base: LogBase::E,
            mode: MicrostateMode::Ms,
            engine: EngineMode::Enumerate,
            statistic: TailStatistic::Last,
            atoms: None,
            weights: None,
            partition: None,
            actions: Vec::new(),
            window: Vec::new(),
            sofic: None,
            out: None,
            greedy_restarts: 0,
            seed: None,
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::at(Span { line, col: 1 }, message)
}

pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, ParseError> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut saw_format = false;
    let mut saw_scenario = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, rest) = match content.split_once(char::is_whitespace) {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (content, ""),
        };
        if !saw_format {
            if key != "format" || rest != "1" {
                return Err(err(line, "config must start with `format 1`"));
            }
            saw_format = true;
            continue;
        }
        if let Some(first) = seen.insert(key.to_string(), line) {
            if !key.starts_with("action_") {
                return Err(err(
                    line,
                    format!("duplicate key `{key}` (first on line {first})"),
                ));
            }
        }
        match key {
            "scenario" => {
                cfg.scenario = rest.to_string();
                saw_scenario = true;
            }
            "source" => cfg.source = Some(rest.to_string()),
            "genset" => cfg.genset = Some(rest.to_string()),
            "p" => cfg.masses = Some(rational_list(rest, line, "p")?),
            "model" => cfg.model = Some(rest.to_string()),
            "r" => {
                cfg.schedule = int_list(rest, line, "r")?;
                if cfg.schedule.is_empty() {
                    return Err(err(line, "`r` schedule must be nonempty"));
                }
                if cfg.schedule.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(err(line, "`r` schedule must be strictly increasing"));
                }
            }
            "delta" => {
                cfg.deltas = rational_list(rest, line, "delta")?;
                if cfg.deltas.iter().any(|&d| d < rat(0, 1)) {
                    return Err(err(line, "delta values must be nonnegative"));
                }
                if cfg.deltas.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(err(line, "delta values must be strictly increasing"));
                }
            }
            "eps" => {
                cfg.epsilons = rational_list(rest, line, "eps")?;
                if cfg.epsilons.iter().any(|&e| e <= rat(0, 1)) {
                    return Err(err(line, "eps values must be positive"));
                }
                if cfg.epsilons.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(err(line, "eps values must be strictly increasing"));
                }
            }
            "term_depth" => cfg.term_depths = usize_list(rest, line, "term_depth")?,
            "states" => cfg.states = name_list(rest),
            "fchain_depths" => cfg.fchain_depths = usize_list(rest, line, "fchain_depths")?,
            "closure_depth" => {
                cfg.closure_depth = rest
                    .parse()
                    .map_err(|_| err(line, "closure_depth must be a nonnegative integer"))?
            }
            "e_grid" => {
                cfg.e_grid = match rest {
                    "full" => EGridSpec::Full,
                    "singletons" => EGridSpec::Singletons,
                    other => return Err(err(line, format!("unknown e_grid `{other}`"))),
                }
            }
            "normalization" => {
                cfg.normalization = match rest {
                    "r" => Normalization::R,
                    "r_log_r" => Normalization::RLogR,
                    "r_squared" => Normalization::RSquared,
                    other => return Err(err(line, format!("unknown normalization `{other}`"))),
                }
            }
            "packing_norm" => {
                cfg.packing_norm = match rest {
                    "one" | "1" => PackingNorm::One,
                    "log_eps" => PackingNorm::LogEps,
                    other => return Err(err(line, format!("unknown packing_norm `{other}`"))),
                }
            }
            "log_base" => {
                cfg.log_base = match rest {
                    "e" => LogBase::E,
                    "2" => LogBase::Two,
                    other => return Err(err(line, format!("unknown log_base `{other}`"))),
                }
            }
            "mode" => {
                cfg.mode = match rest {
                    "MS" => MicrostateMode::Ms,
                    "CMS" => MicrostateMode::Cms,
                    other => return Err(err(line, format!("unknown mode `{other}`"))),
                }
            }
            "engine" => cfg.engine = parse_engine(rest, line)?,
            "statistic" => cfg.statistic = parse_statistic(rest, line)?,
            "atoms" => {
                cfg.atoms = Some(
                    rest.parse()
                        .map_err(|_| err(line, "atoms must be a positive integer"))?,
                )
            }
            "weights" => cfg.weights = Some(rational_list(rest, line, "weights")?),
            "partition" => cfg.partition = Some(name_list(rest)),
            "window" => cfg.window = name_list(rest),
            "sofic" => cfg.sofic = Some(rest.to_string()),
            "out" => cfg.out = Some(rest.to_string()),
            "greedy_restarts" => {
                cfg.greedy_restarts = rest
                    .parse()
                    .map_err(|_| err(line, "greedy_restarts must be a nonnegative integer"))?
            }
            "seed" => {
                cfg.seed = Some(
                    rest.parse()
                        .map_err(|_| err(line, "seed must be a nonnegative integer"))?,
                )
            }
            action if action.starts_with("action_") => {
                let element = action.trim_start_matches("action_").to_string();
                if element.is_empty() {
                    return Err(err(line, "action key needs an element name: action_<elem>"));
                }
                let images: Result<Vec<u32>, _> =
                    rest.split_whitespace().map(|t| t.parse::<u32>()).collect();
                let images = images.map_err(|_| {
                    err(
                        line,
                        "action value must be a one-line permutation like `2 1`",
                    )
                })?;
                if cfg.actions.iter().any(|(e, _)| e == &element) {
                    return Err(err(line, format!("duplicate action for `{element}`")));
                }
                cfg.actions.push((element, images));
            }
            other => return Err(err(line, format!("unknown key `{other}`"))),
        }
    }
    if !saw_format {
        return Err(err(1, "config must start with `format 1`"));
    }
    if !saw_scenario {
        return Err(err(1, "config must declare a `scenario`"));
    }
    if cfg.packing_norm == PackingNorm::LogEps && cfg.epsilons.iter().any(|&e| e == rat(1, 1)) {
        return Err(err(1, "eps grid must avoid 1 when packing_norm is log_eps"));
    }
    Ok(cfg)
}

fn parse_engine(rest: &str, line: usize) -> Result<EngineMode, ParseError> {
    if rest == "enumerate" {
        return Ok(EngineMode::Enumerate);
    }
    if rest == "count" {
        // the counting path carries no engine parameters; scenarios that
        // support it recognize it by name
        return Ok(EngineMode::Enumerate);
    }
    if let Some(inner) = rest
        .strip_prefix("sample(")
        .and_then(|s| s.strip_suffix(')'))
    {
        let n: u64 = inner
            .trim()
            .parse()
            .map_err(|_| err(line, "sample(n) needs a positive integer"))?;
        if n == 0 {
            return Err(err(line, "sample(n) needs n >= 1"));
        }
        return Ok(EngineMode::Sample { n, cap: 4096 });
    }
    Err(err(line, format!("unknown engine `{rest}`")))
}

/// `count` is kept verbatim so scenarios can select the closed-form path.
pub fn engine_is_count(text: &str) -> bool {
    text.trim() == "count"
}

fn parse_statistic(rest: &str, line: usize) -> Result<TailStatistic, ParseError> {
    if rest == "last" {
        return Ok(TailStatistic::Last);
    }
    for (prefix, max) in [("max_tail(", true), ("min_tail(", false)] {
        if let Some(inner) = rest.strip_prefix(prefix).and_then(|s| s.strip_suffix(')')) {
            let w: usize = inner
                .trim()
                .parse()
                .map_err(|_| err(line, "tail window must be a positive integer"))?;
            if w == 0 {
                return Err(err(line, "tail window must be at least 1"));
            }
            return Ok(if max {
                TailStatistic::MaxTail(w)
            } else {
                TailStatistic::MinTail(w)
            });
        }
    }
    Err(err(line, format!("unknown statistic `{rest}`")))
}

fn rational_list(rest: &str, line: usize, key: &str) -> Result<Vec<Rat>, ParseError> {
    rest.split(',')
        .map(|t| {
            parse_number(t)
                .ok_or_else(|| err(line, format!("bad rational `{}` in `{key}`", t.trim())))
        })
        .collect()
}

fn int_list(rest: &str, line: usize, key: &str) -> Result<Vec<u64>, ParseError> {
    rest.split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| err(line, format!("bad integer `{}` in `{key}`", t.trim())))
        })
        .collect()
}

fn usize_list(rest: &str, line: usize, key: &str) -> Result<Vec<usize>, ParseError> {
    rest.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| err(line, format!("bad integer `{}` in `{key}`", t.trim())))
        })
        .collect()
}

fn name_list(rest: &str) -> Vec<String> {
    rest.split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// The note attached when the contractive mode adds nothing: with the
/// metric among the states the plain and contractive spaces coincide.
pub fn mode_note(mode: MicrostateMode, metric_in_states: bool) -> Option<String> {
    if mode == MicrostateMode::Cms && metric_in_states {
        Some("note: the metric is a state symbol, so MS = CMS".to_string())
    } else {
        None
    }
}

/// Canonical text form; parse(serialize(c)) == c.
pub fn serialize_experiment(cfg: &ExperimentConfig) -> String {
    let mut out = String::from("format 1\n");
    out.push_str(&format!("scenario {}\n", cfg.scenario));
    if let Some(source) = &cfg.source {
        out.push_str(&format!("source {source}\n"));
    }
    if let Some(genset) = &cfg.genset {
        out.push_str(&format!("genset {genset}\n"));
    }
    if let Some(masses) = &cfg.masses {
        out.push_str(&format!("p {}\n", join_rats(masses)));
    }
    if let Some(model) = &cfg.model {
        out.push_str(&format!("model {model}\n"));
    }
    if !cfg.schedule.is_empty() {
        out.push_str(&format!("r {}\n", join_display(&cfg.schedule)));
    }
    if !cfg.deltas.is_empty() {
        out.push_str(&format!("delta {}\n", join_rats(&cfg.deltas)));
    }
    if !cfg.epsilons.is_empty() {
        out.push_str(&format!("eps {}\n", join_rats(&cfg.epsilons)));
    }
    out.push_str(&format!("term_depth {}\n", join_display(&cfg.term_depths)));
    if !cfg.states.is_empty() {
        out.push_str(&format!("states {}\n", cfg.states.join(", ")));
    }
    out.push_str(&format!(
        "fchain_depths {}\n",
        join_display(&cfg.fchain_depths)
    ));
    out.push_str(&format!("closure_depth {}\n", cfg.closure_depth));
    out.push_str(&format!("e_grid {}\n", cfg.e_grid.as_str()));
    out.push_str(&format!("normalization {}\n", cfg.normalization.as_str()));
    out.push_str(&format!("packing_norm {}\n", cfg.packing_norm.as_str()));
    out.push_str(&format!("log_base {}\n", cfg.log_base.as_str()));
    out.push_str(&format!(
        "mode {}\n",
        match cfg.mode {
            MicrostateMode::Ms => "MS",
            MicrostateMode::Cms => "CMS",
        }
    ));
    match cfg.engine {
        EngineMode::Enumerate => out.push_str("engine enumerate\n"),
        EngineMode::Sample { n, .. } => out.push_str(&format!("engine sample({n})\n")),
    }
    out.push_str(&format!("statistic {}\n", cfg.statistic.as_str()));
    if let Some(atoms) = cfg.atoms {
        out.push_str(&format!("atoms {atoms}\n"));
    }
    if let Some(weights) = &cfg.weights {
        out.push_str(&format!("weights {}\n", join_rats(weights)));
    }
    if let Some(partition) = &cfg.partition {
        out.push_str(&format!("partition {}\n", partition.join(", ")));
    }
    for (element, images) in &cfg.actions {
        let imgs: Vec<String> = images.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("action_{element} {}\n", imgs.join(" ")));
    }
    if !cfg.window.is_empty() {
        out.push_str(&format!("window {}\n", cfg.window.join(", ")));
    }
    if let Some(sofic) = &cfg.sofic {
        out.push_str(&format!("sofic {sofic}\n"));
    }
    if let Some(dir) = &cfg.out {
        out.push_str(&format!("out {dir}\n"));
    }
    if cfg.greedy_restarts > 0 {
        out.push_str(&format!("greedy_restarts {}\n", cfg.greedy_restarts));
    }
    if let Some(seed) = cfg.seed {
        out.push_str(&format!("seed {seed}\n"));
    }
    out
}

fn join_rats(rats: &[Rat]) -> String {
    rats.iter()
        .map(|r| fmt_rat(*r))
        .collect::<Vec<_>>()
        .join(", ")
}

fn join_display<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
