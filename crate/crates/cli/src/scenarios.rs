//! Named end-to-end scenarios: load a configuration, run the pipeline,
//! write the table, estimate, and plot-series files, and compare against
//! the reference value where a closed form exists.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use microstate_entropy::counting::{DEFAULT_BOWEN_EXACT_BUDGET, DEFAULT_BOWEN_SAMPLES};
use microstate_entropy::dsl::{
    mode_note, parse_structure, serialize_experiment, EGridSpec, ExperimentConfig, StructureDoc,
};
use microstate_entropy::entropy::{
    bowen_table, partition_table, EngineMode, EntropyEstimate, EntropyTable, EstimateOutcome,
    Estimator, EstimatorConfig, EstimatorError, Grids, LogBase, ModelFamily,
};
use microstate_entropy::microstate::EngineError;
use microstate_entropy::packing::SolverBudget;
use microstate_entropy::perm::Perm;
use microstate_entropy::rat::{rat, to_f64, Rat};
use microstate_entropy::sig::StId;
use microstate_entropy::structure::{BuildError, SoficMap};

use crate::output::{config_hash, estimate_json, plot_series, table_csv};

/// Failure with the CLI exit code it maps to: 1 validation, 2 budget
/// exhaustion, 3 I/O.
#[derive(Debug)]
pub enum RunError {
    Validation(String),
    Budget(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Validation(_) => 1,
            RunError::Budget(_) => 2,
            RunError::Io(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "invalid configuration: {m}"),
            RunError::Budget(m) => write!(f, "budget exhausted: {m}"),
            RunError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<EstimatorError> for RunError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Engine(EngineError::BudgetExceeded { .. }) => {
                RunError::Budget(e.to_string())
            }
            EstimatorError::Build(BuildError::TooLarge { .. }) => RunError::Budget(e.to_string()),
            other => RunError::Validation(other.to_string()),
        }
    }
}

fn io_err<T>(result: std::io::Result<T>, what: &str) -> Result<T, RunError> {
    result.map_err(|e| RunError::Io(format!("{what}: {e}")))
}

#[derive(Debug)]
pub struct ScenarioResult {
    pub name: String,
    pub config_hash: String,
    pub table_paths: Vec<PathBuf>,
    pub estimate_path: PathBuf,
    pub estimate: EntropyEstimate,
    pub reference: Option<f64>,
    pub provenance: String,
    pub deviation: Option<f64>,
    pub notes: Vec<String>,
}

pub struct RunOptions<'a> {
    /// Directory that relative paths inside the config resolve against.
    pub base_dir: &'a Path,
    pub out_dir: &'a Path,
    pub seed: u64,
    /// Overrides the packing solver node budget when set.
    pub node_budget: Option<u64>,
}

pub fn run_scenario(
    cfg: &ExperimentConfig,
    opts: &RunOptions<'_>,
) -> Result<ScenarioResult, RunError> {
    match cfg.scenario.as_str() {
        "shannon" => run_shannon(cfg, opts),
        "bowen" => run_bowen(cfg, opts),
        "sofic_dim" => run_sofic_dim(cfg, opts),
        "entropy" => run_entropy(cfg, opts),
        other => Err(RunError::Validation(format!(
            "unknown scenario `{other}` (expected shannon, bowen, sofic_dim, or entropy)"
        ))),
    }
}

fn require<T: Clone>(field: &Option<T>, name: &str) -> Result<T, RunError> {
    field
        .clone()
        .ok_or_else(|| RunError::Validation(format!("missing required key `{name}`")))
}

fn require_grids(cfg: &ExperimentConfig) -> Result<(), RunError> {
    if cfg.schedule.is_empty() {
        return Err(RunError::Validation("missing required key `r`".into()));
    }
    if cfg.deltas.is_empty() {
        return Err(RunError::Validation("missing required key `delta`".into()));
    }
    if cfg.epsilons.is_empty() {
        return Err(RunError::Validation("missing required key `eps`".into()));
    }
    Ok(())
}

fn check_masses(masses: &[Rat]) -> Result<(), RunError> {
    let total: Rat = masses.iter().copied().sum();
    if masses.iter().any(|&p| p < rat(0, 1)) || total != rat(1, 1) {
        return Err(RunError::Validation(
            "p must be a probability vector (nonnegative, summing to 1)".into(),
        ));
    }
    Ok(())
}

/// Shannon entropy value of a mass vector in the configured base.
fn shannon_reference(masses: &[Rat], base: LogBase) -> f64 {
    let nats: f64 = masses
        .iter()
        .map(|&p| {
            let p = to_f64(p);
            if p > 0.0 {
                -p * p.ln()
            } else {
                0.0
            }
        })
        .sum();
    base.from_nats(nats)
}

struct Written {
    table_paths: Vec<PathBuf>,
    estimate_path: PathBuf,
}

fn write_outputs(
    stem: &str,
    tables: &[EntropyTable],
    estimate: &EntropyEstimate,
    hash: &str,
    reference: Option<f64>,
    deviation: Option<f64>,
    out_dir: &Path,
) -> Result<Written, RunError> {
    io_err(fs::create_dir_all(out_dir), "creating output directory")?;
    let mut table_paths = Vec::new();
    for (i, table) in tables.iter().enumerate() {
        let name = if tables.len() == 1 {
            format!("{stem}_table.csv")
        } else {
            format!("{stem}_table_e{i}.csv")
        };
        let path = out_dir.join(name);
        io_err(fs::write(&path, table_csv(table)), "writing table")?;
        let (vs_r, vs_eps) = plot_series(table);
        let suffix = if tables.len() == 1 {
            String::new()
        } else {
            format!("_e{i}")
        };
        io_err(
            fs::write(
                out_dir.join(format!("{stem}_series_vs_r{suffix}.csv")),
                vs_r,
            ),
            "writing series",
        )?;
        io_err(
            fs::write(
                out_dir.join(format!("{stem}_series_vs_eps{suffix}.csv")),
                vs_eps,
            ),
            "writing series",
        )?;
        table_paths.push(path);
    }
    let estimate_path = out_dir.join(format!("{stem}_estimate.json"));
    let doc = estimate_json(estimate, hash, reference, deviation);
    io_err(
        fs::write(&estimate_path, format!("{:#}\n", doc)),
        "writing estimate",
    )?;
    Ok(Written {
        table_paths,
        estimate_path,
    })
}

fn deviation_of(estimate: &EntropyEstimate, reference: Option<f64>) -> Option<f64> {
    reference.map(|r| (estimate.value - r).abs())
}

/// Type-class counting of partition microstates against the closed-form
/// entropy of the mass vector.
pub fn run_shannon(
    cfg: &ExperimentConfig,
    opts: &RunOptions<'_>,
) -> Result<ScenarioResult, RunError> {
    let masses = require(&cfg.masses, "p")?;
    check_masses(&masses)?;
    require_grids(cfg)?;
    let (table, estimate) = partition_table(
        &masses,
        &cfg.schedule,
        &cfg.deltas,
        &cfg.epsilons,
        cfg.normalization,
        cfg.log_base,
        cfg.statistic,
    )
    .map_err(|e| RunError::Validation(e.to_string()))?;
    let reference = Some(shannon_reference(&masses, cfg.log_base));
    let deviation = deviation_of(&estimate, reference);
    let hash = config_hash(&serialize_experiment(cfg));
    let written = write_outputs(
        "shannon",
        &[table],
        &estimate,
        &hash,
        reference,
        deviation,
        opts.out_dir,
    )?;
    Ok(ScenarioResult {
        name: "shannon".into(),
        config_hash: hash,
        table_paths: written.table_paths,
        estimate_path: written.estimate_path,
        estimate,
        reference,
        provenance: "closed form: -sum p log p".into(),
        deviation,
        notes: Vec::new(),
    })
}

/// Joined-partition counting along a sofic map. The source is a finite
/// weighted point set with a labeled partition and a permutation action.
pub fn run_bowen(
    cfg: &ExperimentConfig,
    opts: &RunOptions<'_>,
) -> Result<ScenarioResult, RunError> {
    require_grids(cfg)?;
    let atoms = require(&cfg.atoms, "atoms")?;
    if atoms == 0 || atoms > 24 {
        return Err(RunError::Validation(
            "atoms must be between 1 and 24".into(),
        ));
    }
    let weights = match &cfg.weights {
        Some(w) => w.clone(),
        None => vec![rat(1, atoms as i64); atoms],
    };
    if weights.len() != atoms {
        return Err(RunError::Validation(
            "weights must list one mass per atom".into(),
        ));
    }
    check_masses(&weights)?;
    let labels_raw = require(&cfg.partition, "partition")?;
    if labels_raw.len() != atoms {
        return Err(RunError::Validation(
            "partition must label every atom".into(),
        ));
    }
    let mut label_names: Vec<String> = Vec::new();
    let assignment: Vec<usize> = labels_raw
        .iter()
        .map(|l| {
            if let Some(i) = label_names.iter().position(|n| n == l) {
                i
            } else {
                label_names.push(l.clone());
                label_names.len() - 1
            }
        })
        .collect();
    let window = if cfg.window.is_empty() {
        vec!["e".to_string()]
    } else {
        cfg.window.clone()
    };

    let mut source_perms = Vec::with_capacity(window.len());
    for element in &window {
        let perm = if let Some((_, images)) = cfg.actions.iter().find(|(e, _)| e == element) {
            let images: Vec<u32> = images.iter().map(|&v| v.saturating_sub(1)).collect();
            Perm::from_images(images).map_err(|e| {
                RunError::Validation(format!("action_{element} is not a permutation: {e}"))
            })?
        } else if element == "e" {
            Perm::identity(atoms)
        } else {
            return Err(RunError::Validation(format!(
                "window element `{element}` has no action_{element} key"
            )));
        };
        if perm.degree() != atoms {
            return Err(RunError::Validation(format!(
                "action_{element} must permute {atoms} atoms"
            )));
        }
        for x in 0..atoms {
            if weights[perm.apply(x)] != weights[x] {
                return Err(RunError::Validation(format!(
                    "action_{element} does not preserve the weights"
                )));
            }
        }
        source_perms.push(perm);
    }

    let sofic = match &cfg.sofic {
        Some(path) => {
            let resolved = opts.base_dir.join(path);
            let text = io_err(fs::read_to_string(&resolved), "reading sofic map file")?;
            SoficMap::parse(&text).map_err(|e| RunError::Validation(e.to_string()))?
        }
        None => SoficMap::default(),
    };

    let target = microstate_entropy::structure::join_distribution(
        &assignment,
        &source_perms,
        Some(&weights),
    );
    let samples = match cfg.engine {
        EngineMode::Sample { n, .. } => n,
        EngineMode::Enumerate => DEFAULT_BOWEN_SAMPLES,
    };
    let (table, estimate) = bowen_table(
        &target,
        label_names.len(),
        &sofic,
        &window,
        &cfg.schedule,
        &cfg.deltas,
        &cfg.epsilons,
        cfg.normalization,
        cfg.log_base,
        cfg.statistic,
        DEFAULT_BOWEN_EXACT_BUDGET,
        samples,
        opts.seed,
    )
    .map_err(|e| RunError::Validation(e.to_string()))?;

    // with the trivial window the joined condition is the plain one and
    // the closed-form entropy of the cell masses is the reference
    let reference = if window == ["e"] {
        let mut cell_masses = vec![rat(0, 1); label_names.len()];
        for (x, &cell) in assignment.iter().enumerate() {
            cell_masses[cell] += weights[x];
        }
        Some(shannon_reference(&cell_masses, cfg.log_base))
    } else {
        None
    };
    let deviation = deviation_of(&estimate, reference);
    let hash = config_hash(&serialize_experiment(cfg));
    let written = write_outputs(
        "bowen",
        &[table],
        &estimate,
        &hash,
        reference,
        deviation,
        opts.out_dir,
    )?;
    Ok(ScenarioResult {
        name: "bowen".into(),
        config_hash: hash,
        table_paths: written.table_paths,
        estimate_path: written.estimate_path,
        estimate,
        reference,
        provenance: if reference.is_some() {
            "trivial window: closed form -sum p log p".into()
        } else {
            "exact counts at the scheduled r while within budget".into()
        },
        deviation,
        notes: Vec::new(),
    })
}

fn load_source(cfg: &ExperimentConfig, opts: &RunOptions<'_>) -> Result<StructureDoc, RunError> {
    let path = require(&cfg.source, "source")?;
    let resolved = opts.base_dir.join(&path);
    let text = io_err(fs::read_to_string(&resolved), "reading source structure")?;
    parse_structure(&text).map_err(|e| RunError::Validation(format!("{}: {e}", path)))
}

fn resolve_states(doc: &StructureDoc, names: &[String]) -> Result<Vec<StId>, RunError> {
    names
        .iter()
        .map(|n| {
            doc.structure
                .signature
                .state(n)
                .ok_or_else(|| RunError::Validation(format!("unknown state symbol `{n}`")))
        })
        .collect()
}

fn estimator_config(cfg: &ExperimentConfig, opts: &RunOptions<'_>) -> EstimatorConfig {
    let mut solver = SolverBudget::default();
    if let Some(nodes) = opts.node_budget {
        solver.max_nodes = nodes;
    }
    EstimatorConfig {
        normalization: cfg.normalization,
        packing_norm: cfg.packing_norm,
        log_base: cfg.log_base,
        mode: cfg.mode,
        engine: cfg.engine,
        statistic: cfg.statistic,
        solver,
        greedy_restarts: cfg.greedy_restarts,
        seed: opts.seed,
        ..EstimatorConfig::default()
    }
}

fn grids_from(cfg: &ExperimentConfig, states: Vec<StId>) -> Grids {
    Grids {
        deltas: cfg.deltas.clone(),
        epsilons: cfg.epsilons.clone(),
        r_depths: cfg.term_depths.clone(),
        states,
        f_chain_depths: cfg.fchain_depths.clone(),
        closure_depth: cfg.closure_depth,
        e_grid: match cfg.e_grid {
            EGridSpec::Full => microstate_entropy::entropy::EGrid::Full,
            EGridSpec::Singletons => microstate_entropy::entropy::EGrid::Singletons,
        },
    }
}

fn model_family(cfg: &ExperimentConfig, opts: &RunOptions<'_>) -> Result<ModelFamily, RunError> {
    match cfg.model.as_deref() {
        None | Some("measure_algebra") => Ok(ModelFamily::MeasureAlgebra),
        Some("sym") => Ok(ModelFamily::SymmetricGroup),
        Some("dynamical") => {
            let path = require(&cfg.sofic, "sofic")?;
            let resolved = opts.base_dir.join(&path);
            let text = io_err(fs::read_to_string(&resolved), "reading sofic map file")?;
            let sofic = SoficMap::parse(&text).map_err(|e| RunError::Validation(e.to_string()))?;
            if cfg.window.is_empty() {
                return Err(RunError::Validation(
                    "dynamical model needs a `window` of group elements".into(),
                ));
            }
            Ok(ModelFamily::Dynamical {
                sofic,
                window: cfg.window.clone(),
            })
        }
        Some(other) => Err(RunError::Validation(format!(
            "unknown model `{other}` (expected measure_algebra, sym, or dynamical)"
        ))),
    }
}

fn generic_outcome(
    cfg: &ExperimentConfig,
    opts: &RunOptions<'_>,
    dimension: bool,
) -> Result<(EstimateOutcome, Vec<String>), RunError> {
    require_grids(cfg)?;
    let doc = load_source(cfg, opts)?;
    let genset_name = require(&cfg.genset, "genset")?;
    let generators = doc
        .genset(&genset_name)
        .ok_or_else(|| RunError::Validation(format!("source has no genset `{genset_name}`")))?
        .to_vec();
    let states = resolve_states(&doc, &cfg.states)?;
    let family = model_family(cfg, opts)?;
    let grids = grids_from(cfg, states);
    let estimator = Estimator {
        source: &doc.structure,
        family: &family,
        schedule: &cfg.schedule,
        cfg: estimator_config(cfg, opts),
    };
    let mut notes = Vec::new();
    if let Some(note) = mode_note(cfg.mode, doc.structure.signature.metric_in_states) {
        notes.push(note);
    }
    let outcome = if dimension {
        estimator.entropy_dimension(&generators, &grids)?
    } else {
        estimator.entropy(&generators, &grids)?
    };
    Ok((outcome, notes))
}

/// Entropy dimension of a group document's generating set against the
/// symmetric-group model family.
pub fn run_sofic_dim(
    cfg: &ExperimentConfig,
    opts: &RunOptions<'_>,
) -> Result<ScenarioResult, RunError> {
    if cfg.model.as_deref().unwrap_or("sym") != "sym" {
        return Err(RunError::Validation(
            "sofic_dim runs against the sym model".into(),
        ));
    }
    let mut with_model = cfg.clone();
    with_model.model = Some("sym".into());
    let (outcome, notes) = generic_outcome(&with_model, opts, true)?;
    let hash = config_hash(&serialize_experiment(cfg));
    let written = write_outputs(
        "sofic_dim",
        &outcome.tables,
        &outcome.estimate,
        &hash,
        None,
        None,
        opts.out_dir,
    )?;
    Ok(ScenarioResult {
        name: "sofic_dim".into(),
        config_hash: hash,
        table_paths: written.table_paths,
        estimate_path: written.estimate_path,
        estimate: outcome.estimate,
        reference: None,
        provenance: "exhaustive enumeration at the scheduled r".into(),
        deviation: None,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use microstate_entropy::dsl::parse_experiment;
    use std::path::PathBuf;

    fn scratch(name: &str) -> PathBuf {
        let dir =
            std::env::temp_dir().join(format!("msentropy-scenarios-{}-{name}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn single_cell_partition_has_zero_entropy() {
        let cfg = parse_experiment(
            "format 1\nscenario bowen\natoms 2\nweights 1/2, 1/2\npartition a, a\naction_g 2 1\nwindow e, g\nr 4, 8\ndelta 0.1\neps 0.01\n",
        )
        .unwrap();
        let out = scratch("single-cell");
        let opts = RunOptions {
            base_dir: &out,
            out_dir: &out,
            seed: 0,
            node_budget: None,
        };
        let result = run_bowen(&cfg, &opts).unwrap();
        assert_eq!(result.estimate.value, 0.0);
        assert_eq!(result.estimate.sequence, vec![0.0, 0.0]);
    }

    #[test]
    fn missing_action_is_a_validation_error() {
        let cfg = parse_experiment(
            "format 1\nscenario bowen\natoms 2\npartition a, b\nwindow e, g\nr 4\ndelta 0.1\neps 0.01\n",
        )
        .unwrap();
        let out = scratch("missing-action");
        let opts = RunOptions {
            base_dir: &out,
            out_dir: &out,
            seed: 0,
            node_budget: None,
        };
        let err = run_bowen(&cfg, &opts).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("action_g"), "{err}");
    }

    #[test]
    fn weight_breaking_action_is_rejected() {
        let cfg = parse_experiment(
            "format 1\nscenario bowen\natoms 2\nweights 1/4, 3/4\npartition a, b\naction_g 2 1\nwindow e, g\nr 4\ndelta 0.1\neps 0.01\n",
        )
        .unwrap();
        let out = scratch("bad-weights");
        let opts = RunOptions {
            base_dir: &out,
            out_dir: &out,
            seed: 0,
            node_budget: None,
        };
        let err = run_bowen(&cfg, &opts).unwrap_err();
        assert!(err.to_string().contains("preserve"), "{err}");
    }
}

/// Generic entropy of a structure document's generating set.
pub fn run_entropy(
    cfg: &ExperimentConfig,
    opts: &RunOptions<'_>,
) -> Result<ScenarioResult, RunError> {
    let (outcome, notes) = generic_outcome(cfg, opts, false)?;
    let hash = config_hash(&serialize_experiment(cfg));
    let written = write_outputs(
        "entropy",
        &outcome.tables,
        &outcome.estimate,
        &hash,
        None,
        None,
        opts.out_dir,
    )?;
    Ok(ScenarioResult {
        name: "entropy".into(),
        config_hash: hash,
        table_paths: written.table_paths,
        estimate_path: written.estimate_path,
        estimate: outcome.estimate,
        reference: None,
        provenance: "grid estimate (certified bound labels in the schedule string)".into(),
        deviation: None,
        notes,
    })
}
