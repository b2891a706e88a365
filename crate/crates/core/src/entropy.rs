//! Assembly of finite-scale entropy estimates.
//!
//! For each scheduled model index `r` the estimator builds or counts a
//! microstate space, takes a separation number under the probe-sup
//! distance, and normalizes the log-count by the Boltzmann function
//! `N(r)`. Estimates over the infinite index families of the definitions
//! are realized as min/max over declared finite grids and labeled as the
//! corresponding certified bounds (upper for infimum stages, lower for
//! supremum stages) — never as true limit values. The limit over `r` is a
//! configurable tail statistic over the schedule, with the whole sequence
//! always reported.
//!
//! Values live in the extended reals: `-inf` (empty microstate space)
//! propagates through every reduction.

use num_bigint::BigUint;
use rayon::prelude::*;
use thiserror::Error;

use crate::counting::{
    count_bowen_microstates, count_partition_microstates, ln_biguint, CountError, CountKind,
    CountOutcome,
};
use crate::microstate::{
    enumerate_microstates, sample_microstates, EngineError, MicrostateMode, MicrostateSpec,
};
use crate::packing::{packing_number_of_microstates, PackingKind, SolverBudget};
use crate::rat::{to_f64, Rat};
use crate::sig::{generate_terms, symbol_closure, StId};
use crate::structure::{
    dynamical_measure_algebra_with_budget, measure_algebra_with_budget,
    symmetric_group_with_budget, BuildError, FiniteStructure, SoficMap, DEFAULT_CELL_BUDGET,
};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    E,
    Two,
}

impl LogBase {
    pub fn log(&self, x: f64) -> f64 {
        match self {
            LogBase::E => x.ln(),
            LogBase::Two => x.log2(),
        }
    }

    /// Converts a natural-log quantity into this base.
    pub fn from_nats(&self, nats: f64) -> f64 {
        match self {
            LogBase::E => nats,
            LogBase::Two => nats / std::f64::consts::LN_2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LogBase::E => "e",
            LogBase::Two => "2",
        }
    }
}

/// The Boltzmann normalization `N(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    R,
    RLogR,
    RSquared,
}

impl Normalization {
    pub fn value(&self, r: u64, base: LogBase) -> f64 {
        match self {
            Normalization::R => r as f64,
            Normalization::RLogR => r as f64 * base.log(r as f64),
            Normalization::RSquared => (r as f64) * (r as f64),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::R => "r",
            Normalization::RLogR => "r_log_r",
            Normalization::RSquared => "r_squared",
        }
    }
}

/// The packing normalization `L(ε)` used by the dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackingNorm {
    One,
    LogEps,
}

impl PackingNorm {
    pub fn value(&self, eps: Rat, base: LogBase) -> f64 {
        match self {
            PackingNorm::One => 1.0,
            PackingNorm::LogEps => base.log(to_f64(eps)).abs(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PackingNorm::One => "one",
            PackingNorm::LogEps => "log_eps",
        }
    }
}

/// How the reported value is read off a finite sequence standing in for a
/// limit: its last entry, or the extremum over a tail window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailStatistic {
    Last,
    MaxTail(usize),
    MinTail(usize),
}

impl TailStatistic {
    pub fn as_str(&self) -> String {
        match self {
            TailStatistic::Last => "last".to_string(),
            TailStatistic::MaxTail(w) => format!("max_tail({w})"),
            TailStatistic::MinTail(w) => format!("min_tail({w})"),
        }
    }
}

pub fn apply_statistic(seq: &[f64], stat: TailStatistic) -> f64 {
    debug_assert!(!seq.is_empty());
    match stat {
        TailStatistic::Last => *seq.last().unwrap(),
        TailStatistic::MaxTail(w) => {
            let w = w.clamp(1, seq.len());
            seq[seq.len() - w..]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        }
        TailStatistic::MinTail(w) => {
            let w = w.clamp(1, seq.len());
            seq[seq.len() - w..]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Spread of the last `window` entries; `None` with fewer than two
/// entries, `0` when they all agree (including all `-inf`).
pub fn tail_oscillation(seq: &[f64], window: usize) -> Option<f64> {
    if seq.len() < 2 {
        return None;
    }
    let w = window.clamp(2, seq.len());
    let tail = &seq[seq.len() - w..];
    if tail.iter().all(|v| v == &tail[0]) {
        return Some(0.0);
    }
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    Some(max - min)
}

/// One grid point of the estimate table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub r: u64,
    pub f_size: usize,
    pub r_depth: usize,
    pub delta: Rat,
    pub eps: Rat,
    pub n_raw: BigUint,
    pub log_n: f64,
    pub normalized: f64,
    pub kind: PackingKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTable {
    pub rows: Vec<TableRow>,
    pub normalization: Normalization,
    pub packing_norm: PackingNorm,
    pub log_base: LogBase,
    pub mode: MicrostateMode,
    /// Human description of the schedule and the probe set.
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEstimate {
    /// Extended real; `-inf` when every admissible count vanishes.
    pub value: f64,
    /// The sequence the value was read from: per-`r` normalized values for
    /// entropy estimates, per-`ε` (decreasing) values for dimensions.
    pub sequence: Vec<f64>,
    pub statistic: TailStatistic,
    /// Spread over the statistic's tail window; settled runs are near 0.
    pub oscillation: Option<f64>,
    /// Set when some row fell back from exact enumeration to sampling.
    pub partial: bool,
    /// Provenance: grids, reductions, and bound direction.
    pub schedule: String,
}

impl EntropyEstimate {
    fn from_sequence(seq: Vec<f64>, stat: TailStatistic, partial: bool, schedule: String) -> Self {
        let value = apply_statistic(&seq, stat);
        let oscillation = tail_oscillation(&seq, 3);
        EntropyEstimate {
            value,
            sequence: seq,
            statistic: stat,
            oscillation,
            partial,
            schedule,
        }
    }
}

/// The built-in asymptotic model families.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelFamily {
    MeasureAlgebra,
    SymmetricGroup,
    /// Measure algebras extended along a sofic map over the given window.
    Dynamical {
        sofic: SoficMap,
        window: Vec<String>,
    },
}

impl ModelFamily {
    pub fn build(&self, r: u64, cell_budget: u128) -> Result<FiniteStructure, BuildError> {
        match self {
            ModelFamily::MeasureAlgebra => measure_algebra_with_budget(r as u32, cell_budget),
            ModelFamily::SymmetricGroup => symmetric_group_with_budget(r as u32, cell_budget),
            ModelFamily::Dynamical { sofic, window } => {
                let perms: Vec<(String, crate::perm::Perm)> = window
                    .iter()
                    .map(|s| (s.clone(), sofic.image(s, r)))
                    .collect();
                dynamical_measure_algebra_with_budget(r as u32, &perms, cell_budget)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::MeasureAlgebra => "measure_algebra",
            ModelFamily::SymmetricGroup => "sym",
            ModelFamily::Dynamical { .. } => "dynamical_measure_algebra",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    Enumerate,
    Sample { n: u64, cap: usize },
}

#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub normalization: Normalization,
    pub packing_norm: PackingNorm,
    pub log_base: LogBase,
    pub mode: MicrostateMode,
    pub engine: EngineMode,
    pub statistic: TailStatistic,
    pub enum_budget: u64,
    pub solver: SolverBudget,
    pub greedy_restarts: u32,
    pub seed: u64,
    pub model_cell_budget: u128,
    /// Sample size used when enumeration falls back past its budget.
    pub fallback_samples: u64,
    pub sample_cap: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            normalization: Normalization::R,
            packing_norm: PackingNorm::One,
            log_base: LogBase::E,
            mode: MicrostateMode::Ms,
            engine: EngineMode::Enumerate,
            statistic: TailStatistic::Last,
            enum_budget: crate::microstate::DEFAULT_ENUM_BUDGET,
            solver: SolverBudget::default(),
            greedy_restarts: 0,
            seed: 0,
            model_cell_budget: DEFAULT_CELL_BUDGET,
            fallback_samples: 50_000,
            sample_cap: 4096,
        }
    }
}

/// The grid realization of the definition's index families.
#[derive(Debug, Clone)]
pub struct Grids {
    pub deltas: Vec<Rat>,
    /// Ascending; the dimension walks them in decreasing order.
    pub epsilons: Vec<Rat>,
    /// Term-depth bounds for the condition sets (the selected state
    /// symbols are fixed across the grid).
    pub r_depths: Vec<usize>,
    pub states: Vec<StId>,
    /// Closure depths generating the chain of finite subsets.
    pub f_chain_depths: Vec<usize>,
    /// Depth bound approximating the full term closure of the generators.
    pub closure_depth: usize,
    pub e_grid: EGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EGrid {
    /// A single probe set: the generators themselves.
    Full,
    /// One singleton probe per generator.
    Singletons,
}

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Count(#[from] CountError),
    #[error("generator set must be nonempty")]
    EmptyGenerators,
    #[error("probe grid over the generators must be nonempty")]
    EmptyEGrid,
    #[error("grid `{0}` must be nonempty")]
    EmptyGrid(&'static str),
    #[error("model schedule must be nonempty and strictly increasing")]
    BadSchedule,
    #[error("normalization r log r needs every scheduled r to be at least 2")]
    UnitIndexWithLogNormalization,
    #[error("packing normalization |log eps| is undefined at eps = 1")]
    UnitEpsilon,
}

pub struct Estimator<'a> {
    pub source: &'a FiniteStructure,
    pub family: &'a ModelFamily,
    pub schedule: &'a [u64],
    pub cfg: EstimatorConfig,
}

/// Estimate plus the per-probe tables behind it, retained for audit.
#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub estimate: EntropyEstimate,
    pub tables: Vec<EntropyTable>,
}

// normalized values indexed by (f, depth, delta, eps, r)
struct Cube {
    dims: [usize; 5],
    vals: Vec<f64>,
}

impl Cube {
    fn new(dims: [usize; 5]) -> Cube {
        Cube {
            dims,
            vals: vec![f64::NEG_INFINITY; dims.iter().product()],
        }
    }

    fn idx(&self, i: [usize; 5]) -> usize {
        self.dims
            .iter()
            .zip(i)
            .fold(0, |acc, (dim, at)| acc * dim + at)
    }

    fn get(&self, i: [usize; 5]) -> f64 {
        self.vals[self.idx(i)]
    }

    fn set(&mut self, i: [usize; 5], v: f64) {
        let at = self.idx(i);
        self.vals[at] = v;
    }
}

impl Estimator<'_> {
    fn validate_schedule(&self) -> Result<(), EstimatorError> {
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EstimatorError::BadSchedule);
        }
        if self.cfg.normalization == Normalization::RLogR && self.schedule.iter().any(|&r| r < 2) {
            return Err(EstimatorError::UnitIndexWithLogNormalization);
        }
        Ok(())
    }

    fn validate_grids(&self, grids: &Grids) -> Result<(), EstimatorError> {
        if grids.deltas.is_empty() {
            return Err(EstimatorError::EmptyGrid("delta"));
        }
        if grids.epsilons.is_empty() {
            return Err(EstimatorError::EmptyGrid("eps"));
        }
        if grids.r_depths.is_empty() {
            return Err(EstimatorError::EmptyGrid("term_depth"));
        }
        if grids.f_chain_depths.is_empty() {
            return Err(EstimatorError::EmptyGrid("fchain_depths"));
        }
        if self.cfg.packing_norm == PackingNorm::LogEps
            && grids.epsilons.iter().any(|&e| e == crate::rat::rat(1, 1))
        {
            return Err(EstimatorError::UnitEpsilon);
        }
        Ok(())
    }

    fn models(&self) -> Result<Vec<FiniteStructure>, EstimatorError> {
        self.schedule
            .iter()
            .map(|&r| Ok(self.family.build(r, self.cfg.model_cell_budget)?))
            .collect()
    }

    /// Fixed-parameter estimate: one probe set, one subset, one condition
    /// depth, one tolerance, one scale, swept over the model schedule.
    pub fn point_estimate(
        &self,
        probe: &[usize],
        subset: &[usize],
        term_depth: usize,
        states: &[StId],
        delta: Rat,
        eps: Rat,
    ) -> Result<(EntropyEstimate, EntropyTable), EstimatorError> {
        let grids = Grids {
            deltas: vec![delta],
            epsilons: vec![eps],
            r_depths: vec![term_depth],
            states: states.to_vec(),
            f_chain_depths: vec![0],
            closure_depth: 0,
            e_grid: EGrid::Full,
        };
        let (table, cube, partial) = self.compute_table(probe, &[subset.to_vec()], &grids)?;
        let seq: Vec<f64> = (0..self.schedule.len())
            .map(|ri| cube.get([0, 0, 0, 0, ri]))
            .collect();
        let schedule = format!(
            "point estimate at |F|={} depth={} delta={} eps={}; statistic {} over r {:?}",
            subset.len(),
            term_depth,
            delta,
            eps,
            self.cfg.statistic.as_str(),
            self.schedule
        );
        let est = EntropyEstimate::from_sequence(seq, self.cfg.statistic, partial, schedule);
        Ok((est, table))
    }

    /// Upper bound of the infimum stage at one scale: the minimum of the
    /// point values over the (tolerance, depth, subset-chain) grid.
    pub fn lattice_infimum(
        &self,
        probe: &[usize],
        chain_base: &[usize],
        grids: &Grids,
        eps: Rat,
    ) -> Result<(EntropyEstimate, EntropyTable), EstimatorError> {
        let mut narrowed = grids.clone();
        narrowed.epsilons = vec![eps];
        let chain = self.subset_chain(chain_base, &narrowed);
        let (table, cube, partial) = self.compute_table(probe, &chain, &narrowed)?;
        let (value_seq, _) = reduce_infimum(&cube, 0, self.cfg.statistic);
        let schedule = format!(
            "upper bound: min over {} subsets x {} depths x {} tolerances at eps={}; statistic {} over r {:?}",
            chain.len(),
            narrowed.r_depths.len(),
            narrowed.deltas.len(),
            eps,
            self.cfg.statistic.as_str(),
            self.schedule
        );
        let est = EntropyEstimate::from_sequence(value_seq, self.cfg.statistic, partial, schedule);
        Ok((est, table))
    }

    /// Entropy of a generator set: a certified lower bound of the
    /// supremum stage over the probe and scale grids, each inner value an
    /// upper bound of its infimum stage.
    pub fn entropy(
        &self,
        generators: &[usize],
        grids: &Grids,
    ) -> Result<EstimateOutcome, EstimatorError> {
        self.estimate_over_probes(generators, generators, grids, false)
    }

    /// Entropy dimension. For a finite generator set the probe is the set
    /// itself; the value is the tail statistic over the decreasing scale
    /// grid of scale-normalized infima.
    pub fn entropy_dimension(
        &self,
        generators: &[usize],
        grids: &Grids,
    ) -> Result<EstimateOutcome, EstimatorError> {
        self.dimension_over(generators, generators, grids)
    }

    /// Entropy of `g` in the presence of `h`: closures run over the union
    /// while probes stay inside `g`.
    pub fn relative_entropy(
        &self,
        g: &[usize],
        h: &[usize],
        grids: &Grids,
    ) -> Result<EstimateOutcome, EstimatorError> {
        let union = dedup_union(g, h);
        self.estimate_over_probes(g, &union, grids, false)
    }

    pub fn relative_entropy_dimension(
        &self,
        g: &[usize],
        h: &[usize],
        grids: &Grids,
    ) -> Result<EstimateOutcome, EstimatorError> {
        let union = dedup_union(g, h);
        self.dimension_over(g, &union, grids)
    }

    fn probe_grid(
        &self,
        generators: &[usize],
        grids: &Grids,
    ) -> Result<Vec<Vec<usize>>, EstimatorError> {
        if generators.is_empty() {
            return Err(EstimatorError::EmptyGenerators);
        }
        let probes: Vec<Vec<usize>> = match grids.e_grid {
            EGrid::Full => vec![generators.to_vec()],
            EGrid::Singletons => generators.iter().map(|&g| vec![g]).collect(),
        };
        if probes.is_empty() {
            return Err(EstimatorError::EmptyEGrid);
        }
        Ok(probes)
    }

    fn estimate_over_probes(
        &self,
        generators: &[usize],
        chain_generators: &[usize],
        grids: &Grids,
        _dimension: bool,
    ) -> Result<EstimateOutcome, EstimatorError> {
        self.validate_schedule()?;
        self.validate_grids(grids)?;
        let probes = self.probe_grid(generators, grids)?;
        let chain = self.subset_chain(chain_generators, grids);
        let mut tables = Vec::new();
        let mut best: Option<(f64, Vec<f64>, bool)> = None;
        let mut any_partial = false;
        for probe in &probes {
            let (table, cube, partial) = self.compute_table(probe, &chain, grids)?;
            any_partial |= partial;
            for ei in 0..grids.epsilons.len() {
                let (seq, value) = {
                    let (seq, _) = reduce_infimum(&cube, ei, self.cfg.statistic);
                    let v = apply_statistic(&seq, self.cfg.statistic);
                    (seq, v)
                };
                let better = match &best {
                    None => true,
                    Some((bv, _, _)) => value > *bv,
                };
                if better {
                    best = Some((value, seq, partial));
                }
            }
            tables.push(table);
        }
        let (_, seq, sel_partial) = best.expect("probe and eps grids are nonempty");
        let schedule = format!(
            "lower bound of sup over {} probes x {} scales of grid infima ({} subsets x {} depths x {} tolerances); statistic {} over r {:?}",
            probes.len(),
            grids.epsilons.len(),
            chain.len(),
            grids.r_depths.len(),
            grids.deltas.len(),
            self.cfg.statistic.as_str(),
            self.schedule
        );
        let estimate = EntropyEstimate::from_sequence(
            seq,
            self.cfg.statistic,
            sel_partial || any_partial,
            schedule,
        );
        Ok(EstimateOutcome { estimate, tables })
    }

    fn dimension_over(
        &self,
        probe_generators: &[usize],
        chain_generators: &[usize],
        grids: &Grids,
    ) -> Result<EstimateOutcome, EstimatorError> {
        self.validate_schedule()?;
        self.validate_grids(grids)?;
        if probe_generators.is_empty() {
            return Err(EstimatorError::EmptyGenerators);
        }
        let chain = self.subset_chain(chain_generators, grids);
        let probe = probe_generators.to_vec();
        let (table, cube, partial) = self.compute_table(&probe, &chain, grids)?;
        // walk scales from coarse to fine: the sequence reported to the
        // tail statistic is over decreasing eps
        let mut seq = Vec::with_capacity(grids.epsilons.len());
        for ei in (0..grids.epsilons.len()).rev() {
            let (r_seq, _) = reduce_infimum(&cube, ei, self.cfg.statistic);
            let h_at_eps = apply_statistic(&r_seq, self.cfg.statistic);
            let l = self
                .cfg
                .packing_norm
                .value(grids.epsilons[ei], self.cfg.log_base);
            seq.push(if h_at_eps == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                h_at_eps / l
            });
        }
        let schedule = format!(
            "dimension: probe = generators; tail statistic {} over decreasing eps {:?}; L = {}",
            self.cfg.statistic.as_str(),
            grids
                .epsilons
                .iter()
                .rev()
                .map(|e| to_f64(*e))
                .collect::<Vec<_>>(),
            self.cfg.packing_norm.as_str()
        );
        let estimate = EntropyEstimate::from_sequence(seq, self.cfg.statistic, partial, schedule);
        Ok(EstimateOutcome {
            estimate,
            tables: vec![table],
        })
    }

    // F_k = closure of the generators at depth k, clamped inside the
    // ambient closure bound so every subset stays within B = G^T.
    fn subset_chain(&self, generators: &[usize], grids: &Grids) -> Vec<Vec<usize>> {
        grids
            .f_chain_depths
            .iter()
            .map(|&k| symbol_closure(generators, k.min(grids.closure_depth), self.source).elements)
            .collect()
    }

    // The grid walk shared by every public operation: one probe set, a
    // chain of subsets, and the (depth, delta, eps, r) grids. Returns the
    // audit table (rows in (r, F, depth, delta, eps) order), the value
    // cube, and whether any row fell back to sampling.
    fn compute_table(
        &self,
        probe: &[usize],
        chain: &[Vec<usize>],
        grids: &Grids,
    ) -> Result<(EntropyTable, Cube, bool), EstimatorError> {
        let models = self.models()?;
        let n_f = chain.len();
        let n_d = grids.r_depths.len();
        let n_l = grids.deltas.len();
        let n_e = grids.epsilons.len();
        let n_r = models.len();
        let terms_by_depth: Vec<Vec<crate::sig::Term>> = grids
            .r_depths
            .iter()
            .map(|&d| generate_terms(&self.source.signature, d))
            .collect();

        struct ItemOut {
            counts: Vec<(usize, PackingKind)>,
            fell_back: bool,
        }

        let mut items: Vec<(usize, usize, usize, usize)> = Vec::new();
        for fi in 0..n_f {
            for di in 0..n_d {
                for li in 0..n_l {
                    for ri in 0..n_r {
                        items.push((fi, di, li, ri));
                    }
                }
            }
        }

        let outs: Vec<Result<ItemOut, EstimatorError>> = items
            .par_iter()
            .map(|&(fi, di, li, ri)| {
                let spec = MicrostateSpec {
                    subset: chain[fi].clone(),
                    terms: terms_by_depth[di].clone(),
                    state_symbols: grids.states.clone(),
                    tolerance: grids.deltas[li],
                    mode: self.cfg.mode,
                    domain_preserving: true,
                };
                let model = &models[ri];
                let item_seed = mix_seed(self.cfg.seed, fi, di, li, ri);
                let (set, fell_back) = match self.cfg.engine {
                    EngineMode::Enumerate => {
                        match enumerate_microstates(&spec, self.source, model, self.cfg.enum_budget)
                        {
                            Ok(set) => (set, false),
                            Err(EngineError::BudgetExceeded { .. }) => {
                                let out = sample_microstates(
                                    &spec,
                                    self.source,
                                    model,
                                    self.cfg.fallback_samples,
                                    item_seed,
                                    self.cfg.sample_cap,
                                )?;
                                (out.kept, true)
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                    EngineMode::Sample { n, cap } => {
                        let out = sample_microstates(&spec, self.source, model, n, item_seed, cap)?;
                        (out.kept, false)
                    }
                };
                let counts: Vec<(usize, PackingKind)> = grids
                    .epsilons
                    .iter()
                    .map(|&eps| {
                        let res = packing_number_of_microstates(
                            &set,
                            probe,
                            eps,
                            model,
                            self.cfg.solver,
                            self.cfg.greedy_restarts,
                            item_seed,
                        );
                        let kind = if fell_back {
                            PackingKind::SeparatedGreedyLower
                        } else {
                            res.kind
                        };
                        (res.count, kind)
                    })
                    .collect();
                Ok(ItemOut { counts, fell_back })
            })
            .collect();

        let mut cube = Cube::new([n_f, n_d, n_l, n_e, n_r]);
        let mut any_fell_back = false;
        let mut per_item: Vec<ItemOut> = Vec::with_capacity(outs.len());
        for out in outs {
            let out = out?;
            any_fell_back |= out.fell_back;
            per_item.push(out);
        }
        for (&(fi, di, li, ri), out) in items.iter().zip(&per_item) {
            for (ei, &(count, _)) in out.counts.iter().enumerate() {
                let log_nats = ln_biguint(&BigUint::from(count as u64));
                let log_n = self.cfg.log_base.from_nats(log_nats);
                let normalized = log_n
                    / self
                        .cfg
                        .normalization
                        .value(self.schedule[ri], self.cfg.log_base);
                cube.set([fi, di, li, ei, ri], normalized);
            }
        }

        // rows in (r, F, depth, delta, eps) order
        let mut rows = Vec::with_capacity(items.len() * n_e);
        for ri in 0..n_r {
            for (fi, subset) in chain.iter().enumerate() {
                for di in 0..n_d {
                    for li in 0..n_l {
                        let item = items
                            .iter()
                            .position(|&(a, b, c, d)| (a, b, c, d) == (fi, di, li, ri))
                            .expect("item exists");
                        for (ei, &(count, kind)) in per_item[item].counts.iter().enumerate() {
                            let log_nats = ln_biguint(&BigUint::from(count as u64));
                            let log_n = self.cfg.log_base.from_nats(log_nats);
                            let normalized = log_n
                                / self
                                    .cfg
                                    .normalization
                                    .value(self.schedule[ri], self.cfg.log_base);
                            rows.push(TableRow {
                                r: self.schedule[ri],
                                f_size: subset.len(),
                                r_depth: grids.r_depths[di],
                                delta: grids.deltas[li],
                                eps: grids.epsilons[ei],
                                n_raw: BigUint::from(count as u64),
                                log_n,
                                normalized,
                                kind,
                            });
                        }
                    }
                }
            }
        }
        let table = EntropyTable {
            rows,
            normalization: self.cfg.normalization,
            packing_norm: self.cfg.packing_norm,
            log_base: self.cfg.log_base,
            mode: self.cfg.mode,
            description: format!(
                "probe {:?}; family {}; schedule {:?}",
                probe,
                self.family.name(),
                self.schedule
            ),
        };
        Ok((table, cube, any_fell_back))
    }
}

fn dedup_union(g: &[usize], h: &[usize]) -> Vec<usize> {
    let mut out = g.to_vec();
    for &x in h {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn mix_seed(seed: u64, a: usize, b: usize, c: usize, d: usize) -> u64 {
    let mut x = seed
        ^ (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (b as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (c as u64).wrapping_mul(0x94D0_49BB_1331_11EB)
        ^ (d as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x
}

// min over the (subset, depth, tolerance) axes at a fixed scale index,
// taken pointwise per r after the statistic selects the representative
// sequence; returns the selected sequence and its index.
fn reduce_infimum(cube: &Cube, ei: usize, stat: TailStatistic) -> (Vec<f64>, [usize; 3]) {
    let [n_f, n_d, n_l, _, n_r] = cube.dims;
    let mut best_val = f64::INFINITY;
    let mut best_idx = [0usize; 3];
    for fi in 0..n_f {
        for di in 0..n_d {
            for li in 0..n_l {
                let seq: Vec<f64> = (0..n_r).map(|ri| cube.get([fi, di, li, ei, ri])).collect();
                let v = apply_statistic(&seq, stat);
                if v < best_val {
                    best_val = v;
                    best_idx = [fi, di, li];
                }
            }
        }
    }
    let [fi, di, li] = best_idx;
    let seq: Vec<f64> = (0..n_r).map(|ri| cube.get([fi, di, li, ei, ri])).collect();
    (seq, best_idx)
}

/// Convergence table for the type-class counting path: per `(r, δ, ε)`
/// row the exact admissible-map count, its log, and the normalized value.
/// The estimate is the minimum over tolerances of the tail statistic.
pub fn partition_table(
    masses: &[Rat],
    schedule: &[u64],
    deltas: &[Rat],
    epsilons: &[Rat],
    normalization: Normalization,
    log_base: LogBase,
    statistic: TailStatistic,
) -> Result<(EntropyTable, EntropyEstimate), CountError> {
    let mut rows = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for &delta in deltas {
        let mut seq = Vec::with_capacity(schedule.len());
        for &r in schedule {
            let count = count_partition_microstates(masses, r, delta)?;
            let log_n = log_base.from_nats(ln_biguint(&count));
            let normalized = log_n / normalization.value(r, log_base);
            seq.push(normalized);
            for &eps in epsilons {
                rows.push(TableRow {
                    r,
                    f_size: masses.len(),
                    r_depth: 0,
                    delta,
                    eps,
                    n_raw: count.clone(),
                    log_n,
                    normalized,
                    kind: PackingKind::CountExact,
                });
            }
        }
        let v = apply_statistic(&seq, statistic);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, seq));
        }
    }
    let (_, seq) = best.expect("tolerance grid is nonempty");
    // present rows in (r, delta, eps) order
    rows.sort_by(|a, b| {
        (a.r, a.delta, a.eps)
            .partial_cmp(&(b.r, b.delta, b.eps))
            .expect("rationals order totally")
    });
    let schedule_desc = format!(
        "type-class count over r {:?}; min over {} tolerances; statistic {}",
        schedule,
        deltas.len(),
        statistic.as_str()
    );
    let estimate = EntropyEstimate::from_sequence(seq, statistic, false, schedule_desc);
    let table = EntropyTable {
        rows,
        normalization,
        packing_norm: PackingNorm::One,
        log_base,
        mode: MicrostateMode::Ms,
        description: format!(
            "partition masses {:?}",
            masses.iter().map(|m| to_f64(*m)).collect::<Vec<_>>()
        ),
    };
    Ok((table, estimate))
}

/// Convergence table for the joined-partition counting path along a sofic
/// map. `target` carries the source-side joined masses keyed by label
/// tuple, aligned with `window` order.
#[allow(clippy::too_many_arguments)]
pub fn bowen_table(
    target: &BTreeMap<Vec<usize>, Rat>,
    labels: usize,
    sofic: &SoficMap,
    window: &[String],
    schedule: &[u64],
    deltas: &[Rat],
    epsilons: &[Rat],
    normalization: Normalization,
    log_base: LogBase,
    statistic: TailStatistic,
    exact_budget: u64,
    samples: u64,
    seed: u64,
) -> Result<(EntropyTable, EntropyEstimate), CountError> {
    let mut rows = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut any_sampled = false;
    for &delta in deltas {
        let mut seq = Vec::with_capacity(schedule.len());
        for &r in schedule {
            let perms: Vec<crate::perm::Perm> = window.iter().map(|s| sofic.image(s, r)).collect();
            let CountOutcome {
                count,
                log_count,
                kind,
            } = count_bowen_microstates(
                target,
                &perms,
                labels,
                r,
                delta,
                exact_budget,
                samples,
                seed,
            )?;
            let sampled = kind == CountKind::Sampled;
            any_sampled |= sampled;
            let log_n = log_base.from_nats(log_count);
            let normalized = log_n / normalization.value(r, log_base);
            seq.push(normalized);
            for &eps in epsilons {
                rows.push(TableRow {
                    r,
                    f_size: labels,
                    r_depth: 0,
                    delta,
                    eps,
                    n_raw: count.clone(),
                    log_n,
                    normalized,
                    kind: if sampled {
                        PackingKind::CountSampled
                    } else {
                        PackingKind::CountExact
                    },
                });
            }
        }
        let v = apply_statistic(&seq, statistic);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, seq));
        }
    }
    let (_, seq) = best.expect("tolerance grid is nonempty");
    rows.sort_by(|a, b| {
        (a.r, a.delta, a.eps)
            .partial_cmp(&(b.r, b.delta, b.eps))
            .expect("rationals order totally")
    });
    let schedule_desc = format!(
        "joined type-class count over r {:?}; window {:?}; min over {} tolerances; statistic {}",
        schedule,
        window,
        deltas.len(),
        statistic.as_str()
    );
    let estimate = EntropyEstimate::from_sequence(seq, statistic, any_sampled, schedule_desc);
    let table = EntropyTable {
        rows,
        normalization,
        packing_norm: PackingNorm::One,
        log_base,
        mode: MicrostateMode::Ms,
        description: format!("joined target over window {window:?}"),
    };
    Ok((table, estimate))
}
