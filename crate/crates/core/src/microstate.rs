//! Validity checking, enumeration, and sampling of microstate spaces.
//!
//! A microstate is a map from a finite ordered subset of a source
//! structure into a model structure. Validity is relative to a
//! [`MicrostateSpec`]: the map must approximately commute with the
//! selected term instances (morphism conditions), approximately preserve
//! the selected state values, respect domains, and — in contractive mode —
//! approximately respect the metric. All tolerance comparisons are exact
//! rational comparisons with the non-strict convention `deviation ≤ δ`.

use num_traits::Signed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rat::{rat, Rat};
use crate::sig::{eval_term, term_constraints, StId, Term, Tuples};
use crate::structure::FiniteStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MicrostateMode {
    /// Morphism, state, and domain conditions; the metric enters only
    /// through the state named `d` when the signature carries it.
    Ms,
    /// Additionally requires the map to be tolerance-contractive.
    Cms,
}

/// Which conditions a map must satisfy to count as a microstate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicrostateSpec {
    /// The ordered source subset the maps are defined on.
    pub subset: Vec<usize>,
    /// Selected terms (the morphism side of the condition set).
    pub terms: Vec<Term>,
    /// Selected state symbols.
    pub state_symbols: Vec<StId>,
    /// Tolerance; nonnegative.
    pub tolerance: Rat,
    pub mode: MicrostateMode,
    /// Normally true; the relaxation that drops domain conditions is kept
    /// explicit.
    pub domain_preserving: bool,
}

/// A map from the spec's subset into a model carrier, stored as the image
/// vector aligned with the subset order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Microstate {
    pub subset: Vec<usize>,
    pub images: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Morphism,
    State,
    Domain,
    Contractive,
}

/// One failed condition, with the witnessing instance and the achieved
/// deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub witness: String,
    pub deviation: Rat,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("enumeration budget exhausted after {visited} candidate extensions (budget {budget}); switch to count or sample mode")]
    BudgetExceeded { visited: u64, budget: u64 },
    #[error("source and model interpret different signatures")]
    SignatureMismatch,
    #[error("microstate subset contains element {0} outside the source carrier of size {1}")]
    SubsetOutOfRange(usize, usize),
    #[error("invalid term in the condition set: {0}")]
    BadTerm(String),
}

/// Morphism conditions: for every selected term instance
/// `t(a_1..a_n) = a_out` inside the subset, the model-side distance
/// between `σ(a_out)` and `t(σ(a_1)..σ(a_n))` must stay within tolerance.
pub fn check_morphism(
    ms: &Microstate,
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
) -> Vec<Violation> {
    let constraints = term_constraints(&spec.subset, &spec.terms, source)
        .expect("spec terms are valid over the source");
    let pos_of = |elem: usize| spec.subset.iter().position(|&a| a == elem).unwrap();
    let mut out = Vec::new();
    for c in &constraints {
        let args: Vec<usize> = c.args.iter().map(|&a| ms.images[pos_of(a)]).collect();
        let image_out = ms.images[pos_of(c.output)];
        let evaluated = eval_term(&spec.terms[c.term], &args, model)
            .expect("spec terms are valid over the model");
        let dev = model.distance(image_out, evaluated);
        if dev > spec.tolerance {
            out.push(Violation {
                kind: ViolationKind::Morphism,
                witness: format!(
                    "{} at ({})",
                    spec.terms[c.term].to_text(&source.signature),
                    c.args
                        .iter()
                        .map(|&a| source.elements[a].clone())
                        .collect::<Vec<_>>()
                        .join(",")
                ),
                deviation: dev,
            });
        }
    }
    out
}

/// State conditions: for every selected state symbol and argument tuple
/// from the subset, source and model state values must agree within
/// tolerance.
pub fn check_states(
    ms: &Microstate,
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
) -> Vec<Violation> {
    let n = spec.subset.len();
    let mut out = Vec::new();
    for &sym in &spec.state_symbols {
        let arity = source.signature.state_arity(sym);
        for tuple in Tuples::new(n, arity) {
            let src_args: Vec<usize> = tuple.iter().map(|&i| spec.subset[i]).collect();
            let img_args: Vec<usize> = tuple.iter().map(|&i| ms.images[i]).collect();
            let dev =
                (source.state_value(sym, &src_args) - model.state_value(sym, &img_args)).abs();
            if dev > spec.tolerance {
                out.push(Violation {
                    kind: ViolationKind::State,
                    witness: format!(
                        "{}({})",
                        source.signature.states[sym.0].name,
                        src_args
                            .iter()
                            .map(|&a| source.elements[a].clone())
                            .collect::<Vec<_>>()
                            .join(",")
                    ),
                    deviation: dev,
                });
            }
        }
    }
    out
}

/// Domain conditions: the image of each element must lie in every model
/// domain whose label contains the element on the source side.
pub fn check_domains(
    ms: &Microstate,
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
) -> Vec<Violation> {
    if !spec.domain_preserving {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (pos, &a) in spec.subset.iter().enumerate() {
        for d in source.domains_of(a) {
            if !model.domains[d][ms.images[pos]] {
                out.push(Violation {
                    kind: ViolationKind::Domain,
                    witness: format!(
                        "{} ∉ {}",
                        source.elements[a], source.signature.domain_labels[d]
                    ),
                    deviation: rat(0, 1),
                });
            }
        }
    }
    out
}

/// Metric conditions over all pairs from the subset. With the metric
/// among the states the two-sided form applies (and MS coincides with
/// CMS); otherwise the check runs only in contractive mode, one-sided.
pub fn check_contractive(
    ms: &Microstate,
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
) -> Vec<Violation> {
    let two_sided = source.signature.metric_in_states;
    if spec.mode == MicrostateMode::Ms && !two_sided {
        return Vec::new();
    }
    let n = spec.subset.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let src = source.distance(spec.subset[i], spec.subset[j]);
            let img = model.distance(ms.images[i], ms.images[j]);
            let dev = if two_sided {
                (src - img).abs()
            } else {
                img - src
            };
            if dev > spec.tolerance {
                out.push(Violation {
                    kind: ViolationKind::Contractive,
                    witness: format!(
                        "d({},{})",
                        source.elements[spec.subset[i]], source.elements[spec.subset[j]]
                    ),
                    deviation: dev,
                });
            }
        }
    }
    out
}

/// All four condition checks at once; empty iff the map is a valid
/// microstate for the spec.
pub fn check_all(
    ms: &Microstate,
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
) -> Vec<Violation> {
    let mut out = check_morphism(ms, spec, source, model);
    out.extend(check_states(ms, spec, source, model));
    out.extend(check_domains(ms, spec, source, model));
    out.extend(check_contractive(ms, spec, source, model));
    out
}

pub fn is_valid(
    ms: &Microstate,
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
) -> bool {
    check_all(ms, spec, source, model).is_empty()
}

// Compiled form of the condition set, keyed by the last subset position a
// condition touches so partial maps are rejected as early as possible.
struct CompiledSpec {
    n: usize,
    candidates: Vec<Vec<usize>>,
    term_checks: Vec<Vec<CompiledTermCheck>>,
    state_checks: Vec<Vec<CompiledStateCheck>>,
    pair_checks: Vec<Vec<(usize, Rat)>>,
    metric_form: MetricForm,
}

struct CompiledTermCheck {
    term: usize,
    arg_pos: Vec<usize>,
    out_pos: usize,
}

struct CompiledStateCheck {
    sym: StId,
    arg_pos: Vec<usize>,
    source_value: Rat,
}

#[derive(Clone, Copy, PartialEq)]
enum MetricForm {
    Skip,
    OneSided,
    TwoSided,
}

fn compile(
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
) -> Result<CompiledSpec, EngineError> {
    if source.signature != model.signature {
        return Err(EngineError::SignatureMismatch);
    }
    let n = spec.subset.len();
    for &a in &spec.subset {
        if a >= source.size() {
            return Err(EngineError::SubsetOutOfRange(a, source.size()));
        }
    }
    let pos_of = |elem: usize| -> usize {
        spec.subset
            .iter()
            .position(|&a| a == elem)
            .expect("constraint elements lie inside the subset")
    };

    let mut candidates: Vec<Vec<usize>> = Vec::with_capacity(n);
    for &a in &spec.subset {
        let required = if spec.domain_preserving {
            source.domains_of(a)
        } else {
            Vec::new()
        };
        let cands: Vec<usize> = (0..model.size())
            .filter(|&b| required.iter().all(|&d| model.domains[d][b]))
            .collect();
        candidates.push(cands);
    }

    let raw = term_constraints(&spec.subset, &spec.terms, source)
        .map_err(|e| EngineError::BadTerm(e.to_string()))?;
    let mut term_checks: Vec<Vec<CompiledTermCheck>> = (0..n).map(|_| Vec::new()).collect();
    for c in &raw {
        let arg_pos: Vec<usize> = c.args.iter().map(|&a| pos_of(a)).collect();
        let out_pos = pos_of(c.output);
        let last = arg_pos.iter().copied().chain([out_pos]).max().unwrap_or(0);
        term_checks[last].push(CompiledTermCheck {
            term: c.term,
            arg_pos,
            out_pos,
        });
    }
    // within a position, keep ascending arity then term index for a
    // reproducible pruning order
    for checks in &mut term_checks {
        checks.sort_by_key(|c| (c.arg_pos.len(), c.term));
    }

    let mut state_checks: Vec<Vec<CompiledStateCheck>> = (0..n).map(|_| Vec::new()).collect();
    for &sym in &spec.state_symbols {
        let arity = source.signature.state_arity(sym);
        for tuple in Tuples::new(n, arity) {
            let src_args: Vec<usize> = tuple.iter().map(|&i| spec.subset[i]).collect();
            let last = tuple.iter().copied().max().unwrap_or(0);
            state_checks[last].push(CompiledStateCheck {
                sym,
                arg_pos: tuple,
                source_value: source.state_value(sym, &src_args),
            });
        }
    }

    let metric_form = match (spec.mode, source.signature.metric_in_states) {
        (_, true) => MetricForm::TwoSided,
        (MicrostateMode::Cms, false) => MetricForm::OneSided,
        (MicrostateMode::Ms, false) => MetricForm::Skip,
    };
    let mut pair_checks: Vec<Vec<(usize, Rat)>> = (0..n).map(|_| Vec::new()).collect();
    if metric_form != MetricForm::Skip {
        for (j, checks) in pair_checks.iter_mut().enumerate() {
            for i in 0..j {
                checks.push((i, source.distance(spec.subset[i], spec.subset[j])));
            }
        }
    }

    Ok(CompiledSpec {
        n,
        candidates,
        term_checks,
        state_checks,
        pair_checks,
        metric_form,
    })
}

impl CompiledSpec {
    /// Checks every condition whose last touched position is `pos`, given
    /// images assigned for positions `0..=pos`.
    fn extension_ok(
        &self,
        images: &[usize],
        pos: usize,
        spec: &MicrostateSpec,
        model: &FiniteStructure,
    ) -> bool {
        for c in &self.term_checks[pos] {
            let args: Vec<usize> = c.arg_pos.iter().map(|&p| images[p]).collect();
            let evaluated = eval_unchecked_model(&spec.terms[c.term], &args, model);
            if model.distance(images[c.out_pos], evaluated) > spec.tolerance {
                return false;
            }
        }
        for c in &self.state_checks[pos] {
            let args: Vec<usize> = c.arg_pos.iter().map(|&p| images[p]).collect();
            let dev = (c.source_value - model.state_value(c.sym, &args)).abs();
            if dev > spec.tolerance {
                return false;
            }
        }
        for &(other, src_dist) in &self.pair_checks[pos] {
            let img = model.distance(images[other], images[pos]);
            let dev = match self.metric_form {
                MetricForm::TwoSided => (src_dist - img).abs(),
                MetricForm::OneSided => img - src_dist,
                MetricForm::Skip => continue,
            };
            if dev > spec.tolerance {
                return false;
            }
        }
        true
    }
}

fn eval_unchecked_model(t: &Term, args: &[usize], model: &FiniteStructure) -> usize {
    match t {
        Term::Var(i) => args[*i],
        Term::App(f, children) => {
            let vals: Vec<usize> = children
                .iter()
                .map(|c| eval_unchecked_model(c, args, model))
                .collect();
            model.op(*f, &vals)
        }
    }
}

pub const DEFAULT_ENUM_BUDGET: u64 = 20_000_000;

/// Enumerates exactly the valid microstates, in lexicographic image
/// order. Backtracking prunes a partial map as soon as any fully
/// instantiated condition exceeds the tolerance.
pub fn enumerate_microstates(
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
    budget: u64,
) -> Result<Vec<Microstate>, EngineError> {
    let compiled = compile(spec, source, model)?;
    let n = compiled.n;
    let mut out = Vec::new();
    if n == 0 {
        // the empty map is the single microstate on an empty subset
        out.push(Microstate {
            subset: Vec::new(),
            images: Vec::new(),
        });
        return Ok(out);
    }
    let mut images = vec![0usize; n];
    let mut choice = vec![0usize; n];
    let mut visited: u64 = 0;
    let mut pos = 0usize;
    loop {
        if choice[pos] >= compiled.candidates[pos].len() {
            if pos == 0 {
                break;
            }
            choice[pos] = 0;
            pos -= 1;
            choice[pos] += 1;
            continue;
        }
        visited += 1;
        if visited > budget {
            return Err(EngineError::BudgetExceeded { visited, budget });
        }
        images[pos] = compiled.candidates[pos][choice[pos]];
        if compiled.extension_ok(&images, pos, spec, model) {
            if pos + 1 == n {
                out.push(Microstate {
                    subset: spec.subset.clone(),
                    images: images.clone(),
                });
                choice[pos] += 1;
            } else {
                pos += 1;
                choice[pos] = 0;
            }
        } else {
            choice[pos] += 1;
        }
    }
    Ok(out)
}

/// Outcome of uniform sampling over domain-respecting maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleOutcome {
    pub valid: u64,
    pub total: u64,
    /// Valid microstates retained, up to the cap, in draw order.
    pub kept: Vec<Microstate>,
}

/// Draws `n` uniform domain-respecting maps (deterministic in the seed)
/// and counts how many pass every check.
pub fn sample_microstates(
    spec: &MicrostateSpec,
    source: &FiniteStructure,
    model: &FiniteStructure,
    n: u64,
    seed: u64,
    cap: usize,
) -> Result<SampleOutcome, EngineError> {
    let compiled = compile(spec, source, model)?;
    if compiled.candidates.iter().any(|c| c.is_empty()) {
        return Ok(SampleOutcome {
            valid: 0,
            total: n,
            kept: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = compiled.n;
    let mut valid = 0u64;
    let mut kept = Vec::new();
    for _ in 0..n {
        let images: Vec<usize> = (0..len)
            .map(|p| {
                let cands = &compiled.candidates[p];
                cands[rng.random_range(0..cands.len())]
            })
            .collect();
        let ok = (0..len).all(|pos| compiled.extension_ok(&images, pos, spec, model));
        if ok {
            valid += 1;
            if kept.len() < cap {
                kept.push(Microstate {
                    subset: spec.subset.clone(),
                    images,
                });
            }
        }
    }
    Ok(SampleOutcome {
        valid,
        total: n,
        kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sig::generate_terms;
    use crate::structure::{cyclic_group, measure_algebra, symmetric_group};

    fn group_spec(source: &FiniteStructure, delta: Rat) -> MicrostateSpec {
        let tau = source.signature.state("tau").unwrap();
        MicrostateSpec {
            subset: vec![0, 1], // e, g
            terms: generate_terms(&source.signature, 1),
            state_symbols: vec![tau],
            tolerance: delta,
            mode: MicrostateMode::Ms,
            domain_preserving: true,
        }
    }

    #[test]
    fn z2_into_sym2_has_exactly_one_microstate() {
        let source = cyclic_group(2);
        let model = symmetric_group(2).unwrap();
        let spec = group_spec(&source, rat(0, 1));
        let found = enumerate_microstates(&spec, &source, &model, 10_000).unwrap();
        assert_eq!(found.len(), 1);
        let id = model.element_index("p12").unwrap();
        let swap = model.element_index("p21").unwrap();
        assert_eq!(found[0].images, vec![id, swap]);
    }

    #[test]
    fn swapped_image_fails_on_states_not_morphism() {
        // g ↦ id satisfies every multiplication instance but not the trace.
        let source = cyclic_group(2);
        let model = symmetric_group(2).unwrap();
        let spec = group_spec(&source, rat(0, 1));
        let id = model.element_index("p12").unwrap();
        let ms = Microstate {
            subset: vec![0, 1],
            images: vec![id, id],
        };
        assert!(check_morphism(&ms, &spec, &source, &model).is_empty());
        let st = check_states(&ms, &spec, &source, &model);
        assert_eq!(st.len(), 1);
        assert_eq!(st[0].deviation, rat(1, 1));
    }

    #[test]
    fn empty_condition_set_accepts_every_map() {
        let source = cyclic_group(2);
        let model = symmetric_group(3).unwrap();
        let spec = MicrostateSpec {
            subset: vec![1],
            terms: Vec::new(),
            state_symbols: Vec::new(),
            tolerance: rat(0, 1),
            mode: MicrostateMode::Ms,
            domain_preserving: true,
        };
        let found = enumerate_microstates(&spec, &source, &model, 10_000).unwrap();
        assert_eq!(found.len(), 6);
        for ms in &found {
            assert!(check_morphism(ms, &spec, &source, &model).is_empty());
        }
    }

    #[test]
    fn tolerance_one_accepts_all_unit_interval_states() {
        let source = cyclic_group(2);
        let model = symmetric_group(2).unwrap();
        let spec = group_spec(&source, rat(1, 1));
        let found = enumerate_microstates(&spec, &source, &model, 10_000).unwrap();
        assert_eq!(found.len(), 4);
    }

    #[test]
    fn measure_algebra_state_deviation_zero_on_matched_mass() {
        let source = crate::structure::partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
        let model = measure_algebra(4).unwrap();
        let mu = source.signature.state("mu").unwrap();
        let spec = MicrostateSpec {
            subset: vec![0b01],
            terms: Vec::new(),
            state_symbols: vec![mu],
            tolerance: rat(0, 1),
            mode: MicrostateMode::Ms,
            domain_preserving: true,
        };
        let half = model.element_index("s3").unwrap(); // {1,2}, mass 1/2
        let ms = Microstate {
            subset: vec![0b01],
            images: vec![half],
        };
        assert!(check_states(&ms, &spec, &source, &model).is_empty());
    }

    #[test]
    fn domain_checks() {
        use crate::sig::{FunctionSymbol, Signature, StateSymbol};
        // two-domain source and model over a bare signature
        let sig = Signature::new(
            vec![FunctionSymbol {
                name: "f".into(),
                arity: 1,
            }],
            vec![StateSymbol {
                name: "s".into(),
                arity: 1,
            }],
            vec!["d1".into(), "d2".into()],
            false,
        )
        .unwrap();
        let mk = |domains: Vec<Vec<bool>>| FiniteStructure {
            signature: sig.clone(),
            elements: vec!["a".into(), "b".into()],
            op_tables: vec![crate::structure::OpTable {
                arity: 1,
                data: vec![0, 1],
            }],
            state_tables: vec![vec![rat(0, 1), rat(1, 1)]],
            metric: vec![rat(0, 1), rat(1, 1), rat(1, 1), rat(0, 1)],
            domains,
        };
        let source = mk(vec![vec![true, false], vec![false, true]]);
        let model = mk(vec![vec![false, true], vec![true, false]]);
        let spec = MicrostateSpec {
            subset: vec![0],
            terms: Vec::new(),
            state_symbols: Vec::new(),
            tolerance: rat(1, 1),
            mode: MicrostateMode::Ms,
            domain_preserving: true,
        };
        let ms = Microstate {
            subset: vec![0],
            images: vec![0],
        };
        // a is in d1, but model's d1 does not contain element 0
        assert_eq!(check_domains(&ms, &spec, &source, &model).len(), 1);
        let relaxed = MicrostateSpec {
            domain_preserving: false,
            ..spec.clone()
        };
        assert!(check_domains(&ms, &relaxed, &source, &model).is_empty());
        // single whole-carrier domain: always empty
        let source1 = cyclic_group(2);
        let model1 = symmetric_group(2).unwrap();
        let spec1 = group_spec(&source1, rat(0, 1));
        let ms1 = Microstate {
            subset: vec![0, 1],
            images: vec![0, 0],
        };
        assert!(check_domains(&ms1, &spec1, &source1, &model1).is_empty());
    }

    #[test]
    fn contractive_forms() {
        let source = cyclic_group(2); // diameter 1, metric not a state
        let model = symmetric_group(2).unwrap();
        let id = model.element_index("p12").unwrap();
        let constant = Microstate {
            subset: vec![0, 1],
            images: vec![id, id],
        };
        // one-sided at tolerance 0: d(σa,σb) = 0 ≤ d(a,b) holds
        let cms = MicrostateSpec {
            mode: MicrostateMode::Cms,
            ..group_spec(&source, rat(0, 1))
        };
        assert!(check_contractive(&constant, &cms, &source, &model).is_empty());
        // MS mode without the metric among the states: skipped
        let ms = group_spec(&source, rat(0, 1));
        assert!(check_contractive(&constant, &ms, &source, &model).is_empty());
        // identity map source = model at tolerance 0 is fine in both forms
        let spec_self = MicrostateSpec {
            subset: vec![0, 1],
            terms: Vec::new(),
            state_symbols: Vec::new(),
            tolerance: rat(0, 1),
            mode: MicrostateMode::Cms,
            domain_preserving: true,
        };
        let identity = Microstate {
            subset: vec![0, 1],
            images: vec![0, 1],
        };
        assert!(check_contractive(&identity, &spec_self, &source, &source).is_empty());
    }

    #[test]
    fn two_sided_form_with_metric_state() {
        use crate::sig::{Signature, StateSymbol};
        // a two-element structure whose metric is also the state `d`
        let sig = Signature::new(
            vec![],
            vec![StateSymbol {
                name: "d".into(),
                arity: 2,
            }],
            vec!["all".into()],
            true,
        )
        .unwrap();
        let metric = vec![rat(0, 1), rat(1, 1), rat(1, 1), rat(0, 1)];
        let s = FiniteStructure {
            signature: sig,
            elements: vec!["a".into(), "b".into()],
            op_tables: vec![],
            state_tables: vec![metric.clone()],
            metric,
            domains: vec![vec![true, true]],
        };
        s.validate().unwrap();
        let spec = MicrostateSpec {
            subset: vec![0, 1],
            terms: Vec::new(),
            state_symbols: Vec::new(),
            tolerance: rat(1, 2),
            mode: MicrostateMode::Ms,
            domain_preserving: true,
        };
        // constant map collapses a unit distance: two-sided deviation 1
        let constant = Microstate {
            subset: vec![0, 1],
            images: vec![0, 0],
        };
        let v = check_contractive(&constant, &spec, &s, &s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].deviation, rat(1, 1));
        // with the metric among the states the two modes enumerate the
        // same space
        for num in 0..=2i64 {
            let ms_spec = MicrostateSpec {
                tolerance: rat(num, 2),
                ..spec.clone()
            };
            let cms_spec = MicrostateSpec {
                mode: MicrostateMode::Cms,
                ..ms_spec.clone()
            };
            let a = enumerate_microstates(&ms_spec, &s, &s, 10_000).unwrap();
            let b = enumerate_microstates(&cms_spec, &s, &s, 10_000).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn enumeration_matches_unpruned_filter() {
        // differential: backtracking equals the brute filter over all maps
        let source = cyclic_group(2);
        let model = symmetric_group(3).unwrap();
        for num in 0..=3i64 {
            let spec = group_spec(&source, rat(num, 3));
            let fast = enumerate_microstates(&spec, &source, &model, 1_000_000).unwrap();
            let mut slow = Vec::new();
            for a in 0..model.size() {
                for b in 0..model.size() {
                    let ms = Microstate {
                        subset: vec![0, 1],
                        images: vec![a, b],
                    };
                    if is_valid(&ms, &spec, &source, &model) {
                        slow.push(ms);
                    }
                }
            }
            assert_eq!(fast, slow, "tolerance {num}/3");
        }
    }

    #[test]
    fn monotone_in_tolerance_and_conditions() {
        let source = cyclic_group(4);
        let model = symmetric_group(3).unwrap();
        let tau = source.signature.state("tau").unwrap();
        let all_elems: Vec<usize> = vec![0, 1, 2];
        let base = MicrostateSpec {
            subset: all_elems.clone(),
            terms: generate_terms(&source.signature, 1),
            state_symbols: vec![tau],
            tolerance: rat(1, 3),
            mode: MicrostateMode::Ms,
            domain_preserving: true,
        };
        let found = enumerate_microstates(&base, &source, &model, 1_000_000).unwrap();
        // larger tolerance: superset
        let looser = MicrostateSpec {
            tolerance: rat(2, 3),
            ..base.clone()
        };
        let found_loose = enumerate_microstates(&looser, &source, &model, 1_000_000).unwrap();
        for ms in &found {
            assert!(found_loose.contains(ms));
        }
        // richer condition set: subset
        let richer = MicrostateSpec {
            terms: generate_terms(&source.signature, 2),
            ..base.clone()
        };
        let found_rich = enumerate_microstates(&richer, &source, &model, 1_000_000).unwrap();
        for ms in &found_rich {
            assert!(found.contains(ms));
        }
        // restriction of a valid microstate on a larger subset stays valid
        let smaller = MicrostateSpec {
            subset: vec![0, 1],
            ..base.clone()
        };
        for ms in &found {
            let restricted = Microstate {
                subset: vec![0, 1],
                images: ms.images[..2].to_vec(),
            };
            assert!(is_valid(&restricted, &smaller, &source, &model));
        }
    }

    #[test]
    fn cms_is_contained_in_ms() {
        let source = cyclic_group(3);
        let model = symmetric_group(3).unwrap();
        let tau = source.signature.state("tau").unwrap();
        let mk = |mode| MicrostateSpec {
            subset: vec![0, 1, 2],
            terms: generate_terms(&source.signature, 1),
            state_symbols: vec![tau],
            tolerance: rat(1, 3),
            mode,
            domain_preserving: true,
        };
        let ms =
            enumerate_microstates(&mk(MicrostateMode::Ms), &source, &model, 1_000_000).unwrap();
        let cms =
            enumerate_microstates(&mk(MicrostateMode::Cms), &source, &model, 1_000_000).unwrap();
        for m in &cms {
            assert!(ms.contains(m));
        }
    }

    #[test]
    fn empty_subset_has_the_empty_microstate() {
        let source = cyclic_group(2);
        let model = symmetric_group(2).unwrap();
        let spec = MicrostateSpec {
            subset: vec![],
            terms: Vec::new(),
            state_symbols: Vec::new(),
            tolerance: rat(0, 1),
            mode: MicrostateMode::Ms,
            domain_preserving: true,
        };
        let found = enumerate_microstates(&spec, &source, &model, 100).unwrap();
        assert_eq!(found.len(), 1);
    }

    #[test]
    fn budget_exhaustion_signals() {
        let source = cyclic_group(2);
        let model = symmetric_group(4).unwrap();
        let spec = group_spec(&source, rat(1, 1));
        let err = enumerate_microstates(&spec, &source, &model, 10).unwrap_err();
        assert!(matches!(err, EngineError::BudgetExceeded { .. }));
    }

    #[test]
    fn sampling_unconstrained_and_impossible() {
        let source = cyclic_group(2);
        let model = symmetric_group(3).unwrap();
        let free = MicrostateSpec {
            subset: vec![0, 1],
            terms: Vec::new(),
            state_symbols: Vec::new(),
            tolerance: rat(0, 1),
            mode: MicrostateMode::Ms,
            domain_preserving: true,
        };
        let out = sample_microstates(&free, &source, &model, 500, 7, 10).unwrap();
        assert_eq!(out.valid, 500);
        assert_eq!(out.kept.len(), 10);
        // no valid map: tolerance 0 forces a fixed-point-free involution in Sym(3)
        let tau = source.signature.state("tau").unwrap();
        let strict = MicrostateSpec {
            terms: generate_terms(&source.signature, 1),
            state_symbols: vec![tau],
            ..free
        };
        let out = sample_microstates(&strict, &source, &model, 500, 7, 10).unwrap();
        assert_eq!(out.valid, 0);
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let source = cyclic_group(2);
        let model = symmetric_group(3).unwrap();
        let spec = group_spec(&source, rat(1, 3));
        let a = sample_microstates(&spec, &source, &model, 1000, 42, 50).unwrap();
        let b = sample_microstates(&spec, &source, &model, 1000, 42, 50).unwrap();
        assert_eq!(a, b);
        let c = sample_microstates(&spec, &source, &model, 1000, 43, 50).unwrap();
        assert!(a.valid != c.valid || a.kept != c.kept || a == c);
    }
}
