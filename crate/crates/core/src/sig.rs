//! Signatures, terms, term evaluation, and closures over finite structures.
//!
//! A [`Signature`] declares the language: function symbols with arities
//! (constants are 0-ary), real-valued state symbols, domain labels, and a
//! flag recording whether the metric itself is one of the states. A
//! [`Term`] is a finite tree over function symbols and variables; terms are
//! evaluated bottom-up through a structure's operation tables.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::rat::Rat;
use crate::structure::FiniteStructure;

/// Index of a function symbol within its signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FnId(pub usize);

/// Index of a state symbol within its signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSymbol {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSymbol {
    pub name: String,
    pub arity: usize,
}

/// A tabulated uniform-continuity modulus for one symbol on a tuple of
/// domains. Stored for documentation and experiment provenance; the
/// finite-scale estimator never consumes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuityModulus {
    pub symbol: String,
    pub domains: Vec<String>,
    /// Breakpoints `(x, eta(x))`, both in `(0, 1]`, nondecreasing in `x`.
    pub breakpoints: Vec<(Rat, Rat)>,
}

impl ContinuityModulus {
    pub fn validate(&self) -> Result<(), SignatureError> {
        let one = Rat::new(1, 1);
        let zero = Rat::new(0, 1);
        let mut prev: Option<(Rat, Rat)> = None;
        for &(x, y) in &self.breakpoints {
            if x <= zero || x > one || y <= zero || y > one {
                return Err(SignatureError::ModulusRange {
                    symbol: self.symbol.clone(),
                });
            }
            if let Some((px, py)) = prev {
                if x <= px || y < py {
                    return Err(SignatureError::ModulusNotMonotone {
                        symbol: self.symbol.clone(),
                    });
                }
            }
            prev = Some((x, y));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("symbol name `{0}` is declared more than once")]
    DuplicateName(String),
    #[error("state symbol `{0}` must have arity at least 1")]
    NullaryState(String),
    #[error("a signature needs at least one domain label")]
    NoDomains,
    #[error("metric_in_states requires a binary state symbol named `d`")]
    MissingMetricState,
    #[error("continuity modulus for `{symbol}` has a breakpoint outside (0,1]")]
    ModulusRange { symbol: String },
    #[error("continuity modulus for `{symbol}` is not nondecreasing")]
    ModulusNotMonotone { symbol: String },
}

/// The language of a structure family: function symbols, state symbols,
/// domain labels, and whether the metric is itself a state symbol (by
/// convention, a binary state named `d`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub functions: Vec<FunctionSymbol>,
    pub states: Vec<StateSymbol>,
    pub domain_labels: Vec<String>,
    pub metric_in_states: bool,
    pub moduli: Vec<ContinuityModulus>,
}

impl Signature {
    pub fn new(
        functions: Vec<FunctionSymbol>,
        states: Vec<StateSymbol>,
        domain_labels: Vec<String>,
        metric_in_states: bool,
    ) -> Result<Self, SignatureError> {
        let sig = Signature {
            functions,
            states,
            domain_labels,
            metric_in_states,
            moduli: Vec::new(),
        };
        sig.validate()?;
        Ok(sig)
    }

    pub fn validate(&self) -> Result<(), SignatureError> {
        let mut seen = BTreeSet::new();
        for f in &self.functions {
            if !seen.insert(f.name.clone()) {
                return Err(SignatureError::DuplicateName(f.name.clone()));
            }
        }
        for s in &self.states {
            if !seen.insert(s.name.clone()) {
                return Err(SignatureError::DuplicateName(s.name.clone()));
            }
            if s.arity == 0 {
                return Err(SignatureError::NullaryState(s.name.clone()));
            }
        }
        if self.domain_labels.is_empty() {
            return Err(SignatureError::NoDomains);
        }
        if self.metric_in_states {
            let ok = self.states.iter().any(|s| s.name == "d" && s.arity == 2);
            if !ok {
                return Err(SignatureError::MissingMetricState);
            }
        }
        for m in &self.moduli {
            m.validate()?;
        }
        Ok(())
    }

    pub fn function(&self, name: &str) -> Option<FnId> {
        self.functions.iter().position(|f| f.name == name).map(FnId)
    }

    pub fn state(&self, name: &str) -> Option<StId> {
        self.states.iter().position(|s| s.name == name).map(StId)
    }

    pub fn fn_arity(&self, id: FnId) -> usize {
        self.functions[id.0].arity
    }

    pub fn state_arity(&self, id: StId) -> usize {
        self.states[id.0].arity
    }

    /// Boolean-algebra language: constants `zero`, `one`, unary `compl`,
    /// binary `union` and `inter`, with a unary mass state `mu`.
    pub fn measure_algebra() -> Signature {
        Signature::new(
            vec![
                FunctionSymbol {
                    name: "zero".into(),
                    arity: 0,
                },
                FunctionSymbol {
                    name: "one".into(),
                    arity: 0,
                },
                FunctionSymbol {
                    name: "compl".into(),
                    arity: 1,
                },
                FunctionSymbol {
                    name: "union".into(),
                    arity: 2,
                },
                FunctionSymbol {
                    name: "inter".into(),
                    arity: 2,
                },
            ],
            vec![StateSymbol {
                name: "mu".into(),
                arity: 1,
            }],
            vec!["all".into()],
            false,
        )
        .expect("built-in signature is valid")
    }

    /// Group language with an explicit inverse symbol and a unary trace
    /// state `tau`.
    pub fn group() -> Signature {
        Signature::new(
            vec![
                FunctionSymbol {
                    name: "one".into(),
                    arity: 0,
                },
                FunctionSymbol {
                    name: "mult".into(),
                    arity: 2,
                },
                FunctionSymbol {
                    name: "inv".into(),
                    arity: 1,
                },
            ],
            vec![StateSymbol {
                name: "tau".into(),
                arity: 1,
            }],
            vec!["all".into()],
            false,
        )
        .expect("built-in signature is valid")
    }

    /// Measure-algebra language extended with one unary symbol per group
    /// element in `window` (the dynamical language).
    pub fn dynamical_measure_algebra(window: &[String]) -> Result<Signature, SignatureError> {
        let mut functions = Signature::measure_algebra().functions;
        for name in window {
            functions.push(FunctionSymbol {
                name: format!("act_{name}"),
                arity: 1,
            });
        }
        Signature::new(
            functions,
            vec![StateSymbol {
                name: "mu".into(),
                arity: 1,
            }],
            vec!["all".into()],
            false,
        )
    }
}

/// A term: a variable or a function symbol applied to child terms.
///
/// Variables are indexed and must appear contiguously `0..n-1` (first
/// occurrence left to right) for an `n`-variable term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(usize),
    App(FnId, Vec<Term>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("arity mismatch for `{symbol}`: declared {declared}, used with {used}")]
    ArityMismatch {
        symbol: String,
        declared: usize,
        used: usize,
    },
    #[error("function symbol #{0} is not interpreted in the structure")]
    Uninterpreted(usize),
    #[error("term variables are not contiguous from x0")]
    NonContiguousVariables,
    #[error("term has {vars} variables but {args} arguments were supplied")]
    ArgumentCount { vars: usize, args: usize },
    #[error("argument {0} lies outside the carrier of size {1}")]
    OutsideCarrier(usize, usize),
}

impl Term {
    /// Number of variables (max index + 1); zero for closed terms.
    pub fn var_count(&self) -> usize {
        match self {
            Term::Var(i) => i + 1,
            Term::App(_, children) => children.iter().map(|c| c.var_count()).max().unwrap_or(0),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, children) => 1 + children.iter().map(|c| c.depth()).max().unwrap_or(0),
        }
    }

    /// Checks child counts against the signature and variable contiguity.
    pub fn validate(&self, sig: &Signature) -> Result<(), EvalError> {
        self.check_arities(sig)?;
        let mut seen = BTreeSet::new();
        self.collect_vars(&mut seen);
        for (k, v) in seen.iter().enumerate() {
            if *v != k {
                return Err(EvalError::NonContiguousVariables);
            }
        }
        Ok(())
    }

    fn check_arities(&self, sig: &Signature) -> Result<(), EvalError> {
        if let Term::App(f, children) = self {
            let sym = sig
                .functions
                .get(f.0)
                .ok_or(EvalError::Uninterpreted(f.0))?;
            if sym.arity != children.len() {
                return Err(EvalError::ArityMismatch {
                    symbol: sym.name.clone(),
                    declared: sym.arity,
                    used: children.len(),
                });
            }
            for c in children {
                c.check_arities(sig)?;
            }
        }
        Ok(())
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Term::Var(i) => {
                out.insert(*i);
            }
            Term::App(_, children) => {
                for c in children {
                    c.collect_vars(out);
                }
            }
        }
    }

    /// Parenthesized prefix text, e.g. `(union x0 (compl x1))`.
    pub fn to_text(&self, sig: &Signature) -> String {
        struct D<'a>(&'a Term, &'a Signature);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self.0 {
                    Term::Var(i) => write!(f, "x{i}"),
                    Term::App(id, children) => {
                        write!(f, "({}", self.1.functions[id.0].name)?;
                        for c in children {
                            write!(f, " {}", D(c, self.1))?;
                        }
                        write!(f, ")")
                    }
                }
            }
        }
        D(self, sig).to_string()
    }
}

/// Evaluates a term bottom-up through the structure's operation tables.
pub fn eval_term(t: &Term, args: &[usize], s: &FiniteStructure) -> Result<usize, EvalError> {
    t.validate(&s.signature)?;
    let vars = t.var_count();
    if vars != args.len() {
        return Err(EvalError::ArgumentCount {
            vars,
            args: args.len(),
        });
    }
    for &a in args {
        if a >= s.size() {
            return Err(EvalError::OutsideCarrier(a, s.size()));
        }
    }
    Ok(eval_unchecked(t, args, s))
}

fn eval_unchecked(t: &Term, args: &[usize], s: &FiniteStructure) -> usize {
    match t {
        Term::Var(i) => args[*i],
        Term::App(f, children) => {
            let vals: Vec<usize> = children
                .iter()
                .map(|c| eval_unchecked(c, args, s))
                .collect();
            s.op(*f, &vals)
        }
    }
}

/// `F^T`: every value `t(a_1..a_n)` with the `a_i` drawn from `subset`,
/// together with `subset` itself. Elements keep the input order, new ones
/// follow in discovery order.
pub fn term_closure(
    subset: &[usize],
    terms: &[Term],
    s: &FiniteStructure,
) -> Result<Vec<usize>, EvalError> {
    let mut out: Vec<usize> = Vec::new();
    let mut seen = vec![false; s.size()];
    for &a in subset {
        if a >= s.size() {
            return Err(EvalError::OutsideCarrier(a, s.size()));
        }
        if !seen[a] {
            seen[a] = true;
            out.push(a);
        }
    }
    for t in terms {
        t.validate(&s.signature)?;
        let n = t.var_count();
        for tuple in Tuples::new(subset.len(), n) {
            let args: Vec<usize> = tuple.iter().map(|&i| subset[i]).collect();
            let v = eval_unchecked(t, &args, s);
            if !seen[v] {
                seen[v] = true;
                out.push(v);
            }
        }
    }
    Ok(out)
}

/// Outcome of the depth-bounded closure under every function symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureOutcome {
    pub elements: Vec<usize>,
    /// Whether one more round of symbol application adds nothing.
    pub reached_fixed_point: bool,
}

/// Approximates the closure of `subset` under all terms by applying every
/// function symbol to all argument tuples, `depth` times. On a finite
/// carrier the closure stabilizes; `reached_fixed_point` reports whether it
/// did within the bound.
pub fn symbol_closure(subset: &[usize], depth: usize, s: &FiniteStructure) -> ClosureOutcome {
    let mut out: Vec<usize> = Vec::new();
    let mut seen = vec![false; s.size()];
    for &a in subset {
        if a < s.size() && !seen[a] {
            seen[a] = true;
            out.push(a);
        }
    }
    let mut changed_last_round = true;
    for _ in 0..depth {
        changed_last_round = apply_all_symbols_once(&mut out, &mut seen, s);
        if !changed_last_round {
            break;
        }
    }
    let reached_fixed_point = if changed_last_round {
        // one probe round past the bound, without keeping its elements
        let mut probe_seen = seen.clone();
        let mut probe_out = out.clone();
        !apply_all_symbols_once(&mut probe_out, &mut probe_seen, s)
    } else {
        true
    };
    ClosureOutcome {
        elements: out,
        reached_fixed_point,
    }
}

fn apply_all_symbols_once(out: &mut Vec<usize>, seen: &mut [bool], s: &FiniteStructure) -> bool {
    let snapshot: Vec<usize> = out.clone();
    let mut changed = false;
    for (idx, f) in s.signature.functions.iter().enumerate() {
        for tuple in Tuples::new(snapshot.len(), f.arity) {
            let args: Vec<usize> = tuple.iter().map(|&i| snapshot[i]).collect();
            let v = s.op(FnId(idx), &args);
            if !seen[v] {
                seen[v] = true;
                out.push(v);
                changed = true;
            }
        }
    }
    changed
}

/// One ground instance of a term inside a subset: `terms[term]` applied to
/// `args` yields `output`, with every element in the subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermConstraint {
    pub term: usize,
    pub args: Vec<usize>,
    pub output: usize,
}

/// Every instance `t(a_1..a_n) = a_out` with arguments and output inside
/// `subset`, in lexicographic (term index, argument indices) order. This is
/// exactly the condition set a morphism check runs against.
pub fn term_constraints(
    subset: &[usize],
    terms: &[Term],
    s: &FiniteStructure,
) -> Result<Vec<TermConstraint>, EvalError> {
    let mut in_subset = vec![false; s.size()];
    for &a in subset {
        if a >= s.size() {
            return Err(EvalError::OutsideCarrier(a, s.size()));
        }
        in_subset[a] = true;
    }
    let mut out = Vec::new();
    for (ti, t) in terms.iter().enumerate() {
        t.validate(&s.signature)?;
        let n = t.var_count();
        for tuple in Tuples::new(subset.len(), n) {
            let args: Vec<usize> = tuple.iter().map(|&i| subset[i]).collect();
            let v = eval_unchecked(t, &args, s);
            if in_subset[v] {
                out.push(TermConstraint {
                    term: ti,
                    args,
                    output: v,
                });
            }
        }
    }
    Ok(out)
}

/// All distinct term shapes of depth at most `depth`, with variables
/// renumbered left to right. Variable-repeating instances are covered by
/// the argument tuples of [`term_constraints`], so distinct-variable shapes
/// are enough.
pub fn generate_terms(sig: &Signature, depth: usize) -> Vec<Term> {
    let mut set: BTreeSet<Term> = BTreeSet::new();
    set.insert(Term::Var(0));
    for _ in 0..depth {
        let prev: Vec<Term> = set.iter().cloned().collect();
        for (idx, f) in sig.functions.iter().enumerate() {
            for combo in Tuples::new(prev.len(), f.arity) {
                let mut children = Vec::with_capacity(f.arity);
                let mut offset = 0;
                for &ci in combo.iter() {
                    let shifted = shift_vars(&prev[ci], offset);
                    offset += prev[ci].var_count();
                    children.push(shifted);
                }
                set.insert(Term::App(FnId(idx), children));
            }
        }
    }
    set.into_iter().collect()
}

fn shift_vars(t: &Term, by: usize) -> Term {
    match t {
        Term::Var(i) => Term::Var(i + by),
        Term::App(f, children) => {
            Term::App(*f, children.iter().map(|c| shift_vars(c, by)).collect())
        }
    }
}

/// Iterator over all index tuples `[0, m)^n` in lexicographic order.
pub struct Tuples {
    m: usize,
    current: Vec<usize>,
    done: bool,
}

impl Tuples {
    pub fn new(m: usize, n: usize) -> Tuples {
        Tuples {
            m,
            current: vec![0; n],
            done: m == 0 && n > 0,
        }
    }
}

impl Iterator for Tuples {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let item = self.current.clone();
        let mut i = self.current.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.current[i] += 1;
            if self.current[i] < self.m {
                break;
            }
            self.current[i] = 0;
        }
        Some(item)
    }
}
