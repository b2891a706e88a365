//! Finite metric structures and the built-in asymptotic model families.
//!
//! A [`FiniteStructure`] interprets a signature over a finite carrier:
//! total operation tables, exact rational state tables, a rational metric
//! matrix, and domain membership. The built-in families are the measure
//! algebras of uniform finite probability spaces, the symmetric groups
//! with normalized Hamming metric and fixed-point trace, and the
//! dynamical extension of the measure algebra along a sofic map.
//!
//! All state values and distances in the built-ins are multiples of `1/r`,
//! so tolerance comparisons stay exact.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::perm::{Perm, PermError};
use crate::rat::{fmt_rat, rat, Rat};
use crate::sig::{FnId, Signature, StId};

/// Cell budget for materializing total operation tables. A binary symbol
/// over a carrier of size `m` needs `m^2` cells, which is what caps the
/// usable model index in practice; larger indices are served by the
/// counting path.
pub const DEFAULT_CELL_BUDGET: u128 = 4_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("model index r must be at least 1")]
    ZeroIndex,
    #[error("materializing this model needs {cells} table cells, over the budget of {budget}; use the counting path for large indices")]
    TooLarge { cells: u128, budget: u128 },
    #[error("no permutation supplied for window element `{0}`")]
    MissingWindowPermutation(String),
    #[error("permutation for `{name}` has degree {got}, expected {expected}")]
    PermutationDegree {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("masses must be nonnegative and sum to 1, got sum {0}")]
    BadMasses(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructureError {
    #[error("operation table for `{symbol}` has {got} cells, expected {expected}")]
    TableSize {
        symbol: String,
        got: usize,
        expected: usize,
    },
    #[error("state table for `{symbol}` has {got} cells, expected {expected}")]
    StateSize {
        symbol: String,
        got: usize,
        expected: usize,
    },
    #[error("operation table for `{symbol}` maps a tuple outside the carrier")]
    TableRange { symbol: String },
    #[error("metric matrix has {got} entries, expected {expected}")]
    MetricSize { got: usize, expected: usize },
    #[error("metric is not symmetric at ({a}, {b})")]
    NotSymmetric { a: String, b: String },
    #[error("metric has nonzero diagonal at {0}")]
    NonzeroDiagonal(String),
    #[error("metric entry ({a}, {b}) is negative")]
    Negative { a: String, b: String },
    #[error("triangle inequality fails: d({a},{c}) > d({a},{b}) + d({b},{c})")]
    Triangle { a: String, b: String, c: String },
    #[error("element `{0}` belongs to no domain")]
    Orphan(String),
    #[error(
        "metric_in_states is set but the state table for `d` differs from the metric at ({a}, {b})"
    )]
    MetricStateMismatch { a: String, b: String },
    #[error("domain count {got} does not match the signature's {expected}")]
    DomainCount { got: usize, expected: usize },
}

/// Total table for one function symbol, uniform radix over the carrier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpTable {
    pub arity: usize,
    pub data: Vec<u32>,
}

impl OpTable {
    fn index(&self, m: usize, args: &[usize]) -> usize {
        debug_assert_eq!(args.len(), self.arity);
        let mut idx = 0usize;
        for &a in args {
            debug_assert!(a < m);
            idx = idx * m + a;
        }
        idx
    }

    pub fn get(&self, m: usize, args: &[usize]) -> usize {
        self.data[self.index(m, args)] as usize
    }
}

/// A finite interpretation of a signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteStructure {
    pub signature: Signature,
    pub elements: Vec<String>,
    /// Aligned with `signature.functions`.
    pub op_tables: Vec<OpTable>,
    /// Aligned with `signature.states`; row-major over argument tuples.
    pub state_tables: Vec<Vec<Rat>>,
    /// Row-major `m x m` distance matrix.
    pub metric: Vec<Rat>,
    /// Aligned with `signature.domain_labels`; membership per element.
    pub domains: Vec<Vec<bool>>,
}

impl FiniteStructure {
    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn distance(&self, a: usize, b: usize) -> Rat {
        self.metric[a * self.size() + b]
    }

    pub fn op(&self, f: FnId, args: &[usize]) -> usize {
        self.op_tables[f.0].get(self.size(), args)
    }

    pub fn state_value(&self, s: StId, args: &[usize]) -> Rat {
        let m = self.size();
        let mut idx = 0usize;
        for &a in args {
            idx = idx * m + a;
        }
        self.state_tables[s.0][idx]
    }

    pub fn element_index(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == name)
    }

    /// Domain labels (by index) containing the element.
    pub fn domains_of(&self, a: usize) -> Vec<usize> {
        (0..self.domains.len())
            .filter(|&d| self.domains[d][a])
            .collect()
    }

    /// Full invariant check: table shapes and ranges, metric axioms with a
    /// witnessing triple, domain coverage, and the metric/state consistency
    /// required when the metric is one of the states. Quadratic-to-cubic in
    /// the carrier size, meant for parsed documents and small models.
    pub fn validate(&self) -> Result<(), StructureError> {
        let m = self.size();
        if self.domains.len() != self.signature.domain_labels.len() {
            return Err(StructureError::DomainCount {
                got: self.domains.len(),
                expected: self.signature.domain_labels.len(),
            });
        }
        for (i, f) in self.signature.functions.iter().enumerate() {
            let expected = m.pow(f.arity as u32);
            let table = &self.op_tables[i];
            if table.data.len() != expected {
                return Err(StructureError::TableSize {
                    symbol: f.name.clone(),
                    got: table.data.len(),
                    expected,
                });
            }
            if table.data.iter().any(|&v| (v as usize) >= m) {
                return Err(StructureError::TableRange {
                    symbol: f.name.clone(),
                });
            }
        }
        for (i, s) in self.signature.states.iter().enumerate() {
            let expected = m.pow(s.arity as u32);
            if self.state_tables[i].len() != expected {
                return Err(StructureError::StateSize {
                    symbol: s.name.clone(),
                    got: self.state_tables[i].len(),
                    expected,
                });
            }
        }
        if self.metric.len() != m * m {
            return Err(StructureError::MetricSize {
                got: self.metric.len(),
                expected: m * m,
            });
        }
        let zero = rat(0, 1);
        for a in 0..m {
            if self.distance(a, a) != zero {
                return Err(StructureError::NonzeroDiagonal(self.elements[a].clone()));
            }
            for b in 0..m {
                if self.distance(a, b) < zero {
                    return Err(StructureError::Negative {
                        a: self.elements[a].clone(),
                        b: self.elements[b].clone(),
                    });
                }
                if self.distance(a, b) != self.distance(b, a) {
                    return Err(StructureError::NotSymmetric {
                        a: self.elements[a].clone(),
                        b: self.elements[b].clone(),
                    });
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    if self.distance(a, c) > self.distance(a, b) + self.distance(b, c) {
                        return Err(StructureError::Triangle {
                            a: self.elements[a].clone(),
                            b: self.elements[b].clone(),
                            c: self.elements[c].clone(),
                        });
                    }
                }
            }
        }
        for a in 0..m {
            if !self.domains.iter().any(|d| d[a]) {
                return Err(StructureError::Orphan(self.elements[a].clone()));
            }
        }
        if self.signature.metric_in_states {
            let d = self.signature.state("d").expect("validated by signature");
            for a in 0..m {
                for b in 0..m {
                    if self.state_value(d, &[a, b]) != self.distance(a, b) {
                        return Err(StructureError::MetricStateMismatch {
                            a: self.elements[a].clone(),
                            b: self.elements[b].clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_budget(m: usize, sig: &Signature, budget: u128) -> Result<(), BuildError> {
    let mut cells: u128 = (m as u128) * (m as u128); // metric matrix
    for f in &sig.functions {
        cells = cells.saturating_add((m as u128).saturating_pow(f.arity as u32));
    }
    for s in &sig.states {
        cells = cells.saturating_add((m as u128).saturating_pow(s.arity as u32));
    }
    if cells > budget {
        return Err(BuildError::TooLarge { cells, budget });
    }
    Ok(())
}

/// The measure algebra of the uniform probability space on `{1..r}`:
/// carrier all `2^r` subsets (element `s<k>` is the subset with bitmask
/// `k`, bit `i` meaning point `i+1`), mass `mu(P) = |P|/r`, metric
/// `d(P,Q) = |P Δ Q|/r`.
pub fn measure_algebra(r: u32) -> Result<FiniteStructure, BuildError> {
    measure_algebra_with_budget(r, DEFAULT_CELL_BUDGET)
}

pub fn measure_algebra_with_budget(r: u32, budget: u128) -> Result<FiniteStructure, BuildError> {
    if r == 0 {
        return Err(BuildError::ZeroIndex);
    }
    let sig = Signature::measure_algebra();
    if r >= 26 {
        return Err(BuildError::TooLarge {
            cells: u128::MAX,
            budget,
        });
    }
    let m = 1usize << r;
    check_budget(m, &sig, budget)?;
    let full: usize = m - 1;
    let elements: Vec<String> = (0..m).map(|k| format!("s{k}")).collect();
    let op_tables = vec![
        OpTable {
            arity: 0,
            data: vec![0],
        },
        OpTable {
            arity: 0,
            data: vec![full as u32],
        },
        OpTable {
            arity: 1,
            data: (0..m).map(|p| (!p & full) as u32).collect(),
        },
        OpTable {
            arity: 2,
            data: (0..m * m).map(|i| ((i / m) | (i % m)) as u32).collect(),
        },
        OpTable {
            arity: 2,
            data: (0..m * m).map(|i| ((i / m) & (i % m)) as u32).collect(),
        },
    ];
    let ri = r as i64;
    let state_tables = vec![(0..m).map(|p| rat(p.count_ones() as i64, ri)).collect()];
    let metric = (0..m * m)
        .map(|i| rat(((i / m) ^ (i % m)).count_ones() as i64, ri))
        .collect();
    let domains = vec![vec![true; m]];
    Ok(FiniteStructure {
        signature: sig,
        elements,
        op_tables,
        state_tables,
        metric,
        domains,
    })
}

/// The symmetric group on `r` points: carrier all `r!` permutations in
/// lexicographic one-line order (element `p<images>`), trace
/// `tau(s) = (#fixed points)/r`, normalized Hamming metric.
pub fn symmetric_group(r: u32) -> Result<FiniteStructure, BuildError> {
    symmetric_group_with_budget(r, DEFAULT_CELL_BUDGET)
}

pub fn symmetric_group_with_budget(r: u32, budget: u128) -> Result<FiniteStructure, BuildError> {
    if r == 0 {
        return Err(BuildError::ZeroIndex);
    }
    let sig = Signature::group();
    let mut fact: u128 = 1;
    for k in 2..=(r as u128) {
        fact = fact.saturating_mul(k);
    }
    if fact > budget {
        return Err(BuildError::TooLarge {
            cells: fact,
            budget,
        });
    }
    let m = fact as usize;
    check_budget(m, &sig, budget)?;
    let perms = Perm::all(r as usize);
    debug_assert_eq!(perms.len(), m);
    let index: BTreeMap<&Perm, usize> = perms.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let elements: Vec<String> = perms
        .iter()
        .map(|p| format!("p{}", p.one_line().split_whitespace().collect::<String>()))
        .collect();
    let identity = Perm::identity(r as usize);
    let mut mult = Vec::with_capacity(m * m);
    for a in &perms {
        for b in &perms {
            mult.push(index[&a.compose(b)] as u32);
        }
    }
    let inv: Vec<u32> = perms.iter().map(|p| index[&p.inverse()] as u32).collect();
    let op_tables = vec![
        OpTable {
            arity: 0,
            data: vec![index[&identity] as u32],
        },
        OpTable {
            arity: 2,
            data: mult,
        },
        OpTable {
            arity: 1,
            data: inv,
        },
    ];
    let ri = r as i64;
    let state_tables = vec![perms
        .iter()
        .map(|p| rat(p.fixed_points() as i64, ri))
        .collect()];
    let mut metric = Vec::with_capacity(m * m);
    for a in &perms {
        for b in &perms {
            metric.push(rat(a.hamming(b) as i64, ri));
        }
    }
    let domains = vec![vec![true; m]];
    Ok(FiniteStructure {
        signature: sig,
        elements,
        op_tables,
        state_tables,
        metric,
        domains,
    })
}

/// The measure algebra on `{1..r}` extended with one unary symbol per
/// window element, acting by the forward image of the supplied
/// permutation: `P ↦ π(P)`.
pub fn dynamical_measure_algebra(
    r: u32,
    window: &[(String, Perm)],
) -> Result<FiniteStructure, BuildError> {
    dynamical_measure_algebra_with_budget(r, window, DEFAULT_CELL_BUDGET)
}

pub fn dynamical_measure_algebra_with_budget(
    r: u32,
    window: &[(String, Perm)],
    budget: u128,
) -> Result<FiniteStructure, BuildError> {
    let base = measure_algebra_with_budget(r, budget)?;
    let names: Vec<String> = window.iter().map(|(n, _)| n.clone()).collect();
    let sig = Signature::dynamical_measure_algebra(&names)
        .map_err(|_| BuildError::MissingWindowPermutation("duplicate window names".into()))?;
    let m = base.size();
    check_budget(m, &sig, budget)?;
    let mut op_tables = base.op_tables;
    for (name, p) in window {
        if p.degree() != r as usize {
            return Err(BuildError::PermutationDegree {
                name: name.clone(),
                got: p.degree(),
                expected: r as usize,
            });
        }
        let data: Vec<u32> = (0..m).map(|set| forward_image(set, p) as u32).collect();
        op_tables.push(OpTable { arity: 1, data });
    }
    Ok(FiniteStructure {
        signature: sig,
        elements: base.elements,
        op_tables,
        state_tables: base.state_tables,
        metric: base.metric,
        domains: base.domains,
    })
}

/// Forward image of a point-set bitmask under a permutation.
fn forward_image(set: usize, p: &Perm) -> usize {
    let mut out = 0usize;
    let mut rest = set;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        out |= 1 << p.apply(i);
        rest &= rest - 1;
    }
    out
}

/// The boolean algebra generated by a finite partition with the given
/// cell masses: carrier all `2^k` unions of cells, mass additive over
/// cells, metric the mass of the symmetric difference. This is the
/// subalgebra a partition generates in a measure algebra, at desk scale.
pub fn partition_algebra(masses: &[Rat]) -> Result<FiniteStructure, BuildError> {
    let zero = rat(0, 1);
    let total: Rat = masses.iter().copied().sum();
    if masses.iter().any(|&p| p < zero) || total != rat(1, 1) {
        return Err(BuildError::BadMasses(fmt_rat(total)));
    }
    let k = masses.len() as u32;
    if k == 0 || k >= 20 {
        return Err(BuildError::ZeroIndex);
    }
    let m = 1usize << k;
    let sig = Signature::measure_algebra();
    check_budget(m, &sig, DEFAULT_CELL_BUDGET)?;
    let full = m - 1;
    let elements: Vec<String> = (0..m).map(|i| format!("s{i}")).collect();
    let mass_of = |set: usize| -> Rat {
        let mut acc = zero;
        let mut rest = set;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            acc += masses[i];
            rest &= rest - 1;
        }
        acc
    };
    let op_tables = vec![
        OpTable {
            arity: 0,
            data: vec![0],
        },
        OpTable {
            arity: 0,
            data: vec![full as u32],
        },
        OpTable {
            arity: 1,
            data: (0..m).map(|p| (!p & full) as u32).collect(),
        },
        OpTable {
            arity: 2,
            data: (0..m * m).map(|i| ((i / m) | (i % m)) as u32).collect(),
        },
        OpTable {
            arity: 2,
            data: (0..m * m).map(|i| ((i / m) & (i % m)) as u32).collect(),
        },
    ];
    let state_tables = vec![(0..m).map(&mass_of).collect()];
    let metric = (0..m * m).map(|i| mass_of((i / m) ^ (i % m))).collect();
    let domains = vec![vec![true; m]];
    Ok(FiniteStructure {
        signature: sig,
        elements,
        op_tables,
        state_tables,
        metric,
        domains,
    })
}

/// The cyclic group of order `n` in the group language, with the group
/// trace (`1` at the identity, `0` elsewhere) and the discrete metric.
pub fn cyclic_group(n: u32) -> FiniteStructure {
    assert!(n >= 1, "cyclic group needs at least one element");
    let sig = Signature::group();
    let m = n as usize;
    let elements: Vec<String> = (0..m)
        .map(|i| match i {
            0 => "e".to_string(),
            1 => "g".to_string(),
            _ => format!("g{i}"),
        })
        .collect();
    let mult: Vec<u32> = (0..m * m).map(|i| ((i / m + i % m) % m) as u32).collect();
    let inv: Vec<u32> = (0..m).map(|i| ((m - i) % m) as u32).collect();
    let op_tables = vec![
        OpTable {
            arity: 0,
            data: vec![0],
        },
        OpTable {
            arity: 2,
            data: mult,
        },
        OpTable {
            arity: 1,
            data: inv,
        },
    ];
    let state_tables = vec![(0..m).map(|i| rat(if i == 0 { 1 } else { 0 }, 1)).collect()];
    let metric = (0..m * m)
        .map(|i| rat(if i / m == i % m { 0 } else { 1 }, 1))
        .collect();
    let domains = vec![vec![true; m]];
    FiniteStructure {
        signature: sig,
        elements,
        op_tables,
        state_tables,
        metric,
        domains,
    }
}

/// A sofic approximation table: per (group element, model index) one
/// permutation of `{1..r}`. Elements off the table default to the
/// identity permutation (the trivial extension).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SoficMap {
    entries: BTreeMap<(String, u64), Perm>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SoficParseError {
    #[error("line {line}: expected `<element> <r> <one-line images>`")]
    Malformed { line: usize },
    #[error("line {line}: {source}")]
    BadPermutation { line: usize, source: PermError },
    #[error("line {line}: permutation has degree {got}, expected {expected}")]
    DegreeMismatch {
        line: usize,
        got: usize,
        expected: usize,
    },
    #[error("line {line}: the identity element `e` must map to the identity permutation")]
    IdentityNotIdentity { line: usize },
    #[error("line {line}: duplicate entry for ({element}, {r})")]
    Duplicate {
        line: usize,
        element: String,
        r: u64,
    },
}

impl SoficMap {
    pub fn insert(&mut self, element: &str, r: u64, p: Perm) {
        self.entries.insert((element.to_string(), r), p);
    }

    /// Image of a group element at model index `r`; identity off-table.
    pub fn image(&self, element: &str, r: u64) -> Perm {
        self.entries
            .get(&(element.to_string(), r))
            .cloned()
            .unwrap_or_else(|| Perm::identity(r as usize))
    }

    /// One line per entry: `element r images...`, e.g. `g 4 2 1 4 3`.
    /// Blank lines and `#` comments are skipped. The element named `e` is
    /// the group identity and must map to the identity permutation.
    pub fn parse(text: &str) -> Result<SoficMap, SoficParseError> {
        let mut map = SoficMap::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut parts = content.split_whitespace();
            let element = parts.next().ok_or(SoficParseError::Malformed { line })?;
            let r: u64 = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or(SoficParseError::Malformed { line })?;
            let rest: Vec<&str> = parts.collect();
            if rest.is_empty() || r == 0 {
                return Err(SoficParseError::Malformed { line });
            }
            let p = Perm::parse_one_line(&rest.join(" "))
                .map_err(|source| SoficParseError::BadPermutation { line, source })?;
            if p.degree() != r as usize {
                return Err(SoficParseError::DegreeMismatch {
                    line,
                    got: p.degree(),
                    expected: r as usize,
                });
            }
            if element == "e" && !p.is_identity() {
                return Err(SoficParseError::IdentityNotIdentity { line });
            }
            if map.entries.contains_key(&(element.to_string(), r)) {
                return Err(SoficParseError::Duplicate {
                    line,
                    element: element.to_string(),
                    r,
                });
            }
            map.insert(element, r, p);
        }
        Ok(map)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for ((element, r), p) in &self.entries {
            out.push_str(&format!("{element} {r} {}\n", p.one_line()));
        }
        out
    }
}

/// A labeled partition of `{0..n-1}`: a total assignment into a label set,
/// with the label tuples kept in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Per point, an index into `labels`.
    pub assignment: Vec<usize>,
    /// The distinct label tuples present, sorted lexicographically.
    pub labels: Vec<Vec<usize>>,
}

impl Partition {
    pub fn cell_count(&self) -> usize {
        self.labels.len()
    }
}

/// The join of the forward translates of a labeled partition: point `x`
/// gets the tuple `(P(π_1⁻¹ x), …, P(π_k⁻¹ x))`.
pub fn join_partition(assignment: &[usize], perms: &[Perm]) -> Partition {
    assert!(!perms.is_empty(), "join needs at least one permutation");
    let n = assignment.len();
    let inverses: Vec<Perm> = perms.iter().map(|p| p.inverse()).collect();
    let tuples: Vec<Vec<usize>> = (0..n)
        .map(|x| inverses.iter().map(|pi| assignment[pi.apply(x)]).collect())
        .collect();
    let mut labels: Vec<Vec<usize>> = tuples.clone();
    labels.sort();
    labels.dedup();
    let assignment = tuples
        .iter()
        .map(|t| labels.binary_search(t).expect("tuple is present"))
        .collect();
    Partition { assignment, labels }
}

/// Mass of each joined label tuple, under the given point weights
/// (uniform `1/n` when `weights` is `None`).
pub fn join_distribution(
    assignment: &[usize],
    perms: &[Perm],
    weights: Option<&[Rat]>,
) -> BTreeMap<Vec<usize>, Rat> {
    let n = assignment.len();
    let joined = join_partition(assignment, perms);
    let mut out: BTreeMap<Vec<usize>, Rat> = BTreeMap::new();
    for x in 0..n {
        let w = match weights {
            Some(ws) => ws[x],
            None => rat(1, n as i64),
        };
        *out.entry(joined.labels[joined.assignment[x]].clone())
            .or_insert_with(|| rat(0, 1)) += w;
    }
    out
}
