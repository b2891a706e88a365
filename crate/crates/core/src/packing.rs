//! Separation and covering numbers of finite (pseudo)metric point sets.
//!
//! Conventions: a set is `ε`-separated when its pairwise distances are
//! all `≥ ε`; a set of centers is `ε`-dense when every point lies within
//! distance `< ε` of some center. With these choices the chain
//! `max_separated(2ε) ≤ min_dense(ε) ≤ max_separated(ε)` holds with no
//! slack, and any maximal separated set doubles as a dense cover.
//!
//! Exact values come from branch-and-bound (maximum independent set on
//! the conflict graph for separation, set cover for density) under a node
//! budget; past the budget the greedy maximal separated set serves as a
//! certified lower bound for separation and upper bound for density.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::microstate::Microstate;
use crate::rat::{rat, Rat};
use crate::structure::FiniteStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackingKind {
    SeparatedExact,
    SeparatedGreedyLower,
    DenseExact,
    DenseGreedyUpper,
    CountExact,
    CountSampled,
}

impl PackingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PackingKind::SeparatedExact => "separated_exact",
            PackingKind::SeparatedGreedyLower => "separated_greedy_lower",
            PackingKind::DenseExact => "dense_exact",
            PackingKind::DenseGreedyUpper => "dense_greedy_upper",
            PackingKind::CountExact => "count_exact",
            PackingKind::CountSampled => "count_sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackingResult {
    pub count: usize,
    pub kind: PackingKind,
}

/// Solver limits: point count beyond which branch-and-bound is not
/// attempted, and the node budget inside it.
#[derive(Debug, Clone, Copy)]
pub struct SolverBudget {
    pub max_exact_points: usize,
    pub max_nodes: u64,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget {
            max_exact_points: 2000,
            max_nodes: 10_000_000,
        }
    }
}

/// Sup distance between two microstates over a probe subset of their
/// common domain; zero on an empty probe.
pub fn microstate_distance(
    a: &Microstate,
    b: &Microstate,
    probe: &[usize],
    model: &FiniteStructure,
) -> Rat {
    let mut best = rat(0, 1);
    for &e in probe {
        let pa = a
            .subset
            .iter()
            .position(|&x| x == e)
            .expect("probe element in domain");
        let pb = b
            .subset
            .iter()
            .position(|&x| x == e)
            .expect("probe element in domain");
        let d = model.distance(a.images[pa], b.images[pb]);
        if d > best {
            best = d;
        }
    }
    best
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

#[derive(Clone, PartialEq, Eq)]
struct BitSet {
    bits: Vec<u64>,
}

impl BitSet {
    fn empty(n: usize) -> BitSet {
        BitSet {
            bits: vec![0; words(n)],
        }
    }

    fn full(n: usize) -> BitSet {
        let mut b = BitSet {
            bits: vec![u64::MAX; words(n)],
        };
        let extra = words(n) * 64 - n;
        if extra > 0 && !b.bits.is_empty() {
            let last = b.bits.len() - 1;
            b.bits[last] >>= extra;
        }
        b
    }

    fn set(&mut self, i: usize) {
        self.bits[i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self, i: usize) {
        self.bits[i / 64] &= !(1 << (i % 64));
    }

    fn get(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    fn and_not_assign(&mut self, other: &BitSet) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= !b;
        }
    }

    fn first(&self) -> Option<usize> {
        for (wi, &w) in self.bits.iter().enumerate() {
            if w != 0 {
                return Some(wi * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }

    fn intersection_count(&self, other: &BitSet) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

fn conflict_graph(n: usize, dist: &impl Fn(usize, usize) -> Rat, eps: Rat) -> Vec<BitSet> {
    let mut adj: Vec<BitSet> = (0..n).map(|_| BitSet::empty(n)).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if dist(i, j) < eps {
                adj[i].set(j);
                adj[j].set(i);
            }
        }
    }
    adj
}

fn greedy_separated_order(
    dist: &impl Fn(usize, usize) -> Rat,
    eps: Rat,
    order: &[usize],
) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for &i in order {
        if chosen.iter().all(|&j| dist(i, j) >= eps) {
            chosen.push(i);
        }
    }
    chosen
}

struct MisSearch<'a> {
    adj: &'a [BitSet],
    best: usize,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl MisSearch<'_> {
    fn run(&mut self, cand: BitSet, size: usize) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if size + cand.count() <= self.best {
            return;
        }
        let Some(mut pick) = cand.first() else {
            self.best = self.best.max(size);
            return;
        };
        // branch on the candidate with most conflicts left
        let mut best_deg = self.adj[pick].intersection_count(&cand);
        for v in cand.iter() {
            let deg = self.adj[v].intersection_count(&cand);
            if deg > best_deg {
                best_deg = deg;
                pick = v;
            }
        }
        // include pick
        let mut with = cand.clone();
        with.clear(pick);
        with.and_not_assign(&self.adj[pick]);
        self.run(with, size + 1);
        // exclude pick
        let mut without = cand;
        without.clear(pick);
        self.run(without, size);
    }
}

/// Maximum cardinality of an `ε`-separated subset. Exact while the point
/// count and node budget allow; otherwise the greedy-in-order maximal
/// separated set, a certified lower bound.
pub fn max_separated(
    n: usize,
    dist: impl Fn(usize, usize) -> Rat,
    eps: Rat,
    budget: SolverBudget,
) -> PackingResult {
    max_separated_with_restarts(n, dist, eps, budget, 0, 0)
}

/// As [`max_separated`]; in the greedy regime, `restarts` extra seeded
/// point orders are tried and the best lower bound kept.
pub fn max_separated_with_restarts(
    n: usize,
    dist: impl Fn(usize, usize) -> Rat,
    eps: Rat,
    budget: SolverBudget,
    restarts: u32,
    seed: u64,
) -> PackingResult {
    if n == 0 {
        return PackingResult {
            count: 0,
            kind: PackingKind::SeparatedExact,
        };
    }
    let natural: Vec<usize> = (0..n).collect();
    let greedy = greedy_separated_order(&dist, eps, &natural);
    if n > budget.max_exact_points {
        let count = best_greedy_count(n, &dist, eps, greedy.len(), restarts, seed);
        return PackingResult {
            count,
            kind: PackingKind::SeparatedGreedyLower,
        };
    }
    let adj = conflict_graph(n, &dist, eps);
    let mut search = MisSearch {
        adj: &adj,
        best: greedy.len(),
        nodes: 0,
        budget: budget.max_nodes,
        exhausted: false,
    };
    search.run(BitSet::full(n), 0);
    if search.exhausted {
        let count = best_greedy_count(n, &dist, eps, search.best, restarts, seed);
        PackingResult {
            count,
            kind: PackingKind::SeparatedGreedyLower,
        }
    } else {
        PackingResult {
            count: search.best,
            kind: PackingKind::SeparatedExact,
        }
    }
}

fn best_greedy_count(
    n: usize,
    dist: &impl Fn(usize, usize) -> Rat,
    eps: Rat,
    floor: usize,
    restarts: u32,
    seed: u64,
) -> usize {
    let mut best = floor;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        best = best.max(greedy_separated_order(dist, eps, &order).len());
    }
    best
}

struct CoverSearch<'a> {
    balls: &'a [BitSet],
    best: usize,
    nodes: u64,
    budget: u64,
    exhausted: bool,
    max_ball: usize,
}

impl CoverSearch<'_> {
    fn run(&mut self, uncovered: BitSet, chosen: usize) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if uncovered.is_empty() {
            self.best = self.best.min(chosen);
            return;
        }
        let need = uncovered.count().div_ceil(self.max_ball.max(1));
        if chosen + need >= self.best {
            return;
        }
        // branch on the uncovered point with the fewest covers
        let mut pick = uncovered.first().expect("nonempty");
        let mut fewest = usize::MAX;
        for x in uncovered.iter() {
            let covers = self.balls.iter().filter(|b| b.get(x)).count();
            if covers < fewest {
                fewest = covers;
                pick = x;
            }
        }
        let centers: Vec<usize> = (0..self.balls.len())
            .filter(|&c| self.balls[c].get(pick))
            .collect();
        for c in centers {
            let mut rest = uncovered.clone();
            rest.and_not_assign(&self.balls[c]);
            self.run(rest, chosen + 1);
        }
    }
}

/// Minimum cardinality of an `ε`-dense set of centers drawn from the
/// points. Exact while budgets allow; otherwise the greedy maximal
/// separated set (a valid cover) as a certified upper bound.
pub fn min_dense(
    n: usize,
    dist: impl Fn(usize, usize) -> Rat,
    eps: Rat,
    budget: SolverBudget,
) -> PackingResult {
    if n == 0 {
        return PackingResult {
            count: 0,
            kind: PackingKind::DenseExact,
        };
    }
    let natural: Vec<usize> = (0..n).collect();
    let greedy_cover = greedy_separated_order(&dist, eps, &natural);
    if n > budget.max_exact_points {
        return PackingResult {
            count: greedy_cover.len(),
            kind: PackingKind::DenseGreedyUpper,
        };
    }
    let balls: Vec<BitSet> = (0..n)
        .map(|c| {
            let mut b = BitSet::empty(n);
            for x in 0..n {
                if dist(c, x) < eps {
                    b.set(x);
                }
            }
            b
        })
        .collect();
    let max_ball = balls.iter().map(|b| b.count()).max().unwrap_or(1);
    let mut search = CoverSearch {
        balls: &balls,
        best: greedy_cover.len(),
        nodes: 0,
        budget: budget.max_nodes,
        exhausted: false,
        max_ball,
    };
    search.run(BitSet::full(n), 0);
    if search.exhausted {
        PackingResult {
            count: search.best,
            kind: PackingKind::DenseGreedyUpper,
        }
    } else {
        PackingResult {
            count: search.best,
            kind: PackingKind::DenseExact,
        }
    }
}

/// Separation number of a microstate set under the sup distance over a
/// probe subset — the production path of the estimator.
///
/// Microstates sharing every probe image sit at sup distance zero, and
/// the distance is constant on such classes, so the set is first
/// quotiented down to one representative per probe-image tuple (kept in
/// enumeration order). This leaves the separation number unchanged and
/// keeps the solver input small.
pub fn packing_number_of_microstates(
    set: &[Microstate],
    probe: &[usize],
    eps: Rat,
    model: &FiniteStructure,
    budget: SolverBudget,
    restarts: u32,
    seed: u64,
) -> PackingResult {
    if set.is_empty() {
        return PackingResult {
            count: 0,
            kind: PackingKind::SeparatedExact,
        };
    }
    let positions: Vec<usize> = probe
        .iter()
        .map(|&e| {
            set[0]
                .subset
                .iter()
                .position(|&x| x == e)
                .expect("probe element lies inside the microstate domain")
        })
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    let mut reps: Vec<Vec<usize>> = Vec::new();
    for ms in set {
        let key: Vec<usize> = positions.iter().map(|&p| ms.images[p]).collect();
        if seen.insert(key.clone()) {
            reps.push(key);
        }
    }
    let dist = |i: usize, j: usize| -> Rat {
        let mut best = rat(0, 1);
        for (a, b) in reps[i].iter().zip(&reps[j]) {
            let d = model.distance(*a, *b);
            if d > best {
                best = d;
            }
        }
        best
    };
    max_separated_with_restarts(reps.len(), dist, eps, budget, restarts, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microstate::Microstate;
    use crate::structure::measure_algebra;
    use num_traits::Signed;

    fn line_dist(points: &'static [(i64, i64)]) -> impl Fn(usize, usize) -> Rat {
        move |i, j| (rat(points[i].0, points[i].1) - rat(points[j].0, points[j].1)).abs()
    }

    const LINE: &[(i64, i64)] = &[(0, 1), (2, 5), (1, 1)]; // 0, 0.4, 1.0

    #[test]
    fn line_points_separation() {
        let d = line_dist(LINE);
        let got = max_separated(3, &d, rat(1, 2), SolverBudget::default());
        assert_eq!(got.count, 2);
        assert_eq!(got.kind, PackingKind::SeparatedExact);
        let got = max_separated(3, &d, rat(3, 10), SolverBudget::default());
        assert_eq!(got.count, 3);
    }

    #[test]
    fn single_point_and_empty() {
        let d = |_: usize, _: usize| rat(0, 1);
        assert_eq!(
            max_separated(1, d, rat(1, 100), SolverBudget::default()).count,
            1
        );
        assert_eq!(
            max_separated(0, d, rat(1, 2), SolverBudget::default()).count,
            0
        );
        assert_eq!(min_dense(0, d, rat(1, 2), SolverBudget::default()).count, 0);
    }

    #[test]
    fn line_points_cover() {
        let d = line_dist(LINE);
        let got = min_dense(3, &d, rat(1, 2), SolverBudget::default());
        assert_eq!(got.count, 2);
        // radius beyond the diameter: one center suffices
        let got = min_dense(3, &d, rat(2, 1), SolverBudget::default());
        assert_eq!(got.count, 1);
    }

    #[test]
    fn sup_distance_over_probes() {
        let model = measure_algebra(4).unwrap();
        let a = Microstate {
            subset: vec![0, 1],
            images: vec![0b0001, 0b0011],
        };
        let b = Microstate {
            subset: vec![0, 1],
            images: vec![0b0010, 0b0011],
        };
        assert_eq!(microstate_distance(&a, &a, &[0, 1], &model), rat(0, 1));
        assert_eq!(microstate_distance(&a, &b, &[0], &model), rat(1, 2));
        assert_eq!(microstate_distance(&a, &b, &[1], &model), rat(0, 1));
        assert_eq!(microstate_distance(&a, &b, &[0, 1], &model), rat(1, 2));
        assert_eq!(microstate_distance(&a, &b, &[], &model), rat(0, 1));
    }

    #[test]
    fn microstate_packing_degenerate_cases() {
        let model = measure_algebra(2).unwrap();
        let set: Vec<Microstate> = (0..4)
            .map(|k| Microstate {
                subset: vec![0],
                images: vec![k],
            })
            .collect();
        // empty probe: one class
        let got = packing_number_of_microstates(
            &set,
            &[],
            rat(1, 4),
            &model,
            SolverBudget::default(),
            0,
            0,
        );
        assert_eq!(got.count, 1);
        // all microstates agreeing on the probe: one class
        let agreeing: Vec<Microstate> = (0..4)
            .map(|k| Microstate {
                subset: vec![0, 1],
                images: vec![2, k],
            })
            .collect();
        let got = packing_number_of_microstates(
            &agreeing,
            &[0],
            rat(1, 4),
            &model,
            SolverBudget::default(),
            0,
            0,
        );
        assert_eq!(got.count, 1);
        // epsilon below the least positive distance: everything separates
        let got = packing_number_of_microstates(
            &set,
            &[0],
            rat(1, 4),
            &model,
            SolverBudget::default(),
            0,
            0,
        );
        assert_eq!(got.count, 4);
        let empty: Vec<Microstate> = Vec::new();
        let got = packing_number_of_microstates(
            &empty,
            &[0],
            rat(1, 4),
            &model,
            SolverBudget::default(),
            0,
            0,
        );
        assert_eq!(got.count, 0);
    }

    #[test]
    fn greedy_fallback_is_flagged_and_bounded() {
        let d = |i: usize, j: usize| {
            if i == j {
                rat(0, 1)
            } else {
                rat((i as i64 - j as i64).abs() % 3 + 1, 4)
            }
        };
        let tight = SolverBudget {
            max_exact_points: 4,
            max_nodes: 10,
        };
        let greedy = max_separated(10, d, rat(1, 2), tight);
        assert_eq!(greedy.kind, PackingKind::SeparatedGreedyLower);
        let exact = max_separated(10, d, rat(1, 2), SolverBudget::default());
        assert_eq!(exact.kind, PackingKind::SeparatedExact);
        assert!(greedy.count <= exact.count);
        assert!(greedy.count >= 1);
    }

    #[test]
    fn monotone_in_epsilon() {
        let d = line_dist(LINE);
        let eps_small = rat(1, 10);
        let eps_large = rat(7, 10);
        let b = SolverBudget::default();
        assert!(
            max_separated(3, &d, eps_large, b).count <= max_separated(3, &d, eps_small, b).count
        );
        assert!(min_dense(3, &d, eps_large, b).count <= min_dense(3, &d, eps_small, b).count);
    }
}
