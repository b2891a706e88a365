//! Closed-form and enumerative counting of partition microstate spaces.
//!
//! Label maps `{1..r} -> A` are grouped by type class (the composition of
//! `r` recording how many points carry each label); a class is admissible
//! when the total deviation between its empirical distribution and the
//! target masses stays within tolerance, and it contributes the exact
//! multinomial coefficient. Counts are exact big integers; the comparison
//! convention is non-strict (`≤ δ`), so tolerances sitting exactly on a
//! class boundary shift counts by the boundary classes — grids should pick
//! tolerances off those rationals.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::perm::Perm;
use crate::rat::{rat, Rat};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CountError {
    #[error("masses must be nonnegative and sum to 1")]
    BadMasses,
    #[error("tolerance must be nonnegative")]
    NegativeTolerance,
    #[error("model index r must be at least 1")]
    ZeroIndex,
    #[error("permutation for coordinate {0} has degree {got}, expected {expected}", got = .1, expected = .2)]
    DegreeMismatch(usize, usize, usize),
}

/// Factorials `0! ..= n!` as big integers.
pub struct FactorialTable {
    fact: Vec<BigUint>,
}

impl FactorialTable {
    pub fn new(n: u64) -> FactorialTable {
        let mut fact = Vec::with_capacity(n as usize + 1);
        fact.push(BigUint::one());
        for k in 1..=n {
            let next = fact.last().unwrap() * k;
            fact.push(next);
        }
        FactorialTable { fact }
    }

    pub fn factorial(&self, k: u64) -> &BigUint {
        &self.fact[k as usize]
    }

    /// `r! / (k_1! … k_m!)` for a composition of `r`.
    pub fn multinomial(&self, r: u64, parts: &[u64]) -> BigUint {
        debug_assert_eq!(parts.iter().sum::<u64>(), r);
        let mut denom = BigUint::one();
        for &k in parts {
            denom *= self.factorial(k);
        }
        self.factorial(r) / denom
    }
}

/// Natural log of a big integer; `-inf` for zero. Large values go through
/// the top 53 bits plus a power-of-two shift.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 53 {
        return x.to_f64().expect("small value fits f64").ln();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_f64().expect("53-bit value fits f64");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Exact number of label maps `{1..r} -> A` whose empirical distribution
/// is within total deviation `delta` of `masses`, summed over admissible
/// type classes.
pub fn count_partition_microstates(
    masses: &[Rat],
    r: u64,
    delta: Rat,
) -> Result<BigUint, CountError> {
    validate_masses(masses)?;
    if delta < rat(0, 1) {
        return Err(CountError::NegativeTolerance);
    }
    if r == 0 {
        return Err(CountError::ZeroIndex);
    }
    let table = FactorialTable::new(r);
    let mut parts: Vec<u64> = vec![0; masses.len()];
    let mut total = BigUint::zero();
    recurse_classes(masses, r, delta, 0, r, &mut parts, &table, &mut total);
    Ok(total)
}

fn validate_masses(masses: &[Rat]) -> Result<(), CountError> {
    if masses.is_empty() || masses.iter().any(|&p| p < rat(0, 1)) {
        return Err(CountError::BadMasses);
    }
    let total: Rat = masses.iter().copied().sum();
    if total != rat(1, 1) {
        return Err(CountError::BadMasses);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn recurse_classes(
    masses: &[Rat],
    r: u64,
    remaining_tolerance: Rat,
    label: usize,
    remaining_points: u64,
    parts: &mut Vec<u64>,
    table: &FactorialTable,
    total: &mut BigUint,
) {
    if label + 1 == masses.len() {
        let k = remaining_points;
        let dev = (masses[label] - rat(k as i64, r as i64)).abs();
        if dev <= remaining_tolerance {
            parts[label] = k;
            *total += table.multinomial(r, parts);
        }
        return;
    }
    // admissible k for this label: |p - k/r| ≤ remaining tolerance
    let low = ((masses[label] - remaining_tolerance) * rat(r as i64, 1)).ceil();
    let high = ((masses[label] + remaining_tolerance) * rat(r as i64, 1)).floor();
    let low = low.to_integer().max(0) as u64;
    let high = high.to_integer().min(remaining_points as i64);
    if high < low as i64 {
        return;
    }
    for k in low..=(high as u64) {
        let dev = (masses[label] - rat(k as i64, r as i64)).abs();
        if dev > remaining_tolerance {
            continue;
        }
        parts[label] = k;
        recurse_classes(
            masses,
            r,
            remaining_tolerance - dev,
            label + 1,
            remaining_points - k,
            parts,
            table,
            total,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountKind {
    Exact,
    Sampled,
}

/// A microstate count: exact, or a sampling estimate when the exact
/// enumeration is over budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CountOutcome {
    pub count: BigUint,
    pub log_count: f64,
    pub kind: CountKind,
}

impl CountOutcome {
    fn exact(count: BigUint) -> CountOutcome {
        let log_count = ln_biguint(&count);
        CountOutcome {
            count,
            log_count,
            kind: CountKind::Exact,
        }
    }
}

pub const DEFAULT_BOWEN_EXACT_BUDGET: u64 = 1 << 20;
pub const DEFAULT_BOWEN_SAMPLES: u64 = 100_000;

/// Counts label maps `Q: {1..r} -> A` whose joined empirical distribution
/// under the model-side permutations is within total deviation `delta` of
/// the source-side target distribution (keys are label tuples aligned with
/// the permutation order).
///
/// With a single identity permutation the joined condition collapses to
/// the plain type-class condition and the closed form is used at any `r`.
/// Otherwise the count enumerates all `|A|^r` maps exactly while within
/// `exact_budget`, and falls back to a seeded sampling estimate.
#[allow(clippy::too_many_arguments)]
pub fn count_bowen_microstates(
    target: &BTreeMap<Vec<usize>, Rat>,
    perms: &[Perm],
    labels: usize,
    r: u64,
    delta: Rat,
    exact_budget: u64,
    samples: u64,
    seed: u64,
) -> Result<CountOutcome, CountError> {
    if r == 0 {
        return Err(CountError::ZeroIndex);
    }
    if delta < rat(0, 1) {
        return Err(CountError::NegativeTolerance);
    }
    for (i, p) in perms.iter().enumerate() {
        if p.degree() != r as usize {
            return Err(CountError::DegreeMismatch(i, p.degree(), r as usize));
        }
    }
    if labels == 1 {
        // the single constant map always qualifies for positive tolerance,
        // and has deviation 0 against the one-cell target
        return Ok(CountOutcome::exact(BigUint::one()));
    }
    if perms.len() == 1 && perms[0].is_identity() {
        let mut masses = vec![rat(0, 1); labels];
        for (tuple, &mass) in target {
            masses[tuple[0]] += mass;
        }
        let count = count_partition_microstates(&masses, r, delta)?;
        return Ok(CountOutcome::exact(count));
    }

    let inverses: Vec<Perm> = perms.iter().map(|p| p.inverse()).collect();
    let deviation_ok = |q: &[usize]| -> bool {
        let mut observed: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for x in 0..r as usize {
            let tuple: Vec<usize> = inverses.iter().map(|pi| q[pi.apply(x)]).collect();
            *observed.entry(tuple).or_insert(0) += 1;
        }
        let mut dev = rat(0, 1);
        for (tuple, &mass) in target {
            let got = observed.remove(tuple).unwrap_or(0);
            dev += (mass - rat(got as i64, r as i64)).abs();
        }
        for (_, got) in observed {
            dev += rat(got as i64, r as i64);
        }
        dev <= delta
    };

    let space: Option<u64> = (labels as u64).checked_pow(r as u32);
    if let Some(space) = space {
        if space <= exact_budget {
            let mut q = vec![0usize; r as usize];
            let mut count = BigUint::zero();
            loop {
                if deviation_ok(&q) {
                    count += BigUint::one();
                }
                if !next_map(&mut q, labels) {
                    break;
                }
            }
            return Ok(CountOutcome::exact(count));
        }
    }

    // sampling estimate: valid fraction times |A|^r
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut valid = 0u64;
    let mut q = vec![0usize; r as usize];
    for _ in 0..samples {
        for slot in q.iter_mut() {
            *slot = rng.random_range(0..labels);
        }
        if deviation_ok(&q) {
            valid += 1;
        }
    }
    let space_big = BigUint::from(labels as u64).pow(r as u32);
    let count = (&space_big * BigUint::from(valid)) / BigUint::from(samples);
    let log_count = if valid == 0 {
        f64::NEG_INFINITY
    } else {
        (valid as f64 / samples as f64).ln() + ln_biguint(&space_big)
    };
    Ok(CountOutcome {
        count,
        log_count,
        kind: CountKind::Sampled,
    })
}

fn next_map(q: &mut [usize], labels: usize) -> bool {
    for slot in q.iter_mut().rev() {
        *slot += 1;
        if *slot < labels {
            return true;
        }
        *slot = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_partition_count(masses: &[Rat], r: u64, delta: Rat) -> u64 {
        let labels = masses.len();
        let mut q = vec![0usize; r as usize];
        let mut count = 0u64;
        loop {
            let mut tally = vec![0u64; labels];
            for &v in &q {
                tally[v] += 1;
            }
            let dev: Rat = masses
                .iter()
                .zip(&tally)
                .map(|(&p, &k)| (p - rat(k as i64, r as i64)).abs())
                .sum();
            if dev <= delta {
                count += 1;
            }
            if !next_map(&mut q, labels) {
                break;
            }
        }
        count
    }

    #[test]
    fn balanced_halves_at_ten() {
        let p = [rat(1, 2), rat(1, 2)];
        let got = count_partition_microstates(&p, 10, rat(1, 20)).unwrap();
        assert_eq!(got, BigUint::from(252u32));
        let got = count_partition_microstates(&p, 10, rat(1, 4)).unwrap();
        assert_eq!(got, BigUint::from(672u32));
    }

    #[test]
    fn point_mass_admits_only_the_constant_map() {
        let p = [rat(1, 1), rat(0, 1)];
        for r in [1u64, 5, 17] {
            let got = count_partition_microstates(&p, r, rat(1, 100)).unwrap();
            assert_eq!(got, BigUint::one());
        }
    }

    #[test]
    fn differential_against_brute_force() {
        let cases: Vec<Vec<Rat>> = vec![
            vec![rat(1, 2), rat(1, 2)],
            vec![rat(1, 4), rat(3, 4)],
            vec![rat(1, 3), rat(1, 3), rat(1, 3)],
        ];
        let deltas = [rat(1, 20), rat(3, 20), rat(1, 4)];
        for masses in &cases {
            for r in 1..=8u64 {
                for &delta in &deltas {
                    let exact = count_partition_microstates(masses, r, delta).unwrap();
                    let brute = brute_force_partition_count(masses, r, delta);
                    assert_eq!(exact, BigUint::from(brute), "p={masses:?} r={r} d={delta}");
                }
            }
        }
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(
            count_partition_microstates(&[rat(1, 2), rat(1, 3)], 4, rat(1, 10)).unwrap_err(),
            CountError::BadMasses
        );
        assert_eq!(
            count_partition_microstates(&[rat(1, 2), rat(1, 2)], 0, rat(1, 10)).unwrap_err(),
            CountError::ZeroIndex
        );
        assert_eq!(
            count_partition_microstates(&[rat(1, 2), rat(1, 2)], 4, rat(-1, 10)).unwrap_err(),
            CountError::NegativeTolerance
        );
    }

    #[test]
    fn ln_biguint_small_and_large() {
        assert_eq!(ln_biguint(&BigUint::zero()), f64::NEG_INFINITY);
        assert!((ln_biguint(&BigUint::from(252u32)) - 252f64.ln()).abs() < 1e-12);
        // 2^200: ln = 200 ln 2
        let big = BigUint::one() << 200;
        let expect = 200.0 * std::f64::consts::LN_2;
        assert!((ln_biguint(&big) - expect).abs() < 1e-9);
    }

    #[test]
    fn factorial_and_multinomial() {
        let t = FactorialTable::new(10);
        assert_eq!(t.factorial(5), &BigUint::from(120u32));
        assert_eq!(t.multinomial(10, &[5, 5]), BigUint::from(252u32));
        assert_eq!(t.multinomial(6, &[2, 2, 2]), BigUint::from(90u32));
    }

    #[test]
    fn bowen_identity_window_equals_type_class_count() {
        let mut target = BTreeMap::new();
        target.insert(vec![0], rat(1, 2));
        target.insert(vec![1], rat(1, 2));
        let out = count_bowen_microstates(
            &target,
            &[Perm::identity(10)],
            2,
            10,
            rat(1, 20),
            1 << 20,
            1000,
            0,
        )
        .unwrap();
        assert_eq!(out.count, BigUint::from(252u32));
        assert_eq!(out.kind, CountKind::Exact);
    }

    #[test]
    fn bowen_single_cell_counts_one() {
        let mut target = BTreeMap::new();
        target.insert(vec![0, 0], rat(1, 1));
        let p = Perm::parse_one_line("2 1 4 3").unwrap();
        let out = count_bowen_microstates(
            &target,
            &[Perm::identity(4), p],
            1,
            4,
            rat(1, 10),
            1 << 20,
            1000,
            0,
        )
        .unwrap();
        assert_eq!(out.count, BigUint::one());
    }

    #[test]
    fn bowen_z2_action_matches_hand_enumeration() {
        // source: two atoms of mass 1/2 swapped by g; P separates them.
        // joined target: (a,b) and (b,a) each of mass 1/2.
        let mut target = BTreeMap::new();
        target.insert(vec![0, 1], rat(1, 2));
        target.insert(vec![1, 0], rat(1, 2));
        let sigma_g = Perm::parse_one_line("2 1 4 3").unwrap();
        let out = count_bowen_microstates(
            &target,
            &[Perm::identity(4), sigma_g.clone()],
            2,
            4,
            rat(1, 10),
            1 << 20,
            1000,
            0,
        )
        .unwrap();
        // brute force over the 16 maps {1..4} -> {a,b}
        let inverses = [Perm::identity(4), sigma_g.inverse()];
        let mut brute = 0u32;
        for code in 0..16u32 {
            let q: Vec<usize> = (0..4).map(|i| ((code >> i) & 1) as usize).collect();
            let mut observed: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
            for x in 0..4 {
                let tuple: Vec<usize> = inverses.iter().map(|pi| q[pi.apply(x)]).collect();
                *observed.entry(tuple).or_insert(0) += 1;
            }
            let mut dev = rat(0, 1);
            for (tuple, &mass) in &target {
                let got = observed.remove(tuple).unwrap_or(0);
                dev += (mass - rat(got as i64, 4)).abs();
            }
            for (_, got) in observed {
                dev += rat(got as i64, 4);
            }
            if dev <= rat(1, 10) {
                brute += 1;
            }
        }
        assert_eq!(out.count, BigUint::from(brute));
        assert_eq!(out.kind, CountKind::Exact);
    }

    #[test]
    fn bowen_sampling_flags_kind() {
        let mut target = BTreeMap::new();
        target.insert(vec![0], rat(1, 2));
        target.insert(vec![1], rat(1, 2));
        // non-identity perm forces the enumerative path; tiny budget forces sampling
        let p = Perm::parse_one_line("2 1 4 3 6 5 8 7 10 9").unwrap();
        let out = count_bowen_microstates(&target, &[p], 2, 10, rat(1, 5), 8, 2000, 11).unwrap();
        assert_eq!(out.kind, CountKind::Sampled);
        assert!(out.count > BigUint::zero());
    }
}
