//! Estimator-level properties: grid-order monotonicity of computed
//! tables, degenerate probe conventions, relative-entropy collapses, and
//! incremental determinism of schedules.

use microstate_entropy::entropy::{
    EGrid, EntropyTable, Estimator, EstimatorConfig, Grids, ModelFamily,
};
use microstate_entropy::rat::{rat, Rat};
use microstate_entropy::structure::partition_algebra;
use microstate_entropy::FiniteStructure;

fn grids(
    deltas: Vec<Rat>,
    epsilons: Vec<Rat>,
    r_depths: Vec<usize>,
    f_chain_depths: Vec<usize>,
    source: &FiniteStructure,
) -> Grids {
    Grids {
        deltas,
        epsilons,
        r_depths,
        states: vec![source.signature.state("mu").unwrap()],
        f_chain_depths,
        closure_depth: 1,
        e_grid: EGrid::Full,
    }
}

// Within one table (fixed probe), a row with a larger subset, deeper
// conditions, tighter tolerance, and larger scale can never exceed a row
// with the opposite relations at the same r. Subsets come from a nested
// chain, so f_size orders them by inclusion.
fn assert_table_monotone(table: &EntropyTable) {
    for a in &table.rows {
        for b in &table.rows {
            if a.r == b.r
                && a.f_size >= b.f_size
                && a.r_depth >= b.r_depth
                && a.delta <= b.delta
                && a.eps >= b.eps
            {
                assert!(
                    a.normalized <= b.normalized + 1e-12,
                    "monotonicity violated at r={}: ({},{},{},{}) -> {} vs ({},{},{},{}) -> {}",
                    a.r,
                    a.f_size,
                    a.r_depth,
                    a.delta,
                    a.eps,
                    a.normalized,
                    b.f_size,
                    b.r_depth,
                    b.delta,
                    b.eps,
                    b.normalized
                );
            }
        }
    }
}

#[test]
fn computed_tables_respect_the_parameter_order() {
    let source = partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
    let family = ModelFamily::MeasureAlgebra;
    let schedule = [4u64, 6];
    let est = Estimator {
        source: &source,
        family: &family,
        schedule: &schedule,
        cfg: EstimatorConfig::default(),
    };
    let g = vec![source.element_index("s1").unwrap()];
    let grid = grids(
        vec![rat(1, 20), rat(1, 5)],
        vec![rat(1, 10), rat(1, 2)],
        vec![0, 1],
        vec![0, 1],
        &source,
    );
    let out = est.entropy(&g, &grid).unwrap();
    for table in &out.tables {
        assert!(!table.rows.is_empty());
        assert_table_monotone(table);
    }
}

#[test]
fn empty_probe_collapses_to_one_class() {
    let source = partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
    let family = ModelFamily::MeasureAlgebra;
    let schedule = [4u64];
    let est = Estimator {
        source: &source,
        family: &family,
        schedule: &schedule,
        cfg: EstimatorConfig::default(),
    };
    let mu = source.signature.state("mu").unwrap();
    let p = source.element_index("s1").unwrap();
    let (estimate, table) = est
        .point_estimate(&[], &[p], 0, &[mu], rat(1, 2), rat(1, 10))
        .unwrap();
    assert_eq!(table.rows[0].n_raw, 1u32.into());
    assert_eq!(estimate.value, 0.0);
}

#[test]
fn presence_inside_the_closure_changes_nothing() {
    // H = {P^c} is generated by G = {P} at depth 1, so closing over the
    // union gives the same chain and identical estimates
    let source = partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
    let family = ModelFamily::MeasureAlgebra;
    let schedule = [4u64, 6];
    let est = Estimator {
        source: &source,
        family: &family,
        schedule: &schedule,
        cfg: EstimatorConfig::default(),
    };
    let p = source.element_index("s1").unwrap();
    let pc = source.element_index("s2").unwrap();
    let grid = grids(
        vec![rat(1, 20)],
        vec![rat(1, 100)],
        vec![1],
        vec![1],
        &source,
    );
    let plain = est.entropy(&[p], &grid).unwrap();
    let relative = est.relative_entropy(&[p], &[pc], &grid).unwrap();
    assert_eq!(plain.estimate.value, relative.estimate.value);
    assert_eq!(plain.estimate.sequence, relative.estimate.sequence);
    let rel_dim = est.relative_entropy_dimension(&[p], &[pc], &grid).unwrap();
    let dim = est.entropy_dimension(&[p], &grid).unwrap();
    assert_eq!(dim.estimate.value, rel_dim.estimate.value);
}

#[test]
fn complement_generators_give_identical_estimates() {
    // {P} and {P^c} generate the same closure; estimates agree exactly,
    // row for row
    let source = partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
    let family = ModelFamily::MeasureAlgebra;
    let schedule = [4u64, 6];
    let est = Estimator {
        source: &source,
        family: &family,
        schedule: &schedule,
        cfg: EstimatorConfig::default(),
    };
    let p = source.element_index("s1").unwrap();
    let pc = source.element_index("s2").unwrap();
    let grid = grids(
        vec![rat(1, 20), rat(1, 5)],
        vec![rat(1, 100), rat(1, 10)],
        vec![1],
        vec![1],
        &source,
    );
    let left = est.entropy(&[p], &grid).unwrap();
    let right = est.entropy(&[pc], &grid).unwrap();
    assert_eq!(left.estimate.value, right.estimate.value);
    assert_eq!(left.estimate.sequence, right.estimate.sequence);
    let rows_l: Vec<_> = left.tables[0]
        .rows
        .iter()
        .map(|r| r.n_raw.clone())
        .collect();
    let rows_r: Vec<_> = right.tables[0]
        .rows
        .iter()
        .map(|r| r.n_raw.clone())
        .collect();
    assert_eq!(rows_l, rows_r);
}

#[test]
fn extending_the_schedule_preserves_earlier_rows() {
    let source = partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
    let family = ModelFamily::MeasureAlgebra;
    let g = vec![source.element_index("s1").unwrap()];
    let grid = grids(
        vec![rat(1, 20)],
        vec![rat(1, 100)],
        vec![1],
        vec![1],
        &source,
    );
    let run = |schedule: &[u64]| {
        let est = Estimator {
            source: &source,
            family: &family,
            schedule,
            cfg: EstimatorConfig::default(),
        };
        est.entropy(&g, &grid).unwrap()
    };
    let a = run(&[4]);
    let b = run(&[4, 6]);
    let first_r_rows = |t: &EntropyTable| {
        t.rows
            .iter()
            .filter(|row| row.r == 4)
            .cloned()
            .collect::<Vec<_>>()
    };
    assert_eq!(first_r_rows(&a.tables[0]), first_r_rows(&b.tables[0]));
    assert_eq!(a.estimate.sequence[0], b.estimate.sequence[0]);
}

#[test]
fn trivial_group_pins_the_identity() {
    // at tolerance zero only the identity permutation carries full trace,
    // so the count is one and the dimension estimate is zero
    let source = microstate_entropy::structure::cyclic_group(1);
    let family = ModelFamily::SymmetricGroup;
    let schedule = [2u64, 3, 4];
    let est = Estimator {
        source: &source,
        family: &family,
        schedule: &schedule,
        cfg: EstimatorConfig {
            normalization: microstate_entropy::entropy::Normalization::RLogR,
            ..EstimatorConfig::default()
        },
    };
    let grid = Grids {
        deltas: vec![rat(0, 1)],
        epsilons: vec![rat(1, 8)],
        r_depths: vec![1],
        states: vec![source.signature.state("tau").unwrap()],
        f_chain_depths: vec![1],
        closure_depth: 1,
        e_grid: EGrid::Full,
    };
    let out = est.entropy_dimension(&[0], &grid).unwrap();
    assert_eq!(out.estimate.value, 0.0);
    for row in &out.tables[0].rows {
        assert_eq!(row.n_raw, 1u32.into());
    }
}

#[test]
fn singleton_grids_match_point_estimates() {
    let source = partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
    let family = ModelFamily::MeasureAlgebra;
    let schedule = [4u64, 6];
    let est = Estimator {
        source: &source,
        family: &family,
        schedule: &schedule,
        cfg: EstimatorConfig::default(),
    };
    let mu = source.signature.state("mu").unwrap();
    let p = source.element_index("s1").unwrap();
    let grid = grids(
        vec![rat(1, 20)],
        vec![rat(1, 100)],
        vec![1],
        vec![1],
        &source,
    );
    let via_lattice = est.lattice_infimum(&[p], &[p], &grid, rat(1, 100)).unwrap();
    let subset = microstate_entropy::sig::symbol_closure(&[p], 1, &source).elements;
    let via_point = est
        .point_estimate(&[p], &subset, 1, &[mu], rat(1, 20), rat(1, 100))
        .unwrap();
    assert_eq!(via_lattice.0.value, via_point.0.value);
    assert_eq!(via_lattice.0.sequence, via_point.0.sequence);
}

#[test]
fn enlarging_inner_grids_never_raises_the_infimum() {
    let source = partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
    let family = ModelFamily::MeasureAlgebra;
    let schedule = [4u64, 6];
    let est = Estimator {
        source: &source,
        family: &family,
        schedule: &schedule,
        cfg: EstimatorConfig::default(),
    };
    let p = source.element_index("s1").unwrap();
    let eps = rat(1, 100);
    let narrow = grids(vec![rat(1, 20)], vec![eps], vec![1], vec![1], &source);
    let wider_deltas = grids(
        vec![rat(1, 20), rat(1, 5)],
        vec![eps],
        vec![1],
        vec![1],
        &source,
    );
    let wider_chain = grids(vec![rat(1, 20)], vec![eps], vec![1], vec![0, 1], &source);
    let base = est
        .lattice_infimum(&[p], &[p], &narrow, eps)
        .unwrap()
        .0
        .value;
    let with_deltas = est
        .lattice_infimum(&[p], &[p], &wider_deltas, eps)
        .unwrap()
        .0
        .value;
    let with_chain = est
        .lattice_infimum(&[p], &[p], &wider_chain, eps)
        .unwrap()
        .0
        .value;
    assert!(with_deltas <= base);
    assert!(with_chain <= base);
}

#[test]
fn entropy_dominates_every_single_scale_infimum() {
    let source = partition_algebra(&[rat(1, 2), rat(1, 2)]).unwrap();
    let family = ModelFamily::MeasureAlgebra;
    let schedule = [4u64, 6];
    let est = Estimator {
        source: &source,
        family: &family,
        schedule: &schedule,
        cfg: EstimatorConfig::default(),
    };
    let p = source.element_index("s1").unwrap();
    let grid = grids(
        vec![rat(1, 20), rat(1, 5)],
        vec![rat(1, 100), rat(1, 10), rat(1, 2)],
        vec![1],
        vec![1],
        &source,
    );
    let total = est.entropy(&[p], &grid).unwrap().estimate.value;
    for &eps in &grid.epsilons {
        let at_eps = est.lattice_infimum(&[p], &[p], &grid, eps).unwrap().0.value;
        assert!(
            total >= at_eps,
            "entropy {total} < infimum {at_eps} at eps {eps}"
        );
    }
}
