use mbr_core::recovery::c2_designated_helpers;
use mbr_core::search::{self, SearchBudget};
use mbr_core::{CodeVariant, EncodingVectors, Error, FieldSpec, SystemParams};

fn params(n: usize, k: usize, d: usize, field: FieldSpec) -> SystemParams {
    SystemParams::new(n, k, d, field, 1).unwrap()
}

#[test]
fn complete_graph_5_3_4_is_fully_feasible() {
    for field in [FieldSpec::prime(11).unwrap(), FieldSpec::gf256()] {
        let p = params(5, 3, 4, field);
        let r = search::verify_transfer_witness(
            &p,
            CodeVariant::CompleteGraph,
            &SearchBudget::default(),
        )
        .unwrap();
        assert!(r.overall_feasible);
        assert_eq!(r.pairs.len(), 5);
        assert!(r.consistent_with_impossibility());
    }
}

#[test]
fn c1_4_2_2_feasible_exactly_on_first_d_nodes() {
    let p = params(4, 2, 2, FieldSpec::prime(7).unwrap());
    let r = search::verify_transfer_witness(&p, CodeVariant::C1, &SearchBudget::default()).unwrap();
    assert!(!r.overall_feasible);
    for pair in &r.pairs {
        if pair.failed <= p.d {
            let s = pair
                .schedule
                .as_ref()
                .expect("failed <= d repairs by transfer");
            // Each helper passes its `failed`-th symbol.
            assert!(s.indices.iter().all(|ix| ix == &vec![pair.failed - 1]));
        }
    }
    assert_eq!(r.fully_repairable_nodes(), vec![1, 2]);
}

#[test]
fn c2_5_2_2_designated_sets_feasible() {
    let p = params(5, 2, 2, FieldSpec::prime(7).unwrap());
    let r = search::verify_transfer_witness(&p, CodeVariant::C2, &SearchBudget::default()).unwrap();
    assert!(!r.overall_feasible);
    for failed in p.nodes() {
        let designated = c2_designated_helpers(failed, &p);
        let mut sorted = designated.clone();
        sorted.sort_unstable();
        let pair = r
            .pairs
            .iter()
            .find(|x| x.failed == failed && x.helpers == sorted)
            .unwrap();
        assert!(pair.feasible(), "node {failed} from {designated:?}");
    }
    assert_eq!(r.somewhere_repairable_nodes(), vec![1, 2, 3, 4, 5]);
}

#[test]
fn baseline_4_2_2_has_an_infeasible_pair() {
    let p = params(4, 2, 2, FieldSpec::prime(7).unwrap());
    let r = search::verify_transfer_witness(&p, CodeVariant::Baseline, &SearchBudget::default())
        .unwrap();
    assert!(r.pairs.iter().any(|x| !x.feasible()));
}

#[test]
fn witness_rejects_large_or_expensive_instances() {
    let big = params(9, 2, 3, FieldSpec::gf256());
    assert!(matches!(
        search::verify_transfer_witness(&big, CodeVariant::C1, &SearchBudget::default()),
        Err(Error::Unsupported(_))
    ));
    let costly = SystemParams::new(6, 3, 4, FieldSpec::gf256(), 2).unwrap();
    assert!(matches!(
        search::verify_transfer_witness(&costly, CodeVariant::C1, &SearchBudget::default()),
        Err(Error::BudgetExceeded { .. })
    ));
    let wrong = params(5, 2, 3, FieldSpec::gf256());
    assert!(search::verify_transfer_witness(
        &wrong,
        CodeVariant::CompleteGraph,
        &SearchBudget::default()
    )
    .is_err());
}

#[test]
fn census_complete_graph_node_4_passes_distinct_edges() {
    let p = params(4, 2, 3, FieldSpec::prime(7).unwrap());
    let v = EncodingVectors::build(&p).unwrap();
    let c = search::shared_symbol_census(
        CodeVariant::CompleteGraph,
        4,
        &v,
        &p,
        &SearchBudget::default(),
    )
    .unwrap();
    let failed: Vec<usize> = c.events.iter().map(|e| e.failed).collect();
    assert_eq!(failed, vec![1, 2, 3]);
    let mut idx: Vec<usize> = c.events.iter().flat_map(|e| e.indices.clone()).collect();
    idx.sort_unstable();
    assert_eq!(idx, vec![0, 1, 2]);
    assert!(c.repeated.is_empty());
}

#[test]
fn census_c1_small_instance() {
    // Node 4 helps transfer repairs of nodes 1 and 2 (failed <= d) only.
    let p = params(4, 2, 2, FieldSpec::prime(7).unwrap());
    let v = EncodingVectors::build(&p).unwrap();
    let c =
        search::shared_symbol_census(CodeVariant::C1, 4, &v, &p, &SearchBudget::default()).unwrap();
    assert_eq!(c.events.len(), p.d + 1);
    assert!(c.pigeonhole_forced);
    assert!(!c.repeated.is_empty());
    let total: usize = c.index_counts.values().sum();
    assert_eq!(total, (p.d + 1) * p.beta);
    for e in &c.events {
        assert!(e.helpers.contains(&4));
    }
}
