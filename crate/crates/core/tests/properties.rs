use mbr_core::harness::{self, Event, HelperPolicy, Workload};
use mbr_core::search::{self, LinearForms, SearchBudget};
use mbr_core::variants::cyclic_add;
use mbr_core::{
    Code, CodeVariant, EncodingVectors, FieldSpec, MessageMatrix, RepairMode, SystemParams,
};
use proptest::prelude::*;
use proptest::sample::subsequence;

/// Small parameter sets over GF(7), GF(11) and GF(2^8).
fn arb_params() -> impl Strategy<Value = SystemParams> {
    (3usize..=7, 0usize..3, 1usize..=2)
        .prop_flat_map(|(n, f, beta)| {
            let field = [
                FieldSpec::prime(7).unwrap(),
                FieldSpec::prime(11).unwrap(),
                FieldSpec::gf256(),
            ][f];
            (Just(n), 1..n, Just(field), Just(beta))
        })
        .prop_flat_map(|(n, d, field, beta)| (Just(n), 1..=d, Just(d), Just(field), Just(beta)))
        .prop_map(|(n, k, d, field, beta)| SystemParams::new(n, k, d, field, beta).unwrap())
}

fn arb_message(p: SystemParams, stripes: usize) -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::vec(0..p.field.size(), p.message_len() * stripes)
}

fn arb_product_variant() -> impl Strategy<Value = CodeVariant> {
    prop_oneof![
        Just(CodeVariant::Baseline),
        Just(CodeVariant::C1),
        Just(CodeVariant::C2)
    ]
}

/// ψᵢᵀ M ψ computed from scratch.
fn bilinear(f: FieldSpec, a: &[u32], m: &MessageMatrix, b: &[u32]) -> u32 {
    let mm = m.matrix();
    let mut acc = 0;
    for (r, &ar) in a.iter().enumerate() {
        for (c, &bc) in b.iter().enumerate() {
            acc = f.add(acc, f.mul(ar, f.mul(mm.get(r, c), bc)));
        }
    }
    acc
}

fn unit(d: usize, j: usize) -> Vec<u32> {
    (0..d).map(|t| u32::from(t == j)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decode_from_any_k_subset(
        (p, msg, subset, variant) in arb_params().prop_flat_map(|p| {
            let nodes: Vec<usize> = p.nodes().collect();
            (Just(p), arb_message(p, 2), subsequence(nodes, p.k), arb_product_variant())
        })
    ) {
        let code = Code::new(p, variant).unwrap();
        let nodes = code.encode(&msg).unwrap();
        let chosen: Vec<_> = subset.iter().rev().map(|&i| nodes[i - 1].clone()).collect();
        prop_assert_eq!(code.decode(&chosen).unwrap(), msg);
    }

    #[test]
    fn stored_symbols_match_direct_products(
        (p, msg, variant) in arb_params().prop_flat_map(|p| (Just(p), arb_message(p, 1), arb_product_variant()))
    ) {
        let code = Code::new(p, variant).unwrap();
        let nodes = code.encode(&msg).unwrap();
        let v = EncodingVectors::build(&p).unwrap();
        let lb = p.layer_message_len();
        for layer in 0..p.beta {
            let m = MessageMatrix::build(&msg[layer * lb..(layer + 1) * lb], &p).unwrap();
            for i in p.nodes() {
                for j in 0..p.d {
                    let phi = match variant {
                        CodeVariant::Baseline => unit(p.d, j),
                        CodeVariant::C1 => v.psi(j + 1).to_vec(),
                        _ => v.psi(cyclic_add(i, j + 1, p.n)).to_vec(),
                    };
                    let expect = bilinear(p.field, v.psi(i), &m, &phi);
                    prop_assert_eq!(nodes[i - 1].symbols[layer * p.d + j], expect);
                }
            }
        }
    }

    #[test]
    fn compute_repair_restores_content(
        (p, msg, failed, pick, variant) in arb_params().prop_flat_map(|p| {
            (Just(p), arb_message(p, 2), 1..=p.n, any::<proptest::sample::Index>(), arb_product_variant())
        })
    ) {
        let code = Code::new(p, variant).unwrap();
        let nodes = code.encode(&msg).unwrap();
        let mut others: Vec<usize> = p.nodes().filter(|&j| j != failed).collect();
        let start = pick.index(others.len());
        others.rotate_left(start);
        let helpers = &others[..p.d];
        let contents: Vec<_> = helpers.iter().map(|&h| nodes[h - 1].clone()).collect();
        let (c, m) = code.repair(failed, helpers, RepairMode::Compute, &contents).unwrap();
        prop_assert_eq!(&c, &nodes[failed - 1]);
        prop_assert_eq!(m.total_downloaded(), p.d * p.beta);
        prop_assert_eq!(m.total_read(), p.d * p.alpha());
        prop_assert!(m.is_consistent());
    }

    #[test]
    fn c1_stores_a_symmetric_table(
        (p, msg) in arb_params().prop_flat_map(|p| (Just(p), arb_message(p, 1)))
    ) {
        let nodes = Code::new(p, CodeVariant::C1).unwrap().encode(&msg).unwrap();
        for layer in 0..p.beta {
            for i in 1..=p.d {
                for j in 1..=p.d {
                    prop_assert_eq!(
                        nodes[i - 1].symbols[layer * p.d + j - 1],
                        nodes[j - 1].symbols[layer * p.d + i - 1]
                    );
                }
            }
        }
    }

    #[test]
    fn found_schedules_really_repair(
        (n, d, msg_seed, variant) in (4usize..=5).prop_flat_map(|n| (Just(n), 2..n, any::<u64>(), arb_product_variant()))
    ) {
        let p = SystemParams::new(n, 2.min(d), d, FieldSpec::prime(11).unwrap(), 1).unwrap();
        let v = EncodingVectors::build(&p).unwrap();
        let forms = LinearForms::build(variant, &v, &p).unwrap();
        let msg = harness::seeded_message(&p, 3, msg_seed);
        let nodes = Code::new(p, variant).unwrap().encode(&msg).unwrap();
        for failed in p.nodes() {
            let helpers: Vec<usize> = p.nodes().filter(|&j| j != failed).take(d).collect();
            if let Some(s) = search::schedule_feasible(failed, &helpers, &forms, &p, &SearchBudget::default()).unwrap() {
                prop_assert!(s.indices.iter().all(|ix| ix.len() == 1));
                let (c, m) = search::execute_schedule(&s, &nodes, &forms, &p).unwrap();
                prop_assert_eq!(&c, &nodes[failed - 1]);
                prop_assert!(m.read_meets_bound() && m.download_meets_bound());
            }
        }
    }

    #[test]
    fn workload_download_is_repairs_times_bound(
        (p, seed, events, policy) in arb_params().prop_flat_map(|p| {
            let ev = prop_oneof![
                (1..=p.n).prop_map(|node| Event::Fail { node }),
                (1..=p.n).prop_map(|node| Event::DegradedRead { node }),
                Just(Event::FullRead),
            ];
            (
                Just(p),
                any::<u64>(),
                proptest::collection::vec(ev, 0..8),
                prop_oneof![
                    Just(HelperPolicy::Designated),
                    Just(HelperPolicy::RandomAdmissible),
                    Just(HelperPolicy::AdversarialWorstRead)
                ],
            )
        })
    ) {
        let w = Workload { seed, policy, events };
        let msg = harness::seeded_message(&p, 1, seed);
        let rows = harness::compare_variants(&p, &msg, &w).unwrap();
        for r in &rows {
            prop_assert_eq!(r.download, r.recoveries * p.d * p.beta);
            prop_assert!(r.read >= r.download);
        }
        let again = harness::compare_variants(&p, &msg, &w).unwrap();
        prop_assert_eq!(harness::summaries_to_csv(&rows), harness::summaries_to_csv(&again));
    }
}
