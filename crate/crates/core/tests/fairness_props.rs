mod common;

use fairdiv::algorithms::{round_robin, weighted_picking_sequence};
use fairdiv::fairness::{is_wef, is_wef1, is_wprop, EXACT};
use fairdiv::sampling::SeedStream;
use fairdiv::{Allocation, Instance};
use proptest::prelude::*;

fn instance_and_allocation(max_n: usize, max_m: usize) -> impl Strategy<Value = (Instance, Allocation)> {
    (1..=max_n, 1..=max_m).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(0.1f64..10.0, n),
            proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, m), n),
            proptest::collection::vec(0..n, m),
        )
            .prop_map(move |(weights, utilities, owner)| {
                (Instance::new(weights, utilities).unwrap(), Allocation::from_assignment(&owner, n))
            })
    })
}

fn verdicts(inst: &Instance, alloc: &Allocation) -> (bool, bool, bool) {
    (
        is_wef(inst, alloc, EXACT).unwrap().0,
        is_wef1(inst, alloc, EXACT).unwrap().0,
        is_wprop(inst, alloc, EXACT).unwrap().0,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn predicates_match_definitions((inst, alloc) in instance_and_allocation(4, 7)) {
        let (wef, wef1, wprop) = verdicts(&inst, &alloc);
        prop_assert_eq!(wef, common::naive_wef(&inst, &alloc));
        prop_assert_eq!(wef1, common::naive_wef1(&inst, &alloc));
        prop_assert_eq!(wprop, common::naive_wprop(&inst, &alloc));
    }

    #[test]
    fn implications_between_notions((inst, alloc) in instance_and_allocation(5, 8)) {
        let (wef, wef1, wprop) = verdicts(&inst, &alloc);
        if wef {
            prop_assert!(wef1);
            prop_assert!(wprop);
        }
        if inst.n() == 2 {
            prop_assert_eq!(wef, wprop);
        }
    }

    #[test]
    fn verdicts_ignore_weight_scale((inst, alloc) in instance_and_allocation(4, 7), exp in -3i32..=3) {
        // Powers of two scale exactly, so verdicts must agree bit for bit.
        let c = 2f64.powi(exp);
        let scaled = inst.with_weights(inst.weights().iter().map(|w| w * c).collect()).unwrap();
        prop_assert_eq!(verdicts(&inst, &alloc), verdicts(&scaled, &alloc));
    }

    #[test]
    fn picking_sequence_traces((inst, _) in instance_and_allocation(6, 20)) {
        let (alloc, trace) = weighted_picking_sequence(&inst);
        alloc.validate_for(&inst).unwrap();
        prop_assert!(common::naive_wef1(&inst, &alloc));
        prop_assert_eq!(trace.verify_pick_balance(inst.weights()), Ok(()));
        prop_assert_eq!(trace.verify_cumulative_picks(inst.weights()), Ok(()));
        let m = inst.m();
        for s in 1..=m {
            let total: usize = (0..inst.n()).map(|i| trace.picks_through(i, s)).sum();
            prop_assert_eq!(total, s);
        }
        for i in 0..inst.n() {
            prop_assert_eq!(trace.picks_through(i, m), alloc.bundle(i).len());
            let mut items = trace.items_of(i);
            items.sort_unstable();
            prop_assert_eq!(items.as_slice(), alloc.bundle(i));
        }
    }
}

#[test]
fn round_robin_is_the_equal_weight_picking_sequence() {
    for k in 0..2000 {
        let mut rng = SeedStream::new(400, k).rng();
        let n = common::int_in(&mut rng, 1, 8);
        let m = common::int_in(&mut rng, 1, 40);
        let inst = common::random_instance(&mut rng, n, m, 1.0, 10.0);
        let unit = inst.with_weights(vec![1.0; n]).unwrap();
        assert_eq!(round_robin(&inst), weighted_picking_sequence(&unit).0, "trial {k}");
    }
}

#[test]
fn each_picker_takes_a_favourite_remaining_item() {
    for k in 0..500 {
        let mut rng = SeedStream::new(401, k).rng();
        let n = common::int_in(&mut rng, 2, 6);
        let m = common::int_in(&mut rng, 1, 30);
        let inst = common::random_instance(&mut rng, n, m, 1.0, 10.0);
        let (_, trace) = weighted_picking_sequence(&inst);
        let mut taken = vec![false; m];
        for (&agent, &item) in trace.order.iter().zip(&trace.picked_item) {
            let best = (0..m)
                .filter(|&g| !taken[g])
                .map(|g| inst.utility(agent, g))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(inst.utility(agent, item), best);
            taken[item] = true;
        }
    }
}

#[test]
fn wef_allocations_survive_reordering_agents() {
    for k in 0..500 {
        let mut rng = SeedStream::new(402, k).rng();
        let inst = common::random_instance(&mut rng, 3, 6, 1.0, 5.0);
        let owner: Vec<usize> = (0..6).map(|_| common::int_in(&mut rng, 0, 2)).collect();
        let alloc = Allocation::from_assignment(&owner, 3);
        let perm = [2, 0, 1];
        let permuted = Instance::new(
            perm.iter().map(|&i| inst.weight(i)).collect(),
            perm.iter().map(|&i| inst.utilities()[i].clone()).collect(),
        )
        .unwrap();
        let permuted_alloc = Allocation::new(perm.iter().map(|&i| alloc.bundle(i).to_vec()).collect());
        assert_eq!(verdicts(&inst, &alloc), verdicts(&permuted, &permuted_alloc));
    }
}
