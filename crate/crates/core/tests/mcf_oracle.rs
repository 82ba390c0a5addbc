use proptest::prelude::*;
use u1qec::mcf::{
    brute_force_mcf, build_network, build_network_with, has_negative_residual_cycle, is_feasible, mcf_decode,
    solve_min_cost_flow, CostModel,
};
use u1qec::noise::{IntegerGaussian, NoiseParams};
use u1qec::seeds::{self, Stream};
use u1qec::{LinkField, Syndrome, TorusLattice};

fn field(l: usize, values: Vec<i64>) -> LinkField {
    LinkField::from_values(TorusLattice::new(l).unwrap(), values).unwrap()
}

#[test]
fn hundred_l4_instances_match_brute_force() {
    let lat = TorusLattice::new(4).unwrap();
    let noise = IntegerGaussian::new(NoiseParams::new(0.3).unwrap());
    let mut rng = seeds::rng(77, Stream::Disorder);
    for _ in 0..100 {
        let s = noise.sample_field(lat, &mut rng).divergence().unwrap();
        let net = build_network(&s).unwrap();
        let sol = solve_min_cost_flow(&net).unwrap();
        let q: i64 = s.charges().iter().filter(|&&c| c > 0).sum();
        assert_eq!(sol.total_cost, brute_force_mcf(&s, q.max(1)).unwrap().total_cost, "{:?}", s.charges());
        assert!(!has_negative_residual_cycle(&net, &sol));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_is_optimal_on_small_tori(values in prop::collection::vec(-2i64..=2, 18)) {
        let s = field(3, values).divergence().unwrap();
        let net = build_network(&s).unwrap();
        let sol = solve_min_cost_flow(&net).unwrap();
        prop_assert!(is_feasible(&net, &sol));
        prop_assert!(!has_negative_residual_cycle(&net, &sol));
        let q: i64 = s.charges().iter().filter(|&&c| c > 0).sum();
        prop_assert_eq!(sol.total_cost, brute_force_mcf(&s, q.max(1)).unwrap().total_cost);
    }

    #[test]
    fn recovery_reproduces_syndrome(values in prop::collection::vec(-3i64..=3, 50)) {
        let k = field(5, values);
        let s = k.divergence().unwrap();
        let sol = solve_min_cost_flow(&build_network(&s).unwrap()).unwrap();
        prop_assert_eq!(sol.recovery.divergence().unwrap(), s);
        prop_assert_eq!(sol.recovery.l1_norm(), sol.total_cost);
        // The recovery never costs more than the error itself.
        prop_assert!(sol.total_cost <= k.l1_norm());
        // k - r is closed, so its winding is integral.
        prop_assert!(k.checked_sub(&sol.recovery).unwrap().winding().unwrap().is_integral());
    }

    #[test]
    fn cost_is_odd_symmetric(values in prop::collection::vec(-2i64..=2, 32)) {
        let k = field(4, values);
        let a = mcf_decode(&k).unwrap();
        let b = mcf_decode(&k.checked_neg().unwrap()).unwrap();
        prop_assert_eq!(a.cost, b.cost);
    }

    #[test]
    fn quadratic_mode_is_feasible_and_no_cheaper_than_linear(values in prop::collection::vec(-2i64..=2, 32)) {
        let s = field(4, values).divergence().unwrap();
        let lin = solve_min_cost_flow(&build_network(&s).unwrap()).unwrap();
        let net = build_network_with(&s, CostModel::PiecewiseQuadratic).unwrap();
        let quad = solve_min_cost_flow(&net).unwrap();
        prop_assert!(is_feasible(&net, &quad));
        prop_assert!(!has_negative_residual_cycle(&net, &quad));
        prop_assert!(quad.total_cost >= lin.total_cost);
    }

    #[test]
    fn translated_syndrome_costs_the_same(values in prop::collection::vec(-2i64..=2, 32), dx in 0usize..4, dy in 0usize..4) {
        let k = field(4, values);
        let s = k.divergence().unwrap();
        let lat = s.lattice();
        let mut moved = vec![0; lat.num_sites()];
        for site in 0..lat.num_sites() {
            let (x, y) = lat.coords(site);
            moved[lat.site((x + dx) % 4, (y + dy) % 4)] = s.charge(site);
        }
        let t = Syndrome::from_charges(lat, moved).unwrap();
        let c0 = solve_min_cost_flow(&build_network(&s).unwrap()).unwrap().total_cost;
        let c1 = solve_min_cost_flow(&build_network(&t).unwrap()).unwrap().total_cost;
        prop_assert_eq!(c0, c1);
    }
}
