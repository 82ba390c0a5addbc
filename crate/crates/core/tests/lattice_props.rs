use proptest::prelude::*;
use u1qec::{LinkField, TorusLattice};

fn field(l: usize, values: Vec<i64>) -> LinkField {
    LinkField::from_values(TorusLattice::new(l).unwrap(), values).unwrap()
}

proptest! {
    #[test]
    fn total_charge_vanishes(values in prop::collection::vec(-5i64..=5, 32)) {
        prop_assert_eq!(field(4, values).divergence().unwrap().total().unwrap(), 0);
    }

    #[test]
    fn divergence_is_linear(a in prop::collection::vec(-5i64..=5, 18), b in prop::collection::vec(-5i64..=5, 18)) {
        let (fa, fb) = (field(3, a), field(3, b));
        let sum = fa.checked_add(&fb).unwrap().divergence().unwrap();
        prop_assert_eq!(sum, fa.divergence().unwrap().checked_add(&fb.divergence().unwrap()).unwrap());
    }

    #[test]
    fn plaquette_loops_are_closed_with_zero_winding(coef in prop::collection::vec(-3i64..=3, 16)) {
        // Sum of elementary plaquette circulations.
        let lat = TorusLattice::new(4).unwrap();
        let mut v = vec![0i64; lat.num_links()];
        for (p, &c) in coef.iter().enumerate() {
            let (x, y) = lat.coords(p);
            let right = lat.site((x + 1) % 4, y);
            let up = lat.site(x, (y + 1) % 4);
            v[2 * p] += c;
            v[2 * right + 1] += c;
            v[2 * up] -= c;
            v[2 * p + 1] -= c;
        }
        let f = LinkField::from_values(lat, v).unwrap();
        prop_assert!(f.is_divergenceless().unwrap());
        prop_assert_eq!(f.integer_winding().unwrap(), (0, 0));
    }

    #[test]
    fn straight_line_winds_once(y in 0usize..5, n in -3i64..=3) {
        let lat = TorusLattice::new(5).unwrap();
        let mut v = vec![0i64; lat.num_links()];
        for x in 0..5 {
            v[2 * lat.site(x, y)] = n;
        }
        let f = LinkField::from_values(lat, v).unwrap();
        prop_assert!(f.is_divergenceless().unwrap());
        prop_assert_eq!(f.integer_winding().unwrap(), (n, 0));
    }
}
