use proptest::prelude::*;

use rbmcl_core::{
    cl_gradient, composite_likelihood, family_weight, ml_gradient, pl_gradient, pseudo_likelihood, Block,
    BlockFamily, Dataset, ExactOracle, RbmParams, Spins,
};

#[derive(Clone, Debug)]
struct Case {
    params: RbmParams,
    rows: Vec<Spins>,
}

impl Case {
    fn data(&self) -> Dataset {
        Dataset::new(self.rows.clone()).unwrap()
    }
}

fn case(max_n: usize, scale: f64) -> impl Strategy<Value = Case> {
    (2..=max_n, 1usize..=4).prop_flat_map(move |(n, m)| {
        (
            prop::collection::vec(-scale..scale, n + m + n * m),
            prop::collection::vec(any::<u64>(), 1..=10),
        )
            .prop_map(move |(flat, bits)| Case {
                params: RbmParams::from_flat(n, m, &flat).unwrap(),
                rows: bits.into_iter().map(|b| Spins::from_bits(b, n)).collect(),
            })
    })
}

/// `theta` with `alpha` and `w` negated; pairs with negating every row.
fn flipped(p: &RbmParams) -> RbmParams {
    let alpha = p.alpha().iter().map(|a| -a).collect();
    let w = p.weights().iter().map(|w| -w).collect();
    RbmParams::new(p.n(), p.m(), alpha, p.beta().to_vec(), w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composite_bounds_log_likelihood(c in case(6, 2.0)) {
        let d = c.data();
        let n = c.params.n();
        let ml = ExactOracle::default().log_likelihood_ml(&c.params, &d).unwrap();
        let mut previous = f64::INFINITY;
        for k in 1..=n {
            let v = composite_likelihood(&c.params, &d, &BlockFamily::order(n, k).unwrap()).unwrap();
            prop_assert!(v >= ml - 1e-10);
            prop_assert!(v <= previous + 1e-10);
            previous = v;
        }
        prop_assert!((previous - ml).abs() < 1e-10);
    }

    #[test]
    fn objectives_are_nonpositive(c in case(6, 3.0), k in 1usize..=6) {
        let d = c.data();
        let k = k.min(c.params.n());
        prop_assert!(composite_likelihood(&c.params, &d, &BlockFamily::order(c.params.n(), k).unwrap()).unwrap() <= 0.0);
        prop_assert!(pseudo_likelihood(&c.params, &d).unwrap() <= 0.0);
    }

    #[test]
    fn row_order_does_not_matter(c in case(5, 2.0), k in 1usize..=5, rot in 0usize..10) {
        let n = c.params.n();
        let f = BlockFamily::order(n, k.min(n)).unwrap();
        let mut rows = c.rows.clone();
        let len = rows.len();
        rows.rotate_left(rot % len);
        rows.reverse();
        let shuffled = Dataset::new(rows).unwrap();
        let d = c.data();
        prop_assert_eq!(
            composite_likelihood(&c.params, &d, &f).unwrap(),
            composite_likelihood(&c.params, &shuffled, &f).unwrap()
        );
        prop_assert_eq!(cl_gradient(&c.params, &d, &f).unwrap(), cl_gradient(&c.params, &shuffled, &f).unwrap());
    }

    #[test]
    fn global_flip_symmetry(c in case(5, 2.0), k in 1usize..=5) {
        let n = c.params.n();
        let f = BlockFamily::order(n, k.min(n)).unwrap();
        let negated = Dataset::new(c.rows.iter().map(Spins::negated).collect()).unwrap();
        let a = composite_likelihood(&c.params, &c.data(), &f).unwrap();
        let b = composite_likelihood(&flipped(&c.params), &negated, &f).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pseudo_likelihood_is_first_order(c in case(6, 2.0)) {
        let d = c.data();
        let f1 = BlockFamily::order(c.params.n(), 1).unwrap();
        let a = composite_likelihood(&c.params, &d, &f1).unwrap();
        prop_assert!((a - pseudo_likelihood(&c.params, &d).unwrap()).abs() < 1e-12);
        let g = cl_gradient(&c.params, &d, &f1).unwrap();
        prop_assert!(g.max_abs_diff(&pl_gradient(&c.params, &d).unwrap()) < 1e-12);
    }

    #[test]
    fn full_order_gradient_is_ml_gradient(c in case(6, 2.0)) {
        let d = c.data();
        let n = c.params.n();
        let g = cl_gradient(&c.params, &d, &BlockFamily::order(n, n).unwrap()).unwrap();
        prop_assert!(g.max_abs_diff(&ml_gradient(&c.params, &d).unwrap()) < 1e-12);
    }

    /// Moving along the gradient changes the objective at rate `|g|^2`.
    #[test]
    fn gradient_directional_derivative(c in case(5, 1.5), k in 1usize..=5) {
        let d = c.data();
        let n = c.params.n();
        let f = BlockFamily::order(n, k.min(n)).unwrap();
        let g = cl_gradient(&c.params, &d, &f).unwrap();
        let eps = 1e-5;
        let shift = |s: f64| {
            let flat: Vec<f64> = c.params.iter().zip(g.iter()).map(|(p, gi)| p + s * gi).collect();
            RbmParams::from_flat(n, c.params.m(), &flat).unwrap()
        };
        let fd = (composite_likelihood(&shift(eps), &d, &f).unwrap()
            - composite_likelihood(&shift(-eps), &d, &f).unwrap())
            / (2.0 * eps);
        let sq = g.norm().powi(2);
        prop_assert!((fd - sq).abs() <= 1e-6 * sq.max(1e-3), "{} vs {}", fd, sq);
    }

    #[test]
    fn irregular_families_bound_log_likelihood(
        c in case(5, 2.0),
        masks in prop::collection::vec(1u64..32, 1..6),
    ) {
        let n = c.params.n();
        let mut members: Vec<Vec<usize>> = masks
            .iter()
            .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>())
            .filter(|b| !b.is_empty())
            .collect();
        for i in 0..n {
            if !members.iter().any(|b| b.contains(&i)) {
                members.push(vec![i]);
            }
        }
        members.sort();
        members.dedup();
        let f = BlockFamily::from_blocks(n, members.into_iter().map(|b| Block::new(b).unwrap()).collect()).unwrap();
        let d = c.data();
        let oracle = ExactOracle::default();
        let gap = composite_likelihood(&c.params, &d, &f).unwrap() - oracle.log_likelihood_ml(&c.params, &d).unwrap();
        prop_assert!(gap >= -1e-10);
        let r = oracle.remainder(&c.params, &d, &f).unwrap();
        prop_assert!(r <= 1e-12);
        prop_assert!((r + gap).abs() < 1e-10);
    }

    #[test]
    fn model_json_round_trip(c in case(6, 50.0)) {
        prop_assert_eq!(RbmParams::from_json(&c.params.to_json()).unwrap(), c.params);
    }

    #[test]
    fn dataset_csv_round_trip(c in case(6, 1.0)) {
        let d = c.data();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        prop_assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn family_dump_round_trip(n in 1usize..=7, k in 1usize..=7) {
        let k = k.min(n);
        let f = BlockFamily::order(n, k).unwrap();
        prop_assert_eq!(BlockFamily::parse_dump(n, &f.dump()).unwrap(), f.clone());
        let w = family_weight(n, k).unwrap();
        for i in 0..n {
            let count = f.blocks_containing(i).unwrap().len() as f64;
            prop_assert!((w * count - k as f64 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn bits_round_trip(bits in any::<u64>(), n in 1usize..=20) {
        let s = Spins::from_bits(bits, n);
        prop_assert_eq!(s.to_bits(), bits & ((1u64 << n) - 1));
        prop_assert_eq!(s.negated().negated(), s);
    }
}
