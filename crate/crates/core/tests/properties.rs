use macalloc::allocation::{per_state_allocation, state_objective, MultiplierVector};
use macalloc::optimize::PolymatroidOracle;
use macalloc::*;
use proptest::prelude::*;

fn scenario_and_state(m: usize) -> impl Strategy<Value = (Scenario, ChannelState)> {
    (
        prop::collection::vec(0.1f64..5.0, m),
        0.2f64..3.0,
        prop::collection::vec(0.0f64..3.0, m),
    )
        .prop_map(|(p, n0, h)| (Scenario::new(p, n0).unwrap(), ChannelState::new(h).unwrap()))
}

fn region(m: usize) -> impl Strategy<Value = PolymatroidRegion> {
    scenario_and_state(m).prop_map(|(s, h)| instantaneous_region(&s, &h).unwrap())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn utilities() -> impl Strategy<Value = Utility> {
    (
        prop::collection::vec(0.2f64..3.0, 3),
        0.01f64..1.0,
        0.2f64..3.0,
        0usize..3,
    )
        .prop_map(|(w, d, alpha, kind)| match kind {
            0 => Utility::linear(w).unwrap(),
            1 => Utility::weighted_log(w, d).unwrap(),
            _ => Utility::alpha_fair(w, alpha, d).unwrap(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn instantaneous_regions_are_polymatroids(r in region(4)) {
        prop_assert!(r.validate(1e-12).is_ok());
    }

    #[test]
    fn distance_is_a_metric(a in region(3), b in region(3), c in region(3)) {
        let ab = a.hausdorff_distance(&b).unwrap();
        prop_assert_eq!(a.hausdorff_distance(&a).unwrap(), 0.0);
        prop_assert_eq!(ab, b.hausdorff_distance(&a).unwrap());
        prop_assert!(ab >= 0.0);
        let via = ab + b.hausdorff_distance(&c).unwrap();
        prop_assert!(a.hausdorff_distance(&c).unwrap() <= via + 1e-14);
    }

    #[test]
    fn expansion_distance_is_delta(a in region(3), delta in 0.0f64..2.0) {
        let e = a.expand(delta).unwrap();
        prop_assert!((a.hausdorff_distance(&e).unwrap() - delta).abs() < 1e-14);
    }

    #[test]
    fn greedy_beats_every_vertex(r in region(4), w in prop::collection::vec(0.0f64..2.0, 4)) {
        prop_assume!(w.iter().any(|x| *x > 0.0));
        let best = maximize_linear(&r, &w).unwrap();
        prop_assert!(r.contains(&best, 1e-12).unwrap());
        let top = dot(&best, &w);
        for v in r.dominant_face_vertices().unwrap() {
            prop_assert!(dot(&v, &w) <= top + 1e-12);
        }
    }

    #[test]
    fn utilities_are_concave_and_increasing(
        u in utilities(),
        x in prop::collection::vec(0.0f64..3.0, 3),
        y in prop::collection::vec(0.0f64..3.0, 3),
        t in 0.0f64..1.0,
    ) {
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let chord = t * u.value(&x).unwrap() + (1.0 - t) * u.value(&y).unwrap();
        prop_assert!(u.value(&mid).unwrap() >= chord - 1e-12 * (1.0 + chord.abs()));
        let up: Vec<f64> = x.iter().map(|a| a + 0.1).collect();
        prop_assert!(u.value(&up).unwrap() > u.value(&x).unwrap());
        prop_assert!(u.gradient(&x).unwrap().iter().all(|g| *g > 0.0));
    }

    #[test]
    fn jensen_on_finite_samples(u in utilities(), pts in prop::collection::vec(prop::collection::vec(0.0f64..3.0, 3), 2..20)) {
        let n = pts.len() as f64;
        let mean: Vec<f64> = (0..3).map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / n).collect();
        let avg_u = pts.iter().map(|p| u.value(p).unwrap()).sum::<f64>() / n;
        prop_assert!(avg_u <= u.value(&mean).unwrap() + 1e-12 * (1.0 + avg_u.abs()));
    }

    #[test]
    fn frank_wolfe_gap_decays(
        r in region(3),
        w in prop::collection::vec(0.5f64..2.0, 3),
        d in 0.2f64..1.0,
    ) {
        let u = Utility::weighted_log(w.clone(), d).unwrap();
        let opts = FwOptions { rule: StepRule::LimitedMax, gap_tol: 1e-12, max_iter: 200, record: true, pairwise: false };
        let rep = frank_wolfe(&mut PolymatroidOracle::new(&r), &u, None, &opts).unwrap();
        // curvature constant ≤ L·D² with L the largest -u'' on the orthant
        let l = w.iter().map(|wi| wi / (d * d)).fold(0.0, f64::max);
        let diam2: f64 = (0..3).map(|i| r.rank(UserSet::singleton(i)).powi(2)).sum::<f64>();
        let mut best = f64::INFINITY;
        for (k, it) in rep.trajectory.iter().enumerate() {
            best = best.min(it.gap);
            prop_assert!(best <= 6.75 * l * diam2 / (k as f64 + 2.0) + 1e-12);
        }
        for pair in rep.trajectory.windows(2) {
            prop_assert!(pair[1].utility >= pair[0].utility - 1e-12);
        }
    }

    #[test]
    fn per_state_lp_beats_random_feasible_points(
        (s, h) in scenario_and_state(3),
        mu in prop::collection::vec(0.2f64..2.0, 3),
        lam in prop::collection::vec(0.05f64..1.0, 3),
        draws in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 3), prop::collection::vec(0.0f64..1.0, 4)), 50),
    ) {
        let lambda = MultiplierVector::new(lam.clone()).unwrap();
        let alloc = per_state_allocation(&s, &h, &mu, &lambda).unwrap();
        let best = state_objective(&alloc, &mu, &lambda);
        // the allocation's rates are achievable with its powers
        let own = instantaneous_region(&s.with_powers(alloc.powers.iter().map(|p| p.max(1e-300)).collect()).unwrap(), &h).unwrap();
        prop_assert!(own.contains(&alloc.rates, 1e-9).unwrap());
        for (pf, mix) in draws {
            let p: Vec<f64> = pf.iter().zip(&mu).zip(&lam).map(|((f, m), l)| f * m / (2.0 * l)).collect();
            let reg = instantaneous_region(&s.with_powers(p.iter().map(|x| x.max(1e-300)).collect()).unwrap(), &h).unwrap();
            let total: f64 = mix.iter().sum::<f64>().max(1e-12);
            let mut r = vec![0.0; 3];
            for (k, order) in [[0, 1, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]].iter().enumerate() {
                for (ri, v) in r.iter_mut().zip(reg.vertex_for_order(order)) {
                    *ri += mix[k] / total * v;
                }
            }
            let value = dot(&mu, &r) - dot(&lam, &p);
            prop_assert!(value <= best + 1e-8, "{value} > {best}");
        }
    }

    #[test]
    fn pairwise_steps_ascend_and_stay_feasible(
        r in region(4),
        w in prop::collection::vec(0.5f64..2.0, 4),
        d in 0.01f64..1.0,
    ) {
        let u = Utility::weighted_log(w, d).unwrap();
        let opts = FwOptions { rule: StepRule::LimitedMax, gap_tol: 1e-10, max_iter: 300, record: true, pairwise: true };
        let rep = frank_wolfe(&mut PolymatroidOracle::new(&r), &u, None, &opts).unwrap();
        prop_assert!(r.contains(&rep.rates, 1e-12).unwrap());
        for pair in rep.trajectory.windows(2) {
            prop_assert!(pair[1].utility >= pair[0].utility - 1e-12);
        }
        let total: f64 = rep.atoms.iter().map(|a| a.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for i in 0..4 {
            let mix: f64 = rep.atoms.iter().map(|a| a.weight * a.vertex[i]).sum();
            prop_assert!((mix - rep.rates[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_is_certified_by_frank_wolfe(
        r in region(4),
        w in prop::collection::vec(0.2f64..3.0, 4),
        d in 0.01f64..1.0,
        alpha in 0.3f64..3.0,
        log in any::<bool>(),
    ) {
        let u = if log { Utility::weighted_log(w, d).unwrap() } else { Utility::alpha_fair(w, alpha, d).unwrap() };
        let x = macalloc::optimize::maximize_separable(&r, &u).unwrap();
        prop_assert!(r.contains(&x, 1e-12).unwrap());
        prop_assert!((x.iter().sum::<f64>() - r.sum_rate()).abs() < 1e-12);
        let g = u.gradient(&x).unwrap();
        let s = maximize_linear(&r, &g).unwrap();
        let gap = dot(&g, &s) - dot(&g, &x);
        prop_assert!(gap <= 1e-10, "gap {gap}");
        for v in r.dominant_face_vertices().unwrap() {
            prop_assert!(u.value(&v).unwrap() <= u.value(&x).unwrap() + 1e-12);
        }
    }
}
