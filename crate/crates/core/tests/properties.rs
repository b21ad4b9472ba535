mod common;

use gaia_core::archspace::{sample, Architecture, Grid, RulePool, SampleRule, Sampler, SubSpace, DEFAULT_ENUM_CAP};
use gaia_core::costmodel::{detector_flops, HeadConfig};
use gaia_core::evaluator::{evaluate_batch, simulate, EvalRequest, Evaluator, SimConfig, Simulator};
use gaia_core::labelspace::{build_unified, merge_new_dataset, write_report, write_unified, EmbeddingTable, LabelSpace};
use gaia_core::rng;
use gaia_core::tsas::{kendall_tau_xy, TauError};
use gaia_core::Fidelity;
use proptest::prelude::*;

const VOCAB: usize = 10;

fn table_strategy() -> impl Strategy<Value = EmbeddingTable> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), VOCAB).prop_filter_map("zero vector", |vs| {
        EmbeddingTable::from_pairs(vs.into_iter().enumerate().map(|(i, v)| (format!("w{i}"), v))).ok()
    })
}

fn spaces_strategy() -> impl Strategy<Value = Vec<LabelSpace>> {
    prop::collection::vec(prop::collection::btree_set(0..VOCAB, 1..6), 1..5).prop_map(|sets| {
        sets.into_iter()
            .enumerate()
            .map(|(d, set)| LabelSpace::new(format!("d{d}"), set.into_iter().map(|i| format!("w{i}"))).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unified_size_is_bounded(table in table_strategy(), spaces in spaces_strategy(), t in 0.0f64..0.99) {
        let (u, r) = build_unified(&spaces, &table, t).unwrap();
        let largest = spaces.iter().map(LabelSpace::len).max().unwrap();
        let sum: usize = spaces.iter().map(LabelSpace::len).sum();
        prop_assert!(largest <= u.len() && u.len() <= sum);
        prop_assert!(u.check());
        // every non-seed category is either matched or novel, never both
        prop_assert_eq!(r.matches.len() + r.novel.len(), sum - largest);
        for s in &spaces {
            for c in &s.categories {
                prop_assert!(u.index_of(&s.dataset_id, c).is_some());
            }
        }
        let seed = spaces.iter().find(|s| Some(&s.dataset_id) == r.initial.as_ref()).unwrap();
        prop_assert_eq!(&u.categories()[..seed.len()], seed.categories.as_slice());
    }

    #[test]
    fn raising_the_threshold_never_shrinks(table in table_strategy(), spaces in spaces_strategy(), a in 0.0f64..0.99, b in 0.0f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let n_lo = build_unified(&spaces, &table, lo).unwrap().0.len();
        let n_hi = build_unified(&spaces, &table, hi).unwrap().0.len();
        prop_assert!(n_lo <= n_hi);
    }

    #[test]
    fn remerging_known_content_adds_nothing(table in table_strategy(), spaces in spaces_strategy(), pick in 0usize..4, t in 0.0f64..0.99) {
        let (u, _) = build_unified(&spaces, &table, t).unwrap();
        let src = &spaces[pick % spaces.len()];
        let copy = LabelSpace::new("copy", src.categories.iter().cloned()).unwrap();
        let (merged, ext, _) = merge_new_dataset(&u, &copy, &table, t).unwrap();
        prop_assert_eq!(merged.len(), u.len());
        prop_assert!(ext.appended.is_empty());
    }

    #[test]
    fn unification_is_byte_deterministic(table in table_strategy(), spaces in spaces_strategy()) {
        let (u1, r1) = build_unified(&spaces, &table, 0.8).unwrap();
        let mut reversed = spaces.clone();
        reversed.reverse();
        let (u2, r2) = build_unified(&reversed, &table, 0.8).unwrap();
        prop_assert_eq!(write_unified(&u1), write_unified(&u2));
        prop_assert_eq!(write_report(&r1), write_report(&r2));
    }
}

fn grid_strategy(lo: u32, hi: u32) -> impl Strategy<Value = Grid> {
    (lo..=hi, 1u32..4, 0u32..3).prop_map(|(min, step, n)| Grid::new(min, min + step * n, step))
}

fn space_strategy() -> impl Strategy<Value = SubSpace> {
    (
        prop::array::uniform4(grid_strategy(1, 6)),
        prop::array::uniform5(grid_strategy(8, 64)),
        // input sides come in multiples of 32; a one-pixel step can leave
        // every ceil-divided feature map unchanged
        grid_strategy(2, 8).prop_map(|g| Grid::new(32 * g.min, 32 * g.max, 32 * g.step)),
    )
        .prop_map(|(depth, width, scale)| SubSpace {
            name: "p".into(),
            depth,
            width,
            scale,
            anchor: Architecture::new(depth.map(|g| g.min), width.map(|g| g.min), scale.min),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_length_is_cardinality(space in space_strategy()) {
        let all: Vec<Architecture> = space.enumerate(DEFAULT_ENUM_CAP).unwrap().collect();
        prop_assert_eq!(all.len() as u64, space.cardinality());
        prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(all.iter().all(|a| space.contains(a)));
    }

    #[test]
    fn samples_stay_inside_and_repeat(space in space_strategy(), seed in any::<u64>()) {
        for pool in [RulePool::standard(), RulePool::with_min_width(0.125).unwrap()] {
            let a = sample(&space, seed, &pool).unwrap();
            prop_assert!(space.contains(&a));
            prop_assert_eq!(a, sample(&space, seed, &pool).unwrap());
        }
    }

    #[test]
    fn extreme_quantiles_hit_the_depth_bounds(space in space_strategy(), seed in any::<u64>()) {
        let sampler = Sampler::new(space.clone(), RulePool::standard()).unwrap();
        let mut r = rng::seeded(seed);
        prop_assert_eq!(sampler.realize(&SampleRule::DepthQuantile(0.0), &mut r).total_depth(), space.depth_min_total());
        prop_assert_eq!(sampler.realize(&SampleRule::DepthQuantile(1.0), &mut r).total_depth(), space.depth_max_total());
    }

    #[test]
    fn flops_grow_along_every_dimension(space in space_strategy(), seed in any::<u64>(), dim in 0usize..10) {
        let head = HeadConfig::default();
        let base = sample(&space, seed, &RulePool::standard()).unwrap();
        let mut up = base;
        let grid = match dim {
            0..=3 => space.depth[dim],
            4..=8 => space.width[dim - 4],
            _ => space.scale,
        };
        let slot = match dim {
            0..=3 => &mut up.depths[dim],
            4..=8 => &mut up.widths[dim - 4],
            _ => &mut up.scale,
        };
        prop_assume!(*slot + grid.step <= grid.max);
        *slot += grid.step;
        let (a, b) = (detector_flops(&base, &head), detector_flops(&up, &head));
        prop_assert!(b.total > a.total);
        prop_assert_eq!(a.total, a.backbone + a.fpn + a.rpn + a.roi_head);
        let mono = SimConfig::monotone();
        prop_assert!(mono.latent_quality(&up) > mono.latent_quality(&base));
    }

    #[test]
    fn mac_convention_scales_every_part(space in space_strategy(), seed in any::<u64>(), shift in 0u32..3) {
        let arch = sample(&space, seed, &RulePool::standard()).unwrap();
        let one = detector_flops(&arch, &HeadConfig::default());
        let k = f64::from(1u32 << shift);
        let scaled = detector_flops(&arch, &HeadConfig { flops_per_mac: k, ..HeadConfig::default() });
        prop_assert_eq!(scaled.backbone, one.backbone * k);
        prop_assert_eq!(scaled.fpn, one.fpn * k);
        prop_assert_eq!(scaled.rpn, one.rpn * k);
        prop_assert_eq!(scaled.roi_head, one.roi_head * k);
    }
}

fn scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        let v = || prop::collection::vec((0u8..6).prop_map(f64::from), n);
        (v(), v())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn tau_matches_pair_counting((x, y) in scores()) {
        let want = common::brute_tau_b(&x, &y);
        match kendall_tau_xy(&x, &y) {
            Ok(t) => {
                prop_assert!((t - want).abs() <= 1e-12);
                prop_assert!((-1.0..=1.0).contains(&t));
                prop_assert_eq!(kendall_tau_xy(&y, &x).unwrap(), t);
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                prop_assert!((kendall_tau_xy(&x, &neg).unwrap() + t).abs() <= 1e-12);
            }
            Err(e) => {
                prop_assert_eq!(e, TauError::AllTied);
                prop_assert!(!want.is_finite());
            }
        }
    }

    #[test]
    fn simulation_is_pure_and_order_free(space in space_strategy(), seed in any::<u64>(), study in 0u64..100) {
        let sim = Simulator::new(SimConfig::default(), study);
        let sampler = Sampler::new(space, RulePool::standard()).unwrap();
        let mut r = rng::seeded(seed);
        let reqs: Vec<EvalRequest> = (0..12)
            .map(|i| {
                let f = [Fidelity::Direct, Fidelity::FastFinetune, Fidelity::FullSchedule][i % 3];
                EvalRequest::new(format!("r{i}"), sampler.draw(&mut r).1, f, "t")
            })
            .collect();
        let serial = evaluate_batch(&sim, &reqs, 1).unwrap();
        let parallel = evaluate_batch(&sim, &reqs, 4).unwrap();
        prop_assert_eq!(&serial, &parallel);
        let mut reversed: Vec<_> = reqs.iter().rev().map(|q| sim.evaluate(q).unwrap()).collect();
        reversed.reverse();
        prop_assert_eq!(&serial, &reversed);
        for (q, res) in reqs.iter().zip(&serial) {
            prop_assert_eq!(&res.id, &q.id);
            prop_assert!(res.metric.is_finite());
            prop_assert_eq!(res, &simulate(q, &sim.config, study).unwrap());
        }
    }
}
