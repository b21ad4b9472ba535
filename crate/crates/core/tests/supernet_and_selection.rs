mod common;

use std::collections::HashSet;

use gaia_core::rng;
use gaia_core::supernet::{
    extract_subnet, forward, full_selector, init_supernet, loss_and_grads, teacher_task, toy_schedule, toy_spaces,
    train_abps, Checkpoint, Selector, Targets, ToyConfig, TrainConfig,
};
use gaia_core::tsds::{select, Represents, Strategy as Pick};
use proptest::prelude::*;
use rand::Rng as _;

use common::{most_similar_oracle, Records};

fn config_strategy() -> impl Strategy<Value = ToyConfig> {
    (1usize..6, 1usize..4, prop::array::uniform4(1usize..4), prop::array::uniform5(1usize..7))
        .prop_map(|(i, o, d, w)| ToyConfig::new(i, o, d, w))
}

fn within(max: Selector) -> impl Strategy<Value = Selector> {
    let d = max.depths.map(|m| 1..=m);
    let w = max.widths.map(|m| 1..=m);
    (d, w).prop_map(|(depths, widths)| Selector { depths, widths })
}

fn case() -> impl Strategy<Value = (ToyConfig, Selector, u64)> {
    config_strategy().prop_flat_map(|c| (Just(c), within(c.max), any::<u64>()))
}

fn inputs(dim: usize, n: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut r = rng::derived(seed, "inputs");
    (0..n).map(|_| (0..dim).map(|_| r.random_range(-1.5..1.5)).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn extracted_subnet_reproduces_restricted_forward((config, sel, seed) in case()) {
        let ckpt = init_supernet(&config, seed).unwrap();
        let xs = inputs(config.input_dim, 3, seed);
        let (sub, plan) = extract_subnet(&ckpt, &sel).unwrap();
        let own = full_selector(&sub).unwrap();
        prop_assert_eq!(own, sel);
        let a = forward(&ckpt, &sel, &xs).unwrap();
        let b = forward(&sub, &own, &xs).unwrap();
        let bits = |v: &Vec<Vec<f32>>| v.iter().flatten().map(|f| f.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        for (name, ranges) in &plan.entries {
            let shape = &ckpt.get(name).unwrap().shape;
            prop_assert!(ranges.iter().zip(shape).all(|(r, &n)| r.start == 0 && r.end <= n));
        }
        prop_assert_eq!(plan.entries.len(), sub.len());
    }

    #[test]
    fn gradients_vanish_outside_the_active_slices((config, sel, seed) in case()) {
        let ckpt = init_supernet(&config, seed).unwrap();
        let xs = inputs(config.input_dim, 4, seed);
        let targets = Targets::Classes((0..4).map(|i| i % config.outputs).collect());
        let (_, grads) = loss_and_grads(&ckpt, &sel, &xs, &targets).unwrap();
        let (_, plan) = extract_subnet(&ckpt, &sel).unwrap();
        for g in grads.tensors() {
            let active = plan.entries.iter().find(|(n, _)| n == &g.name).map(|(_, r)| r);
            for (flat, &v) in g.data.iter().enumerate() {
                let inside = match (active, g.shape.as_slice()) {
                    (Some(r), [_, cols]) => r[0].contains(&(flat / cols)) && r[1].contains(&(flat % cols)),
                    (Some(r), [_]) => r[0].contains(&flat),
                    _ => false,
                };
                if !inside {
                    prop_assert!(v == 0.0, "{}[{flat}] = {v} outside the slice", g.name);
                }
            }
        }
    }
}

#[test]
fn abps_training_is_bit_reproducible() {
    let spaces = toy_spaces(6);
    let config = ToyConfig::covering(&spaces[0], 6, 2);
    let ckpt = init_supernet(&config, 4).unwrap();
    let task = teacher_task(6, 2, 96, 32, 4);
    let schedule = toy_schedule(spaces, [2, 2, 2]).unwrap();
    let cfg = TrainConfig {
        seed: 4,
        ..TrainConfig::default()
    };
    let run = || train_abps(&ckpt, &schedule, &task.train, Some(&task.val), &cfg).unwrap();
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(log_a, log_b);
    assert_eq!(Checkpoint::from_bytes(&a.to_bytes()).unwrap(), a);
}

fn represents(records: &Records) -> Represents {
    let mut out = Represents::default();
    for (i, c, v) in records {
        out.insert(i.clone(), *c, v.clone());
    }
    out
}

fn records(prefix: &'static str, max: usize) -> impl Strategy<Value = Records> {
    prop::collection::vec((0u32..3, prop::collection::vec(-1.0f64..1.0, 3)), 1..max).prop_map(move |rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (c, v))| (format!("{prefix}{i:02}"), c, v))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn most_similar_equals_the_exhaustive_oracle(src in records("s", 40), tgt in records("t", 20), budget in 1usize..50) {
        let (s, t) = (represents(&src), represents(&tgt));
        prop_assume!(!s.categories().is_disjoint(&t.categories()));
        let got = select(Pick::MostSimilar, &s, &t, budget, 0).unwrap();
        let want: Vec<String> = most_similar_oracle(&src, &tgt, budget).into_iter().map(|(i, _)| i).collect();
        prop_assert_eq!(got.images(), want.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn selections_are_distinct_and_bounded(src in records("s", 40), tgt in records("t", 20), budget in 1usize..50, seed in any::<u64>()) {
        let (s, t) = (represents(&src), represents(&tgt));
        for strategy in [Pick::MostSimilar, Pick::top_k(2), Pick::TopK { k: None, per_image: true }, Pick::Random] {
            let r = match select(strategy, &s, &t, budget, seed) {
                Ok(r) => r,
                Err(_) => {
                    prop_assert!(s.categories().is_disjoint(&t.categories()) && strategy != Pick::Random);
                    continue;
                }
            };
            let ids = r.images();
            let unique: HashSet<&str> = ids.iter().copied().collect();
            prop_assert_eq!(unique.len(), ids.len());
            prop_assert!(ids.len() <= budget.min(s.images().len()));
            prop_assert_eq!(&r, &select(strategy, &s, &t, budget, seed).unwrap());
        }
    }

    #[test]
    fn uniform_scaling_changes_nothing(src in records("s", 30), tgt in records("t", 15), budget in 1usize..30, exp in -6i32..6) {
        let (s, t) = (represents(&src), represents(&tgt));
        prop_assume!(!s.categories().is_disjoint(&t.categories()));
        let f = 2f64.powi(exp);
        for strategy in [Pick::MostSimilar, Pick::top_k(1), Pick::top_k(3)] {
            let a = select(strategy, &s, &t, budget, 0).unwrap();
            let b = select(strategy, &s.scaled(f), &t.scaled(f), budget, 0).unwrap();
            prop_assert_eq!(a.images(), b.images());
        }
    }
}
