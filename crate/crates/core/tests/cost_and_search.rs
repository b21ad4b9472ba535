mod common;

use gaia_core::archspace::SubSpace;
use gaia_core::costmodel::{flops_band, latency_fit, table2_bands, HeadConfig};
use gaia_core::evaluator::{SimConfig, Simulator};
use gaia_core::tsas::{two_step_search, Constraint, SearchConfig};

use common::{gflops, published_rows};

#[test]
fn published_rows_land_near_their_totals() {
    for r in published_rows() {
        let g = gflops(&r.arch);
        assert!((g - r.gflops).abs() / r.gflops <= 0.15, "{}: {g:.2} vs {}", r.name, r.gflops);
    }
}

#[test]
fn computed_order_of_searched_rows_follows_bands() {
    let rows: Vec<_> = published_rows().into_iter().filter(|r| r.band.is_some()).collect();
    let mut by_flops: Vec<usize> = (0..rows.len()).collect();
    by_flops.sort_by(|&a, &b| gflops(&rows[a].arch).total_cmp(&gflops(&rows[b].arch)));
    assert_eq!(by_flops, (0..rows.len()).collect::<Vec<_>>());
}

#[test]
fn every_published_total_sits_in_its_own_band() {
    let bands = table2_bands();
    for r in published_rows() {
        if let Some(b) = r.band {
            assert_eq!(flops_band(r.gflops, &bands), Some(b), "{}", r.name);
        }
    }
    assert_eq!(flops_band(44.3, &bands), Some("30-45B"));
    assert_eq!(flops_band(45.0, &bands), Some("45-60B"));
}

#[test]
fn latency_fit_on_published_rows() {
    let rows = published_rows();
    let samples: Vec<_> = rows.iter().map(|r| (r.arch, r.latency_ms)).collect();
    let model = latency_fit(&samples, &HeadConfig::default()).unwrap();
    assert_eq!(model.samples, 12);
    for r in &rows {
        let p = model.estimate(&r.arch);
        assert!(p > 0.0, "{}: {p}", r.name);
        assert!((p - r.latency_ms).abs() <= model.max_abs_residual + 1e-9);
    }
    for s in [SubSpace::ar50(), SubSpace::ar77(), SubSpace::ar101()] {
        assert!(model.estimate(&s.anchor) > 0.0);
    }
    assert!(model.rmse < 3.0, "rmse {}", model.rmse);
}

fn spaces() -> [SubSpace; 3] {
    [SubSpace::ar50(), SubSpace::ar77(), SubSpace::ar101()]
}

#[test]
fn monotone_simulator_picks_the_heaviest_sample_under_a_cap() {
    for seed in 0..5 {
        let constraint = Constraint::flops_band(0.0, 100.0);
        let ev = Simulator::new(SimConfig::monotone(), seed);
        let cfg = SearchConfig {
            seed,
            ..SearchConfig::default()
        };
        let (winner, trace) = two_step_search(&spaces(), &constraint, &ev, &cfg).unwrap();
        let heaviest = trace
            .groups
            .iter()
            .flat_map(|g| g.samples.iter().map(|(a, _)| gflops(a)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(gflops(&winner), heaviest);
        assert!(heaviest < 100.0);
    }
}

#[test]
fn trace_respects_constraint_and_membership() {
    let constraint = Constraint {
        scale: Some((480, 640)),
        ..Constraint::flops_band(60.0, 90.0)
    };
    let ev = Simulator::new(SimConfig::default(), 3);
    let (winner, trace) = two_step_search(&spaces(), &constraint, &ev, &SearchConfig::default()).unwrap();
    let all = spaces();
    for g in &trace.groups {
        for (a, _) in &g.samples {
            assert!(constraint.satisfies(a));
            assert!(all[g.key.space].contains(a));
            assert_eq!(a.scale, g.key.scale);
            assert_eq!(a.total_depth(), g.key.total_depth);
        }
    }
    assert_eq!(trace.shortlist.len(), SearchConfig::default().shortlist_len(trace.groups.len()));
    assert!(trace.shortlist.iter().any(|s| s.arch == winner));
}

#[test]
fn search_is_deterministic_and_parallelism_free() {
    let constraint = Constraint::flops_band(75.0, 105.0);
    let run = |jobs| {
        let ev = Simulator::new(SimConfig::default(), 11);
        let cfg = SearchConfig {
            seed: 5,
            jobs,
            ..SearchConfig::default()
        };
        two_step_search(&spaces(), &constraint, &ev, &cfg).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(1));
    assert_eq!(one, run(4));
}
