use std::path::PathBuf;

use gaia_core::archspace::{Architecture, SubSpace};
use gaia_core::evaluator::{
    evaluate_batch, CachedEvaluator, EvalCache, EvalError, EvalRequest, Evaluator, ExecEvaluator, Fidelity, Provenance,
};

fn endpoint(mode: &str) -> String {
    let script: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", "echo_endpoint.py"].iter().collect();
    format!("python3 {} {mode}", script.display())
}

/// Same formula as the fixture's metric.
fn expected(a: &Architecture, f: Fidelity) -> f64 {
    let bonus = match f {
        Fidelity::Direct => 0.0,
        Fidelity::FastFinetune => 0.5,
        Fidelity::FullSchedule => 1.0,
    };
    f64::from(a.total_depth()) + f64::from(a.widths.iter().sum::<u32>()) / 1000.0 + f64::from(a.scale) / 100.0 + bonus
}

fn req(id: &str, f: Fidelity) -> EvalRequest {
    EvalRequest::new(id, SubSpace::ar50().anchor, f, "coco")
}

#[test]
fn round_trips_every_fidelity() {
    let ev = ExecEvaluator::spawn(&endpoint("normal"), 1).unwrap();
    for (i, f) in Fidelity::ALL.into_iter().enumerate() {
        let r = ev.evaluate(&req(&format!("r{i}"), f)).unwrap();
        assert_eq!(r.id, format!("r{i}"));
        assert_eq!(r.metric, expected(&SubSpace::ar50().anchor, f));
        assert_eq!(r.metric_name, "AP");
        assert_eq!(r.cost_s, 0.25);
        assert_eq!(r.provenance, Provenance::External);
    }
}

#[test]
fn parallel_batch_keeps_request_order() {
    let ev = ExecEvaluator::spawn(&endpoint("normal"), 3).unwrap();
    let archs: Vec<Architecture> = SubSpace::ar77().enumerate(u64::MAX).unwrap().step_by(4099).take(12).collect();
    let reqs: Vec<_> = archs
        .iter()
        .enumerate()
        .map(|(i, a)| EvalRequest::new(format!("b{i}"), *a, Fidelity::FastFinetune, "coco"))
        .collect();
    let out = evaluate_batch(&ev, &reqs, 3).unwrap();
    for ((r, q), a) in out.iter().zip(&reqs).zip(&archs) {
        assert_eq!(r.id, q.id);
        assert_eq!(r.metric, expected(a, Fidelity::FastFinetune));
    }
}

#[test]
fn mismatched_id_is_a_protocol_error() {
    let ev = ExecEvaluator::spawn(&endpoint("mismatch"), 1).unwrap();
    assert!(matches!(ev.evaluate(&req("a", Fidelity::Direct)), Err(EvalError::ProtocolError(_))));
}

#[test]
fn one_malformed_line_is_tolerated_two_are_not() {
    let ev = ExecEvaluator::spawn(&endpoint("malformed-once"), 1).unwrap();
    let r = ev.evaluate(&req("m", Fidelity::FullSchedule)).unwrap();
    assert_eq!(r.metric, expected(&SubSpace::ar50().anchor, Fidelity::FullSchedule));

    let ev = ExecEvaluator::spawn(&endpoint("malformed-twice"), 1).unwrap();
    assert!(matches!(ev.evaluate(&req("m", Fidelity::Direct)), Err(EvalError::ProtocolError(_))));
}

#[test]
fn remote_errors_and_dead_endpoints() {
    let ev = ExecEvaluator::spawn(&endpoint("remote-error"), 1).unwrap();
    match ev.evaluate(&req("e", Fidelity::Direct)) {
        Err(EvalError::RemoteError(msg)) => assert_eq!(msg, "unknown task coco"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        ExecEvaluator::spawn(&endpoint("bad-handshake"), 1),
        Err(EvalError::ProtocolError(_))
    ));
    let ev = ExecEvaluator::spawn(&endpoint("die"), 1).unwrap();
    assert!(matches!(ev.evaluate(&req("d", Fidelity::Direct)), Err(EvalError::EndpointDown(_))));
    assert!(matches!(ExecEvaluator::spawn("exit 0", 1), Err(EvalError::EndpointDown(_))));
}

#[test]
fn cache_serves_repeat_requests_without_the_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.tsv");
    let first = {
        let ev = CachedEvaluator::new(ExecEvaluator::spawn(&endpoint("normal"), 1).unwrap(), EvalCache::open(&path).unwrap());
        ev.evaluate(&req("c", Fidelity::FastFinetune)).unwrap()
    };
    // an endpoint that fails every request proves the hit never reaches it
    let ev = CachedEvaluator::new(ExecEvaluator::spawn(&endpoint("die"), 1).unwrap(), EvalCache::open(&path).unwrap());
    let again = ev.evaluate(&req("c2", Fidelity::FastFinetune)).unwrap();
    assert_eq!(again.metric, first.metric);
    assert_eq!(again.id, "c2");
    assert_eq!(again.provenance, Provenance::Cached);
}
