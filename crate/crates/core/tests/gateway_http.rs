mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use citeqa::gateway::{
    BackendSpec, EmbeddingBackend, Gateway, GatewayError, GenerationBackend, HttpBackend, HttpOptions, ScoringBackend,
    Span, SpanBackend, Tier,
};
use citeqa::ErrorKind;
use common::TestServer;
use serde_json::json;

fn fast() -> HttpOptions {
    HttpOptions {
        timeout: Duration::from_secs(5),
        retries: 2,
        backoff: Duration::from_millis(5),
        max_in_flight: 4,
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Answers every endpoint the way a well-behaved shim would.
fn protocol_server() -> TestServer {
    TestServer::start(|req| {
        let body = req.json();
        let reply = match req.path.as_str() {
            "/embed" => {
                let n = body["texts"].as_array().unwrap().len();
                json!({ "vectors": (0..n).map(|i| vec![i as f64, 1.0]).collect::<Vec<_>>() })
            }
            "/score" => {
                let n = body["passages"].as_array().unwrap().len();
                let base = if body["tier"] == "cheap" { 0.0 } else { 10.0 };
                json!({ "scores": (0..n).map(|i| base + i as f64).collect::<Vec<_>>() })
            }
            "/spans" => json!({ "spans": [{ "start": 0, "end": 3 }, { "start": 5, "end": 9 }] }),
            "/generate" => json!({ "text": format!("echo {}", body["max_tokens"]) }),
            _ => return (404, json!({ "error": "no such endpoint" }).to_string()),
        };
        (200, reply.to_string())
    })
}

#[test]
fn request_and_response_shapes() {
    let server = protocol_server();
    let http = HttpBackend::new(&server.base, fast()).unwrap();

    let v = http.embed(&strings(&["a", "b", "c"])).unwrap();
    assert_eq!(v.len(), 3);
    assert_eq!(v[2].as_slice(), &[2.0, 1.0]);

    let s = http.score(Tier::Cheap, "q", &strings(&["x", "y"])).unwrap();
    assert_eq!(s, vec![0.0, 1.0]);
    let s = http.score(Tier::Expensive, "q", &strings(&["x"])).unwrap();
    assert_eq!(s, vec![10.0]);

    let spans = http.spans("q", "some document", 2).unwrap();
    assert_eq!(spans, vec![Span { start: 0, end: 3 }, Span { start: 5, end: 9 }]);

    assert_eq!(http.generate("prompt", 17).unwrap(), "echo 17");

    let reqs = server.requests.lock().unwrap().clone();
    assert!(reqs.iter().all(|r| r.method == "POST"));
    assert!(reqs.iter().all(|r| r
        .header("content-type")
        .is_some_and(|c| c.starts_with("application/json"))));
    let by_path = |p: &str| {
        reqs.iter()
            .filter(|r| r.path == p)
            .map(|r| r.json())
            .collect::<Vec<_>>()
    };
    assert_eq!(by_path("/embed")[0], json!({ "texts": ["a", "b", "c"] }));
    assert_eq!(
        by_path("/score")[0],
        json!({ "tier": "cheap", "query": "q", "passages": ["x", "y"] })
    );
    assert_eq!(by_path("/score")[1]["tier"], "expensive");
    assert_eq!(
        by_path("/spans")[0],
        json!({ "query": "q", "document": "some document", "max_spans": 2 })
    );
    assert_eq!(by_path("/generate")[0], json!({ "prompt": "prompt", "max_tokens": 17 }));
}

#[test]
fn gateway_from_specs_routes_to_http_and_counts() {
    let server = protocol_server();
    let http = BackendSpec::Http(server.base.clone());
    let gw = Gateway::from_specs(&http, &http, &http, &BackendSpec::Mock, &fast()).unwrap();
    gw.embed(&strings(&["a"])).unwrap();
    gw.score_pair(Tier::Cheap, "q", &strings(&["p"])).unwrap();
    // out-of-range span from the server is dropped by the gateway
    let spans = gw.extract_spans("q", "short doc", 5).unwrap();
    assert_eq!(spans, vec![Span { start: 0, end: 3 }, Span { start: 5, end: 9 }]);
    let spans = gw.extract_spans("q", "tiny", 5).unwrap();
    assert_eq!(spans, vec![Span { start: 0, end: 3 }]);
    gw.generate("local mock", 8).unwrap();
    assert_eq!(server.hits(), 4);
    let snap = gw.ledger().snapshot();
    assert_eq!((snap.embed.calls, snap.score.calls, snap.spans.calls), (1, 1, 2));
    assert_eq!(snap.llm_calls, 1);
}

fn flaky(fail_first: usize, status: u16) -> (TestServer, Arc<AtomicUsize>) {
    let seen = Arc::new(AtomicUsize::new(0));
    let s = seen.clone();
    let server = TestServer::start(move |_| {
        if s.fetch_add(1, Ordering::SeqCst) < fail_first {
            (status, json!({ "error": "overloaded" }).to_string())
        } else {
            (200, json!({ "text": "fine" }).to_string())
        }
    });
    (server, seen)
}

#[test]
fn server_errors_are_retried() {
    let (server, _) = flaky(2, 503);
    let http = HttpBackend::new(&server.base, fast()).unwrap();
    assert_eq!(http.generate("p", 4).unwrap(), "fine");
    assert_eq!(server.hits(), 3);
}

#[test]
fn persistent_server_error_gives_up_after_retries() {
    let (server, _) = flaky(usize::MAX, 500);
    let http = HttpBackend::new(&server.base, fast()).unwrap();
    match http.generate("p", 4).unwrap_err() {
        GatewayError::Status {
            status,
            retries,
            message,
            ..
        } => {
            assert_eq!((status, retries), (500, 2));
            assert_eq!(message, "overloaded");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.hits(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (server, _) = flaky(usize::MAX, 422);
    let http = HttpBackend::new(&server.base, fast()).unwrap();
    let err = http.generate("p", 4).unwrap_err();
    assert!(matches!(
        err,
        GatewayError::Status {
            status: 422,
            retries: 0,
            ..
        }
    ));
    assert_eq!(err.kind(), ErrorKind::Backend);
    assert_eq!(server.hits(), 1);
}

#[test]
fn malformed_body_is_protocol_error() {
    let server = TestServer::start(|req| match req.path.as_str() {
        "/embed" => (200, json!({ "vectors": [[1.0, 2.0], [1.0]] }).to_string()),
        "/score" => (200, json!({ "scores": [0.5] }).to_string()),
        _ => (200, "{not json".to_string()),
    });
    let http = Arc::new(HttpBackend::new(&server.base, fast()).unwrap());
    assert!(matches!(http.generate("p", 4), Err(GatewayError::Protocol { .. })));
    assert!(matches!(
        http.embed(&strings(&["a", "b"])),
        Err(GatewayError::Protocol { .. })
    ));
    // a length mismatch is caught by the gateway wrapper
    let gw = Gateway::mock().with_scorer(http);
    let err = gw.score_pair(Tier::Cheap, "q", &strings(&["a", "b"])).unwrap_err();
    assert!(matches!(err, GatewayError::Protocol { .. }));
    assert_eq!(gw.ledger().snapshot().score.failures, 1);
}

#[test]
fn refused_connection_is_network_error() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let http = HttpBackend::new(&format!("http://127.0.0.1:{port}/"), fast()).unwrap();
    let err = http.embed(&strings(&["a"])).unwrap_err();
    assert!(matches!(err, GatewayError::Transport { retries: 2, .. }), "{err:?}");
    assert_eq!(err.kind(), ErrorKind::Network);
}

#[test]
fn base_path_is_preserved() {
    let server = TestServer::start(|_| (200, json!({ "text": "ok" }).to_string()));
    let http = HttpBackend::new(&server.url("/models/v1"), fast()).unwrap();
    http.generate("p", 1).unwrap();
    assert_eq!(server.requests.lock().unwrap()[0].path, "/models/v1/generate");
    assert!(HttpBackend::new("not a url", fast()).is_err());
}

/// Runs the gateway contract against a live shim when one is configured.
#[test]
fn live_shim_when_configured() {
    let Ok(url) = std::env::var("CITEQA_SHIM_URL") else {
        return;
    };
    let spec = BackendSpec::Http(url);
    let gw = Gateway::from_specs(&spec, &spec, &spec, &BackendSpec::Mock, &HttpOptions::default()).unwrap();
    let v = gw.embed(&strings(&["a", "a"])).unwrap();
    assert!((v[0].cosine(&v[1]) - 1.0).abs() < 1e-6);
    let s = gw
        .score_pair(
            Tier::Expensive,
            "who built it",
            &strings(&["it was built by the Balyan family", "bananas"]),
        )
        .unwrap();
    assert_eq!(s.len(), 2);
    let doc = "The mansion was built by the Balyan family.";
    for sp in gw.extract_spans("who built the mansion", doc, 3).unwrap() {
        assert!(sp.start < sp.end && sp.end <= doc.chars().count());
    }
}
