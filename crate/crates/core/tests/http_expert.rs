//! The HTTP expert against a throwaway local server, plus golden prompts.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use nlpscm::expert::{
    ChatMessage, ChatRequest, ChatTransport, ConfounderAnswer, Expert, HttpExpert, PromptTemplates, QueryContext, UreqTransport,
};
use nlpscm::sem::fixture;
use nlpscm::{EdgeCategory, Error};

struct Captured {
    auth: Option<String>,
    body: String,
}

/// Serve one canned `(status, content)` per connection, in order, and report
/// what each request carried.
fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, content) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut len, mut auth) = (0usize, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    match k.to_ascii_lowercase().as_str() {
                        "content-length" => len = v.trim().parse().unwrap(),
                        "authorization" => auth = Some(v.trim().to_string()),
                        _ => {}
                    }
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            tx.send(Captured { auth, body: String::from_utf8(body).unwrap() }).unwrap();
            let payload = serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] }).to_string();
            let mut s = stream;
            write!(
                s,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
        }
    });
    (url, rx)
}

fn request() -> ChatRequest {
    ChatRequest {
        model: "m".into(),
        temperature: 0.5,
        messages: vec![ChatMessage { role: "user".into(), content: "hi".into() }],
    }
}

#[test]
fn transport_sends_key_and_reads_content() {
    let (url, rx) = serve(vec![(200, "hello".into())]);
    let t = UreqTransport::new(&url, Some("secret".into()), Duration::from_secs(5));
    assert_eq!(t.complete(&request()).unwrap(), "hello");
    let got = rx.recv().unwrap();
    assert_eq!(got.auth.as_deref(), Some("Bearer secret"));
    let body: serde_json::Value = serde_json::from_str(&got.body).unwrap();
    assert_eq!(body["model"], "m");
    assert_eq!(body["messages"][0]["content"], "hi");
}

#[test]
fn status_codes_map_to_errors() {
    let (url, _rx) = serve(vec![(401, String::new()), (500, String::new())]);
    let t = UreqTransport::new(&url, None, Duration::from_secs(5));
    assert!(matches!(t.complete(&request()), Err(Error::ExpertAuth(_))));
    assert!(matches!(t.complete(&request()), Err(Error::Expert(_))));
}

fn wine_expert(url: &str, retries: u32) -> HttpExpert {
    let f = fixture("wine_synth").unwrap();
    HttpExpert::new(
        Box::new(UreqTransport::new(url, Some("k".into()), Duration::from_secs(5))),
        PromptTemplates::default(),
        &f.experiment_name,
        f.spec.dag.observed_names(),
        f.descriptions.clone(),
        "gpt-test",
        1.0,
        retries,
    )
}

#[test]
fn expert_retries_then_parses() {
    let (url, rx) = serve(vec![
        (500, String::new()),
        (200, "Sure. {\"option\": 1, \"reason\": \"sugar raises density\"}".into()),
        (200, "{\"confounder\": \"alcohol content\"}".into()),
        (200, "{\"mean\": 11.2, \"variance\": 1.1, \"correlation\": {\"Density\": -0.4, \"Quality\": 0.5}}".into()),
    ]);
    let mut e = wine_expert(&url, 1);
    let ans = e.query_edge(0, 1, &QueryContext::default()).unwrap();
    assert_eq!(ans.category, EdgeCategory::Directed);
    assert!(matches!(e.query_confounder(1, 4).unwrap(), ConfounderAnswer::Named(_)));
    let prior = e.query_prior("alcohol content", &[1, 4]).unwrap();
    assert!((prior.mean - 11.2).abs() < 1e-12);
    // served from the cached prior reply, no fifth request
    let rho = e.query_correlation("alcohol content", &[1, 4]).unwrap();
    assert_eq!(rho, BTreeMap::from([("Density".to_string(), -0.4), ("Quality".to_string(), 0.5)]));
    assert_eq!(rx.iter().count(), 4);
}

#[test]
fn auth_failure_is_not_retried() {
    let (url, rx) = serve(vec![(403, String::new())]);
    let mut e = wine_expert(&url, 5);
    assert!(matches!(e.query_edge(0, 1, &QueryContext::default()), Err(Error::ExpertAuth(_))));
    assert_eq!(rx.iter().count(), 1);
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn flatten(r: &ChatRequest) -> String {
    r.messages.iter().map(|m| format!("[{}]\n{}\n", m.role, m.content)).collect()
}

/// Set `UPDATE_GOLDEN=1` to rewrite the files after an intended change.
#[test]
fn prompts_match_golden_files() {
    let e = wine_expert("http://127.0.0.1:9/unused", 0);
    let ctx = QueryContext { known: vec!["ResidualSugar -> TotalSulfurDioxide".into()] };
    let cases = [
        ("edge.txt", e.edge_request(0, 1, &ctx).unwrap()),
        ("confounder.txt", e.confounder_request(1, 4).unwrap()),
        ("prior.txt", e.prior_request("alcohol_content", &[1, 4]).unwrap()),
    ];
    for (file, req) in cases {
        let got = flatten(&req);
        let path = golden_path(file);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &got).unwrap();
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
        assert_eq!(got, want, "{file} drifted");
    }
}
