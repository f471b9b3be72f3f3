mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use common::*;
use idxtune::advisor::{request_recommendations, HttpAdvisor, InvocationErrorKind};
use idxtune::prompt::{build_multi_query_prompt, PromptTemplates};
use serde_json::{json, Value};

struct Captured {
    authorization: Option<String>,
    body: Value,
}

/// Serves every connection with `status` and a `{"text": reply}` body.
fn serve(status: u16, reply: &'static str) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/complete", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let log = Arc::clone(&log);
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0;
                let mut authorization = None;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    if let Some((name, value)) = line.split_once(':') {
                        match name.to_ascii_lowercase().as_str() {
                            "content-length" => length = value.trim().parse().unwrap(),
                            "authorization" => authorization = Some(value.trim().to_string()),
                            _ => {}
                        }
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                log.lock().unwrap().push(Captured {
                    authorization,
                    body: serde_json::from_slice(&body).unwrap_or(Value::Null),
                });
                let payload = json!({ "text": reply }).to_string();
                let response = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                stream.write_all(response.as_bytes()).unwrap();
            });
        }
    });
    (url, seen)
}

const REPLY: &str = "Use a date index.\n[{\"table\": \"orders\", \"key_columns\": [\"o_orderdate\"], \"included_columns\": [\"o_orderkey\"]}]";

#[test]
fn posts_prompt_with_bearer_key_and_parses_reply() {
    let catalog = tpch_catalog();
    let queries = tpch_queries(&catalog);
    let prompt = build_multi_query_prompt(&PromptTemplates::default(), &queries, &catalog, 5).unwrap();
    let (url, seen) = serve(200, REPLY);
    let service = HttpAdvisor::new(url, Some("sekret".into()));
    let responses = request_recommendations(&service, &prompt, 3, &catalog).unwrap();

    assert_eq!(responses.iter().map(|r| r.invocation_id).collect::<Vec<_>>(), [1, 2, 3]);
    for r in &responses {
        assert!(r.is_ok(), "{:?}", r.error);
        assert_eq!(r.parsed.len(), 1);
        assert_eq!(r.parsed[0].table.as_str(), "orders");
        assert_eq!(r.rationale.as_deref(), Some("Use a date index."));
    }
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    for c in seen.iter() {
        assert_eq!(c.authorization.as_deref(), Some("Bearer sekret"));
        assert_eq!(c.body["prompt"].as_str(), Some(prompt.text.as_str()));
    }
}

#[test]
fn server_error_is_a_transport_failure() {
    let catalog = tpch_catalog();
    let queries = tpch_queries(&catalog);
    let prompt = build_multi_query_prompt(&PromptTemplates::default(), &queries[..1], &catalog, 5).unwrap();
    let (url, _) = serve(503, "busy");
    let responses = request_recommendations(&HttpAdvisor::new(url, None), &prompt, 2, &catalog).unwrap();
    for r in responses {
        assert_eq!(r.error.unwrap().kind, InvocationErrorKind::Transport);
        assert!(r.parsed.is_empty());
    }
}

#[test]
fn refused_connection_is_a_transport_failure() {
    let catalog = tpch_catalog();
    let queries = tpch_queries(&catalog);
    let prompt = build_multi_query_prompt(&PromptTemplates::default(), &queries[..1], &catalog, 5).unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let service = HttpAdvisor::new(format!("http://127.0.0.1:{port}/"), None);
    let r = &request_recommendations(&service, &prompt, 1, &catalog).unwrap()[0];
    assert_eq!(r.error.as_ref().unwrap().kind, InvocationErrorKind::Transport);
}
