//! The HTTP agent against a local one-shot server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use choicekit_core::choice::{ChoiceProblem, Gamble};
use choicekit_gateway::agent::{Agent, AgentError, Payload, Query};
use choicekit_gateway::http::{AgentConfig, HttpAgent};
use choicekit_gateway::prompt::Task;

/// Serves each canned `(status, body)` once, in order, and forwards the
/// received request bodies and auth headers.
fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, Option<String>)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            tx.send((String::from_utf8(buf).unwrap(), auth)).unwrap();
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (addr, rx)
}

fn query(n: usize) -> Query {
    let shown = ChoiceProblem::new("p", Gamble::certain(1.0), Gamble::certain(2.0));
    Query::new("Which machine?", Payload::Forward { task: Task::PredictIndividual, shown }, n, 0)
}

fn cfg(base_url: String, key_env: Option<&str>) -> AgentConfig {
    AgentConfig {
        base_url,
        model: "test-model".into(),
        timeout_secs: 5,
        retries: 2,
        retry_backoff_ms: 0,
        api_key_env: key_env.map(str::to_string),
        ..Default::default()
    }
}

#[test]
fn sends_chat_request_and_reads_choices() {
    let reply = r#"{"choices":[{"message":{"role":"assistant","content":"A"}},{"message":{"content":"Machine B"}}]}"#;
    let (url, rx) = serve(vec![(200, reply.into())]);
    std::env::set_var("CHOICEKIT_TEST_KEY", "sekret");
    let agent = HttpAgent::new(cfg(url, Some("CHOICEKIT_TEST_KEY")));
    let out = agent.complete(&query(2)).unwrap();
    assert_eq!(out, vec!["A".to_string(), "Machine B".to_string()]);
    let (body, auth) = rx.recv().unwrap();
    let json: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(json["model"], "test-model");
    assert_eq!(json["n"], 2);
    assert_eq!(json["messages"][0]["content"], "Which machine?");
    assert_eq!(auth.as_deref(), Some("Bearer sekret"));
}

#[test]
fn retries_transient_failures() {
    let ok = r#"{"choices":[{"message":{"content":"B"}}]}"#;
    let (url, rx) = serve(vec![(503, "busy".into()), (200, ok.into())]);
    let agent = HttpAgent::new(cfg(url, None));
    assert_eq!(agent.complete(&query(1)).unwrap(), vec!["B".to_string()]);
    assert_eq!(rx.iter().take(2).count(), 2);
}

#[test]
fn distinguishes_auth_and_malformed_replies() {
    let (url, _rx) = serve(vec![(401, "{}".into())]);
    assert_eq!(HttpAgent::new(cfg(url, None)).complete(&query(1)), Err(AgentError::Auth(401)));

    let (url, _rx) = serve(vec![(200, "not json".into())]);
    assert!(matches!(
        HttpAgent::new(cfg(url, None)).complete(&query(1)),
        Err(AgentError::Malformed(_))
    ));

    let (url, _rx) = serve(vec![(200, r#"{"choices":[]}"#.into())]);
    assert!(matches!(
        HttpAgent::new(cfg(url, None)).complete(&query(1)),
        Err(AgentError::Malformed(_))
    ));
}

#[test]
fn missing_key_is_reported() {
    let agent = HttpAgent::new(cfg("http://127.0.0.1:9".into(), Some("CHOICEKIT_SURELY_UNSET_VAR")));
    assert_eq!(
        agent.complete(&query(1)),
        Err(AgentError::MissingKey("CHOICEKIT_SURELY_UNSET_VAR".into()))
    );
}

#[test]
fn times_out() {
    // accepts but never answers
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hold = thread::spawn(move || {
        let conns: Vec<_> = listener.incoming().take(1).collect();
        thread::sleep(std::time::Duration::from_secs(3));
        drop(conns);
    });
    let agent = HttpAgent::new(AgentConfig {
        timeout_secs: 1,
        retries: 0,
        ..cfg(url, None)
    });
    assert_eq!(agent.complete(&query(1)), Err(AgentError::Timeout));
    hold.join().unwrap();
}
