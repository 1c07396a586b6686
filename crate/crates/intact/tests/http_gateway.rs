//! HTTP gateway contract tests against scripted local servers: retry on
//! transient failures, fail-fast on client errors, give up after the
//! configured attempts, and pass prompt text through byte-identically.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use intact::backend::build_backends;
use intact::config::AppConfig;
use intact_core::gateway::{ChatMessage, ChatRequest, GatewayError};

/// A tiny scripted HTTP server: pops one (status, body) per request and
/// records received bodies.
struct ScriptedServer {
    addr: std::net::SocketAddr,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<String>>>,
    stop: Arc<std::sync::atomic::AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl ScriptedServer {
    fn start(script: Vec<(u16, String)>) -> ScriptedServer {
        let server = tiny_http::Server::http("127.0.0.1:0").expect("bind");
        let addr = server.server_addr().to_ip().expect("ip");
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(std::sync::atomic::AtomicBool::new(false));
        let script = Arc::new(Mutex::new(script));
        let (hits2, bodies2, stop2) = (Arc::clone(&hits), Arc::clone(&bodies), Arc::clone(&stop));
        let handle = std::thread::spawn(move || {
            while !stop2.load(Ordering::Relaxed) {
                match server.recv_timeout(Duration::from_millis(20)) {
                    Ok(Some(mut request)) => {
                        let mut body = String::new();
                        let _ = request.as_reader().read_to_string(&mut body);
                        bodies2.lock().unwrap().push(body);
                        let step = hits2.fetch_add(1, Ordering::Relaxed);
                        let (status, payload) = {
                            let script = script.lock().unwrap();
                            script
                                .get(step.min(script.len().saturating_sub(1)))
                                .cloned()
                                .unwrap_or((500, String::from("{}")))
                        };
                        let response = tiny_http::Response::from_string(payload)
                            .with_status_code(status)
                            .with_header(
                                tiny_http::Header::from_bytes(
                                    &b"Content-Type"[..],
                                    &b"application/json"[..],
                                )
                                .unwrap(),
                            );
                        let _ = request.respond(response);
                    }
                    Ok(None) => {}
                    Err(_) => break,
                }
            }
        });
        ScriptedServer { addr, hits, bodies, stop, handle: Some(handle) }
    }

    fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }
}

impl Drop for ScriptedServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn chat_config(url: &str) -> AppConfig {
    let mut cfg = AppConfig::default();
    cfg.gateway.backend = "http".into();
    cfg.gateway.chat_url = url.to_string();
    cfg.gateway.embed_url = "http://127.0.0.1:1/unused".into();
    cfg.gateway.score_url = "http://127.0.0.1:1/unused".into();
    cfg.gateway.backoff_ms = 5;
    cfg
}

fn chat_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}

fn request(content: &str) -> ChatRequest {
    ChatRequest::new("model-x", vec![ChatMessage::user(content)], 0.3, 128).unwrap()
}

#[test]
fn recovers_after_two_server_errors() {
    let server = ScriptedServer::start(vec![
        (503, String::from("{}")),
        (503, String::from("{}")),
        (200, chat_body("- recovered")),
    ]);
    let backends = build_backends(&chat_config(&server.url())).unwrap();
    let reply = backends.chat.chat(&request("hello")).unwrap();
    assert_eq!(reply, "- recovered");
    assert_eq!(server.hits.load(Ordering::Relaxed), 3);
}

#[test]
fn gives_up_after_three_failed_attempts() {
    let server = ScriptedServer::start(vec![(503, String::from("{}"))]);
    let backends = build_backends(&chat_config(&server.url())).unwrap();
    let err = backends.chat.chat(&request("hello")).unwrap_err();
    assert!(matches!(err, GatewayError::Unavailable { .. }), "{err}");
    // retries = 2 means three attempts in total.
    assert_eq!(server.hits.load(Ordering::Relaxed), 3);
}

#[test]
fn client_errors_fail_fast() {
    let server = ScriptedServer::start(vec![(400, String::from("{\"error\":\"bad\"}"))]);
    let backends = build_backends(&chat_config(&server.url())).unwrap();
    let err = backends.chat.chat(&request("hello")).unwrap_err();
    assert!(matches!(err, GatewayError::InvalidRequest { .. }), "{err}");
    assert_eq!(server.hits.load(Ordering::Relaxed), 1);
}

#[test]
fn connection_refused_is_unavailable() {
    // Nothing listens on port 9; errors must surface as Unavailable, not
    // panic.
    let mut cfg = chat_config("http://127.0.0.1:9/v1/chat/completions");
    cfg.gateway.retries = 0;
    let backends = build_backends(&cfg).unwrap();
    let err = backends.chat.chat(&request("hello")).unwrap_err();
    assert!(matches!(err, GatewayError::Unavailable { .. }), "{err}");
}

#[test]
fn prompt_text_passes_through_byte_identical() {
    let server = ScriptedServer::start(vec![(200, chat_body("- ok"))]);
    let backends = build_backends(&chat_config(&server.url())).unwrap();
    // Content with quotes, unicode, newlines and brackets.
    let content = "Line one\n\n\"quoted\" – [[bracketed]] € tokens:";
    backends.chat.chat(&request(content)).unwrap();

    let bodies = server.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 1);
    let sent: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(sent["messages"][0]["role"], "user");
    assert_eq!(sent["messages"][0]["content"], content);
    assert_eq!(sent["model"], "model-x");
    assert_eq!(sent["max_tokens"], 128);
}
