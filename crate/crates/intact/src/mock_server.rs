//! Reference mock model server: an OpenAI-compatible HTTP facade over
//! the deterministic mock backends, so the full HTTP path can run
//! offline. Serves `/v1/chat/completions` and `/v1/embeddings` in the
//! usual wire shapes, plus the project's minimal `/v1/mask_score`
//! endpoint (`POST {text, positions, candidates}` returning
//! `{probabilities}`).

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use intact_core::gateway::mock::{ConfiguredScorer, HashEmbedder};
use intact_core::gateway::{ChatMessage, EmbedRequest, Embedder, MaskScoreRequest, MaskScorer, Role};

use crate::backend::reference_chat_reply;

pub struct MockModelServer {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

#[derive(Deserialize)]
struct InMessage {
    role: String,
    content: String,
}

#[derive(Deserialize)]
struct InChat {
    #[serde(default)]
    model: String,
    messages: Vec<InMessage>,
}

#[derive(Deserialize)]
struct InEmbed {
    #[serde(default)]
    model: String,
    input: Vec<String>,
}

#[derive(Serialize)]
struct OutProbabilities {
    probabilities: Vec<f64>,
}

impl MockModelServer {
    /// Binds and starts serving; use port 0 for an ephemeral port.
    pub fn start(bind: &str, seed: u64, embed_dim: usize) -> Result<MockModelServer> {
        let server = tiny_http::Server::http(bind)
            .map_err(|e| anyhow!("cannot bind mock server on {bind}: {e}"))?;
        let addr = server
            .server_addr()
            .to_ip()
            .context("mock server bound to a non-IP address")?;
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let embedder = HashEmbedder::new(seed, embed_dim);
        let scorer = ConfiguredScorer::new();
        let handle = std::thread::spawn(move || {
            while !stop_flag.load(Ordering::Relaxed) {
                match server.recv_timeout(Duration::from_millis(25)) {
                    Ok(Some(request)) => handle_request(request, seed, &embedder, &scorer),
                    Ok(None) => {}
                    Err(_) => break,
                }
            }
        });
        Ok(MockModelServer { addr, stop, handle: Some(handle) })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for MockModelServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_request(
    mut request: tiny_http::Request,
    seed: u64,
    embedder: &HashEmbedder,
    scorer: &ConfiguredScorer,
) {
    let mut body = String::new();
    if request.as_reader().read_to_string(&mut body).is_err() {
        respond(request, 400, json!({"error": "unreadable body"}));
        return;
    }
    let url = request.url().to_string();
    match url.as_str() {
        "/health" => respond(request, 200, json!({"status": "ok"})),
        "/v1/chat/completions" => match serde_json::from_str::<InChat>(&body) {
            Ok(chat) => {
                let messages: Vec<ChatMessage> = chat
                    .messages
                    .iter()
                    .map(|m| ChatMessage {
                        role: match m.role.as_str() {
                            "system" => Role::System,
                            "assistant" => Role::Assistant,
                            _ => Role::User,
                        },
                        content: m.content.clone(),
                    })
                    .collect();
                let reply = reference_chat_reply(&messages, seed);
                respond(
                    request,
                    200,
                    json!({
                        "id": "mock-chat",
                        "object": "chat.completion",
                        "model": chat.model,
                        "choices": [{
                            "index": 0,
                            "message": {"role": "assistant", "content": reply},
                            "finish_reason": "stop"
                        }]
                    }),
                );
            }
            Err(e) => respond(request, 400, json!({"error": e.to_string()})),
        },
        "/v1/embeddings" => match serde_json::from_str::<InEmbed>(&body) {
            Ok(embed) => {
                let req = EmbedRequest { model_id: embed.model, texts: embed.input };
                match embedder.embed(&req) {
                    Ok(out) => {
                        let data: Vec<_> = out
                            .vectors
                            .iter()
                            .enumerate()
                            .map(|(index, embedding)| {
                                json!({"object": "embedding", "index": index, "embedding": embedding})
                            })
                            .collect();
                        respond(request, 200, json!({"object": "list", "data": data}));
                    }
                    Err(e) => respond(request, 500, json!({"error": e.to_string()})),
                }
            }
            Err(e) => respond(request, 400, json!({"error": e.to_string()})),
        },
        "/v1/mask_score" => match serde_json::from_str::<MaskScoreRequest>(&body) {
            Ok(req) => match scorer.mask_score(&req) {
                Ok(out) => {
                    respond(request, 200, json!(OutProbabilities { probabilities: out.probabilities }))
                }
                Err(e) => respond(request, 400, json!({"error": e.to_string()})),
            },
            Err(e) => respond(request, 400, json!({"error": e.to_string()})),
        },
        _ => respond(request, 404, json!({"error": format!("no route {url}")})),
    }
}

fn respond(request: tiny_http::Request, status: u16, body: serde_json::Value) {
    let payload = body.to_string();
    let response = tiny_http::Response::from_string(payload).with_status_code(status).with_header(
        tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
            .expect("static header"),
    );
    let _ = request.respond(response);
}
