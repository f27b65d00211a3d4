//! In-process logit server backed by a table model.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use dino_core::{LanguageModel, LmContext, TableLm, TokenId};
use serde_json::{json, Value};
use tiny_http::{Header, Method, Response, Server};

#[derive(Clone, Debug, Default)]
pub struct StubOptions {
    /// Answer this many log-probability requests with HTTP 503 first.
    pub fail_first: usize,
    /// Round log-probabilities to this many decimals.
    pub decimals: Option<i32>,
    pub wrong_id: bool,
    pub extra_entry: bool,
}

pub struct StubServer {
    pub url: String,
    pub logprob_requests: Arc<AtomicUsize>,
    server: Arc<Server>,
    thread: Option<JoinHandle<()>>,
}

fn respond(status: u16, body: Value) -> Response<std::io::Cursor<Vec<u8>>> {
    Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").unwrap())
}

fn handle(
    lm: &TableLm,
    opts: &StubOptions,
    count: &AtomicUsize,
    method: &Method,
    url: &str,
    body: &str,
) -> (u16, Value) {
    let req: Value = serde_json::from_str(body).unwrap_or(Value::Null);
    let ids = |v: &Value| -> Option<Vec<TokenId>> {
        v.as_array()?
            .iter()
            .map(|t| t.as_u64().map(|t| TokenId(t as u32)))
            .collect()
    };
    match (method, url) {
        (Method::Get, "/v1/model") => (
            200,
            json!({"vocab_size": lm.vocab_size(), "model_id": "stub-table"}),
        ),
        (Method::Post, "/v1/logprobs") => {
            let n = count.fetch_add(1, Ordering::SeqCst);
            if n < opts.fail_first {
                return (503, json!({"error": "warming up"}));
            }
            let Some(context) = ids(&req["context"]) else {
                return (400, json!({"error": "bad context"}));
            };
            let dist = match lm.next_token_distribution(&LmContext::new(context)) {
                Ok(d) => d,
                Err(e) => return (400, json!({"error": e.to_string()})),
            };
            let scale = opts.decimals.map(|d| 10f64.powi(d));
            let mut logprobs: Vec<Value> = dist
                .probs()
                .iter()
                .map(|&p| {
                    if p == 0.0 {
                        Value::Null
                    } else {
                        let lp = p.ln();
                        json!(scale.map_or(lp, |s| (lp * s).round() / s))
                    }
                })
                .collect();
            if opts.extra_entry {
                logprobs.push(json!(-1.0));
            }
            let id = if opts.wrong_id {
                json!("other")
            } else {
                req["request_id"].clone()
            };
            (200, json!({"logprobs": logprobs, "request_id": id}))
        }
        (Method::Post, "/v1/tokenize") => match req["text"].as_str() {
            Some(text) => (200, json!({"tokens": lm.tokenize(text).unwrap().ids})),
            None => (400, json!({"error": "missing text"})),
        },
        (Method::Post, "/v1/detokenize") => match ids(&req["tokens"]).map(|t| lm.decode(&t)) {
            Some(Ok(text)) => (200, json!({"text": text})),
            _ => (400, json!({"error": "bad tokens"})),
        },
        _ => (404, json!({"error": "not found"})),
    }
}

impl StubServer {
    pub fn start(lm: TableLm, opts: StubOptions) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").unwrap());
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let logprob_requests = Arc::new(AtomicUsize::new(0));
        let (srv, count) = (server.clone(), logprob_requests.clone());
        let thread = std::thread::spawn(move || {
            for mut request in srv.incoming_requests() {
                let mut body = String::new();
                let _ = request.as_reader().read_to_string(&mut body);
                let (status, value) =
                    handle(&lm, &opts, &count, request.method(), request.url(), &body);
                let _ = request.respond(respond(status, value));
            }
        });
        StubServer {
            url,
            logprob_requests,
            server,
            thread: Some(thread),
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
