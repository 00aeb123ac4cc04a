//! Instrumented stand-in for a remote text-to-image server.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use base64::Engine;
use semaug::{mock_generate, GenerationRequest};

#[derive(Debug, Clone, Default)]
pub struct Behavior {
    pub latency: Duration,
    /// The first `fail_first` calls answer 500.
    pub fail_first: usize,
    /// Prompts containing this string always answer 500.
    pub poison: Option<String>,
    /// Answer with a 256×256 image regardless of the request.
    pub wrong_size: bool,
}

#[derive(Default)]
pub struct StubState {
    pub behavior: Behavior,
    pub calls: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub peak_in_flight: AtomicUsize,
    pub arrivals: Mutex<Vec<Instant>>,
}

pub struct Stub {
    pub url: String,
    pub state: Arc<StubState>,
}

impl Stub {
    pub fn peak(&self) -> usize {
        self.state.peak_in_flight.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> usize {
        self.state.calls.load(Ordering::SeqCst)
    }

    pub fn arrivals(&self) -> Vec<Instant> {
        self.state.arrivals.lock().unwrap().clone()
    }
}

pub async fn spawn(behavior: Behavior) -> Stub {
    let state = Arc::new(StubState {
        behavior,
        ..Default::default()
    });
    let app = Router::new()
        .route("/generate", post(handle))
        .with_state(state.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Stub { url, state }
}

async fn handle(
    State(state): State<Arc<StubState>>,
    Json(req): Json<GenerationRequest>,
) -> Response {
    let call = state.calls.fetch_add(1, Ordering::SeqCst);
    state.arrivals.lock().unwrap().push(Instant::now());
    let now = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    state.peak_in_flight.fetch_max(now, Ordering::SeqCst);

    tokio::time::sleep(state.behavior.latency).await;

    let poisoned = state
        .behavior
        .poison
        .as_deref()
        .is_some_and(|p| req.prompt.contains(p));
    let response = if call < state.behavior.fail_first || poisoned {
        (StatusCode::INTERNAL_SERVER_ERROR, "backend exploded").into_response()
    } else {
        let mut render = req.clone();
        if state.behavior.wrong_size {
            render.width = 256;
            render.height = 256;
        }
        let png = mock_generate(&render).image;
        let body = serde_json::json!({
            "image_base64": base64::engine::general_purpose::STANDARD.encode(png)
        });
        Json(body).into_response()
    };

    state.in_flight.fetch_sub(1, Ordering::SeqCst);
    response
}
