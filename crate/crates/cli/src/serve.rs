//! Websocket service. A simulation thread advances the session in real time
//! and publishes one frame per display tick; each connection receives the
//! frames and its own command replies.

use std::io::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::Result;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use palpation_core::harness::session::MAX_FRAME_RATE;
use palpation_core::harness::{RunConfig, ServerMessage, SessionHost};
use palpation_core::phantom::PhantomModel;
use tokio::sync::{broadcast, mpsc};

struct Shared {
    host: Mutex<SessionHost>,
    frames: broadcast::Sender<String>,
}

fn encode(m: &ServerMessage) -> String {
    serde_json::to_string(m).expect("server messages serialize")
}

/// Advances the host in real time, one display tick at a time.
fn sim_loop(shared: Arc<Shared>, ticks_per_frame: usize, stop: Arc<AtomicBool>) {
    let period = Duration::from_secs_f64(1.0 / MAX_FRAME_RATE);
    let mut next = Instant::now() + period;
    while !stop.load(Ordering::Relaxed) {
        let out = {
            let mut host = shared.host.lock().expect("host lock poisoned");
            let mut out = Vec::new();
            match host.advance(ticks_per_frame) {
                Ok(Some(record)) => out.push(ServerMessage::TrialComplete { record }),
                Ok(None) => {}
                Err(e) => out.push(ServerMessage::Error {
                    seq: None,
                    message: e.to_string(),
                }),
            }
            if let Some(f) = host.frame() {
                out.push(ServerMessage::State(Box::new(f)));
            }
            out
        };
        for m in &out {
            // no subscribers is not an error
            let _ = shared.frames.send(encode(m));
        }
        let now = Instant::now();
        if next > now {
            thread::sleep(next - now);
        }
        next = (next + period).max(Instant::now());
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn client(socket: WebSocket, shared: Arc<Shared>) {
    let (mut sink, mut stream) = socket.split();
    let mut frames = shared.frames.subscribe();
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                r = replies.recv() => match r {
                    Some(t) => t,
                    None => break,
                },
                f = frames.recv() => match f {
                    Ok(t) => t,
                    // a slow client skips frames rather than stalling the sim
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let out = shared.host.lock().expect("host lock poisoned").handle_text(&text);
        for m in &out {
            if reply_tx.send(encode(m)).is_err() {
                break;
            }
        }
    }
    drop(reply_tx);
    writer.abort();
}

pub fn run(host: &str, port: u16, phantom: Arc<PhantomModel>, cfg: RunConfig, seed: u64) -> Result<()> {
    cfg.validate()?;
    let ticks_per_frame = (cfg.plant.step_rate / MAX_FRAME_RATE).round().max(1.0) as usize;
    let (frames, _) = broadcast::channel(64);
    let shared = Arc::new(Shared {
        host: Mutex::new(SessionHost::new(phantom, cfg, seed)),
        frames,
    });
    let stop = Arc::new(AtomicBool::new(false));
    let sim = {
        let (shared, stop) = (shared.clone(), stop.clone());
        thread::spawn(move || sim_loop(shared, ticks_per_frame, stop))
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let result = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        println!("listening on {}", listener.local_addr()?);
        std::io::stdout().flush()?;
        let app = Router::new()
            .route("/ws", get(ws_handler))
            .route("/health", get(|| async { "ok" }))
            .with_state(shared);
        axum::serve(listener, app).await?;
        anyhow::Ok(())
    });
    stop.store(true, Ordering::Relaxed);
    let _ = sim.join();
    result
}
