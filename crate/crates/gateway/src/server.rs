use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use hubsim::protocol::Session;
use hubsim::sim::{fnv1a64, init_world, write_checkpoints, write_input_log, SimContext};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::time::MissedTickBehavior;
use tower_http::services::ServeDir;

/// Bound on text frames waiting between the socket reader and the stepper.
const INBOX_CAP: usize = 64;

pub struct ServeOptions {
    pub ctx: Arc<SimContext>,
    pub seed: u64,
    pub site_bytes: Vec<u8>,
    pub scenario_bytes: Vec<u8>,
    pub static_dir: Option<PathBuf>,
    /// Directory that receives each session's input log and checkpoints
    /// when it closes.
    pub record_dir: Option<PathBuf>,
}

struct AppState {
    ctx: Arc<SimContext>,
    seed: u64,
    site_bytes: Vec<u8>,
    scenario_bytes: Vec<u8>,
    site_digest: String,
    scenario_digest: String,
    record_dir: Option<PathBuf>,
    /// Tick of the most recently stepped session world.
    tick: AtomicU64,
    sessions: AtomicU64,
}

pub fn router(opts: ServeOptions) -> Router {
    let state = Arc::new(AppState {
        site_digest: format!("{:016x}", fnv1a64(&opts.site_bytes)),
        scenario_digest: format!("{:016x}", fnv1a64(&opts.scenario_bytes)),
        ctx: opts.ctx,
        seed: opts.seed,
        site_bytes: opts.site_bytes,
        scenario_bytes: opts.scenario_bytes,
        record_dir: opts.record_dir,
        tick: AtomicU64::new(0),
        sessions: AtomicU64::new(0),
    });
    let app = Router::new()
        .route("/health", get(health))
        .route("/site", get(site))
        .route("/scenario", get(scenario))
        .route("/session", get(session))
        .with_state(state);
    match opts.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

pub async fn serve(listener: TcpListener, opts: ServeOptions) -> std::io::Result<()> {
    axum::serve(listener, router(opts)).await
}

async fn health(State(s): State<Arc<AppState>>) -> impl IntoResponse {
    Json(serde_json::json!({"ok": true, "tick": s.tick.load(Ordering::Relaxed)}))
}

fn json_bytes(bytes: Vec<u8>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], bytes)
}

async fn site(State(s): State<Arc<AppState>>) -> impl IntoResponse {
    json_bytes(s.site_bytes.clone())
}

async fn scenario(State(s): State<Arc<AppState>>) -> impl IntoResponse {
    json_bytes(s.scenario_bytes.clone())
}

async fn session(ws: WebSocketUpgrade, State(s): State<Arc<AppState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, s))
}

async fn run_session(socket: WebSocket, app: Arc<AppState>) {
    let n = app.sessions.fetch_add(1, Ordering::Relaxed) + 1;
    let world = match init_world(app.ctx.clone(), app.seed) {
        Ok(w) => w,
        Err(e) => {
            tracing::error!(error = %e, "cannot start session world");
            return;
        }
    };
    let mut session = Session::new(
        format!("s{n}"),
        world,
        app.site_digest.clone(),
        app.scenario_digest.clone(),
    );
    tracing::info!(session = %session.id, "session opened");

    use futures_util::{SinkExt, StreamExt};
    let (mut tx, mut rx) = socket.split();
    let (inbox_tx, mut inbox) = mpsc::channel::<String>(INBOX_CAP);
    // Network reads run separately from the stepper; they only forward text.
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = rx.next().await {
            match msg {
                Message::Text(t) => {
                    if inbox_tx.send(t.to_string()).await.is_err() {
                        break;
                    }
                }
                Message::Close(_) => break,
                _ => {}
            }
        }
    });

    let period = Duration::from_millis(1000 / app.ctx.config().tick_hz as u64);
    let mut clock = tokio::time::interval(period);
    clock.set_missed_tick_behavior(MissedTickBehavior::Burst);
    'outer: loop {
        let out = tokio::select! {
            text = inbox.recv() => match text {
                Some(t) => session.handle_text(&t),
                None => break,
            },
            _ = clock.tick() => {
                let out = session.tick();
                if session.established() {
                    app.tick.store(session.world().state.tick, Ordering::Relaxed);
                }
                out
            }
        };
        for m in out {
            if tx.send(Message::Text(m.encode().into())).await.is_err() {
                break 'outer;
            }
        }
    }
    reader.abort();
    tracing::info!(
        session = %session.id,
        ticks = session.world().state.tick,
        dropped_inputs = session.dropped_inputs,
        "session closed"
    );
    if let Some(dir) = &app.record_dir {
        if let Err(e) = save_session(dir, &session) {
            tracing::error!(session = %session.id, error = %e, "cannot save session record");
        }
    }
}

/// Write `<id>.ndjson` (consumed frames) and `<id>.checkpoints.tsv`.
fn save_session(dir: &Path, session: &Session) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join(format!("{}.ndjson", session.id)),
        write_input_log(session.replay_log()),
    )?;
    std::fs::write(
        dir.join(format!("{}.checkpoints.tsv", session.id)),
        write_checkpoints(session.checkpoints()),
    )
}
