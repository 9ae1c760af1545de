//! Session server transports. TCP speaks newline-delimited JSON; HTTP maps
//! commands onto POST requests and pushes envelopes as server-sent events.

use std::collections::HashMap;
use std::convert::Infallible;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Args;
use futures::stream::{self, Stream};
use ghostsim_core::session::{Envelope, ErrorCode, Payload, SessionServer, WorldCatalog};
use serde_json::Value;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::broadcast;

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Address for the newline-delimited JSON socket.
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub tcp: String,
    /// Address for the HTTP endpoints.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub http: String,
    /// Append every session's envelopes to `{dir}/{session}.ndjson`.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// World fixtures directory; defaults to $GHOSTSIM_FIXTURES or the bundled fixtures.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
}

const CHANNEL_CAPACITY: usize = 1024;

#[derive(Clone)]
pub struct AppState {
    pub server: Arc<SessionServer>,
    events: broadcast::Sender<Envelope>,
}

impl AppState {
    pub fn new(catalog: WorldCatalog, log_dir: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &log_dir {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let (events, _) = broadcast::channel(CHANNEL_CAPACITY);
        let tx = events.clone();
        let server = SessionServer::new(catalog).with_sink(move |envelopes: &[Envelope]| {
            if let Some(dir) = &log_dir {
                if let Err(e) = append_log(dir, envelopes) {
                    tracing::warn!("session log: {e}");
                }
            }
            for e in envelopes {
                // no subscribers is fine
                let _ = tx.send(e.clone());
            }
        });
        Ok(Self { server: Arc::new(server), events })
    }

    async fn handle(&self, line: String) -> Vec<Envelope> {
        let server = self.server.clone();
        tokio::task::spawn_blocking(move || server.handle_line(&line)).await.unwrap_or_else(|e| {
            vec![Envelope { session_id: String::new(), sequence: 0, payload: error(ErrorCode::MalformedCommand, e.to_string()) }]
        })
    }
}

fn error(code: ErrorCode, message: String) -> Payload {
    Payload::Error { code, message }
}

fn append_log(dir: &std::path::Path, envelopes: &[Envelope]) -> std::io::Result<()> {
    let Some(first) = envelopes.first() else { return Ok(()) };
    let mut f = OpenOptions::new().create(true).append(true).open(dir.join(format!("{}.ndjson", first.session_id)))?;
    let mut buf = Vec::new();
    for e in envelopes {
        serde_json::to_writer(&mut buf, e)?;
        buf.push(b'\n');
    }
    f.write_all(&buf)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/commands", post(session_command))
        .route("/sessions/{id}/events", get(session_events))
        .with_state(state)
}

/// Orphan errors carry an HTTP error status; everything else is 200.
fn reply(envelopes: Vec<Envelope>) -> Response {
    let status = match envelopes.first().map(|e| (e.sequence, &e.payload)) {
        Some((0, Payload::Error { code: ErrorCode::UnknownSession, .. })) => StatusCode::NOT_FOUND,
        Some((0, Payload::Error { .. })) => StatusCode::BAD_REQUEST,
        _ => StatusCode::OK,
    };
    (status, Json(envelopes)).into_response()
}

fn orphan(id: &str, code: ErrorCode, message: String) -> Vec<Envelope> {
    vec![Envelope { session_id: id.to_string(), sequence: 0, payload: error(code, message) }]
}

async fn create_session(State(app): State<AppState>, body: String) -> Response {
    let mut value: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(e) => return reply(orphan("", ErrorCode::MalformedCommand, format!("malformed command: {e}"))),
    };
    if let Some(obj) = value.as_object_mut() {
        obj.entry("type").or_insert_with(|| Value::from("create"));
        if obj["type"] != "create" {
            return reply(orphan("", ErrorCode::MalformedCommand, "POST /sessions only accepts create".into()));
        }
    }
    reply(app.handle(value.to_string()).await)
}

async fn session_command(State(app): State<AppState>, Path(id): Path<String>, body: String) -> Response {
    let mut value: Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(e) => return reply(orphan(&id, ErrorCode::MalformedCommand, format!("malformed command: {e}"))),
    };
    if let Some(obj) = value.as_object_mut() {
        if obj.get("type").and_then(Value::as_str) == Some("create") {
            return reply(orphan(&id, ErrorCode::MalformedCommand, "use POST /sessions to create a session".into()));
        }
        match obj.get("session_id") {
            None => {
                obj.insert("session_id".into(), Value::from(id.clone()));
            }
            Some(v) if v.as_str() != Some(&id) => {
                return reply(orphan(&id, ErrorCode::MalformedCommand, "session_id does not match the path".into()));
            }
            Some(_) => {}
        }
    }
    reply(app.handle(value.to_string()).await)
}

fn to_event(e: &Envelope) -> Event {
    Event::default().id(e.sequence.to_string()).data(serde_json::to_string(e).expect("envelopes serialize"))
}

struct Follow {
    id: String,
    last: u64,
    backlog: std::vec::IntoIter<Envelope>,
    rx: broadcast::Receiver<Envelope>,
    app: AppState,
}

/// Backlog first, then live envelopes; anything at or below `last` is
/// dropped so each sequence is sent once. A lagging receiver catches up from
/// the session log.
fn follow(f: Follow) -> impl Stream<Item = Result<Event, Infallible>> {
    stream::unfold(f, |mut f| async move {
        loop {
            if let Some(e) = f.backlog.next() {
                f.last = e.sequence;
                return Some((Ok(to_event(&e)), f));
            }
            match f.rx.recv().await {
                Ok(e) if e.session_id == f.id && e.sequence > f.last => {
                    f.last = e.sequence;
                    return Some((Ok(to_event(&e)), f));
                }
                Ok(_) => continue,
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let missed = f.app.server.with_session(&f.id, |s| s.since(f.last).to_vec()).unwrap_or_default();
                    f.backlog = missed.into_iter();
                }
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    })
}

async fn session_events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
    headers: HeaderMap,
) -> Response {
    let header = headers.get("last-event-id").and_then(|v| v.to_str().ok()).and_then(|v| v.trim().parse().ok());
    let after: u64 = header.or_else(|| query.get("after").and_then(|v| v.parse().ok())).unwrap_or(0);
    // subscribe before reading the backlog so nothing falls in between
    let rx = app.events.subscribe();
    let Some(backlog) = app.server.with_session(&id, |s| s.since(after).to_vec()) else {
        return reply(orphan(&id, ErrorCode::UnknownSession, format!("unknown session {id:?}")));
    };
    let f = Follow { id, last: after, backlog: backlog.into_iter(), rx, app };
    Sse::new(follow(f)).keep_alive(KeepAlive::default()).into_response()
}

async fn tcp_connection(app: AppState, stream: TcpStream) -> std::io::Result<()> {
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    while let Some(line) = lines.next_line().await? {
        if line.trim().is_empty() {
            continue;
        }
        let mut buf = Vec::new();
        for e in app.handle(line).await {
            serde_json::to_writer(&mut buf, &e)?;
            buf.push(b'\n');
        }
        write.write_all(&buf).await?;
    }
    Ok(())
}

async fn tcp_loop(app: AppState, listener: TcpListener) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let app = app.clone();
                tokio::spawn(async move {
                    if let Err(e) = tcp_connection(app, stream).await {
                        tracing::debug!("connection {peer}: {e}");
                    }
                });
            }
            Err(e) => tracing::warn!("accept: {e}"),
        }
    }
}

/// Running server; dropping it does not stop the listeners.
pub struct Bound {
    pub tcp: SocketAddr,
    pub http: SocketAddr,
    pub state: AppState,
}

/// Binds both listeners and spawns the accept loops on the current runtime.
pub async fn start(args: &ServeArgs) -> Result<Bound> {
    let dir = args.fixtures.clone().unwrap_or_else(crate::fixture_dir);
    let state = AppState::new(WorldCatalog::new(dir), args.log_dir.clone())?;
    let tcp = TcpListener::bind(&args.tcp).await.with_context(|| format!("binding {}", args.tcp))?;
    let http = TcpListener::bind(&args.http).await.with_context(|| format!("binding {}", args.http))?;
    let bound = Bound { tcp: tcp.local_addr()?, http: http.local_addr()?, state: state.clone() };
    tokio::spawn(tcp_loop(state.clone(), tcp));
    let app = router(state);
    tokio::spawn(async move {
        if let Err(e) = axum::serve(http, app).await {
            tracing::error!("http server: {e}");
        }
    });
    Ok(bound)
}

pub fn run_blocking(args: ServeArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let bound = start(&args).await?;
        writeln!(out, "tcp listening on {}", bound.tcp)?;
        writeln!(out, "http listening on {}", bound.http)?;
        out.flush()?;
        tokio::signal::ctrl_c().await.context("waiting for ctrl-c")?;
        Ok(())
    })
}
