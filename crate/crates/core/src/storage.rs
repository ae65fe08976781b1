//! REST measurement store: per-home time series with durable append-only
//! persistence and range queries.
//!
//! The store keeps one JSON-lines file per home under a data directory and
//! mirrors it in memory as a timestamp-ordered map. Every acknowledged write
//! is fsynced first, so a kill-and-restart never loses acknowledged data; a
//! torn trailing line from an interrupted write is truncated away on reopen.
//! Re-posting a (home, timestamp) pair overwrites the earlier value.
//!
//! The HTTP layer exposes:
//!
//! ```text
//! POST /homes/{id}/measurements    body: [{"t": 1700000000, "w": 42.5}, ...]
//!                                  -> 200 {"accepted": n}
//! GET  /homes/{id}/measurements?from=&to=   -> 200 [{"t": ..., "w": ...}, ...]
//! GET  /homes                      -> 200 ["home-a", "home-b", ...]
//! ```
//!
//! Client mistakes (malformed JSON, empty batch, invalid values, `from > to`,
//! bad home id) map to 400, an oversize batch to 413, and I/O or corruption
//! to 500 with nothing acknowledged.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::ops::Bound;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("invalid home id '{0}': use 1-64 characters from [A-Za-z0-9_-]")]
    InvalidHomeId(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch of {0} measurements exceeds the maximum of {1}")]
    OversizeBatch(usize, usize),
    #[error("measurement {index} is invalid: {reason}")]
    InvalidMeasurement { index: usize, reason: String },
    #[error("invalid range: from {0} is after to {1}")]
    BadRange(i64, i64),
    #[error("corrupt store file {file}: line {line}: {message}")]
    Corrupt {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("storage I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

/// One stored sample: watts observed at an epoch second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub timestamp: i64,
    pub watts: f64,
}

/// Wire shape of a measurement: `{"t": <epoch seconds>, "w": <watts>}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct WireMeasurement {
    t: i64,
    w: f64,
}

/// Maximum batch size accepted by default.
pub const DEFAULT_MAX_BATCH: usize = 10_000;

pub fn valid_home_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn validate_measurement(index: usize, m: &Measurement) -> Result<(), StorageError> {
    if !m.watts.is_finite() {
        return Err(StorageError::InvalidMeasurement {
            index,
            reason: format!("watts must be finite, got {}", m.watts),
        });
    }
    if m.watts < 0.0 {
        return Err(StorageError::InvalidMeasurement {
            index,
            reason: format!("watts must be non-negative, got {}", m.watts),
        });
    }
    Ok(())
}

#[derive(Debug)]
struct HomeState {
    map: BTreeMap<i64, f64>,
    file: fs::File,
}

/// Durable per-home measurement store backed by JSON-lines files.
#[derive(Debug)]
pub struct MeasurementStore {
    data_dir: PathBuf,
    homes: Mutex<BTreeMap<String, Arc<Mutex<HomeState>>>>,
}

fn home_file(data_dir: &FsPath, home: &str) -> PathBuf {
    data_dir.join(format!("{home}.jsonl"))
}

/// Parse a home's log. Returns the replayed map and the byte length of the
/// last complete line; bytes past it are a torn write and must be discarded.
fn replay(path: &FsPath, bytes: &[u8]) -> Result<(BTreeMap<i64, f64>, u64), StorageError> {
    let mut map = BTreeMap::new();
    let mut good = 0usize;
    let mut line_no = 0usize;
    let mut start = 0usize;
    while let Some(pos) = bytes[start..].iter().position(|&b| b == b'\n') {
        let end = start + pos;
        line_no += 1;
        let line = &bytes[start..end];
        if !line.is_empty() {
            let wire: WireMeasurement =
                serde_json::from_slice(line).map_err(|e| StorageError::Corrupt {
                    file: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })?;
            let m = Measurement {
                timestamp: wire.t,
                watts: wire.w,
            };
            validate_measurement(0, &m).map_err(|e| StorageError::Corrupt {
                file: path.to_path_buf(),
                line: line_no,
                message: e.to_string(),
            })?;
            map.insert(m.timestamp, m.watts);
        }
        good = end + 1;
        start = end + 1;
    }
    Ok((map, good as u64))
}

fn open_home(data_dir: &FsPath, home: &str) -> Result<HomeState, StorageError> {
    let path = home_file(data_dir, home);
    let mut map = BTreeMap::new();
    if path.exists() {
        let bytes = fs::read(&path)?;
        let (replayed, good) = replay(&path, &bytes)?;
        map = replayed;
        if good < bytes.len() as u64 {
            // Drop the torn trailing line so future appends start cleanly.
            let f = fs::OpenOptions::new().write(true).open(&path)?;
            f.set_len(good)?;
            f.sync_data()?;
        }
    }
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)?;
    Ok(HomeState { map, file })
}

impl MeasurementStore {
    /// Open (or create) a store rooted at `data_dir`, replaying every home
    /// log found there.
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let data_dir = data_dir.into();
        fs::create_dir_all(&data_dir)?;
        let mut homes = BTreeMap::new();
        for entry in fs::read_dir(&data_dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if !valid_home_id(stem) {
                continue;
            }
            let state = open_home(&data_dir, stem)?;
            homes.insert(stem.to_string(), Arc::new(Mutex::new(state)));
        }
        Ok(MeasurementStore {
            data_dir,
            homes: Mutex::new(homes),
        })
    }

    fn home_state(&self, home: &str, create: bool) -> Result<Option<Arc<Mutex<HomeState>>>, StorageError> {
        if !valid_home_id(home) {
            return Err(StorageError::InvalidHomeId(home.to_string()));
        }
        let mut homes = self.homes.lock().expect("home index poisoned");
        if let Some(state) = homes.get(home) {
            return Ok(Some(state.clone()));
        }
        if !create {
            return Ok(None);
        }
        let state = Arc::new(Mutex::new(open_home(&self.data_dir, home)?));
        homes.insert(home.to_string(), state.clone());
        Ok(Some(state))
    }

    /// Append a batch for one home. The batch is durable on disk before this
    /// returns; duplicates of earlier timestamps overwrite (last-wins).
    /// Returns the number of measurements accepted.
    pub fn append(&self, home: &str, batch: &[Measurement]) -> Result<usize, StorageError> {
        if batch.is_empty() {
            return Err(StorageError::EmptyBatch);
        }
        for (i, m) in batch.iter().enumerate() {
            validate_measurement(i, m)?;
        }
        let state = self
            .home_state(home, true)?
            .expect("create=true always yields a state");
        let mut home_state = state.lock().expect("home state poisoned");
        let mut buf = String::with_capacity(batch.len() * 32);
        for m in batch {
            let wire = WireMeasurement {
                t: m.timestamp,
                w: m.watts,
            };
            buf.push_str(&serde_json::to_string(&wire).expect("measurement serializes"));
            buf.push('\n');
        }
        home_state.file.write_all(buf.as_bytes())?;
        home_state.file.sync_data()?;
        for m in batch {
            home_state.map.insert(m.timestamp, m.watts);
        }
        Ok(batch.len())
    }

    /// All measurements for `home` with `from <= t < to`, ascending by
    /// timestamp. Missing bounds are unbounded; an unknown home is empty.
    pub fn query(
        &self,
        home: &str,
        from: Option<i64>,
        to: Option<i64>,
    ) -> Result<Vec<Measurement>, StorageError> {
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(StorageError::BadRange(f, t));
            }
        }
        let Some(state) = self.home_state(home, false)? else {
            return Ok(Vec::new());
        };
        let home_state = state.lock().expect("home state poisoned");
        let lower = from.map_or(Bound::Unbounded, Bound::Included);
        let upper = to.map_or(Bound::Unbounded, Bound::Excluded);
        Ok(home_state
            .map
            .range((lower, upper))
            .map(|(&timestamp, &watts)| Measurement { timestamp, watts })
            .collect())
    }

    /// Sorted ids of every home holding at least one measurement.
    pub fn homes(&self) -> Vec<String> {
        let homes = self.homes.lock().expect("home index poisoned");
        homes
            .iter()
            .filter(|(_, state)| !state.lock().expect("home state poisoned").map.is_empty())
            .map(|(id, _)| id.clone())
            .collect()
    }
}

// ---------------------------------------------------------------------------
// HTTP layer
// ---------------------------------------------------------------------------

/// Service configuration: where to listen, where to persist, batch cap.
#[derive(Debug, Clone)]
pub struct StorageConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub max_batch: usize,
}

impl StorageConfig {
    pub fn new(listen: SocketAddr, data_dir: impl Into<PathBuf>) -> Self {
        StorageConfig {
            listen,
            data_dir: data_dir.into(),
            max_batch: DEFAULT_MAX_BATCH,
        }
    }
}

#[derive(Clone)]
struct AppState {
    store: Arc<MeasurementStore>,
    max_batch: usize,
}

fn error_response(status: StatusCode, message: String) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

fn storage_error_response(err: StorageError) -> Response {
    let status = match err {
        StorageError::InvalidHomeId(_)
        | StorageError::EmptyBatch
        | StorageError::InvalidMeasurement { .. }
        | StorageError::BadRange(_, _) => StatusCode::BAD_REQUEST,
        StorageError::OversizeBatch(_, _) => StatusCode::PAYLOAD_TOO_LARGE,
        StorageError::Corrupt { .. } | StorageError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    };
    error_response(status, err.to_string())
}

async fn post_measurements(
    State(state): State<AppState>,
    Path(home): Path<String>,
    body: Bytes,
) -> Response {
    // Parse the body by hand so malformed JSON is a clean 400.
    let wires: Vec<WireMeasurement> = match serde_json::from_slice(&body) {
        Ok(w) => w,
        Err(e) => {
            return error_response(StatusCode::BAD_REQUEST, format!("malformed JSON body: {e}"))
        }
    };
    if wires.len() > state.max_batch {
        return storage_error_response(StorageError::OversizeBatch(wires.len(), state.max_batch));
    }
    let batch: Vec<Measurement> = wires
        .iter()
        .map(|w| Measurement {
            timestamp: w.t,
            watts: w.w,
        })
        .collect();
    match state.store.append(&home, &batch) {
        Ok(accepted) => (StatusCode::OK, Json(json!({ "accepted": accepted }))).into_response(),
        Err(e) => storage_error_response(e),
    }
}

fn parse_bound(params: &BTreeMap<String, String>, key: &str) -> Result<Option<i64>, String> {
    match params.get(key).map(String::as_str) {
        None | Some("") => Ok(None),
        Some(raw) => raw
            .parse::<i64>()
            .map(Some)
            .map_err(|_| format!("query parameter '{key}' must be an integer, got '{raw}'")),
    }
}

async fn get_measurements(
    State(state): State<AppState>,
    Path(home): Path<String>,
    Query(params): Query<BTreeMap<String, String>>,
) -> Response {
    let from = match parse_bound(&params, "from") {
        Ok(v) => v,
        Err(msg) => return error_response(StatusCode::BAD_REQUEST, msg),
    };
    let to = match parse_bound(&params, "to") {
        Ok(v) => v,
        Err(msg) => return error_response(StatusCode::BAD_REQUEST, msg),
    };
    match state.store.query(&home, from, to) {
        Ok(measurements) => {
            let wires: Vec<WireMeasurement> = measurements
                .iter()
                .map(|m| WireMeasurement {
                    t: m.timestamp,
                    w: m.watts,
                })
                .collect();
            (StatusCode::OK, Json(wires)).into_response()
        }
        Err(e) => storage_error_response(e),
    }
}

async fn list_homes(State(state): State<AppState>) -> Response {
    (StatusCode::OK, Json(state.store.homes())).into_response()
}

/// Build the service router over a shared store.
pub fn router(store: Arc<MeasurementStore>, max_batch: usize) -> Router {
    Router::new()
        .route("/homes", get(list_homes))
        .route(
            "/homes/:home/measurements",
            get(get_measurements).post(post_measurements),
        )
        .with_state(AppState { store, max_batch })
}

/// A background server for tests and in-process pipelines. Shuts down
/// gracefully when dropped.
pub struct ServerHandle {
    addr: SocketAddr,
    store: Arc<MeasurementStore>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    /// Address the server actually bound (useful with port 0).
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Direct handle on the backing store (same data the HTTP API serves).
    pub fn store(&self) -> Arc<MeasurementStore> {
        self.store.clone()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Start the service on a background thread with its own runtime.
pub fn spawn_server(config: &StorageConfig) -> Result<ServerHandle, StorageError> {
    let store = Arc::new(MeasurementStore::open(&config.data_dir)?);
    let (addr_tx, addr_rx) = std::sync::mpsc::channel::<std::io::Result<SocketAddr>>();
    let (shutdown_tx, shutdown_rx) = tokio::sync::oneshot::channel::<()>();
    let listen = config.listen;
    let max_batch = config.max_batch;
    let app_store = store.clone();
    let thread = std::thread::Builder::new()
        .name("measurement-store-http".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                match tokio::net::TcpListener::bind(listen).await {
                    Ok(listener) => {
                        let addr = listener.local_addr().expect("bound address");
                        let _ = addr_tx.send(Ok(addr));
                        let app = router(app_store, max_batch);
                        let _ = axum::serve(listener, app)
                            .with_graceful_shutdown(async {
                                let _ = shutdown_rx.await;
                            })
                            .await;
                    }
                    Err(e) => {
                        let _ = addr_tx.send(Err(e));
                    }
                }
            });
        })?;
    let addr = addr_rx
        .recv()
        .map_err(|_| {
            StorageError::Io(std::io::Error::other("server thread exited before binding"))
        })??;
    Ok(ServerHandle {
        addr,
        store,
        shutdown: Some(shutdown_tx),
        thread: Some(thread),
    })
}

/// Run the service on the current thread until Ctrl-C.
pub fn run_server(config: &StorageConfig) -> Result<(), StorageError> {
    let store = Arc::new(MeasurementStore::open(&config.data_dir)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.listen).await?;
        let addr = listener.local_addr()?;
        // Readiness line on stdout: callers that bind port 0 read the real
        // address from here.
        println!("listening on http://{addr}");
        use std::io::Write as _;
        let _ = std::io::stdout().flush();
        log::info!(
            "measurement store serving, data in {}",
            config.data_dir.display()
        );
        let app = router(store, config.max_batch);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
