//! Client side of the line protocol: a classifier living in a child process.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::protocol::{excerpt, Handshake, Reply, Request};
use crate::error::ModelError;
use crate::perturbation::InputVector;
use crate::stream::{Namespace, RandomStream};

const EXCERPT_LEN: usize = 200;
const PROBE_BATCH: usize = 16;

/// How to launch and talk to an external model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalSettings {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}

impl ExternalSettings {
    pub fn new<S: Into<String>>(command: impl IntoIterator<Item = S>) -> Self {
        Self {
            command: command.into_iter().map(Into::into).collect(),
            timeout_ms: default_timeout_ms(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout_ms = timeout.as_millis() as u64;
        self
    }
}

type Waiters = Arc<Mutex<HashMap<u64, Sender<Result<Reply, String>>>>>;

/// A model served by a child process. Requests from any number of threads
/// are written one at a time, tagged with increasing ids, and replies are
/// routed back to the waiting caller by id.
#[derive(Debug)]
pub struct ExternalModel {
    input_dim: usize,
    num_classes: usize,
    timeout: Duration,
    next_id: AtomicU64,
    stdin: Mutex<ChildStdin>,
    waiters: Waiters,
    alive: Arc<AtomicBool>,
    child: Mutex<Child>,
}

impl ExternalModel {
    /// Spawns the process, performs the handshake and rejects models that
    /// answer the same probe batch differently twice.
    pub fn connect(settings: &ExternalSettings) -> Result<Self, ModelError> {
        let model = Self::spawn(settings)?;
        model.check_determinism()?;
        Ok(model)
    }

    /// Spawns the process and performs the handshake only.
    pub fn spawn(settings: &ExternalSettings) -> Result<Self, ModelError> {
        let (program, args) = settings
            .command
            .split_first()
            .ok_or_else(|| ModelError::Config("external model command is empty".into()))?;
        let timeout = Duration::from_millis(settings.timeout_ms);
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ModelError::Transport(format!("cannot start {program:?}: {e}")))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        let waiters: Waiters = Arc::new(Mutex::new(HashMap::new()));
        let alive = Arc::new(AtomicBool::new(true));
        let (hello_tx, hello_rx) = mpsc::channel();
        spawn_reader(stdout, hello_tx, Arc::clone(&waiters), Arc::clone(&alive));

        let hello = serde_json::to_string(&Request::Hello).expect("hello serializes");
        if let Err(e) = writeln!(stdin, "{hello}").and_then(|_| stdin.flush()) {
            let _ = child.kill();
            return Err(ModelError::Transport(format!("handshake write failed: {e}")));
        }
        let handshake = match hello_rx.recv_timeout(timeout) {
            Ok(line) => serde_json::from_str::<Handshake>(&line).map_err(|e| {
                ModelError::Transport(format!(
                    "malformed handshake {:?}: {e}",
                    excerpt(&line, EXCERPT_LEN)
                ))
            }),
            Err(RecvTimeoutError::Timeout) => Err(ModelError::Transport(format!(
                "no handshake within {} ms",
                timeout.as_millis()
            ))),
            Err(RecvTimeoutError::Disconnected) => Err(ModelError::Transport(
                "model process exited before the handshake".into(),
            )),
        };
        let handshake = match handshake {
            Ok(h) => h,
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(e);
            }
        };
        if handshake.input_dim == 0 || handshake.num_classes < 2 {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ModelError::Transport(format!(
                "handshake announced input_dim = {}, num_classes = {}",
                handshake.input_dim, handshake.num_classes
            )));
        }
        debug!(
            "external model ready: input_dim={} num_classes={}",
            handshake.input_dim, handshake.num_classes
        );
        Ok(Self {
            input_dim: handshake.input_dim,
            num_classes: handshake.num_classes,
            timeout,
            next_id: AtomicU64::new(1),
            stdin: Mutex::new(stdin),
            waiters,
            alive,
            child: Mutex::new(child),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Sends the same pseudo-random batch twice and compares the answers.
    pub fn check_determinism(&self) -> Result<(), ModelError> {
        let mut stream = RandomStream::derive(0, Namespace::Simulation, u64::MAX);
        let probe: Vec<InputVector> = (0..PROBE_BATCH)
            .map(|_| {
                InputVector::new((0..self.input_dim).map(|_| stream.random::<f64>()).collect())
                    .expect("unit interval")
            })
            .collect();
        let first = self.predict_batch(&probe)?;
        let second = self.predict_batch(&probe)?;
        if first != second {
            return Err(ModelError::Config(
                "external model is not deterministic: identical requests got different labels"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn predict_batch(&self, batch: &[InputVector]) -> Result<Vec<usize>, ModelError> {
        if let Some(bad) = batch.iter().find(|x| x.dimension() != self.input_dim) {
            return Err(ModelError::Config(format!(
                "input has dimension {}, model expects {}",
                bad.dimension(),
                self.input_dim
            )));
        }
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        if !self.alive.load(Ordering::SeqCst) {
            return Err(ModelError::Transport("model process has exited".into()));
        }

        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel();
        self.waiters.lock().expect("waiters lock").insert(id, tx);
        if !self.alive.load(Ordering::SeqCst) {
            self.waiters.lock().expect("waiters lock").remove(&id);
            return Err(ModelError::Transport("model process has exited".into()));
        }

        let request = Request::Predict {
            id,
            inputs: batch.iter().map(|x| x.values().to_vec()).collect(),
        };
        let line = serde_json::to_string(&request).expect("request serializes");
        let written = {
            let mut stdin = self.stdin.lock().expect("stdin lock");
            writeln!(stdin, "{line}").and_then(|_| stdin.flush())
        };
        if let Err(e) = written {
            self.waiters.lock().expect("waiters lock").remove(&id);
            return Err(ModelError::Transport(format!("request {id} write failed: {e}")));
        }

        let reply = match rx.recv_timeout(self.timeout) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                self.waiters.lock().expect("waiters lock").remove(&id);
                return Err(ModelError::Transport(format!(
                    "request {id} timed out after {} ms",
                    self.timeout.as_millis()
                )));
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(ModelError::Transport(format!(
                    "model process exited while request {id} was pending"
                )))
            }
        };
        match reply.map_err(ModelError::Transport)? {
            Reply::Error(e) => Err(ModelError::Transport(format!(
                "model rejected request {id}: {}",
                excerpt(&e.error, EXCERPT_LEN)
            ))),
            Reply::Labels(r) => {
                if r.labels.len() != batch.len() {
                    return Err(ModelError::Transport(format!(
                        "request {id}: expected {} labels, got {}",
                        batch.len(),
                        r.labels.len()
                    )));
                }
                r.labels
                    .iter()
                    .map(|&l| {
                        if l >= 0 && (l as usize) < self.num_classes {
                            Ok(l as usize)
                        } else {
                            Err(ModelError::Transport(format!(
                                "request {id}: label {l} outside [0, {})",
                                self.num_classes
                            )))
                        }
                    })
                    .collect()
            }
        }
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn spawn_reader(
    stdout: std::process::ChildStdout,
    hello_tx: Sender<String>,
    waiters: Waiters,
    alive: Arc<AtomicBool>,
) {
    thread::spawn(move || {
        let mut lines = BufReader::new(stdout).lines();
        let mut hello_tx = Some(hello_tx);
        while let Some(Ok(line)) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(tx) = hello_tx.take() {
                let _ = tx.send(line);
                continue;
            }
            let mut waiters = waiters.lock().expect("waiters lock");
            match Reply::parse(&line) {
                Ok(reply) => match reply.id().and_then(|id| waiters.remove(&id)) {
                    Some(tx) => {
                        let _ = tx.send(Ok(reply));
                    }
                    None if reply.id().is_none() && waiters.len() == 1 => {
                        // Error without an id: only one request can own it.
                        let (_, tx) = waiters.drain().next().expect("one waiter");
                        let _ = tx.send(Ok(reply));
                    }
                    None => warn!("dropping unmatched model reply {}", excerpt(&line, EXCERPT_LEN)),
                },
                Err(e) => {
                    // Cannot tell whose reply this was; fail everything in flight.
                    let msg = format!("malformed response {:?}: {e}", excerpt(&line, EXCERPT_LEN));
                    for (_, tx) in waiters.drain() {
                        let _ = tx.send(Err(msg.clone()));
                    }
                }
            }
        }
        alive.store(false, Ordering::SeqCst);
        waiters.lock().expect("waiters lock").clear();
    });
}
