//! Photo type prediction: classify each submission's global feature, reject
//! false submissions for online tasks, and settle offline tasks by plurality
//! vote once they close.
//!
//! The classifier sits behind the [`Predictor`] trait. [`ClassifierModel`] is
//! the in-process reference (nearest centroid with a softmax confidence);
//! [`ExternalPredictor`] forwards each request to another process over a
//! line-delimited JSON protocol.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassId, ClassRegistry, Decision, Task, TaskMode, TaskStatus, Verdict};

/// Reason attached to verdicts rejected because the predictor never answered.
pub const PREDICTOR_UNAVAILABLE: &str = "predictor_unavailable";
/// Reason attached to verdicts rejected because the predictor answered nonsense.
pub const PREDICTOR_PROTOCOL_ERROR: &str = "predictor_protocol_error";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PtpError {
    #[error("feature has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature has a non-finite component")]
    NonFiniteFeature,
    #[error("task {0} is not an online task")]
    NotOnline(String),
    #[error("task {0} is not an offline task")]
    NotOffline(String),
    #[error("task {0} is closed")]
    TaskClosed(String),
    #[error("invalid classifier model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: ClassId,
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawModel {
    #[serde(default = "default_temperature")]
    temperature: f64,
    centroids: BTreeMap<ClassId, Vec<f64>>,
}

fn default_temperature() -> f64 {
    1.0
}

/// Nearest-centroid reference classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ClassifierModel {
    centroids: BTreeMap<ClassId, Vec<f64>>,
    temperature: f64,
    dim: usize,
}

impl ClassifierModel {
    pub fn new(centroids: BTreeMap<ClassId, Vec<f64>>, temperature: f64) -> Result<Self, PtpError> {
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(PtpError::InvalidModel(format!(
                "temperature {temperature} must be positive"
            )));
        }
        let dim = match centroids.values().next() {
            Some(c) => c.len(),
            None => return Err(PtpError::InvalidModel("no centroids".into())),
        };
        if dim == 0 {
            return Err(PtpError::InvalidModel("zero-dimensional centroids".into()));
        }
        for (class, c) in &centroids {
            if c.len() != dim {
                return Err(PtpError::InvalidModel(format!(
                    "centroid of class {class} has dimension {}, expected {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(PtpError::InvalidModel(format!(
                    "centroid of class {class} is not finite"
                )));
            }
        }
        Ok(Self {
            centroids,
            temperature,
            dim,
        })
    }

    /// Axis-aligned centroids: class number `i` (in id order) has `scale` on
    /// the `i`-th block of `dim / M` coordinates and zero elsewhere.
    pub fn block_centroids(
        classes: &ClassRegistry,
        dim: usize,
        scale: f64,
    ) -> Result<Self, PtpError> {
        let m = classes.len();
        if dim < m {
            return Err(PtpError::InvalidModel(format!(
                "dimension {dim} below class count {m}"
            )));
        }
        let block = dim / m;
        let centroids = classes
            .ids()
            .enumerate()
            .map(|(i, id)| {
                let mut c = vec![0.0; dim];
                c[i * block..(i + 1) * block].fill(scale);
                (id, c)
            })
            .collect();
        Self::new(centroids, 1.0)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self, PtpError> {
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(PtpError::InvalidModel(format!(
                "temperature {temperature} must be positive"
            )));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn centroid(&self, class: ClassId) -> Option<&[f64]> {
        self.centroids.get(&class).map(Vec::as_slice)
    }

    pub fn centroids(&self) -> impl Iterator<Item = (ClassId, &[f64])> {
        self.centroids.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Checks that the model has exactly one centroid per registered class.
    pub fn check_registry(&self, classes: &ClassRegistry) -> Result<(), PtpError> {
        let model_ids: Vec<ClassId> = self.centroids.keys().copied().collect();
        let registry_ids: Vec<ClassId> = classes.ids().collect();
        if model_ids != registry_ids {
            return Err(PtpError::InvalidModel(format!(
                "centroid classes {model_ids:?} do not match registered classes {registry_ids:?}"
            )));
        }
        Ok(())
    }

    /// Nearest centroid by Euclidean distance, smallest class id on ties.
    /// Confidence is the softmax of negated distances over all classes.
    pub fn classify(&self, feature: &[f64]) -> Result<Prediction, PtpError> {
        if feature.len() != self.dim {
            return Err(PtpError::DimensionMismatch {
                expected: self.dim,
                found: feature.len(),
            });
        }
        if feature.iter().any(|x| !x.is_finite()) {
            return Err(PtpError::NonFiniteFeature);
        }
        let distances: Vec<(ClassId, f64)> = self
            .centroids
            .iter()
            .map(|(id, c)| (*id, euclidean(feature, c)))
            .collect();
        let (winner, d_min) =
            distances
                .iter()
                .copied()
                .fold((ClassId::MAX, f64::INFINITY), |best, cur| {
                    if cur.1 < best.1 {
                        cur
                    } else {
                        best
                    }
                });
        // shifted by d_min so the winner's term is exactly 1
        let partition: f64 = distances
            .iter()
            .map(|(_, d)| (-(d - d_min) / self.temperature).exp())
            .sum();
        Ok(Prediction {
            class: winner,
            confidence: 1.0 / partition,
        })
    }
}

impl TryFrom<RawModel> for ClassifierModel {
    type Error = PtpError;

    fn try_from(raw: RawModel) -> Result<Self, Self::Error> {
        Self::new(raw.centroids, raw.temperature)
    }
}

impl From<ClassifierModel> for RawModel {
    fn from(model: ClassifierModel) -> Self {
        RawModel {
            temperature: model.temperature,
            centroids: model.centroids,
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Online decision: accept exactly the expected class.
pub fn judge_online(
    task: &Task,
    submission_id: &str,
    prediction: Prediction,
) -> Result<Verdict, PtpError> {
    if task.mode != TaskMode::Online {
        return Err(PtpError::NotOnline(task.task_id.clone()));
    }
    let decision = if Some(prediction.class) == task.expected_class {
        Decision::Accepted
    } else {
        Decision::RejectedFalse
    };
    Ok(Verdict {
        submission_id: submission_id.to_string(),
        predicted_class: prediction.class,
        confidence: prediction.confidence,
        decision,
        reason: None,
    })
}

/// Offline decision: defer unconditionally while the task is open.
pub fn judge_offline_defer(
    task: &Task,
    submission_id: &str,
    prediction: Prediction,
) -> Result<Verdict, PtpError> {
    if task.mode != TaskMode::Offline {
        return Err(PtpError::NotOffline(task.task_id.clone()));
    }
    if task.state == TaskStatus::Closed {
        return Err(PtpError::TaskClosed(task.task_id.clone()));
    }
    Ok(Verdict {
        submission_id: submission_id.to_string(),
        predicted_class: prediction.class,
        confidence: prediction.confidence,
        decision: Decision::Deferred,
        reason: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineResolution {
    pub determined_class: ClassId,
    /// The normal class won the vote; nothing is accepted.
    pub no_event: bool,
    pub verdicts: Vec<Verdict>,
}

/// Plurality vote over deferred verdicts.
///
/// Ties on count go to the larger summed confidence, then to the smaller
/// class id. An empty input resolves to the normal class.
pub fn resolve_offline(deferred: &[Verdict], normal: ClassId) -> OfflineResolution {
    let mut tally: BTreeMap<ClassId, (usize, Vec<f64>)> = BTreeMap::new();
    for v in deferred {
        let entry = tally.entry(v.predicted_class).or_default();
        entry.0 += 1;
        entry.1.push(v.confidence);
    }
    let determined_class = tally
        .into_iter()
        .map(|(class, (count, mut confs))| {
            // order-independent sum
            confs.sort_by(f64::total_cmp);
            (class, count, confs.iter().sum::<f64>())
        })
        .fold(None::<(ClassId, usize, f64)>, |best, cur| match best {
            None => Some(cur),
            Some(b) => {
                let better = cur.1 > b.1 || (cur.1 == b.1 && cur.2 > b.2);
                Some(if better { cur } else { b })
            }
        })
        .map_or(normal, |(class, _, _)| class);
    let no_event = determined_class == normal;
    let verdicts = deferred
        .iter()
        .map(|v| {
            let decision = if !no_event && v.predicted_class == determined_class {
                Decision::Accepted
            } else {
                Decision::RejectedFalse
            };
            Verdict {
                decision,
                ..v.clone()
            }
        })
        .collect();
    OfflineResolution {
        determined_class,
        no_event,
        verdicts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub task_id: String,
    pub submission_id: String,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub submission_id: String,
    pub class: ClassId,
    pub confidence: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("predictor transport failure: {0}")]
    Transport(String),
    #[error("predictor protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Input(#[from] PtpError),
}

pub trait Predictor: Send + Sync {
    fn predict(&self, request: &PredictRequest) -> Result<Prediction, PredictError>;
}

impl Predictor for ClassifierModel {
    fn predict(&self, request: &PredictRequest) -> Result<Prediction, PredictError> {
        Ok(self.classify(&request.feature)?)
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn predict(&self, request: &PredictRequest) -> Result<Prediction, PredictError> {
        (**self).predict(request)
    }
}

/// Client for a predictor living in another process. One TCP connection per
/// request; one JSON line each way.
#[derive(Debug, Clone)]
pub struct ExternalPredictor {
    endpoint: String,
    classes: ClassRegistry,
    timeout: Duration,
}

impl ExternalPredictor {
    pub fn new(endpoint: impl Into<String>, classes: ClassRegistry) -> Self {
        Self {
            endpoint: endpoint.into(),
            classes,
            timeout: Duration::from_secs(5),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn exchange(&self, request: &PredictRequest) -> Result<String, PredictError> {
        let transport =
            |e: std::io::Error| PredictError::Transport(format!("{}: {e}", self.endpoint));
        let addr = self
            .endpoint
            .to_socket_addrs()
            .map_err(transport)?
            .next()
            .ok_or_else(|| PredictError::Transport(format!("{}: no address", self.endpoint)))?;
        let mut stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(transport)?;
        stream
            .set_read_timeout(Some(self.timeout))
            .map_err(transport)?;
        stream
            .set_write_timeout(Some(self.timeout))
            .map_err(transport)?;
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        stream.write_all(line.as_bytes()).map_err(transport)?;
        stream.flush().map_err(transport)?;
        let mut reply = String::new();
        BufReader::new(stream)
            .read_line(&mut reply)
            .map_err(transport)?;
        if reply.is_empty() {
            return Err(PredictError::Transport(format!(
                "{}: connection closed",
                self.endpoint
            )));
        }
        Ok(reply)
    }
}

impl Predictor for ExternalPredictor {
    fn predict(&self, request: &PredictRequest) -> Result<Prediction, PredictError> {
        let reply = self.exchange(request)?;
        parse_response(&reply, &request.submission_id, &self.classes)
    }
}

/// Parses and checks one response line of the external predictor protocol.
pub fn parse_response(
    line: &str,
    submission_id: &str,
    classes: &ClassRegistry,
) -> Result<Prediction, PredictError> {
    let response: PredictResponse = serde_json::from_str(line.trim())
        .map_err(|e| PredictError::Protocol(format!("malformed response: {e}")))?;
    if response.submission_id != submission_id {
        return Err(PredictError::Protocol(format!(
            "response echoes submission {}, expected {submission_id}",
            response.submission_id
        )));
    }
    if !classes.contains(response.class) {
        return Err(PredictError::Protocol(format!(
            "unregistered class {}",
            response.class
        )));
    }
    if !(0.0..=1.0).contains(&response.confidence) {
        return Err(PredictError::Protocol(format!(
            "confidence {} outside [0, 1]",
            response.confidence
        )));
    }
    Ok(Prediction {
        class: response.class,
        confidence: response.confidence,
    })
}

/// Answers one connection of the line protocol using `predictor`. Useful for
/// hosting a predictor process and for tests.
pub fn serve_connection(stream: TcpStream, predictor: &dyn Predictor) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: PredictRequest = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => break,
        };
        let Ok(prediction) = predictor.predict(&request) else {
            break;
        };
        let response = PredictResponse {
            submission_id: request.submission_id,
            class: prediction.class,
            confidence: prediction.confidence,
        };
        writeln!(
            writer,
            "{}",
            serde_json::to_string(&response).expect("response serializes")
        )?;
        writer.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff: Duration::from_millis(50),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionOutcome {
    Predicted(Prediction),
    /// Every attempt failed at the transport level.
    Unavailable {
        attempts: u32,
        last_error: String,
    },
    /// The predictor answered but the answer is unusable. Not retried.
    Protocol(String),
    /// The feature itself was rejected (wrong dimension, non-finite).
    Input(PtpError),
}

/// Calls the predictor, retrying transport failures with linear backoff.
pub fn predict_with_retry(
    predictor: &dyn Predictor,
    request: &PredictRequest,
    policy: RetryPolicy,
) -> PredictionOutcome {
    let attempts = policy.max_attempts.max(1);
    let mut last_error = String::new();
    for attempt in 1..=attempts {
        match predictor.predict(request) {
            Ok(p) => return PredictionOutcome::Predicted(p),
            Err(PredictError::Protocol(msg)) => return PredictionOutcome::Protocol(msg),
            Err(PredictError::Input(e)) => return PredictionOutcome::Input(e),
            Err(PredictError::Transport(msg)) => {
                log::warn!(
                    "predictor attempt {attempt}/{attempts} for {} failed: {msg}",
                    request.submission_id
                );
                last_error = msg;
                if attempt < attempts {
                    std::thread::sleep(policy.backoff * attempt);
                }
            }
        }
    }
    PredictionOutcome::Unavailable {
        attempts,
        last_error,
    }
}

/// Verdict for a submission the predictor could not classify.
pub fn failed_verdict(submission_id: &str, normal: ClassId, reason: &str) -> Verdict {
    Verdict {
        submission_id: submission_id.to_string(),
        predicted_class: normal,
        confidence: 0.0,
        decision: Decision::RejectedFalse,
        reason: Some(reason.to_string()),
    }
}

/// Which predictor a deployment uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PredictorBinding {
    Reference { model: ClassifierModel },
    External { endpoint: String },
}

impl PredictorBinding {
    /// Parses `reference` or `external:ADDR`; `reference` uses `model`.
    pub fn parse(flag: &str, model: ClassifierModel) -> Result<Self, String> {
        match flag.split_once(':') {
            None if flag == "reference" => Ok(Self::Reference { model }),
            Some(("external", addr)) if !addr.is_empty() => Ok(Self::External {
                endpoint: addr.to_string(),
            }),
            _ => Err(format!(
                "unknown predictor `{flag}`; expected `reference` or `external:ADDR`"
            )),
        }
    }

    pub fn into_predictor(self, classes: &ClassRegistry) -> Result<Arc<dyn Predictor>, PtpError> {
        match self {
            Self::Reference { model } => {
                model.check_registry(classes)?;
                Ok(Arc::new(model))
            }
            Self::External { endpoint } => {
                Ok(Arc::new(ExternalPredictor::new(endpoint, classes.clone())))
            }
        }
    }
}
