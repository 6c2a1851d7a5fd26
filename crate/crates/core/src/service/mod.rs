//! The crowdsourcing platform: task lifecycle, submission ingestion, PTP and
//! aggregation orchestration, durable logging, and report handover.
//!
//! Every state change is first appended to the event log and then applied
//! through the same transition functions that recovery replays, so a replayed
//! log reproduces the live state exactly. Each task is guarded by its own
//! mutex; submissions to one task commit in lock order, which is the arrival
//! order the A-tree sees. Classification runs before the lock is taken.

pub mod http;
pub mod store;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atree::{ATree, ATreeError, LeafPath, TreeSnapshot};
use crate::model::{
    validate_task, AggregationReport, ClassId, ClassRegistry, Decision, ModelError, Submission,
    Task, TaskMode, TaskRejection, TaskSpec, TaskStatus, Timestamp, ValidationContext, Verdict,
};
use crate::ptp::{
    failed_verdict, judge_offline_defer, judge_online, predict_with_retry, resolve_offline,
    PredictRequest, PredictionOutcome, Predictor, RetryPolicy, PREDICTOR_PROTOCOL_ERROR,
    PREDICTOR_UNAVAILABLE,
};
use crate::similarity::{DEFAULT_MATCH_RATIO, DEFAULT_MIN_MATCHES};
use store::{EventLog, LogRecord, StoreError, Truncation};

pub use store::read_log;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    InvalidTask(#[from] TaskRejection),
    #[error("deadline {deadline} is already past (now {now})")]
    DeadlineInPast { deadline: Timestamp, now: Timestamp },
    #[error("task id {0} is already taken")]
    TaskIdTaken(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {0} is closed")]
    TaskClosed(String),
    #[error("captured_at {captured_at} outside task window [{opened_at}, {deadline}]")]
    OutsideWindow {
        captured_at: Timestamp,
        opened_at: Timestamp,
        deadline: Timestamp,
    },
    #[error("submission {0} already received")]
    DuplicateSubmission(String),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("report for task {0} not available until the task closes")]
    ReportNotReady(String),
    #[error(transparent)]
    Storage(#[from] StoreError),
    #[error("log replay failed: {0}")]
    Replay(String),
}

impl From<ModelError> for ServiceError {
    fn from(e: ModelError) -> Self {
        ServiceError::Malformed(e.to_string())
    }
}

pub type Clock = Arc<dyn Fn() -> Timestamp + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as Timestamp)
            .unwrap_or(0)
    })
}

/// Deployment parameters the platform needs at runtime.
#[derive(Debug, Clone)]
pub struct Settings {
    pub classes: ClassRegistry,
    pub match_ratio: f64,
    pub default_min_matches: u32,
    pub feature_dim: usize,
    pub descriptor_dim: usize,
    pub retry: RetryPolicy,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            classes: ClassRegistry::default(),
            match_ratio: DEFAULT_MATCH_RATIO,
            default_min_matches: DEFAULT_MIN_MATCHES,
            feature_dim: crate::model::DEFAULT_FEATURE_DIM,
            descriptor_dim: crate::model::DEFAULT_DESCRIPTOR_DIM,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub received: usize,
    pub accepted: usize,
    pub rejected_false: usize,
    pub deferred: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeferredEntry {
    pub submission: Submission,
    pub verdict: Verdict,
}

/// Everything the platform knows about one task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskState {
    pub task: Task,
    pub warnings: Vec<String>,
    pub tree: ATree,
    pub deferred: Vec<DeferredEntry>,
    /// Every verdict in arrival order; offline verdicts are rewritten at close.
    pub verdicts: Vec<Verdict>,
    pub counters: Counters,
    pub closed_at: Option<Timestamp>,
    pub report: Option<AggregationReport>,
}

impl TaskState {
    fn new(task: Task, warnings: Vec<String>, match_ratio: f64) -> Self {
        let tree = ATree::with_match_ratio(task.task_id.clone(), task.layers.clone(), match_ratio);
        Self {
            task,
            warnings,
            tree,
            deferred: Vec::new(),
            verdicts: Vec::new(),
            counters: Counters::default(),
            closed_at: None,
            report: None,
        }
    }

    fn has_submission(&self, id: &str) -> bool {
        self.verdicts.iter().any(|v| v.submission_id == id)
    }

    fn check_accepting(&self, submission: &Submission) -> Result<(), ServiceError> {
        let task = &self.task;
        if !task.is_open() {
            return Err(ServiceError::TaskClosed(task.task_id.clone()));
        }
        if !task.accepts_time(submission.captured_at) {
            return Err(ServiceError::OutsideWindow {
                captured_at: submission.captured_at,
                opened_at: task.opened_at,
                deadline: task.deadline,
            });
        }
        if self.has_submission(&submission.submission_id) {
            return Err(ServiceError::DuplicateSubmission(
                submission.submission_id.clone(),
            ));
        }
        Ok(())
    }

    fn apply_submission(
        &mut self,
        submission: Submission,
        verdict: Verdict,
    ) -> Result<Option<LeafPath>, ATreeError> {
        let mut path = None;
        match verdict.decision {
            Decision::Accepted => {
                path = Some(self.tree.insert(submission)?);
                self.counters.accepted += 1;
            }
            Decision::RejectedFalse => self.counters.rejected_false += 1,
            Decision::Deferred => {
                self.deferred.push(DeferredEntry {
                    submission,
                    verdict: verdict.clone(),
                });
                self.counters.deferred += 1;
            }
        }
        self.counters.received += 1;
        self.verdicts.push(verdict);
        Ok(path)
    }

    fn apply_close(
        &mut self,
        closed_at: Timestamp,
        normal: ClassId,
    ) -> Result<AggregationReport, ATreeError> {
        let determined_class = match self.task.mode {
            TaskMode::Online => self
                .task
                .expected_class
                .expect("online task has an expected class"),
            TaskMode::Offline => {
                let deferred = std::mem::take(&mut self.deferred);
                let verdicts: Vec<Verdict> = deferred.iter().map(|d| d.verdict.clone()).collect();
                let resolution = resolve_offline(&verdicts, normal);
                self.counters.deferred = 0;
                for (entry, verdict) in deferred.into_iter().zip(resolution.verdicts) {
                    if let Some(slot) = self
                        .verdicts
                        .iter_mut()
                        .find(|v| v.submission_id == verdict.submission_id)
                    {
                        *slot = verdict.clone();
                    }
                    match verdict.decision {
                        // arrival order is preserved by the deferred list
                        Decision::Accepted => {
                            self.tree.insert(entry.submission)?;
                            self.counters.accepted += 1;
                        }
                        _ => self.counters.rejected_false += 1,
                    }
                }
                resolution.determined_class
            }
        };
        self.tree.seal();
        let handover = self.tree.handover(self.task.representative_policy);
        let report = AggregationReport {
            task_id: self.task.task_id.clone(),
            determined_class,
            no_event: self.task.mode == TaskMode::Offline && determined_class == normal,
            representatives: handover.representatives,
            group_sizes: handover.group_sizes,
            redundancy_ratio: handover.redundancy_ratio,
            total_accepted: handover.total,
            rejected_false: self.counters.rejected_false,
        };
        self.task.state = TaskStatus::Closed;
        self.closed_at = Some(closed_at);
        self.report = Some(report.clone());
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedTask {
    pub task_id: String,
    pub task: Task,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitReceipt {
    pub submission_id: String,
    pub decision: Decision,
    pub predicted_class: ClassId,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_path: Option<LeafPath>,
}

/// Live view of one task: counters and tree taken at a single commit point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub task: Task,
    pub warnings: Vec<String>,
    pub counters: Counters,
    pub verdicts: Vec<Verdict>,
    pub tree: TreeSnapshot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub determined_class: Option<ClassId>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecoveryReport {
    pub records_applied: usize,
    pub tasks: usize,
    pub truncation: Option<Truncation>,
}

type TaskSlot = Arc<Mutex<TaskState>>;

pub struct Platform {
    settings: Settings,
    predictor: Arc<dyn Predictor>,
    tasks: RwLock<BTreeMap<String, TaskSlot>>,
    log: Option<Mutex<EventLog>>,
    clock: Clock,
    next_id: AtomicU64,
}

impl std::fmt::Debug for Platform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Platform")
            .field("settings", &self.settings)
            .field("tasks", &self.tasks.read().map(|t| t.len()).unwrap_or(0))
            .field("durable", &self.log.is_some())
            .finish()
    }
}

impl Platform {
    /// A platform without persistence.
    pub fn in_memory(settings: Settings, predictor: Arc<dyn Predictor>, clock: Clock) -> Self {
        Self {
            settings,
            predictor,
            tasks: RwLock::new(BTreeMap::new()),
            log: None,
            clock,
            next_id: AtomicU64::new(1),
        }
    }

    /// Opens the store in `dir` and rebuilds state by replaying its log. A
    /// damaged tail is cut off at the last valid record and reported.
    pub fn open(
        dir: &Path,
        settings: Settings,
        predictor: Arc<dyn Predictor>,
        clock: Clock,
    ) -> Result<(Self, RecoveryReport), ServiceError> {
        let (log, contents) = EventLog::open(dir)?;
        let mut platform = Self::in_memory(settings, predictor, clock);
        let report = platform.replay(contents.records, contents.truncation)?;
        platform.log = Some(Mutex::new(log));
        Ok((platform, report))
    }

    /// Rebuilds state from records without opening the log for writing.
    pub fn replay_records(
        records: Vec<LogRecord>,
        settings: Settings,
        predictor: Arc<dyn Predictor>,
        clock: Clock,
    ) -> Result<(Self, RecoveryReport), ServiceError> {
        let mut platform = Self::in_memory(settings, predictor, clock);
        let report = platform.replay(records, None)?;
        Ok((platform, report))
    }

    fn replay(
        &mut self,
        records: Vec<LogRecord>,
        truncation: Option<Truncation>,
    ) -> Result<RecoveryReport, ServiceError> {
        if let Some(t) = &truncation {
            log::warn!(
                "event log damaged at line {} (byte {}): {}; recovered up to the previous record",
                t.line,
                t.byte_offset,
                t.reason
            );
        }
        let mut applied = 0;
        for (i, record) in records.into_iter().enumerate() {
            self.apply_record(record)
                .map_err(|e| ServiceError::Replay(format!("record {i}: {e}")))?;
            applied += 1;
        }
        let tasks = self.tasks.read().expect("task map lock").len();
        Ok(RecoveryReport {
            records_applied: applied,
            tasks,
            truncation,
        })
    }

    fn apply_record(&self, record: LogRecord) -> Result<(), ServiceError> {
        match record {
            LogRecord::TaskCreated { task, warnings } => {
                self.bump_id_counter(&task.task_id);
                let mut tasks = self.tasks.write().expect("task map lock");
                if tasks.contains_key(&task.task_id) {
                    return Err(ServiceError::TaskIdTaken(task.task_id));
                }
                let id = task.task_id.clone();
                tasks.insert(
                    id,
                    Arc::new(Mutex::new(TaskState::new(
                        task,
                        warnings,
                        self.settings.match_ratio,
                    ))),
                );
            }
            LogRecord::SubmissionJudged {
                task_id,
                submission,
                verdict,
            } => {
                let slot = self.slot(&task_id)?;
                let mut state = slot.lock().expect("task lock");
                state
                    .apply_submission(submission, verdict)
                    .map_err(|e| ServiceError::Replay(e.to_string()))?;
            }
            LogRecord::TaskClosed { task_id, closed_at } => {
                let slot = self.slot(&task_id)?;
                let mut state = slot.lock().expect("task lock");
                state
                    .apply_close(closed_at, self.settings.classes.normal())
                    .map_err(|e| ServiceError::Replay(e.to_string()))?;
            }
        }
        Ok(())
    }

    fn bump_id_counter(&self, task_id: &str) {
        if let Some(n) = task_id
            .strip_prefix("task-")
            .and_then(|n| n.parse::<u64>().ok())
        {
            self.next_id.fetch_max(n + 1, Ordering::SeqCst);
        }
    }

    fn persist(&self, record: &LogRecord) -> Result<(), ServiceError> {
        if let Some(log) = &self.log {
            log.lock().expect("log lock").append(record)?;
        }
        Ok(())
    }

    fn slot(&self, task_id: &str) -> Result<TaskSlot, ServiceError> {
        self.tasks
            .read()
            .expect("task map lock")
            .get(task_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn classes(&self) -> &ClassRegistry {
        &self.settings.classes
    }

    pub fn now(&self) -> Timestamp {
        (self.clock)()
    }

    pub fn task_ids(&self) -> Vec<String> {
        self.tasks
            .read()
            .expect("task map lock")
            .keys()
            .cloned()
            .collect()
    }

    pub fn create_task(&self, mut spec: TaskSpec) -> Result<CreatedTask, ServiceError> {
        let now = self.now();
        spec.opened_at.get_or_insert(now);
        let mut tasks = self.tasks.write().expect("task map lock");
        let task_id = match spec.task_id.take() {
            Some(id) => {
                if tasks.contains_key(&id) {
                    return Err(ServiceError::TaskIdTaken(id));
                }
                id
            }
            None => loop {
                let id = format!("task-{}", self.next_id.fetch_add(1, Ordering::SeqCst));
                if !tasks.contains_key(&id) {
                    break id;
                }
            },
        };
        spec.task_id = Some(task_id.clone());
        let ctx = ValidationContext {
            classes: &self.settings.classes,
            default_min_matches: self.settings.default_min_matches,
        };
        if spec.deadline <= now {
            return Err(ServiceError::DeadlineInPast {
                deadline: spec.deadline,
                now,
            });
        }
        let validated = validate_task(&spec, &ctx)?;
        for w in &validated.warnings {
            log::warn!("task {task_id}: {w}");
        }
        self.persist(&LogRecord::TaskCreated {
            task: validated.task.clone(),
            warnings: validated.warnings.clone(),
        })?;
        self.bump_id_counter(&task_id);
        tasks.insert(
            task_id.clone(),
            Arc::new(Mutex::new(TaskState::new(
                validated.task.clone(),
                validated.warnings.clone(),
                self.settings.match_ratio,
            ))),
        );
        Ok(CreatedTask {
            task_id,
            task: validated.task,
            warnings: validated.warnings,
        })
    }

    /// Classifies the submission, judges it per the task mode, logs the
    /// verdict and, for accepted online submissions, inserts into the tree.
    pub fn submit(
        &self,
        task_id: &str,
        submission: Submission,
    ) -> Result<SubmitReceipt, ServiceError> {
        if submission.task_id != task_id {
            return Err(ServiceError::Malformed(format!(
                "submission names task {}, posted to {task_id}",
                submission.task_id
            )));
        }
        submission.check_shape(self.settings.feature_dim, self.settings.descriptor_dim)?;
        let slot = self.slot(task_id)?;
        slot.lock()
            .expect("task lock")
            .check_accepting(&submission)?;

        let request = PredictRequest {
            task_id: task_id.to_string(),
            submission_id: submission.submission_id.clone(),
            feature: submission.global_feature.clone(),
        };
        let outcome = predict_with_retry(self.predictor.as_ref(), &request, self.settings.retry);

        let mut state = slot.lock().expect("task lock");
        // state may have moved while the predictor ran
        state.check_accepting(&submission)?;
        let normal = self.settings.classes.normal();
        let verdict = match outcome {
            PredictionOutcome::Predicted(prediction) => match state.task.mode {
                TaskMode::Online => {
                    judge_online(&state.task, &submission.submission_id, prediction)
                }
                TaskMode::Offline => {
                    judge_offline_defer(&state.task, &submission.submission_id, prediction)
                }
            }
            .map_err(|e| ServiceError::Malformed(e.to_string()))?,
            PredictionOutcome::Unavailable {
                attempts,
                last_error,
            } => {
                log::error!(
                    "predictor unavailable for {} after {attempts} attempts: {last_error}",
                    submission.submission_id
                );
                failed_verdict(&submission.submission_id, normal, PREDICTOR_UNAVAILABLE)
            }
            PredictionOutcome::Protocol(msg) => {
                log::error!(
                    "predictor protocol error for {}: {msg}",
                    submission.submission_id
                );
                failed_verdict(&submission.submission_id, normal, PREDICTOR_PROTOCOL_ERROR)
            }
            PredictionOutcome::Input(e) => return Err(ServiceError::Malformed(e.to_string())),
        };
        self.persist(&LogRecord::SubmissionJudged {
            task_id: task_id.to_string(),
            submission: submission.clone(),
            verdict: verdict.clone(),
        })?;
        let group_path = state
            .apply_submission(submission, verdict.clone())
            .expect("submission checked before logging");
        Ok(SubmitReceipt {
            submission_id: verdict.submission_id,
            decision: verdict.decision,
            predicted_class: verdict.predicted_class,
            confidence: verdict.confidence,
            reason: verdict.reason,
            group_path,
        })
    }

    /// Closes the task and returns its report. Closing again returns the
    /// stored report unchanged.
    pub fn close_task(&self, task_id: &str) -> Result<AggregationReport, ServiceError> {
        let slot = self.slot(task_id)?;
        let mut state = slot.lock().expect("task lock");
        if let Some(report) = &state.report {
            return Ok(report.clone());
        }
        let closed_at = self.now();
        self.persist(&LogRecord::TaskClosed {
            task_id: task_id.to_string(),
            closed_at,
        })?;
        let report = state
            .apply_close(closed_at, self.settings.classes.normal())
            .expect("close of an open task cannot fail");
        Ok(report)
    }

    /// Closes every open task whose deadline is at or before `now`. Returns
    /// the ids closed.
    pub fn tick(&self, now: Timestamp) -> Result<Vec<String>, ServiceError> {
        let due: Vec<String> = self
            .tasks
            .read()
            .expect("task map lock")
            .iter()
            .filter(|(_, slot)| {
                let state = slot.lock().expect("task lock");
                state.task.is_open() && state.task.deadline <= now
            })
            .map(|(id, _)| id.clone())
            .collect();
        for id in &due {
            self.close_task(id)?;
            log::info!("task {id} closed at deadline");
        }
        Ok(due)
    }

    pub fn status(&self, task_id: &str) -> Result<TaskView, ServiceError> {
        let slot = self.slot(task_id)?;
        let state = slot.lock().expect("task lock");
        Ok(TaskView {
            task: state.task.clone(),
            warnings: state.warnings.clone(),
            counters: state.counters,
            verdicts: state.verdicts.clone(),
            tree: state.tree.snapshot(),
            closed_at: state.closed_at,
            determined_class: state.report.as_ref().map(|r| r.determined_class),
        })
    }

    pub fn report(&self, task_id: &str) -> Result<AggregationReport, ServiceError> {
        let slot = self.slot(task_id)?;
        let state = slot.lock().expect("task lock");
        state
            .report
            .clone()
            .ok_or_else(|| ServiceError::ReportNotReady(task_id.to_string()))
    }

    /// Runs `f` against the task's state under its lock.
    pub fn with_task<R>(
        &self,
        task_id: &str,
        f: impl FnOnce(&TaskState) -> R,
    ) -> Result<R, ServiceError> {
        let slot = self.slot(task_id)?;
        let state = slot.lock().expect("task lock");
        Ok(f(&state))
    }

    /// Deep copy of every task's state, keyed by task id.
    pub fn state_snapshot(&self) -> BTreeMap<String, TaskState> {
        self.tasks
            .read()
            .expect("task map lock")
            .iter()
            .map(|(id, slot)| (id.clone(), slot.lock().expect("task lock").clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintKind, GeoPoint, KeypointDescriptorSet, LayerInput};
    use crate::ptp::ClassifierModel;

    fn platform(now: Timestamp) -> Platform {
        let settings = Settings {
            feature_dim: 8,
            descriptor_dim: 2,
            ..Settings::default()
        };
        let model = ClassifierModel::block_centroids(&settings.classes, 8, 1.0).unwrap();
        Platform::in_memory(settings, Arc::new(model), Arc::new(move || now))
    }

    fn spec(mode: TaskMode, expected: Option<ClassId>) -> TaskSpec {
        TaskSpec {
            task_id: None,
            name: "campus".into(),
            mode,
            expected_class: expected,
            layers: vec![LayerInput {
                kind: ConstraintKind::Time,
                threshold: Some(100.0),
            }],
            opened_at: None,
            deadline: 10_000,
            representative_policy: None,
        }
    }

    fn feature(class: usize) -> Vec<f64> {
        let mut f = vec![0.0; 8];
        f[class * 2] = 1.0;
        f[class * 2 + 1] = 1.0;
        f
    }

    fn sub(task: &str, id: &str, t: Timestamp, class: usize) -> Submission {
        Submission {
            submission_id: id.into(),
            task_id: task.into(),
            worker_id: "w".into(),
            captured_at: t,
            location: GeoPoint::new(0.0, 0.0).unwrap(),
            keypoints: KeypointDescriptorSet::empty(),
            global_feature: feature(class),
            thumbnail_ref: None,
        }
    }

    #[test]
    fn fresh_task_status() {
        let p = platform(100);
        let created = p.create_task(spec(TaskMode::Online, Some(0))).unwrap();
        assert_eq!(created.task_id, "task-1");
        let view = p.status(&created.task_id).unwrap();
        assert_eq!(view.counters, Counters::default());
        assert_eq!(view.tree.node_count, 1);
        assert!(view.tree.root.children.is_empty());
        assert!(matches!(
            p.report("task-1"),
            Err(ServiceError::ReportNotReady(_))
        ));
    }

    #[test]
    fn past_deadline_rejected() {
        let p = platform(20_000);
        assert!(matches!(
            p.create_task(spec(TaskMode::Online, Some(0))),
            Err(ServiceError::DeadlineInPast { .. })
        ));
    }

    #[test]
    fn offline_expected_class_warns() {
        let p = platform(100);
        let created = p.create_task(spec(TaskMode::Offline, Some(0))).unwrap();
        assert_eq!(created.task.expected_class, None);
        assert_eq!(created.warnings.len(), 1);
    }

    #[test]
    fn online_flow_and_idempotent_close() {
        let p = platform(100);
        let id = p
            .create_task(spec(TaskMode::Online, Some(0)))
            .unwrap()
            .task_id;
        let a = p.submit(&id, sub(&id, "a", 200, 0)).unwrap();
        assert_eq!(a.decision, Decision::Accepted);
        assert!(a.group_path.is_some());
        let n = p.submit(&id, sub(&id, "n", 210, 3)).unwrap();
        assert_eq!(n.decision, Decision::RejectedFalse);
        assert!(n.group_path.is_none());
        p.submit(&id, sub(&id, "b", 280, 0)).unwrap();
        p.submit(&id, sub(&id, "c", 360, 0)).unwrap();
        let report = p.close_task(&id).unwrap();
        assert_eq!(report.representatives, ["b", "c"]);
        assert_eq!(report.rejected_false, 1);
        assert_eq!(p.close_task(&id).unwrap(), report);
        assert_eq!(p.report(&id).unwrap(), report);
        assert!(matches!(
            p.submit(&id, sub(&id, "d", 300, 0)),
            Err(ServiceError::TaskClosed(_))
        ));
    }

    #[test]
    fn submission_guards() {
        let p = platform(100);
        let id = p
            .create_task(spec(TaskMode::Online, Some(0)))
            .unwrap()
            .task_id;
        assert!(matches!(
            p.submit(&id, sub(&id, "early", 50, 0)),
            Err(ServiceError::OutsideWindow { .. })
        ));
        assert!(matches!(
            p.submit("nope", sub("nope", "x", 200, 0)),
            Err(ServiceError::UnknownTask(_))
        ));
        p.submit(&id, sub(&id, "a", 200, 0)).unwrap();
        assert!(matches!(
            p.submit(&id, sub(&id, "a", 200, 0)),
            Err(ServiceError::DuplicateSubmission(_))
        ));
        let mut bad = sub(&id, "short", 200, 0);
        bad.global_feature.pop();
        assert!(matches!(
            p.submit(&id, bad),
            Err(ServiceError::Malformed(_))
        ));
        assert_eq!(p.status(&id).unwrap().counters.received, 1);
    }

    #[test]
    fn offline_defers_then_votes_and_replays_in_arrival_order() {
        let p = platform(100);
        let id = p
            .create_task(spec(TaskMode::Offline, None))
            .unwrap()
            .task_id;
        for (sid, t, class) in [("a", 200, 1), ("x", 205, 0), ("b", 280, 1), ("c", 360, 1)] {
            let r = p.submit(&id, sub(&id, sid, t, class)).unwrap();
            assert_eq!(r.decision, Decision::Deferred);
        }
        let before = p.status(&id).unwrap();
        assert_eq!(before.counters.deferred, 4);
        assert_eq!(before.tree.group_count, 0);
        let report = p.close_task(&id).unwrap();
        assert_eq!(report.determined_class, 1);
        assert!(!report.no_event);
        assert_eq!(report.representatives, ["b", "c"]);
        assert_eq!(report.total_accepted, 3);
        assert_eq!(report.rejected_false, 1);
        let after = p.status(&id).unwrap();
        assert_eq!(
            after.counters,
            Counters {
                received: 4,
                accepted: 3,
                rejected_false: 1,
                deferred: 0
            }
        );
    }

    #[test]
    fn offline_normal_plurality_is_no_event() {
        let p = platform(100);
        let id = p
            .create_task(spec(TaskMode::Offline, None))
            .unwrap()
            .task_id;
        p.submit(&id, sub(&id, "a", 200, 3)).unwrap();
        p.submit(&id, sub(&id, "b", 200, 3)).unwrap();
        p.submit(&id, sub(&id, "c", 200, 0)).unwrap();
        let report = p.close_task(&id).unwrap();
        assert_eq!(report.determined_class, 3);
        assert!(report.no_event);
        assert!(report.representatives.is_empty());
        assert_eq!(report.rejected_false, 3);
    }

    #[test]
    fn tick_closes_due_tasks() {
        let p = platform(100);
        let id = p
            .create_task(spec(TaskMode::Online, Some(0)))
            .unwrap()
            .task_id;
        assert!(p.tick(9_999).unwrap().is_empty());
        assert_eq!(p.tick(10_000).unwrap(), vec![id.clone()]);
        assert!(p.report(&id).is_ok());
        assert!(p.tick(20_000).unwrap().is_empty());
    }
}
