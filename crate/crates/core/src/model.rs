//! Shared domain types: event classes, submissions, tasks, verdicts and
//! reports, plus the validation that guards their invariants.
//!
//! Every type here is immutable once built and deserialization goes through
//! the same checks as construction, so a value that exists is a valid value.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds since the Unix epoch.
pub type Timestamp = i64;

/// Identifier of a registered event class.
pub type ClassId = u32;

/// Default keypoint descriptor dimension (SIFT).
pub const DEFAULT_DESCRIPTOR_DIM: usize = 128;

/// Default dimension of the global feature vector used for classification.
pub const DEFAULT_FEATURE_DIM: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside (-180, 180]")]
    Longitude(f64),
    #[error("descriptor {index} has dimension {found}, expected {expected}")]
    DescriptorDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("descriptor {0} has a non-finite component")]
    NonFiniteDescriptor(usize),
    #[error("class registry must contain exactly one normal class, found {0}")]
    NormalClassCount(usize),
    #[error("class registry needs at least two classes")]
    TooFewClasses,
    #[error("duplicate class id {0}")]
    DuplicateClassId(ClassId),
    #[error("submission {id}: {reason}")]
    InvalidSubmission { id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventClass {
    pub id: ClassId,
    pub name: String,
    #[serde(default)]
    pub is_normal: bool,
}

/// The M event classes a deployment can recognise. Exactly one of them is
/// the "normal everyday photo" class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EventClass>", into = "Vec<EventClass>")]
pub struct ClassRegistry {
    classes: Vec<EventClass>,
}

impl ClassRegistry {
    pub fn new(mut classes: Vec<EventClass>) -> Result<Self, ModelError> {
        if classes.len() < 2 {
            return Err(ModelError::TooFewClasses);
        }
        classes.sort_by_key(|c| c.id);
        for pair in classes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(ModelError::DuplicateClassId(pair[0].id));
            }
        }
        let normals = classes.iter().filter(|c| c.is_normal).count();
        if normals != 1 {
            return Err(ModelError::NormalClassCount(normals));
        }
        Ok(Self { classes })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, id: ClassId) -> Option<&EventClass> {
        self.classes
            .binary_search_by_key(&id, |c| c.id)
            .ok()
            .map(|i| &self.classes[i])
    }

    pub fn contains(&self, id: ClassId) -> bool {
        self.get(id).is_some()
    }

    pub fn normal(&self) -> ClassId {
        self.classes
            .iter()
            .find(|c| c.is_normal)
            .map(|c| c.id)
            .expect("registry invariant: one normal class")
    }

    pub fn is_normal(&self, id: ClassId) -> bool {
        self.normal() == id
    }

    /// Class ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.iter().map(|c| c.id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventClass> {
        self.classes.iter()
    }

    pub fn by_name(&self, name: &str) -> Option<&EventClass> {
        self.classes.iter().find(|c| c.name == name)
    }
}

impl Default for ClassRegistry {
    /// fire, flood, damaged_infrastructure and normal.
    fn default() -> Self {
        let names = ["fire", "flood", "damaged_infrastructure", "normal"];
        let classes = names
            .iter()
            .enumerate()
            .map(|(i, name)| EventClass {
                id: i as ClassId,
                name: (*name).to_string(),
                is_normal: *name == "normal",
            })
            .collect();
        Self::new(classes).expect("default registry is valid")
    }
}

impl TryFrom<Vec<EventClass>> for ClassRegistry {
    type Error = ModelError;

    fn try_from(classes: Vec<EventClass>) -> Result<Self, Self::Error> {
        Self::new(classes)
    }
}

impl From<ClassRegistry> for Vec<EventClass> {
    fn from(registry: ClassRegistry) -> Self {
        registry.classes
    }
}

#[derive(Debug, Deserialize)]
struct RawGeoPoint {
    lat: f64,
    lon: f64,
}

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, ModelError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(ModelError::Latitude(lat));
        }
        if !(lon > -180.0 && lon <= 180.0) {
            return Err(ModelError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = ModelError;

    fn try_from(raw: RawGeoPoint) -> Result<Self, Self::Error> {
        Self::new(raw.lat, raw.lon)
    }
}

/// Precomputed local feature descriptors of one photo. May be empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct KeypointDescriptorSet {
    descriptors: Vec<Vec<f64>>,
}

impl KeypointDescriptorSet {
    pub fn new(descriptors: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        if let Some(first) = descriptors.first() {
            let expected = first.len();
            for (index, d) in descriptors.iter().enumerate() {
                if d.len() != expected {
                    return Err(ModelError::DescriptorDimension {
                        index,
                        expected,
                        found: d.len(),
                    });
                }
                if d.iter().any(|x| !x.is_finite()) {
                    return Err(ModelError::NonFiniteDescriptor(index));
                }
            }
        }
        Ok(Self { descriptors })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Descriptor dimension, `None` for an empty set.
    pub fn dim(&self) -> Option<usize> {
        self.descriptors.first().map(Vec::len)
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[Vec<f64>] {
        &self.descriptors
    }
}

impl TryFrom<Vec<Vec<f64>>> for KeypointDescriptorSet {
    type Error = ModelError;

    fn try_from(descriptors: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Self::new(descriptors)
    }
}

impl From<KeypointDescriptorSet> for Vec<Vec<f64>> {
    fn from(set: KeypointDescriptorSet) -> Self {
        set.descriptors
    }
}

/// One worker upload: context metadata plus precomputed photo features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub submission_id: String,
    pub task_id: String,
    pub worker_id: String,
    pub captured_at: Timestamp,
    pub location: GeoPoint,
    #[serde(default)]
    pub keypoints: KeypointDescriptorSet,
    pub global_feature: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumbnail_ref: Option<String>,
}

impl Submission {
    /// Checks the payload against the deployment's feature dimensions.
    pub fn check_shape(&self, feature_dim: usize, descriptor_dim: usize) -> Result<(), ModelError> {
        let fail = |reason: String| ModelError::InvalidSubmission {
            id: self.submission_id.clone(),
            reason,
        };
        if self.submission_id.is_empty() {
            return Err(fail("empty submission_id".into()));
        }
        if self.global_feature.len() != feature_dim {
            return Err(fail(format!(
                "global_feature has dimension {}, expected {feature_dim}",
                self.global_feature.len()
            )));
        }
        if self.global_feature.iter().any(|x| !x.is_finite()) {
            return Err(fail("global_feature has a non-finite component".into()));
        }
        if let Some(dim) = self.keypoints.dim() {
            if dim != descriptor_dim {
                return Err(fail(format!(
                    "keypoint descriptors have dimension {dim}, expected {descriptor_dim}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConstraintKind {
    Time,
    Position,
    Visual,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::Time => "TIME",
            ConstraintKind::Position => "POSITION",
            ConstraintKind::Visual => "VISUAL",
        })
    }
}

/// One similarity layer of the A-tree.
///
/// Threshold units: seconds for `Time`, kilometres for `Position`, minimum
/// matched keypoints for `Visual`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintLayerSpec {
    pub kind: ConstraintKind,
    pub threshold: f64,
}

impl ConstraintLayerSpec {
    pub fn time(seconds: f64) -> Self {
        Self {
            kind: ConstraintKind::Time,
            threshold: seconds,
        }
    }

    pub fn position(km: f64) -> Self {
        Self {
            kind: ConstraintKind::Position,
            threshold: km,
        }
    }

    pub fn visual(min_matches: u32) -> Self {
        Self {
            kind: ConstraintKind::Visual,
            threshold: f64::from(min_matches),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskMode {
    Online,
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RepresentativePolicy {
    First,
    #[default]
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub name: String,
    pub mode: TaskMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_class: Option<ClassId>,
    pub layers: Vec<ConstraintLayerSpec>,
    pub opened_at: Timestamp,
    pub deadline: Timestamp,
    #[serde(default)]
    pub representative_policy: RepresentativePolicy,
    pub state: TaskStatus,
}

impl Task {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn is_open(&self) -> bool {
        self.state == TaskStatus::Open
    }

    pub fn accepts_time(&self, t: Timestamp) -> bool {
        (self.opened_at..=self.deadline).contains(&t)
    }

    pub fn to_spec(&self) -> TaskSpec {
        TaskSpec {
            task_id: Some(self.task_id.clone()),
            name: self.name.clone(),
            mode: self.mode,
            expected_class: self.expected_class,
            layers: self
                .layers
                .iter()
                .map(|l| LayerInput {
                    kind: l.kind,
                    threshold: Some(l.threshold),
                })
                .collect(),
            opened_at: Some(self.opened_at),
            deadline: self.deadline,
            representative_policy: Some(self.representative_policy),
        }
    }
}

/// A layer as written by a requester; the threshold may be left to its default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerInput {
    pub kind: ConstraintKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

/// Raw task description, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    #[serde(default)]
    pub name: String,
    pub mode: TaskMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_class: Option<ClassId>,
    pub layers: Vec<LayerInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opened_at: Option<Timestamp>,
    pub deadline: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representative_policy: Option<RepresentativePolicy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Violation {
    MissingTaskId,
    MissingOpenedAt,
    MissingExpectedClass,
    NormalExpectedClass {
        class: ClassId,
    },
    UnknownExpectedClass {
        class: ClassId,
    },
    NoLayers,
    DuplicateLayerKind {
        kind: ConstraintKind,
    },
    MissingThreshold {
        kind: ConstraintKind,
    },
    NonPositiveThreshold {
        kind: ConstraintKind,
        threshold: f64,
    },
    NonIntegerThreshold {
        kind: ConstraintKind,
        threshold: f64,
    },
    DeadlineNotAfterOpen {
        opened_at: Timestamp,
        deadline: Timestamp,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingTaskId => write!(f, "missing task_id"),
            Violation::MissingOpenedAt => write!(f, "missing opened_at"),
            Violation::MissingExpectedClass => write!(f, "missing expected_class"),
            Violation::NormalExpectedClass { class } => {
                write!(f, "expected_class {class} is the normal class")
            }
            Violation::UnknownExpectedClass { class } => {
                write!(f, "expected_class {class} is not registered")
            }
            Violation::NoLayers => write!(f, "at least one constraint layer is required"),
            Violation::DuplicateLayerKind { kind } => write!(f, "duplicate layer kind {kind}"),
            Violation::MissingThreshold { kind } => write!(f, "missing threshold for {kind} layer"),
            Violation::NonPositiveThreshold { kind, threshold } => {
                write!(f, "{kind} threshold {threshold} must be positive")
            }
            Violation::NonIntegerThreshold { kind, threshold } => {
                write!(f, "{kind} threshold {threshold} must be a positive integer")
            }
            Violation::DeadlineNotAfterOpen {
                opened_at,
                deadline,
            } => write!(f, "deadline {deadline} is not after opened_at {opened_at}"),
        }
    }
}

/// Structured rejection listing every violated invariant.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("invalid task: {}", join_violations(.violations))]
pub struct TaskRejection {
    pub violations: Vec<Violation>,
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedTask {
    pub task: Task,
    pub warnings: Vec<String>,
}

/// Deployment knobs consulted by [`validate_task`].
#[derive(Debug, Clone)]
pub struct ValidationContext<'a> {
    pub classes: &'a ClassRegistry,
    /// Threshold for a `VISUAL` layer given without one.
    pub default_min_matches: u32,
}

/// Validates a raw task description. Offline tasks carrying an
/// `expected_class` are accepted with the class dropped and a warning.
pub fn validate_task(
    spec: &TaskSpec,
    ctx: &ValidationContext<'_>,
) -> Result<ValidatedTask, TaskRejection> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    let task_id = match &spec.task_id {
        Some(id) if !id.is_empty() => id.clone(),
        _ => {
            violations.push(Violation::MissingTaskId);
            String::new()
        }
    };
    let opened_at = spec.opened_at.unwrap_or_else(|| {
        violations.push(Violation::MissingOpenedAt);
        0
    });

    let expected_class = match (spec.mode, spec.expected_class) {
        (TaskMode::Online, None) => {
            violations.push(Violation::MissingExpectedClass);
            None
        }
        (TaskMode::Online, Some(class)) => {
            if !ctx.classes.contains(class) {
                violations.push(Violation::UnknownExpectedClass { class });
            } else if ctx.classes.is_normal(class) {
                violations.push(Violation::NormalExpectedClass { class });
            }
            Some(class)
        }
        (TaskMode::Offline, Some(class)) => {
            warnings.push(format!(
                "expected_class {class} ignored: offline tasks determine the event class by vote"
            ));
            None
        }
        (TaskMode::Offline, None) => None,
    };

    if spec.layers.is_empty() {
        violations.push(Violation::NoLayers);
    }
    let mut seen = BTreeSet::new();
    let mut layers = Vec::with_capacity(spec.layers.len());
    for input in &spec.layers {
        if !seen.insert(input.kind) {
            violations.push(Violation::DuplicateLayerKind { kind: input.kind });
            continue;
        }
        let threshold = match (input.kind, input.threshold) {
            (ConstraintKind::Visual, None) => f64::from(ctx.default_min_matches),
            (kind, None) => {
                violations.push(Violation::MissingThreshold { kind });
                continue;
            }
            (_, Some(t)) => t,
        };
        if !threshold.is_finite() || threshold <= 0.0 {
            violations.push(Violation::NonPositiveThreshold {
                kind: input.kind,
                threshold,
            });
            continue;
        }
        if input.kind == ConstraintKind::Visual && threshold.fract() != 0.0 {
            violations.push(Violation::NonIntegerThreshold {
                kind: input.kind,
                threshold,
            });
            continue;
        }
        layers.push(ConstraintLayerSpec {
            kind: input.kind,
            threshold,
        });
    }

    if spec.opened_at.is_some() && spec.deadline <= opened_at {
        violations.push(Violation::DeadlineNotAfterOpen {
            opened_at,
            deadline: spec.deadline,
        });
    }

    if !violations.is_empty() {
        return Err(TaskRejection { violations });
    }
    Ok(ValidatedTask {
        task: Task {
            task_id,
            name: spec.name.clone(),
            mode: spec.mode,
            expected_class,
            layers,
            opened_at,
            deadline: spec.deadline,
            representative_policy: spec.representative_policy.unwrap_or_default(),
            state: TaskStatus::Open,
        },
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accepted,
    RejectedFalse,
    Deferred,
}

/// Outcome of photo type prediction for one submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub submission_id: String,
    pub predicted_class: ClassId,
    pub confidence: f64,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Handover artifact delivered to the requester when a task closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub task_id: String,
    pub determined_class: ClassId,
    /// Set when an offline vote was won by the normal class.
    pub no_event: bool,
    pub representatives: Vec<String>,
    pub group_sizes: Vec<usize>,
    pub redundancy_ratio: f64,
    pub total_accepted: usize,
    pub rejected_false: usize,
}

/// Fraction of accepted submissions that are not forwarded.
pub fn redundancy_ratio(total_accepted: usize, groups: usize) -> f64 {
    if total_accepted == 0 {
        0.0
    } else {
        (total_accepted - groups) as f64 / total_accepted as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(classes: &ClassRegistry) -> ValidationContext<'_> {
        ValidationContext {
            classes,
            default_min_matches: 10,
        }
    }

    fn spec(
        mode: TaskMode,
        expected: Option<ClassId>,
        layers: &[(ConstraintKind, f64)],
    ) -> TaskSpec {
        TaskSpec {
            task_id: Some("t1".into()),
            name: "wildfire".into(),
            mode,
            expected_class: expected,
            layers: layers
                .iter()
                .map(|&(kind, t)| LayerInput {
                    kind,
                    threshold: Some(t),
                })
                .collect(),
            opened_at: Some(1_000),
            deadline: 5_000,
            representative_policy: None,
        }
    }

    use ConstraintKind::*;

    #[test]
    fn default_registry_has_four_classes_one_normal() {
        let reg = ClassRegistry::default();
        assert_eq!(reg.len(), 4);
        assert_eq!(reg.normal(), 3);
        assert_eq!(reg.by_name("fire").unwrap().id, 0);
        assert_eq!(reg.by_name("damaged_infrastructure").unwrap().id, 2);
    }

    #[test]
    fn registry_rejects_two_normals() {
        let classes = vec![
            EventClass {
                id: 0,
                name: "a".into(),
                is_normal: true,
            },
            EventClass {
                id: 1,
                name: "b".into(),
                is_normal: true,
            },
        ];
        assert_eq!(
            ClassRegistry::new(classes),
            Err(ModelError::NormalClassCount(2))
        );
    }

    #[test]
    fn geopoint_ranges() {
        assert!(GeoPoint::new(90.0, 180.0).is_ok());
        assert!(GeoPoint::new(-90.0, -179.999).is_ok());
        assert!(GeoPoint::new(90.1, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.0).is_err());
        assert!(serde_json::from_str::<GeoPoint>(r#"{"lat": 0, "lon": 200}"#).is_err());
    }

    #[test]
    fn descriptor_set_rejects_ragged_and_nan() {
        assert!(KeypointDescriptorSet::new(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(KeypointDescriptorSet::new(vec![vec![f64::NAN]]).is_err());
        let empty = KeypointDescriptorSet::new(vec![]).unwrap();
        assert_eq!(empty.dim(), None);
        assert!(serde_json::from_str::<KeypointDescriptorSet>("[[1.0],[2.0,3.0]]").is_err());
    }

    #[test]
    fn online_three_layer_task_is_valid() {
        let reg = ClassRegistry::default();
        let v = validate_task(
            &spec(
                TaskMode::Online,
                Some(0),
                &[(Time, 300.0), (Position, 0.5), (Visual, 10.0)],
            ),
            &ctx(&reg),
        )
        .unwrap();
        assert_eq!(v.task.depth(), 3);
        assert_eq!(v.task.representative_policy, RepresentativePolicy::Last);
        assert_eq!(v.task.state, TaskStatus::Open);
        assert!(v.warnings.is_empty());
    }

    #[test]
    fn online_without_expected_class() {
        let reg = ClassRegistry::default();
        let err =
            validate_task(&spec(TaskMode::Online, None, &[(Time, 300.0)]), &ctx(&reg)).unwrap_err();
        assert_eq!(err.violations, vec![Violation::MissingExpectedClass]);
        assert!(err.to_string().contains("missing expected_class"));
    }

    #[test]
    fn duplicate_layer_kind() {
        let reg = ClassRegistry::default();
        let err = validate_task(
            &spec(TaskMode::Online, Some(0), &[(Time, 300.0), (Time, 600.0)]),
            &ctx(&reg),
        )
        .unwrap_err();
        assert_eq!(
            err.violations,
            vec![Violation::DuplicateLayerKind { kind: Time }]
        );
        assert!(err.to_string().contains("duplicate layer kind"));
    }

    #[test]
    fn every_violation_is_listed() {
        let reg = ClassRegistry::default();
        let mut s = spec(
            TaskMode::Online,
            Some(3),
            &[(Time, 0.0), (Position, -1.0), (Visual, 2.5)],
        );
        s.deadline = 1_000;
        let err = validate_task(&s, &ctx(&reg)).unwrap_err();
        assert_eq!(err.violations.len(), 5, "{err}");
    }

    #[test]
    fn visual_threshold_defaults_to_ten() {
        let reg = ClassRegistry::default();
        let mut s = spec(TaskMode::Online, Some(1), &[]);
        s.layers.push(LayerInput {
            kind: Visual,
            threshold: None,
        });
        let v = validate_task(&s, &ctx(&reg)).unwrap();
        assert_eq!(v.task.layers, vec![ConstraintLayerSpec::visual(10)]);
    }

    #[test]
    fn offline_expected_class_dropped_with_warning() {
        let reg = ClassRegistry::default();
        let v = validate_task(
            &spec(TaskMode::Offline, Some(0), &[(Time, 60.0)]),
            &ctx(&reg),
        )
        .unwrap();
        assert_eq!(v.task.expected_class, None);
        assert_eq!(v.warnings.len(), 1);
    }

    #[test]
    fn validation_is_idempotent() {
        let reg = ClassRegistry::default();
        let first = validate_task(
            &spec(
                TaskMode::Online,
                Some(2),
                &[(Visual, 10.0), (Position, 0.5)],
            ),
            &ctx(&reg),
        )
        .unwrap()
        .task;
        let second = validate_task(&first.to_spec(), &ctx(&reg)).unwrap();
        assert_eq!(first, second.task);
        assert!(second.warnings.is_empty());
    }

    #[test]
    fn redundancy_formula() {
        assert_eq!(redundancy_ratio(0, 0), 0.0);
        assert!((redundancy_ratio(3, 2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn wire_names() {
        let json = serde_json::to_string(&ConstraintLayerSpec::time(300.0)).unwrap();
        assert_eq!(json, r#"{"kind":"TIME","threshold":300.0}"#);
        assert_eq!(
            serde_json::to_string(&Decision::RejectedFalse).unwrap(),
            r#""REJECTED_FALSE""#
        );
    }
}
