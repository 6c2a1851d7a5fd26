//! Synthetic submission streams with ground truth, and an end-to-end
//! evaluation that runs them through the platform.
//!
//! A scenario is a list of planned duplicate clusters. Every cluster has a
//! capture-time centre, a position centre and a base keypoint set; its
//! members are jittered copies. Clusters either share a centre on a layer or
//! sit at least `separation` apart on it, and jitter stays well inside the
//! thresholds, so on every layer similarity is all-or-nothing between two
//! clusters. That makes the right grouping known in advance and independent
//! of both stream order and layer order.
//!
//! False submissions are ordinary cluster members whose global feature is
//! drawn near another class's centroid. While the false count leaves room,
//! every cluster keeps at least one true member.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AggregationReport, ClassId, ClassRegistry, ConstraintKind, ConstraintLayerSpec, Decision,
    GeoPoint, KeypointDescriptorSet, LayerInput, RepresentativePolicy, Submission, TaskMode,
    TaskSpec, Timestamp, DEFAULT_DESCRIPTOR_DIM, DEFAULT_FEATURE_DIM,
};
use crate::oracle::{score_tree, CoverageSummary, MAX_ORACLE_VERTICES};
use crate::ptp::{ClassifierModel, RetryPolicy};
use crate::service::{Platform, ServiceError, Settings};
use crate::similarity::{
    haversine_km, layer_similar, mutual_match_count, DEFAULT_MATCH_RATIO, EARTH_RADIUS_KM,
};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("generated stream breaks its guarantee: {0}")]
    GuaranteeBroken(String),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub size: usize,
    pub center: GeoPoint,
    pub center_time: Timestamp,
    /// Clusters with the same key share a generated base keypoint set.
    #[serde(default)]
    pub visual_key: u32,
    /// Explicit base set; overrides `visual_key`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_descriptors: Option<KeypointDescriptorSet>,
}

/// Per-kind noise applied to cluster members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub seconds: f64,
    pub km: f64,
    /// Half-width of the uniform noise added to each descriptor component.
    pub descriptor: f64,
}

/// Minimum distance between distinct cluster centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub seconds: f64,
    pub km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub n_workers: usize,
    pub n_submissions: usize,
    pub true_class: ClassId,
    #[serde(default)]
    pub false_rate: f64,
    #[serde(default = "default_mode")]
    pub mode: TaskMode,
    #[serde(default)]
    pub representative_policy: RepresentativePolicy,
    pub layers: Vec<ConstraintLayerSpec>,
    pub clusters: Vec<ClusterPlan>,
    pub jitter: Jitter,
    pub separation: Separation,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    #[serde(default = "default_descriptors_per_photo")]
    pub descriptors_per_photo: usize,
    #[serde(default = "default_descriptor_dim")]
    pub descriptor_dim: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_feature_noise")]
    pub feature_noise: f64,
    #[serde(default = "default_match_ratio")]
    pub match_ratio: f64,
}

fn default_workers() -> usize {
    10
}
fn default_mode() -> TaskMode {
    TaskMode::Online
}
fn default_safety() -> f64 {
    2.0
}
fn default_descriptors_per_photo() -> usize {
    20
}
fn default_descriptor_dim() -> usize {
    DEFAULT_DESCRIPTOR_DIM
}
fn default_feature_dim() -> usize {
    DEFAULT_FEATURE_DIM
}
fn default_feature_noise() -> f64 {
    0.05
}
fn default_match_ratio() -> f64 {
    DEFAULT_MATCH_RATIO
}

/// Ground truth for one generated submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub submission_id: String,
    pub cluster: usize,
    pub class: ClassId,
    pub is_false: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub classes: ClassRegistry,
    pub model: ClassifierModel,
    /// Submissions in generated stream order.
    pub submissions: Vec<Submission>,
    pub labels: Vec<Label>,
    pub opened_at: Timestamp,
    pub deadline: Timestamp,
}

fn layer(spec: &ScenarioSpec, kind: ConstraintKind) -> Option<&ConstraintLayerSpec> {
    spec.layers.iter().find(|l| l.kind == kind)
}

fn base_set(seed: u64, key: u32, count: usize, dim: usize) -> KeypointDescriptorSet {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (u64::from(key) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let descriptors = (0..count)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    KeypointDescriptorSet::new(descriptors).expect("generated descriptors are uniform")
}

/// Point at `km` kilometres from `origin` along `bearing` radians (flat-earth
/// step, accurate far below the thresholds involved).
fn offset(origin: GeoPoint, km: f64, bearing: f64) -> GeoPoint {
    let deg_per_km = (1.0 / EARTH_RADIUS_KM).to_degrees();
    let lat = origin.lat() + km * bearing.cos() * deg_per_km;
    let lon = origin.lon() + km * bearing.sin() * deg_per_km / origin.lat().to_radians().cos();
    GeoPoint::new(lat.clamp(-90.0, 90.0), lon).expect("offset stays in range")
}

fn check_spec(
    spec: &ScenarioSpec,
    classes: &ClassRegistry,
    model: &ClassifierModel,
) -> Result<(), SimulatorError> {
    let fail = |m: String| Err(SimulatorError::Infeasible(m));
    if spec.clusters.is_empty() {
        return fail("no clusters planned".into());
    }
    if spec.clusters.iter().any(|c| c.size == 0) {
        return fail("empty cluster in plan".into());
    }
    let total: usize = spec.clusters.iter().map(|c| c.size).sum();
    if total != spec.n_submissions {
        return fail(format!(
            "cluster sizes sum to {total}, n_submissions is {}",
            spec.n_submissions
        ));
    }
    if spec.n_workers == 0 {
        return fail("n_workers must be positive".into());
    }
    if !(0.0..=1.0).contains(&spec.false_rate) {
        return fail(format!("false_rate {} outside [0, 1]", spec.false_rate));
    }
    if !classes.contains(spec.true_class) || classes.is_normal(spec.true_class) {
        return fail(format!(
            "true_class {} must be a registered event class",
            spec.true_class
        ));
    }
    if spec.safety_factor < 2.0 {
        return fail(format!("safety factor {} below 2", spec.safety_factor));
    }
    let s = spec.safety_factor;
    let j = spec.jitter;
    if let Some(l) = layer(spec, ConstraintKind::Time) {
        if 2.0 * j.seconds * s > l.threshold {
            return fail(format!(
                "time jitter {} too wide for threshold {}",
                j.seconds, l.threshold
            ));
        }
        if spec.separation.seconds - 2.0 * j.seconds < s * l.threshold {
            return fail(format!(
                "time separation {} too narrow",
                spec.separation.seconds
            ));
        }
    }
    if let Some(l) = layer(spec, ConstraintKind::Position) {
        if 2.0 * j.km * s > l.threshold {
            return fail(format!(
                "position jitter {} too wide for threshold {}",
                j.km, l.threshold
            ));
        }
        if spec.separation.km - 2.0 * j.km < s * l.threshold {
            return fail(format!(
                "position separation {} too narrow",
                spec.separation.km
            ));
        }
    }
    if let Some(l) = layer(spec, ConstraintKind::Visual) {
        if (spec.descriptors_per_photo as f64) < s * l.threshold {
            return fail(format!(
                "{} descriptors per photo cannot carry {} matches with safety {s}",
                spec.descriptors_per_photo, l.threshold
            ));
        }
    }
    // centre-to-centre noise must stay under half the centroid gap
    let min_gap = model
        .centroids()
        .flat_map(|(a, ca)| {
            model
                .centroids()
                .filter(move |(b, _)| *b > a)
                .map(move |(_, cb)| {
                    ca.iter()
                        .zip(cb)
                        .map(|(x, y)| (x - y).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
        })
        .fold(f64::INFINITY, f64::min);
    let noise_norm = spec.feature_noise * (spec.feature_dim as f64).sqrt();
    if noise_norm * s > min_gap / 2.0 {
        return fail(format!(
            "feature noise {} too large for centroid gap {min_gap}",
            spec.feature_noise
        ));
    }
    for (a, ca) in spec.clusters.iter().enumerate() {
        for (b, cb) in spec.clusters.iter().enumerate().skip(a + 1) {
            let dt = (ca.center_time - cb.center_time).abs() as f64;
            if dt != 0.0
                && dt < spec.separation.seconds
                && layer(spec, ConstraintKind::Time).is_some()
            {
                return fail(format!(
                    "clusters {a} and {b} have time centres {dt} s apart"
                ));
            }
            let dk = haversine_km(ca.center, cb.center);
            if dk != 0.0
                && dk < spec.separation.km
                && layer(spec, ConstraintKind::Position).is_some()
            {
                return fail(format!(
                    "clusters {a} and {b} have position centres {dk} km apart"
                ));
            }
        }
    }
    Ok(())
}

/// Generates the stream for `spec`, then checks it against the promised
/// margins.
pub fn generate(spec: &ScenarioSpec, classes: &ClassRegistry) -> Result<Scenario, SimulatorError> {
    let model = ClassifierModel::block_centroids(classes, spec.feature_dim, 1.0)
        .map_err(|e| SimulatorError::Infeasible(e.to_string()))?;
    check_spec(spec, classes, &model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let bases: Vec<KeypointDescriptorSet> = spec
        .clusters
        .iter()
        .map(|c| {
            c.base_descriptors.clone().unwrap_or_else(|| {
                base_set(
                    spec.seed,
                    c.visual_key,
                    spec.descriptors_per_photo,
                    spec.descriptor_dim,
                )
            })
        })
        .collect();

    let n = spec.n_submissions;
    let n_false = (spec.false_rate * n as f64).round() as usize;
    // first slot of each cluster stays true whenever the budget allows
    let keepers: BTreeSet<usize> = spec
        .clusters
        .iter()
        .scan(0, |start, c| {
            let first = *start;
            *start += c.size;
            Some(first)
        })
        .collect();
    let mut candidates: Vec<usize> = if n_false <= n - keepers.len() {
        (0..n).filter(|i| !keepers.contains(i)).collect()
    } else {
        (0..n).collect()
    };
    candidates.shuffle(&mut rng);
    let mut falseness = vec![false; n];
    for &i in &candidates[..n_false] {
        falseness[i] = true;
    }
    let wrong_classes: Vec<ClassId> = classes.ids().filter(|&c| c != spec.true_class).collect();

    let mut drafts = Vec::with_capacity(n);
    let mut slot = 0;
    for (cluster, plan) in spec.clusters.iter().enumerate() {
        for _ in 0..plan.size {
            let is_false = falseness[slot];
            slot += 1;
            let class = if is_false {
                wrong_classes[rng.random_range(0..wrong_classes.len())]
            } else {
                spec.true_class
            };
            let centroid = model.centroid(class).expect("model covers every class");
            let global_feature = centroid
                .iter()
                .map(|c| c + rng.random_range(-spec.feature_noise..=spec.feature_noise))
                .collect();
            let dt = rng
                .random_range(-spec.jitter.seconds..=spec.jitter.seconds)
                .round() as Timestamp;
            let location = offset(
                plan.center,
                rng.random_range(0.0..=spec.jitter.km),
                rng.random_range(0.0..std::f64::consts::TAU),
            );
            let jd = spec.jitter.descriptor;
            let keypoints = KeypointDescriptorSet::new(
                bases[cluster]
                    .descriptors()
                    .iter()
                    .map(|d| {
                        d.iter()
                            .map(|x| {
                                if jd > 0.0 {
                                    x + rng.random_range(-jd..=jd)
                                } else {
                                    *x
                                }
                            })
                            .collect()
                    })
                    .collect(),
            )
            .expect("perturbed descriptors stay uniform");
            let worker = rng.random_range(0..spec.n_workers);
            drafts.push((
                cluster,
                class,
                is_false,
                plan.center_time + dt,
                location,
                keypoints,
                global_feature,
                worker,
            ));
        }
    }
    drafts.shuffle(&mut rng);

    let task_id = format!("sim-{}", spec.seed);
    let mut submissions = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, (cluster, class, is_false, captured_at, location, keypoints, global_feature, worker)) in
        drafts.into_iter().enumerate()
    {
        let submission_id = format!("s{i:03}");
        labels.push(Label {
            submission_id: submission_id.clone(),
            cluster,
            class,
            is_false,
        });
        submissions.push(Submission {
            submission_id,
            task_id: task_id.clone(),
            worker_id: format!("worker-{worker}"),
            captured_at,
            location,
            keypoints,
            global_feature,
            thumbnail_ref: None,
        });
    }
    let opened_at = submissions.iter().map(|s| s.captured_at).min().unwrap_or(0) - 1;
    let deadline = submissions.iter().map(|s| s.captured_at).max().unwrap_or(0) + 1;

    let scenario = Scenario {
        spec: spec.clone(),
        classes: classes.clone(),
        model,
        submissions,
        labels,
        opened_at,
        deadline,
    };
    scenario.verify_margins()?;
    Ok(scenario)
}

impl Scenario {
    pub fn task_id(&self) -> String {
        format!("sim-{}", self.spec.seed)
    }

    pub fn cluster_count(&self) -> usize {
        self.spec.clusters.len()
    }

    fn same_center(&self, kind: ConstraintKind, a: usize, b: usize) -> bool {
        let (ca, cb) = (&self.spec.clusters[a], &self.spec.clusters[b]);
        match kind {
            ConstraintKind::Time => ca.center_time == cb.center_time,
            ConstraintKind::Position => ca.center == cb.center,
            ConstraintKind::Visual => match (&ca.base_descriptors, &cb.base_descriptors) {
                (None, None) => ca.visual_key == cb.visual_key,
                (Some(x), Some(y)) => x == y,
                _ => false,
            },
        }
    }

    /// Within a cluster every pair is similar on every layer; across
    /// clusters each layer is similar exactly when the centres coincide, and
    /// at least one layer separates any two clusters.
    pub fn verify_margins(&self) -> Result<(), SimulatorError> {
        let spec = &self.spec;
        let k_min = layer(spec, ConstraintKind::Visual).map(|l| l.threshold);
        let subs = &self.submissions;
        for i in 0..subs.len() {
            for j in i + 1..subs.len() {
                let (ci, cj) = (self.labels[i].cluster, self.labels[j].cluster);
                let mut separated = false;
                for l in &spec.layers {
                    let similar = layer_similar(l, &subs[i], &subs[j], spec.match_ratio);
                    let expect = ci == cj || self.same_center(l.kind, ci, cj);
                    if similar != expect {
                        return Err(SimulatorError::GuaranteeBroken(format!(
                            "{} and {} {} on {} layer",
                            subs[i].submission_id,
                            subs[j].submission_id,
                            if similar { "similar" } else { "dissimilar" },
                            l.kind
                        )));
                    }
                    if l.kind == ConstraintKind::Visual && !expect {
                        let m = mutual_match_count(
                            &subs[i].keypoints,
                            &subs[j].keypoints,
                            spec.match_ratio,
                        ) as f64;
                        if m > k_min.unwrap_or(0.0) / 2.0 {
                            return Err(SimulatorError::GuaranteeBroken(format!(
                                "{m} cross-cluster matches between {} and {}",
                                subs[i].submission_id, subs[j].submission_id
                            )));
                        }
                    }
                    separated |= !similar;
                }
                if ci != cj && !separated {
                    return Err(SimulatorError::GuaranteeBroken(format!(
                        "clusters {ci} and {cj} are indistinguishable"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Clusters with at least one member of the true class.
    pub fn ground_truth_groups(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| !l.is_false)
            .map(|l| l.cluster)
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// True-class members grouped by planned cluster.
    pub fn ground_truth_partition(&self) -> BTreeSet<BTreeSet<String>> {
        let mut by_cluster: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for l in self.labels.iter().filter(|l| !l.is_false) {
            by_cluster
                .entry(l.cluster)
                .or_default()
                .insert(l.submission_id.clone());
        }
        by_cluster.into_values().collect()
    }

    pub fn task_spec(&self, layers: &[ConstraintLayerSpec]) -> TaskSpec {
        TaskSpec {
            task_id: Some(self.task_id()),
            name: format!("scenario {}", self.spec.seed),
            mode: self.spec.mode,
            expected_class: (self.spec.mode == TaskMode::Online).then_some(self.spec.true_class),
            layers: layers
                .iter()
                .map(|l| LayerInput {
                    kind: l.kind,
                    threshold: Some(l.threshold),
                })
                .collect(),
            opened_at: Some(self.opened_at),
            deadline: self.deadline,
            representative_policy: Some(self.spec.representative_policy),
        }
    }

    /// Runs the generated stream as-is.
    pub fn evaluate(&self) -> Result<Evaluation, SimulatorError> {
        let order: Vec<usize> = (0..self.submissions.len()).collect();
        self.evaluate_with(&order, &self.spec.layers)
    }

    /// Runs the stream in `order` (indices into `submissions`) against a task
    /// using `layers`.
    pub fn evaluate_with(
        &self,
        order: &[usize],
        layers: &[ConstraintLayerSpec],
    ) -> Result<Evaluation, SimulatorError> {
        let settings = Settings {
            classes: self.classes.clone(),
            match_ratio: self.spec.match_ratio,
            default_min_matches: crate::similarity::DEFAULT_MIN_MATCHES,
            feature_dim: self.spec.feature_dim,
            descriptor_dim: self.spec.descriptor_dim,
            retry: RetryPolicy::default(),
        };
        let opened_at = self.opened_at;
        let platform = Platform::in_memory(
            settings,
            Arc::new(self.model.clone()),
            Arc::new(move || opened_at),
        );
        let task_id = platform.create_task(self.task_spec(layers))?.task_id;
        let mut decisions = BTreeMap::new();
        for &i in order {
            let s = &self.submissions[i];
            let receipt = platform.submit(&task_id, s.clone())?;
            decisions.insert(s.submission_id.clone(), receipt.decision);
        }
        let report = platform.close_task(&task_id)?;
        let final_decisions: BTreeMap<String, Decision> = platform
            .status(&task_id)?
            .verdicts
            .into_iter()
            .map(|v| (v.submission_id, v.decision))
            .collect();
        let (partition, coverage) = platform.with_task(&task_id, |state| {
            let coverage = (state.tree.len() <= MAX_ORACLE_VERTICES)
                .then(|| score_tree(&state.tree).ok())
                .flatten();
            (state.tree.partition(), coverage)
        })?;

        let injected_false = self.labels.iter().filter(|l| l.is_false).count();
        let rejected =
            |l: &Label| final_decisions.get(&l.submission_id) == Some(&Decision::RejectedFalse);
        let false_rejected = self
            .labels
            .iter()
            .filter(|l| l.is_false && rejected(l))
            .count();
        let true_rejected = self
            .labels
            .iter()
            .filter(|l| !l.is_false && rejected(l))
            .count();
        let metrics = Metrics {
            seed: self.spec.seed,
            n_submissions: self.submissions.len(),
            n_accepted: report.total_accepted,
            injected_false,
            rejected_false: report.rejected_false,
            true_rejected,
            false_rejection_accuracy: if injected_false == 0 {
                1.0
            } else {
                false_rejected as f64 / injected_false as f64
            },
            groups_found: report.representatives.len(),
            ground_truth_groups: self.ground_truth_groups(),
            redundancy_ratio: report.redundancy_ratio,
            coverage_ratio: coverage.as_ref().and_then(|c| c.coverage_ratio),
        };
        Ok(Evaluation {
            metrics,
            report,
            partition,
            coverage,
            online_decisions: decisions,
        })
    }
}

/// Generates and evaluates in one step.
pub fn evaluate(
    spec: &ScenarioSpec,
    classes: &ClassRegistry,
) -> Result<Evaluation, SimulatorError> {
    generate(spec, classes)?.evaluate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub n_submissions: usize,
    pub n_accepted: usize,
    pub injected_false: usize,
    pub rejected_false: usize,
    pub true_rejected: usize,
    pub false_rejection_accuracy: f64,
    pub groups_found: usize,
    pub ground_truth_groups: usize,
    pub redundancy_ratio: f64,
    pub coverage_ratio: Option<f64>,
}

impl Metrics {
    pub fn table_header() -> String {
        format!(
            "{:>8} {:>5} {:>8} {:>6} {:>8} {:>8} {:>7} {:>7} {:>10} {:>9}",
            "seed",
            "n",
            "accepted",
            "false",
            "rejected",
            "fr_acc",
            "groups",
            "truth",
            "redundancy",
            "coverage"
        )
    }

    pub fn table_row(&self) -> String {
        format!(
            "{:>8} {:>5} {:>8} {:>6} {:>8} {:>8.3} {:>7} {:>7} {:>10.4} {:>9}",
            self.seed,
            self.n_submissions,
            self.n_accepted,
            self.injected_false,
            self.rejected_false,
            self.false_rejection_accuracy,
            self.groups_found,
            self.ground_truth_groups,
            self.redundancy_ratio,
            self.coverage_ratio
                .map_or("-".to_string(), |c| format!("{c:.3}")),
        )
    }
}

pub fn render_table(rows: &[Metrics]) -> String {
    let mut out = Metrics::table_header();
    for m in rows {
        let _ = write!(out, "\n{}", m.table_row());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub report: AggregationReport,
    /// Leaf groups of the final tree.
    pub partition: BTreeSet<BTreeSet<String>>,
    pub coverage: Option<CoverageSummary>,
    /// Decision returned to each submitter at upload time.
    pub online_decisions: BTreeMap<String, Decision>,
}

/// The three-layer setup used throughout: 300 s, 0.5 km, 10 matches.
pub fn standard_layers() -> Vec<ConstraintLayerSpec> {
    vec![
        ConstraintLayerSpec::time(300.0),
        ConstraintLayerSpec::position(0.5),
        ConstraintLayerSpec::visual(10),
    ]
}

const BASE_TIME: Timestamp = 1_700_000_000;

fn standard_spec(seed: u64, sizes: &[usize], false_rate: f64) -> ScenarioSpec {
    let origin = GeoPoint::new(40.7448, -74.0256).expect("valid origin");
    ScenarioSpec {
        seed,
        n_workers: 8,
        n_submissions: sizes.iter().sum(),
        true_class: 0,
        false_rate,
        mode: TaskMode::Online,
        representative_policy: RepresentativePolicy::Last,
        layers: standard_layers(),
        clusters: sizes
            .iter()
            .enumerate()
            .map(|(i, &size)| ClusterPlan {
                size,
                center: offset(origin, 2.5 * i as f64, 0.0),
                center_time: BASE_TIME + 1_000 * i as Timestamp,
                visual_key: i as u32,
                base_descriptors: None,
            })
            .collect(),
        jitter: Jitter {
            seconds: 60.0,
            km: 0.1,
            descriptor: 0.01,
        },
        separation: Separation {
            seconds: 1_000.0,
            km: 2.0,
        },
        safety_factor: 2.0,
        descriptors_per_photo: 20,
        descriptor_dim: 32,
        feature_dim: DEFAULT_FEATURE_DIM,
        feature_noise: 0.05,
        match_ratio: DEFAULT_MATCH_RATIO,
    }
}

/// 19 photos in six clusters of 4, 4, 3, 3, 3 and 2 with about 15 % false
/// submissions, every cluster separated on every layer.
pub fn campus_spec(seed: u64) -> ScenarioSpec {
    standard_spec(seed, &[4, 4, 3, 3, 3, 2], 0.15)
}

/// Clusters that all differ on every layer.
pub fn separated_spec(seed: u64, sizes: &[usize], false_rate: f64) -> ScenarioSpec {
    standard_spec(seed, sizes, false_rate)
}

/// Random guaranteed-margin scenario with at most `max_n` submissions and
/// the standard three layers. Clusters share time, position or visual
/// centres at random, so some are told apart by a single layer.
pub fn random_margin_spec(seed: u64, max_n: usize) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    let max_clusters = (max_n / 2).clamp(1, 6);
    let k = rng.random_range(1..=max_clusters);
    let n = rng.random_range((2 * k).min(max_n).max(k)..=max_n.max(k));
    let mut sizes = vec![1usize; k];
    for _ in k..n {
        sizes[rng.random_range(0..k)] += 1;
    }
    let mut spec = standard_spec(seed, &sizes, [0.0, 0.1, 0.2][rng.random_range(0..3)]);
    let origin = GeoPoint::new(40.7448, -74.0256).expect("valid origin");
    let mut used = BTreeSet::new();
    for plan in spec.clusters.iter_mut() {
        // pick distinct (time, place, look) buckets from small pools
        let (t, p, v) = loop {
            let cand = (
                rng.random_range(0..3u32),
                rng.random_range(0..3u32),
                rng.random_range(0..3u32),
            );
            if used.insert(cand) {
                break cand;
            }
        };
        plan.center_time = BASE_TIME + 1_000 * Timestamp::from(t);
        plan.center = offset(origin, 2.5 * f64::from(p), 0.0);
        plan.visual_key = v;
    }
    spec
}

/// Chain of photos where only stream neighbours are similar, on a single
/// layer of `kind`: each link is similar, each two-step jump is not.
pub fn chain_stream(
    len: usize,
    kind: ConstraintKind,
    task_id: &str,
) -> (Vec<Submission>, ConstraintLayerSpec) {
    let origin = GeoPoint::new(36.8065, 10.1815).expect("valid origin");
    let k_min = 10usize;
    let bases: Vec<Vec<Vec<f64>>> = (0..=len)
        .map(|b| base_set(0xC4A1, b as u32, k_min, 16).descriptors().to_vec())
        .collect();
    let layer = match kind {
        ConstraintKind::Time => ConstraintLayerSpec::time(100.0),
        ConstraintKind::Position => ConstraintLayerSpec::position(1.0),
        ConstraintKind::Visual => ConstraintLayerSpec::visual(k_min as u32),
    };
    let subs = (0..len)
        .map(|i| {
            let (captured_at, location, keypoints) = match kind {
                ConstraintKind::Time => (
                    BASE_TIME + 75 * i as Timestamp,
                    origin,
                    KeypointDescriptorSet::empty(),
                ),
                ConstraintKind::Position => (
                    BASE_TIME,
                    offset(origin, 0.75 * i as f64, 0.0),
                    KeypointDescriptorSet::empty(),
                ),
                ConstraintKind::Visual => {
                    let mut d = bases[i].clone();
                    d.extend(bases[i + 1].iter().cloned());
                    (
                        BASE_TIME,
                        origin,
                        KeypointDescriptorSet::new(d).expect("uniform"),
                    )
                }
            };
            Submission {
                submission_id: format!("c{i:02}"),
                task_id: task_id.to_string(),
                worker_id: format!("worker-{i}"),
                captured_at,
                location,
                keypoints,
                global_feature: vec![0.0],
                thumbnail_ref: None,
            }
        })
        .collect();
    (subs, layer)
}

/// Unconstrained scenario: centres drawn near the thresholds so layer
/// predicates disagree in non-transitive ways. No grouping is promised.
pub fn adversarial_stream(seed: u64, n: usize) -> Vec<Submission> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xAD5E);
    let origin = GeoPoint::new(40.7448, -74.0256).expect("valid origin");
    let bases: Vec<KeypointDescriptorSet> = (0..4).map(|k| base_set(seed, k, 24, 16)).collect();
    (0..n)
        .map(|i| {
            // mix two bases so visual overlap varies continuously
            let (a, b) = (rng.random_range(0..4usize), rng.random_range(0..4usize));
            let split = rng.random_range(0..=24usize);
            let mut d: Vec<Vec<f64>> = bases[a].descriptors()[..split].to_vec();
            d.extend(bases[b].descriptors()[split..].iter().cloned());
            Submission {
                submission_id: format!("a{i:02}"),
                task_id: "adversarial".into(),
                worker_id: format!("worker-{i}"),
                captured_at: BASE_TIME + rng.random_range(0..900),
                location: offset(
                    origin,
                    rng.random_range(0.0..1.5),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ),
                keypoints: KeypointDescriptorSet::new(d).expect("uniform"),
                global_feature: vec![0.0],
                thumbnail_ref: None,
            }
        })
        .collect()
}

/// Reads a scenario file (JSON, or TOML by extension), evaluates it, and
/// writes `metrics.jsonl`, `report.json` and `stream.jsonl` into `out_dir`.
pub fn run_scenario_file(
    path: &Path,
    out_dir: &Path,
    classes: &ClassRegistry,
) -> Result<Metrics, SimulatorError> {
    let io = |e: std::io::Error| SimulatorError::Io(e.to_string());
    let text = std::fs::read_to_string(path).map_err(io)?;
    let spec: ScenarioSpec = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text)
            .map_err(|e| SimulatorError::Infeasible(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| SimulatorError::Infeasible(format!("{}: {e}", path.display())))?
    };
    let scenario = generate(&spec, classes)?;
    let evaluation = scenario.evaluate()?;
    std::fs::create_dir_all(out_dir).map_err(io)?;
    let metrics_line = serde_json::to_string(&evaluation.metrics).expect("metrics serialize");
    std::fs::write(out_dir.join("metrics.jsonl"), format!("{metrics_line}\n")).map_err(io)?;
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&evaluation.report).expect("report serializes"),
    )
    .map_err(io)?;
    let mut stream = String::new();
    for (s, l) in scenario.submissions.iter().zip(&scenario.labels) {
        let line = serde_json::json!({ "submission": s, "label": l });
        let _ = writeln!(stream, "{line}");
    }
    std::fs::write(out_dir.join("stream.jsonl"), stream).map_err(io)?;
    Ok(evaluation.metrics)
}
