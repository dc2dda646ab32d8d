//! Dataset schema, ingestion, trajectory windowing, splitting, and
//! repeated-push grouping.
//!
//! The canonical exchange format is CSV with the exact header
//!
//! `object,surface,v_p_mm_s,c,beta_rad,dt_s,dx_mm,dy_mm,dtheta_rad,rep_id`
//!
//! (UTF-8, LF newlines, `rep_id` empty when absent). JSON mirrors the same
//! fields. Units are fixed: mm, mm/s, rad, s. Rows violating the input or
//! outcome invariants are rejected with row-indexed errors; nothing is
//! silently clamped.

use crate::error::{Error, Result};
use crate::pushmodel::{
    pusher_frame, ObjectParams, PushInput, PushOutcome, TrajectoryPoint, OUTCOME_SPEED_SLACK,
};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

pub const CSV_HEADER: [&str; 10] = [
    "object", "surface", "v_p_mm_s", "c", "beta_rad", "dt_s", "dx_mm", "dy_mm", "dtheta_rad",
    "rep_id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub object: String,
    pub surface: String,
    pub rep_id: Option<u32>,
    pub source: SourceTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushSample {
    pub input: PushInput,
    pub outcome: PushOutcome,
    /// Window duration of this push, seconds.
    pub dt: f64,
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushDataset {
    pub samples: Vec<PushSample>,
    pub provenance: String,
}

/// Empirical outcome distribution of one repeated push.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedPushGroup {
    pub input: PushInput,
    pub empirical_mean: PushOutcome,
    /// Unbiased per-output standard deviations; `None` when the group has a
    /// single repetition.
    pub empirical_std: Option<[f64; 3]>,
    pub count: usize,
}

/// Which output column a projection extracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputIndex {
    Dx,
    Dy,
    Dtheta,
}

impl OutputIndex {
    pub const ALL: [OutputIndex; 3] = [OutputIndex::Dx, OutputIndex::Dy, OutputIndex::Dtheta];

    pub fn label(self) -> &'static str {
        match self {
            OutputIndex::Dx => "dx_mm",
            OutputIndex::Dy => "dy_mm",
            OutputIndex::Dtheta => "dtheta_rad",
        }
    }

    pub fn of(self, outcome: &PushOutcome) -> f64 {
        match self {
            OutputIndex::Dx => outcome.dx,
            OutputIndex::Dy => outcome.dy,
            OutputIndex::Dtheta => outcome.dtheta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    CanonicalCsv,
    CanonicalJson,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(DataFormat::CanonicalCsv),
            Some("json") => Ok(DataFormat::CanonicalJson),
            other => Err(Error::Format(format!(
                "cannot infer dataset format from extension {other:?} (expected .csv or .json)"
            ))),
        }
    }
}

impl PushDataset {
    pub fn new(samples: Vec<PushSample>, provenance: impl Into<String>) -> Self {
        Self { samples, provenance: provenance.into() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Window duration shared by the samples, if it is indeed shared.
    pub fn uniform_dt(&self) -> Option<f64> {
        let first = self.samples.first()?.dt;
        self.samples
            .iter()
            .all(|s| (s.dt - first).abs() <= 1e-12 * first.max(1.0))
            .then_some(first)
    }

    /// Design matrix with columns (v_p, c, beta).
    pub fn design_matrix(&self) -> Array2<f64> {
        let n = self.len();
        let mut x = Array2::zeros((n, 3));
        for (i, s) in self.samples.iter().enumerate() {
            x[[i, 0]] = s.input.speed;
            x[[i, 1]] = s.input.contact;
            x[[i, 2]] = s.input.angle;
        }
        x
    }

    /// Design matrix with columns (c, beta) for velocity-free models.
    pub fn design_matrix_contact_angle(&self) -> Array2<f64> {
        let n = self.len();
        let mut x = Array2::zeros((n, 2));
        for (i, s) in self.samples.iter().enumerate() {
            x[[i, 0]] = s.input.contact;
            x[[i, 1]] = s.input.angle;
        }
        x
    }

    pub fn targets(&self, output: OutputIndex) -> Array1<f64> {
        Array1::from_iter(self.samples.iter().map(|s| output.of(&s.outcome)))
    }
}

// ---------------------------------------------------------------------------
// canonical formats
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    object: String,
    surface: String,
    v_p_mm_s: f64,
    c: f64,
    beta_rad: f64,
    dt_s: f64,
    dx_mm: f64,
    dy_mm: f64,
    dtheta_rad: f64,
    rep_id: Option<u32>,
}

fn validate_sample(row: usize, sample: &PushSample) -> Result<()> {
    let err = |column: &str, message: String| Error::Parse {
        row,
        column: column.to_string(),
        message,
    };
    let i = &sample.input;
    if !(i.speed.is_finite() && i.speed >= 0.0) {
        return Err(err("v_p_mm_s", format!("pusher speed {} out of range", i.speed)));
    }
    if !(i.contact.is_finite() && (0.0..=1.0).contains(&i.contact)) {
        return Err(err("c", format!("contact coordinate {} outside [0, 1]", i.contact)));
    }
    if !(i.angle.is_finite() && i.angle.abs() <= PI / 2.0) {
        return Err(err("beta_rad", format!("push angle {} outside [-pi/2, pi/2]", i.angle)));
    }
    if !(sample.dt.is_finite() && sample.dt > 0.0) {
        return Err(err("dt_s", format!("window duration {} must be positive", sample.dt)));
    }
    let o = &sample.outcome;
    if !o.dx.is_finite() {
        return Err(err("dx_mm", "non-finite value".to_string()));
    }
    if !o.dy.is_finite() {
        return Err(err("dy_mm", "non-finite value".to_string()));
    }
    if !o.dtheta.is_finite() {
        return Err(err("dtheta_rad", "non-finite value".to_string()));
    }
    let bound = OUTCOME_SPEED_SLACK * i.speed * sample.dt + 1e-9;
    let norm = o.dx.hypot(o.dy);
    if norm > bound {
        return Err(err(
            "dx_mm",
            format!("planar displacement {norm:.4} mm exceeds the quasi-static bound {bound:.4} mm"),
        ));
    }
    Ok(())
}

/// Load a dataset, validating every row.
pub fn load(path: &Path, format: DataFormat) -> Result<PushDataset> {
    match format {
        DataFormat::CanonicalCsv => load_csv(path),
        DataFormat::CanonicalJson => load_json(path),
    }
}

/// Write a dataset in the canonical format.
pub fn save(dataset: &PushDataset, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::CanonicalCsv => save_csv(dataset, path),
        DataFormat::CanonicalJson => {
            let file = std::fs::File::create(path)?;
            serde_json::to_writer_pretty(file, dataset)
                .map_err(|e| Error::Format(format!("JSON write failed: {e}")))
        }
    }
}

fn load_csv(path: &Path) -> Result<PushDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Format(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("cannot read header: {e}")))?;
    let expected: Vec<&str> = CSV_HEADER.to_vec();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Format(format!(
            "unit-header mismatch: expected `{}`, got `{}`",
            expected.join(","),
            got.join(",")
        )));
    }
    let mut samples = Vec::new();
    for (idx, record) in reader.deserialize::<CsvRow>().enumerate() {
        let row_no = idx + 1;
        let row = record.map_err(|e| Error::Parse {
            row: row_no,
            column: "<record>".to_string(),
            message: e.to_string(),
        })?;
        let sample = PushSample {
            input: PushInput::new(row.v_p_mm_s, row.c, row.beta_rad),
            outcome: PushOutcome::new(row.dx_mm, row.dy_mm, row.dtheta_rad),
            dt: row.dt_s,
            meta: SampleMeta {
                object: row.object,
                surface: row.surface,
                rep_id: row.rep_id,
                source: SourceTag::Real,
            },
        };
        validate_sample(row_no, &sample)?;
        samples.push(sample);
    }
    Ok(PushDataset::new(samples, format!("loaded from {}", path.display())))
}

fn save_csv(dataset: &PushDataset, path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(true)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Format(format!("cannot create {}: {e}", path.display())))?;
    for s in &dataset.samples {
        writer
            .serialize(CsvRow {
                object: s.meta.object.clone(),
                surface: s.meta.surface.clone(),
                v_p_mm_s: s.input.speed,
                c: s.input.contact,
                beta_rad: s.input.angle,
                dt_s: s.dt,
                dx_mm: s.outcome.dx,
                dy_mm: s.outcome.dy,
                dtheta_rad: s.outcome.dtheta,
                rep_id: s.meta.rep_id,
            })
            .map_err(|e| Error::Format(format!("CSV write failed: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Format(format!("CSV flush failed: {e}")))
}

fn load_json(path: &Path) -> Result<PushDataset> {
    let file = std::fs::File::open(path)?;
    let dataset: PushDataset = serde_json::from_reader(file)
        .map_err(|e| Error::Format(format!("JSON parse failed: {e}")))?;
    for (i, s) in dataset.samples.iter().enumerate() {
        validate_sample(i + 1, s)?;
    }
    Ok(dataset)
}

// ---------------------------------------------------------------------------
// trajectory windowing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct WindowedSamples {
    pub samples: Vec<PushSample>,
    /// Windows skipped over timestamp gaps or undefined pusher motion.
    pub skipped: usize,
}

/// Cut a trajectory into non-overlapping windows of length `dt` and extract
/// one sample per window: the input from the pusher state at window start
/// (finite-difference speed, contact geometry for c and beta), the outcome
/// from the object pose change expressed in the pusher-aligned frame.
pub fn window(
    trajectory: &[TrajectoryPoint],
    obj: &ObjectParams,
    dt: f64,
    meta: &SampleMeta,
) -> Result<WindowedSamples> {
    if !(dt > 0.0) {
        return Err(Error::invalid("window duration must be positive"));
    }
    if trajectory.len() < 2 {
        return Err(Error::invalid("trajectory needs at least two points"));
    }
    for pair in trajectory.windows(2) {
        if pair[1].time <= pair[0].time {
            return Err(Error::invalid("trajectory timestamps must be strictly increasing"));
        }
    }
    let t0 = trajectory[0].time;
    let t_end = trajectory.last().unwrap().time;
    if t_end - t0 < dt - 1e-12 {
        return Err(Error::invalid("trajectory shorter than one window"));
    }

    let n_windows = ((t_end - t0 + 1e-12) / dt).floor() as usize;
    let mut samples = Vec::new();
    let mut skipped = 0usize;
    for k in 0..n_windows {
        let ws = t0 + k as f64 * dt;
        let we = ws + dt;
        match extract_window(trajectory, obj, ws, we, dt, meta) {
            Some(sample) => samples.push(sample),
            None => skipped += 1,
        }
    }
    Ok(WindowedSamples { samples, skipped })
}

fn extract_window(
    traj: &[TrajectoryPoint],
    obj: &ObjectParams,
    ws: f64,
    we: f64,
    dt: f64,
    meta: &SampleMeta,
) -> Option<PushSample> {
    // any gap larger than dt/2 inside the window skips it
    for pair in traj.windows(2) {
        let (a, b) = (pair[0].time, pair[1].time);
        if b > ws && a < we && (b - a) > dt / 2.0 {
            return None;
        }
    }
    let start = interpolate(traj, ws)?;
    let end = interpolate(traj, we)?;

    // finite-difference pusher velocity at window start
    let seg = traj.windows(2).find(|p| p[1].time > ws)?;
    let seg_dt = seg[1].time - seg[0].time;
    let vel = [
        (seg[1].pusher[0] - seg[0].pusher[0]) / seg_dt,
        (seg[1].pusher[1] - seg[0].pusher[1]) / seg_dt,
    ];
    let speed = vel[0].hypot(vel[1]);
    if speed < 1e-9 {
        return None;
    }
    let dir = [vel[0] / speed, vel[1] / speed];

    // contact geometry at window start, in the body frame
    let theta0 = start.object_pose[2];
    let (sin0, cos0) = theta0.sin_cos();
    let rel = [
        start.pusher[0] - start.object_pose[0],
        start.pusher[1] - start.object_pose[1],
    ];
    let p_body = [cos0 * rel[0] + sin0 * rel[1], -sin0 * rel[0] + cos0 * rel[1]];
    let c = obj.shape.coordinate_of(p_body);
    let geom = match obj.shape {
        crate::pushmodel::Shape::Square { .. } => [1.0, 0.0],
        _ => {
            // inward normal from the contact coordinate
            let n_body = body_normal(obj, p_body);
            n_body
        }
    };
    let n_world = [cos0 * geom[0] - sin0 * geom[1], sin0 * geom[0] + cos0 * geom[1]];
    let beta = (n_world[0] * dir[1] - n_world[1] * dir[0]).atan2(n_world[0] * dir[0] + n_world[1] * dir[1]);

    let disp = [
        end.object_pose[0] - start.object_pose[0],
        end.object_pose[1] - start.object_pose[1],
    ];
    let (dx, dy) = pusher_frame(disp, dir).ok()?;
    let sample = PushSample {
        input: PushInput::new(speed, c, beta),
        outcome: PushOutcome::new(dx, dy, end.object_pose[2] - start.object_pose[2]),
        dt,
        meta: meta.clone(),
    };
    validate_sample(0, &sample).ok()?;
    Some(sample)
}

fn body_normal(obj: &ObjectParams, p_body: [f64; 2]) -> [f64; 2] {
    match obj.shape {
        crate::pushmodel::Shape::Square { .. } => [1.0, 0.0],
        crate::pushmodel::Shape::Circle { .. } => {
            let n = p_body[0].hypot(p_body[1]).max(1e-12);
            [-p_body[0] / n, -p_body[1] / n]
        }
        crate::pushmodel::Shape::Ellipse { a, b } => {
            let phi = {
                // gradient direction of the implicit ellipse at the nearest
                // boundary point
                let mut phi = p_body[1].atan2(p_body[0]);
                for _ in 0..4 {
                    let (s, c) = phi.sin_cos();
                    let ex = a * c - p_body[0];
                    let ey = b * s - p_body[1];
                    let dx = -a * s;
                    let dy = b * c;
                    let f = ex * dx + ey * dy;
                    let fp = dx * dx + dy * dy + ex * (-a * c) + ey * (-b * s);
                    if fp.abs() < 1e-12 {
                        break;
                    }
                    phi -= f / fp;
                }
                phi
            };
            let (s, c) = phi.sin_cos();
            let out = [c / a, s / b];
            let n = out[0].hypot(out[1]);
            [-out[0] / n, -out[1] / n]
        }
    }
}

fn interpolate(traj: &[TrajectoryPoint], t: f64) -> Option<TrajectoryPoint> {
    if t < traj[0].time - 1e-9 || t > traj.last().unwrap().time + 1e-9 {
        return None;
    }
    let idx = traj.partition_point(|p| p.time < t - 1e-12);
    if idx == 0 {
        return Some(traj[0]);
    }
    if idx >= traj.len() {
        return Some(*traj.last().unwrap());
    }
    let (a, b) = (&traj[idx - 1], &traj[idx]);
    let w = (t - a.time) / (b.time - a.time);
    let lerp = |x: f64, y: f64| x + w * (y - x);
    Some(TrajectoryPoint {
        time: t,
        pusher: [lerp(a.pusher[0], b.pusher[0]), lerp(a.pusher[1], b.pusher[1])],
        object_pose: [
            lerp(a.object_pose[0], b.object_pose[0]),
            lerp(a.object_pose[1], b.object_pose[1]),
            lerp(a.object_pose[2], b.object_pose[2]),
        ],
    })
}

// ---------------------------------------------------------------------------
// repeated-push grouping and splitting
// ---------------------------------------------------------------------------

/// Group samples by identical action (v_p, c, beta). Requires repetition ids
/// to be present in the dataset; groups are sorted by action for stable
/// output order, so the result is invariant to sample permutations.
pub fn group_repeats(dataset: &PushDataset) -> Result<Vec<RepeatedPushGroup>> {
    if !dataset.samples.iter().any(|s| s.meta.rep_id.is_some()) {
        return Err(Error::invalid("dataset has no repetition ids"));
    }
    let mut groups: BTreeMap<(u64, u64, u64), Vec<&PushSample>> = BTreeMap::new();
    for s in &dataset.samples {
        let key = (
            s.input.speed.to_bits(),
            s.input.contact.to_bits(),
            s.input.angle.to_bits(),
        );
        groups.entry(key).or_default().push(s);
    }
    let mut out: Vec<RepeatedPushGroup> = groups
        .into_values()
        .map(|mut members| {
            // canonical member order makes the moments bitwise
            // permutation-invariant
            members.sort_by_key(|m| {
                (
                    m.meta.rep_id,
                    m.outcome.dx.to_bits(),
                    m.outcome.dy.to_bits(),
                    m.outcome.dtheta.to_bits(),
                )
            });
            let count = members.len();
            let n = count as f64;
            // moments on deviations from the first member, so identical
            // outcomes produce exactly zero spread
            let shift = members[0].outcome.to_array();
            let mut dev_mean = [0.0f64; 3];
            for m in &members {
                let o = m.outcome.to_array();
                for d in 0..3 {
                    dev_mean[d] += o[d] - shift[d];
                }
            }
            for d in 0..3 {
                dev_mean[d] /= n;
            }
            let mean = [
                shift[0] + dev_mean[0],
                shift[1] + dev_mean[1],
                shift[2] + dev_mean[2],
            ];
            let std = if count >= 2 {
                let mut var = [0.0f64; 3];
                for m in &members {
                    let o = m.outcome.to_array();
                    for d in 0..3 {
                        var[d] += ((o[d] - shift[d]) - dev_mean[d]).powi(2) / (n - 1.0);
                    }
                }
                Some([var[0].sqrt(), var[1].sqrt(), var[2].sqrt()])
            } else {
                None
            };
            RepeatedPushGroup {
                input: members[0].input,
                empirical_mean: PushOutcome::new(mean[0], mean[1], mean[2]),
                empirical_std: std,
                count,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.input.speed, a.input.contact, a.input.angle)
            .partial_cmp(&(b.input.speed, b.input.contact, b.input.angle))
            .unwrap()
    });
    Ok(out)
}

/// Deterministic shuffle-split: the first `n_train` of a seed-shuffled
/// permutation become the training set, the rest the test set.
pub fn split(dataset: &PushDataset, n_train: usize, seed: u64) -> Result<(PushDataset, PushDataset)> {
    if n_train > dataset.len() {
        return Err(Error::invalid(format!(
            "n_train {} exceeds dataset size {}",
            n_train,
            dataset.len()
        )));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let train: Vec<PushSample> = indices[..n_train]
        .iter()
        .map(|&i| dataset.samples[i].clone())
        .collect();
    let test: Vec<PushSample> = indices[n_train..]
        .iter()
        .map(|&i| dataset.samples[i].clone())
        .collect();
    Ok((
        PushDataset::new(train, dataset.provenance.clone()),
        PushDataset::new(test, dataset.provenance.clone()),
    ))
}
