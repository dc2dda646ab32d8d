//! Planar pusher-slider domain: input/output parametrization, the
//! quasi-static analytical baseline, and the synthetic data generator.
//!
//! The analytical model is a point push under the ellipsoidal limit-surface
//! approximation with uniform Coulomb friction: the contact mode (stick or
//! slide along the edge) comes from the motion cone, the sticking twist from
//! the standard limit-surface kinematics, and the outcome from integrating
//! the twist in sub-steps while the contact geometry evolves.
//!
//! Conventions: the object body frame has the center of mass at the origin.
//! The contact coordinate `c` in [0, 1] walks the pushed edge (left edge of
//! the square, full perimeter for circle and ellipse, with c = 0.5 at the
//! point whose inward normal is +x). Positive push angle `beta` rotates the
//! push direction counterclockwise from the inward edge normal. Outcomes
//! (dx, dy) are expressed in the frame whose x-axis is the push direction,
//! y-axis 90 degrees counterclockwise from it.

use crate::data::{PushDataset, PushSample, SampleMeta, SourceTag};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Default integrator sub-step (seconds).
pub const DEFAULT_SUBSTEP: f64 = 5e-4;

/// Slack factor on the quasi-static outcome bound allowed for noisy data.
pub const OUTCOME_SPEED_SLACK: f64 = 1.2;

/// Pushing action u = (v_p, c, beta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushInput {
    /// Pusher speed, mm/s.
    pub speed: f64,
    /// Contact coordinate along the pushed edge, normalized to [0, 1].
    pub contact: f64,
    /// Push angle relative to the inward edge normal, rad.
    pub angle: f64,
}

impl PushInput {
    pub fn new(speed: f64, contact: f64, angle: f64) -> Self {
        Self { speed, contact, angle }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed.is_finite() && self.speed >= 0.0) {
            return Err(Error::invalid(format!("pusher speed {} out of range", self.speed)));
        }
        if !(self.contact.is_finite() && (0.0..=1.0).contains(&self.contact)) {
            return Err(Error::invalid(format!("contact coordinate {} outside [0, 1]", self.contact)));
        }
        if !(self.angle.is_finite() && self.angle.abs() <= PI / 2.0) {
            return Err(Error::invalid(format!("push angle {} outside [-pi/2, pi/2]", self.angle)));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.speed, self.contact, self.angle]
    }
}

/// Object displacement after a push: COM motion in the pusher-aligned frame
/// (mm) and rotation change (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushOutcome {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl PushOutcome {
    pub const ZERO: PushOutcome = PushOutcome { dx: 0.0, dy: 0.0, dtheta: 0.0 };

    pub fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        Self { dx, dy, dtheta }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dtheta.is_finite()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dtheta]
    }
}

/// Pushed object geometry and friction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// Axis-aligned square; pushes land on the left edge (x = -side/2).
    Square { side: f64 },
    Circle { radius: f64 },
    /// Semi-axes a (x) and b (y).
    Ellipse { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    pub shape: Shape,
    /// Limit-surface ratio tau_max / f_max, in mm.
    pub ls_ratio: f64,
    /// Pusher-object Coulomb friction coefficient.
    pub friction: f64,
}

impl ObjectParams {
    pub fn new(shape: Shape, ls_ratio: f64, friction: f64) -> Result<Self> {
        let dims_ok = match shape {
            Shape::Square { side } => side > 0.0,
            Shape::Circle { radius } => radius > 0.0,
            Shape::Ellipse { a, b } => a > 0.0 && b > 0.0,
        };
        if !dims_ok {
            return Err(Error::invalid("object dimensions must be positive"));
        }
        if !(ls_ratio > 0.0) {
            return Err(Error::invalid("limit-surface ratio must be positive"));
        }
        if !(friction >= 0.0) {
            return Err(Error::invalid("friction coefficient must be non-negative"));
        }
        Ok(Self { shape, ls_ratio, friction })
    }

    /// Limit-surface ratio of a uniform pressure distribution: the mean
    /// distance from the center over the support area.
    pub fn uniform_pressure_ratio(shape: &Shape) -> f64 {
        match *shape {
            // (1/A) integral of |r| over the square = side * (sqrt2 + ln(1+sqrt2)) / 6
            Shape::Square { side } => side * (SQRT_2 + (1.0 + SQRT_2).ln()) / 6.0,
            Shape::Circle { radius } => 2.0 * radius / 3.0,
            Shape::Ellipse { a, b } => {
                // (1/(3 pi)) integral_0^2pi sqrt(a^2 cos^2 + b^2 sin^2), Simpson rule
                let m = 2048;
                let h = 2.0 * PI / m as f64;
                let f = |t: f64| (a * a * t.cos().powi(2) + b * b * t.sin().powi(2)).sqrt();
                let mut total = f(0.0) + f(2.0 * PI);
                for i in 1..m {
                    total += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
                }
                total * h / 3.0 / (3.0 * PI)
            }
        }
    }

    /// The default experimental object: a 90 mm square with uniform-pressure
    /// limit-surface ratio and friction 0.25.
    pub fn default_square() -> Self {
        let shape = Shape::Square { side: 90.0 };
        let ls = Self::uniform_pressure_ratio(&shape);
        Self { shape, ls_ratio: ls, friction: 0.25 }
    }

    pub fn with_uniform_pressure(shape: Shape, friction: f64) -> Result<Self> {
        let ls = Self::uniform_pressure_ratio(&shape);
        Self::new(shape, ls, friction)
    }

    pub fn label(&self) -> String {
        match self.shape {
            Shape::Square { side } => format!("square{side}"),
            Shape::Circle { radius } => format!("circle{radius}"),
            Shape::Ellipse { a, b } => format!("ellipse{a}x{b}"),
        }
    }
}

/// Contact regime of a push.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactMode {
    Stick,
    /// Pusher slides along +tangent relative to the object.
    SlideUp,
    /// Pusher slides along -tangent relative to the object.
    SlideDown,
    Separate,
}

/// How a push ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PushFlag {
    Ok,
    /// The pusher never pressed into the object (or stopped doing so).
    Separated,
    /// The contact point left the pushed edge mid-push; the outcome covers
    /// the portion of the push before the loss.
    ContactLost,
}

#[derive(Debug, Clone, Copy)]
pub struct PushResult {
    pub outcome: PushOutcome,
    pub flag: PushFlag,
}

/// Timestamped poses of pusher and object, for trajectory windowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    /// Pusher position in the world frame, mm.
    pub pusher: [f64; 2],
    /// Object pose (x, y, theta) in the world frame, mm and rad.
    pub object_pose: [f64; 3],
}

// ---------------------------------------------------------------------------
// boundary geometry
// ---------------------------------------------------------------------------

/// Contact geometry at a boundary point, in the object body frame. The
/// normal points into the object; (normal, tangent) is right-handed.
#[derive(Debug, Clone, Copy)]
struct BoundaryGeom {
    point: [f64; 2],
    normal: [f64; 2],
    tangent: [f64; 2],
}

impl Shape {
    /// Contact geometry for the normalized coordinate `c`.
    fn contact_from_coordinate(&self, c: f64) -> Result<BoundaryGeom> {
        if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
            return Err(Error::invalid(format!("contact coordinate {c} outside [0, 1]")));
        }
        Ok(match *self {
            Shape::Square { side } => BoundaryGeom {
                point: [-side / 2.0, (c - 0.5) * side],
                normal: [1.0, 0.0],
                tangent: [0.0, 1.0],
            },
            Shape::Circle { radius } => {
                let psi = 2.0 * PI * c;
                Self::circle_geom(radius, psi)
            }
            Shape::Ellipse { a, b } => {
                let lut = EllipseArcTable::new(a, b);
                let phi = lut.phi_for_coordinate(c);
                Self::ellipse_geom(a, b, phi)
            }
        })
    }

    /// Normalized contact coordinate of a body-frame point on (or near) the
    /// boundary.
    pub(crate) fn coordinate_of(&self, p: [f64; 2]) -> f64 {
        match *self {
            Shape::Square { side } => (p[1] / side + 0.5).clamp(0.0, 1.0),
            Shape::Circle { .. } => {
                let psi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
                psi / (2.0 * PI)
            }
            Shape::Ellipse { a, b } => {
                let lut = EllipseArcTable::new(a, b);
                let phi = Self::ellipse_project(a, b, p, p[1].atan2(p[0]));
                lut.coordinate_for_phi(phi)
            }
        }
    }

    fn circle_geom(radius: f64, psi: f64) -> BoundaryGeom {
        let (s, c) = psi.sin_cos();
        let normal = [-c, -s];
        BoundaryGeom {
            point: [radius * c, radius * s],
            normal,
            tangent: [-normal[1], normal[0]],
        }
    }

    fn ellipse_geom(a: f64, b: f64, phi: f64) -> BoundaryGeom {
        let (s, c) = phi.sin_cos();
        let out = [c / a, s / b];
        let norm = (out[0] * out[0] + out[1] * out[1]).sqrt();
        let normal = [-out[0] / norm, -out[1] / norm];
        BoundaryGeom {
            point: [a * c, b * s],
            normal,
            tangent: [-normal[1], normal[0]],
        }
    }

    /// Parameter of the boundary point nearest `p`, by Newton iteration from
    /// `phi0`.
    fn ellipse_project(a: f64, b: f64, p: [f64; 2], phi0: f64) -> f64 {
        let mut phi = phi0;
        for _ in 0..4 {
            let (s, c) = phi.sin_cos();
            let ex = a * c - p[0];
            let ey = b * s - p[1];
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
    }
}

/// Arc-length parametrization of an ellipse, anchored so that the
/// coordinate 0.5 sits at phi = pi (inward normal +x).
struct EllipseArcTable {
    cumulative: Vec<f64>,
    perimeter: f64,
    anchor: f64,
}

impl EllipseArcTable {
    const SEGMENTS: usize = 2048;

    fn new(a: f64, b: f64) -> Self {
        let m = Self::SEGMENTS;
        let mut cumulative = Vec::with_capacity(m + 1);
        cumulative.push(0.0);
        let mut prev = [a, 0.0];
        let mut total = 0.0;
        for i in 1..=m {
            let phi = 2.0 * PI * i as f64 / m as f64;
            let pt = [a * phi.cos(), b * phi.sin()];
            total += ((pt[0] - prev[0]).powi(2) + (pt[1] - prev[1]).powi(2)).sqrt();
            cumulative.push(total);
            prev = pt;
        }
        let anchor = cumulative[m / 2]; // arc length at phi = pi
        Self { cumulative, perimeter: total, anchor }
    }

    fn phi_for_coordinate(&self, c: f64) -> f64 {
        let target = (self.anchor + (c - 0.5) * self.perimeter).rem_euclid(self.perimeter);
        let m = Self::SEGMENTS;
        let idx = match self
            .cumulative
            .binary_search_by(|v| v.partial_cmp(&target).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(m - 1);
        let s0 = self.cumulative[idx];
        let s1 = self.cumulative[idx + 1];
        let frac = if s1 > s0 { (target - s0) / (s1 - s0) } else { 0.0 };
        2.0 * PI * (idx as f64 + frac) / m as f64
    }

    fn coordinate_for_phi(&self, phi: f64) -> f64 {
        let m = Self::SEGMENTS;
        let t = phi.rem_euclid(2.0 * PI) / (2.0 * PI) * m as f64;
        let idx = (t as usize).min(m - 1);
        let frac = t - idx as f64;
        let s = self.cumulative[idx] + frac * (self.cumulative[idx + 1] - self.cumulative[idx]);
        (0.5 + (s - self.anchor) / self.perimeter).rem_euclid(1.0)
    }
}

// ---------------------------------------------------------------------------
// quasi-static point-push kinematics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Twist {
    v: [f64; 2],
    omega: f64,
    mode: ContactMode,
}

/// Twist of the object for pusher velocity `u` at contact `geom`, all in the
/// body frame. `c2` is the squared limit-surface ratio. Returns the zero
/// twist with `Separate` when the pusher is not pressing into the object.
fn contact_twist(geom: &BoundaryGeom, lever: [f64; 2], u: [f64; 2], friction: f64, c2: f64) -> Twist {
    let n = geom.normal;
    let t = geom.tangent;
    let un = u[0] * n[0] + u[1] * n[1];
    if un <= 1e-12 {
        return Twist { v: [0.0, 0.0], omega: 0.0, mode: ContactMode::Separate };
    }
    let (px, py) = (lever[0], lever[1]);
    let denom = c2 + px * px + py * py;

    // Sticking solution: contact point moves with the pusher.
    let vx = ((c2 + px * px) * u[0] + px * py * u[1]) / denom;
    let vy = (px * py * u[0] + (c2 + py * py) * u[1]) / denom;
    // Under the ellipsoidal limit surface the contact force is parallel to
    // the COM velocity.
    let fn_ = vx * n[0] + vy * n[1];
    let ft = vx * t[0] + vy * t[1];
    if fn_ > 0.0 && ft.abs() <= friction * fn_ {
        let omega = (px * vy - py * vx) / c2;
        return Twist { v: [vx, vy], omega, mode: ContactMode::Stick };
    }

    // Sliding: the force saturates on the friction-cone edge on the side of
    // the required tangential force.
    let sign = if ft >= 0.0 { 1.0 } else { -1.0 };
    let scale = (1.0 + friction * friction).sqrt();
    let fhat = [
        (n[0] + sign * friction * t[0]) / scale,
        (n[1] + sign * friction * t[1]) / scale,
    ];
    let mhat = px * fhat[1] - py * fhat[0];
    // Contact-point velocity per unit twist magnitude.
    let w = [fhat[0] - mhat * py / c2, fhat[1] + mhat * px / c2];
    let wn = w[0] * n[0] + w[1] * n[1];
    if wn <= 1e-12 {
        return Twist { v: [0.0, 0.0], omega: 0.0, mode: ContactMode::Separate };
    }
    let k = un / wn;
    Twist {
        v: [k * fhat[0], k * fhat[1]],
        omega: k * mhat / c2,
        mode: if sign > 0.0 { ContactMode::SlideUp } else { ContactMode::SlideDown },
    }
}

/// Contact mode of a push at its initial configuration.
pub fn motion_cone_mode(input: &PushInput, obj: &ObjectParams) -> Result<ContactMode> {
    let geom = obj.shape.contact_from_coordinate(input.contact)?;
    if input.speed <= 0.0 {
        return Ok(ContactMode::Stick);
    }
    let u = push_velocity(&geom, input.speed, input.angle);
    let c2 = obj.ls_ratio * obj.ls_ratio;
    Ok(contact_twist(&geom, geom.point, u, obj.friction, c2).mode)
}

/// Pusher velocity in the body frame: the inward normal rotated by `angle`
/// counterclockwise, scaled by `speed`. Written as a combination of normal
/// and tangent so mirrored pushes stay bitwise symmetric.
fn push_velocity(geom: &BoundaryGeom, speed: f64, angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [
        speed * (c * geom.normal[0] + s * geom.tangent[0]),
        speed * (c * geom.normal[1] + s * geom.tangent[1]),
    ]
}

fn rot(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn mat_vec_t(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[1][0] * v[1], m[0][1] * v[0] + m[1][1] * v[1]]
}

/// World displacement expressed in the pusher-aligned frame: x along the
/// push direction, y 90 degrees counterclockwise from it.
pub fn pusher_frame(world_displacement: [f64; 2], push_direction: [f64; 2]) -> Result<(f64, f64)> {
    let norm2 = push_direction[0] * push_direction[0] + push_direction[1] * push_direction[1];
    if norm2 < 1e-24 {
        return Err(Error::invalid("push direction has zero length"));
    }
    let d = world_displacement;
    let dir = push_direction;
    Ok((
        d[0] * dir[0] + d[1] * dir[1],
        -d[0] * dir[1] + d[1] * dir[0],
    ))
}

struct PushState {
    object_xy: [f64; 2],
    theta: f64,
    pusher: [f64; 2],
}

enum StepOutcome {
    Twist([f64; 2], f64), // world-frame COM velocity and angular rate
    Separated,
    Lost,
}

fn state_derivative(
    state: &PushState,
    u_world: [f64; 2],
    obj: &ObjectParams,
    c2: f64,
) -> StepOutcome {
    let r = rot(state.theta);
    let p_body = mat_vec_t(
        &r,
        [state.pusher[0] - state.object_xy[0], state.pusher[1] - state.object_xy[1]],
    );
    let geom = match obj.shape {
        Shape::Square { side } => {
            if p_body[1].abs() > side / 2.0 + 1e-9 {
                return StepOutcome::Lost;
            }
            BoundaryGeom { point: p_body, normal: [1.0, 0.0], tangent: [0.0, 1.0] }
        }
        Shape::Circle { radius } => {
            let norm = (p_body[0] * p_body[0] + p_body[1] * p_body[1]).sqrt();
            if norm < 1e-9 {
                return StepOutcome::Lost;
            }
            let normal = [-p_body[0] / norm, -p_body[1] / norm];
            let _ = radius;
            BoundaryGeom { point: p_body, normal, tangent: [-normal[1], normal[0]] }
        }
        Shape::Ellipse { a, b } => {
            let phi = Shape::ellipse_project(a, b, p_body, p_body[1].atan2(p_body[0]));
            let geom = Shape::ellipse_geom(a, b, phi);
            BoundaryGeom { point: p_body, ..geom }
        }
    };
    let u_body = mat_vec_t(&r, u_world);
    let twist = contact_twist(&geom, geom.point, u_body, obj.friction, c2);
    if twist.mode == ContactMode::Separate {
        return StepOutcome::Separated;
    }
    let v_world = mat_vec(&r, twist.v);
    StepOutcome::Twist(v_world, twist.omega)
}

/// Quasi-static outcome of a straight constant-velocity push of duration
/// `dt`, using the default sub-step.
pub fn analytical_push(input: &PushInput, obj: &ObjectParams, dt: f64) -> Result<PushResult> {
    analytical_push_with_substep(input, obj, dt, DEFAULT_SUBSTEP)
}

/// As [`analytical_push`], with an explicit integrator sub-step (midpoint
/// rule; sub-step refinement is a test hook).
pub fn analytical_push_with_substep(
    input: &PushInput,
    obj: &ObjectParams,
    dt: f64,
    substep: f64,
) -> Result<PushResult> {
    let (result, _) = integrate(input, obj, dt, substep, None)?;
    Ok(result)
}

/// Integrate a push and record the pusher/object trajectory every
/// `sample_period` seconds (plus the initial and final states).
pub fn integrate_push(
    input: &PushInput,
    obj: &ObjectParams,
    dt: f64,
    sample_period: f64,
) -> Result<Vec<TrajectoryPoint>> {
    let (_, traj) = integrate(input, obj, dt, DEFAULT_SUBSTEP, Some(sample_period))?;
    Ok(traj)
}

fn integrate(
    input: &PushInput,
    obj: &ObjectParams,
    dt: f64,
    substep: f64,
    sample_period: Option<f64>,
) -> Result<(PushResult, Vec<TrajectoryPoint>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("push duration must be positive"));
    }
    if !(substep > 0.0) {
        return Err(Error::invalid("sub-step must be positive"));
    }
    if !(input.speed.is_finite() && input.speed >= 0.0) {
        return Err(Error::invalid("pusher speed must be non-negative"));
    }
    let geom0 = obj.shape.contact_from_coordinate(input.contact)?;
    let push_dir = {
        let (s, c) = input.angle.sin_cos();
        [
            c * geom0.normal[0] + s * geom0.tangent[0],
            c * geom0.normal[1] + s * geom0.tangent[1],
        ]
    };

    fn record(traj: &mut Vec<TrajectoryPoint>, t: f64, state: &PushState) {
        traj.push(TrajectoryPoint {
            time: t,
            pusher: state.pusher,
            object_pose: [state.object_xy[0], state.object_xy[1], state.theta],
        });
    }

    let mut traj = Vec::new();
    let mut state = PushState { object_xy: [0.0, 0.0], theta: 0.0, pusher: geom0.point };
    if sample_period.is_some() {
        record(&mut traj, 0.0, &state);
    }

    if input.speed == 0.0 {
        if sample_period.is_some() {
            record(&mut traj, dt, &state);
        }
        return Ok((PushResult { outcome: PushOutcome::ZERO, flag: PushFlag::Ok }, traj));
    }

    let u_world = [input.speed * push_dir[0], input.speed * push_dir[1]];
    let c2 = obj.ls_ratio * obj.ls_ratio;
    let nsteps = (dt / substep).ceil().max(1.0) as usize;
    let h = dt / nsteps as f64;
    let mut flag = PushFlag::Ok;
    let mut next_sample = sample_period.unwrap_or(f64::INFINITY);

    for step in 0..nsteps {
        let d1 = state_derivative(&state, u_world, obj, c2);
        let StepOutcome::Twist(v1, w1) = d1 else {
            flag = end_flag(d1, step == 0);
            // A push that separates immediately reports the zero outcome.
            if step == 0 && flag == PushFlag::Separated {
                state.object_xy = [0.0, 0.0];
                state.theta = 0.0;
            }
            break;
        };
        let mid = PushState {
            object_xy: [
                state.object_xy[0] + 0.5 * h * v1[0],
                state.object_xy[1] + 0.5 * h * v1[1],
            ],
            theta: state.theta + 0.5 * h * w1,
            pusher: [
                state.pusher[0] + 0.5 * h * u_world[0],
                state.pusher[1] + 0.5 * h * u_world[1],
            ],
        };
        let d2 = state_derivative(&mid, u_world, obj, c2);
        let StepOutcome::Twist(v2, w2) = d2 else {
            flag = end_flag(d2, false);
            break;
        };
        state.object_xy[0] += h * v2[0];
        state.object_xy[1] += h * v2[1];
        state.theta += h * w2;
        state.pusher[0] += h * u_world[0];
        state.pusher[1] += h * u_world[1];

        let t = (step + 1) as f64 * h;
        if t + 1e-12 >= next_sample {
            record(&mut traj, t, &state);
            next_sample += sample_period.unwrap_or(f64::INFINITY);
        }
    }
    if sample_period.is_some() && traj.last().map(|p| p.time < dt - 1e-12).unwrap_or(true) {
        record(&mut traj, dt, &state);
    }

    let (dx, dy) = pusher_frame(state.object_xy, push_dir)?;
    Ok((
        PushResult { outcome: PushOutcome::new(dx, dy, state.theta), flag },
        traj,
    ))
}

fn end_flag(step: StepOutcome, _first: bool) -> PushFlag {
    match step {
        StepOutcome::Separated => PushFlag::Separated,
        StepOutcome::Lost => PushFlag::ContactLost,
        StepOutcome::Twist(..) => PushFlag::Ok,
    }
}

// ---------------------------------------------------------------------------
// synthetic data generation
// ---------------------------------------------------------------------------

/// Gaussian bump in (c, beta) space, amplifying the noise field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBump {
    pub center_c: f64,
    pub center_beta: f64,
    pub width_c: f64,
    pub width_beta: f64,
    pub height: f64,
}

/// Input-dependent noise: per-output base standard deviations times an
/// amplification factor >= 1 built from Gaussian bumps in (c, beta).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseField {
    /// Standard deviations of (dx, dy, dtheta) in the calm region.
    pub base_std: [f64; 3],
    pub bumps: Vec<NoiseBump>,
}

impl NoiseField {
    pub fn constant(base_std: [f64; 3]) -> Self {
        Self { base_std, bumps: Vec::new() }
    }

    pub fn zero() -> Self {
        Self::constant([0.0; 3])
    }

    /// Three-bump field calibrated so the noise std sits at roughly 10-40%
    /// of the outcome magnitude over the default validation grid.
    pub fn default_heteroscedastic() -> Self {
        Self {
            base_std: [0.20, 0.10, 0.003],
            bumps: vec![
                NoiseBump { center_c: 0.25, center_beta: -0.8, width_c: 0.12, width_beta: 0.35, height: 3.0 },
                NoiseBump { center_c: 0.75, center_beta: 0.8, width_c: 0.12, width_beta: 0.35, height: 3.0 },
                NoiseBump { center_c: 0.5, center_beta: 0.0, width_c: 0.2, width_beta: 0.5, height: 1.0 },
            ],
        }
    }

    pub fn amplification(&self, c: f64, beta: f64) -> f64 {
        let mut a = 1.0;
        for b in &self.bumps {
            let dc = (c - b.center_c) / b.width_c;
            let db = (beta - b.center_beta) / b.width_beta;
            a += b.height * (-0.5 * (dc * dc + db * db)).exp();
        }
        a
    }

    pub fn std_at(&self, c: f64, beta: f64) -> [f64; 3] {
        let a = self.amplification(c, beta);
        [self.base_std[0] * a, self.base_std[1] * a, self.base_std[2] * a]
    }
}

/// Where synthetic pushes sample the action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplingSpec {
    /// Cycle through the (c, beta) grid at a fixed speed.
    Grid { c_values: Vec<f64>, beta_values: Vec<f64>, speed: f64 },
    /// Uniform draws from the given ranges.
    Random { speed: (f64, f64), contact: (f64, f64), angle: (f64, f64) },
}

/// Speed-dependent distortion for the quasi-static study: outcomes are
/// scaled by `1 + gain * max(0, v - threshold) / threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEffect {
    pub threshold: f64,
    pub gain: f64,
}

impl SpeedEffect {
    fn factor(&self, speed: f64) -> f64 {
        1.0 + self.gain * ((speed - self.threshold).max(0.0) / self.threshold)
    }
}

/// Ground-truth mean and per-output noise std of the generator at `input`.
pub fn ground_truth(
    obj: &ObjectParams,
    noise: &NoiseField,
    input: &PushInput,
    dt: f64,
) -> Result<(PushOutcome, [f64; 3])> {
    let mean = analytical_push(input, obj, dt)?.outcome;
    Ok((mean, noise.std_at(input.contact, input.angle)))
}

fn synthetic_meta(obj: &ObjectParams, rep_id: Option<u32>) -> SampleMeta {
    SampleMeta {
        object: obj.label(),
        surface: "synthetic".to_string(),
        rep_id,
        source: SourceTag::Synthetic,
    }
}

/// Draw one noisy outcome around `mean`, respecting the quasi-static speed
/// bound (`OUTCOME_SPEED_SLACK` times v_p dt) by redrawing the planar noise,
/// then clamping as a last resort.
fn noisy_outcome(
    mean: &PushOutcome,
    std: &[f64; 3],
    speed: f64,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> PushOutcome {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let bound = OUTCOME_SPEED_SLACK * speed * dt;
    let dtheta = mean.dtheta + std[2] * normal.sample(rng);
    for _ in 0..1000 {
        let dx = mean.dx + std[0] * normal.sample(rng);
        let dy = mean.dy + std[1] * normal.sample(rng);
        if dx.hypot(dy) <= bound {
            return PushOutcome::new(dx, dy, dtheta);
        }
    }
    let norm = mean.dx.hypot(mean.dy).max(1e-12);
    let scale = (bound / norm).min(1.0);
    PushOutcome::new(mean.dx * scale, mean.dy * scale, dtheta)
}

/// Generate `n` synthetic pushes: analytical means plus input-dependent
/// Gaussian noise. Deterministic for a given seed.
pub fn synth_generate(
    obj: &ObjectParams,
    noise: &NoiseField,
    sampling: &SamplingSpec,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<PushDataset> {
    if n < 1 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    let grid: Vec<(f64, f64, f64)> = match sampling {
        SamplingSpec::Grid { c_values, beta_values, speed } => {
            if c_values.is_empty() || beta_values.is_empty() {
                return Err(Error::invalid("grid sampling needs non-empty value lists"));
            }
            c_values
                .iter()
                .flat_map(|c| beta_values.iter().map(move |b| (*speed, *c, *b)))
                .collect()
        }
        SamplingSpec::Random { .. } => Vec::new(),
    };
    for i in 0..n {
        let input = match sampling {
            SamplingSpec::Grid { .. } => {
                let (v, c, b) = grid[i % grid.len()];
                PushInput::new(v, c, b)
            }
            SamplingSpec::Random { speed, contact, angle } => PushInput::new(
                uniform_in(rng.random_range(0.0..1.0f64), *speed),
                uniform_in(rng.random_range(0.0..1.0f64), *contact),
                uniform_in(rng.random_range(0.0..1.0f64), *angle),
            ),
        };
        input.validate()?;
        let mean = analytical_push(&input, obj, dt)?.outcome;
        let std = noise.std_at(input.contact, input.angle);
        let outcome = noisy_outcome(&mean, &std, input.speed, dt, &mut rng);
        samples.push(PushSample { input, outcome, dt, meta: synthetic_meta(obj, None) });
    }
    Ok(PushDataset::new(
        samples,
        format!("synthetic {} pushes, seed {seed}", obj.label()),
    ))
}

fn uniform_in(u: f64, range: (f64, f64)) -> f64 {
    range.0 + u * (range.1 - range.0)
}

/// Generate a repeated-push validation set: `reps` noisy draws at every
/// (c, beta) grid point, with repetition ids.
pub fn synth_generate_repeats(
    obj: &ObjectParams,
    noise: &NoiseField,
    c_values: &[f64],
    beta_values: &[f64],
    speed: f64,
    reps: usize,
    dt: f64,
    seed: u64,
) -> Result<PushDataset> {
    if reps < 1 || c_values.is_empty() || beta_values.is_empty() {
        return Err(Error::invalid("repeats generator needs a non-empty grid and reps >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(c_values.len() * beta_values.len() * reps);
    for &c in c_values {
        for &b in beta_values {
            let input = PushInput::new(speed, c, b);
            input.validate()?;
            let mean = analytical_push(&input, obj, dt)?.outcome;
            let std = noise.std_at(c, b);
            for rep in 0..reps {
                let outcome = noisy_outcome(&mean, &std, speed, dt, &mut rng);
                samples.push(PushSample {
                    input,
                    outcome,
                    dt,
                    meta: synthetic_meta(obj, Some(rep as u32)),
                });
            }
        }
    }
    Ok(PushDataset::new(
        samples,
        format!("synthetic repeated pushes {} reps, seed {seed}", reps),
    ))
}

/// Generate a constant-push-length dataset spanning speeds, for the
/// quasi-static study. Each speed pushes for `push_length / speed` seconds;
/// an optional speed effect distorts outcomes above its threshold.
pub fn synth_generate_speed_study(
    obj: &ObjectParams,
    noise: &NoiseField,
    speeds: &[f64],
    push_length: f64,
    n_per_speed: usize,
    effect: Option<SpeedEffect>,
    seed: u64,
) -> Result<PushDataset> {
    if speeds.is_empty() || n_per_speed < 1 {
        return Err(Error::invalid("speed study needs speeds and n_per_speed >= 1"));
    }
    if !(push_length > 0.0) {
        return Err(Error::invalid("push length must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(speeds.len() * n_per_speed);
    for &speed in speeds {
        if !(speed > 0.0) {
            return Err(Error::invalid("speeds must be positive"));
        }
        let dt = push_length / speed;
        for _ in 0..n_per_speed {
            let input = PushInput::new(
                speed,
                rng.random_range(0.05..0.95),
                rng.random_range(-1.2..1.2),
            );
            let mut mean = analytical_push(&input, obj, dt)?.outcome;
            if let Some(e) = effect {
                let f = e.factor(speed);
                mean = PushOutcome::new(mean.dx * f, mean.dy * f, mean.dtheta * f);
            }
            let std = noise.std_at(input.contact, input.angle);
            let outcome = noisy_outcome(&mean, &std, input.speed, dt, &mut rng);
            samples.push(PushSample { input, outcome, dt, meta: synthetic_meta(obj, None) });
        }
    }
    Ok(PushDataset::new(
        samples,
        format!("synthetic speed study, push length {push_length} mm, seed {seed}"),
    ))
}
