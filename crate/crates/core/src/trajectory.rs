//! Quintic joint-space trajectory planning.
//!
//! [`quintic_coefficients`] solves the degree-5 boundary-value problem for
//! one joint (position, velocity and acceleration pinned at both ends).
//! [`plan_joint_trajectory`] builds the rest-to-rest segment used for grasp
//! approach motions; a rest-to-rest quintic is monotone per joint, so a
//! segment between in-limit configurations never leaves the limits.

use thiserror::Error;

use crate::kinematics::{DHChain, JointVector};

/// Errors from trajectory planning and sampling.
#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("duration must be positive")]
    NonPositiveDuration,
    #[error("need at least 2 samples, got {got}")]
    TooFewSamples { got: usize },
    #[error("joint {joint_index} endpoint lies outside the chain limits")]
    LimitViolation { joint_index: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
}

impl TrajectoryError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::NonPositiveDuration => "NonPositiveDuration",
            Self::TooFewSamples { .. } => "TooFewSamples",
            Self::LimitViolation { .. } => "LimitViolation",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::NonFiniteInput(_) => "NonFiniteInput",
        }
    }
}

/// A planned segment: six polynomial coefficients `a0..a5` per joint and a
/// duration in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct QuinticSegment {
    coefficients: Vec<[f64; 6]>,
    duration: f64,
}

impl QuinticSegment {
    pub fn joint_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn coefficients(&self) -> &[[f64; 6]] {
        &self.coefficients
    }

    /// Joint positions at time `t` (Horner evaluation).
    pub fn position_at(&self, t: f64) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|c| ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0])
            .collect()
    }

    /// Joint velocities at time `t`, the analytic first derivative.
    pub fn velocity_at(&self, t: f64) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|c| {
                (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]
            })
            .collect()
    }

    /// Joint accelerations at time `t`, the analytic second derivative.
    pub fn acceleration_at(&self, t: f64) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|c| ((20.0 * c[5] * t + 12.0 * c[4]) * t + 6.0 * c[3]) * t + 2.0 * c[2])
            .collect()
    }
}

/// One point on a sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

/// Coefficients `a0..a5` of the unique quintic `s(t)` with
/// `s(0) = q_start`, `s'(0) = v_start`, `s''(0) = a_start` and the
/// corresponding values at `t = duration`.
#[allow(clippy::too_many_arguments)]
pub fn quintic_coefficients(
    q_start: f64,
    q_end: f64,
    v_start: f64,
    v_end: f64,
    a_start: f64,
    a_end: f64,
    duration: f64,
) -> Result<[f64; 6], TrajectoryError> {
    if duration.is_nan() || duration <= 0.0 {
        return Err(TrajectoryError::NonPositiveDuration);
    }
    let inputs = [q_start, q_end, v_start, v_end, a_start, a_end, duration];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(TrajectoryError::NonFiniteInput("boundary condition"));
    }

    let d = duration;
    let d2 = d * d;
    let d3 = d2 * d;
    let d4 = d3 * d;
    let d5 = d4 * d;
    let h = q_end - q_start;

    let a0 = q_start;
    let a1 = v_start;
    let a2 = 0.5 * a_start;
    let a3 = (20.0 * h - (8.0 * v_end + 12.0 * v_start) * d - (3.0 * a_start - a_end) * d2)
        / (2.0 * d3);
    let a4 = (-30.0 * h + (14.0 * v_end + 16.0 * v_start) * d + (3.0 * a_start - 2.0 * a_end) * d2)
        / (2.0 * d4);
    let a5 = (12.0 * h - 6.0 * (v_end + v_start) * d + (a_end - a_start) * d2) / (2.0 * d5);
    Ok([a0, a1, a2, a3, a4, a5])
}

/// Plan a rest-to-rest segment from `start` to `goal` over `duration`
/// seconds. Both endpoints must lie within the chain limits; the
/// rest-to-rest quintic is monotone per joint, so every intermediate
/// position does too.
pub fn plan_joint_trajectory(
    chain: &DHChain,
    start: &JointVector,
    goal: &JointVector,
    duration: f64,
) -> Result<QuinticSegment, TrajectoryError> {
    if start.len() != chain.len() || goal.len() != chain.len() {
        return Err(TrajectoryError::LengthMismatch {
            expected: chain.len(),
            got: if start.len() != chain.len() { start.len() } else { goal.len() },
        });
    }
    if duration.is_nan() || duration <= 0.0 {
        return Err(TrajectoryError::NonPositiveDuration);
    }
    for (k, ((row, &q0), &q1)) in
        chain.rows().iter().zip(start.iter()).zip(goal.iter()).enumerate()
    {
        if q0 < row.theta_lower || q0 > row.theta_upper || q1 < row.theta_lower
            || q1 > row.theta_upper
        {
            return Err(TrajectoryError::LimitViolation { joint_index: k });
        }
    }
    let coefficients = start
        .iter()
        .zip(goal.iter())
        .map(|(&q0, &q1)| quintic_coefficients(q0, q1, 0.0, 0.0, 0.0, 0.0, duration))
        .collect::<Result<_, _>>()?;
    Ok(QuinticSegment { coefficients, duration })
}

/// Sample a segment on a uniform grid including both endpoints.
pub fn sample_trajectory(
    segment: &QuinticSegment,
    sample_count: usize,
) -> Result<Vec<TrajectorySample>, TrajectoryError> {
    if sample_count < 2 {
        return Err(TrajectoryError::TooFewSamples { got: sample_count });
    }
    let last = (sample_count - 1) as f64;
    Ok((0..sample_count)
        .map(|i| {
            let time = segment.duration * (i as f64 / last);
            TrajectorySample {
                time,
                position: segment.position_at(time),
                velocity: segment.velocity_at(time),
                acceleration: segment.acceleration_at(time),
            }
        })
        .collect())
}

/// Render samples as CSV with header `t,q1..qN,v1..vN,a1..aN`.
pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let joints = samples.first().map_or(0, |s| s.position.len());
    let mut out = String::from("t");
    for prefix in ["q", "v", "a"] {
        for k in 1..=joints {
            out.push_str(&format!(",{prefix}{k}"));
        }
    }
    out.push('\n');
    for sample in samples {
        out.push_str(&format!("{}", sample.time));
        for series in [&sample.position, &sample.velocity, &sample.acceleration] {
            for value in series.iter() {
                out.push_str(&format!(",{value}"));
            }
        }
        out.push('\n');
    }
    out
}
