//! Physical/digital state synchronization.
//!
//! The physical side publishes telemetry (joint states, odometry) as
//! newline-delimited JSON messages; the digital mirror applies them in seq
//! order. Commands (arm targets, base goals) flow the other way and are
//! never logged: the session log is exactly the telemetry stream, so
//! replaying a complete log rebuilds the digital state bit for bit.
//!
//! [`simulate_physical`] stands in for the real robot: arm commands are
//! executed through a quintic joint trajectory sampled at 10 Hz, base
//! commands as a straight-line translation followed by an in-place
//! rotation at fixed step counts. [`audit_consistency`] replays a session
//! log into a fresh mirror and reports the divergence from the recorded
//! physical state.

use serde_json::Value;
use thiserror::Error;

use crate::kinematics::{DHChain, JointVector};
use crate::trajectory::{plan_joint_trajectory, sample_trajectory};

/// Telemetry sampling rate for arm motion, messages per second.
pub const ARM_SAMPLE_HZ: f64 = 10.0;
/// Translation steps emitted for one base move command.
pub const MOVE_TRANSLATION_STEPS: usize = 10;
/// Rotation steps emitted after the translation.
pub const MOVE_ROTATION_STEPS: usize = 5;
/// Milliseconds between consecutive base-motion messages.
pub const MOVE_STEP_MS: u64 = 100;

/// What went wrong while decoding a message line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeFault {
    /// Not valid JSON, or required fields missing/of the wrong type.
    Malformed(String),
    /// The `kind` field names no known message kind.
    UnknownKind(String),
    /// The payload shape does not match the kind (e.g. wrong joint count).
    ArityMismatch(String),
}

/// Errors from the twin link.
#[derive(Debug, Error)]
pub enum TwinError {
    #[error("decode error: {0:?}")]
    DecodeError(DecodeFault),
    #[error("stale message: seq {seq} <= last seq {last_seq}")]
    StaleMessage { seq: u64, last_seq: u64 },
    #[error("joint {joint_index} outside the arm limits")]
    LimitViolation { joint_index: usize },
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("script line {line}: {message}")]
    ScriptError { line: usize, message: String },
}

impl TwinError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::DecodeError(_) => "DecodeError",
            Self::StaleMessage { .. } => "StaleMessage",
            Self::LimitViolation { .. } => "LimitViolation",
            Self::InvalidCommand(_) => "InvalidCommand",
            Self::ScriptError { .. } => "ScriptError",
        }
    }
}

/// Planar base pose: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl BasePose {
    pub const ORIGIN: Self = Self { x: 0.0, y: 0.0, heading: 0.0 };
}

/// Kind-specific payload of a [`TwinMessage`].
#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    /// Arm telemetry: the seven joint angles.
    JointState([f64; 7]),
    /// Base telemetry.
    Odometry(BasePose),
    /// Digital-to-physical base goal.
    MoveCommand(BasePose),
    /// Digital-to-physical arm goal with motion duration in seconds.
    ArmCommand { target: [f64; 7], duration_s: f64 },
}

impl MessageBody {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::JointState(_) => "JointState",
            Self::Odometry(_) => "Odometry",
            Self::MoveCommand(_) => "MoveCommand",
            Self::ArmCommand { .. } => "ArmCommand",
        }
    }

    pub fn is_command(&self) -> bool {
        matches!(self, Self::MoveCommand(_) | Self::ArmCommand { .. })
    }
}

/// One protocol message. `seq` values increase strictly within a session
/// log.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinMessage {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub body: MessageBody,
}

/// Mirrored robot state on either side of the link.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinState {
    pub base_pose: BasePose,
    pub arm_joints: JointVector,
    pub last_seq: u64,
}

impl TwinState {
    /// Home state: base at the origin, arm at the all-zero configuration.
    pub fn home() -> Self {
        Self { base_pose: BasePose::ORIGIN, arm_joints: JointVector::zeros(7), last_seq: 0 }
    }

    /// JSON value with alphabetical keys, parseable by [`TwinState::from_json`].
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "arm_joints": self.arm_joints.as_slice(),
            "base_pose": { "heading": self.base_pose.heading, "x": self.base_pose.x, "y": self.base_pose.y },
            "last_seq": self.last_seq,
        })
    }

    pub fn from_json(value: &Value) -> Result<Self, TwinError> {
        let malformed = |msg: &str| TwinError::DecodeError(DecodeFault::Malformed(msg.into()));
        let joints = value
            .get("arm_joints")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed("missing arm_joints"))?;
        let arm = parse_joint_array(joints)?;
        check_arm_limits(&arm)?;
        let base = value.get("base_pose").ok_or_else(|| malformed("missing base_pose"))?;
        let field = |name: &str| {
            base.get(name).and_then(Value::as_f64).ok_or_else(|| {
                TwinError::DecodeError(DecodeFault::Malformed(format!("missing base_pose.{name}")))
            })
        };
        let base_pose = BasePose { x: field("x")?, y: field("y")?, heading: field("heading")? };
        let last_seq = value
            .get("last_seq")
            .and_then(Value::as_u64)
            .ok_or_else(|| malformed("missing last_seq"))?;
        Ok(Self { base_pose, arm_joints: JointVector::new(arm.to_vec()), last_seq })
    }
}

/// A recorded synchronization session.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    /// State both mirrors started from.
    pub initial_state: TwinState,
    pub physical_state: TwinState,
    pub digital_state: TwinState,
    /// The telemetry stream, in seq order.
    pub log: Vec<TwinMessage>,
}

impl Session {
    pub fn new(initial: TwinState) -> Self {
        Self {
            initial_state: initial.clone(),
            physical_state: initial.clone(),
            digital_state: initial,
            log: Vec::new(),
        }
    }
}

/// Consistency report from [`audit_consistency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    /// Largest per-joint angle gap between the replayed mirror and the
    /// physical state, radians.
    pub max_joint_divergence: f64,
    /// Base pose gap: planar distance (m) or heading gap (rad), whichever
    /// is larger. Zero only when the poses are identical.
    pub max_base_divergence: f64,
    pub synchronized: bool,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "max_joint_divergence": self.max_joint_divergence,
            "max_base_divergence": self.max_base_divergence,
            "synchronized": self.synchronized,
        })
        .to_string()
    }
}

fn json_num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite float")
}

/// Encode a message as one canonical JSON line (no trailing newline):
/// `{"seq":..,"timestamp_ms":..,"kind":"..","payload":..}`.
pub fn encode(message: &TwinMessage) -> String {
    let payload = match &message.body {
        MessageBody::JointState(joints) => {
            serde_json::to_string(&joints[..]).expect("finite floats")
        }
        MessageBody::Odometry(pose) | MessageBody::MoveCommand(pose) => format!(
            "{{\"x\":{},\"y\":{},\"heading\":{}}}",
            json_num(pose.x),
            json_num(pose.y),
            json_num(pose.heading)
        ),
        MessageBody::ArmCommand { target, duration_s } => format!(
            "{{\"target\":{},\"duration_s\":{}}}",
            serde_json::to_string(&target[..]).expect("finite floats"),
            json_num(*duration_s)
        ),
    };
    format!(
        "{{\"seq\":{},\"timestamp_ms\":{},\"kind\":\"{}\",\"payload\":{}}}",
        message.seq,
        message.timestamp_ms,
        message.body.kind(),
        payload
    )
}

fn parse_joint_array(values: &[Value]) -> Result<[f64; 7], TwinError> {
    if values.len() != 7 {
        return Err(TwinError::DecodeError(DecodeFault::ArityMismatch(format!(
            "expected 7 joints, got {}",
            values.len()
        ))));
    }
    let mut joints = [0.0; 7];
    for (slot, value) in joints.iter_mut().zip(values) {
        *slot = value.as_f64().ok_or_else(|| {
            TwinError::DecodeError(DecodeFault::Malformed("joint value is not a number".into()))
        })?;
    }
    Ok(joints)
}

fn parse_pose(payload: &Value) -> Result<BasePose, TwinError> {
    let field = |name: &str| {
        payload.get(name).and_then(Value::as_f64).ok_or_else(|| {
            TwinError::DecodeError(DecodeFault::ArityMismatch(format!("missing field '{name}'")))
        })
    };
    Ok(BasePose { x: field("x")?, y: field("y")?, heading: field("heading")? })
}

/// Decode one message line; the exact inverse of [`encode`].
pub fn decode(line: &str) -> Result<TwinMessage, TwinError> {
    let malformed = |msg: String| TwinError::DecodeError(DecodeFault::Malformed(msg));
    let value: Value =
        serde_json::from_str(line).map_err(|e| malformed(format!("bad JSON: {e}")))?;
    let object = value.as_object().ok_or_else(|| malformed("line is not an object".into()))?;
    let seq = object
        .get("seq")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("missing integer 'seq'".into()))?;
    let timestamp_ms = object
        .get("timestamp_ms")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("missing integer 'timestamp_ms'".into()))?;
    let kind = object
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| malformed("missing string 'kind'".into()))?;
    let payload = object.get("payload").ok_or_else(|| malformed("missing 'payload'".into()))?;

    let body = match kind {
        "JointState" => {
            let values = payload.as_array().ok_or_else(|| {
                TwinError::DecodeError(DecodeFault::ArityMismatch(
                    "JointState payload must be an array".into(),
                ))
            })?;
            MessageBody::JointState(parse_joint_array(values)?)
        }
        "Odometry" => MessageBody::Odometry(parse_pose(payload)?),
        "MoveCommand" => MessageBody::MoveCommand(parse_pose(payload)?),
        "ArmCommand" => {
            let target = payload
                .get("target")
                .and_then(Value::as_array)
                .ok_or_else(|| {
                    TwinError::DecodeError(DecodeFault::ArityMismatch(
                        "ArmCommand payload needs a 'target' array".into(),
                    ))
                })?;
            let duration_s = payload.get("duration_s").and_then(Value::as_f64).ok_or_else(|| {
                TwinError::DecodeError(DecodeFault::ArityMismatch(
                    "ArmCommand payload needs 'duration_s'".into(),
                ))
            })?;
            MessageBody::ArmCommand { target: parse_joint_array(target)?, duration_s }
        }
        other => return Err(TwinError::DecodeError(DecodeFault::UnknownKind(other.into()))),
    };
    Ok(TwinMessage { seq, timestamp_ms, body })
}

fn check_arm_limits(joints: &[f64; 7]) -> Result<(), TwinError> {
    let chain = DHChain::tiago_arm_7dof();
    for (k, (row, &theta)) in chain.rows().iter().zip(joints).enumerate() {
        if theta < row.theta_lower || theta > row.theta_upper {
            return Err(TwinError::LimitViolation { joint_index: k });
        }
    }
    Ok(())
}

/// Apply one message to a state mirror. Telemetry replaces the matching
/// state fields; commands leave the mirrored robot state untouched (they
/// travel the other direction). Every accepted message advances
/// `last_seq`; a message at or below `last_seq` is stale and rejected.
pub fn apply_to_digital(state: &TwinState, message: &TwinMessage) -> Result<TwinState, TwinError> {
    if message.seq <= state.last_seq {
        return Err(TwinError::StaleMessage { seq: message.seq, last_seq: state.last_seq });
    }
    let mut next = state.clone();
    next.last_seq = message.seq;
    match &message.body {
        MessageBody::JointState(joints) => {
            check_arm_limits(joints)?;
            next.arm_joints = JointVector::new(joints.to_vec());
        }
        MessageBody::Odometry(pose) => next.base_pose = *pose,
        MessageBody::MoveCommand(_) | MessageBody::ArmCommand { .. } => {}
    }
    Ok(next)
}

/// Execute a command on the simulated physical robot, producing the
/// telemetry stream it would publish. Seq numbers continue contiguously
/// from `state.last_seq`; timestamps offset from the command's.
///
/// Arm commands run a rest-to-rest quintic sampled at [`ARM_SAMPLE_HZ`]
/// (both endpoints included, final sample exactly at the target). Move
/// commands translate in a straight line over [`MOVE_TRANSLATION_STEPS`]
/// steps, then rotate in place over [`MOVE_ROTATION_STEPS`] steps, ending
/// exactly at the goal.
pub fn simulate_physical(
    state: &TwinState,
    command: &TwinMessage,
) -> Result<Vec<TwinMessage>, TwinError> {
    match &command.body {
        MessageBody::ArmCommand { target, duration_s } => {
            if !(duration_s.is_finite() && *duration_s > 0.0) {
                return Err(TwinError::InvalidCommand(format!(
                    "arm command duration must be positive, got {duration_s}"
                )));
            }
            check_arm_limits(target)?;
            let chain = DHChain::tiago_arm_7dof();
            let goal = JointVector::new(target.to_vec());
            let segment = plan_joint_trajectory(&chain, &state.arm_joints, &goal, *duration_s)
                .map_err(|e| TwinError::InvalidCommand(e.to_string()))?;
            let count = ((duration_s * ARM_SAMPLE_HZ).round() as usize + 1).max(2);
            let samples = sample_trajectory(&segment, count)
                .map_err(|e| TwinError::InvalidCommand(e.to_string()))?;
            let last = samples.len() - 1;
            Ok(samples
                .iter()
                .enumerate()
                .map(|(i, sample)| {
                    let joints: [f64; 7] = if i == last {
                        *target
                    } else {
                        sample.position.as_slice().try_into().expect("7 joints")
                    };
                    TwinMessage {
                        seq: state.last_seq + 1 + i as u64,
                        timestamp_ms: command.timestamp_ms
                            + (sample.time * 1000.0).round() as u64,
                        body: MessageBody::JointState(joints),
                    }
                })
                .collect())
        }
        MessageBody::MoveCommand(goal) => {
            let start = state.base_pose;
            let mut messages = Vec::with_capacity(MOVE_TRANSLATION_STEPS + MOVE_ROTATION_STEPS);
            let mut seq = state.last_seq;
            let mut timestamp = command.timestamp_ms;
            for k in 1..=MOVE_TRANSLATION_STEPS {
                let f = k as f64 / MOVE_TRANSLATION_STEPS as f64;
                let pose = if k == MOVE_TRANSLATION_STEPS {
                    BasePose { x: goal.x, y: goal.y, heading: start.heading }
                } else {
                    BasePose {
                        x: start.x + f * (goal.x - start.x),
                        y: start.y + f * (goal.y - start.y),
                        heading: start.heading,
                    }
                };
                seq += 1;
                timestamp += MOVE_STEP_MS;
                messages.push(TwinMessage { seq, timestamp_ms: timestamp, body: MessageBody::Odometry(pose) });
            }
            for k in 1..=MOVE_ROTATION_STEPS {
                let f = k as f64 / MOVE_ROTATION_STEPS as f64;
                let heading = if k == MOVE_ROTATION_STEPS {
                    goal.heading
                } else {
                    start.heading + f * (goal.heading - start.heading)
                };
                seq += 1;
                timestamp += MOVE_STEP_MS;
                messages.push(TwinMessage {
                    seq,
                    timestamp_ms: timestamp,
                    body: MessageBody::Odometry(BasePose { x: goal.x, y: goal.y, heading }),
                });
            }
            Ok(messages)
        }
        other => Err(TwinError::InvalidCommand(format!(
            "'{}' is telemetry, not a command",
            other.kind()
        ))),
    }
}

/// A parsed session-script command.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptCommand {
    Move(BasePose),
    Arm { target: [f64; 7], duration_s: f64 },
}

impl ScriptCommand {
    fn to_body(&self) -> MessageBody {
        match self {
            Self::Move(pose) => MessageBody::MoveCommand(*pose),
            Self::Arm { target, duration_s } => {
                MessageBody::ArmCommand { target: *target, duration_s: *duration_s }
            }
        }
    }
}

/// Parse a session script: one command per line, `#` comments.
///
/// ```text
/// move <x> <y> <heading>
/// arm <t1> <t2> <t3> <t4> <t5> <t6> <t7> <duration_s>
/// ```
pub fn parse_script(text: &str) -> Result<Vec<ScriptCommand>, TwinError> {
    let mut commands = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let parse = |token: &str| {
            token.parse::<f64>().map_err(|_| TwinError::ScriptError {
                line: line_no,
                message: format!("bad number '{token}'"),
            })
        };
        match tokens.as_slice() {
            ["move", x, y, heading] => commands.push(ScriptCommand::Move(BasePose {
                x: parse(x)?,
                y: parse(y)?,
                heading: parse(heading)?,
            })),
            ["arm", rest @ ..] if rest.len() == 8 => {
                let mut values = [0.0; 8];
                for (slot, token) in values.iter_mut().zip(rest) {
                    *slot = parse(token)?;
                }
                let target: [f64; 7] = values[..7].try_into().expect("7 joints");
                commands.push(ScriptCommand::Arm { target, duration_s: values[7] });
            }
            _ => {
                return Err(TwinError::ScriptError {
                    line: line_no,
                    message: format!("expected 'move x y heading' or 'arm t1..t7 duration', got '{line}'"),
                })
            }
        }
    }
    Ok(commands)
}

/// Drive a full session: execute each command on the physical simulator,
/// stream the telemetry into both mirrors, and record the log.
pub fn run_session(
    initial: &TwinState,
    commands: &[ScriptCommand],
) -> Result<Session, TwinError> {
    let mut session = Session::new(initial.clone());
    let mut clock = 0u64;
    for command in commands {
        let command_message = TwinMessage {
            seq: session.physical_state.last_seq,
            timestamp_ms: clock,
            body: command.to_body(),
        };
        let messages = simulate_physical(&session.physical_state, &command_message)?;
        for message in messages {
            session.physical_state = apply_to_digital(&session.physical_state, &message)?;
            session.digital_state = apply_to_digital(&session.digital_state, &message)?;
            clock = message.timestamp_ms;
            session.log.push(message);
        }
    }
    Ok(session)
}

/// Replay the session log into a fresh mirror (initialized from the
/// session's initial state) and measure the divergence from the recorded
/// physical state. Stale or invalid log entries are skipped.
pub fn audit_consistency(session: &Session) -> AuditReport {
    let mut mirror = session.initial_state.clone();
    for message in &session.log {
        if let Ok(next) = apply_to_digital(&mirror, message) {
            mirror = next;
        }
    }
    let physical = &session.physical_state;
    let max_joint_divergence = mirror
        .arm_joints
        .iter()
        .zip(physical.arm_joints.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let dx = mirror.base_pose.x - physical.base_pose.x;
    let dy = mirror.base_pose.y - physical.base_pose.y;
    let dheading = (mirror.base_pose.heading - physical.base_pose.heading).abs();
    let max_base_divergence = dx.hypot(dy).max(dheading);
    AuditReport {
        max_joint_divergence,
        max_base_divergence,
        synchronized: max_joint_divergence == 0.0 && max_base_divergence == 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn joint_state(seq: u64, joints: [f64; 7]) -> TwinMessage {
        TwinMessage { seq, timestamp_ms: seq * 100, body: MessageBody::JointState(joints) }
    }

    #[test]
    fn encode_joint_state_golden_line() {
        let message = joint_state(1, [0.0; 7]);
        let line = encode(&message);
        assert_eq!(
            line,
            "{\"seq\":1,\"timestamp_ms\":100,\"kind\":\"JointState\",\
             \"payload\":[0.0,0.0,0.0,0.0,0.0,0.0,0.0]}"
        );
        assert_eq!(decode(&line).unwrap(), message);
    }

    #[test]
    fn decode_rejects_unknown_kind() {
        let line = "{\"seq\":1,\"timestamp_ms\":0,\"kind\":\"Teleport\",\"payload\":[]}";
        match decode(line) {
            Err(TwinError::DecodeError(DecodeFault::UnknownKind(kind))) => {
                assert_eq!(kind, "Teleport")
            }
            other => panic!("expected UnknownKind, got {other:?}"),
        }
    }

    #[test]
    fn decode_rejects_wrong_arity() {
        let line = "{\"seq\":1,\"timestamp_ms\":0,\"kind\":\"JointState\",\"payload\":[1,2,3]}";
        assert!(matches!(
            decode(line),
            Err(TwinError::DecodeError(DecodeFault::ArityMismatch(_)))
        ));
    }

    #[test]
    fn decode_rejects_malformed_line() {
        assert!(matches!(
            decode("not json at all"),
            Err(TwinError::DecodeError(DecodeFault::Malformed(_)))
        ));
        assert!(matches!(
            decode("{\"seq\":1}"),
            Err(TwinError::DecodeError(DecodeFault::Malformed(_)))
        ));
    }

    #[test]
    fn apply_joint_state_replaces_arm() {
        let state = TwinState::home();
        let message = joint_state(1, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        let next = apply_to_digital(&state, &message).unwrap();
        assert_eq!(next.arm_joints.as_slice(), &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        assert_eq!(next.last_seq, 1);
        assert_eq!(next.base_pose, BasePose::ORIGIN);
    }

    #[test]
    fn apply_rejects_stale_seq() {
        let state = TwinState { last_seq: 5, ..TwinState::home() };
        let err = apply_to_digital(&state, &joint_state(5, [0.0; 7])).unwrap_err();
        assert!(matches!(err, TwinError::StaleMessage { seq: 5, last_seq: 5 }));
    }

    #[test]
    fn apply_rejects_out_of_limit_joints() {
        let state = TwinState::home();
        let mut joints = [0.0; 7];
        joints[0] = 3.0; // beyond joint 1 upper limit 2.75
        assert!(matches!(
            apply_to_digital(&state, &joint_state(1, joints)),
            Err(TwinError::LimitViolation { joint_index: 0 })
        ));
    }

    #[test]
    fn commands_do_not_mutate_the_mirror() {
        let state = TwinState::home();
        let command = TwinMessage {
            seq: 1,
            timestamp_ms: 0,
            body: MessageBody::MoveCommand(BasePose { x: 5.0, y: 5.0, heading: 1.0 }),
        };
        let next = apply_to_digital(&state, &command).unwrap();
        assert_eq!(next.base_pose, state.base_pose);
        assert_eq!(next.arm_joints, state.arm_joints);
        assert_eq!(next.last_seq, 1);
    }

    #[test]
    fn arm_command_to_current_joints_holds_still() {
        let state = TwinState::home();
        let command = TwinMessage {
            seq: 0,
            timestamp_ms: 0,
            body: MessageBody::ArmCommand { target: [0.0; 7], duration_s: 1.0 },
        };
        let messages = simulate_physical(&state, &command).unwrap();
        assert_eq!(messages.len(), 11);
        for message in &messages {
            match &message.body {
                MessageBody::JointState(joints) => assert_eq!(joints, &[0.0; 7]),
                other => panic!("expected JointState, got {}", other.kind()),
            }
        }
    }

    #[test]
    fn arm_command_samples_at_ten_hz_with_exact_endpoints() {
        let state = TwinState::home();
        let target = [0.5, 0.3, -0.4, 0.8, 0.2, -0.3, 0.6];
        let command = TwinMessage {
            seq: 0,
            timestamp_ms: 0,
            body: MessageBody::ArmCommand { target, duration_s: 1.0 },
        };
        let messages = simulate_physical(&state, &command).unwrap();
        assert_eq!(messages.len(), 11);
        let seqs: Vec<u64> = messages.iter().map(|m| m.seq).collect();
        assert_eq!(seqs, (1..=11).collect::<Vec<_>>());
        match &messages[0].body {
            MessageBody::JointState(joints) => assert_eq!(joints, &[0.0; 7]),
            _ => unreachable!(),
        }
        match &messages[10].body {
            MessageBody::JointState(joints) => assert_eq!(joints, &target),
            _ => unreachable!(),
        }
    }

    #[test]
    fn arm_command_rejects_out_of_limit_target() {
        let state = TwinState::home();
        let mut target = [0.0; 7];
        target[2] = -4.0; // below joint 3 lower limit -3.53
        let command = TwinMessage {
            seq: 0,
            timestamp_ms: 0,
            body: MessageBody::ArmCommand { target, duration_s: 1.0 },
        };
        assert!(matches!(
            simulate_physical(&state, &command),
            Err(TwinError::LimitViolation { joint_index: 2 })
        ));
    }

    #[test]
    fn move_command_translates_then_rotates() {
        let state = TwinState::home();
        let goal = BasePose { x: 1.0, y: 0.0, heading: 0.0 };
        let command =
            TwinMessage { seq: 0, timestamp_ms: 0, body: MessageBody::MoveCommand(goal) };
        let messages = simulate_physical(&state, &command).unwrap();
        assert_eq!(messages.len(), MOVE_TRANSLATION_STEPS + MOVE_ROTATION_STEPS);
        let mut previous_x = 0.0;
        for message in &messages {
            match &message.body {
                MessageBody::Odometry(pose) => {
                    assert!(pose.x >= previous_x, "x must be monotone");
                    previous_x = pose.x;
                }
                other => panic!("expected Odometry, got {}", other.kind()),
            }
        }
        match &messages.last().unwrap().body {
            MessageBody::Odometry(pose) => assert_eq!(*pose, goal),
            _ => unreachable!(),
        }
    }

    #[test]
    fn telemetry_is_not_a_command() {
        let state = TwinState::home();
        let message = joint_state(1, [0.0; 7]);
        assert!(matches!(
            simulate_physical(&state, &message),
            Err(TwinError::InvalidCommand(_))
        ));
    }

    #[test]
    fn session_replay_is_synchronized() {
        let commands = parse_script(
            "# demo\n\
             arm 0.5 0.2 -0.3 0.8 0.1 -0.2 0.4 1.0\n\
             move 1.5 -0.5 0.7\n\
             arm 0.2 0.0 0.0 1.2 0.0 0.0 0.0 0.5\n",
        )
        .unwrap();
        let session = run_session(&TwinState::home(), &commands).unwrap();
        assert_eq!(session.digital_state, session.physical_state);
        let report = audit_consistency(&session);
        assert!(report.synchronized);
        assert_eq!(report.max_joint_divergence, 0.0);
        assert_eq!(report.max_base_divergence, 0.0);
    }

    #[test]
    fn truncated_log_is_flagged() {
        let commands = parse_script("move 1.0 0.5 0.7\n").unwrap();
        let mut session = run_session(&TwinState::home(), &commands).unwrap();
        session.log.pop().unwrap();
        let report = audit_consistency(&session);
        assert!(!report.synchronized);
        // The dropped message was the final rotation step; the divergence
        // is exactly that step's heading delta: 0.7 - 0.7 * 4/5.
        let expected = 0.7 - 0.7 * (4.0 / 5.0);
        assert!((report.max_base_divergence - expected).abs() < 1e-12);
        assert_eq!(report.max_joint_divergence, 0.0);
    }

    #[test]
    fn empty_log_with_equal_states_is_synchronized() {
        let session = Session::new(TwinState::home());
        let report = audit_consistency(&session);
        assert!(report.synchronized);
    }

    #[test]
    fn redelivered_prefix_changes_nothing() {
        let commands = parse_script("arm 0.3 0.1 0.0 0.5 0.0 0.0 0.0 0.6\n").unwrap();
        let session = run_session(&TwinState::home(), &commands).unwrap();
        let mut mirror = session.initial_state.clone();
        for message in &session.log {
            mirror = apply_to_digital(&mirror, message).unwrap();
        }
        let settled = mirror.clone();
        for message in &session.log[..3] {
            assert!(matches!(
                apply_to_digital(&mirror, message),
                Err(TwinError::StaleMessage { .. })
            ));
        }
        assert_eq!(mirror, settled);
    }

    #[test]
    fn script_parse_errors_carry_line_numbers() {
        let err = parse_script("move 1 2\n").unwrap_err();
        assert!(matches!(err, TwinError::ScriptError { line: 1, .. }));
        let err = parse_script("# ok\narm 1 2 3\n").unwrap_err();
        assert!(matches!(err, TwinError::ScriptError { line: 2, .. }));
    }

    #[test]
    fn twin_state_json_round_trip() {
        let state = TwinState {
            base_pose: BasePose { x: 1.5, y: -0.25, heading: 0.75 },
            arm_joints: JointVector::new(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]),
            last_seq: 12,
        };
        let round = TwinState::from_json(&state.to_json()).unwrap();
        assert_eq!(state, round);
    }

    prop_compose! {
        fn arbitrary_message()(
            seq in 0u64..1_000_000,
            timestamp in 0u64..1_000_000_000,
            kind in 0..4usize,
            floats in proptest::collection::vec(-3.0..3.0f64, 8),
        ) -> TwinMessage {
            let joints: [f64; 7] = floats[..7].try_into().unwrap();
            let pose = BasePose { x: floats[0], y: floats[1], heading: floats[2] };
            let body = match kind {
                0 => MessageBody::JointState(joints),
                1 => MessageBody::Odometry(pose),
                2 => MessageBody::MoveCommand(pose),
                _ => MessageBody::ArmCommand { target: joints, duration_s: floats[7].abs() + 0.1 },
            };
            TwinMessage { seq, timestamp_ms: timestamp, body }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn encode_decode_fixpoint(message in arbitrary_message()) {
            let line = encode(&message);
            let decoded = decode(&line).unwrap();
            prop_assert_eq!(&decoded, &message);
            prop_assert_eq!(encode(&decoded), line);
        }
    }
}
