//! Inverse kinematics for the redundant 7-DOF arm via particle swarm
//! optimization.
//!
//! Candidate joint vectors are scored by a fitness that mixes position
//! error, orientation error and a weighted joint-displacement cost relative
//! to the arm's current configuration ([`fitness`]). The swarm moves under
//! inertia plus attraction to personal and global bests
//! ([`update_particle`]), with the inertia weight and both learning factors
//! following quadratic schedules over the run ([`schedule`]).
//!
//! # Reproducibility
//!
//! All randomness comes from one `ChaCha8Rng` seeded with
//! [`SwarmConfig::rng_seed`]. The stream order is fixed and documented:
//!
//! 1. initial positions, particle by particle, dimension by dimension
//!    (one uniform draw each, mapped into the joint interval);
//! 2. the position weight `omega_p`, one draw (skipped entirely when
//!    [`SwarmConfig::position_weight`] overrides it);
//! 3. per iteration, per particle, per dimension: `r1` then `r2`.
//!
//! Identical problem and config therefore give a bit-identical
//! [`IkSolution`], and an external script can replay the solve draw by draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kinematics::{
    forward_kinematics, pose_error, position_error, rotation_to_quaternion, DHChain, JointVector,
    KinematicsError, Pose,
};

/// Default RNG seed used by the CLI and by [`SwarmConfig::default`].
pub const DEFAULT_SEED: u64 = 42;

/// Errors from the IK solver.
#[derive(Debug, Error)]
pub enum IkError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("joint {joint_index} has an infinite limit; continuous joints are unsupported")]
    InfiniteLimits { joint_index: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("target quaternion is not unit norm (norm {norm})")]
    NonUnitQuaternion { norm: f64 },
    #[error("reference joints lie outside the chain limits")]
    ReferenceOutOfLimits,
    #[error("iteration {t} is outside the schedule range [0, {max}]")]
    ScheduleOutOfRange { t: u32, max: u32 },
}

impl IkError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Kinematics(inner) => inner.code(),
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::InfiniteLimits { .. } => "InfiniteLimits",
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::NonUnitQuaternion { .. } => "NonUnitQuaternion",
            Self::ReferenceOutOfLimits => "ReferenceOutOfLimits",
            Self::ScheduleOutOfRange { .. } => "ScheduleOutOfRange",
        }
    }
}

/// One swarm member.
#[derive(Debug, Clone)]
pub struct Particle {
    /// Candidate joint vector, always within the chain limits.
    pub position: Vec<f64>,
    /// Per-dimension velocity, radians per iteration.
    pub velocity: Vec<f64>,
    pub personal_best_position: Vec<f64>,
    /// Fitness of `personal_best_position`; `INFINITY` before the first
    /// evaluation.
    pub personal_best_fitness: f64,
}

/// Swarm hyperparameters.
#[derive(Debug, Clone)]
pub struct SwarmConfig {
    pub particle_count: usize,
    /// Final iteration count `T`.
    pub max_iterations: u32,
    pub w_start: f64,
    pub w_end: f64,
    pub c1_start: f64,
    pub c1_end: f64,
    pub c2_start: f64,
    pub c2_end: f64,
    /// Per-dimension velocity bound as a fraction of the joint range.
    pub velocity_clamp_fraction: f64,
    /// Stop early once the global best fitness drops below this value.
    pub early_exit_fitness: Option<f64>,
    pub rng_seed: u64,
    /// Fixed `omega_p` instead of drawing it from the seeded stream.
    pub position_weight: Option<f64>,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            particle_count: 50,
            max_iterations: 200,
            w_start: 0.9,
            w_end: 0.4,
            c1_start: 1.5,
            c1_end: 2.5,
            c2_start: 2.5,
            c2_end: 1.5,
            velocity_clamp_fraction: 0.2,
            early_exit_fitness: None,
            rng_seed: DEFAULT_SEED,
            position_weight: None,
        }
    }
}

impl SwarmConfig {
    fn check(&self) -> Result<(), IkError> {
        if self.particle_count < 2 {
            return Err(IkError::InvalidConfig("particle_count must be at least 2".into()));
        }
        if self.max_iterations < 1 {
            return Err(IkError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.velocity_clamp_fraction > 0.0 && self.velocity_clamp_fraction <= 1.0) {
            return Err(IkError::InvalidConfig(
                "velocity_clamp_fraction must lie in (0, 1]".into(),
            ));
        }
        if let Some(w) = self.position_weight {
            if !(w > 0.0 && w < 1.0) {
                return Err(IkError::InvalidConfig("position_weight must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// Weights of the fitness terms: `omega_p` on position error, `omega_o =
/// 1 - omega_p` on orientation error, and one displacement weight per joint.
#[derive(Debug, Clone)]
pub struct FitnessWeights {
    pub omega_p: f64,
    pub omega_o: f64,
    pub joint_weights: Vec<f64>,
}

impl FitnessWeights {
    pub fn new(omega_p: f64, joint_weights: Vec<f64>) -> Result<Self, IkError> {
        if !(omega_p > 0.0 && omega_p < 1.0) {
            return Err(IkError::InvalidConfig("omega_p must lie in (0, 1)".into()));
        }
        if joint_weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
            return Err(IkError::InvalidConfig("joint weights must be positive".into()));
        }
        Ok(Self { omega_p, omega_o: 1.0 - omega_p, joint_weights })
    }

    /// Displacement weights for an `n`-joint chain. The 7-joint profile
    /// penalizes proximal joints most, so corrections ride on the wrist:
    /// `(1, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1)`. Other lengths get uniform 1.0.
    pub fn default_joint_weights(n: usize) -> Vec<f64> {
        if n == 7 {
            vec![1.0, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1]
        } else {
            vec![1.0; n]
        }
    }
}

/// An inverse kinematics request: the chain, the target pose, and the arm's
/// current configuration (anchor of the displacement cost).
#[derive(Debug, Clone)]
pub struct IkProblem {
    pub chain: DHChain,
    pub target_pose: Pose,
    pub reference_joints: JointVector,
}

impl IkProblem {
    /// Build a problem, checking the target quaternion is unit and the
    /// reference configuration lies within the chain limits.
    pub fn new(
        chain: DHChain,
        target_pose: Pose,
        reference_joints: JointVector,
    ) -> Result<Self, IkError> {
        if !target_pose.orientation.is_unit(1e-6) {
            return Err(IkError::NonUnitQuaternion { norm: target_pose.orientation.norm() });
        }
        if reference_joints.len() != chain.len() {
            return Err(IkError::LengthMismatch {
                expected: chain.len(),
                got: reference_joints.len(),
            });
        }
        if !chain.within_limits(&reference_joints) {
            return Err(IkError::ReferenceOutOfLimits);
        }
        Ok(Self { chain, target_pose, reference_joints })
    }
}

/// A solved IK query with diagnostics.
#[derive(Debug, Clone)]
pub struct IkSolution {
    pub joints: JointVector,
    pub fitness: f64,
    /// Euclidean position error of `joints` against the target, meters.
    pub position_error: f64,
    /// Orientation error of `joints` against the target, radians.
    pub pose_error: f64,
    pub iterations_used: u32,
    pub converged: bool,
    pub seed: u64,
}

impl IkSolution {
    /// Canonical JSON record (keys alphabetical), one line, no trailing
    /// newline. Byte-identical for identical solves.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "joints": self.joints.as_slice(),
            "fitness": self.fitness,
            "position_error": self.position_error,
            "pose_error": self.pose_error,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "seed": self.seed,
        })
        .to_string()
    }
}

/// One per-iteration record of the solve.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: u32,
    /// Global best fitness after this iteration's evaluation.
    pub gbest_fitness: f64,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Render trace rows as CSV with header `iteration,gbest_fitness,w,c1,c2`.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,gbest_fitness,w,c1,c2\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.iteration, row.gbest_fitness, row.w, row.c1, row.c2
        ));
    }
    out
}

/// Weighted squared joint displacement of `candidate` from `reference`:
/// the sum over joints of `(weight * (candidate - reference))^2`.
pub fn flexibility_cost(
    candidate: &JointVector,
    reference: &JointVector,
    joint_weights: &[f64],
) -> Result<f64, IkError> {
    if candidate.len() != reference.len() {
        return Err(IkError::LengthMismatch { expected: reference.len(), got: candidate.len() });
    }
    if joint_weights.len() != candidate.len() {
        return Err(IkError::LengthMismatch {
            expected: candidate.len(),
            got: joint_weights.len(),
        });
    }
    let mut sum = 0.0;
    for ((&theta, &prev), &weight) in
        candidate.iter().zip(reference.iter()).zip(joint_weights)
    {
        let term = weight * (theta - prev);
        sum += term * term;
    }
    Ok(sum)
}

/// Fitness of a candidate: `omega_p * E_position + omega_o *
/// E_orientation + flexibility`, all terms non-negative. Zero only when
/// the candidate reaches the target exactly from the reference
/// configuration.
pub fn fitness(
    candidate: &JointVector,
    problem: &IkProblem,
    weights: &FitnessWeights,
) -> Result<f64, IkError> {
    let transform = forward_kinematics(&problem.chain, candidate)?;
    let e_position = position_error(&transform.position, &problem.target_pose.position)?;
    let current_orientation = rotation_to_quaternion(&transform.rotation)?;
    let e_orientation = pose_error(&current_orientation, &problem.target_pose.orientation)?;
    let flexibility =
        flexibility_cost(candidate, &problem.reference_joints, &weights.joint_weights)?;
    Ok(weights.omega_p * e_position + weights.omega_o * e_orientation + flexibility)
}

/// Inertia weight and learning factors at iteration `t` of `T`:
/// each follows `X(t) = (Xs - Xe)(t/T)^2 + (Xe - Xs)(2t/T) + Xs`,
/// running from the start value at `t = 0` to the end value at `t = T`.
pub fn schedule(t: u32, config: &SwarmConfig) -> Result<(f64, f64, f64), IkError> {
    if t > config.max_iterations {
        return Err(IkError::ScheduleOutOfRange { t, max: config.max_iterations });
    }
    let r = f64::from(t) / f64::from(config.max_iterations);
    let quadratic =
        |xs: f64, xe: f64| (xs - xe) * (r * r) + (xe - xs) * (2.0 * r) + xs;
    Ok((
        quadratic(config.w_start, config.w_end),
        quadratic(config.c1_start, config.c1_end),
        quadratic(config.c2_start, config.c2_end),
    ))
}

/// One velocity/position update. Draws `r1` then `r2` per dimension from
/// `rng`, clamps the velocity to `velocity_clamp_fraction` of the joint
/// range, steps the position, and pins it to the limits (zeroing the
/// velocity on any pinned dimension). Personal-best fields pass through
/// unchanged.
#[allow(clippy::too_many_arguments)]
pub fn update_particle<R: Rng>(
    particle: &Particle,
    gbest: &[f64],
    w: f64,
    c1: f64,
    c2: f64,
    chain: &DHChain,
    velocity_clamp_fraction: f64,
    rng: &mut R,
) -> Particle {
    let dims = particle.position.len();
    let mut position = Vec::with_capacity(dims);
    let mut velocity = Vec::with_capacity(dims);
    for (k, row) in chain.rows().iter().enumerate() {
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let mut v = w * particle.velocity[k]
            + c1 * r1 * (particle.personal_best_position[k] - particle.position[k])
            + c2 * r2 * (gbest[k] - particle.position[k]);
        let v_max = velocity_clamp_fraction * row.range();
        v = v.clamp(-v_max, v_max);
        let mut x = particle.position[k] + v;
        if x < row.theta_lower {
            x = row.theta_lower;
            v = 0.0;
        } else if x > row.theta_upper {
            x = row.theta_upper;
            v = 0.0;
        }
        position.push(x);
        velocity.push(v);
    }
    Particle {
        position,
        velocity,
        personal_best_position: particle.personal_best_position.clone(),
        personal_best_fitness: particle.personal_best_fitness,
    }
}

/// Solve the inverse kinematics problem.
///
/// Runs the full swarm loop: evaluate fitness, refresh personal bests
/// (strictly smaller only), pick the global best (first index wins ties),
/// advance the schedules, move the particles. Stops after
/// `max_iterations`, or earlier once the global best drops below
/// `early_exit_fitness`.
pub fn solve_ik(problem: &IkProblem, config: &SwarmConfig) -> Result<IkSolution, IkError> {
    solve_inner(problem, config, None).map(|(solution, _)| solution)
}

/// Like [`solve_ik`], also returning the per-iteration trace.
pub fn solve_ik_traced(
    problem: &IkProblem,
    config: &SwarmConfig,
) -> Result<(IkSolution, Vec<TraceRow>), IkError> {
    solve_inner(problem, config, None)
}

/// Callback invoked with the particle set after each iteration's move.
pub type SwarmObserver<'a> = dyn FnMut(u32, &[Particle]) + 'a;

/// Like [`solve_ik_traced`], invoking `observer` with the particle set
/// after each move so tests can watch intermediate swarm state.
pub fn solve_ik_observed(
    problem: &IkProblem,
    config: &SwarmConfig,
    observer: &mut SwarmObserver<'_>,
) -> Result<(IkSolution, Vec<TraceRow>), IkError> {
    solve_inner(problem, config, Some(observer))
}

fn solve_inner(
    problem: &IkProblem,
    config: &SwarmConfig,
    mut observer: Option<&mut SwarmObserver<'_>>,
) -> Result<(IkSolution, Vec<TraceRow>), IkError> {
    config.check()?;
    let chain = &problem.chain;
    if let Some(joint_index) = chain.rows().iter().position(|row| !row.limits_finite()) {
        return Err(IkError::InfiniteLimits { joint_index });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let dims = chain.len();

    // Stream step 1: initial positions.
    let mut particles: Vec<Particle> = (0..config.particle_count)
        .map(|_| {
            let position: Vec<f64> = chain
                .rows()
                .iter()
                .map(|row| {
                    let u: f64 = rng.random();
                    row.theta_lower + u * row.range()
                })
                .collect();
            Particle {
                velocity: vec![0.0; dims],
                personal_best_position: position.clone(),
                personal_best_fitness: f64::INFINITY,
                position,
            }
        })
        .collect();

    // Stream step 2: the position weight.
    let omega_p = match config.position_weight {
        Some(w) => w,
        None => {
            let u: f64 = rng.random();
            u.max(f64::EPSILON)
        }
    };
    let weights = FitnessWeights::new(omega_p, FitnessWeights::default_joint_weights(dims))?;

    let mut gbest_position = particles[0].position.clone();
    let mut gbest_fitness = f64::INFINITY;
    let mut trace = Vec::with_capacity(config.max_iterations as usize);
    let mut iterations_used = config.max_iterations;
    let mut converged = false;

    for t in 0..config.max_iterations {
        for particle in &mut particles {
            let value = fitness(&JointVector::new(particle.position.clone()), problem, &weights)?;
            if value < particle.personal_best_fitness {
                particle.personal_best_fitness = value;
                particle.personal_best_position.copy_from_slice(&particle.position);
            }
        }
        // Global best: minimum over personal bests, first index on ties.
        gbest_fitness = f64::INFINITY;
        for particle in &particles {
            if particle.personal_best_fitness < gbest_fitness {
                gbest_fitness = particle.personal_best_fitness;
                gbest_position.copy_from_slice(&particle.personal_best_position);
            }
        }

        let (w, c1, c2) = schedule(t, config)?;
        trace.push(TraceRow { iteration: t, gbest_fitness, w, c1, c2 });

        if let Some(threshold) = config.early_exit_fitness {
            if gbest_fitness < threshold {
                iterations_used = t + 1;
                converged = true;
                break;
            }
        }

        // Stream step 3: move draws, particle by particle.
        for particle in &mut particles {
            *particle = update_particle(
                particle,
                &gbest_position,
                w,
                c1,
                c2,
                chain,
                config.velocity_clamp_fraction,
                &mut rng,
            );
        }
        if let Some(observer) = observer.as_deref_mut() {
            observer(t, &particles);
        }
    }

    let joints = JointVector::new(gbest_position);
    let transform = forward_kinematics(chain, &joints)?;
    let solution_position_error =
        position_error(&transform.position, &problem.target_pose.position)?;
    let solution_pose_error = pose_error(
        &rotation_to_quaternion(&transform.rotation)?,
        &problem.target_pose.orientation,
    )?;

    Ok((
        IkSolution {
            joints,
            fitness: gbest_fitness,
            position_error: solution_position_error,
            pose_error: solution_pose_error,
            iterations_used,
            converged,
            seed: config.rng_seed,
        },
        trace,
    ))
}
