//! Command-line front end: URDF inspection, forward/inverse kinematics,
//! trajectory planning, scene checks, and twin-session tooling.
//!
//! Exit codes: 0 success, 1 domain error (the module's machine-readable
//! code is printed as `error[Code]: ...`), 2 usage error. All output is
//! deterministic: identical arguments and seed give byte-identical bytes.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use twinkin::ik_pso::{
    solve_ik_traced, trace_csv, IkProblem, SwarmConfig, DEFAULT_SEED,
};
use twinkin::kinematics::{
    forward_kinematics, rotation_to_quaternion, DHChain, JointVector, Pose, Quaternion,
};
use twinkin::scene::{load_scene, Action, Verdict};
use twinkin::trajectory::{plan_joint_trajectory, sample_trajectory, trajectory_csv};
use twinkin::twinlink::{
    audit_consistency, decode, encode, parse_script, run_session, Session, TwinState,
};

#[derive(Parser)]
#[command(
    name = "twinkin",
    version,
    about = "Robot digital-twin kinematics toolkit",
    propagate_version = true
)]
struct CliConfig {
    #[command(subcommand)]
    command: Command,
    /// RNG seed for stochastic subcommands.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write the primary result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format for results that support both.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Comma-separated float list, e.g. `0,0,0,0,0,0,0`.
#[derive(Clone)]
struct FloatList(Vec<f64>);

fn parse_float_list(text: &str) -> Result<FloatList, String> {
    text.split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|_| format!("bad number '{f}'")))
        .collect::<Result<Vec<f64>, _>>()
        .map(FloatList)
}

/// Target pose as `x,y,z,qx,qy,qz,qw` (meters + unit quaternion).
#[derive(Clone)]
struct PoseArg(Pose);

fn parse_pose(text: &str) -> Result<PoseArg, String> {
    let FloatList(values) = parse_float_list(text)?;
    if values.len() != 7 {
        return Err(format!("expected 7 values x,y,z,qx,qy,qz,qw, got {}", values.len()));
    }
    Ok(PoseArg(Pose::from_parts(
        [values[0], values[1], values[2]],
        Quaternion::new(values[3], values[4], values[5], values[6]),
    )))
}

#[derive(Subcommand)]
enum Command {
    /// Parse a URDF file and report structural violations.
    UrdfValidate {
        /// URDF XML file.
        file: PathBuf,
    },
    /// Print the joint path between two links of a URDF model.
    UrdfChain {
        /// URDF XML file.
        file: PathBuf,
        /// Start link; defaults to the root link.
        #[arg(long)]
        base: Option<String>,
        /// End link.
        #[arg(long)]
        tip: String,
    },
    /// Forward kinematics of a D-H chain.
    Fk {
        /// Built-in chain name (`tiago_arm_7dof`) or a CSV file path.
        #[arg(long, default_value = "tiago_arm_7dof")]
        chain: String,
        /// Joint angles in radians, comma separated.
        #[arg(long, value_parser = parse_float_list)]
        joints: FloatList,
    },
    /// Solve inverse kinematics with the particle swarm optimizer.
    Ik {
        /// Built-in chain name or CSV file path.
        #[arg(long, default_value = "tiago_arm_7dof")]
        chain: String,
        /// Target pose `x,y,z,qx,qy,qz,qw`.
        #[arg(long, value_parser = parse_pose)]
        target: PoseArg,
        /// Current arm configuration; defaults to all zeros.
        #[arg(long, value_parser = parse_float_list)]
        reference: Option<FloatList>,
        #[arg(long, default_value_t = 50)]
        particles: usize,
        #[arg(long, default_value_t = 200)]
        iterations: u32,
        /// Stop once the best fitness drops below this value.
        #[arg(long)]
        early_exit: Option<f64>,
        /// Fix the position weight instead of drawing it from the seed.
        #[arg(long)]
        omega_p: Option<f64>,
        /// Also write the per-iteration convergence trace (CSV) here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Plan a quintic joint trajectory between two configurations.
    Traj {
        /// Built-in chain name or CSV file path.
        #[arg(long, default_value = "tiago_arm_7dof")]
        chain: String,
        /// Start configuration; defaults to all zeros.
        #[arg(long, value_parser = parse_float_list)]
        start: Option<FloatList>,
        /// Goal configuration.
        #[arg(long, value_parser = parse_float_list)]
        goal: FloatList,
        /// Segment duration in seconds.
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        /// Number of samples including both endpoints.
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Load a scene file, check invariants, optionally query one action.
    SceneCheck {
        /// Scene description file.
        file: PathBuf,
        /// Action to query (e.g. Pick, Put, Heat).
        #[arg(long, requires = "target")]
        action: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        instrument: Option<String>,
    },
    /// Run a twin session from a command script; write the telemetry log.
    TwinSimulate {
        /// Script file: `move x y heading` / `arm t1..t7 duration` lines.
        script: PathBuf,
    },
    /// Replay a telemetry log and audit physical/digital consistency.
    TwinAudit {
        /// Newline-delimited JSON message log.
        log: PathBuf,
        /// Session summary JSON written by twin-simulate.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

struct DomainError {
    code: String,
    message: String,
}

impl DomainError {
    fn new(code: impl Into<String>, message: impl ToString) -> Self {
        Self { code: code.into(), message: message.to_string() }
    }
}

macro_rules! domain_from {
    ($($ty:ty),+) => {
        $(impl From<$ty> for DomainError {
            fn from(e: $ty) -> Self {
                DomainError { code: e.code().to_string(), message: e.to_string() }
            }
        })+
    };
}

domain_from!(
    twinkin::urdf::UrdfError,
    twinkin::kinematics::KinematicsError,
    twinkin::ik_pso::IkError,
    twinkin::trajectory::TrajectoryError,
    twinkin::scene::SceneError,
    twinkin::twinlink::TwinError
);

impl From<std::io::Error> for DomainError {
    fn from(e: std::io::Error) -> Self {
        DomainError::new("Io", e)
    }
}

fn main() -> ExitCode {
    let cli = CliConfig::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code, e.message);
            ExitCode::FAILURE
        }
    }
}

fn read(path: &PathBuf) -> Result<String, DomainError> {
    fs::read_to_string(path)
        .map_err(|e| DomainError::new("Io", format!("{}: {e}", path.display())))
}

fn emit(output: &Option<PathBuf>, content: &str) -> Result<(), DomainError> {
    let mut text = content.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| DomainError::new("Io", format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_chain(spec: &str) -> Result<DHChain, DomainError> {
    if let Some(chain) = DHChain::by_name(spec) {
        return Ok(chain);
    }
    let text = read(&PathBuf::from(spec))?;
    Ok(DHChain::from_csv(&text)?)
}

fn run(cli: CliConfig) -> Result<(), DomainError> {
    match cli.command {
        Command::UrdfValidate { file } => {
            let model = twinkin::urdf::parse_urdf(&read(&file)?)?;
            let violations = model.validate();
            let content = match cli.format {
                Format::Json => serde_json::json!({
                    "count": violations.len(),
                    "violations": violations
                        .iter()
                        .map(|v| format!("{v}"))
                        .collect::<Vec<_>>(),
                })
                .to_string(),
                Format::Csv => {
                    let mut out = String::from("code,element\n");
                    for v in &violations {
                        out.push_str(&format!("{:?},{}\n", v.code, v.element));
                    }
                    out
                }
            };
            emit(&cli.output, &content)?;
            println!("{} violations", violations.len());
            Ok(())
        }
        Command::UrdfChain { file, base, tip } => {
            let model = twinkin::urdf::parse_urdf(&read(&file)?)?;
            let base = base.unwrap_or_else(|| model.root_link.clone());
            let chain = model.kinematic_chain(&base, &tip)?;
            let content = match cli.format {
                Format::Json => serde_json::json!({
                    "base": base,
                    "tip": tip,
                    "joints": chain.iter().map(|j| j.name.as_str()).collect::<Vec<_>>(),
                })
                .to_string(),
                Format::Csv => {
                    let mut out = String::from("index,name,type\n");
                    for (i, joint) in chain.iter().enumerate() {
                        out.push_str(&format!("{},{},{}\n", i + 1, joint.name, joint.kind.as_str()));
                    }
                    out
                }
            };
            emit(&cli.output, &content)
        }
        Command::Fk { chain, joints } => {
            let chain = load_chain(&chain)?;
            let joints = JointVector::new(joints.0);
            let transform = forward_kinematics(&chain, &joints)?;
            let quaternion = rotation_to_quaternion(&transform.rotation)?;
            let rotation: Vec<Vec<f64>> = (0..3)
                .map(|r| (0..3).map(|c| transform.rotation[(r, c)]).collect())
                .collect();
            let content = match cli.format {
                Format::Json => serde_json::json!({
                    "position": [transform.position.x, transform.position.y, transform.position.z],
                    "quaternion": [quaternion.x, quaternion.y, quaternion.z, quaternion.w],
                    "rotation": rotation,
                })
                .to_string(),
                Format::Csv => format!(
                    "x,y,z,qx,qy,qz,qw\n{},{},{},{},{},{},{}\n",
                    transform.position.x,
                    transform.position.y,
                    transform.position.z,
                    quaternion.x,
                    quaternion.y,
                    quaternion.z,
                    quaternion.w
                ),
            };
            emit(&cli.output, &content)
        }
        Command::Ik {
            chain,
            target,
            reference,
            particles,
            iterations,
            early_exit,
            omega_p,
            trace,
        } => {
            let chain = load_chain(&chain)?;
            let reference = JointVector::new(
                reference.map(|r| r.0).unwrap_or_else(|| vec![0.0; chain.len()]),
            );
            let problem = IkProblem::new(chain, target.0, reference)?;
            let config = SwarmConfig {
                particle_count: particles,
                max_iterations: iterations,
                early_exit_fitness: early_exit,
                rng_seed: cli.seed,
                position_weight: omega_p,
                ..SwarmConfig::default()
            };
            let (solution, rows) = solve_ik_traced(&problem, &config)?;
            if let Some(path) = trace {
                fs::write(&path, trace_csv(&rows))
                    .map_err(|e| DomainError::new("Io", format!("{}: {e}", path.display())))?;
            }
            let content = match cli.format {
                Format::Json => solution.to_json(),
                Format::Csv => trace_csv(&rows),
            };
            emit(&cli.output, &content)
        }
        Command::Traj { chain, start, goal, duration, samples } => {
            let chain = load_chain(&chain)?;
            let start =
                JointVector::new(start.map(|s| s.0).unwrap_or_else(|| vec![0.0; chain.len()]));
            let goal = JointVector::new(goal.0);
            let segment = plan_joint_trajectory(&chain, &start, &goal, duration)?;
            let rows = sample_trajectory(&segment, samples)?;
            let content = match cli.format {
                Format::Json => serde_json::json!({
                    "duration": segment.duration(),
                    "samples": rows
                        .iter()
                        .map(|s| {
                            serde_json::json!({
                                "t": s.time,
                                "position": s.position,
                                "velocity": s.velocity,
                                "acceleration": s.acceleration,
                            })
                        })
                        .collect::<Vec<_>>(),
                })
                .to_string(),
                Format::Csv => trajectory_csv(&rows),
            };
            emit(&cli.output, &content)
        }
        Command::SceneCheck { file, action, target, instrument } => {
            let scene = load_scene(&read(&file)?)?;
            let violations = scene.violations();
            let verdict = match (&action, &target) {
                (Some(action_name), Some(target_id)) => {
                    let action = Action::parse(action_name).ok_or_else(|| {
                        DomainError::new(
                            "UnknownAction",
                            format!("'{action_name}' is not a scene action"),
                        )
                    })?;
                    Some(scene.check_action(action, target_id, instrument.as_deref())?)
                }
                _ => None,
            };
            let verdict_json = verdict.map(|v| match v {
                Verdict::Allowed => serde_json::json!({ "allowed": true }),
                Verdict::Denied(reason) => serde_json::json!({
                    "allowed": false,
                    "reason": reason.to_string(),
                }),
            });
            let content = serde_json::json!({
                "objects": scene.objects.len(),
                "violations": violations,
                "action": verdict_json,
            })
            .to_string();
            emit(&cli.output, &content)
        }
        Command::TwinSimulate { script } => {
            let commands = parse_script(&read(&script)?)?;
            let session = run_session(&TwinState::home(), &commands)?;
            let log: String = session.log.iter().fold(String::new(), |mut acc, message| {
                acc.push_str(&encode(message));
                acc.push('\n');
                acc
            });
            let summary = serde_json::json!({
                "final_physical": session.physical_state.to_json(),
                "initial": session.initial_state.to_json(),
                "messages": session.log.len(),
            })
            .to_string();
            match &cli.output {
                Some(_) => {
                    emit(&cli.output, &log)?;
                    println!("{summary}");
                }
                None => print!("{log}"),
            }
            Ok(())
        }
        Command::TwinAudit { log, summary } => {
            let mut messages = Vec::new();
            for line in read(&log)?.lines().filter(|l| !l.trim().is_empty()) {
                messages.push(decode(line)?);
            }
            let (initial, physical) = match summary {
                Some(path) => {
                    let value: serde_json::Value = serde_json::from_str(&read(&path)?)
                        .map_err(|e| DomainError::new("DecodeError", e))?;
                    let pick = |key: &str| -> Result<TwinState, DomainError> {
                        let field = value.get(key).ok_or_else(|| {
                            DomainError::new(
                                "DecodeError",
                                format!("summary file lacks '{key}'"),
                            )
                        })?;
                        Ok(TwinState::from_json(field)?)
                    };
                    (pick("initial")?, pick("final_physical")?)
                }
                None => {
                    // Self-check mode: treat the full replay as the
                    // physical reference.
                    let initial = TwinState::home();
                    let mut state = initial.clone();
                    for message in &messages {
                        state = twinkin::twinlink::apply_to_digital(&state, message)?;
                    }
                    (initial, state)
                }
            };
            let session = Session {
                initial_state: initial.clone(),
                physical_state: physical,
                digital_state: initial,
                log: messages,
            };
            let report = audit_consistency(&session);
            emit(&cli.output, &report.to_json())
        }
    }
}
