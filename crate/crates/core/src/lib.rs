//! Robot digital-twin kinematics toolkit.
//!
//! The crate covers the model-side half of a household digital twin:
//!
//! - [`urdf`]: parse robot description XML into a validated kinematic tree.
//! - [`kinematics`]: D-H forward kinematics and pose-error metrics for the
//!   7-DOF TIAGo arm.
//! - [`ik_pso`]: inverse kinematics through an adaptive particle swarm
//!   optimizer with a joint-displacement regularizer.
//! - [`trajectory`]: quintic joint-space interpolation between
//!   configurations.
//! - [`scene`]: household objects with functional attributes and
//!   action-validity checks.
//! - [`twinlink`]: the physical/digital synchronization protocol, its wire
//!   format, and the replay/audit harness.

pub mod ik_pso;
pub mod kinematics;
pub mod scene;
pub mod trajectory;
pub mod twinlink;
pub mod urdf;
