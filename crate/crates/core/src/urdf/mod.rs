//! URDF robot descriptions: parsing, validation, and structural queries.
//!
//! [`parse_urdf`] reads the XML subset this toolkit consumes (`robot`,
//! `link`, `joint`, `origin`, `axis`, `limit`, `visual`, `material`;
//! everything else is ignored) into a [`RobotModel`], a kinematic tree of
//! links connected by joints. The model answers chain queries
//! ([`RobotModel::kinematic_chain`]) and composes joint transforms
//! ([`RobotModel::forward_kinematics`]). [`serialize_urdf`] writes the
//! canonical form: alphabetical links and joints, 17-significant-digit
//! floats, so parse/serialize/parse is a fixpoint.

mod parser;

pub use parser::parse_urdf;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use thiserror::Error;

use crate::kinematics::HomogeneousTransform;

/// Errors from URDF parsing and model queries.
#[derive(Debug, Error)]
pub enum UrdfError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("missing root link: {0}")]
    MissingRoot(String),
    #[error("joint '{joint}' references unknown link '{link}'")]
    DanglingReference { joint: String, link: String },
    #[error("cycle detected at link '{link}'")]
    CycleDetected { link: String },
    #[error("link '{link}' has more than one parent joint")]
    MultipleParents { link: String },
    #[error("duplicate name '{name}'")]
    DuplicateName { name: String },
    #[error("joint '{joint}' requires a <limit> element")]
    MissingLimit { joint: String },
    #[error("joint '{joint}' has lower limit greater than upper limit")]
    InvertedLimits { joint: String },
    #[error("no joint path from '{base}' to '{tip}'")]
    NoPath { base: String, tip: String },
    #[error("unknown link '{link}'")]
    UnknownLink { link: String },
    #[error("unknown joint '{joint}'")]
    UnknownJoint { joint: String },
    #[error("no value supplied for joint '{joint}'")]
    MissingJointValue { joint: String },
    #[error("value {value} for joint '{joint}' is outside its limits")]
    JointValueOutOfRange { joint: String, value: f64 },
}

impl UrdfError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::MalformedXml(_) => "MalformedXml",
            Self::MissingRoot(_) => "MissingRoot",
            Self::DanglingReference { .. } => "DanglingReference",
            Self::CycleDetected { .. } => "CycleDetected",
            Self::MultipleParents { .. } => "MultipleParents",
            Self::DuplicateName { .. } => "DuplicateName",
            Self::MissingLimit { .. } => "MissingLimit",
            Self::InvertedLimits { .. } => "InvertedLimits",
            Self::NoPath { .. } => "NoPath",
            Self::UnknownLink { .. } => "UnknownLink",
            Self::UnknownJoint { .. } => "UnknownJoint",
            Self::MissingJointValue { .. } => "MissingJointValue",
            Self::JointValueOutOfRange { .. } => "JointValueOutOfRange",
        }
    }
}

/// Joint articulation kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Continuous,
    Prismatic,
    Fixed,
}

impl JointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Revolute => "revolute",
            Self::Continuous => "continuous",
            Self::Prismatic => "prismatic",
            Self::Fixed => "fixed",
        }
    }

    /// Whether this joint kind moves with a joint value.
    pub fn is_actuated(self) -> bool {
        !matches!(self, Self::Fixed)
    }

    /// Whether this joint kind carries position limits.
    pub fn requires_limit(self) -> bool {
        matches!(self, Self::Revolute | Self::Prismatic)
    }
}

/// A URDF joint: the connection between a parent and a child link.
///
/// `limit_lower`/`limit_upper` are radians for revolute joints and meters
/// for prismatic ones; continuous joints carry infinite sentinel bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct UrdfJoint {
    pub name: String,
    pub kind: JointKind,
    pub parent_link: String,
    pub child_link: String,
    pub origin_xyz: [f64; 3],
    pub origin_rpy: [f64; 3],
    pub axis: [f64; 3],
    pub limit_lower: f64,
    pub limit_upper: f64,
}

impl UrdfJoint {
    /// Static transform of this joint's frame in the parent link frame.
    pub fn origin_transform(&self) -> HomogeneousTransform {
        HomogeneousTransform::new(
            rpy_matrix(self.origin_rpy),
            Vector3::new(self.origin_xyz[0], self.origin_xyz[1], self.origin_xyz[2]),
        )
    }

    /// Motion transform for a joint value (identity for fixed joints).
    pub fn motion_transform(&self, value: f64) -> HomogeneousTransform {
        let axis = Unit::new_normalize(Vector3::new(self.axis[0], self.axis[1], self.axis[2]));
        match self.kind {
            JointKind::Fixed => HomogeneousTransform::identity(),
            JointKind::Revolute | JointKind::Continuous => HomogeneousTransform::new(
                *Rotation3::from_axis_angle(&axis, value).matrix(),
                Vector3::zeros(),
            ),
            JointKind::Prismatic => {
                HomogeneousTransform::new(Matrix3::identity(), axis.into_inner() * value)
            }
        }
    }

    pub fn value_in_limits(&self, value: f64) -> bool {
        value >= self.limit_lower && value <= self.limit_upper
    }
}

/// A URDF link. Mesh and material references are kept as opaque strings;
/// geometry is never loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct UrdfLink {
    pub name: String,
    pub visual_mesh_ref: Option<String>,
    pub material_name: Option<String>,
}

/// A validated robot model: a tree of links connected by joints.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub links: BTreeMap<String, UrdfLink>,
    pub joints: BTreeMap<String, UrdfJoint>,
    pub root_link: String,
}

/// A structural defect reported by [`RobotModel::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    /// Name of the offending link or joint.
    pub element: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCode {
    InvertedLimits,
    MultipleParents,
    DanglingReference,
    CycleDetected,
    MissingRoot,
    MultipleRoots,
    RootMismatch,
    SelfLoop,
    NonUnitAxis,
    EmptyLinkName,
    NameMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.element)
    }
}

impl RobotModel {
    /// Check every structural invariant, returning one [`Violation`] per
    /// defect. An empty list means the model is a well-formed tree.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();

        for (key, link) in &self.links {
            if link.name.is_empty() {
                violations.push(Violation {
                    code: ViolationCode::EmptyLinkName,
                    element: key.clone(),
                });
            }
            if *key != link.name {
                violations
                    .push(Violation { code: ViolationCode::NameMismatch, element: key.clone() });
            }
        }

        let mut parent_counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (key, joint) in &self.joints {
            if *key != joint.name {
                violations
                    .push(Violation { code: ViolationCode::NameMismatch, element: key.clone() });
            }
            if joint.parent_link == joint.child_link {
                violations
                    .push(Violation { code: ViolationCode::SelfLoop, element: key.clone() });
            }
            for link in [&joint.parent_link, &joint.child_link] {
                if !self.links.contains_key(link) {
                    violations.push(Violation {
                        code: ViolationCode::DanglingReference,
                        element: key.clone(),
                    });
                }
            }
            if joint.kind.requires_limit() && joint.limit_lower > joint.limit_upper {
                violations
                    .push(Violation { code: ViolationCode::InvertedLimits, element: key.clone() });
            }
            let norm = (joint.axis[0].powi(2) + joint.axis[1].powi(2) + joint.axis[2].powi(2))
                .sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                violations
                    .push(Violation { code: ViolationCode::NonUnitAxis, element: key.clone() });
            }
            *parent_counts.entry(joint.child_link.as_str()).or_insert(0) += 1;
        }

        for (link, count) in &parent_counts {
            if *count > 1 {
                violations.push(Violation {
                    code: ViolationCode::MultipleParents,
                    element: (*link).to_string(),
                });
            }
        }

        let roots: Vec<&String> =
            self.links.keys().filter(|name| !parent_counts.contains_key(name.as_str())).collect();
        match roots.len() {
            0 => violations.push(Violation {
                code: ViolationCode::MissingRoot,
                element: self.name.clone(),
            }),
            1 => {
                if *roots[0] != self.root_link {
                    violations.push(Violation {
                        code: ViolationCode::RootMismatch,
                        element: self.root_link.clone(),
                    });
                }
            }
            _ => {
                for root in &roots[1..] {
                    violations.push(Violation {
                        code: ViolationCode::MultipleRoots,
                        element: (*root).clone(),
                    });
                }
            }
        }

        // A link whose upward walk never terminates sits on a cycle.
        let parent_joint: BTreeMap<&str, &UrdfJoint> =
            self.joints.values().map(|j| (j.child_link.as_str(), j)).collect();
        let mut on_cycle = BTreeSet::new();
        for link in self.links.keys() {
            let mut current = link.as_str();
            let mut steps = 0;
            while let Some(joint) = parent_joint.get(current) {
                current = joint.parent_link.as_str();
                steps += 1;
                if steps > self.links.len() {
                    on_cycle.insert(link.clone());
                    break;
                }
            }
        }
        for link in on_cycle {
            violations.push(Violation { code: ViolationCode::CycleDetected, element: link });
        }

        violations
    }

    /// The unique joint path from `base` to `tip`, parent to child order;
    /// fixed joints are included. `base == tip` yields an empty path.
    pub fn kinematic_chain(&self, base: &str, tip: &str) -> Result<Vec<&UrdfJoint>, UrdfError> {
        for link in [base, tip] {
            if !self.links.contains_key(link) {
                return Err(UrdfError::UnknownLink { link: link.to_string() });
            }
        }
        let parent_joint: BTreeMap<&str, &UrdfJoint> =
            self.joints.values().map(|j| (j.child_link.as_str(), j)).collect();

        let mut path = Vec::new();
        let mut current = tip;
        let mut steps = 0;
        while current != base {
            let joint = parent_joint.get(current).ok_or_else(|| UrdfError::NoPath {
                base: base.to_string(),
                tip: tip.to_string(),
            })?;
            path.push(*joint);
            current = joint.parent_link.as_str();
            steps += 1;
            if steps > self.links.len() {
                return Err(UrdfError::CycleDetected { link: current.to_string() });
            }
        }
        path.reverse();
        Ok(path)
    }

    /// Compose the base-to-tip transform for the given joint values.
    ///
    /// Fixed joints contribute only their origin transform; actuated joints
    /// need a value in `joint_values` that lies within their limits.
    pub fn forward_kinematics(
        &self,
        joint_values: &BTreeMap<String, f64>,
        base: &str,
        tip: &str,
    ) -> Result<HomogeneousTransform, UrdfError> {
        for name in joint_values.keys() {
            if !self.joints.contains_key(name) {
                return Err(UrdfError::UnknownJoint { joint: name.clone() });
            }
        }
        let chain = self.kinematic_chain(base, tip)?;
        let mut result = HomogeneousTransform::identity();
        for joint in chain {
            result = result.compose(&joint.origin_transform());
            if joint.kind.is_actuated() {
                let value = *joint_values
                    .get(&joint.name)
                    .ok_or_else(|| UrdfError::MissingJointValue { joint: joint.name.clone() })?;
                if !joint.value_in_limits(value) {
                    return Err(UrdfError::JointValueOutOfRange {
                        joint: joint.name.clone(),
                        value,
                    });
                }
                result = result.compose(&joint.motion_transform(value));
            }
        }
        Ok(result)
    }

    /// Links with no child joints, alphabetical.
    pub fn leaf_links(&self) -> Vec<&str> {
        let parents: BTreeSet<&str> =
            self.joints.values().map(|j| j.parent_link.as_str()).collect();
        self.links.keys().map(String::as_str).filter(|name| !parents.contains(name)).collect()
    }
}

/// Rotation matrix for fixed-axis roll/pitch/yaw: `Rz(yaw) Ry(pitch) Rx(roll)`.
fn rpy_matrix(rpy: [f64; 3]) -> Matrix3<f64> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), rpy[0]);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), rpy[1]);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), rpy[2]);
    *(rz * ry * rx).matrix()
}

/// Write the canonical XML form: links then joints, both alphabetical,
/// floats with 17 significant digits. Reparsing the output reproduces the
/// model exactly.
pub fn serialize_urdf(model: &RobotModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("<robot name=\"{}\">\n", escape_attr(&model.name)));
    for link in model.links.values() {
        match (&link.visual_mesh_ref, &link.material_name) {
            (None, None) => {
                out.push_str(&format!("  <link name=\"{}\"/>\n", escape_attr(&link.name)));
            }
            (mesh, material) => {
                out.push_str(&format!("  <link name=\"{}\">\n", escape_attr(&link.name)));
                out.push_str("    <visual>\n");
                if let Some(mesh) = mesh {
                    out.push_str(&format!(
                        "      <geometry><mesh filename=\"{}\"/></geometry>\n",
                        escape_attr(mesh)
                    ));
                }
                if let Some(material) = material {
                    out.push_str(&format!(
                        "      <material name=\"{}\"/>\n",
                        escape_attr(material)
                    ));
                }
                out.push_str("    </visual>\n  </link>\n");
            }
        }
    }
    for joint in model.joints.values() {
        out.push_str(&format!(
            "  <joint name=\"{}\" type=\"{}\">\n",
            escape_attr(&joint.name),
            joint.kind.as_str()
        ));
        out.push_str(&format!("    <parent link=\"{}\"/>\n", escape_attr(&joint.parent_link)));
        out.push_str(&format!("    <child link=\"{}\"/>\n", escape_attr(&joint.child_link)));
        out.push_str(&format!(
            "    <origin xyz=\"{}\" rpy=\"{}\"/>\n",
            fmt_vec3(joint.origin_xyz),
            fmt_vec3(joint.origin_rpy)
        ));
        out.push_str(&format!("    <axis xyz=\"{}\"/>\n", fmt_vec3(joint.axis)));
        if joint.kind.requires_limit() {
            out.push_str(&format!(
                "    <limit lower=\"{}\" upper=\"{}\"/>\n",
                fmt_f64(joint.limit_lower),
                fmt_f64(joint.limit_upper)
            ));
        }
        out.push_str("  </joint>\n");
    }
    out.push_str("</robot>\n");
    out
}

fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

fn fmt_vec3(values: [f64; 3]) -> String {
    format!("{} {} {}", fmt_f64(values[0]), fmt_f64(values[1]), fmt_f64(values[2]))
}

fn escape_attr(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
