//! Permissive XML reader for the URDF subset.
//!
//! Only `robot`, `link`, `joint`, `origin`, `axis`, `limit`, `visual` and
//! `material` are consumed; unknown elements and attributes are skipped.
//! Mesh references found under `visual` are kept as opaque path strings.

use std::collections::BTreeMap;

use roxmltree::{Document, Node};

use super::{JointKind, RobotModel, UrdfError, UrdfJoint, UrdfLink};

/// Parse URDF XML text into a validated [`RobotModel`].
///
/// Defaults follow URDF conventions: a missing `<origin>` is zero, a missing
/// `<axis>` is `(1, 0, 0)`. Revolute and prismatic joints must carry a
/// `<limit>`; continuous joints get infinite sentinel bounds. The returned
/// model satisfies every tree invariant or the parse fails with the specific
/// defect.
pub fn parse_urdf(xml_text: &str) -> Result<RobotModel, UrdfError> {
    let doc = Document::parse(xml_text).map_err(|e| UrdfError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(UrdfError::MalformedXml(format!(
            "expected <robot> document element, found <{}>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or("").to_string();

    let mut links = BTreeMap::new();
    let mut joints = BTreeMap::new();
    for node in robot.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => {
                let link = parse_link(node)?;
                if links.insert(link.name.clone(), link.clone()).is_some() {
                    return Err(UrdfError::DuplicateName { name: link.name });
                }
            }
            "joint" => {
                let joint = parse_joint(node)?;
                if joints.insert(joint.name.clone(), joint.clone()).is_some() {
                    return Err(UrdfError::DuplicateName { name: joint.name });
                }
            }
            _ => {} // permissive: unknown elements ignored
        }
    }

    check_tree(&name, &links, &joints)
}

fn parse_link(node: Node<'_, '_>) -> Result<UrdfLink, UrdfError> {
    let name = node
        .attribute("name")
        .ok_or_else(|| UrdfError::MalformedXml("link without a name attribute".into()))?;
    if name.is_empty() {
        return Err(UrdfError::MalformedXml("link with an empty name".into()));
    }

    let mut visual_mesh_ref = None;
    let mut material_name = None;
    if let Some(visual) = node.children().find(|n| n.is_element() && n.has_tag_name("visual")) {
        visual_mesh_ref = visual
            .descendants()
            .find(|n| n.has_tag_name("mesh"))
            .and_then(|mesh| mesh.attribute("filename"))
            .map(str::to_string);
        material_name = visual
            .descendants()
            .find(|n| n.has_tag_name("material"))
            .and_then(|material| material.attribute("name"))
            .map(str::to_string);
    }

    Ok(UrdfLink { name: name.to_string(), visual_mesh_ref, material_name })
}

fn parse_joint(node: Node<'_, '_>) -> Result<UrdfJoint, UrdfError> {
    let name = node
        .attribute("name")
        .ok_or_else(|| UrdfError::MalformedXml("joint without a name attribute".into()))?
        .to_string();
    let kind = match node.attribute("type") {
        Some("revolute") => JointKind::Revolute,
        Some("continuous") => JointKind::Continuous,
        Some("prismatic") => JointKind::Prismatic,
        Some("fixed") => JointKind::Fixed,
        Some(other) => {
            return Err(UrdfError::MalformedXml(format!(
                "joint '{name}' has unsupported type '{other}'"
            )))
        }
        None => {
            return Err(UrdfError::MalformedXml(format!("joint '{name}' has no type attribute")))
        }
    };

    let parent_link = link_ref(node, "parent", &name)?;
    let child_link = link_ref(node, "child", &name)?;
    if parent_link == child_link {
        return Err(UrdfError::CycleDetected { link: child_link });
    }

    let mut origin_xyz = [0.0; 3];
    let mut origin_rpy = [0.0; 3];
    if let Some(origin) = child_element(node, "origin") {
        if let Some(xyz) = origin.attribute("xyz") {
            origin_xyz = parse_vec3(xyz, &name)?;
        }
        if let Some(rpy) = origin.attribute("rpy") {
            origin_rpy = parse_vec3(rpy, &name)?;
        }
    }

    let mut axis = [1.0, 0.0, 0.0];
    if let Some(axis_node) = child_element(node, "axis") {
        if let Some(xyz) = axis_node.attribute("xyz") {
            axis = parse_vec3(xyz, &name)?;
        }
    }
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if !norm.is_finite() || norm < 1e-12 {
        return Err(UrdfError::MalformedXml(format!("joint '{name}' has a zero-length axis")));
    }
    let axis = [axis[0] / norm, axis[1] / norm, axis[2] / norm];

    let limit = child_element(node, "limit");
    let (limit_lower, limit_upper) = match kind {
        JointKind::Continuous => (f64::NEG_INFINITY, f64::INFINITY),
        JointKind::Fixed => (0.0, 0.0),
        JointKind::Revolute | JointKind::Prismatic => {
            let limit = limit.ok_or_else(|| UrdfError::MissingLimit { joint: name.clone() })?;
            let lower = opt_f64(limit.attribute("lower"), &name)?.unwrap_or(0.0);
            let upper = opt_f64(limit.attribute("upper"), &name)?.unwrap_or(0.0);
            if lower > upper {
                return Err(UrdfError::InvertedLimits { joint: name });
            }
            (lower, upper)
        }
    };

    Ok(UrdfJoint {
        name,
        kind,
        parent_link,
        child_link,
        origin_xyz,
        origin_rpy,
        axis,
        limit_lower,
        limit_upper,
    })
}

fn child_element<'a, 'input>(node: Node<'a, 'input>, tag: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|n| n.is_element() && n.tag_name().name() == tag)
}

fn link_ref(node: Node<'_, '_>, tag: &str, joint: &str) -> Result<String, UrdfError> {
    child_element(node, tag)
        .and_then(|n| n.attribute("link"))
        .map(str::to_string)
        .ok_or_else(|| {
            UrdfError::MalformedXml(format!("joint '{joint}' has no <{tag} link=...> element"))
        })
}

fn parse_vec3(text: &str, joint: &str) -> Result<[f64; 3], UrdfError> {
    let fields: Vec<f64> = text
        .split_whitespace()
        .map(|f| {
            f.parse::<f64>().map_err(|_| {
                UrdfError::MalformedXml(format!("joint '{joint}': bad number '{f}'"))
            })
        })
        .collect::<Result<_, _>>()?;
    if fields.len() != 3 {
        return Err(UrdfError::MalformedXml(format!(
            "joint '{joint}': expected 3 numbers, got {}",
            fields.len()
        )));
    }
    Ok([fields[0], fields[1], fields[2]])
}

fn opt_f64(attr: Option<&str>, joint: &str) -> Result<Option<f64>, UrdfError> {
    attr.map(|text| {
        text.trim().parse::<f64>().map_err(|_| {
            UrdfError::MalformedXml(format!("joint '{joint}': bad number '{text}'"))
        })
    })
    .transpose()
}

/// Enforce the tree invariants and locate the root link.
fn check_tree(
    name: &str,
    links: &BTreeMap<String, UrdfLink>,
    joints: &BTreeMap<String, UrdfJoint>,
) -> Result<RobotModel, UrdfError> {
    if links.is_empty() {
        return Err(UrdfError::MissingRoot("document declares no links".into()));
    }

    let mut parent_of: BTreeMap<&str, &UrdfJoint> = BTreeMap::new();
    for joint in joints.values() {
        for link in [&joint.parent_link, &joint.child_link] {
            if !links.contains_key(link) {
                return Err(UrdfError::DanglingReference {
                    joint: joint.name.clone(),
                    link: link.clone(),
                });
            }
        }
        if parent_of.insert(joint.child_link.as_str(), joint).is_some() {
            return Err(UrdfError::MultipleParents { link: joint.child_link.clone() });
        }
    }

    let roots: Vec<&String> =
        links.keys().filter(|name| !parent_of.contains_key(name.as_str())).collect();
    let root_link = match roots.len() {
        0 => {
            // Every link has a parent; with unique parents this is a cycle.
            return Err(UrdfError::CycleDetected {
                link: links.keys().next().cloned().unwrap_or_default(),
            });
        }
        1 => roots[0].clone(),
        n => {
            return Err(UrdfError::MissingRoot(format!(
                "expected exactly one root link, found {n}: {}",
                roots.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            )))
        }
    };

    // Walk up from every link; a walk that never reaches the root is a
    // disconnected cycle.
    for link in links.keys() {
        let mut current = link.as_str();
        let mut steps = 0;
        while let Some(joint) = parent_of.get(current) {
            current = joint.parent_link.as_str();
            steps += 1;
            if steps > links.len() {
                return Err(UrdfError::CycleDetected { link: link.clone() });
            }
        }
    }

    Ok(RobotModel {
        name: name.to_string(),
        links: links.clone(),
        joints: joints.clone(),
        root_link,
    })
}
