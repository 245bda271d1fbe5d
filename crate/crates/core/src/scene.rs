//! Digital model of the home environment.
//!
//! A [`Scene`] holds household objects on the map plane (centimeters,
//! origin at the upper-left map corner). Each [`SceneObject`] carries its
//! survey pose, physical flags, runtime state, and a closed set of nine
//! [`FunctionalAttribute`]s that gate which robot actions apply to it.
//! [`Scene::check_action`] answers whether an action is valid;
//! [`Scene::apply_action`] performs the state transition on a copy, so a
//! denied action can never leave a half-mutated scene.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// The nine functional attributes. The set is closed: any other name is
/// rejected when loading a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FunctionalAttribute {
    /// Can be picked up or put down into receptacles.
    Pickable,
    /// Non-static; can be moved around the scene.
    Moveable,
    /// Raises the temperature of objects it holds.
    Heatable,
    /// Lowers the temperature of objects it holds.
    Coolable,
    /// Other objects can be placed on or in it.
    Receptacle,
    /// Can be toggled on or off.
    Toggleable,
    /// Can be opened or closed.
    Openable,
    /// Can be sliced into pieces (irreversibly).
    Sliceable,
    /// Can be filled with liquid.
    Fillable,
}

impl FunctionalAttribute {
    pub const ALL: [Self; 9] = [
        Self::Pickable,
        Self::Moveable,
        Self::Heatable,
        Self::Coolable,
        Self::Receptacle,
        Self::Toggleable,
        Self::Openable,
        Self::Sliceable,
        Self::Fillable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pickable => "Pickable",
            Self::Moveable => "Moveable",
            Self::Heatable => "Heatable",
            Self::Coolable => "Coolable",
            Self::Receptacle => "Receptacle",
            Self::Toggleable => "Toggleable",
            Self::Openable => "Openable",
            Self::Sliceable => "Sliceable",
            Self::Fillable => "Fillable",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|attr| attr.as_str() == name)
    }
}

impl fmt::Display for FunctionalAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Temperature marker set by Heat/Cool actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TemperatureTag {
    #[default]
    Normal,
    Heated,
    Cooled,
}

/// Physical simulation flags carried as data; no physics runs here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhysicalFlags {
    pub has_gravity: bool,
    pub has_collision: bool,
}

/// Mutable object state. Fields are only touched by actions whose
/// attribute gate passed, so `open` can be true only on Openable objects,
/// and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ObjectState {
    pub toggled_on: bool,
    pub open: bool,
    pub filled: bool,
    pub sliced: bool,
    pub temperature_tag: TemperatureTag,
}

/// A household object.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub name: String,
    /// Map-plane coordinates, centimeters.
    pub pose_2d: (f64, f64),
    /// Survey height; not part of the scene file format.
    pub height_cm: Option<f64>,
    pub attributes: BTreeSet<FunctionalAttribute>,
    pub physical: PhysicalFlags,
    pub state: ObjectState,
    /// Id of the receptacle currently holding this object.
    pub contained_in: Option<String>,
}

impl SceneObject {
    pub fn has(&self, attribute: FunctionalAttribute) -> bool {
        self.attributes.contains(&attribute)
    }
}

/// Map coordinate convention: origin at the upper-left corner of the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MapOrigin {
    #[default]
    UpperLeft,
}

/// The digital home environment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub objects: BTreeMap<String, SceneObject>,
    pub map_origin: MapOrigin,
    /// Object currently held by the (single) robot gripper.
    pub held: Option<String>,
}

/// Robot actions checked against functional attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Pick,
    Put,
    Move,
    Heat,
    Cool,
    ToggleOn,
    ToggleOff,
    Open,
    Close,
    Slice,
    Fill,
}

impl Action {
    pub const ALL: [Self; 11] = [
        Self::Pick,
        Self::Put,
        Self::Move,
        Self::Heat,
        Self::Cool,
        Self::ToggleOn,
        Self::ToggleOff,
        Self::Open,
        Self::Close,
        Self::Slice,
        Self::Fill,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "Pick" => Some(Self::Pick),
            "Put" => Some(Self::Put),
            "Move" => Some(Self::Move),
            "Heat" => Some(Self::Heat),
            "Cool" => Some(Self::Cool),
            "ToggleOn" => Some(Self::ToggleOn),
            "ToggleOff" => Some(Self::ToggleOff),
            "Open" => Some(Self::Open),
            "Close" => Some(Self::Close),
            "Slice" => Some(Self::Slice),
            "Fill" => Some(Self::Fill),
        _ => None,
        }
    }
}

/// Why an action was denied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DenialReason {
    MissingAttribute { object: String, attribute: FunctionalAttribute },
    MissingInstrument,
    /// A toggleable instrument must be on to heat or cool.
    InstrumentOff { instrument: String },
    /// Heat/Cool apply only while the instrument contains the target.
    TargetNotContained { target: String, instrument: String },
    /// Placing the target would create a containment loop.
    ContainmentCycle { target: String, instrument: String },
    /// The single gripper already holds something.
    HandOccupied { holding: String },
    AlreadySliced { target: String },
}

impl fmt::Display for DenialReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingAttribute { object, attribute } => {
                write!(f, "MissingAttribute({attribute}) on '{object}'")
            }
            Self::MissingInstrument => write!(f, "MissingInstrument"),
            Self::InstrumentOff { instrument } => write!(f, "InstrumentOff('{instrument}')"),
            Self::TargetNotContained { target, instrument } => {
                write!(f, "TargetNotContained('{target}' not in '{instrument}')")
            }
            Self::ContainmentCycle { target, instrument } => {
                write!(f, "ContainmentCycle('{target}' into '{instrument}')")
            }
            Self::HandOccupied { holding } => write!(f, "HandOccupied('{holding}')"),
            Self::AlreadySliced { target } => write!(f, "AlreadySliced('{target}')"),
        }
    }
}

/// Outcome of [`Scene::check_action`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Allowed,
    Denied(DenialReason),
}

impl Verdict {
    pub fn is_allowed(&self) -> bool {
        matches!(self, Self::Allowed)
    }
}

/// Errors from scene loading and action application.
#[derive(Debug, Error)]
pub enum SceneError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: unknown attribute '{name}'")]
    UnknownAttribute { line: usize, name: String },
    #[error("object '{object}' is contained in '{container}', which is not a receptacle here")]
    DanglingContainment { object: String, container: String },
    #[error("containment cycle through object '{object}'")]
    ContainmentCycle { object: String },
    #[error("duplicate object id '{id}'")]
    DuplicateId { id: String },
    #[error("unknown object '{id}'")]
    UnknownObject { id: String },
    #[error("action denied: {0}")]
    ActionDenied(DenialReason),
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
}

impl SceneError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::ParseError { .. } => "ParseError",
            Self::UnknownAttribute { .. } => "UnknownAttribute",
            Self::DanglingContainment { .. } => "DanglingContainment",
            Self::ContainmentCycle { .. } => "ContainmentCycle",
            Self::DuplicateId { .. } => "DuplicateId",
            Self::UnknownObject { .. } => "UnknownObject",
            Self::ActionDenied(_) => "ActionDenied",
            Self::NonFiniteInput(_) => "NonFiniteInput",
        }
    }
}

impl Scene {
    /// Decide whether `action` on `target` (with an optional `instrument`)
    /// is valid under the attribute rules. Pure: no state changes.
    pub fn check_action(
        &self,
        action: Action,
        target: &str,
        instrument: Option<&str>,
    ) -> Result<Verdict, SceneError> {
        use FunctionalAttribute as Attr;

        let target_obj = self.get(target)?;
        let instrument_obj = instrument.map(|id| self.get(id)).transpose()?;

        let deny = |reason| Ok(Verdict::Denied(reason));
        let require = |object: &SceneObject, attribute| {
            if object.has(attribute) {
                None
            } else {
                Some(DenialReason::MissingAttribute {
                    object: object.id.clone(),
                    attribute,
                })
            }
        };

        match action {
            Action::Pick => {
                if let Some(reason) = require(target_obj, Attr::Pickable) {
                    return deny(reason);
                }
                if let Some(holding) = &self.held {
                    return deny(DenialReason::HandOccupied { holding: holding.clone() });
                }
            }
            Action::Put => {
                let Some(instrument_obj) = instrument_obj else {
                    return deny(DenialReason::MissingInstrument);
                };
                if let Some(reason) = require(target_obj, Attr::Pickable) {
                    return deny(reason);
                }
                if let Some(reason) = require(instrument_obj, Attr::Receptacle) {
                    return deny(reason);
                }
                if self.would_cycle(target, &instrument_obj.id) {
                    return deny(DenialReason::ContainmentCycle {
                        target: target.to_string(),
                        instrument: instrument_obj.id.clone(),
                    });
                }
            }
            Action::Move => {
                if let Some(reason) = require(target_obj, Attr::Moveable) {
                    return deny(reason);
                }
            }
            Action::Heat | Action::Cool => {
                let needed = if action == Action::Heat { Attr::Heatable } else { Attr::Coolable };
                let Some(instrument_obj) = instrument_obj else {
                    return deny(DenialReason::MissingInstrument);
                };
                if let Some(reason) = require(instrument_obj, needed) {
                    return deny(reason);
                }
                if instrument_obj.has(Attr::Toggleable) && !instrument_obj.state.toggled_on {
                    return deny(DenialReason::InstrumentOff {
                        instrument: instrument_obj.id.clone(),
                    });
                }
                if target_obj.contained_in.as_deref() != Some(instrument_obj.id.as_str()) {
                    return deny(DenialReason::TargetNotContained {
                        target: target.to_string(),
                        instrument: instrument_obj.id.clone(),
                    });
                }
            }
            Action::ToggleOn | Action::ToggleOff => {
                if let Some(reason) = require(target_obj, Attr::Toggleable) {
                    return deny(reason);
                }
            }
            Action::Open | Action::Close => {
                if let Some(reason) = require(target_obj, Attr::Openable) {
                    return deny(reason);
                }
            }
            Action::Slice => {
                if let Some(reason) = require(target_obj, Attr::Sliceable) {
                    return deny(reason);
                }
                if target_obj.state.sliced {
                    return deny(DenialReason::AlreadySliced { target: target.to_string() });
                }
            }
            Action::Fill => {
                if let Some(reason) = require(target_obj, Attr::Fillable) {
                    return deny(reason);
                }
            }
        }
        Ok(Verdict::Allowed)
    }

    /// Apply an allowed action, returning the updated scene. Denied actions
    /// fail with [`SceneError::ActionDenied`] and leave `self` untouched.
    pub fn apply_action(
        &self,
        action: Action,
        target: &str,
        instrument: Option<&str>,
    ) -> Result<Scene, SceneError> {
        match self.check_action(action, target, instrument)? {
            Verdict::Denied(reason) => Err(SceneError::ActionDenied(reason)),
            Verdict::Allowed => {
                let mut next = self.clone();
                let object = next.objects.get_mut(target).expect("checked above");
                match action {
                    Action::Pick => {
                        object.contained_in = None;
                        next.held = Some(target.to_string());
                    }
                    Action::Put => {
                        object.contained_in = instrument.map(str::to_string);
                        if next.held.as_deref() == Some(target) {
                            next.held = None;
                        }
                    }
                    // Poses are survey data; live motion flows through the
                    // twin telemetry, so Move is a validity check only.
                    Action::Move => {}
                    Action::Heat => object.state.temperature_tag = TemperatureTag::Heated,
                    Action::Cool => object.state.temperature_tag = TemperatureTag::Cooled,
                    Action::ToggleOn => object.state.toggled_on = true,
                    Action::ToggleOff => object.state.toggled_on = false,
                    Action::Open => object.state.open = true,
                    Action::Close => object.state.open = false,
                    Action::Slice => object.state.sliced = true,
                    Action::Fill => object.state.filled = true,
                }
                Ok(next)
            }
        }
    }

    /// Structural defects as `Code:object` strings; empty when all scene
    /// invariants hold.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (id, object) in &self.objects {
            if *id != object.id {
                out.push(format!("IdMismatch:{id}"));
            }
            if let Some(container) = &object.contained_in {
                match self.objects.get(container) {
                    None => out.push(format!("DanglingContainment:{id}")),
                    Some(receptacle) if !receptacle.has(FunctionalAttribute::Receptacle) => {
                        out.push(format!("DanglingContainment:{id}"))
                    }
                    Some(_) => {}
                }
            }
        }
        for id in self.objects.keys() {
            if self.containment_depth(id).is_none() {
                out.push(format!("ContainmentCycle:{id}"));
            }
        }
        if let Some(held) = &self.held {
            match self.objects.get(held) {
                None => out.push(format!("UnknownHeldObject:{held}")),
                Some(object) if !object.has(FunctionalAttribute::Pickable) => {
                    out.push(format!("HeldNotPickable:{held}"))
                }
                Some(_) => {}
            }
        }
        out
    }

    fn get(&self, id: &str) -> Result<&SceneObject, SceneError> {
        self.objects.get(id).ok_or_else(|| SceneError::UnknownObject { id: id.to_string() })
    }

    /// Would putting `target` into `instrument` close a containment loop?
    fn would_cycle(&self, target: &str, instrument: &str) -> bool {
        let mut current = Some(instrument.to_string());
        let mut steps = 0;
        while let Some(id) = current {
            if id == target {
                return true;
            }
            current = self.objects.get(&id).and_then(|o| o.contained_in.clone());
            steps += 1;
            if steps > self.objects.len() {
                return true; // pre-existing loop; refuse to extend it
            }
        }
        false
    }

    /// Containment chain length, or `None` when the walk loops.
    fn containment_depth(&self, id: &str) -> Option<usize> {
        let mut current = self.objects.get(id).and_then(|o| o.contained_in.clone());
        let mut depth = 0;
        while let Some(next) = current {
            depth += 1;
            if depth > self.objects.len() {
                return None;
            }
            current = self.objects.get(&next).and_then(|o| o.contained_in.clone());
        }
        Some(depth)
    }
}

/// Planar Euclidean distance between a physical and a digital survey
/// coordinate, centimeters.
pub fn geometric_error_2d(
    physical_xy: (f64, f64),
    digital_xy: (f64, f64),
) -> Result<f64, SceneError> {
    let values = [physical_xy.0, physical_xy.1, digital_xy.0, digital_xy.1];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SceneError::NonFiniteInput("coordinate"));
    }
    let dx = physical_xy.0 - digital_xy.0;
    let dy = physical_xy.1 - digital_xy.1;
    Ok(dx.hypot(dy))
}

/// Parse a scene document. One object per line:
///
/// ```text
/// id | name | x_cm,y_cm | attr1;attr2;... | gravity,collision | contained_in?
/// ```
///
/// Lines starting with `#` are comments. The attribute field accepts only
/// the nine functional attribute names. Containment must reference an
/// existing receptacle and stay acyclic.
pub fn load_scene(text: &str) -> Result<Scene, SceneError> {
    let mut scene = Scene::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('|').map(str::trim).collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(SceneError::ParseError {
                line: line_no,
                message: format!("expected 5 or 6 '|' fields, got {}", fields.len()),
            });
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(SceneError::ParseError { line: line_no, message: "empty id".into() });
        }
        let name = fields[1];

        let coords: Vec<&str> = fields[2].split(',').map(str::trim).collect();
        if coords.len() != 2 {
            return Err(SceneError::ParseError {
                line: line_no,
                message: format!("pose must be 'x,y', got '{}'", fields[2]),
            });
        }
        let parse_coord = |text: &str| {
            text.parse::<f64>().map_err(|_| SceneError::ParseError {
                line: line_no,
                message: format!("bad coordinate '{text}'"),
            })
        };
        let pose_2d = (parse_coord(coords[0])?, parse_coord(coords[1])?);

        let mut attributes = BTreeSet::new();
        for token in fields[3].split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let attribute = FunctionalAttribute::parse(token).ok_or_else(|| {
                SceneError::UnknownAttribute { line: line_no, name: token.to_string() }
            })?;
            attributes.insert(attribute);
        }

        let flags: Vec<&str> = fields[4].split(',').map(str::trim).collect();
        if flags.len() != 2 {
            return Err(SceneError::ParseError {
                line: line_no,
                message: format!("physical flags must be 'gravity,collision', got '{}'", fields[4]),
            });
        }
        let parse_flag = |text: &str| match text {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(SceneError::ParseError {
                line: line_no,
                message: format!("bad flag '{other}' (expected true/false)"),
            }),
        };
        let physical =
            PhysicalFlags { has_gravity: parse_flag(flags[0])?, has_collision: parse_flag(flags[1])? };

        let contained_in = fields.get(5).filter(|s| !s.is_empty()).map(|s| s.to_string());

        let object = SceneObject {
            id: id.to_string(),
            name: name.to_string(),
            pose_2d,
            height_cm: None,
            attributes,
            physical,
            state: ObjectState::default(),
            contained_in,
        };
        if scene.objects.insert(object.id.clone(), object).is_some() {
            return Err(SceneError::DuplicateId { id: id.to_string() });
        }
    }

    // Containment must point at existing receptacles, without loops.
    for (id, object) in &scene.objects {
        if let Some(container) = &object.contained_in {
            let holder = scene.objects.get(container).ok_or_else(|| {
                SceneError::DanglingContainment { object: id.clone(), container: container.clone() }
            })?;
            if !holder.has(FunctionalAttribute::Receptacle) {
                return Err(SceneError::DanglingContainment {
                    object: id.clone(),
                    container: container.clone(),
                });
            }
        }
    }
    for id in scene.objects.keys() {
        if scene.containment_depth(id).is_none() {
            return Err(SceneError::ContainmentCycle { object: id.clone() });
        }
    }
    Ok(scene)
}

/// Canonical scene document: objects sorted by id, one line each, exactly
/// the fields [`load_scene`] reads. Parsing the output reproduces the scene
/// (runtime state is not persisted; files describe the survey snapshot).
pub fn serialize_scene(scene: &Scene) -> String {
    let mut out = String::new();
    for object in scene.objects.values() {
        let attrs: Vec<&str> =
            object.attributes.iter().map(|a| a.as_str()).collect();
        out.push_str(&format!(
            "{} | {} | {},{} | {} | {},{}",
            object.id,
            object.name,
            object.pose_2d.0,
            object.pose_2d.1,
            attrs.join(";"),
            object.physical.has_gravity,
            object.physical.has_collision,
        ));
        if let Some(container) = &object.contained_in {
            out.push_str(&format!(" | {container}"));
        }
        out.push('\n');
    }
    out
}
