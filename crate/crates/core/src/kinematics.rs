//! Denavit-Hartenberg forward kinematics for serial arms.
//!
//! A [`DHChain`] holds one [`DHRow`] per joint (twist, link length, link
//! offset, joint limits). [`dh_transform`] builds the per-joint homogeneous
//! transform, [`forward_kinematics`] composes them base-to-tip, and the
//! error metrics ([`position_error`], [`pose_error`]) compare an end-effector
//! pose against a target. The built-in [`DHChain::tiago_arm_7dof`] chain
//! models the 7-DOF TIAGo arm.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

/// Errors from kinematic computations.
#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(&'static str),
    #[error("length mismatch: chain has {chain} joints, vector has {joints}")]
    LengthMismatch { chain: usize, joints: usize },
    #[error("matrix is not a rotation (orthonormality residual {residual:.3e})")]
    NotARotation { residual: f64 },
    #[error("quaternion is not unit norm (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
}

impl KinematicsError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::NonFiniteInput(_) => "NonFiniteInput",
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::NotARotation { .. } => "NotARotation",
            Self::NotUnit { .. } => "NotUnit",
            Self::InvalidChain(_) => "InvalidChain",
        }
    }
}

/// One Denavit-Hartenberg row: twist `alpha`, link length `a`, link offset
/// `d`, and the joint angle limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DHRow {
    /// Twist angle about the previous x axis, radians.
    pub alpha: f64,
    /// Link length along the previous x axis, meters.
    pub a: f64,
    /// Link offset along the joint z axis, meters.
    pub d: f64,
    /// Lower joint angle limit, radians.
    pub theta_lower: f64,
    /// Upper joint angle limit, radians.
    pub theta_upper: f64,
}

impl DHRow {
    pub fn new(alpha: f64, a: f64, d: f64, theta_lower: f64, theta_upper: f64) -> Self {
        Self { alpha, a, d, theta_lower, theta_upper }
    }

    /// Width of the joint angle interval.
    pub fn range(&self) -> f64 {
        self.theta_upper - self.theta_lower
    }

    pub fn limits_finite(&self) -> bool {
        self.theta_lower.is_finite() && self.theta_upper.is_finite()
    }
}

/// An ordered list of D-H rows, one per joint, base to tip.
#[derive(Debug, Clone, PartialEq)]
pub struct DHChain {
    rows: Vec<DHRow>,
}

impl DHChain {
    /// Build a chain, rejecting empty row lists and inverted limits.
    pub fn new(rows: Vec<DHRow>) -> Result<Self, KinematicsError> {
        if rows.is_empty() {
            return Err(KinematicsError::InvalidChain("chain has no rows".into()));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.theta_lower > row.theta_upper {
                return Err(KinematicsError::InvalidChain(format!(
                    "row {}: theta_lower {} > theta_upper {}",
                    k + 1,
                    row.theta_lower,
                    row.theta_upper
                )));
            }
        }
        Ok(Self { rows })
    }

    /// The 7-DOF TIAGo arm chain.
    pub fn tiago_arm_7dof() -> Self {
        let rows = vec![
            DHRow::new(0.0, 0.15505, -0.151, 0.0, 2.75),
            DHRow::new(FRAC_PI_2, 0.125, -0.0165, -1.57, 1.09),
            DHRow::new(-FRAC_PI_2, 0.0, -0.0895, -3.53, 1.57),
            DHRow::new(FRAC_PI_2, 0.02, -0.027, -0.39, 2.36),
            DHRow::new(-FRAC_PI_2, 0.02, 0.162, -2.09, 2.09),
            DHRow::new(FRAC_PI_2, 0.0, 0.0, -1.41, 1.41),
            DHRow::new(-FRAC_PI_2, 0.0, 0.0, -2.09, 2.09),
        ];
        Self { rows }
    }

    /// Look up a built-in chain by name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "tiago_arm_7dof" => Some(Self::tiago_arm_7dof()),
            _ => None,
        }
    }

    /// Load a chain from CSV text with columns `alpha,a,d,lower,upper`
    /// (radians and meters). A non-numeric first line is treated as a
    /// header; `#` starts a comment.
    pub fn from_csv(text: &str) -> Result<Self, KinematicsError> {
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if rows.is_empty() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
                // Header row.
                continue;
            }
            if fields.len() != 5 {
                return Err(KinematicsError::InvalidChain(format!(
                    "line {}: expected 5 fields, got {}",
                    idx + 1,
                    fields.len()
                )));
            }
            let mut values = [0.0f64; 5];
            for (slot, field) in values.iter_mut().zip(&fields) {
                *slot = field.parse().map_err(|_| {
                    KinematicsError::InvalidChain(format!(
                        "line {}: cannot parse '{}' as a number",
                        idx + 1,
                        field
                    ))
                })?;
            }
            rows.push(DHRow::new(values[0], values[1], values[2], values[3], values[4]));
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[DHRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// True when every joint of `joints` lies within its row's limits.
    pub fn within_limits(&self, joints: &JointVector) -> bool {
        joints.len() == self.len()
            && self
                .rows
                .iter()
                .zip(joints.iter())
                .all(|(row, &theta)| theta >= row.theta_lower && theta <= row.theta_upper)
    }

    /// True when no joint has an infinite limit (continuous joints excluded).
    pub fn limits_finite(&self) -> bool {
        self.rows.iter().all(DHRow::limits_finite)
    }
}

/// Joint angles in radians, one per chain row.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVector(Vec<f64>);

impl JointVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl From<Vec<f64>> for JointVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl From<&[f64]> for JointVector {
    fn from(values: &[f64]) -> Self {
        Self(values.to_vec())
    }
}

impl std::ops::Index<usize> for JointVector {
    type Output = f64;
    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// A rigid transform: orthonormal rotation block plus position vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousTransform {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
}

impl HomogeneousTransform {
    pub fn new(rotation: Matrix3<f64>, position: Vector3<f64>) -> Self {
        Self { rotation, position }
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), position: Vector3::zeros() }
    }

    /// Compose `self` followed by `other` (the matrix product `self * other`
    /// on homogeneous 4x4s).
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            position: self.rotation * other.position + self.position,
        }
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// Check the rotation block: `R^T R = I` and `det R = +1` within `tol`.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let residual =
            (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        residual < tol && (self.rotation.determinant() - 1.0).abs() < tol
    }
}

/// Unit quaternion, scalar-last layout `(x, y, z, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Quaternion {
    pub const IDENTITY: Self = Self { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z + self.w * other.w
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() < tol
    }

    pub fn normalized(&self) -> Result<Self, KinematicsError> {
        let n = self.norm();
        if !n.is_finite() || n < f64::EPSILON {
            return Err(KinematicsError::NotUnit { norm: n });
        }
        Ok(Self::new(self.x / n, self.y / n, self.z / n, self.w / n))
    }

    /// Flip sign so the scalar part is non-negative (double-cover canonical
    /// representative).
    pub fn canonicalized(&self) -> Self {
        if self.w < 0.0 {
            self.negated()
        } else {
            *self
        }
    }

    pub fn negated(&self) -> Self {
        Self::new(-self.x, -self.y, -self.z, -self.w)
    }

    /// Rotation matrix of this quaternion (assumed unit).
    pub fn to_rotation(&self) -> Matrix3<f64> {
        let (x, y, z, w) = (self.x, self.y, self.z, self.w);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        )
    }
}

/// Position plus orientation of a frame, the end-effector target format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Quaternion,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Quaternion) -> Self {
        Self { position, orientation }
    }

    pub fn from_parts(position: [f64; 3], orientation: Quaternion) -> Self {
        Self { position: Vector3::from_column_slice(&position), orientation }
    }
}

/// Homogeneous transform between consecutive joint frames for one D-H row
/// at joint angle `theta`:
///
/// ```text
/// [ cos t  -sin t cos a   sin t sin a   a cos t ]
/// [ sin t   cos t cos a  -cos t sin a   a sin t ]
/// [ 0       sin a         cos a         d       ]
/// [ 0       0             0             1       ]
/// ```
pub fn dh_transform(row: &DHRow, theta: f64) -> Result<HomogeneousTransform, KinematicsError> {
    if !(row.alpha.is_finite() && row.a.is_finite() && row.d.is_finite()) {
        return Err(KinematicsError::NonFiniteInput("dh row"));
    }
    if !theta.is_finite() {
        return Err(KinematicsError::NonFiniteInput("theta"));
    }
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    let rotation = Matrix3::new(
        ct, -st * ca, st * sa, //
        st, ct * ca, -ct * sa, //
        0.0, sa, ca,
    );
    let position = Vector3::new(row.a * ct, row.a * st, row.d);
    Ok(HomogeneousTransform::new(rotation, position))
}

/// End-effector transform: the base-to-tip product of per-row transforms.
pub fn forward_kinematics(
    chain: &DHChain,
    joints: &JointVector,
) -> Result<HomogeneousTransform, KinematicsError> {
    if joints.len() != chain.len() {
        return Err(KinematicsError::LengthMismatch { chain: chain.len(), joints: joints.len() });
    }
    let mut result = HomogeneousTransform::identity();
    for (row, &theta) in chain.rows().iter().zip(joints.iter()) {
        result = result.compose(&dh_transform(row, theta)?);
    }
    Ok(result)
}

/// Convert a rotation matrix to a unit quaternion with `w >= 0`.
///
/// Branch selection follows Shepperd's method: pick the largest of the trace
/// and the diagonal entries so the division is always well conditioned.
pub fn rotation_to_quaternion(r: &Matrix3<f64>) -> Result<Quaternion, KinematicsError> {
    let residual = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !residual.is_finite() || residual > 1e-6 || r.determinant() < 0.0 {
        return Err(KinematicsError::NotARotation { residual });
    }

    let trace = r[(0, 0)] + r[(1, 1)] + r[(2, 2)];
    let q = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        Quaternion::new(
            (r[(2, 1)] - r[(1, 2)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(1, 0)] - r[(0, 1)]) / s,
            0.25 * s,
        )
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
        Quaternion::new(
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(2, 1)] - r[(1, 2)]) / s,
        )
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
        Quaternion::new(
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
        )
    } else {
        let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
        Quaternion::new(
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
            (r[(1, 0)] - r[(0, 1)]) / s,
        )
    };
    Ok(q.normalized()?.canonicalized())
}

/// Euclidean distance between the current and desired positions, meters.
pub fn position_error(
    current: &Vector3<f64>,
    desired: &Vector3<f64>,
) -> Result<f64, KinematicsError> {
    if !(current.iter().all(|v| v.is_finite()) && desired.iter().all(|v| v.is_finite())) {
        return Err(KinematicsError::NonFiniteInput("position"));
    }
    Ok((current - desired).norm())
}

/// Orientation error in radians between two unit quaternions:
/// `2 acos(|<q_c, q_d>|)`, in `[0, pi]`.
///
/// The absolute value identifies `q` with `-q` (the two encode the same
/// rotation); see [`pose_error_strict`] for the raw-dot variant.
pub fn pose_error(current: &Quaternion, desired: &Quaternion) -> Result<f64, KinematicsError> {
    check_unit(current)?;
    check_unit(desired)?;
    Ok(2.0 * current.dot(desired).abs().clamp(0.0, 1.0).acos())
}

/// Orientation error without double-cover folding: `2 acos(<q_c, q_d>)`,
/// in `[0, 2 pi]`. Antipodal quaternions report `2 pi` even though they
/// represent the same rotation.
pub fn pose_error_strict(
    current: &Quaternion,
    desired: &Quaternion,
) -> Result<f64, KinematicsError> {
    check_unit(current)?;
    check_unit(desired)?;
    Ok(2.0 * current.dot(desired).clamp(-1.0, 1.0).acos())
}

fn check_unit(q: &Quaternion) -> Result<(), KinematicsError> {
    if !q.is_unit(1e-6) {
        return Err(KinematicsError::NotUnit { norm: q.norm() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Oracle: the same joint transform assembled from elementary motions
    /// Rz(theta) Tz(d) Tx(a) Rx(alpha) instead of the closed-form entries.
    fn oracle_dh_matrix(alpha: f64, a: f64, d: f64, theta: f64) -> Matrix4<f64> {
        let rz = Matrix4::new(
            theta.cos(), -theta.sin(), 0.0, 0.0, //
            theta.sin(), theta.cos(), 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        let tz = Matrix4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, d, //
            0.0, 0.0, 0.0, 1.0,
        );
        let tx = Matrix4::new(
            1.0, 0.0, 0.0, a, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        let rx = Matrix4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.0, alpha.cos(), -alpha.sin(), 0.0, //
            0.0, alpha.sin(), alpha.cos(), 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        rz * tz * tx * rx
    }

    fn oracle_chain_product(chain: &DHChain, joints: &[f64]) -> Matrix4<f64> {
        chain.rows().iter().zip(joints).fold(Matrix4::identity(), |acc, (row, &theta)| {
            acc * oracle_dh_matrix(row.alpha, row.a, row.d, theta)
        })
    }

    fn max_abs_diff(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn dh_transform_zero_row_is_identity() {
        let row = DHRow::new(0.0, 0.0, 0.0, -1.0, 1.0);
        let t = dh_transform(&row, 0.0).unwrap();
        assert_eq!(t.rotation, Matrix3::identity());
        assert_eq!(t.position, Vector3::zeros());
    }

    #[test]
    fn dh_transform_quarter_turn_unit_link() {
        let row = DHRow::new(0.0, 1.0, 0.0, -PI, PI);
        let t = dh_transform(&row, FRAC_PI_2).unwrap();
        let expected_r = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(t.rotation, expected_r, epsilon = 1e-15);
        assert_relative_eq!(t.position, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn dh_transform_matches_elementary_oracle_on_tiago_row_2() {
        let row = DHChain::tiago_arm_7dof().rows()[1];
        let t = dh_transform(&row, 0.0).unwrap();
        let oracle = oracle_dh_matrix(row.alpha, row.a, row.d, 0.0);
        assert!(max_abs_diff(&t.to_matrix4(), &oracle) < 1e-12);
    }

    #[test]
    fn dh_transform_rejects_non_finite() {
        let row = DHRow::new(0.0, f64::NAN, 0.0, 0.0, 1.0);
        assert!(matches!(dh_transform(&row, 0.0), Err(KinematicsError::NonFiniteInput(_))));
        let ok_row = DHRow::new(0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(dh_transform(&ok_row, f64::INFINITY).is_err());
    }

    #[test]
    fn fk_zero_chain_is_identity() {
        let chain = DHChain::new(vec![DHRow::new(0.0, 0.0, 0.0, -1.0, 1.0); 3]).unwrap();
        let t = forward_kinematics(&chain, &JointVector::zeros(3)).unwrap();
        assert_eq!(t.rotation, Matrix3::identity());
        assert_eq!(t.position, Vector3::zeros());
    }

    #[test]
    fn fk_single_row_equals_dh_transform() {
        let row = DHRow::new(0.7, 0.3, -0.2, -2.0, 2.0);
        let chain = DHChain::new(vec![row]).unwrap();
        let via_fk = forward_kinematics(&chain, &JointVector::new(vec![0.9])).unwrap();
        let direct = dh_transform(&row, 0.9).unwrap();
        assert_eq!(via_fk.rotation, direct.rotation);
        assert_eq!(via_fk.position, direct.position);
    }

    #[test]
    fn fk_tiago_home_matches_chain_product_oracle() {
        let chain = DHChain::tiago_arm_7dof();
        let t = forward_kinematics(&chain, &JointVector::zeros(7)).unwrap();
        let oracle = oracle_chain_product(&chain, &[0.0; 7]);
        assert!(max_abs_diff(&t.to_matrix4(), &oracle) < 1e-9);
    }

    #[test]
    fn fk_length_mismatch() {
        let chain = DHChain::tiago_arm_7dof();
        assert!(matches!(
            forward_kinematics(&chain, &JointVector::zeros(6)),
            Err(KinematicsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fk_lipschitz_under_small_perturbation() {
        let chain = DHChain::tiago_arm_7dof();
        let lipschitz: f64 =
            chain.rows().iter().map(|r| r.a.abs() + r.d.abs()).sum::<f64>() + 1.0;
        let delta = 1e-7;
        let base = vec![0.5, 0.3, -0.4, 0.8, 0.1, -0.2, 0.6];
        let p0 = forward_kinematics(&chain, &JointVector::new(base.clone())).unwrap().position;
        for k in 0..7 {
            let mut perturbed = base.clone();
            perturbed[k] += delta;
            let p1 =
                forward_kinematics(&chain, &JointVector::new(perturbed)).unwrap().position;
            assert!((p1 - p0).norm() <= lipschitz * delta, "joint {k} moved too far");
        }
    }

    #[test]
    fn quaternion_identity_round_trip() {
        let q = rotation_to_quaternion(&Matrix3::identity()).unwrap();
        assert_relative_eq!(q.x, 0.0);
        assert_relative_eq!(q.y, 0.0);
        assert_relative_eq!(q.z, 0.0);
        assert_relative_eq!(q.w, 1.0);
    }

    #[test]
    fn quaternion_pi_about_z() {
        let r = Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        let q = rotation_to_quaternion(&r).unwrap();
        assert_relative_eq!(q.x.abs(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(q.y.abs(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(q.z.abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(q.w, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quaternion_rejects_non_rotation() {
        let m = Matrix3::new(2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(rotation_to_quaternion(&m), Err(KinematicsError::NotARotation { .. })));
    }

    #[test]
    fn position_error_examples() {
        let zero = Vector3::zeros();
        assert_eq!(position_error(&zero, &zero).unwrap(), 0.0);
        assert_relative_eq!(
            position_error(&Vector3::new(1.0, 2.0, 2.0), &zero).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        // Fridge survey coordinates, centimeters converted to meters.
        let physical = Vector3::new(1.07, 3.48, 0.0);
        let digital = Vector3::new(1.05423, 3.48525, 0.0);
        let err = position_error(&physical, &digital).unwrap();
        assert!((err - 0.01662).abs() < 1e-5, "got {err}");
    }

    #[test]
    fn position_error_rejects_nan() {
        let bad = Vector3::new(f64::NAN, 0.0, 0.0);
        assert!(position_error(&bad, &Vector3::zeros()).is_err());
    }

    #[test]
    fn pose_error_examples() {
        let q = Quaternion::new(0.5, 0.5, 0.5, 0.5);
        assert_eq!(pose_error(&q, &q).unwrap(), 0.0);
        assert_eq!(pose_error(&q, &q.negated()).unwrap(), 0.0);

        let half = (0.5f64).sqrt();
        let quarter_z = Quaternion::new(0.0, 0.0, half, half);
        assert_relative_eq!(
            pose_error(&Quaternion::IDENTITY, &quarter_z).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pose_error_strict_sees_double_cover() {
        let q = Quaternion::new(0.5, 0.5, 0.5, 0.5);
        let strict = pose_error_strict(&q, &q.negated()).unwrap();
        assert_relative_eq!(strict, 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn pose_error_rejects_non_unit() {
        let q = Quaternion::new(0.0, 0.0, 0.0, 2.0);
        assert!(matches!(
            pose_error(&q, &Quaternion::IDENTITY),
            Err(KinematicsError::NotUnit { .. })
        ));
    }

    #[test]
    fn tiago_chain_matches_expected_limits() {
        let chain = DHChain::tiago_arm_7dof();
        assert_eq!(chain.len(), 7);
        assert_eq!(chain.rows()[0].theta_lower, 0.0);
        assert_eq!(chain.rows()[0].theta_upper, 2.75);
        assert_eq!(chain.rows()[2].theta_lower, -3.53);
        assert_eq!(chain.rows()[2].theta_upper, 1.57);
    }

    #[test]
    fn chain_rejects_inverted_limits() {
        let rows = vec![DHRow::new(0.0, 0.0, 0.0, 1.0, -1.0)];
        assert!(DHChain::new(rows).is_err());
    }

    #[test]
    fn chain_csv_round_trip() {
        let chain = DHChain::tiago_arm_7dof();
        let mut csv = String::from("alpha,a,d,lower,upper\n");
        for row in chain.rows() {
            csv.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                row.alpha, row.a, row.d, row.theta_lower, row.theta_upper
            ));
        }
        let reloaded = DHChain::from_csv(&csv).unwrap();
        assert_eq!(chain, reloaded);
    }

    #[test]
    fn chain_csv_rejects_bad_field_count() {
        assert!(DHChain::from_csv("0,0,0,0\n").is_err());
    }

    prop_compose! {
        fn tiago_joints()(values in proptest::collection::vec(0.0..1.0f64, 7)) -> Vec<f64> {
            DHChain::tiago_arm_7dof()
                .rows()
                .iter()
                .zip(values)
                .map(|(row, u)| row.theta_lower + u * row.range())
                .collect()
        }
    }

    proptest! {
        #[test]
        fn fk_rotation_blocks_are_orthonormal(joints in tiago_joints()) {
            let chain = DHChain::tiago_arm_7dof();
            let t = forward_kinematics(&chain, &JointVector::new(joints)).unwrap();
            prop_assert!(t.is_rigid(1e-9));
        }

        #[test]
        fn fk_composition_splits(joints in tiago_joints(), split in 1usize..6) {
            let chain = DHChain::tiago_arm_7dof();
            let full = forward_kinematics(&chain, &JointVector::new(joints.clone())).unwrap();
            let head = DHChain::new(chain.rows()[..split].to_vec()).unwrap();
            let tail = DHChain::new(chain.rows()[split..].to_vec()).unwrap();
            let a = forward_kinematics(&head, &JointVector::new(joints[..split].to_vec())).unwrap();
            let b = forward_kinematics(&tail, &JointVector::new(joints[split..].to_vec())).unwrap();
            let combined = a.compose(&b);
            prop_assert!(max_abs_diff(&combined.to_matrix4(), &full.to_matrix4()) < 1e-9);
        }

        #[test]
        fn quaternion_round_trip_over_random_rotations(
            axis in proptest::collection::vec(-1.0..1.0f64, 3),
            angle in -PI..PI,
        ) {
            let v = Vector3::new(axis[0], axis[1], axis[2]);
            prop_assume!(v.norm() > 1e-3);
            let r = nalgebra::Rotation3::from_axis_angle(
                &nalgebra::Unit::new_normalize(v), angle,
            );
            let q = rotation_to_quaternion(r.matrix()).unwrap();
            prop_assert!(q.w >= 0.0);
            prop_assert!(q.is_unit(1e-9));
            let back = q.to_rotation();
            prop_assert!((back - r.matrix()).abs().max() < 1e-9);
        }

        #[test]
        fn position_error_is_a_metric(
            a in proptest::collection::vec(-5.0..5.0f64, 3),
            b in proptest::collection::vec(-5.0..5.0f64, 3),
            c in proptest::collection::vec(-5.0..5.0f64, 3),
        ) {
            let va = Vector3::from_column_slice(&a);
            let vb = Vector3::from_column_slice(&b);
            let vc = Vector3::from_column_slice(&c);
            let ab = position_error(&va, &vb).unwrap();
            let ba = position_error(&vb, &va).unwrap();
            let ac = position_error(&va, &vc).unwrap();
            let cb = position_error(&vc, &vb).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn pose_error_symmetry_and_range(
            a in proptest::collection::vec(-1.0..1.0f64, 4),
            b in proptest::collection::vec(-1.0..1.0f64, 4),
            flip in proptest::bool::ANY,
        ) {
            let qa = Quaternion::new(a[0], a[1], a[2], a[3]);
            let qb = Quaternion::new(b[0], b[1], b[2], b[3]);
            prop_assume!(qa.norm() > 1e-3 && qb.norm() > 1e-3);
            let qa = qa.normalized().unwrap();
            let qb = qb.normalized().unwrap();
            let e1 = pose_error(&qa, &qb).unwrap();
            let e2 = pose_error(&qb, &qa).unwrap();
            prop_assert_eq!(e1, e2);
            prop_assert!((0.0..=PI).contains(&e1));
            // Self-distance collapses to zero up to the acos sensitivity
            // near a unit dot product (~sqrt(eps)).
            let signed = if flip { qa.negated() } else { qa };
            prop_assert!(pose_error(&qa, &signed).unwrap() < 1e-6);
        }
    }
}
