//! Manipulator kinematics and human-arm reconstruction from bone vectors.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Index, IndexMut};

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::collision::Capsule;
use crate::error::{Error, Result};
use crate::Vec3;

/// Degrees of freedom of the manipulator.
pub const DOF: usize = 6;

/// Tolerance applied by [`reconstruct_arm`] when validating bone norms.
pub const BONE_NORM_TOLERANCE: f64 = 1e-6;

/// Segments shorter than this are considered degenerate bones.
pub const MIN_BONE_LENGTH: f64 = 1e-9;

/// A manipulator configuration: six joint angles in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub [f64; DOF]);

impl JointConfig {
    pub const fn new(q: [f64; DOF]) -> Self {
        Self(q)
    }

    pub const fn zeros() -> Self {
        Self([0.0; DOF])
    }

    pub fn as_array(&self) -> &[f64; DOF] {
        &self.0
    }

    /// Chebyshev (max-norm) distance in joint space.
    pub fn max_norm_distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance in joint space.
    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Linear interpolation `self + t (other - self)`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let mut q = [0.0; DOF];
        for (i, qi) in q.iter_mut().enumerate() {
            let (a, b) = (self.0[i], other.0[i]);
            // Rounding in a + t(b - a) can step an ulp past an endpoint.
            *qi = (a + t * (b - a)).clamp(a.min(b), a.max(b));
        }
        Self(q)
    }

    pub fn sub(&self, other: &Self) -> [f64; DOF] {
        let mut d = [0.0; DOF];
        for (i, di) in d.iter_mut().enumerate() {
            *di = self.0[i] - other.0[i];
        }
        d
    }

    pub fn add(&self, delta: &[f64; DOF]) -> Self {
        let mut q = self.0;
        for (qi, di) in q.iter_mut().zip(delta) {
            *qi += di;
        }
        Self(q)
    }
}

impl Index<usize> for JointConfig {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointConfig {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<[f64; DOF]> for JointConfig {
    fn from(q: [f64; DOF]) -> Self {
        Self(q)
    }
}

/// One row of a standard Denavit-Hartenberg table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

impl DhRow {
    pub const fn new(a: f64, alpha: f64, d: f64, theta_offset: f64) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
        }
    }

    /// `Rz(theta) Tz(d) Tx(a) Rx(alpha)`.
    pub fn transform(&self, q: f64) -> Isometry3<f64> {
        let theta = q + self.theta_offset;
        let rz = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, self.d),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta),
        );
        let rx = Isometry3::from_parts(
            Translation3::new(self.a, 0.0, 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha),
        );
        rz * rx
    }
}

/// Rigid placement of the robot base in the world frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BaseFrame {
    pub translation: [f64; 3],
    /// Roll, pitch, yaw in radians.
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl BaseFrame {
    pub fn isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.translation;
        let [r, p, yw] = self.rpy;
        Isometry3::from_parts(
            Translation3::new(x, y, z),
            UnitQuaternion::from_euler_angles(r, p, yw),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    pub dh_rows: [DhRow; DOF],
    pub joint_limits: [[f64; 2]; DOF],
    pub link_radii: [f64; DOF],
    #[serde(default)]
    pub base_frame: BaseFrame,
}

impl Default for RobotGeometry {
    /// A tabletop 6-DOF arm with roughly 0.9 m reach: a base column, two
    /// pitch links and an offset wrist. The 0.11 m offset keeps the first
    /// wrist link beside the forearm instead of folding through it.
    fn default() -> Self {
        Self {
            dh_rows: [
                DhRow::new(0.0, FRAC_PI_2, 0.30, 0.0),
                DhRow::new(0.38, 0.0, 0.0, 0.0),
                DhRow::new(0.32, 0.0, 0.0, 0.0),
                DhRow::new(0.0, FRAC_PI_2, 0.11, 0.0),
                DhRow::new(0.0, -FRAC_PI_2, 0.10, 0.0),
                DhRow::new(0.0, 0.0, 0.08, 0.0),
            ],
            joint_limits: [[-PI, PI]; DOF],
            link_radii: [0.07, 0.06, 0.05, 0.05, 0.045, 0.04],
            base_frame: BaseFrame {
                translation: [0.0, 0.0, 0.1],
                rpy: [0.0; 3],
            },
        }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<()> {
        for (i, [lo, hi]) in self.joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidGeometry(format!(
                    "joint {i} limits [{lo}, {hi}] are not increasing"
                )));
            }
        }
        for (i, r) in self.link_radii.iter().enumerate() {
            if !(*r > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "link {i} radius {r} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn check_limits(&self, config: &JointConfig) -> Result<()> {
        for (joint, (&value, &[lo, hi])) in config.0.iter().zip(&self.joint_limits).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(Error::JointLimitViolation {
                    joint,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    pub fn within_limits(&self, config: &JointConfig) -> bool {
        self.check_limits(config).is_ok()
    }

    pub fn clamp_to_limits(&self, config: &JointConfig) -> JointConfig {
        let mut q = config.0;
        for (qi, [lo, hi]) in q.iter_mut().zip(&self.joint_limits) {
            *qi = qi.clamp(*lo, *hi);
        }
        JointConfig(q)
    }

    /// Upper bound on the distance from the base origin to any point on the chain.
    pub fn reach(&self) -> f64 {
        self.dh_rows.iter().map(|r| r.a.abs() + r.d.abs()).sum()
    }
}

/// Origins of the base frame and the six joint frames, the last one being
/// the end-effector.
pub fn forward_kinematics(config: &JointConfig, robot: &RobotGeometry) -> Result<[Vec3; DOF + 1]> {
    robot.check_limits(config)?;
    Ok(fk_unchecked(config, robot))
}

pub(crate) fn fk_unchecked(config: &JointConfig, robot: &RobotGeometry) -> [Vec3; DOF + 1] {
    let mut pose = robot.base_frame.isometry();
    let mut origins = [Vec3::zeros(); DOF + 1];
    origins[0] = pose.translation.vector;
    for (i, row) in robot.dh_rows.iter().enumerate() {
        pose *= row.transform(config.0[i]);
        origins[i + 1] = pose.translation.vector;
    }
    origins
}

/// End-effector position.
pub fn end_effector(config: &JointConfig, robot: &RobotGeometry) -> Result<Vec3> {
    Ok(forward_kinematics(config, robot)?[DOF])
}

/// Capsule `i` spans joint-frame origins `i` and `i + 1`.
pub fn robot_link_capsules(config: &JointConfig, robot: &RobotGeometry) -> Result<[Capsule; DOF]> {
    let origins = forward_kinematics(config, robot)?;
    Ok(capsules_from_origins(&origins, robot))
}

pub(crate) fn capsules_from_origins(origins: &[Vec3; DOF + 1], robot: &RobotGeometry) -> [Capsule; DOF] {
    std::array::from_fn(|i| Capsule {
        p0: origins[i],
        p1: origins[i + 1],
        radius: robot.link_radii[i],
    })
}

/// Unit directions of the upper-arm and forearm bones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmBonePose {
    pub phi1: Vec3,
    pub phi2: Vec3,
}

impl ArmBonePose {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.phi1.x,
            self.phi1.y,
            self.phi1.z,
            self.phi2.x,
            self.phi2.y,
            self.phi2.z,
        ]
    }

    /// Builds a pose from six numbers without normalizing.
    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            phi1: Vec3::new(x[0], x[1], x[2]),
            phi2: Vec3::new(x[3], x[4], x[5]),
        }
    }

    /// Rescales both bones to unit length.
    pub fn renormalized(&self) -> Result<Self> {
        let n1 = self.phi1.norm();
        let n2 = self.phi2.norm();
        if n1 < BONE_NORM_TOLERANCE {
            return Err(Error::DegenerateBone { bone: 0, length: n1 });
        }
        if n2 < BONE_NORM_TOLERANCE {
            return Err(Error::DegenerateBone { bone: 1, length: n2 });
        }
        Ok(Self {
            phi1: self.phi1 / n1,
            phi2: self.phi2 / n2,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnthropometricParams {
    pub upper_arm_length: f64,
    pub forearm_length: f64,
    pub upper_arm_radius: f64,
    pub forearm_radius: f64,
    pub shoulder_anchor: Vec3,
}

impl Default for AnthropometricParams {
    fn default() -> Self {
        Self {
            upper_arm_length: 0.30,
            forearm_length: 0.25,
            upper_arm_radius: 0.05,
            forearm_radius: 0.045,
            shoulder_anchor: Vec3::new(0.45, 0.62, 0.42),
        }
    }
}

impl AnthropometricParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("upper_arm_length", self.upper_arm_length),
            ("forearm_length", self.forearm_length),
            ("upper_arm_radius", self.upper_arm_radius),
            ("forearm_radius", self.forearm_radius),
        ];
        for (name, v) in fields {
            if !(v > 0.0) {
                return Err(Error::Config(format!("anthropometric {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn reach(&self) -> f64 {
        self.upper_arm_length + self.forearm_length
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmJointPositions {
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
}

/// Places the elbow and wrist along the bone directions from the shoulder anchor.
pub fn reconstruct_arm(pose: &ArmBonePose, p_h: &AnthropometricParams) -> Result<ArmJointPositions> {
    let n1 = pose.phi1.norm();
    let n2 = pose.phi2.norm();
    if (n1 - 1.0).abs() > BONE_NORM_TOLERANCE {
        return Err(Error::NonUnitBone { bone: 0, norm: n1 });
    }
    if (n2 - 1.0).abs() > BONE_NORM_TOLERANCE {
        return Err(Error::NonUnitBone { bone: 1, norm: n2 });
    }
    let shoulder = p_h.shoulder_anchor;
    let elbow = shoulder + pose.phi1 * (p_h.upper_arm_length / n1);
    let wrist = elbow + pose.phi2 * (p_h.forearm_length / n2);
    Ok(ArmJointPositions {
        shoulder,
        elbow,
        wrist,
    })
}

pub fn normalize_bone_vectors(joints: &ArmJointPositions) -> Result<ArmBonePose> {
    let upper = joints.elbow - joints.shoulder;
    let fore = joints.wrist - joints.elbow;
    let l1 = upper.norm();
    let l2 = fore.norm();
    if l1 < MIN_BONE_LENGTH {
        return Err(Error::DegenerateBone { bone: 0, length: l1 });
    }
    if l2 < MIN_BONE_LENGTH {
        return Err(Error::DegenerateBone { bone: 1, length: l2 });
    }
    Ok(ArmBonePose {
        phi1: upper / l1,
        phi2: fore / l2,
    })
}

/// Upper-arm and forearm capsules inflated by `safety_margin`.
pub fn arm_capsules(joints: &ArmJointPositions, p_h: &AnthropometricParams, safety_margin: f64) -> [Capsule; 2] {
    debug_assert!(safety_margin >= 0.0);
    [
        Capsule {
            p0: joints.shoulder,
            p1: joints.elbow,
            radius: p_h.upper_arm_radius + safety_margin,
        },
        Capsule {
            p0: joints.elbow,
            p1: joints.wrist,
            radius: p_h.forearm_radius + safety_margin,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::point_segment_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Homogeneous 4x4 DH chain written out by hand, independent of nalgebra.
    fn dh_chain_oracle(q: &[f64; 6], robot: &RobotGeometry) -> Vec<[f64; 3]> {
        type M = [[f64; 4]; 4];
        fn mul(a: &M, b: &M) -> M {
            let mut c = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        c[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            c
        }
        let [x, y, z] = robot.base_frame.translation;
        let [r, p, yw] = robot.base_frame.rpy;
        // R = Rz(yaw) Ry(pitch) Rx(roll)
        let (sr, cr) = r.sin_cos();
        let (sp, cp) = p.sin_cos();
        let (sy, cy) = yw.sin_cos();
        let mut t: M = [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr, x],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr, y],
            [-sp, cp * sr, cp * cr, z],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let mut out = vec![[t[0][3], t[1][3], t[2][3]]];
        for (i, row) in robot.dh_rows.iter().enumerate() {
            let th = q[i] + row.theta_offset;
            let (st, ct) = th.sin_cos();
            let (sa, ca) = row.alpha.sin_cos();
            let a: M = [
                [ct, -st * ca, st * sa, row.a * ct],
                [st, ct * ca, -ct * sa, row.a * st],
                [0.0, sa, ca, row.d],
                [0.0, 0.0, 0.0, 1.0],
            ];
            t = mul(&t, &a);
            out.push([t[0][3], t[1][3], t[2][3]]);
        }
        out
    }

    fn random_config(rng: &mut impl Rng, robot: &RobotGeometry) -> JointConfig {
        JointConfig(std::array::from_fn(|i| {
            let [lo, hi] = robot.joint_limits[i];
            rng.random_range(lo..hi)
        }))
    }

    #[test]
    fn zero_config_matches_home_chain() {
        let robot = RobotGeometry::default();
        let fk = forward_kinematics(&JointConfig::zeros(), &robot).unwrap();
        let expected = [
            [0.0, 0.0, 0.1],
            [0.0, 0.0, 0.4],
            [0.38, 0.0, 0.4],
            [0.70, 0.0, 0.4],
            [0.70, -0.11, 0.4],
            [0.70, -0.11, 0.30],
            [0.70, -0.19, 0.30],
        ];
        for (p, e) in fk.iter().zip(expected) {
            assert!((p - Vec3::from(e)).norm() < 1e-12, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn fk_matches_transform_chain_oracle() {
        let mut robot = RobotGeometry::default();
        robot.base_frame = BaseFrame {
            translation: [0.1, -0.2, 0.3],
            rpy: [0.1, -0.2, 0.7],
        };
        robot.dh_rows[2].theta_offset = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let q = random_config(&mut rng, &robot);
            let fk = forward_kinematics(&q, &robot).unwrap();
            let oracle = dh_chain_oracle(&q.0, &robot);
            for (p, o) in fk.iter().zip(&oracle) {
                assert!((p - Vec3::from(*o)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lerp_never_leaves_the_segment() {
        let a = JointConfig([0.7, -0.2 + 1e-3, 0.0, 0.0, 0.0, 0.0]);
        let b = JointConfig([0.1, -0.2, 0.0, 0.0, 0.0, 0.0]);
        for k in 0..=1000 {
            let q = a.lerp(&b, k as f64 / 1000.0);
            assert!(q.0[1] >= -0.2 && q.0[0] >= 0.1, "{q:?}");
        }
        assert_eq!(a.lerp(&b, 1.0), b);
    }

    #[test]
    fn fk_rejects_out_of_limit_angle() {
        let robot = RobotGeometry::default();
        let mut q = JointConfig::zeros();
        q[0] = robot.joint_limits[0][1] + 0.1;
        assert!(matches!(
            forward_kinematics(&q, &robot),
            Err(Error::JointLimitViolation { joint: 0, .. })
        ));
    }

    #[test]
    fn fk_is_bitwise_deterministic() {
        let robot = RobotGeometry::default();
        let q = JointConfig([0.3, -1.2, 0.8, 2.0, -0.4, 1.1]);
        let a = forward_kinematics(&q, &robot).unwrap();
        let b = forward_kinematics(&q, &robot).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for k in 0..3 {
                assert_eq!(x[k].to_bits(), y[k].to_bits());
            }
        }
    }

    #[test]
    fn link_capsules_follow_fk() {
        let mut robot = RobotGeometry::default();
        robot.dh_rows[3].d = 0.0;
        let caps = robot_link_capsules(&JointConfig::zeros(), &robot).unwrap();
        // a = d = 0 collapses link 3 to a sphere
        assert!((caps[3].p0 - caps[3].p1).norm() < 1e-12);
        assert_eq!(caps[3].radius, robot.link_radii[3]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let q = random_config(&mut rng, &robot);
            let fk = forward_kinematics(&q, &robot).unwrap();
            let caps = robot_link_capsules(&q, &robot).unwrap();
            for i in 0..DOF {
                assert!((caps[i].p0 - fk[i]).norm() < 1e-12);
                assert!((caps[i].p1 - fk[i + 1]).norm() < 1e-12);
                assert_eq!(caps[i].radius, robot.link_radii[i]);
            }
        }
    }

    fn example_params() -> AnthropometricParams {
        AnthropometricParams {
            upper_arm_length: 0.30,
            forearm_length: 0.25,
            upper_arm_radius: 0.05,
            forearm_radius: 0.045,
            shoulder_anchor: Vec3::new(0.0, 0.0, 1.0),
        }
    }

    #[test]
    fn reconstruct_axis_aligned() {
        let pose = ArmBonePose {
            phi1: Vec3::new(0.0, 0.0, -1.0),
            phi2: Vec3::new(1.0, 0.0, 0.0),
        };
        let j = reconstruct_arm(&pose, &example_params()).unwrap();
        assert!((j.elbow - Vec3::new(0.0, 0.0, 0.7)).norm() < 1e-15);
        assert!((j.wrist - Vec3::new(0.25, 0.0, 0.7)).norm() < 1e-15);
        let back = normalize_bone_vectors(&j).unwrap();
        assert!((back.phi1 - pose.phi1).norm() < 1e-15);
        assert!((back.phi2 - pose.phi2).norm() < 1e-15);
    }

    #[test]
    fn reconstruct_rejects_non_unit_bone() {
        let pose = ArmBonePose {
            phi1: Vec3::new(0.0, 0.0, -1.1),
            phi2: Vec3::new(1.0, 0.0, 0.0),
        };
        assert!(matches!(
            reconstruct_arm(&pose, &example_params()),
            Err(Error::NonUnitBone { bone: 0, .. })
        ));
    }

    #[test]
    fn normalize_rejects_coincident_joints() {
        let j = ArmJointPositions {
            shoulder: Vec3::new(0.1, 0.2, 0.3),
            elbow: Vec3::new(0.1, 0.2, 0.3),
            wrist: Vec3::new(0.5, 0.2, 0.3),
        };
        assert!(matches!(
            normalize_bone_vectors(&j),
            Err(Error::DegenerateBone { bone: 0, .. })
        ));
    }

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn bone_lengths_and_round_trip() {
        let p_h = example_params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let pose = ArmBonePose {
                phi1: random_unit(&mut rng),
                phi2: random_unit(&mut rng),
            };
            let j = reconstruct_arm(&pose, &p_h).unwrap();
            assert!(((j.elbow - j.shoulder).norm() - p_h.upper_arm_length).abs() < 1e-9);
            assert!(((j.wrist - j.elbow).norm() - p_h.forearm_length).abs() < 1e-9);
            let back = normalize_bone_vectors(&j).unwrap();
            assert!((back.phi1 - pose.phi1).norm() < 1e-12);
            assert!((back.phi2 - pose.phi2).norm() < 1e-12);
        }
    }

    #[test]
    fn normalized_bones_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let mut p = || Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let j = ArmJointPositions {
                shoulder: p(),
                elbow: p(),
                wrist: p(),
            };
            let b = normalize_bone_vectors(&j).unwrap();
            assert!((b.phi1.norm() - 1.0).abs() < 1e-12);
            assert!((b.phi2.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn arm_capsule_margins() {
        let p_h = example_params();
        let pose = ArmBonePose {
            phi1: Vec3::new(0.0, 0.0, -1.0),
            phi2: Vec3::new(1.0, 0.0, 0.0),
        };
        let j = reconstruct_arm(&pose, &p_h).unwrap();
        let c0 = arm_capsules(&j, &p_h, 0.0);
        assert_eq!(c0[0].radius, p_h.upper_arm_radius);
        assert_eq!(c0[1].radius, p_h.forearm_radius);
        let c5 = arm_capsules(&j, &p_h, 0.05);
        assert!((c5[1].radius - 0.095).abs() < 1e-15);
        assert_eq!(c5[0].p0, j.shoulder);
        assert_eq!(c5[1].p1, j.wrist);
    }

    #[test]
    fn larger_margin_contains_smaller() {
        let p_h = example_params();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let pose = ArmBonePose {
                phi1: random_unit(&mut rng),
                phi2: random_unit(&mut rng),
            };
            let j = reconstruct_arm(&pose, &p_h).unwrap();
            let m1 = rng.random_range(0.0..0.05);
            let m2 = m1 + rng.random_range(0.001..0.05);
            let small = arm_capsules(&j, &p_h, m1);
            let big = arm_capsules(&j, &p_h, m2);
            for _ in 0..500 {
                let p = j.shoulder
                    + Vec3::new(
                        rng.random_range(-0.7..0.7),
                        rng.random_range(-0.7..0.7),
                        rng.random_range(-0.7..0.7),
                    );
                for (s, b) in small.iter().zip(&big) {
                    if point_segment_distance(&p, &s.p0, &s.p1) < s.radius {
                        assert!(point_segment_distance(&p, &b.p0, &b.p1) < b.radius);
                    }
                }
            }
        }
    }
}
