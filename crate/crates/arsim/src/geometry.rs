//! Rigid-body transforms on SO(3)/SE(3) and Gaussian pose-noise sampling.
//!
//! Rotations are stored as 3x3 matrices because the costs downstream are
//! Frobenius (chordal) distances on matrices. All angles are radians; degrees
//! appear only in config files and logs.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::RandomStream;

/// A rotation matrix in SO(3): orthonormal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wrap a matrix that is already a rotation. Debug builds assert the
    /// SO(3) invariants (orthonormality and det = +1 within 1e-9).
    pub fn from_matrix(m: Matrix3<f64>) -> Self {
        let r = Rotation(m);
        debug_assert!(r.defect() < 1e-9, "matrix is not in SO(3)");
        r
    }

    /// Rotation about the z axis.
    pub fn rz(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Rotation(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Exponential map: axis-angle vector to rotation matrix (Rodrigues).
    pub fn exp(w: Vector3<f64>) -> Self {
        let theta = w.norm();
        if theta < 1e-12 {
            let k = skew(w);
            return Rotation(Matrix3::identity() + k + k * k * 0.5);
        }
        let k = skew(w / theta);
        let m = Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos());
        Rotation(m)
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        Rotation::exp(axis.normalize() * angle)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn mul(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Total rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        let c = ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Yaw of the rotated body x axis projected to the world x-y plane.
    pub fn yaw(&self) -> f64 {
        self.0[(1, 0)].atan2(self.0[(0, 0)])
    }

    /// How far the matrix is from SO(3): Frobenius defect of R'R - I plus
    /// the determinant defect.
    pub fn defect(&self) -> f64 {
        let ortho = (self.0.transpose() * self.0 - Matrix3::identity()).norm();
        ortho + (self.0.determinant() - 1.0).abs()
    }

    /// Project back onto SO(3) after accumulated floating-point drift.
    pub fn renormalized(&self) -> Rotation {
        let q = UnitQuaternion::from_matrix(&self.0);
        Rotation(q.to_rotation_matrix().into_inner())
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.0)
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>) -> Rotation {
        Rotation(q.to_rotation_matrix().into_inner())
    }
}

/// Squared Frobenius distance between two rotations, ||a - b||_F^2.
pub fn rotation_chordal_distance_sq(a: &Rotation, b: &Rotation) -> f64 {
    (a.0 - b.0).norm_squared()
}

fn skew(v: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// A rigid-body pose: rotation plus position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub position: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            position: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, position: Vector3<f64>) -> Self {
        Pose { rotation, position }
    }

    pub fn from_xy_yaw(x: f64, y: f64, yaw: f64) -> Self {
        Pose::new(Rotation::rz(yaw), Vector3::new(x, y, 0.0))
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            position: -rt.apply(&self.position),
            rotation: rt,
        }
    }

    /// Keep the rotation on SO(3); used after incremental updates.
    pub fn renormalized(&self) -> Pose {
        Pose {
            rotation: self.rotation.renormalized(),
            position: self.position,
        }
    }
}

/// Group operation: `a` then `b` expressed in `a`'s frame.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        rotation: a.rotation.mul(&b.rotation),
        position: a.rotation.apply(&b.position) + a.position,
    }
}

/// Pose of `x_j` in `x_i`'s frame: ((R_i)' R_j, (R_i)' (p_j - p_i)).
pub fn relative_pose(x_i: &Pose, x_j: &Pose) -> Pose {
    let rt = x_i.rotation.transpose();
    Pose {
        rotation: rt.mul(&x_j.rotation),
        position: rt.apply(&(x_j.position - x_i.position)),
    }
}

/// Gaussian pose-noise parameters: per-axis translation std in meters and
/// total rotation-angle std in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseNoiseModel {
    pub sigma_trans: f64,
    pub sigma_rot: f64,
}

impl PoseNoiseModel {
    pub fn new(sigma_trans: f64, sigma_rot: f64) -> Self {
        assert!(sigma_trans >= 0.0 && sigma_rot >= 0.0);
        PoseNoiseModel {
            sigma_trans,
            sigma_rot,
        }
    }

    pub fn zero() -> Self {
        PoseNoiseModel {
            sigma_trans: 0.0,
            sigma_rot: 0.0,
        }
    }

    pub fn scaled(&self, trans_scale: f64, rot_scale: f64) -> Self {
        PoseNoiseModel {
            sigma_trans: self.sigma_trans * trans_scale,
            sigma_rot: self.sigma_rot * rot_scale,
        }
    }
}

/// Draw a small pose perturbation: translation is per-axis N(0, sigma_t^2);
/// rotation is exp of a uniformly-directed axis with angle |N(0, sigma_R^2)|.
pub fn sample_pose_noise(model: &PoseNoiseModel, rng: &mut RandomStream) -> Pose {
    if model.sigma_trans == 0.0 && model.sigma_rot == 0.0 {
        return Pose::identity();
    }
    let t = Vector3::new(
        model.sigma_trans * rng.sample::<f64, _>(StandardNormal),
        model.sigma_trans * rng.sample::<f64, _>(StandardNormal),
        model.sigma_trans * rng.sample::<f64, _>(StandardNormal),
    );
    let rotation = if model.sigma_rot == 0.0 {
        Rotation::identity()
    } else {
        let axis = sample_unit_vector(rng);
        let angle = (model.sigma_rot * rng.sample::<f64, _>(StandardNormal)).abs();
        Rotation::exp(axis * angle)
    };
    Pose::new(rotation, t)
}

/// Uniform direction on the unit sphere.
pub fn sample_unit_vector(rng: &mut RandomStream) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}
