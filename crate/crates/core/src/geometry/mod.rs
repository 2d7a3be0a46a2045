//! Poincaré-sphere vectors, measurement-setting ensembles and the geometric
//! constant ξ of an ensemble's difference directions.

mod ensemble;
pub mod sphere;
mod xi;

pub use ensemble::{rotate_settings, standard_triplets, tetrahedron_triplets, SettingsEnsemble, SettingsTriplet, Side};
pub use xi::{xi_lower_bound, xi_objective, DEFAULT_XI_RESOLUTION};

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on |v|² − 1 accepted for a unit vector.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Radians to degrees, rounded to 10 decimals so that values entered in
/// degrees print back unchanged.
pub fn degrees(radians: f64) -> f64 {
    (radians.to_degrees() * 1e10).round() / 1e10
}

/// Raw Cartesian triple used for vector arithmetic before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalize(self) -> Result<BlochVector> {
        BlochVector::try_from(self)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Vec3::new(x, y, z)
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self * v.x, self * v.y, self * v.z)
    }
}

/// A point on the unit (Poincaré) sphere.
///
/// Constructed only through normalization, so `x² + y² + z² = 1` holds to
/// [`UNIT_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector(Vec3);

impl BlochVector {
    pub const X: BlochVector = BlochVector(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: BlochVector = BlochVector(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: BlochVector = BlochVector(Vec3::new(0.0, 0.0, 1.0));

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Vec3::new(x, y, z).normalize()
    }

    /// Point with polar angle `theta` from +z and azimuth `phi` from +x.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        BlochVector(Vec3::new(st * cp, st * sp, ct))
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn vec(&self) -> Vec3 {
        self.0
    }

    pub fn to_array(&self) -> [f64; 3] {
        self.0.into()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.0.dot(other.0)
    }

    /// Great-circle angle to `other`, in `[0, π]`.
    pub fn angle_to(&self, other: &BlochVector) -> f64 {
        // atan2 form stays accurate near 0 and π where acos does not.
        let cross = self.0.cross(other.0).norm();
        cross.atan2(self.dot(other))
    }

    /// Rotation by `angle` about `axis` (right-hand rule), Rodrigues' formula.
    pub fn rotate(&self, axis: &BlochVector, angle: f64) -> BlochVector {
        let (s, c) = angle.sin_cos();
        let k = axis.0;
        let v = self.0;
        let rotated = c * v + s * k.cross(v) + (k.dot(v) * (1.0 - c)) * k;
        // Re-normalize to keep rounding from accumulating over repeated rotations.
        let n = rotated.norm();
        BlochVector((1.0 / n) * rotated)
    }

    /// Two unit vectors spanning the tangent plane at `self`.
    pub fn tangent_basis(&self) -> (BlochVector, BlochVector) {
        let v = self.0;
        let helper = if v.x.abs() < 0.9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        let t1 = helper - helper.dot(v) * v;
        let t1 = (1.0 / t1.norm()) * t1;
        let t2 = v.cross(t1);
        (BlochVector(t1), BlochVector(t2))
    }

    /// Any unit vector orthogonal to `self`.
    pub fn orthogonal(&self) -> BlochVector {
        self.tangent_basis().0
    }
}

impl TryFrom<Vec3> for BlochVector {
    type Error = Error;

    fn try_from(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::ZeroVector);
        }
        Ok(BlochVector((1.0 / n) * v))
    }
}

impl TryFrom<[f64; 3]> for BlochVector {
    type Error = Error;

    fn try_from(a: [f64; 3]) -> Result<Self> {
        Vec3::from(a).normalize()
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        v.to_array()
    }
}

impl From<BlochVector> for Vec3 {
    fn from(v: BlochVector) -> Self {
        v.0
    }
}

impl Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        BlochVector(-self.0)
    }
}

impl fmt::Display for BlochVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.0.x, self.0.y, self.0.z)
    }
}
