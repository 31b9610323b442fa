//! Vessel geometry and coordinate conversions.
//!
//! Internal units are micrometers everywhere. The vessel is a cylinder of
//! radius `R` aligned with the z axis, spanning `z in [0, length]`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Minimal 3-vector used for positions and displacements (um).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Radial distance from the vessel axis. Coordinates stay within
    /// vessel scale, so the plain square root cannot overflow.
    pub fn radial(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n == 0.0 {
            Vec3::ZERO
        } else {
            self * (1.0 / n)
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

/// Position in cylindrical coordinates: azimuth `phi` (rad, in `[0, 2pi)`),
/// radial distance `r` (um) and axial coordinate `z` (um).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylindricalPosition {
    pub phi: f64,
    pub r: f64,
    pub z: f64,
}

impl CylindricalPosition {
    pub fn new(phi: f64, r: f64, z: f64) -> Self {
        CylindricalPosition { phi: wrap_angle(phi), r, z }
    }

    pub fn to_cartesian(self) -> Vec3 {
        Vec3::new(self.r * self.phi.cos(), self.r * self.phi.sin(), self.z)
    }

    /// Inverse of [`to_cartesian`]. A point on the axis gets `phi = 0`.
    pub fn from_cartesian(v: Vec3) -> Self {
        let r = v.radial();
        let phi = if r == 0.0 { 0.0 } else { wrap_angle(v.y.atan2(v.x)) };
        CylindricalPosition { phi, r, z: v.z }
    }
}

/// Normalizes an angle into `[0, 2pi)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can return TAU when phi is a tiny negative number.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angular difference into `(-pi, pi]`.
pub fn wrap_angle_signed(dphi: f64) -> f64 {
    let w = dphi.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// What happens to particles that reach the axial ends of the vessel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutletPolicy {
    /// Particles crossing either end leave the simulation for good.
    #[default]
    Absorbing,
}

/// Cylindrical vessel: radius and length in um.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselGeometry {
    pub radius_um: f64,
    pub length_um: f64,
    pub outlet: OutletPolicy,
}

impl VesselGeometry {
    pub fn new(radius_um: f64, length_um: f64) -> Self {
        VesselGeometry { radius_um, length_um, outlet: OutletPolicy::Absorbing }
    }

    /// Whether a sphere of radius `a` centered at `p` lies fully inside the wall.
    pub fn contains(&self, p: Vec3, a: f64) -> bool {
        p.radial() <= self.radius_um - a
    }

    pub fn circumference(&self) -> f64 {
        TAU * self.radius_um
    }

    pub fn cross_section_um2(&self) -> f64 {
        PI * self.radius_um * self.radius_um
    }

    pub fn volume_um3(&self) -> f64 {
        self.cross_section_um2() * self.length_um
    }
}
