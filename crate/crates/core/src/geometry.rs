//! Scene geometry: the cylindrical tube, the antenna arrays and the
//! deterministic propagation quantities derived from them.
//!
//! Coordinates are Cartesian and in meters. The tube axis runs along `x`
//! at `y = 0`, `z = axis_height`. Wall points are first computed in a local
//! frame whose origin sits on the axis and are then translated into the
//! scene frame.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 3D real vector. Meters for positions, m/s for velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ZERO: Vector3 = Vector3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Vector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Euclidean (Frobenius) norm.
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y).hypot(self.z)
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn distance(&self, other: &Vector3) -> f64 {
        (*self - *other).norm()
    }

    /// Azimuth in the x-y plane and elevation above it, radians.
    pub fn azimuth_elevation(&self) -> (f64, f64) {
        (self.y.atan2(self.x), self.z.atan2(self.x.hypot(self.y)))
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    fn add(self, rhs: Vector3) -> Vector3 {
        Vector3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Vector3 {
    fn add_assign(&mut self, rhs: Vector3) {
        self.x += rhs.x;
        self.y += rhs.y;
        self.z += rhs.z;
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    fn sub(self, rhs: Vector3) -> Vector3 {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    fn mul(self, rhs: f64) -> Vector3 {
        Vector3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Vector3 {
        Vector3::new(-self.x, -self.y, -self.z)
    }
}

/// Azimuth/elevation pair, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Angles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angles {
    pub const fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }

    pub fn offset(&self, d_azimuth: f64, d_elevation: f64) -> Self {
        Self::new(self.azimuth + d_azimuth, self.elevation + d_elevation)
    }
}

/// Uniform linear array along the tube axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaArray {
    pub element_positions: Vec<Vector3>,
    pub spacing: f64,
}

impl AntennaArray {
    /// `count` elements spaced `spacing` apart along `x`, centered on `center`.
    pub fn uniform_linear(center: Vector3, count: usize, spacing: f64) -> Self {
        let mid = (count as f64 - 1.0) / 2.0;
        let element_positions = (0..count)
            .map(|i| center + Vector3::new((i as f64 - mid) * spacing, 0.0, 0.0))
            .collect();
        Self {
            element_positions,
            spacing,
        }
    }

    pub fn element_count(&self) -> usize {
        self.element_positions.len()
    }

    pub fn center(&self) -> Vector3 {
        let n = self.element_positions.len().max(1) as f64;
        self.element_positions
            .iter()
            .fold(Vector3::ZERO, |acc, p| acc + *p)
            * (1.0 / n)
    }

    /// Rigid translation of every element.
    pub fn advanced(&self, v: Vector3, dt: f64) -> Self {
        Self {
            element_positions: self
                .element_positions
                .iter()
                .map(|p| advance_rx(*p, v, dt))
                .collect(),
            spacing: self.spacing,
        }
    }
}

/// The cylindrical tube and the initial link placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeScene {
    pub radius: f64,
    pub axis_height: f64,
    pub tx_reference: Vector3,
    pub rx_initial: Vector3,
}

impl TubeScene {
    pub fn new(radius: f64, axis_height: f64, tx_reference: Vector3, rx_initial: Vector3) -> Result<Self> {
        let scene = Self {
            radius,
            axis_height,
            tx_reference,
            rx_initial,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Geometry(format!("tube radius must be positive, got {}", self.radius)));
        }
        if !(self.initial_distance() > 0.0) {
            return Err(Error::Geometry("Tx and Rx initial positions coincide".into()));
        }
        for (name, p) in [("tx", self.tx_reference), ("rx", self.rx_initial)] {
            if !self.contains(&p) {
                return Err(Error::Geometry(format!(
                    "{name} position ({}, {}, {}) lies outside the tube",
                    p.x, p.y, p.z
                )));
            }
        }
        Ok(())
    }

    /// Initial Tx→Rx displacement.
    pub fn initial_displacement(&self) -> Vector3 {
        self.rx_initial - self.tx_reference
    }

    pub fn initial_distance(&self) -> f64 {
        self.initial_displacement().norm()
    }

    /// Point inside the tube or on its wall (APs are wall mounted).
    pub fn contains(&self, p: &Vector3) -> bool {
        let dz = p.z - self.axis_height;
        p.y * p.y + dz * dz <= self.radius * self.radius * (1.0 + 1e-12)
    }

    /// Local wall frame anchored on the axis at the abscissa of `center`.
    pub fn frame_at(&self, center: Vector3) -> Vector3 {
        Vector3::new(center.x, 0.0, self.axis_height)
    }
}

/// Rx velocity, constant over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionState {
    pub velocity: Vector3,
    pub time: f64,
}

impl MotionState {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Vector from a Tx element to an Rx element.
pub fn los_vector(tx_element: Vector3, rx_element: Vector3) -> Vector3 {
    rx_element - tx_element
}

pub fn los_delay(d: Vector3) -> f64 {
    d.norm() / SPEED_OF_LIGHT
}

/// Projection Doppler `<d, v> / (|d| λ)`, signed exactly as written: it is
/// negative when `v` points against `d`.
pub fn los_doppler(d: Vector3, v: Vector3, wavelength: f64) -> Result<f64> {
    let n = d.norm();
    if !(n > 0.0) {
        return Err(Error::DegenerateGeometry("zero-length propagation vector".into()));
    }
    if !(wavelength > 0.0) {
        return Err(Error::DegenerateGeometry(format!("non-positive wavelength {wavelength}")));
    }
    Ok(d.dot(&v) / n / wavelength)
}

/// Point on the radius-`R` wall hit by a ray leaving the axis with the given
/// azimuth and elevation, in the local frame centered on the axis.
///
/// The third direction cosine is `sin β`; with it the scale factor places the
/// point exactly on `y² + z² = R²`.
pub fn wall_point_from_angles(azimuth: f64, elevation: f64, radius: f64) -> Result<Vector3> {
    let (ca, sa) = (azimuth.cos(), azimuth.sin());
    let (cb, sb) = (elevation.cos(), elevation.sin());
    let transverse = 1.0 - cb * cb * ca * ca;
    if !(transverse > 1e-12) {
        return Err(Error::NoWallIntersection { azimuth, elevation });
    }
    let s = radius / transverse.sqrt();
    Ok(Vector3::new(s * cb * ca, s * cb * sa, s * sb))
}

/// Absolute position of a wall point seen from the axis frame at `frame_origin`.
pub fn wall_point_in_frame(angles: Angles, radius: f64, frame_origin: Vector3) -> Result<Vector3> {
    Ok(frame_origin + wall_point_from_angles(angles.azimuth, angles.elevation, radius)?)
}

/// Tx-side and Rx-side displacement vectors `(D^T, D^R)` for one ray.
///
/// The Tx wall point is taken in the axis frame at the Tx reference; the Rx
/// wall point in the axis frame translated by the initial displacement `D`.
pub fn ray_displacements(
    tx_angles: Angles,
    rx_angles: Angles,
    scene: &TubeScene,
    tx_element: Vector3,
    rx_element: Vector3,
) -> Result<(Vector3, Vector3)> {
    let tx_frame = scene.frame_at(scene.tx_reference);
    let rx_frame = scene.frame_at(scene.rx_initial);
    let w_tx = wall_point_in_frame(tx_angles, scene.radius, tx_frame)?;
    let w_rx = wall_point_in_frame(rx_angles, scene.radius, rx_frame)?;
    Ok((w_tx - tx_element, w_rx - rx_element))
}

/// Rigid-body position update of an Rx element.
pub fn advance_rx(position: Vector3, v: Vector3, dt: f64) -> Vector3 {
    position + v * dt
}
