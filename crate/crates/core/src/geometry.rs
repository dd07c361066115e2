//! Coordinate systems, spheroid parameterization and microphone array layouts.
//!
//! Prolate spheroidal coordinates `(ξ, η, φ)` with foci at `(0, 0, ±a)`:
//!
//! ```text
//! x = a √(1-η²) √(ξ²-1) cos φ
//! y = a √(1-η²) √(ξ²-1) sin φ
//! z = a η ξ
//! ```
//!
//! All spheroidal computations use the spheroid's local frame, whose z-axis is
//! the long axis. A [`Rotation`] maps local coordinates to the global frame.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gauss_legendre;

pub type Vec3 = [f64; 3];

pub fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `(r, θ, φ)` of a Cartesian point; the origin maps to `(0, 0, 0)`.
pub fn spherical_from_cartesian(p: &Vec3) -> (f64, f64, f64) {
    let r = norm(p);
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
    (r, theta, p[1].atan2(p[0]))
}

pub fn cartesian_from_spherical(r: f64, theta: f64, phi: f64) -> Vec3 {
    [
        r * theta.sin() * phi.cos(),
        r * theta.sin() * phi.sin(),
        r * theta.cos(),
    ]
}

/// Prolate spheroidal coordinates of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProlateCoords {
    pub xi: f64,
    pub eta: f64,
    pub phi: f64,
}

pub fn prolate_from_cartesian(x: f64, y: f64, z: f64, a: f64) -> ProlateCoords {
    let rho2 = x * x + y * y;
    let d_minus = (rho2 + (z + a) * (z + a)).sqrt();
    let d_plus = (rho2 + (z - a) * (z - a)).sqrt();
    let xi = ((d_minus + d_plus) / (2.0 * a)).max(1.0);
    let eta = ((d_minus - d_plus) / (2.0 * a)).clamp(-1.0, 1.0);
    ProlateCoords {
        xi,
        eta,
        phi: y.atan2(x),
    }
}

pub fn cartesian_from_prolate(xi: f64, eta: f64, phi: f64, a: f64) -> Result<Vec3> {
    if !(xi >= 1.0) {
        return Err(Error::domain(format!("ξ = {xi} must be >= 1")));
    }
    if !(-1.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("η = {eta} must lie in [-1, 1]")));
    }
    let rho = a * (1.0 - eta * eta).sqrt() * (xi * xi - 1.0).sqrt();
    Ok([rho * phi.cos(), rho * phi.sin(), a * eta * xi])
}

/// Rigid prolate spheroid `ξ = ξ₁` with half interfocal distance `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProlateParams {
    pub a: f64,
    pub xi1: f64,
}

impl ProlateParams {
    pub fn new(a: f64, xi1: f64) -> Result<Self> {
        if !(a > 0.0) || !(xi1 > 1.0) {
            return Err(Error::domain(format!(
                "prolate spheroid needs a > 0 and ξ₁ > 1, got a = {a}, ξ₁ = {xi1}"
            )));
        }
        Ok(Self { a, xi1 })
    }

    pub fn r_long(&self) -> f64 {
        self.a * self.xi1
    }

    pub fn r_short(&self) -> f64 {
        self.a * (self.xi1 * self.xi1 - 1.0).sqrt()
    }

    pub fn surface_area(&self) -> f64 {
        let (al, b) = (self.r_long(), self.r_short());
        let e = (1.0 - b * b / (al * al)).sqrt();
        2.0 * PI * b * b * (1.0 + al / (b * e) * e.asin())
    }
}

pub fn spheroid_from_radii(r_long: f64, r_short: f64) -> Result<ProlateParams> {
    if !(r_short > 0.0) || !(r_long > r_short) {
        return Err(Error::domain(format!(
            "prolate spheroid needs r_long > r_short > 0, got r_long = {r_long}, r_short = {r_short}"
        )));
    }
    let a = (r_long * r_long - r_short * r_short).sqrt();
    ProlateParams::new(a, r_long / a)
}

/// Coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::parse(format!("unknown axis `{other}`"))),
        }
    }
}

/// Proper rotation from a local frame to the global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    /// Row-major; columns are the images of the local basis vectors.
    m: [[f64; 3]; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Cyclic permutation taking local z onto the given global axis.
    pub fn local_z_to(axis: Axis) -> Self {
        match axis {
            Axis::Z => Self::identity(),
            // local (x, y, z) -> global (y, z, x)
            Axis::X => Self {
                m: [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            },
            // local (x, y, z) -> global (z, x, y)
            Axis::Y => Self {
                m: [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
            },
        }
    }

    /// Rotation by `angle` about the global z-axis.
    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn apply_inverse(&self, v: &Vec3) -> Vec3 {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
            m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn inverse(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn then(&self, next: &Rotation) -> Rotation {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| next.m[i][k] * self.m[k][j]).sum();
            }
        }
        Rotation { m: out }
    }
}

/// Scattering body carrying the microphones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baffle {
    RigidSphere { radius: f64 },
    RigidProlateSpheroid { params: ProlateParams, long_axis: Axis },
}

impl Baffle {
    /// Local-to-global rotation of the baffle frame.
    pub fn frame(&self) -> Rotation {
        match self {
            Baffle::RigidSphere { .. } => Rotation::identity(),
            Baffle::RigidProlateSpheroid { long_axis, .. } => Rotation::local_z_to(*long_axis),
        }
    }

    /// Whether a global point lies strictly inside the baffle.
    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            Baffle::RigidSphere { radius } => norm(p) < *radius,
            Baffle::RigidProlateSpheroid { params, .. } => {
                let l = self.frame().apply_inverse(p);
                prolate_from_cartesian(l[0], l[1], l[2], params.a).xi < params.xi1
            }
        }
    }

    pub fn surface_area(&self) -> f64 {
        match self {
            Baffle::RigidSphere { radius } => 4.0 * PI * radius * radius,
            Baffle::RigidProlateSpheroid { params, .. } => params.surface_area(),
        }
    }
}

/// A microphone on the baffle surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mic {
    /// Global Cartesian position.
    pub position: Vec3,
    /// Position in the baffle's local frame.
    pub local: Vec3,
    /// Native surface coordinates: `(θ, φ)` on a sphere, `(η, φ)` on a spheroid.
    pub native: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub baffle: Baffle,
    pub mics: Vec<Mic>,
}

impl ArrayGeometry {
    pub fn len(&self) -> usize {
        self.mics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mics.is_empty()
    }
}

fn check_counts(k_polar: usize, k_phi: usize) -> Result<()> {
    if k_polar == 0 || k_phi == 0 {
        return Err(Error::domain(format!(
            "microphone grid needs positive counts, got {k_polar} x {k_phi}"
        )));
    }
    Ok(())
}

fn phi_grid(k_phi: usize) -> impl Iterator<Item = f64> {
    (0..k_phi).map(move |j| 2.0 * PI * j as f64 / k_phi as f64)
}

/// Rigid-sphere array on a Gauss-Legendre (in cos θ) × equispaced (in φ) grid.
pub fn build_sphere_array(radius: f64, k_theta: usize, k_phi: usize) -> Result<ArrayGeometry> {
    check_counts(k_theta, k_phi)?;
    if !(radius > 0.0) {
        return Err(Error::domain(format!("sphere radius must be positive, got {radius}")));
    }
    let rule = gauss_legendre(k_theta)?;
    let mut mics = Vec::with_capacity(k_theta * k_phi);
    for &x in &rule.nodes {
        let theta = x.acos();
        for phi in phi_grid(k_phi) {
            let p = cartesian_from_spherical(radius, theta, phi);
            mics.push(Mic {
                position: p,
                local: p,
                native: (theta, phi),
            });
        }
    }
    Ok(ArrayGeometry {
        baffle: Baffle::RigidSphere { radius },
        mics,
    })
}

/// Rigid prolate spheroid array on a Gauss-Legendre (in η) × equispaced (in φ)
/// grid, with its long axis along `long_axis`.
pub fn build_spheroid_array(
    params: ProlateParams,
    k_eta: usize,
    k_phi: usize,
    long_axis: Axis,
) -> Result<ArrayGeometry> {
    check_counts(k_eta, k_phi)?;
    let rot = Rotation::local_z_to(long_axis);
    let rule = gauss_legendre(k_eta)?;
    let mut mics = Vec::with_capacity(k_eta * k_phi);
    for &eta in &rule.nodes {
        for phi in phi_grid(k_phi) {
            let local = cartesian_from_prolate(params.xi1, eta, phi, params.a)?;
            mics.push(Mic {
                position: rot.apply(&local),
                local,
                native: (eta, phi),
            });
        }
    }
    Ok(ArrayGeometry {
        baffle: Baffle::RigidProlateSpheroid { params, long_axis },
        mics,
    })
}

/// Incident plane wave `e^{i k·r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub k: f64,
    /// Unit propagation direction in the global frame.
    pub direction: Vec3,
    pub frequency: f64,
    pub sound_speed: f64,
}

impl PlaneWave {
    pub fn new(frequency: f64, sound_speed: f64, direction: Vec3) -> Result<Self> {
        if !(frequency > 0.0) || !(sound_speed > 0.0) {
            return Err(Error::domain("frequency and sound speed must be positive"));
        }
        let n = norm(&direction);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::domain("plane wave direction must be a nonzero vector"));
        }
        Ok(Self {
            k: 2.0 * PI * frequency / sound_speed,
            direction: [direction[0] / n, direction[1] / n, direction[2] / n],
            frequency,
            sound_speed,
        })
    }

    /// Plane wave with the given wavenumber; frequency assumes 343 m/s.
    pub fn from_wavenumber(k: f64, direction: Vec3) -> Result<Self> {
        Self::new(k * 343.0 / (2.0 * PI), 343.0, direction)
    }

    /// Polar and azimuthal angle of the direction seen from a frame with the
    /// given local-to-global rotation.
    pub fn angles_in(&self, frame: &Rotation) -> (f64, f64) {
        let d = frame.apply_inverse(&self.direction);
        let (_, theta, phi) = spherical_from_cartesian(&d);
        (theta, phi)
    }

    /// The same wave expressed in a local frame (direction rotated by the inverse).
    pub fn in_frame(&self, frame: &Rotation) -> PlaneWave {
        PlaneWave {
            direction: frame.apply_inverse(&self.direction),
            ..*self
        }
    }

    pub fn value_at(&self, p: &Vec3) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(1.0, self.k * dot(&self.direction, p))
    }
}
