//! Orthotropic plane-stress constitutive laws, fibre rotation and the
//! discrete-material weighting scheme.
//!
//! Stress and strain use Voigt order `(xx, yy, xy)` with engineering shear
//! strain. A material stiffness `D` given in fibre axes is brought into the
//! global frame with `D(theta) = T(theta) D T(theta)^T`, where `T` is built by
//! [`rotation_matrix`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, AddAssign, Mul};

use serde::{Deserialize, Serialize};

use crate::linalg::Mat3;
use crate::{Error, Result};

/// Plane-stress stiffness matrix (3x3, symmetric).
///
/// Fibre-axis materials have zero `13`/`23` coupling; rotated or blended
/// matrices generally do not.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstitutiveMatrix(pub Mat3);

impl ConstitutiveMatrix {
    pub const ZERO: ConstitutiveMatrix = ConstitutiveMatrix(Mat3::ZERO);

    /// Orthotropic stiffness from its four independent entries.
    pub fn orthotropic(d11: f64, d12: f64, d22: f64, d33: f64) -> Self {
        ConstitutiveMatrix(Mat3([[d11, d12, 0.0], [d12, d22, 0.0], [0.0, 0.0, d33]]))
    }

    /// Orthotropic plane-stress stiffness from engineering constants.
    ///
    /// `nu_xy` is the major Poisson ratio; the minor one follows from
    /// reciprocity, `nu_yx = nu_xy * ey / ex`.
    pub fn from_engineering(ex: f64, ey: f64, gxy: f64, nu_xy: f64) -> Result<Self> {
        for (name, value) in [("ex", ex), ("ey", ey), ("gxy", gxy)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::NonPositiveModulus { name, value });
            }
        }
        if !nu_xy.is_finite() {
            return Err(Error::NonFinite { what: "nu_xy" });
        }
        let nu_yx = nu_xy * ey / ex;
        let denominator = 1.0 - nu_xy * nu_yx;
        if denominator <= 0.0 {
            return Err(Error::PoissonCoupling { denominator });
        }
        let d11 = ex / denominator;
        let d22 = ey / denominator;
        Ok(Self::orthotropic(d11, nu_xy * d22, d22, gxy))
    }

    /// Isotropic plane-stress stiffness.
    pub fn isotropic(e: f64, nu: f64) -> Self {
        let s = e / (1.0 - nu * nu);
        Self::orthotropic(s, nu * s, s, 0.5 * e / (1.0 + nu))
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.0 .0[row][col]
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// Checks `|D_ij - D_ji| <= rel_tol * max|D|` for all off-diagonal pairs.
    pub fn check_symmetric(&self, rel_tol: f64) -> Result<()> {
        let scale = self.0.max_abs().max(f64::MIN_POSITIVE);
        for (row, col) in [(0, 1), (0, 2), (1, 2)] {
            let difference = (self.entry(row, col) - self.entry(col, row)).abs();
            if difference > rel_tol * scale {
                return Err(Error::NonSymmetric {
                    row,
                    col,
                    difference,
                });
            }
        }
        Ok(())
    }

    /// Stiffness rotated to fibre angle `theta` (radians).
    pub fn rotated(&self, theta: f64) -> ConstitutiveMatrix {
        rotate_constitutive(self, theta)
    }
}

impl Add for ConstitutiveMatrix {
    type Output = ConstitutiveMatrix;

    fn add(self, rhs: Self) -> Self {
        ConstitutiveMatrix(self.0 + rhs.0)
    }
}

impl AddAssign for ConstitutiveMatrix {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Mul<f64> for ConstitutiveMatrix {
    type Output = ConstitutiveMatrix;

    fn mul(self, s: f64) -> Self {
        ConstitutiveMatrix(self.0 * s)
    }
}

/// Material input in either of the two supported forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialSpec {
    /// Direct orthotropic stiffness entries in fibre axes.
    Stiffness { d11: f64, d12: f64, d22: f64, d33: f64 },
    /// Engineering constants.
    Engineering { ex: f64, ey: f64, gxy: f64, nu_xy: f64 },
}

impl MaterialSpec {
    pub fn constitutive(&self) -> Result<ConstitutiveMatrix> {
        match *self {
            MaterialSpec::Stiffness { d11, d12, d22, d33 } => {
                let d = ConstitutiveMatrix::orthotropic(d11, d12, d22, d33);
                if !d.is_finite() {
                    return Err(Error::NonFinite { what: "material" });
                }
                if d11 <= 0.0 || d22 <= 0.0 || d33 <= 0.0 || d11 * d22 - d12 * d12 <= 0.0 {
                    return Err(Error::config(
                        "material.stiffness",
                        "must be positive definite (d11, d22, d33 > 0 and d11*d22 > d12^2)",
                    ));
                }
                Ok(d)
            }
            MaterialSpec::Engineering { ex, ey, gxy, nu_xy } => {
                ConstitutiveMatrix::from_engineering(ex, ey, gxy, nu_xy)
            }
        }
    }
}

/// Ordered set of distinct candidate fibre angles.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateAngleSet {
    degrees: Vec<f64>,
    radians: Vec<f64>,
}

impl CandidateAngleSet {
    /// Validates and stores angles given in degrees.
    ///
    /// Requires at least two angles, each in `[-90, 90]`, with no two equal
    /// modulo 180 degrees.
    pub fn from_degrees(degrees: &[f64]) -> Result<Self> {
        if degrees.len() < 2 {
            return Err(Error::config(
                "candidates_deg",
                "needs at least two candidate angles",
            ));
        }
        for (i, &a) in degrees.iter().enumerate() {
            if !a.is_finite() || !(-90.0..=90.0).contains(&a) {
                return Err(Error::config(
                    "candidates_deg",
                    alloc::format!("angle {a} at position {i} is outside [-90, 90]"),
                ));
            }
            for &b in &degrees[..i] {
                let d = libm::fmod((a - b).abs(), 180.0);
                if d < 1e-9 || 180.0 - d < 1e-9 {
                    return Err(Error::config(
                        "candidates_deg",
                        alloc::format!("angles {b} and {a} coincide modulo 180 degrees"),
                    ));
                }
            }
        }
        Ok(CandidateAngleSet {
            degrees: degrees.to_vec(),
            radians: degrees.iter().map(|d| d * PI / 180.0).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn radians(&self) -> &[f64] {
        &self.radians
    }

    /// `D` rotated to every candidate angle, in candidate order.
    pub fn rotated(&self, d: &ConstitutiveMatrix) -> Vec<ConstitutiveMatrix> {
        self.radians.iter().map(|&t| rotate_constitutive(d, t)).collect()
    }
}

/// Stress transformation used to rotate fibre-axis stiffness into the
/// global frame.
///
/// ```text
/// [ c^2   s^2   -sin 2t ]
/// [ s^2   c^2    sin 2t ]
/// [ s c  -s c    c^2 - s^2 ]
/// ```
pub fn rotation_matrix(theta: f64) -> Mat3 {
    let (s, c) = libm::sincos(theta);
    let s2 = libm::sin(2.0 * theta);
    Mat3([
        [c * c, s * s, -s2],
        [s * s, c * c, s2],
        [s * c, -s * c, c * c - s * s],
    ])
}

/// Entrywise derivative of [`rotation_matrix`] with respect to `theta`.
pub fn rotation_matrix_derivative(theta: f64) -> Mat3 {
    let (s2, c2) = libm::sincos(2.0 * theta);
    Mat3([
        [-s2, s2, -2.0 * c2],
        [s2, -s2, 2.0 * c2],
        [c2, -c2, -2.0 * s2],
    ])
}

/// `T(theta) D T(theta)^T`.
pub fn rotate_constitutive(d: &ConstitutiveMatrix, theta: f64) -> ConstitutiveMatrix {
    let t = rotation_matrix(theta);
    ConstitutiveMatrix(t * d.0 * t.transpose())
}

/// Derivative of [`rotate_constitutive`] with respect to `theta`.
pub fn rotate_constitutive_derivative(d: &ConstitutiveMatrix, theta: f64) -> ConstitutiveMatrix {
    let t = rotation_matrix(theta);
    let dt = rotation_matrix_derivative(theta);
    let a = dt * d.0 * t.transpose();
    ConstitutiveMatrix(a + a.transpose())
}

fn check_chi(chi: &[f64]) -> Result<()> {
    for (index, &value) in chi.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfUnitInterval { index, value });
        }
    }
    Ok(())
}

/// Discrete-material weights for one element:
/// `w_j = (eps + chi_j^p) * prod_{k != j} (eps + 1 - chi_k^p)`.
///
/// The weights are deliberately not normalised.
pub fn dmo_weights(chi: &[f64], p: f64, eps: f64) -> Result<Vec<f64>> {
    check_chi(chi)?;
    let mut w = vec![0.0; chi.len()];
    dmo_weights_into(chi, p, eps, &mut w);
    Ok(w)
}

/// Unchecked variant of [`dmo_weights`] writing into `out`.
pub(crate) fn dmo_weights_into(chi: &[f64], p: f64, eps: f64, out: &mut [f64]) {
    let n = chi.len();
    for j in 0..n {
        let mut w = eps + libm::pow(chi[j], p);
        for (k, &c) in chi.iter().enumerate() {
            if k != j {
                w *= eps + (1.0 - libm::pow(c, p));
            }
        }
        out[j] = w;
    }
}

/// Jacobian of [`dmo_weights`]: entry `[k * n + j]` is `dw_k / dchi_j`.
pub fn dmo_weight_gradient(chi: &[f64], p: f64, eps: f64) -> Result<Vec<f64>> {
    check_chi(chi)?;
    let n = chi.len();
    let mut g = vec![0.0; n * n];
    dmo_weight_gradient_into(chi, p, eps, &mut g);
    Ok(g)
}

pub(crate) fn dmo_weight_gradient_into(chi: &[f64], p: f64, eps: f64, out: &mut [f64]) {
    let n = chi.len();
    let powp: Vec<f64> = chi.iter().map(|&c| libm::pow(c, p)).collect();
    let dpow: Vec<f64> = chi.iter().map(|&c| p * libm::pow(c, p - 1.0)).collect();
    for k in 0..n {
        for j in 0..n {
            let v = if k == j {
                let mut v = dpow[j];
                for m in 0..n {
                    if m != j {
                        v *= eps + (1.0 - powp[m]);
                    }
                }
                v
            } else {
                let mut v = -dpow[j] * (eps + powp[k]);
                for m in 0..n {
                    if m != j && m != k {
                        v *= eps + (1.0 - powp[m]);
                    }
                }
                v
            };
            out[k * n + j] = v;
        }
    }
}

/// Blended stiffness `sum_j w_j D(theta_j)` for one element.
pub fn dmo_effective_constitutive(
    chi: &[f64],
    candidates: &CandidateAngleSet,
    d_base: &ConstitutiveMatrix,
    p: f64,
    eps: f64,
) -> Result<ConstitutiveMatrix> {
    if chi.len() != candidates.len() {
        return Err(Error::LengthMismatch {
            what: "candidate densities",
            expected: candidates.len(),
            actual: chi.len(),
        });
    }
    let w = dmo_weights(chi, p, eps)?;
    Ok(blend(&w, &candidates.rotated(d_base)))
}

pub(crate) fn blend(weights: &[f64], rotated: &[ConstitutiveMatrix]) -> ConstitutiveMatrix {
    weights
        .iter()
        .zip(rotated)
        .fold(ConstitutiveMatrix::ZERO, |acc, (&w, d)| acc + *d * w)
}
