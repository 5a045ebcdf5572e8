use crate::linalg::Mat3;
use crate::material::ConstitutiveMatrix;
use crate::{Error, Result};

/// Dense 8x8 element matrix, DOFs ordered `[u0, v0, u1, v1, u2, v2, u3, v3]`.
pub type ElementMatrix = [[f64; 8]; 8];

const NODE_XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const NODE_ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

/// Precomputed quadrature data for the unit-square bilinear element.
///
/// Element stiffness is linear in `D`, so it is stored as nine basis
/// matrices `K_ab = sum_gp w |J| B_a^T B_b` with `k(D) = sum_ab D_ab K_ab`.
#[derive(Debug, Clone)]
pub struct ElementKernel {
    /// Strain-displacement matrices at the four Gauss points.
    b: [[[f64; 8]; 3]; 4],
    basis: [[ElementMatrix; 3]; 3],
}

impl Default for ElementKernel {
    fn default() -> Self {
        Self::new()
    }
}

impl ElementKernel {
    pub fn new() -> Self {
        let g = 1.0 / libm::sqrt(3.0);
        let points = [(-g, -g), (g, -g), (g, g), (-g, g)];
        let mut b = [[[0.0; 8]; 3]; 4];
        for (gp, &(xi, eta)) in points.iter().enumerate() {
            for n in 0..4 {
                // x = (1 + xi) / 2 on a unit square, so d/dx = 2 d/dxi.
                let dndx = 2.0 * 0.25 * NODE_XI[n] * (1.0 + eta * NODE_ETA[n]);
                let dndy = 2.0 * 0.25 * NODE_ETA[n] * (1.0 + xi * NODE_XI[n]);
                b[gp][0][2 * n] = dndx;
                b[gp][1][2 * n + 1] = dndy;
                b[gp][2][2 * n] = dndy;
                b[gp][2][2 * n + 1] = dndx;
            }
        }
        // Gauss weights are 1 and det J = 1/4.
        let mut basis = [[[[0.0; 8]; 8]; 3]; 3];
        for bgp in &b {
            for a in 0..3 {
                for c in 0..3 {
                    for i in 0..8 {
                        for j in 0..8 {
                            basis[a][c][i][j] += 0.25 * bgp[a][i] * bgp[c][j];
                        }
                    }
                }
            }
        }
        ElementKernel { b, basis }
    }

    /// `k(D)` without validation.
    pub fn stiffness(&self, d: &ConstitutiveMatrix) -> ElementMatrix {
        let mut k = [[0.0; 8]; 8];
        for a in 0..3 {
            for c in 0..3 {
                let dac = d.entry(a, c);
                if dac == 0.0 {
                    continue;
                }
                let basis = &self.basis[a][c];
                for i in 0..8 {
                    for j in i..8 {
                        k[i][j] += dac * basis[i][j];
                    }
                }
            }
        }
        for i in 1..8 {
            for j in 0..i {
                k[i][j] = k[j][i];
            }
        }
        k
    }

    /// `S = sum_gp w |J| eps eps^T` for element displacements `ue`.
    ///
    /// For any constitutive matrix, `ue^T k(D) ue = <D, S>` (Frobenius), so
    /// every compliance sensitivity reduces to a 3x3 inner product with `S`.
    pub fn strain_energy_tensor(&self, ue: &[f64; 8]) -> Mat3 {
        let mut s = [[0.0; 3]; 3];
        for bgp in &self.b {
            let mut eps = [0.0; 3];
            for (e, row) in eps.iter_mut().zip(bgp) {
                *e = row.iter().zip(ue).map(|(b, u)| b * u).sum();
            }
            for a in 0..3 {
                for c in 0..3 {
                    s[a][c] += 0.25 * eps[a] * eps[c];
                }
            }
        }
        Mat3(s)
    }
}

/// Stiffness of one unit-square element for constitutive matrix `d`.
pub fn element_stiffness(d: &ConstitutiveMatrix) -> Result<ElementMatrix> {
    if !d.is_finite() {
        return Err(Error::NonFinite {
            what: "constitutive matrix",
        });
    }
    d.check_symmetric(1e-10)?;
    Ok(ElementKernel::new().stiffness(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{SMatrix, SymmetricEigen};

    /// Closed-form bilinear plane-stress stiffness of a unit square for an
    /// isotropic material, as tabulated in the classic 88-line topology
    /// optimisation code (same counter-clockwise node order).
    fn analytic_isotropic(e: f64, nu: f64) -> ElementMatrix {
        let k = [
            0.5 - nu / 6.0,
            0.125 + nu / 8.0,
            -0.25 - nu / 12.0,
            -0.125 + 3.0 * nu / 8.0,
            -0.25 + nu / 12.0,
            -0.125 - nu / 8.0,
            nu / 6.0,
            0.125 - 3.0 * nu / 8.0,
        ];
        let idx = [
            [0, 1, 2, 3, 4, 5, 6, 7],
            [1, 0, 7, 6, 5, 4, 3, 2],
            [2, 7, 0, 5, 6, 3, 4, 1],
            [3, 6, 5, 0, 7, 2, 1, 4],
            [4, 5, 6, 7, 0, 1, 2, 3],
            [5, 4, 3, 2, 1, 0, 7, 6],
            [6, 3, 4, 1, 2, 7, 0, 5],
            [7, 2, 1, 4, 3, 6, 5, 0],
        ];
        let s = e / (1.0 - nu * nu);
        let mut out = [[0.0; 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                out[i][j] = s * k[idx[i][j]];
            }
        }
        out
    }

    fn eigenvalues(k: &ElementMatrix) -> [f64; 8] {
        let m = SMatrix::<f64, 8, 8>::from_fn(|i, j| k[i][j]);
        let mut ev: [f64; 8] = SymmetricEigen::new(m).eigenvalues.into();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn zero_material_gives_zero_stiffness() {
        let k = element_stiffness(&ConstitutiveMatrix::ZERO).unwrap();
        assert!(k.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn isotropic_matches_closed_form() {
        let k = element_stiffness(&ConstitutiveMatrix::isotropic(1.0, 0.3)).unwrap();
        let expected = analytic_isotropic(1.0, 0.3);
        for i in 0..8 {
            for j in 0..8 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn orthotropic_spectrum_has_three_rigid_body_modes() {
        let d = ConstitutiveMatrix::orthotropic(0.5448, 0.0383, 0.1277, 0.0456);
        for theta in [0.0, 0.3, core::f64::consts::FRAC_PI_4, 1.2] {
            let k = element_stiffness(&d.rotated(theta)).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(k[i][j], k[j][i]);
                }
            }
            let ev = eigenvalues(&k);
            assert!(ev[..3].iter().all(|v| v.abs() < 1e-10), "{ev:?}");
            assert!(ev[3..].iter().all(|&v| v > 1e-4), "{ev:?}");
        }
    }

    #[test]
    fn rejects_non_symmetric_material() {
        let mut d = ConstitutiveMatrix::isotropic(1.0, 0.3);
        d.0 .0[2][0] = 0.1;
        assert!(matches!(element_stiffness(&d), Err(Error::NonSymmetric { .. })));
        d = ConstitutiveMatrix::isotropic(f64::NAN, 0.3);
        assert!(matches!(element_stiffness(&d), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn strain_energy_tensor_reproduces_quadratic_form() {
        let kernel = ElementKernel::new();
        let d = ConstitutiveMatrix::orthotropic(0.5448, 0.0383, 0.1277, 0.0456).rotated(0.7);
        let ue = [0.1, -0.3, 0.25, 0.05, -0.2, 0.4, 0.0, -0.15];
        let k = kernel.stiffness(&d);
        let mut quad = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                quad += ue[i] * k[i][j] * ue[j];
            }
        }
        let s = kernel.strain_energy_tensor(&ue);
        assert!((s.dot(&d.0) - quad).abs() < 1e-14);
    }
}
