//! 6×6 stiffness matrices in Voigt notation.
//!
//! Voigt index order is 11, 22, 33, 23, 13, 12 with engineering shear strains, so the 21
//! stored components are the upper triangle read row by row (Q11..Q16, Q22..Q26, ...).
//! Rotations are carried out in Mandel form, where shear rows and columns are scaled by √2 and
//! the 6×6 rotation (Bond) matrix is orthogonal.

use nalgebra::{Matrix3, Matrix6};
use serde::{Deserialize, Serialize};

use super::N_OUTPUTS;
use crate::{Error, Result};

pub type Stiffness = Matrix6<f64>;

/// Tensor index pair behind each Voigt index.
const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Assembles the symmetric matrix from its 21 upper-triangle components.
pub fn from_components(q: &[f64; N_OUTPUTS]) -> Stiffness {
    let mut m = Stiffness::zeros();
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            m[(i, j)] = q[k];
            m[(j, i)] = q[k];
            k += 1;
        }
    }
    m
}

pub fn to_components(m: &Stiffness) -> [f64; N_OUTPUTS] {
    let mut q = [0.0; N_OUTPUTS];
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            q[k] = m[(i, j)];
            k += 1;
        }
    }
    q
}

fn mandel_weight(i: usize) -> f64 {
    if i < 3 {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

pub fn voigt_to_mandel(c: &Stiffness) -> Stiffness {
    Stiffness::from_fn(|i, j| c[(i, j)] * mandel_weight(i) * mandel_weight(j))
}

pub fn mandel_to_voigt(c: &Stiffness) -> Stiffness {
    Stiffness::from_fn(|i, j| c[(i, j)] / (mandel_weight(i) * mandel_weight(j)))
}

/// Rotation by `g1` about axis 1, then `g2` about axis 2, then `g3` about axis 3.
pub fn rotation(g1: f64, g2: f64, g3: f64) -> Matrix3<f64> {
    let (s1, c1) = g1.sin_cos();
    let (s2, c2) = g2.sin_cos();
    let (s3, c3) = g3.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, c1, -s1, 0.0, s1, c1);
    let ry = Matrix3::new(c2, 0.0, s2, 0.0, 1.0, 0.0, -s2, 0.0, c2);
    let rz = Matrix3::new(c3, -s3, 0.0, s3, c3, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

/// Orthonormal Mandel basis tensor for index `i`.
fn mandel_basis(i: usize) -> Matrix3<f64> {
    let (a, b) = VOIGT_PAIRS[i];
    let mut e = Matrix3::zeros();
    if a == b {
        e[(a, a)] = 1.0;
    } else {
        let w = std::f64::consts::FRAC_1_SQRT_2;
        e[(a, b)] = w;
        e[(b, a)] = w;
    }
    e
}

/// 6×6 matrix of the map `T ↦ R T Rᵀ` on symmetric tensors, in the Mandel basis.
pub fn mandel_rotation(r: &Matrix3<f64>) -> Stiffness {
    let rotated: Vec<Matrix3<f64>> = (0..6)
        .map(|j| r * mandel_basis(j) * r.transpose())
        .collect();
    Stiffness::from_fn(|i, j| mandel_basis(i).component_mul(&rotated[j]).sum())
}

/// Expresses a Voigt stiffness in a frame rotated by `r`.
pub fn rotate(c: &Stiffness, r: &Matrix3<f64>) -> Stiffness {
    let k = mandel_rotation(r);
    mandel_to_voigt(&(k * voigt_to_mandel(c) * k.transpose()))
}

/// Orthotropic stiffness with axis moduli `e`, a single Poisson ratio `nu` and shear moduli
/// `G_ij = sqrt(E_i E_j) / (2 (1 + nu))`. Off-diagonal compliances are `-nu / sqrt(E_i E_j)`,
/// which keeps the compliance symmetric; it is positive definite for `-1 < nu < 0.5`.
pub fn orthotropic(e: [f64; 3], nu: f64) -> Result<Stiffness> {
    if e.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(nu > -1.0 && nu < 0.5) {
        return Err(Error::Mechanics(format!(
            "orthotropic constants out of range: E = {e:?}, nu = {nu}"
        )));
    }
    let mut s = Stiffness::zeros();
    for i in 0..3 {
        for j in 0..3 {
            s[(i, j)] = if i == j {
                1.0 / e[i]
            } else {
                -nu / (e[i] * e[j]).sqrt()
            };
        }
    }
    let shear = |i: usize, j: usize| (e[i] * e[j]).sqrt() / (2.0 * (1.0 + nu));
    s[(3, 3)] = 1.0 / shear(1, 2);
    s[(4, 4)] = 1.0 / shear(0, 2);
    s[(5, 5)] = 1.0 / shear(0, 1);
    s.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Mechanics("orthotropic compliance is not positive definite".into()))
}

/// Isotropic stiffness from Young's modulus and Poisson's ratio.
pub fn isotropic(e: f64, nu: f64) -> Stiffness {
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut c = Stiffness::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] = lambda + 2.0 * mu;
        c[(i + 3, i + 3)] = mu;
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineeringConstants {
    pub e11: f64,
    pub e22: f64,
    pub e33: f64,
}

pub fn is_symmetric(c: &Stiffness) -> bool {
    let scale = c.amax().max(f64::MIN_POSITIVE);
    (0..6).all(|i| (0..i).all(|j| (c[(i, j)] - c[(j, i)]).abs() <= 1e-12 * scale))
}

/// Directional Young's moduli from the compliance `S = Q⁻¹`: `E_ii = 1 / S_ii`.
pub fn engineering_constants(q: &Stiffness) -> Result<EngineeringConstants> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Mechanics("stiffness has non-finite entries".into()));
    }
    if !is_symmetric(q) {
        return Err(Error::Mechanics("stiffness is not symmetric".into()));
    }
    if q.cholesky().is_none() {
        return Err(Error::Mechanics(
            "stiffness is not positive definite".into(),
        ));
    }
    let s = q
        .try_inverse()
        .ok_or_else(|| Error::Mechanics("stiffness is singular".into()))?;
    Ok(EngineeringConstants {
        e11: 1.0 / s[(0, 0)],
        e22: 1.0 / s[(1, 1)],
        e33: 1.0 / s[(2, 2)],
    })
}
