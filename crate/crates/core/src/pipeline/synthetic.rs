//! Closed-form stand-in for homogenized composite stiffness.
//!
//! This is test scaffolding, not micromechanics. It produces smooth, symmetric positive-definite
//! stiffness matrices that respond to every input in the schema:
//!
//! - Voigt and Reuss bounds `E_L = φE_F + (1-φ)E_M`, `E_T = 1 / (φ/E_F + (1-φ)/E_M)`.
//! - Aspect-ratio blend `E_L' = E_T + (E_L - E_T)·λ/(λ + 10)` and `ν = φν_F + (1-φ)ν_M`.
//! - Axis moduli `E_i = a_ii·E_L' + (1 - a_ii)·E_T` from the orientation diagonal.
//! - An orthotropic stiffness from `(E_1, E_2, E_3, ν)` rotated by the three angles.
//!
//! The fiber diameter only enters through the bounds check; it has no effect on the outputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::stiffness::{from_components, orthotropic, rotate, rotation, to_components};
use super::{col, orientation_a33, Bounds, Dataset, Provenance, Sample, INPUT_BOUNDS, N_INPUTS};
use crate::{derive_seed, Error, Result};

/// Stiffness components for the given inputs.
pub fn synthesize_sample(inputs: [f64; N_INPUTS]) -> Result<Sample> {
    let x = &inputs;
    let (em, ef, phi, lambda) = (x[col::E_M], x[col::E_F], x[col::PHI], x[col::LAMBDA_F]);
    let e_long = phi * ef + (1.0 - phi) * em;
    let e_trans = 1.0 / (phi / ef + (1.0 - phi) / em);
    let e_blend = e_trans + (e_long - e_trans) * lambda / (lambda + 10.0);
    let nu = phi * x[col::NU_F] + (1.0 - phi) * x[col::NU_M];
    let (a11, a22) = (x[col::A11], x[col::A22]);
    let diag = [a11, a22, orientation_a33(a11, a22)];
    let moduli = diag.map(|a| a * e_blend + (1.0 - a) * e_trans);
    let local = orthotropic(moduli, nu)?;
    let rotated = rotate(&local, &rotation(x[col::G1], x[col::G2], x[col::G3]));
    // re-symmetrize away rounding before storing the upper triangle
    let sym = (rotated + rotated.transpose()) * 0.5;
    let outputs = to_components(&sym);
    if outputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Mechanics("synthetic stiffness is not finite".into()));
    }
    debug_assert_eq!(from_components(&outputs), sym);
    Ok(Sample { inputs, outputs })
}

fn draw_inputs(rng: &mut ChaCha8Rng, bounds: &Bounds) -> [f64; N_INPUTS] {
    let mut x = [0.0; N_INPUTS];
    for &(c, lo, hi) in &INPUT_BOUNDS {
        x[c] = rng.random_range(lo..=hi);
    }
    // a11 < 1/3 leaves no admissible a22; draw from the feasible part of the range
    let a11: f64 = rng.random_range(1.0 / 3.0..=1.0);
    let lower = (1.0 - 2.0 * a11).max(0.0);
    let upper = a11.min(1.0 - a11);
    x[col::A11] = a11;
    x[col::A22] = if upper > lower {
        rng.random_range(lower..=upper)
    } else {
        lower
    };
    for c in [col::G1, col::G2, col::G3] {
        x[c] = rng.random_range(0.0..bounds.max_angle);
    }
    x
}

/// `n` samples drawn uniformly within the input bounds. Sample `i` uses its own seeded stream,
/// so the result does not depend on how the work is scheduled.
pub fn generate_synthetic(n: usize, seed: u64, bounds: &Bounds) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(bounds.max_angle.is_finite() && bounds.max_angle > 0.0) {
        return Err(Error::Domain(format!(
            "angle bound {} must be positive",
            bounds.max_angle
        )));
    }
    let one = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        synthesize_sample(draw_inputs(&mut rng, bounds))
    };
    #[cfg(feature = "parallel")]
    let samples = (0..n)
        .into_par_iter()
        .map(one)
        .collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let samples = (0..n).map(one).collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, Provenance::Synthetic { count: n, seed })
}
