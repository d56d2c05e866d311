//! Normal modes of the coupled cavity and mechanics.
//!
//! The upper mode `A` and lower mode `B` are defined by a symplectic matrix
//! `T` with `v = T w`, `v = (a, b, a†, b†)`, `w = (A, B, A†, B†)`. Columns of
//! `T` are eigenvectors of `J h` for eigenvalues `(w_A, w_B, -w_A, -w_B) / 2`.

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{
    block_swap, conjugation_symmetric_spectrum, eigenvector, re, symplectic_form, Complex, Mat4,
    Vec4,
};
use crate::lyapunov::{boundary_detuning, CorrelationMatrix};
use crate::model::{build_hamiltonian, FeedbackConfig, SystemParams};
use crate::{Error, Result};

/// Splittings below this are treated as a degenerate spectrum.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolaritonBasis {
    pub transform: Mat4,
    pub inverse: Mat4,
    pub omega_a: f64,
    pub omega_b: f64,
    pub detuning: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolaritonState {
    pub n_upper: f64,
    pub n_lower: f64,
    pub correlations: Mat4,
}

/// Closed-form upper and lower normal-mode frequencies.
pub fn polariton_frequencies(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> Result<(f64, f64)> {
    let boundary = boundary_detuning(params, feedback);
    if !(delta_p < boundary) {
        return Err(Error::UnstableRegion { delta_p });
    }
    let w = params.omega_m;
    let g = params.g_coupling;
    let k = feedback.parametric_strength(params);
    let a = delta_p * delta_p - k * k;
    let inner = (a - w * w) * (a - w * w) - 16.0 * g * g * delta_p * w;
    if inner < 0.0 {
        return Err(Error::UnstableRegion { delta_p });
    }
    let r = inner.sqrt();
    let upper = 0.5 * (a + w * w + r);
    let lower = 0.5 * (a + w * w - r);
    if !(lower > 0.0) {
        return Err(Error::UnstableRegion { delta_p });
    }
    Ok((upper.sqrt(), lower.sqrt()))
}

/// Frequencies from the eigenvalues of `J h`, largest first. Independent of
/// the closed form; used for cross-checks.
pub fn numeric_frequencies(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> [Complex; 4] {
    let flow = generator(params, feedback, delta_p) * Complex::new(0.0, -2.0);
    // eig(J h) = (i / 2) eig(-2i J h); the flow is real in quadratures.
    let mut ev = conjugation_symmetric_spectrum(&flow).map(|l| l * Complex::new(0.0, 0.5));
    ev.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    ev.map(|l| l * re(2.0))
}

fn generator(params: &SystemParams, feedback: &FeedbackConfig, delta_p: f64) -> Mat4 {
    symplectic_form() * build_hamiltonian(params, feedback, delta_p).entries
}

fn symplectic_norm(v: &Vec4) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr() - v[2].norm_sqr() - v[3].norm_sqr()
}

fn normalized_mode(m0: &Mat4, half_freq: f64, delta_p: f64) -> Result<Vec4> {
    let v = eigenvector(m0, re(half_freq)).ok_or(Error::UnstableRegion { delta_p })?;
    let s = symplectic_norm(&v);
    if !(s > 0.0) {
        return Err(Error::UnstableRegion { delta_p });
    }
    let mut v = v / re(s.sqrt());
    let pivot = v.iter().copied().fold(Complex::new(0.0, 0.0), |best, z| {
        if z.norm() > best.norm() {
            z
        } else {
            best
        }
    });
    v *= pivot.conj() / re(pivot.norm());
    Ok(v)
}

pub fn polariton_basis(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> Result<PolaritonBasis> {
    let (omega_a, omega_b) = polariton_frequencies(params, feedback, delta_p)?;
    let splitting = omega_a - omega_b;
    if splitting < DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateSpectrum { splitting });
    }
    let m0 = generator(params, feedback, delta_p);
    let ta = normalized_mode(&m0, 0.5 * omega_a, delta_p)?;
    let tb = normalized_mode(&m0, 0.5 * omega_b, delta_p)?;
    let swap = block_swap();
    let ta_dag = swap * ta.conjugate();
    let tb_dag = swap * tb.conjugate();
    let transform = Mat4::from_columns(&[ta, tb, ta_dag, tb_dag]);
    let j = symplectic_form();
    let inverse = -(j * transform.transpose() * j);
    Ok(PolaritonBasis {
        transform,
        inverse,
        omega_a,
        omega_b,
        detuning: delta_p,
    })
}

impl PolaritonBasis {
    /// Largest entry of `T J T^T - J`.
    pub fn symplectic_defect(&self) -> f64 {
        let j = symplectic_form();
        crate::linalg::max_abs(&(self.transform * j * self.transform.transpose() - j))
    }

    /// Largest entry of `G T G - conj(T)`.
    pub fn reality_defect(&self) -> f64 {
        let g = block_swap();
        crate::linalg::max_abs(&(g * self.transform * g - self.transform.conjugate()))
    }
}

pub fn to_polariton(state: &CorrelationMatrix, basis: &PolaritonBasis) -> PolaritonState {
    let cp = basis.inverse * state.entries * basis.inverse.transpose();
    PolaritonState {
        n_upper: cp[(2, 0)].re,
        n_lower: cp[(3, 1)].re,
        correlations: cp,
    }
}

pub fn from_polariton(correlations: &Mat4, basis: &PolaritonBasis) -> CorrelationMatrix {
    CorrelationMatrix::new(basis.transform * correlations * basis.transform.transpose())
}
