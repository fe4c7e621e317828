//! Source terms for forced runs.
//!
//! The manufactured verification problem forces the kinetic equation with an
//! analytic profile and the Ampere update with the residual the exact field
//! leaves in it. Both factor into fixed spatial profiles times harmonic time
//! factors, so arbitrary time derivatives (needed by the space-time predictor)
//! are available in closed form.

use std::f64::consts::PI;

use crate::closure::{moments_of_function, N_MOMENTS};
use crate::mesh::{gauss_rule, BandGrid, BasisQuadrature, SpatialMesh, MAX_BASIS};

/// Per-band, per-moment forcing profiles for one run.
#[derive(Debug, Clone, Default)]
pub enum Forcing {
    #[default]
    None,
    Manufactured(Box<ManufacturedForcing>),
}

impl Forcing {
    pub fn is_none(&self) -> bool {
        matches!(self, Forcing::None)
    }

    /// Modal coefficients of the r-th time derivative of the band-moment
    /// forcing on element `elem` at time `t`. `out` is `[moment][mode]` flattened.
    pub fn band_modal(
        &self,
        t: f64,
        deriv: usize,
        band: usize,
        elem: usize,
        n_basis: usize,
        out: &mut [f64],
    ) {
        match self {
            Forcing::None => out[..N_MOMENTS * n_basis].fill(0.0),
            Forcing::Manufactured(m) => m.band_modal(t, deriv, band, elem, n_basis, out),
        }
    }

    /// Modal coefficients of the r-th time derivative of the Ampere-law
    /// forcing on element `elem` at time `t`.
    pub fn e_modal(&self, t: f64, deriv: usize, elem: usize, n_basis: usize, out: &mut [f64]) {
        match self {
            Forcing::None => out[..n_basis].fill(0.0),
            Forcing::Manufactured(m) => m.e_modal(t, deriv, elem, n_basis, out),
        }
    }
}

/// Forcing of the manufactured convergence problem.
///
/// The kinetic forcing is
/// `psi(t,x,v) = sin(th) a(v) G(v) - (1/2) sin(2 th) b(v) G(v)` with
/// `th = 2x - 2 pi t`, `G = exp(-(4v-1)^2/4)`,
/// `a = (2 sqrt(pi)+1)(4v - 2 sqrt(pi))/2` and `b = sqrt(pi) (4v-1)/2`;
/// its band moments inherit that shape with the velocity factors integrated
/// once per band. The exact field satisfies the Ampere law only up to
/// `psi_E = (sqrt(pi)/8)(1 - 4 pi) cos(th)`, which is applied as the field
/// forcing.
#[derive(Debug, Clone)]
pub struct ManufacturedForcing {
    n_elements: usize,
    n_bands: usize,
    /// `[elem][profile][mode]` with profiles (sin 2x, cos 2x, sin 4x, cos 4x).
    xmodal: Vec<f64>,
    /// `[band][term][moment]` with terms (a-weights, scaled b-weights).
    vweights: Vec<f64>,
    e_coef: f64,
}

const N_PROFILES: usize = 4;

impl ManufacturedForcing {
    pub fn new(mesh: &SpatialMesh, grid: &BandGrid, basis: &BasisQuadrature) -> Self {
        let nb = basis.n_basis;
        // over-integrated projection of the spatial profiles
        let (nodes, weights) = gauss_rule(8);
        let mut xmodal = vec![0.0; mesh.n_elements * N_PROFILES * nb];
        for e in 0..mesh.n_elements {
            for (q, &xi) in nodes.iter().enumerate() {
                let x = mesh.x_of(e, xi);
                let vals = [(2.0 * x).sin(), (2.0 * x).cos(), (4.0 * x).sin(), (4.0 * x).cos()];
                let phi = basis.eval_basis(xi);
                for (p, val) in vals.iter().enumerate() {
                    for k in 0..nb {
                        xmodal[(e * N_PROFILES + p) * nb + k] +=
                            0.5 * weights[q] * phi[k] * val;
                    }
                }
            }
        }
        let sp = PI.sqrt();
        let a = move |v: f64| 0.5 * (2.0 * sp + 1.0) * (4.0 * v - 2.0 * sp);
        let b = move |v: f64| 0.5 * sp * (4.0 * v - 1.0);
        let gauss = |v: f64| (-(4.0 * v - 1.0) * (4.0 * v - 1.0) / 4.0).exp();
        let mut vweights = vec![0.0; grid.n_bands * 2 * N_MOMENTS];
        for j in 0..grid.n_bands {
            let (lo, hi) = grid.band_edges(j);
            let ma = moments_of_function(|v| a(v) * gauss(v), lo, hi);
            let mb = moments_of_function(|v| b(v) * gauss(v), lo, hi);
            for l in 0..N_MOMENTS {
                vweights[(j * 2) * N_MOMENTS + l] = ma[l];
                // the sin(2 th) term enters with factor -1/2
                vweights[(j * 2 + 1) * N_MOMENTS + l] = -0.5 * mb[l];
            }
        }
        let e_coef = sp / 8.0 * (1.0 - 4.0 * PI);
        Self { n_elements: mesh.n_elements, n_bands: grid.n_bands, xmodal, vweights, e_coef }
    }

    #[inline]
    fn profile(&self, elem: usize, p: usize, n_basis: usize) -> &[f64] {
        let base = (elem * N_PROFILES + p) * n_basis;
        &self.xmodal[base..base + n_basis]
    }

    fn band_modal(
        &self,
        t: f64,
        deriv: usize,
        band: usize,
        elem: usize,
        n_basis: usize,
        out: &mut [f64],
    ) {
        debug_assert!(band < self.n_bands && elem < self.n_elements);
        let (dc1, ds1) = harmonic_derivs(2.0 * PI, t, deriv);
        let (dc2, ds2) = harmonic_derivs(4.0 * PI, t, deriv);
        let sin2 = self.profile(elem, 0, n_basis);
        let cos2 = self.profile(elem, 1, n_basis);
        let sin4 = self.profile(elem, 2, n_basis);
        let cos4 = self.profile(elem, 3, n_basis);
        let wa = &self.vweights[(band * 2) * N_MOMENTS..(band * 2 + 1) * N_MOMENTS];
        let wb = &self.vweights[(band * 2 + 1) * N_MOMENTS..(band * 2 + 2) * N_MOMENTS];
        for l in 0..N_MOMENTS {
            for k in 0..n_basis {
                // d^r/dt^r [sin(2x - w t)] = sin(2x) dcos - cos(2x) dsin
                let t1 = sin2[k] * dc1 - cos2[k] * ds1;
                let t2 = sin4[k] * dc2 - cos4[k] * ds2;
                out[l * n_basis + k] = wa[l] * t1 + wb[l] * t2;
            }
        }
    }

    fn e_modal(&self, t: f64, deriv: usize, elem: usize, n_basis: usize, out: &mut [f64]) {
        let (dc1, ds1) = harmonic_derivs(2.0 * PI, t, deriv);
        let sin2 = self.profile(elem, 0, n_basis);
        let cos2 = self.profile(elem, 1, n_basis);
        for k in 0..n_basis {
            // d^r/dt^r [cos(2x - w t)] = cos(2x) dcos + sin(2x) dsin
            out[k] = self.e_coef * (cos2[k] * dc1 + sin2[k] * ds1);
        }
    }
}

/// `(d^r/dt^r cos(w t), d^r/dt^r sin(w t))`.
fn harmonic_derivs(omega: f64, t: f64, r: usize) -> (f64, f64) {
    let amp = omega.powi(r as i32);
    let phase = omega * t + r as f64 * 0.5 * PI;
    (amp * phase.cos(), amp * phase.sin())
}

/// Pointwise value of the manufactured kinetic forcing, used by tests.
pub fn manufactured_psi(t: f64, x: f64, v: f64) -> f64 {
    let sp = PI.sqrt();
    let th = 2.0 * x - 2.0 * PI * t;
    let g = (-(4.0 * v - 1.0) * (4.0 * v - 1.0) / 4.0).exp();
    0.5 * th.sin()
        * g
        * ((2.0 * sp + 1.0) * (4.0 * v - 2.0 * sp) - sp * (4.0 * v - 1.0) * th.cos())
}
