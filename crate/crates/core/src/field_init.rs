//! Initial electric field from Gauss's law and the static background
//! densities.
//!
//! The field update during a run is Ampere's law; Gauss's law is only
//! evaluated once at t = 0. In 1D the solve is an elementwise exact
//! antiderivative of the modal charge imbalance, so no linear system is
//! involved.

use crate::closure::N_MOMENTS;
use crate::error::{Error, Result};
use crate::mesh::{BasisQuadrature, BoundaryKind, SpatialMesh, MAX_BASIS};
use crate::state::{BandMomentField, FieldState};

/// Domain averages of the initial density and momentum: the stationary ion
/// backgrounds `rho_0` and `J_0`.
pub fn background_constants(field: &BandMomentField, mesh: &SpatialMesh) -> (f64, f64) {
    let totals = field.global_totals(mesh.dx);
    let len = mesh.x_max - mesh.x_min;
    (totals[0] / len, totals[1] / len)
}

/// Solve `E_x = rho_0 - rho(0, x)` for the initial field.
///
/// The antiderivative of the degree-p modal integrand is formed exactly per
/// element (degree p+1) and truncated back to degree p. Periodic runs remove
/// the mean (zero-mean gauge) after checking charge compatibility; open runs
/// anchor `E(x_min) = 0`.
pub fn solve_gauss(
    field: &BandMomentField,
    mesh: &SpatialMesh,
    basis: &BasisQuadrature,
    rho_0: f64,
    j_0: f64,
) -> Result<FieldState> {
    let nb = basis.n_basis;
    let n_el = mesh.n_elements;
    let mut e = FieldState::zeros(n_el, nb);
    e.rho_0 = rho_0;
    e.j_0 = j_0;

    // modal charge imbalance rho_0 - rho per element
    let mut imbalance = vec![0.0; n_el * (nb + 1)]; // one spare slot for the raised degree
    let mut rho = vec![0.0; MAX_BASIS];
    for i in 0..n_el {
        field.global_moment_coeffs(i, 0, &mut rho);
        let r = &mut imbalance[i * (nb + 1)..(i + 1) * (nb + 1)];
        for k in 0..nb {
            r[k] = -rho[k];
        }
        r[0] += rho_0;
    }

    // periodic compatibility: total imbalance must vanish
    let total: f64 = (0..n_el).map(|i| imbalance[i * (nb + 1)] * mesh.dx).sum();
    if mesh.boundary == BoundaryKind::Periodic {
        let scale = rho_0.abs().max(1.0) * (mesh.x_max - mesh.x_min);
        if total.abs() > 1e-10 * scale {
            return Err(Error::Config(format!(
                "Gauss compatibility violated on periodic domain: net charge residual {total:.3e}"
            )));
        }
    }

    // Antiderivative from -1 in the orthonormal basis:
    //   int phi_0 = phi_0 + phi_1 / sqrt(3)
    //   int phi_k = s_k / (2k+1) * (phi_{k+1} / s_{k+1} - phi_{k-1} / s_{k-1})
    // with s_k = sqrt(2k+1); the definite part vanishes for k >= 1.
    let s = |k: usize| ((2 * k + 1) as f64).sqrt();
    let mut carry = 0.0; // E at the left edge of the current element
    for i in 0..n_el {
        let r = imbalance[i * (nb + 1)..(i + 1) * (nb + 1)].to_vec();
        let mut anti = vec![0.0; nb + 1];
        anti[0] += r[0];
        anti[1] += r[0] / 3.0f64.sqrt();
        for k in 1..nb {
            let c = r[k] * s(k) / (2 * k + 1) as f64;
            anti[k + 1] += c / s(k + 1);
            anti[k - 1] -= c / s(k - 1);
        }
        // scale d(xi) -> dx and truncate the raised mode
        let ec = e.elem_mut(i);
        for k in 0..nb {
            ec[k] = 0.5 * mesh.dx * anti[k];
        }
        // anchor so that E(left edge) = carry before truncation:
        // value of the exact antiderivative at xi = -1 is zero by construction
        ec[0] += carry;
        // total integral over the element advances the carry
        carry += mesh.dx * r[0];
    }

    match mesh.boundary {
        BoundaryKind::Periodic => {
            // zero-mean gauge
            let mean: f64 =
                (0..n_el).map(|i| e.elem(i)[0]).sum::<f64>() / n_el as f64;
            for i in 0..n_el {
                e.elem_mut(i)[0] -= mean;
            }
        }
        BoundaryKind::Open => {
            // anchor the truncated field exactly at the left wall
            let shift = e.eval(basis, 0, -1.0);
            for i in 0..n_el {
                e.elem_mut(i)[0] -= shift;
            }
        }
    }
    Ok(e)
}

/// L2 norm of the discrete Gauss residual `E_x - (rho_0 - rho)`, used as a
/// drift diagnostic for Ampere-evolved runs.
pub fn gauss_residual_l2(
    field: &BandMomentField,
    e_field: &FieldState,
    mesh: &SpatialMesh,
    basis: &BasisQuadrature,
) -> f64 {
    let nb = basis.n_basis;
    let mut rho = vec![0.0; MAX_BASIS];
    let mut acc = 0.0;
    let mut de = vec![0.0; MAX_BASIS];
    for i in 0..mesh.n_elements {
        field.global_moment_coeffs(i, 0, &mut rho);
        basis.differentiate(e_field.elem(i), &mut de[..nb]);
        let mut elem_acc = 0.0;
        for k in 0..nb {
            let mut r = de[k] * 2.0 / mesh.dx + rho[k];
            if k == 0 {
                r -= e_field.rho_0;
            }
            elem_acc += r * r;
        }
        acc += elem_acc * mesh.dx;
    }
    acc.sqrt()
}
