//! Per-band moment-closure artifacts: the 5x5 companion flux Jacobian, its
//! real eigendecomposition, interface evaluation functionals, and the source
//! vectors of the band fluid system.
//!
//! The closure expresses the unclosed fifth moment of a band as a linear
//! combination of the five retained moments, obtained by matching a degree-4
//! polynomial to those moments and integrating `v^5` against it. The
//! eigenvalues of the resulting companion matrix sit at the five-point
//! Gauss-Legendre nodes scaled into the band: substituting
//! `lambda = v_j + (dv/2) xi` into the characteristic polynomial yields
//! `(dv/2)^5 (xi^5 - 10/9 xi^3 + 5/21 xi)`, the monic Legendre quintic, for
//! every `(v_j, dv)`. The eigensolve is therefore performed once on the
//! canonical band and transported by that exact similarity.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mesh::{gauss_rule, BandGrid};

/// Number of retained moments per band.
pub const N_MOMENTS: usize = 5;

/// Row 5 of the companion matrix `A(v_j, dv)`.
///
/// `dv = 0` is permitted and yields the pure-transport limit
/// `[v^5, -5v^4, 10v^3, -10v^2, 5v]` used by limit-check tests.
pub fn closure_row(v_j: f64, dv: f64) -> [f64; N_MOMENTS] {
    let v = v_j;
    let v2 = v * v;
    let d2 = dv * dv;
    let d4 = d2 * d2;
    [
        5.0 * d4 * v / 336.0 - 5.0 * d2 * v2 * v / 18.0 + v2 * v2 * v,
        -5.0 * d4 / 336.0 + 5.0 * d2 * v2 / 6.0 - 5.0 * v2 * v2,
        -5.0 * d2 * v / 6.0 + 10.0 * v2 * v,
        (5.0 / 18.0) * (d2 - 36.0 * v2),
        5.0 * v,
    ]
}

/// Full companion matrix: identity shift on rows 1..4, closure row below.
pub fn companion_matrix(row: &[f64; N_MOMENTS]) -> [[f64; N_MOMENTS]; N_MOMENTS] {
    let mut a = [[0.0; N_MOMENTS]; N_MOMENTS];
    for i in 0..N_MOMENTS - 1 {
        a[i][i + 1] = 1.0;
    }
    a[N_MOMENTS - 1] = *row;
    a
}

/// Apply the companion matrix without materializing it.
pub fn apply_companion(row: &[f64; N_MOMENTS], q: &[f64; N_MOMENTS]) -> [f64; N_MOMENTS] {
    [
        q[1],
        q[2],
        q[3],
        q[4],
        row[0] * q[0] + row[1] * q[1] + row[2] * q[2] + row[3] * q[3] + row[4] * q[4],
    ]
}

/// In-band force source `[0, M0, 2 M1, 3 M2, 4 M3]`.
pub fn force_source(moments: &[f64; N_MOMENTS]) -> [f64; N_MOMENTS] {
    [0.0, moments[0], 2.0 * moments[1], 3.0 * moments[2], 4.0 * moments[3]]
}

/// Interface-velocity power vector `[1, v, v^2, v^3, v^4]`.
pub fn edge_powers(v: f64) -> [f64; N_MOMENTS] {
    let v2 = v * v;
    [1.0, v, v2, v2 * v, v2 * v2]
}

/// The three source vectors of the band fluid system.
#[derive(Debug, Clone)]
pub struct SourceVectors {
    pub s: [f64; N_MOMENTS],
    pub s_plus: [f64; N_MOMENTS],
    pub s_minus: [f64; N_MOMENTS],
}

pub fn source_vectors(moments: &[f64; N_MOMENTS], v_j: f64, dv: f64) -> SourceVectors {
    SourceVectors {
        s: force_source(moments),
        s_plus: edge_powers(v_j + 0.5 * dv),
        s_minus: edge_powers(v_j - 0.5 * dv),
    }
}

/// Canonical band quantities, computed once on `(v_j, dv) = (0, 2)` where the
/// scaled velocity coordinate is the band coordinate itself.
struct Canonical {
    /// Eigenvalues of the canonical companion matrix, ascending. These are the
    /// five-point Gauss-Legendre nodes up to eigensolver round-off.
    xi: [f64; N_MOMENTS],
    max_imag: f64,
    /// Edge-evaluation functionals against pure band-coordinate moments
    /// `integral of w^i p(w) dw`.
    n_hat_plus: [f64; N_MOMENTS],
    n_hat_minus: [f64; N_MOMENTS],
    /// Inverse of `T[i][k] = integral of w^i P_k dw`: maps band-coordinate
    /// moments to Legendre reconstruction coefficients.
    t_inv: [[f64; N_MOMENTS]; N_MOMENTS],
}

fn canonical() -> &'static Canonical {
    static CANONICAL: OnceLock<Canonical> = OnceLock::new();
    CANONICAL.get_or_init(|| {
        let a = nalgebra::Matrix5::from_fn(|r, c| companion_matrix(&closure_row(0.0, 2.0))[r][c]);
        let ev = a.complex_eigenvalues();
        let mut xi = [0.0; N_MOMENTS];
        let mut max_imag = 0.0f64;
        for (k, z) in ev.iter().enumerate() {
            xi[k] = z.re;
            max_imag = max_imag.max(z.im.abs());
        }
        xi.sort_by(|a, b| a.partial_cmp(b).unwrap());

        // T[i][k] = integral over [-1,1] of w^i P_k(w) dw; exact rational
        // entries (zero whenever i + k is odd).
        #[rustfmt::skip]
        let t = nalgebra::Matrix5::from_row_slice(&[
            2.0,       0.0,       0.0,        0.0,       0.0,
            0.0,       2.0 / 3.0, 0.0,        0.0,       0.0,
            2.0 / 3.0, 0.0,       4.0 / 15.0, 0.0,       0.0,
            0.0,       2.0 / 5.0, 0.0,        4.0 / 35.0, 0.0,
            2.0 / 5.0, 0.0,       8.0 / 35.0, 0.0,       16.0 / 315.0,
        ]);
        let lu = t.transpose().lu();
        let edge_plus = nalgebra::Vector5::from_row_slice(&[1.0, 1.0, 1.0, 1.0, 1.0]);
        let np = lu.solve(&edge_plus).expect("canonical moment system is nonsingular");
        let n_hat_plus: [f64; N_MOMENTS] = np.as_slice().try_into().unwrap();
        // the lower-edge functional is the exact parity mirror
        let mut n_hat_minus = n_hat_plus;
        for (i, v) in n_hat_minus.iter_mut().enumerate() {
            if i % 2 == 1 {
                *v = -*v;
            }
        }
        let ti = t.try_inverse().expect("canonical moment system is nonsingular");
        let mut t_inv = [[0.0; N_MOMENTS]; N_MOMENTS];
        for r in 0..N_MOMENTS {
            for c in 0..N_MOMENTS {
                t_inv[r][c] = ti[(r, c)];
            }
        }
        Canonical { xi, max_imag, n_hat_plus, n_hat_minus, t_inv }
    })
}

/// Companion flux Jacobian of one band with its real eigendecomposition.
#[derive(Debug, Clone)]
pub struct ClosureOperator {
    pub v_j: f64,
    pub dv: f64,
    pub row: [f64; N_MOMENTS],
    /// Ascending real eigenvalues.
    pub eigenvalues: [f64; N_MOMENTS],
    /// Columns are right eigenvectors `[1, l, l^2, l^3, l^4]`.
    pub right: [[f64; N_MOMENTS]; N_MOMENTS],
    /// Rows are left eigenvectors; `left * right = I`.
    pub left: [[f64; N_MOMENTS]; N_MOMENTS],
    pub spectral_radius: f64,
    /// Largest imaginary residual reported by the eigensolve, scaled to this band.
    pub max_imag: f64,
}

impl ClosureOperator {
    pub fn new(v_j: f64, dv: f64) -> Result<Self> {
        if !(dv > 0.0) || !dv.is_finite() || !v_j.is_finite() {
            return Err(Error::Config(format!(
                "closure operator needs finite v_j and dv > 0, got v_j = {v_j}, dv = {dv}"
            )));
        }
        let row = closure_row(v_j, dv);
        let can = canonical();
        let h = 0.5 * dv;
        let mut eigenvalues = [0.0; N_MOMENTS];
        for (l, xi) in eigenvalues.iter_mut().zip(can.xi.iter()) {
            *l = v_j + h * xi;
        }
        let max_imag = can.max_imag * h;
        if max_imag > 1e-10 {
            return Err(Error::Numerics(format!(
                "closure spectrum not real to tolerance: |Im| = {max_imag:.3e}"
            )));
        }
        let mut right = [[0.0; N_MOMENTS]; N_MOMENTS];
        for (c, &l) in eigenvalues.iter().enumerate() {
            let pw = edge_powers(l);
            for r in 0..N_MOMENTS {
                right[r][c] = pw[r];
            }
        }
        let rm = nalgebra::Matrix5::from_fn(|r, c| right[r][c]);
        let lm = rm.try_inverse().ok_or_else(|| {
            Error::Numerics(format!(
                "eigenvector matrix is singular for band v_j = {v_j}, dv = {dv}"
            ))
        })?;
        let mut left = [[0.0; N_MOMENTS]; N_MOMENTS];
        for r in 0..N_MOMENTS {
            for c in 0..N_MOMENTS {
                left[r][c] = lm[(r, c)];
            }
        }
        let spectral_radius = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        Ok(Self { v_j, dv, row, eigenvalues, right, left, spectral_radius, max_imag })
    }

    /// Flux of the band system, `A * q`.
    pub fn flux(&self, q: &[f64; N_MOMENTS]) -> [f64; N_MOMENTS] {
        apply_companion(&self.row, q)
    }
}

/// Edge-evaluation functionals of the in-band degree-4 reconstruction:
/// `f(v_{j +- 1/2}) = N_{+-} . M`.
#[derive(Debug, Clone)]
pub struct InterfaceFunctional {
    pub v_j: f64,
    pub dv: f64,
    pub n_plus: [f64; N_MOMENTS],
    pub n_minus: [f64; N_MOMENTS],
}

impl InterfaceFunctional {
    pub fn new(v_j: f64, dv: f64) -> Result<Self> {
        if !(dv > 0.0) || !dv.is_finite() || !v_j.is_finite() {
            return Err(Error::Config(format!(
                "interface functional needs finite v_j and dv > 0, got v_j = {v_j}, dv = {dv}"
            )));
        }
        let can = canonical();
        let h = 0.5 * dv;
        // Raw moments relate to band-coordinate moments by the binomial
        // expansion of ((v - v_j)/h)^i; fold that expansion into the canonical
        // edge functionals entry by entry. Each entry is dominated by its
        // highest-order term, so this form avoids the cancellation a direct
        // raw-moment solve would suffer on narrow off-center bands.
        let mut n_plus = [0.0; N_MOMENTS];
        let mut n_minus = [0.0; N_MOMENTS];
        let mut binom = [[0.0f64; N_MOMENTS]; N_MOMENTS];
        for i in 0..N_MOMENTS {
            binom[i][0] = 1.0;
            for l in 1..=i {
                binom[i][l] = binom[i - 1][l - 1] + if l <= i - 1 { binom[i - 1][l] } else { 0.0 };
            }
        }
        for l in 0..N_MOMENTS {
            let mut sp = 0.0;
            let mut sm = 0.0;
            for i in l..N_MOMENTS {
                let c = binom[i][l] * (-v_j).powi((i - l) as i32) / h.powi(i as i32);
                sp += can.n_hat_plus[i] * c;
                sm += can.n_hat_minus[i] * c;
            }
            n_plus[l] = sp / h;
            n_minus[l] = sm / h;
        }
        Ok(Self { v_j, dv, n_plus, n_minus })
    }

    pub fn eval_plus(&self, m: &[f64; N_MOMENTS]) -> f64 {
        dot5(&self.n_plus, m)
    }

    pub fn eval_minus(&self, m: &[f64; N_MOMENTS]) -> f64 {
        dot5(&self.n_minus, m)
    }
}

#[inline]
pub fn dot5(a: &[f64; N_MOMENTS], b: &[f64; N_MOMENTS]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4]
}

/// In-band degree-4 reconstruction: the unique quartic matching the five raw
/// moments, evaluated pointwise. This is the same reconstruction that defines
/// the closure row and the interface functionals.
#[derive(Debug, Clone)]
pub struct BandReconstructor {
    pub v_j: f64,
    pub dv: f64,
}

impl BandReconstructor {
    pub fn new(v_j: f64, dv: f64) -> Self {
        Self { v_j, dv }
    }

    /// Legendre coefficients in the band coordinate `w = (v - v_j)/(dv/2)`.
    pub fn coeffs(&self, moments: &[f64; N_MOMENTS]) -> [f64; N_MOMENTS] {
        let can = canonical();
        let h = 0.5 * self.dv;
        // band-coordinate moments of the distribution
        let mut binom = [[0.0f64; N_MOMENTS]; N_MOMENTS];
        for i in 0..N_MOMENTS {
            binom[i][0] = 1.0;
            for l in 1..=i {
                binom[i][l] = binom[i - 1][l - 1] + if l <= i - 1 { binom[i - 1][l] } else { 0.0 };
            }
        }
        let mut mt = [0.0; N_MOMENTS];
        for (i, m) in mt.iter_mut().enumerate() {
            let mut acc = 0.0;
            for l in 0..=i {
                acc += binom[i][l] * (-self.v_j).powi((i - l) as i32) * moments[l];
            }
            *m = acc / h.powi(i as i32 + 1);
        }
        let mut c = [0.0; N_MOMENTS];
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = dot5(&can.t_inv[k], &mt);
        }
        c
    }

    /// Evaluate the reconstruction at velocity v.
    pub fn eval(&self, coeffs: &[f64; N_MOMENTS], v: f64) -> f64 {
        let w = (v - self.v_j) / (0.5 * self.dv);
        let mut pk = [1.0, w, 0.0, 0.0, 0.0];
        for k in 2..N_MOMENTS {
            let kf = k as f64;
            pk[k] = ((2.0 * kf - 1.0) * w * pk[k - 1] - (kf - 1.0) * pk[k - 2]) / kf;
        }
        dot5(coeffs, &pk)
    }
}

/// Band moments `integral of v^l g(v) dv` over `[lo, hi]` for l = 0..4.
///
/// Uses a fixed 10-point Gauss rule: exact for the degree-4 reconstructions
/// and at round-off level for Maxwellians at the band counts used here.
pub fn moments_of_function(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> [f64; N_MOMENTS] {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (nodes, weights) = RULE.get_or_init(|| gauss_rule(10));
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut m = [0.0; N_MOMENTS];
    for (x, w) in nodes.iter().zip(weights) {
        let v = c + h * x;
        let gv = h * w * g(v);
        let mut vp = 1.0;
        for ml in &mut m {
            *ml += gv * vp;
            vp *= v;
        }
    }
    m
}

/// Per-band closure artifacts for a whole grid, built once at startup.
///
/// Interface power vectors are stored per interface and shared between the
/// adjacent bands, which makes `S_plus` of band j and `S_minus` of band j+1
/// the same array and the coupling flux telescope bit-exactly.
#[derive(Debug, Clone)]
pub struct ClosureSet {
    pub operators: Vec<ClosureOperator>,
    pub functionals: Vec<InterfaceFunctional>,
    /// `interface_powers[i]` = `[1, v, .., v^4]` at grid interface i (0..=n_bands).
    pub interface_powers: Vec<[f64; N_MOMENTS]>,
    pub max_spectral_radius: f64,
}

impl ClosureSet {
    pub fn new(grid: &BandGrid) -> Result<Self> {
        let mut operators = Vec::with_capacity(grid.n_bands);
        let mut functionals = Vec::with_capacity(grid.n_bands);
        for j in 0..grid.n_bands {
            operators.push(ClosureOperator::new(grid.centers[j], grid.dv)?);
            functionals.push(InterfaceFunctional::new(grid.centers[j], grid.dv)?);
        }
        let interface_powers: Vec<[f64; N_MOMENTS]> =
            grid.interfaces.iter().map(|&v| edge_powers(v)).collect();
        let max_spectral_radius =
            operators.iter().fold(0.0f64, |m, op| m.max(op.spectral_radius));
        Ok(Self { operators, functionals, interface_powers, max_spectral_radius })
    }

    /// `S_plus` of band j (upper interface powers).
    pub fn s_plus(&self, j: usize) -> &[f64; N_MOMENTS] {
        &self.interface_powers[j + 1]
    }

    /// `S_minus` of band j (lower interface powers).
    pub fn s_minus(&self, j: usize) -> &[f64; N_MOMENTS] {
        &self.interface_powers[j]
    }
}
