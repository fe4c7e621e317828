//! Solution state containers: modal band moments and the electric field.

use crate::closure::N_MOMENTS;
use crate::mesh::{BasisQuadrature, MAX_BASIS};

/// DG modal coefficients of the five local moments, per band, per element.
///
/// Storage is a flat array indexed `(band, element, moment, mode)`; the primary
/// unknown of the scheme.
#[derive(Debug, Clone)]
pub struct BandMomentField {
    pub n_bands: usize,
    pub n_elements: usize,
    pub n_basis: usize,
    data: Vec<f64>,
}

impl BandMomentField {
    pub fn zeros(n_bands: usize, n_elements: usize, n_basis: usize) -> Self {
        assert!(n_basis <= MAX_BASIS);
        let data = vec![0.0; n_bands * n_elements * N_MOMENTS * n_basis];
        Self { n_bands, n_elements, n_basis, data }
    }

    #[inline]
    fn offset(&self, band: usize, elem: usize, moment: usize) -> usize {
        (((band * self.n_elements) + elem) * N_MOMENTS + moment) * self.n_basis
    }

    /// Modal coefficients of moment `l` of band `j` in element `i`.
    #[inline]
    pub fn coeffs(&self, band: usize, elem: usize, moment: usize) -> &[f64] {
        let o = self.offset(band, elem, moment);
        &self.data[o..o + self.n_basis]
    }

    #[inline]
    pub fn coeffs_mut(&mut self, band: usize, elem: usize, moment: usize) -> &mut [f64] {
        let o = self.offset(band, elem, moment);
        &mut self.data[o..o + self.n_basis]
    }

    /// All moment coefficients of one (band, element) block, length `5 * n_basis`.
    #[inline]
    pub fn block(&self, band: usize, elem: usize) -> &[f64] {
        let o = self.offset(band, elem, 0);
        &self.data[o..o + N_MOMENTS * self.n_basis]
    }

    #[inline]
    pub fn block_mut(&mut self, band: usize, elem: usize) -> &mut [f64] {
        let o = self.offset(band, elem, 0);
        &mut self.data[o..o + N_MOMENTS * self.n_basis]
    }

    /// Pointwise moment vector at local coordinate xi of element `i`.
    pub fn moments_at(
        &self,
        basis: &BasisQuadrature,
        band: usize,
        elem: usize,
        xi: f64,
    ) -> [f64; N_MOMENTS] {
        let phi = basis.eval_basis(xi);
        let mut out = [0.0; N_MOMENTS];
        let block = self.block(band, elem);
        for (l, o) in out.iter_mut().enumerate() {
            let c = &block[l * self.n_basis..(l + 1) * self.n_basis];
            *o = c.iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Same as [`moments_at`](Self::moments_at) with pretabulated basis values.
    #[inline]
    pub fn moments_at_tabulated(
        &self,
        phi: &[f64],
        band: usize,
        elem: usize,
    ) -> [f64; N_MOMENTS] {
        let mut out = [0.0; N_MOMENTS];
        let block = self.block(band, elem);
        for (l, o) in out.iter_mut().enumerate() {
            let c = &block[l * self.n_basis..(l + 1) * self.n_basis];
            *o = c.iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Sum of mode-0 coefficients over bands and elements times dx: the global
    /// moment totals over the domain.
    pub fn global_totals(&self, dx: f64) -> [f64; N_MOMENTS] {
        let mut out = [0.0; N_MOMENTS];
        for j in 0..self.n_bands {
            for i in 0..self.n_elements {
                for (l, o) in out.iter_mut().enumerate() {
                    *o += self.coeffs(j, i, l)[0];
                }
            }
        }
        for o in &mut out {
            *o *= dx;
        }
        out
    }

    /// Modal coefficients of the global moment `l` field in element `i`
    /// (sum over bands).
    pub fn global_moment_coeffs(&self, elem: usize, moment: usize, out: &mut [f64]) {
        out[..self.n_basis].fill(0.0);
        for j in 0..self.n_bands {
            let c = self.coeffs(j, elem, moment);
            for (o, v) in out[..self.n_basis].iter_mut().zip(c) {
                *o += v;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Length of one (band, element) block.
    pub fn block_len(&self) -> usize {
        N_MOMENTS * self.n_basis
    }
}

/// DG modal coefficients of the electric field plus the static backgrounds.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub n_elements: usize,
    pub n_basis: usize,
    /// `coeffs[i * n_basis + k]`.
    pub coeffs: Vec<f64>,
    /// Background ion mass density (domain average of the initial electron density).
    pub rho_0: f64,
    /// Background ion momentum density (domain average of the initial electron momentum).
    pub j_0: f64,
}

impl FieldState {
    pub fn zeros(n_elements: usize, n_basis: usize) -> Self {
        Self { n_elements, n_basis, coeffs: vec![0.0; n_elements * n_basis], rho_0: 0.0, j_0: 0.0 }
    }

    #[inline]
    pub fn elem(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.n_basis..(i + 1) * self.n_basis]
    }

    #[inline]
    pub fn elem_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coeffs[i * self.n_basis..(i + 1) * self.n_basis]
    }

    pub fn eval(&self, basis: &BasisQuadrature, i: usize, xi: f64) -> f64 {
        basis.eval(self.elem(i), xi)
    }

    /// Largest |E| over all element quadrature nodes and edges.
    pub fn max_abs_sampled(&self, basis: &BasisQuadrature) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n_elements {
            let c = self.elem(i);
            for &xi in &basis.nodes {
                m = m.max(basis.eval(c, xi).abs());
            }
            m = m.max(basis.eval(c, -1.0).abs());
            m = m.max(basis.eval(c, 1.0).abs());
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite()) && self.rho_0.is_finite() && self.j_0.is_finite()
    }
}
