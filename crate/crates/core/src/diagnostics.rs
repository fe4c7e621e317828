//! Run diagnostics: global moments, field norms and energies, PDF
//! reconstruction, error norms against exact solutions, and exponential-rate
//! fits for the damping benchmarks.

use crate::closure::{BandReconstructor, ClosureSet, N_MOMENTS};
use crate::error::{Error, Result};
use crate::mesh::{gauss_rule, BandGrid, BasisQuadrature, SpatialMesh};
use crate::state::{BandMomentField, FieldState};

/// One diagnostics record of a time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub time: f64,
    /// `sqrt( integral of E^2 dx )`.
    pub e_l2: f64,
    /// `(1/2) integral of E^2 dx`.
    pub field_energy: f64,
    /// Global moment totals `M_0 .. M_4`.
    pub moments: [f64; N_MOMENTS],
    /// `(1/2) M_2` total plus field energy.
    pub total_energy: f64,
}

/// Global moment totals: sums of mode-0 coefficients over bands and elements
/// scaled by dx.
pub fn global_moment_totals(field: &BandMomentField, mesh: &SpatialMesh) -> [f64; N_MOMENTS] {
    field.global_totals(mesh.dx)
}

/// L2 norm of the field, exact from the orthonormal modal coefficients.
pub fn e_field_l2(e_field: &FieldState, mesh: &SpatialMesh) -> f64 {
    let mut acc = 0.0;
    for i in 0..e_field.n_elements {
        let c = e_field.elem(i);
        acc += mesh.dx * c.iter().map(|v| v * v).sum::<f64>();
    }
    acc.sqrt()
}

pub fn series_point(
    field: &BandMomentField,
    e_field: &FieldState,
    mesh: &SpatialMesh,
    time: f64,
) -> SeriesPoint {
    let e_l2 = e_field_l2(e_field, mesh);
    let field_energy = 0.5 * e_l2 * e_l2;
    let moments = global_moment_totals(field, mesh);
    SeriesPoint {
        time,
        e_l2,
        field_energy,
        moments,
        total_energy: 0.5 * moments[2] + field_energy,
    }
}

/// Least-squares exponential rate through the local maxima of a series inside
/// a time window.
///
/// The field norm oscillates through near-zeros, so the fit runs on the peak
/// envelope: local maxima of the series are collected and a straight line is
/// fit to `(t_peak, ln value)`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let (t0, t1) = window;
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 1..series.len().saturating_sub(1) {
        let (t, v) = series[i];
        if t < t0 || t > t1 {
            continue;
        }
        if v > series[i - 1].1 && v >= series[i + 1].1 && v > 0.0 {
            peaks.push((t, v.ln()));
        }
    }
    if peaks.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 peaks in window [{t0}, {t1}], found {}",
            peaks.len()
        )));
    }
    let n = peaks.len() as f64;
    let st: f64 = peaks.iter().map(|p| p.0).sum();
    let sv: f64 = peaks.iter().map(|p| p.1).sum();
    let stt: f64 = peaks.iter().map(|p| p.0 * p.0).sum();
    let stv: f64 = peaks.iter().map(|p| p.0 * p.1).sum();
    let denom = n * stt - st * st;
    if denom.abs() < 1e-300 {
        return Err(Error::Fit("degenerate peak times".into()));
    }
    Ok((n * stv - st * sv) / denom)
}

/// Reconstructed distribution function on a sample grid.
///
/// Each band is sampled from its own five moments; the reconstruction is
/// discontinuous across band interfaces by construction.
#[derive(Debug, Clone)]
pub struct PdfSnapshot {
    pub time: f64,
    pub xs: Vec<f64>,
    pub vs: Vec<f64>,
    /// Row-major over x then v: `values[ix * vs.len() + iv]`.
    pub values: Vec<f64>,
}

pub fn reconstruct_pdf(
    field: &BandMomentField,
    grid: &BandGrid,
    mesh: &SpatialMesh,
    basis: &BasisQuadrature,
    x_per_element: usize,
    v_per_band: usize,
    time: f64,
) -> PdfSnapshot {
    assert!(x_per_element >= 1 && v_per_band >= 1);
    let mut xs = Vec::with_capacity(mesh.n_elements * x_per_element);
    let mut xi_samples = Vec::with_capacity(x_per_element);
    for s in 0..x_per_element {
        // uniform interior sampling
        xi_samples.push(-1.0 + (2.0 * s as f64 + 1.0) / x_per_element as f64);
    }
    for i in 0..mesh.n_elements {
        for &xi in &xi_samples {
            xs.push(mesh.x_of(i, xi));
        }
    }
    let mut vs = Vec::with_capacity(grid.n_bands * v_per_band);
    for j in 0..grid.n_bands {
        let (lo, hi) = grid.band_edges(j);
        for s in 0..v_per_band {
            vs.push(lo + (hi - lo) * (2.0 * s as f64 + 1.0) / (2.0 * v_per_band as f64));
        }
    }
    let recon: Vec<BandReconstructor> =
        (0..grid.n_bands).map(|j| BandReconstructor::new(grid.centers[j], grid.dv)).collect();
    let mut values = vec![0.0; xs.len() * vs.len()];
    for i in 0..mesh.n_elements {
        for (sx, &xi) in xi_samples.iter().enumerate() {
            let ix = i * x_per_element + sx;
            for j in 0..grid.n_bands {
                let m = field.moments_at(basis, j, i, xi);
                let c = recon[j].coeffs(&m);
                for sv in 0..v_per_band {
                    let iv = j * v_per_band + sv;
                    values[ix * vs.len() + iv] = recon[j].eval(&c, vs[iv]);
                }
            }
        }
    }
    PdfSnapshot { time, xs, vs, values }
}

/// Largest jump of the reconstruction across interior band interfaces,
/// sampled at element quadrature points.
pub fn band_edge_continuity_defect(
    field: &BandMomentField,
    closures: &ClosureSet,
    basis: &BasisQuadrature,
) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..field.n_elements {
        for &xi in &basis.nodes {
            for j in 0..field.n_bands - 1 {
                let m_lo = field.moments_at(basis, j, i, xi);
                let m_hi = field.moments_at(basis, j + 1, i, xi);
                let upper = closures.functionals[j].eval_plus(&m_lo);
                let lower = closures.functionals[j + 1].eval_minus(&m_hi);
                worst = worst.max((upper - lower).abs());
            }
        }
    }
    worst
}

/// Relative L2 error of the band-moment vector against exact band moments.
///
/// `exact(t, x, band)` returns the exact moments; they are evaluated at an
/// over-integrated set of spatial quadrature points per element.
pub fn relative_l2_error(
    field: &BandMomentField,
    mesh: &SpatialMesh,
    basis: &BasisQuadrature,
    time: f64,
    exact: impl Fn(f64, f64, usize) -> [f64; N_MOMENTS],
) -> f64 {
    let (nodes, weights) = gauss_rule(basis.n_basis + 2);
    let mut err2 = 0.0;
    let mut norm2 = 0.0;
    for i in 0..mesh.n_elements {
        for (q, &xi) in nodes.iter().enumerate() {
            let x = mesh.x_of(i, xi);
            let w = 0.5 * weights[q] * mesh.dx;
            for j in 0..field.n_bands {
                let m = field.moments_at(basis, j, i, xi);
                let ex = exact(time, x, j);
                for l in 0..N_MOMENTS {
                    err2 += w * (m[l] - ex[l]) * (m[l] - ex[l]);
                    norm2 += w * ex[l] * ex[l];
                }
            }
        }
    }
    (err2 / norm2).sqrt()
}
