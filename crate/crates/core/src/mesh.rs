//! Velocity-band grid, spatial DG mesh, and the Legendre modal basis with
//! Gauss-Legendre quadrature shared by every other module.

use crate::error::{Error, Result};

/// Largest supported modal basis size (piecewise cubics).
pub const MAX_BASIS: usize = 4;

/// Gauss-Legendre rule on [-1, 1] with `n` points.
///
/// Nodes are the roots of the Legendre polynomial `P_n`, found by Newton
/// iteration from Chebyshev initial guesses; weights are `2 / ((1 - x^2) P_n'(x)^2)`.
/// Exact for polynomials of degree <= 2n - 1.
pub fn gauss_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th root (descending order)
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Legendre polynomial values `P_0(x) .. P_{n-1}(x)`.
fn legendre_values(n: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if n > 1 {
        out[1] = x;
    }
    for k in 2..n {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// Modal Legendre basis orthonormalized against `(1/2) * integral over [-1,1]`,
/// tabulated at its own Gauss-Legendre points.
///
/// With this normalization `phi_k = sqrt(2k+1) P_k`, so modal coefficient 0 is
/// the cell average. `n_basis` counts basis functions; the polynomial degree is
/// `n_basis - 1`.
#[derive(Debug, Clone)]
pub struct BasisQuadrature {
    pub n_basis: usize,
    /// Gauss-Legendre nodes on [-1, 1], one per basis function.
    pub nodes: Vec<f64>,
    /// Quadrature weights; sums to 2.
    pub weights: Vec<f64>,
    /// `psi[k][m]` = phi_k at node m.
    pub psi: Vec<Vec<f64>>,
    /// `dpsi[k][m]` = phi_k' at node m.
    pub dpsi: Vec<Vec<f64>>,
    /// phi_k(-1) and phi_k(+1).
    pub psi_left: Vec<f64>,
    pub psi_right: Vec<f64>,
    /// Modal differentiation: `d/dxi phi_k = sum_l diff[k][l] phi_l`.
    pub diff: Vec<Vec<f64>>,
}

impl BasisQuadrature {
    pub fn new(n_basis: usize) -> Result<Self> {
        if !(1..=MAX_BASIS).contains(&n_basis) {
            return Err(Error::Config(format!(
                "unsupported basis size {n_basis}; supported range is 1..={MAX_BASIS}"
            )));
        }
        let (nodes, weights) = gauss_rule(n_basis);
        let mut psi = vec![vec![0.0; n_basis]; n_basis];
        let mut p = vec![0.0; n_basis];
        for (m, &x) in nodes.iter().enumerate() {
            legendre_values(n_basis, x, &mut p);
            for k in 0..n_basis {
                psi[k][m] = scale(k) * p[k];
            }
        }
        let psi_left: Vec<f64> = (0..n_basis)
            .map(|k| scale(k) * if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let psi_right: Vec<f64> = (0..n_basis).map(scale).collect();
        // P_k' = sum over l < k with k+l odd of (2l+1) P_l
        let mut diff = vec![vec![0.0; n_basis]; n_basis];
        for k in 0..n_basis {
            for l in 0..k {
                if (k + l) % 2 == 1 {
                    diff[k][l] = scale(k) * scale(l);
                }
            }
        }
        let mut dpsi = vec![vec![0.0; n_basis]; n_basis];
        for k in 0..n_basis {
            for m in 0..n_basis {
                dpsi[k][m] = (0..k).map(|l| diff[k][l] * psi[l][m]).sum();
            }
        }
        Ok(Self { n_basis, nodes, weights, psi, dpsi, psi_left, psi_right, diff })
    }

    /// phi_0 .. phi_{n_basis-1} at an arbitrary point of [-1, 1].
    pub fn eval_basis(&self, xi: f64) -> [f64; MAX_BASIS] {
        let mut p = [0.0; MAX_BASIS];
        legendre_values(self.n_basis, xi, &mut p[..self.n_basis]);
        let mut out = [0.0; MAX_BASIS];
        for k in 0..self.n_basis {
            out[k] = scale(k) * p[k];
        }
        out
    }

    /// Value of the modal expansion `coeffs` at local coordinate xi.
    pub fn eval(&self, coeffs: &[f64], xi: f64) -> f64 {
        let basis = self.eval_basis(xi);
        coeffs.iter().zip(basis.iter()).map(|(c, b)| c * b).sum()
    }

    /// Coefficients of the xi-derivative of a modal expansion.
    pub fn differentiate(&self, coeffs: &[f64], out: &mut [f64]) {
        for l in 0..self.n_basis {
            let mut acc = 0.0;
            for k in (l + 1)..self.n_basis {
                acc += self.diff[k][l] * coeffs[k];
            }
            out[l] = acc;
        }
    }
}

fn scale(k: usize) -> f64 {
    ((2 * k + 1) as f64).sqrt()
}

/// Uniform partition of the truncated velocity axis into bands.
///
/// Interfaces are stored explicitly and shared by neighboring bands so that
/// interface-velocity powers telescope bit-exactly across the grid.
#[derive(Debug, Clone)]
pub struct BandGrid {
    pub v_min: f64,
    pub v_max: f64,
    pub n_bands: usize,
    pub dv: f64,
    /// Band centers, `centers[j] = v_min + (j + 1/2) dv` (0-based).
    pub centers: Vec<f64>,
    /// Band edges, `interfaces[0] = v_min`, `interfaces[n_bands] = v_max`.
    pub interfaces: Vec<f64>,
}

impl BandGrid {
    pub fn new(v_min: f64, v_max: f64, n_bands: usize) -> Result<Self> {
        if !(v_max > v_min) {
            return Err(Error::Config(format!(
                "velocity bounds must satisfy v_max > v_min, got [{v_min}, {v_max}]"
            )));
        }
        if n_bands < 1 {
            return Err(Error::Config("n_bands must be at least 1".into()));
        }
        let n = n_bands as f64;
        let dv = (v_max - v_min) / n;
        let mut interfaces: Vec<f64> = (0..=n_bands)
            .map(|j| {
                let t = j as f64 / n;
                v_min * (1.0 - t) + v_max * t
            })
            .collect();
        interfaces[0] = v_min;
        interfaces[n_bands] = v_max;
        // midpoints of the stored interfaces: agrees with v_min + (j + 1/2) dv to
        // round-off and keeps symmetric grids exactly reflection-symmetric
        let centers: Vec<f64> =
            (0..n_bands).map(|j| 0.5 * (interfaces[j] + interfaces[j + 1])).collect();
        Ok(Self { v_min, v_max, n_bands, dv, centers, interfaces })
    }

    /// Lower and upper edge of band j.
    pub fn band_edges(&self, j: usize) -> (f64, f64) {
        (self.interfaces[j], self.interfaces[j + 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Periodic,
    Open,
}

impl std::fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryKind::Periodic => write!(f, "periodic"),
            BoundaryKind::Open => write!(f, "open"),
        }
    }
}

/// Uniform 1D element partition of the spatial domain.
#[derive(Debug, Clone)]
pub struct SpatialMesh {
    pub x_min: f64,
    pub x_max: f64,
    pub n_elements: usize,
    pub dx: f64,
    pub boundary: BoundaryKind,
    pub centers: Vec<f64>,
}

impl SpatialMesh {
    pub fn new(x_min: f64, x_max: f64, n_elements: usize, boundary: BoundaryKind) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::Config(format!(
                "spatial bounds must satisfy x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if n_elements < 1 {
            return Err(Error::Config("n_elements must be at least 1".into()));
        }
        let dx = (x_max - x_min) / n_elements as f64;
        let centers: Vec<f64> =
            (0..n_elements).map(|i| x_min + (i as f64 + 0.5) * dx).collect();
        Ok(Self { x_min, x_max, n_elements, dx, boundary, centers })
    }

    /// Physical coordinate of local point xi in element i.
    pub fn x_of(&self, i: usize, xi: f64) -> f64 {
        self.centers[i] + 0.5 * self.dx * xi
    }

    pub fn left_neighbor(&self, i: usize) -> Option<usize> {
        if i > 0 {
            Some(i - 1)
        } else if self.boundary == BoundaryKind::Periodic {
            Some(self.n_elements - 1)
        } else {
            None
        }
    }

    pub fn right_neighbor(&self, i: usize) -> Option<usize> {
        if i + 1 < self.n_elements {
            Some(i + 1)
        } else if self.boundary == BoundaryKind::Periodic {
            Some(0)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_rules_match_closed_forms() {
        let (n1, w1) = gauss_rule(1);
        assert_eq!(n1, vec![0.0]);
        assert_eq!(w1, vec![2.0]);

        let (n2, w2) = gauss_rule(2);
        let r = 1.0 / 3.0_f64.sqrt();
        assert!((n2[0] + r).abs() < 1e-15 && (n2[1] - r).abs() < 1e-15);
        assert!((w2[0] - 1.0).abs() < 1e-15 && (w2[1] - 1.0).abs() < 1e-15);

        let (n3, w3) = gauss_rule(3);
        let r = (3.0 / 5.0_f64).sqrt();
        assert!((n3[0] + r).abs() < 1e-15);
        assert_eq!(n3[1], 0.0);
        assert!((n3[2] - r).abs() < 1e-15);
        assert!((w3[0] - 5.0 / 9.0).abs() < 1e-15);
        assert!((w3[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn quadrature_is_exact_for_low_degree_monomials() {
        for n in 1..=10usize {
            let (nodes, weights) = gauss_rule(n);
            assert!((weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..=(2 * n - 1) {
                let num: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!(
                    (num - exact).abs() < 1e-13,
                    "n={n} deg={deg}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn basis_is_orthonormal_under_own_quadrature() {
        for nb in 1..=MAX_BASIS {
            let b = BasisQuadrature::new(nb).unwrap();
            for k in 0..nb {
                for l in 0..nb {
                    let ip: f64 = (0..nb)
                        .map(|m| 0.5 * b.weights[m] * b.psi[k][m] * b.psi[l][m])
                        .sum();
                    let expect = if k == l { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-14, "nb={nb} k={k} l={l}: {ip}");
                }
            }
        }
    }

    #[test]
    fn basis_size_out_of_range_is_rejected() {
        assert!(BasisQuadrature::new(0).is_err());
        assert!(BasisQuadrature::new(5).is_err());
    }

    #[test]
    fn modal_differentiation_matches_finite_differences() {
        let b = BasisQuadrature::new(4).unwrap();
        let coeffs = [0.3, -1.2, 0.8, 0.5];
        let mut dc = [0.0; 4];
        b.differentiate(&coeffs, &mut dc);
        let h = 1e-6;
        for &xi in &[-0.7, 0.0, 0.4, 0.93] {
            let fd = (b.eval(&coeffs, xi + h) - b.eval(&coeffs, xi - h)) / (2.0 * h);
            assert!((b.eval(&dc, xi) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn band_grid_matches_published_settings() {
        let g = BandGrid::new(-4.0, 4.0, 200).unwrap();
        assert!((g.dv - 0.04).abs() < 1e-15);
        assert!((g.centers[0] + 3.98).abs() < 1e-14);

        let g = BandGrid::new(-1.0, 1.0, 1).unwrap();
        assert_eq!(g.centers, vec![0.0]);

        let g = BandGrid::new(-2.0 * PI, 2.0 * PI, 80).unwrap();
        assert!((g.dv - PI / 20.0).abs() < 1e-15);
        assert_eq!(g.interfaces[80], 2.0 * PI);
        assert_eq!(g.interfaces[0], -2.0 * PI);
    }

    #[test]
    fn band_grid_rejects_bad_input() {
        assert!(BandGrid::new(1.0, -1.0, 10).is_err());
        assert!(BandGrid::new(-1.0, 1.0, 0).is_err());
    }

    #[test]
    fn spatial_mesh_examples() {
        let m = SpatialMesh::new(-PI, PI, 40, BoundaryKind::Periodic).unwrap();
        assert!((m.dx - PI / 20.0).abs() < 1e-15);
        assert_eq!(m.left_neighbor(0), Some(39));
        assert_eq!(m.right_neighbor(39), Some(0));

        let m = SpatialMesh::new(0.0, 1.0, 80, BoundaryKind::Open).unwrap();
        assert!((m.dx - 0.0125).abs() < 1e-15);
        assert_eq!(m.left_neighbor(0), None);
        assert_eq!(m.right_neighbor(79), None);

        let m = SpatialMesh::new(0.0, 1.0, 1, BoundaryKind::Periodic).unwrap();
        assert_eq!(m.left_neighbor(0), Some(0));
        assert_eq!(m.right_neighbor(0), Some(0));
    }

    proptest! {
        #[test]
        fn band_widths_sum_to_domain(
            v0 in -50.0..50.0f64,
            span in 1e-3..100.0f64,
            n in 1usize..400,
        ) {
            let g = BandGrid::new(v0, v0 + span, n).unwrap();
            let total: f64 = (0..n).map(|j| g.interfaces[j + 1] - g.interfaces[j]).sum();
            prop_assert!((total - span).abs() <= 1e-12 * span.max(1.0));
            let scale = v0.abs() + span;
            for j in 0..n {
                prop_assert!((g.interfaces[j + 1] - g.interfaces[j] - g.dv).abs() <= 8.0 * f64::EPSILON * scale);
                prop_assert!((g.centers[j] - (v0 + (j as f64 + 0.5) * g.dv)).abs() <= 8.0 * f64::EPSILON * scale);
            }
        }
    }
}
