//! Scenario registry: the benchmark problems, their default configurations,
//! initial conditions, and (where available) exact solutions.

use std::f64::consts::PI;

use crate::closure::{moments_of_function, N_MOMENTS};
use crate::error::{Error, Result};
use crate::mesh::{BandGrid, BoundaryKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Manufactured,
    WeakLandau,
    StrongLandau,
    Sheath,
    TwoStream,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Manufactured,
        Scenario::WeakLandau,
        Scenario::StrongLandau,
        Scenario::Sheath,
        Scenario::TwoStream,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Manufactured => "manufactured",
            Scenario::WeakLandau => "weak_landau",
            Scenario::StrongLandau => "strong_landau",
            Scenario::Sheath => "sheath",
            Scenario::TwoStream => "two_stream",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Scenario::ALL
            .iter()
            .copied()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown scenario '{s}'; available: {}", names.join(", ")))
            })
    }

    pub fn description(&self) -> &'static str {
        match self {
            Scenario::Manufactured => "forced problem with exact solution, for convergence studies",
            Scenario::WeakLandau => "weak Landau damping, alpha = 0.01, k = 0.5",
            Scenario::StrongLandau => "strong Landau damping, alpha = 0.5, k = 0.5",
            Scenario::Sheath => "plasma sheath with absorbing walls, zero-inflow boundaries",
            Scenario::TwoStream => "two-stream instability (experimental; no published baseline)",
        }
    }

    pub fn experimental(&self) -> bool {
        matches!(self, Scenario::TwoStream)
    }

    pub fn has_exact_solution(&self) -> bool {
        matches!(self, Scenario::Manufactured)
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub n_elements: usize,
    pub n_bands: usize,
    /// Spatial/temporal polynomial degree (1..=3; 0 allowed for smoke tests).
    pub order: usize,
    pub cfl: f64,
    pub t_final: f64,
    /// Perturbation amplitude of the Landau / two-stream initial condition.
    pub alpha: f64,
    /// Perturbation wavenumber k.
    pub wavenumber: f64,
    /// Sheath initial density amplitude.
    pub rho0_init: f64,
    /// Sheath initial temperature.
    pub theta0: f64,
    pub boundary: BoundaryKind,
    pub forcing: bool,
    /// Cap on kappa = 5 |E| dt / dv in the coupling step.
    pub kappa_guard: f64,
    /// Re-evaluate the step-size limits every step instead of once at t = 0.
    pub adaptive_dt: bool,
    /// Record a series point every this many steps.
    pub series_every: usize,
    pub snapshot_times: Vec<f64>,
    pub workers: usize,
}

impl ScenarioConfig {
    /// Registry defaults for a scenario.
    pub fn defaults(scenario: Scenario) -> Self {
        let base = ScenarioConfig {
            scenario,
            x_min: -2.0 * PI,
            x_max: 2.0 * PI,
            v_min: -2.0 * PI,
            v_max: 2.0 * PI,
            n_elements: 40,
            n_bands: 80,
            order: 2,
            cfl: 0.09,
            t_final: 45.0,
            alpha: 0.01,
            wavenumber: 0.5,
            rho0_init: 1.0,
            theta0: 0.0025,
            boundary: BoundaryKind::Periodic,
            forcing: false,
            kappa_guard: 1.0,
            adaptive_dt: false,
            series_every: 1,
            snapshot_times: vec![],
            workers: 1,
        };
        match scenario {
            Scenario::Manufactured => ScenarioConfig {
                x_min: -PI,
                x_max: PI,
                v_min: -4.0,
                v_max: 4.0,
                n_elements: 40,
                n_bands: 200,
                order: 3,
                t_final: 0.1,
                forcing: true,
                ..base
            },
            Scenario::WeakLandau => {
                ScenarioConfig { snapshot_times: vec![45.0], ..base }
            }
            Scenario::StrongLandau => ScenarioConfig {
                alpha: 0.5,
                t_final: 60.0,
                snapshot_times: vec![60.0],
                ..base
            },
            Scenario::Sheath => ScenarioConfig {
                x_min: 0.0,
                x_max: 1.0,
                v_min: -0.2,
                v_max: 0.2,
                n_elements: 80,
                n_bands: 80,
                t_final: 140.0,
                boundary: BoundaryKind::Open,
                adaptive_dt: true,
                series_every: 10,
                snapshot_times: vec![140.0],
                ..base
            },
            Scenario::TwoStream => ScenarioConfig {
                alpha: 0.05,
                t_final: 45.0,
                snapshot_times: vec![45.0],
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return fail(format!("cfl must be in (0, 1), got {}", self.cfl));
        }
        if self.n_elements < 1 || self.n_bands < 1 {
            return fail("n_elements and n_bands must be at least 1".into());
        }
        if !(self.t_final > 0.0) {
            return fail(format!("t_final must be positive, got {}", self.t_final));
        }
        if self.order > 3 {
            return fail(format!("order must be at most 3, got {}", self.order));
        }
        if !(self.x_max > self.x_min) || !(self.v_max > self.v_min) {
            return fail("domain bounds are inverted".into());
        }
        if !(self.theta0 > 0.0) {
            return fail(format!("theta0 must be positive, got {}", self.theta0));
        }
        if !(self.kappa_guard > 0.0) {
            return fail(format!("kappa_guard must be positive, got {}", self.kappa_guard));
        }
        if self.series_every == 0 {
            return fail("series_every must be at least 1".into());
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        for &ts in &self.snapshot_times {
            if !(0.0..=self.t_final).contains(&ts) {
                return fail(format!("snapshot time {ts} outside [0, t_final]"));
            }
        }
        if self.forcing && self.scenario != Scenario::Manufactured {
            return fail("forcing is only defined for the manufactured scenario".into());
        }
        Ok(())
    }

    /// Basis size for this configuration (polynomial degree + 1).
    pub fn n_basis(&self) -> usize {
        self.order + 1
    }

    /// Initial distribution function.
    pub fn initial_condition(&self) -> Box<dyn Fn(f64, f64) -> f64 + Sync + Send> {
        let alpha = self.alpha;
        let k = self.wavenumber;
        match self.scenario {
            Scenario::Manufactured => Box::new(move |x, v| {
                (2.0 - (2.0 * x).cos()) * (-(4.0 * v - 1.0) * (4.0 * v - 1.0) / 4.0).exp()
            }),
            Scenario::WeakLandau | Scenario::StrongLandau => Box::new(move |x, v| {
                (1.0 + alpha * (k * x).cos()) * (-0.5 * v * v).exp() / (2.0 * PI).sqrt()
            }),
            Scenario::Sheath => {
                let rho0 = self.rho0_init;
                let th = self.theta0;
                Box::new(move |_x, v| rho0 / (2.0 * PI * th).sqrt() * (-0.5 * v * v / th).exp())
            }
            Scenario::TwoStream => Box::new(move |x, v| {
                (1.0 + alpha * (k * x).cos()) * v * v * (-0.5 * v * v).exp()
                    / (2.0 * PI).sqrt()
            }),
        }
    }
}

/// Exact solution of the manufactured problem, with band moments of the
/// velocity profile precomputed per band.
#[derive(Debug, Clone)]
pub struct ManufacturedExact {
    /// `g[j][l]` = integral over band j of `v^l exp(-(4v-1)^2/4) dv`.
    g: Vec<[f64; N_MOMENTS]>,
}

impl ManufacturedExact {
    pub fn new(grid: &BandGrid) -> Self {
        let g = (0..grid.n_bands)
            .map(|j| {
                let (lo, hi) = grid.band_edges(j);
                moments_of_function(
                    |v| (-(4.0 * v - 1.0) * (4.0 * v - 1.0) / 4.0).exp(),
                    lo,
                    hi,
                )
            })
            .collect();
        Self { g }
    }

    pub fn f(&self, t: f64, x: f64, v: f64) -> f64 {
        (2.0 - (2.0 * x - 2.0 * PI * t).cos())
            * (-(4.0 * v - 1.0) * (4.0 * v - 1.0) / 4.0).exp()
    }

    pub fn e(&self, t: f64, x: f64) -> f64 {
        PI.sqrt() / 4.0 * (2.0 * x - 2.0 * PI * t).sin()
    }

    /// Exact band moments at (t, x).
    pub fn moments(&self, t: f64, x: f64, band: usize) -> [f64; N_MOMENTS] {
        let s = 2.0 - (2.0 * x - 2.0 * PI * t).cos();
        let mut out = self.g[band];
        for o in &mut out {
            *o *= s;
        }
        out
    }
}
