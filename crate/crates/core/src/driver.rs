//! Scenario setup and the main time loop: Strang composition of the
//! inter-band coupling half-steps around the full fluid step.

use crate::closure::{moments_of_function, ClosureSet, N_MOMENTS};
use crate::coupling::{coupling_step, CouplingWorkspace};
use crate::diagnostics::{reconstruct_pdf, series_point, PdfSnapshot, SeriesPoint};
use crate::error::{Error, Result};
use crate::field_init::{background_constants, solve_gauss};
use crate::fluid::{fluid_step, FluidWorkspace};
use crate::forcing::{Forcing, ManufacturedForcing};
use crate::mesh::{gauss_rule, BandGrid, BasisQuadrature, SpatialMesh};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::state::{BandMomentField, FieldState};

/// Default snapshot sampling density.
pub const SNAPSHOT_X_PER_ELEMENT: usize = 4;
pub const SNAPSHOT_V_PER_BAND: usize = 4;

/// A configured simulation with all grid-dependent artifacts built.
pub struct Simulation {
    pub config: ScenarioConfig,
    pub grid: BandGrid,
    pub mesh: SpatialMesh,
    pub basis: BasisQuadrature,
    pub closures: ClosureSet,
    pub forcing: Forcing,
    pool: Option<rayon::ThreadPool>,
}

/// Evolving state plus accumulated diagnostics.
pub struct RunState {
    pub time: f64,
    pub step: u64,
    pub field: BandMomentField,
    pub e_field: FieldState,
    pub series: Vec<SeriesPoint>,
    pub snapshots: Vec<PdfSnapshot>,
}

/// Scratch buffers for one Strang step.
pub struct StepWorkspace {
    coupling: CouplingWorkspace,
    fluid: FluidWorkspace,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let grid = BandGrid::new(config.v_min, config.v_max, config.n_bands)?;
        let mesh =
            SpatialMesh::new(config.x_min, config.x_max, config.n_elements, config.boundary)?;
        let basis = BasisQuadrature::new(config.n_basis())?;
        let closures = ClosureSet::new(&grid)?;
        let forcing = if config.forcing {
            Forcing::Manufactured(Box::new(ManufacturedForcing::new(&mesh, &grid, &basis)))
        } else {
            Forcing::None
        };
        let pool = if config.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.workers)
                    .build()
                    .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { config, grid, mesh, basis, closures, forcing, pool })
    }

    pub fn workspace(&self) -> StepWorkspace {
        StepWorkspace {
            coupling: CouplingWorkspace::new(
                self.grid.n_bands,
                self.mesh.n_elements,
                self.basis.n_basis,
            ),
            fluid: FluidWorkspace::new(
                self.grid.n_bands,
                self.mesh.n_elements,
                self.basis.n_basis,
            ),
        }
    }

    /// Project the scenario's initial condition and solve Gauss's law.
    ///
    /// Band moments come from exact band quadrature of the initial distribution
    /// evaluated at `n_basis + 2` spatial points per element, so initialization
    /// error stays below the discretization orders being measured.
    pub fn initialize(&self) -> Result<RunState> {
        let nb = self.basis.n_basis;
        let f0 = self.config.initial_condition();
        let (nodes, weights) = gauss_rule(nb + 2);
        let mut field =
            BandMomentField::zeros(self.grid.n_bands, self.mesh.n_elements, nb);
        for j in 0..self.grid.n_bands {
            let (lo, hi) = self.grid.band_edges(j);
            for i in 0..self.mesh.n_elements {
                let mut acc = [[0.0f64; crate::mesh::MAX_BASIS]; N_MOMENTS];
                for (q, &xi) in nodes.iter().enumerate() {
                    let x = self.mesh.x_of(i, xi);
                    let m = moments_of_function(|v| f0(x, v), lo, hi);
                    let phi = self.basis.eval_basis(xi);
                    for l in 0..N_MOMENTS {
                        for k in 0..nb {
                            acc[l][k] += 0.5 * weights[q] * phi[k] * m[l];
                        }
                    }
                }
                for l in 0..N_MOMENTS {
                    field.coeffs_mut(j, i, l)[..nb].copy_from_slice(&acc[l][..nb]);
                }
            }
        }
        let (rho_0, j_0) = background_constants(&field, &self.mesh);
        let e_field = solve_gauss(&field, &self.mesh, &self.basis, rho_0, j_0)?;
        let mut state = RunState {
            time: 0.0,
            step: 0,
            field,
            e_field,
            series: Vec::new(),
            snapshots: Vec::new(),
        };
        state.series.push(series_point(&state.field, &state.e_field, &self.mesh, 0.0));
        Ok(state)
    }

    /// Largest stable step under the CFL bound and the coupling kappa guard.
    fn dt_limit(&self, e_field: &FieldState) -> f64 {
        let v_bound = self.grid.v_min.abs().max(self.grid.v_max.abs());
        let mut dt = self.config.cfl * self.mesh.dx / v_bound;
        let e_max = e_field.max_abs_sampled(&self.basis);
        if e_max > 0.0 {
            dt = dt.min(self.config.kappa_guard * self.grid.dv / (5.0 * e_max));
        }
        dt
    }

    /// Step size for the next step: the stability limit clipped to the next
    /// output event and the final time.
    pub fn select_dt(&self, state: &RunState, base_limit: f64) -> Result<f64> {
        let mut dt = if self.config.adaptive_dt { self.dt_limit(&state.e_field) } else { base_limit };
        let remaining = self.config.t_final - state.time;
        dt = dt.min(remaining);
        for &ts in &self.config.snapshot_times {
            let gap = ts - state.time;
            if gap > 1e-12 {
                dt = dt.min(gap);
            }
        }
        if dt < 1e-12 {
            return Err(Error::Stagnation { time: state.time, dt });
        }
        Ok(dt)
    }

    /// One Strang-split step: coupling half step, fluid full step, coupling
    /// half step.
    pub fn strang_step(&self, state: &mut RunState, dt: f64, ws: &mut StepWorkspace) -> Result<()> {
        let pool = self.pool.as_ref();
        let blow = |e: Error, time: f64, step: u64| match e {
            Error::Numerics(what) => Error::Blowup { time, step, what },
            other => other,
        };
        let t = state.time;
        let step = state.step;
        state.field = coupling_step(
            &state.field,
            &state.e_field,
            &self.closures,
            &self.basis,
            self.grid.dv,
            0.5 * dt,
            &mut ws.coupling,
            pool,
        )
        .map_err(|e| blow(e, t, step))?;
        let (f, e_new) = fluid_step(
            &state.field,
            &state.e_field,
            &self.closures,
            &self.basis,
            &self.mesh,
            &self.grid,
            &self.forcing,
            t,
            dt,
            &mut ws.fluid,
            pool,
        )
        .map_err(|e| blow(e, t, step))?;
        state.field = f;
        state.e_field = e_new;
        state.field = coupling_step(
            &state.field,
            &state.e_field,
            &self.closures,
            &self.basis,
            self.grid.dv,
            0.5 * dt,
            &mut ws.coupling,
            pool,
        )
        .map_err(|e| blow(e, t, step))?;
        state.time += dt;
        state.step += 1;
        Ok(())
    }

    /// Execute the configured run, recording series points and snapshots.
    pub fn run(&self) -> Result<RunState> {
        let mut state = self.initialize()?;
        self.run_from(&mut state)?;
        Ok(state)
    }

    /// Continue a run from an existing state to the configured final time.
    pub fn run_from(&self, state: &mut RunState) -> Result<()> {
        let mut ws = self.workspace();
        let base_limit = self.dt_limit(&state.e_field);
        if state.time == 0.0 {
            self.maybe_snapshot(state, 0.0);
        }
        while state.time < self.config.t_final - 1e-12 {
            let dt = self.select_dt(state, base_limit)?;
            self.strang_step(state, dt, &mut ws)?;
            if state.step % self.config.series_every as u64 == 0
                || state.time >= self.config.t_final - 1e-12
            {
                state.series.push(series_point(
                    &state.field,
                    &state.e_field,
                    &self.mesh,
                    state.time,
                ));
            }
            self.maybe_snapshot(state, state.time);
        }
        Ok(())
    }

    fn maybe_snapshot(&self, state: &mut RunState, t: f64) {
        for &ts in &self.config.snapshot_times {
            if (t - ts).abs() <= 1e-10
                && !state.snapshots.iter().any(|s| (s.time - ts).abs() <= 1e-10)
            {
                state.snapshots.push(reconstruct_pdf(
                    &state.field,
                    &self.grid,
                    &self.mesh,
                    &self.basis,
                    SNAPSHOT_X_PER_ELEMENT,
                    SNAPSHOT_V_PER_BAND,
                    t,
                ));
            }
        }
    }
}
