//! Explicit RK4 time marching of `∂_t f = Q(f,f) + τΔ_v f` in spectral
//! space.
//!
//! The state is the coefficient vector `f̂`; each right-hand-side evaluation
//! is one collision-operator evaluation plus the diagonal heat-bath symbol
//! `−τ(π/L)²|k|²`. [`run`] drives a whole experiment: build the initial
//! state, precompute the collision tables once, march to `t_final`, and
//! record diagnostics on an output stride.

use num_complex::Complex64;

use crate::collision::{
    self, CollisionQuadrature, DirectWeights, FastWorkspace, GainTensor, LossTable,
    DEFAULT_MEMORY_BUDGET,
};
use crate::diagnostics::{self, TimeSeriesRecord};
use crate::error::{GranularError, Result};
use crate::fft::MultiFft;
use crate::grid::{apply_checkerboard, DistributionField, GridSpec};
use crate::physics::{build_initial, InitialCondition, KernelSpec, RestitutionModel};

/// Collision evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Dense `O(N^{2d})` weight table; reference quality, small grids only.
    Direct,
    /// Per-quadrature-pair FFT convolutions, `O(N_ρ M N^d log N)`.
    Fast,
}

/// Time-marching parameters. `n_rho`, `m_angular`, `memory_budget`, and
/// `snapshot_every` default to the conventional values when `None`.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Heat-bath strength τ ≥ 0.
    pub tau: f64,
    /// Time step (> 0).
    pub dt: f64,
    /// Horizon (≥ dt); the run takes `round(t_final/dt)` steps.
    pub t_final: f64,
    pub method: Method,
    /// Diagnostics are recorded every this many steps (≥ 1).
    pub output_every: u64,
    /// Radial quadrature size; default `N`.
    pub n_rho: Option<usize>,
    /// Angular quadrature size; default 16 (2-D) or 32 (3-D).
    pub m_angular: Option<usize>,
    /// Precomputation memory cap in bytes; default 8 GB.
    pub memory_budget: Option<u64>,
    /// Store the full field every this many steps (`None`: final state only).
    pub snapshot_every: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 0.0,
            dt: 0.01,
            t_final: 1.0,
            method: Method::Fast,
            output_every: 1,
            n_rho: None,
            m_angular: None,
            memory_budget: None,
            snapshot_every: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GranularError::InvalidParameter {
                name: "dt",
                value: self.dt,
                constraint: "time step must be positive",
            });
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(GranularError::InvalidParameter {
                name: "t_final",
                value: self.t_final,
                constraint: "horizon must be at least one time step",
            });
        }
        if self.output_every < 1 {
            return Err(GranularError::InvalidParameter {
                name: "output_every",
                value: self.output_every as f64,
                constraint: "output stride must be at least 1",
            });
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(GranularError::InvalidParameter {
                name: "tau",
                value: self.tau,
                constraint: "heat-bath strength must be nonnegative",
            });
        }
        Ok(())
    }
}

/// Precomputed collision tables for either evaluation strategy.
pub enum CollisionTables {
    Fast { gain: GainTensor, loss: LossTable },
    Direct(DirectWeights),
}

impl CollisionTables {
    /// Builds the tables demanded by `config` (one-time cost per run setup).
    pub fn precompute(
        grid: GridSpec,
        kernel: &KernelSpec,
        restitution: &RestitutionModel,
        config: &SolverConfig,
    ) -> Result<Self> {
        let quadrature = CollisionQuadrature::new(
            grid,
            config.n_rho.unwrap_or(grid.n()),
            config
                .m_angular
                .unwrap_or(collision::default_m_angular(grid.dim())),
        )?;
        let budget = config.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET);
        match config.method {
            Method::Fast => Ok(CollisionTables::Fast {
                gain: collision::precompute_gain(grid, kernel, restitution, &quadrature, budget)?,
                loss: collision::precompute_loss(grid, kernel, &quadrature),
            }),
            Method::Direct => Ok(CollisionTables::Direct(collision::precompute_direct(
                grid,
                kernel,
                restitution,
                &quadrature,
                budget,
            )?)),
        }
    }
}

/// Everything a finished run hands back.
pub struct RunOutput {
    /// Diagnostics at step 0, every `output_every` steps, and the last step.
    pub trajectory: Vec<TimeSeriesRecord>,
    pub final_field: DistributionField,
    /// `(time, field)` at the `snapshot_every` stride, if requested.
    pub snapshots: Vec<(f64, DistributionField)>,
    /// First time the relative ℓ² step difference fell below 1e-12
    /// (steady-state indicator; reporting only, the march never stops early).
    pub steady_state_time: Option<f64>,
    /// Largest `|Q̂_0|` seen across all collision evaluations: a direct
    /// check that collisions conserve mass.
    pub max_mass_mode: f64,
}

/// Closing statistics from [`run_streaming`]; the per-step data went to the
/// event sink as it was produced.
pub struct RunSummary {
    pub final_field: DistributionField,
    pub steady_state_time: Option<f64>,
    pub max_mass_mode: f64,
}

/// Observation emitted while [`run_streaming`] marches.
pub enum RunEvent<'a> {
    /// Diagnostics row (step 0, every `output_every` steps, final step).
    Record(&'a TimeSeriesRecord),
    /// Full field at the `snapshot_every` stride.
    Snapshot {
        time: f64,
        step: u64,
        field: &'a DistributionField,
    },
}

/// Heat-bath contribution `−τ(π/L)²|k|² f̂_k` (the Fourier symbol of
/// `τΔ_v` on the periodic box).
pub fn heat_bath_rhs(coeffs: &[Complex64], grid: GridSpec, tau: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); coeffs.len()];
    if tau == 0.0 {
        return out;
    }
    let base = tau * (std::f64::consts::PI / grid.half_width()).powi(2);
    grid.for_each_index(|lin, idx| {
        let mut k_sq = 0i64;
        for &i in idx {
            let k = grid.frequency(i);
            k_sq += k * k;
        }
        out[lin] = -base * k_sq as f64 * coeffs[lin];
    });
    out
}

/// One classical four-stage Runge-Kutta step on a coefficient vector.
///
/// Fails with [`GranularError::NonFiniteState`] (step index 0; callers in a
/// time loop re-tag it) if the update produces NaN or infinity.
pub fn rk4_step(
    coeffs: &[Complex64],
    rhs: &mut dyn FnMut(&[Complex64]) -> Result<Vec<Complex64>>,
    dt: f64,
) -> Result<Vec<Complex64>> {
    let n = coeffs.len();
    let k1 = rhs(coeffs)?;
    let mut stage = vec![Complex64::default(); n];
    for i in 0..n {
        stage[i] = coeffs[i] + 0.5 * dt * k1[i];
    }
    let k2 = rhs(&stage)?;
    for i in 0..n {
        stage[i] = coeffs[i] + 0.5 * dt * k2[i];
    }
    let k3 = rhs(&stage)?;
    for i in 0..n {
        stage[i] = coeffs[i] + dt * k3[i];
    }
    let k4 = rhs(&stage)?;
    let sixth = dt / 6.0;
    let mut out = stage;
    for i in 0..n {
        out[i] = coeffs[i] + sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        if !out[i].re.is_finite() || !out[i].im.is_finite() {
            return Err(GranularError::NonFiniteState { step: 0 });
        }
    }
    Ok(out)
}

/// Computes the kinetic energy of a coefficient vector (used for the `E^γ`
/// kernel factor, which must track the RK stage states).
struct StageEnergy {
    fft: MultiFft,
    buffer: Vec<Complex64>,
    speed_sq: Vec<f64>,
    cell_volume: f64,
    grid: GridSpec,
}

impl StageEnergy {
    fn new(grid: GridSpec) -> Self {
        let nodes = grid.axis_nodes();
        let mut speed_sq = vec![0.0; grid.total()];
        grid.for_each_index(|lin, idx| {
            speed_sq[lin] = idx.iter().map(|&i| nodes[i] * nodes[i]).sum();
        });
        StageEnergy {
            fft: MultiFft::new(grid.dim(), grid.n()),
            buffer: vec![Complex64::default(); grid.total()],
            speed_sq,
            cell_volume: grid.cell_volume(),
            grid,
        }
    }

    fn energy(&mut self, coeffs: &[Complex64]) -> f64 {
        self.buffer.copy_from_slice(coeffs);
        apply_checkerboard(&self.grid, &mut self.buffer, 1.0);
        self.fft.inverse(&mut self.buffer);
        let mut sum = 0.0;
        for (value, &v_sq) in self.buffer.iter().zip(&self.speed_sq) {
            sum += 0.5 * v_sq * value.re;
        }
        sum * self.cell_volume
    }
}

/// Projects coefficients onto the Hermitian-symmetric subspace — the image
/// of real grid functions under the forward transform.
///
/// The collision tables are sampled at the integer frequencies
/// `{-N/2, …, N/2-1}`, where the `-N/2` row has no `+N/2` conjugate
/// partner, so one collision evaluation leaks a non-Hermitian component
/// proportional to the field's content at the unpaired frequency. Left
/// alone this accumulates over thousands of steps into a visible imaginary
/// part in velocity space. Projecting after each step is the exact
/// counterpart of a real-transform formulation, which cannot represent the
/// asymmetric component in the first place; for well-resolved data the
/// projection is the identity up to roundoff.
fn symmetrize(grid: &GridSpec, coeffs: &mut [Complex64]) {
    let n = grid.n();
    let dim = grid.dim();
    let mut strides = [0usize; 3];
    let mut stride = 1;
    for ax in (0..dim).rev() {
        strides[ax] = stride;
        stride *= n;
    }
    grid.for_each_index(|lin, idx| {
        let mut partner = 0usize;
        for ax in 0..dim {
            partner += ((n - idx[ax]) % n) * strides[ax];
        }
        if lin < partner {
            let average = 0.5 * (coeffs[lin] + coeffs[partner].conj());
            coeffs[lin] = average;
            coeffs[partner] = average.conj();
        } else if lin == partner {
            coeffs[lin].im = 0.0;
        }
    });
}

/// Relative ℓ² distance between coefficient vectors (by Parseval this is
/// also the relative L² distance between the grid functions).
fn relative_l2_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += (x - y).norm_sqr();
        norm += y.norm_sqr();
    }
    if norm == 0.0 {
        return if diff == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (diff / norm).sqrt()
}

/// Integrates the equation from `ic` to `config.t_final`, precomputing
/// collision tables internally. See [`run_with_tables`] for the variant that
/// reuses existing tables (e.g. loaded from a cache).
pub fn run(
    grid: GridSpec,
    kernel: &KernelSpec,
    restitution: &RestitutionModel,
    ic: &InitialCondition,
    config: &SolverConfig,
) -> Result<RunOutput> {
    config.validate()?;
    restitution.validate()?;
    let mut tables = CollisionTables::precompute(grid, kernel, restitution, config)?;
    run_with_tables(grid, kernel, ic, config, &mut tables)
}

/// [`run`] with caller-supplied collision tables. The tables must have been
/// built for the same grid and kernel.
pub fn run_with_tables(
    grid: GridSpec,
    kernel: &KernelSpec,
    ic: &InitialCondition,
    config: &SolverConfig,
    tables: &mut CollisionTables,
) -> Result<RunOutput> {
    let mut trajectory = Vec::new();
    let mut snapshots = Vec::new();
    let summary = run_streaming(grid, kernel, ic, config, tables, &mut |event| {
        match event {
            RunEvent::Record(record) => trajectory.push(*record),
            RunEvent::Snapshot { time, field, .. } => snapshots.push((time, field.clone())),
        }
        Ok(())
    })?;
    Ok(RunOutput {
        trajectory,
        final_field: summary.final_field,
        snapshots,
        steady_state_time: summary.steady_state_time,
        max_mass_mode: summary.max_mass_mode,
    })
}

/// Core time loop: like [`run_with_tables`] but hands each diagnostics
/// record and snapshot to `on_event` the moment it is produced, so callers
/// can stream multi-hour runs to disk instead of holding them in memory.
/// An `Err` from the sink aborts the march.
pub fn run_streaming(
    grid: GridSpec,
    kernel: &KernelSpec,
    ic: &InitialCondition,
    config: &SolverConfig,
    tables: &mut CollisionTables,
    on_event: &mut dyn FnMut(RunEvent<'_>) -> Result<()>,
) -> Result<RunSummary> {
    config.validate()?;
    let mut fft = MultiFft::new(grid.dim(), grid.n());
    let mut field = build_initial(ic, grid)?;
    let mut coeffs = field.coeffs(&mut fft).to_vec();
    symmetrize(&grid, &mut coeffs);

    let needs_energy = kernel.gamma != 0.0;
    let mut stage_energy = if needs_energy {
        Some(StageEnergy::new(grid))
    } else {
        None
    };
    let bath_symbol: Option<Vec<f64>> = if config.tau > 0.0 {
        let base = config.tau * (std::f64::consts::PI / grid.half_width()).powi(2);
        let mut symbol = vec![0.0; grid.total()];
        grid.for_each_index(|lin, idx| {
            let k_sq: i64 = idx.iter().map(|&i| grid.frequency(i).pow(2)).sum();
            symbol[lin] = -base * k_sq as f64;
        });
        Some(symbol)
    } else {
        None
    };

    let mut workspace = match tables {
        CollisionTables::Fast { .. } => Some(FastWorkspace::new(grid)),
        CollisionTables::Direct(_) => None,
    };
    let mut max_mass_mode = 0.0f64;
    let mut rhs = |state: &[Complex64]| -> Result<Vec<Complex64>> {
        let energy = match &mut stage_energy {
            Some(se) => Some(se.energy(state)),
            None => None,
        };
        let mut q = match tables {
            CollisionTables::Fast { gain, loss } => collision::eval_fast(
                gain,
                loss,
                state,
                energy,
                workspace.as_mut().expect("fast workspace"),
            )?,
            CollisionTables::Direct(weights) => collision::eval_direct(weights, state, energy)?,
        };
        max_mass_mode = max_mass_mode.max(q[0].norm());
        if let Some(symbol) = &bath_symbol {
            for (slot, (&s, &f)) in q.iter_mut().zip(symbol.iter().zip(state)) {
                *slot += s * f;
            }
        }
        Ok(q)
    };

    let n_steps = (config.t_final / config.dt).round().max(1.0) as u64;
    let mut steady_state_time = None;

    let initial_record = make_record(&field, 0, 0.0, 0.0)?;
    on_event(RunEvent::Record(&initial_record))?;

    for step in 1..=n_steps {
        let time = step as f64 * config.dt;
        let mut next = match rk4_step(&coeffs, &mut rhs, config.dt) {
            Err(GranularError::NonFiniteState { .. }) => {
                return Err(GranularError::NonFiniteState {
                    step: step as usize,
                })
            }
            other => other?,
        };
        symmetrize(&grid, &mut next);
        let diff = relative_l2_diff(&next, &coeffs);
        if steady_state_time.is_none() && diff < 1e-12 {
            steady_state_time = Some(time);
        }
        coeffs = next;

        let record_due = step % config.output_every == 0 || step == n_steps;
        let snapshot_due = config
            .snapshot_every
            .is_some_and(|every| step % every == 0 || step == n_steps);
        if record_due || snapshot_due {
            field = DistributionField::from_coeffs(grid, coeffs.clone(), &mut fft)?;
            if record_due {
                let record = make_record(&field, step, time, diff)?;
                on_event(RunEvent::Record(&record))?;
            }
            if snapshot_due {
                on_event(RunEvent::Snapshot {
                    time,
                    step,
                    field: &field,
                })?;
            }
        }
    }

    let final_field = DistributionField::from_coeffs(grid, coeffs, &mut fft)?;
    Ok(RunSummary {
        final_field,
        steady_state_time,
        max_mass_mode,
    })
}

fn make_record(
    field: &DistributionField,
    step: u64,
    time: f64,
    step_l2_diff: f64,
) -> Result<TimeSeriesRecord> {
    let moments = diagnostics::moments(field)?;
    let (entropy, _) = diagnostics::entropy(field);
    let min_value = field.values().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TimeSeriesRecord {
        time,
        step,
        moments,
        entropy,
        step_l2_diff,
        min_value,
    })
}
