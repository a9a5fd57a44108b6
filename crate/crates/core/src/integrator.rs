//! Finite-volume time stepping on a periodic ring road.
//!
//! Each step first applies the conservative Roe update
//! `U*_j = U_j - dt/dx (F_{j+1/2} - F_{j-1/2})` and then adds the relaxation
//! source, `U_j^{n+1} = U*_j + dt S(U_j^n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    conserved_to_primitive, ConservedCell, Model, PerClass, PressureLaw, PrimitiveCell,
    VehicleClass, VACUUM_DENSITY,
};
use crate::riemann::{characteristic_speeds, numerical_flux, EntropyFix};
use crate::scenario::{build_initial_condition, ScenarioConfig};

/// Uniform 1-D grid of `cells` finite volumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    cells: usize,
    dx: f64,
}

/// How cell positions are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XConvention {
    /// `x_j = (j - 1/2) dx` for 1-based `j`.
    #[default]
    Center,
    /// `x_j = j dx` for 1-based `j`.
    Node,
}

impl Grid {
    pub fn new(cells: usize, length: f64) -> Result<Self> {
        if cells < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells, got {cells}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "length must be positive, got {length}"
            )));
        }
        Ok(Self {
            cells,
            dx: length / cells as f64,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.cells as f64 * self.dx
    }

    /// Cell center for 0-based index `j`.
    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx
    }

    pub fn positions(&self, convention: XConvention) -> Vec<f64> {
        (0..self.cells)
            .map(|j| match convention {
                XConvention::Center => self.center(j),
                XConvention::Node => (j + 1) as f64 * self.dx,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControls {
    pub dt: f64,
    pub duration: f64,
    pub cfl_max: f64,
    /// Rescale `dt` every step to `cfl_max dx / max|lambda|`.
    pub adaptive: bool,
}

/// Time level at which the relaxation source is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceTreatment {
    /// `S(U^n)`.
    #[default]
    Previous,
    /// `S(U*)`.
    Intermediate,
    /// Homogeneous system only.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub entropy_fix: EntropyFix,
    #[serde(default)]
    pub source: SourceTreatment,
}

/// Conserved state on the whole ring at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedField {
    pub cells: Vec<ConservedCell>,
    pub time: f64,
}

impl ConservedField {
    pub fn new(cells: Vec<ConservedCell>) -> Self {
        Self { cells, time: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Integrated density `sum_j rho_j dx` of one class.
    pub fn mass(&self, class: VehicleClass, dx: f64) -> f64 {
        self.cells.iter().map(|u| u.density(class)).sum::<f64>() * dx
    }

    pub fn primitives(&self, laws: &PerClass<PressureLaw>) -> Result<Vec<PrimitiveCell>> {
        self.cells
            .iter()
            .enumerate()
            .map(|(j, u)| {
                conserved_to_primitive(u, laws, VACUUM_DENSITY).map_err(|e| Error::BlowUp {
                    cell: j,
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}

/// Largest characteristic speed magnitude over the field.
pub fn max_speed(field: &ConservedField, laws: &PerClass<PressureLaw>) -> f64 {
    field
        .cells
        .iter()
        .flat_map(|u| characteristic_speeds(u, laws))
        .fold(0.0f64, |m, l| m.max(l.abs()))
}

pub fn cfl_number(field: &ConservedField, laws: &PerClass<PressureLaw>, dt: f64, dx: f64) -> f64 {
    dt / dx * max_speed(field, laws)
}

/// Field extended by one ghost cell on each side: `[U_J, U_1, ..., U_J, U_1]`.
pub fn apply_periodic_bc(field: &ConservedField) -> Vec<ConservedCell> {
    let n = field.cells.len();
    let mut ext = Vec::with_capacity(n + 2);
    ext.push(field.cells[n - 1]);
    ext.extend_from_slice(&field.cells);
    ext.push(field.cells[0]);
    ext
}

/// Fluxes at the `J + 1` interfaces `1/2, 3/2, ..., J + 1/2`.
pub fn interface_fluxes(
    field: &ConservedField,
    laws: &PerClass<PressureLaw>,
    mode: EntropyFix,
) -> Vec<[f64; 4]> {
    let ext = apply_periodic_bc(field);
    let n = field.cells.len();
    let mut fluxes: Vec<[f64; 4]> = Vec::with_capacity(n + 1);
    for j in 0..n {
        fluxes.push(numerical_flux(&ext[j], &ext[j + 1], laws, mode));
    }
    // Interface J + 1/2 sees the same pair as 1/2; reuse the value so the
    // periodic sum telescopes exactly.
    fluxes.push(fluxes[0]);
    fluxes
}

fn check_cell(j: usize, u: &ConservedCell, laws: &PerClass<PressureLaw>) -> Result<()> {
    let arr = u.to_array();
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(Error::BlowUp {
            cell: j,
            reason: "non-finite state".into(),
        });
    }
    conserved_to_primitive(u, laws, VACUUM_DENSITY)
        .map(|_| ())
        .map_err(|e| Error::BlowUp {
            cell: j,
            reason: e.to_string(),
        })
}

/// Conservative Roe update without the source.
pub fn homogeneous_step(
    field: &ConservedField,
    dt: f64,
    dx: f64,
    laws: &PerClass<PressureLaw>,
    solver: &SolverConfig,
    cfl_max: f64,
) -> Result<ConservedField> {
    let cfl = cfl_number(field, laws, dt, dx);
    if cfl > cfl_max {
        return Err(Error::CflViolation {
            cfl,
            limit: cfl_max,
        });
    }
    let fluxes = interface_fluxes(field, laws, solver.entropy_fix);
    let ratio = dt / dx;
    let mut cells = Vec::with_capacity(field.len());
    for (j, u) in field.cells.iter().enumerate() {
        let mut next = u.to_array();
        for (i, value) in next.iter_mut().enumerate() {
            *value -= ratio * (fluxes[j + 1][i] - fluxes[j][i]);
        }
        let next = ConservedCell::from_array(next);
        check_cell(j, &next, laws)?;
        cells.push(next);
    }
    Ok(ConservedField {
        cells,
        time: field.time + dt,
    })
}

fn add_source(
    target: &mut ConservedField,
    from: &ConservedField,
    dt: f64,
    model: &Model,
) -> Result<()> {
    let primitives = from.primitives(&model.laws)?;
    for (u, p) in target.cells.iter_mut().zip(&primitives) {
        let s = model.relaxation_source(p);
        // density components of the source are identically zero
        u.x_m += dt * s[1];
        u.x_c += dt * s[3];
    }
    Ok(())
}

/// Full step: homogeneous update followed by the relaxation source.
pub fn step(
    field: &ConservedField,
    dt: f64,
    dx: f64,
    model: &Model,
    solver: &SolverConfig,
    cfl_max: f64,
) -> Result<ConservedField> {
    let mut next = homogeneous_step(field, dt, dx, &model.laws, solver, cfl_max)?;
    match solver.source {
        SourceTreatment::Off => return Ok(next),
        SourceTreatment::Previous => add_source(&mut next, field, dt, model)?,
        SourceTreatment::Intermediate => {
            let star = next.clone();
            add_source(&mut next, &star, dt, model)?;
        }
    }
    for (j, u) in next.cells.iter().enumerate() {
        check_cell(j, u, &model.laws)?;
    }
    Ok(next)
}

/// Primitive field at a recorded instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub step: usize,
    pub cells: Vec<PrimitiveCell>,
}

/// Extremes of one class over the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassExtremes {
    pub rho_min: f64,
    pub rho_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Integrated density.
    pub mass: f64,
}

/// Per-step monitoring values; step 0 describes the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    /// Step size that produced this state (0 for the initial state).
    pub dt: f64,
    /// CFL number of the step that produced this state, or of the initial state.
    pub cfl: f64,
    pub total_rho_min: f64,
    pub total_rho_max: f64,
    pub classes: PerClass<ClassExtremes>,
}

fn diagnostics(
    step: usize,
    time: f64,
    dt: f64,
    cfl: f64,
    cells: &[PrimitiveCell],
    dx: f64,
) -> StepDiagnostics {
    let classes = PerClass::from_fn(|class| {
        let mut e = ClassExtremes {
            rho_min: f64::INFINITY,
            rho_max: f64::NEG_INFINITY,
            v_min: f64::INFINITY,
            v_max: f64::NEG_INFINITY,
            mass: 0.0,
        };
        for c in cells {
            let rho = c.density(class);
            let v = c.velocity(class);
            e.rho_min = e.rho_min.min(rho);
            e.rho_max = e.rho_max.max(rho);
            e.v_min = e.v_min.min(v);
            e.v_max = e.v_max.max(v);
            e.mass += rho;
        }
        e.mass *= dx;
        e
    });
    let totals = cells.iter().map(PrimitiveCell::total_density);
    let (lo, hi) = totals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    StepDiagnostics {
        step,
        time,
        dt,
        cfl,
        total_rho_min: lo,
        total_rho_max: hi,
        classes,
    }
}

/// Snapshots and per-step diagnostics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub config: ScenarioConfig,
    /// Reported cell positions.
    pub x: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// A run that stopped early; `trace` holds everything recorded before `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub trace: SimulationTrace,
    pub step: usize,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {} failed: {}", self.step, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// Everything the time loop needs, already validated.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub model: Model,
    pub grid: Grid,
    pub time: TimeControls,
    pub solver: SolverConfig,
    /// Requested snapshot instants, ascending.
    pub snapshots: Vec<f64>,
}

/// Runs the time loop from `initial` and records the trace.
pub fn simulate(
    plan: &RunPlan,
    initial: ConservedField,
    config: ScenarioConfig,
    convention: XConvention,
) -> std::result::Result<SimulationTrace, Box<RunFailure>> {
    let dx = plan.grid.dx();
    let laws = &plan.model.laws;
    let mut trace = SimulationTrace {
        config,
        x: plan.grid.positions(convention),
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
    };
    let fail = |trace: SimulationTrace, step: usize, error: Error| {
        Box::new(RunFailure { trace, step, error })
    };

    let mut field = initial;
    let first = match field.primitives(laws) {
        Ok(p) => p,
        Err(e) => return Err(fail(trace, 0, e)),
    };
    let cfl0 = cfl_number(&field, laws, plan.time.dt, dx);
    trace
        .diagnostics
        .push(diagnostics(0, field.time, 0.0, cfl0, &first, dx));

    let mut pending: Vec<f64> = plan.snapshots.clone();
    pending.retain(|t| *t <= plan.time.duration);
    let mut next_snapshot = 0;
    let record = |trace: &mut SimulationTrace,
                  next_snapshot: &mut usize,
                  step: usize,
                  time: f64,
                  cells: &[PrimitiveCell],
                  tol: f64| {
        while *next_snapshot < pending.len() && pending[*next_snapshot] <= time + tol {
            trace.snapshots.push(Snapshot {
                time,
                step,
                cells: cells.to_vec(),
            });
            *next_snapshot += 1;
        }
    };

    if plan.time.adaptive {
        let tol = 1e-9 * plan.time.duration.max(1.0);
        record(&mut trace, &mut next_snapshot, 0, 0.0, &first, tol);
        let mut n = 0;
        while field.time < plan.time.duration - tol {
            n += 1;
            let speed = max_speed(&field, laws);
            let mut dt = if speed > 0.0 {
                plan.time.cfl_max * dx / speed
            } else {
                plan.time.dt
            };
            let target = pending
                .get(next_snapshot)
                .copied()
                .unwrap_or(plan.time.duration)
                .min(plan.time.duration);
            if field.time + dt > target {
                dt = target - field.time;
            }
            let cfl = dt / dx * speed;
            field = match step(&field, dt, dx, &plan.model, &plan.solver, plan.time.cfl_max) {
                Ok(f) => f,
                Err(e) => return Err(fail(trace, n, e)),
            };
            if (field.time - target).abs() <= tol {
                field.time = target;
            }
            let cells = match field.primitives(laws) {
                Ok(p) => p,
                Err(e) => return Err(fail(trace, n, e)),
            };
            trace
                .diagnostics
                .push(diagnostics(n, field.time, dt, cfl, &cells, dx));
            record(&mut trace, &mut next_snapshot, n, field.time, &cells, tol);
        }
        return Ok(trace);
    }

    let dt = plan.time.dt;
    let steps = (plan.time.duration / dt).round() as usize;
    let snapshot_steps: Vec<usize> = pending.iter().map(|t| (t / dt).round() as usize).collect();
    // Snapshots report the requested instant, which equals n * dt up to rounding.
    let mut take = |trace: &mut SimulationTrace, n: usize, cells: &[PrimitiveCell]| {
        while next_snapshot < snapshot_steps.len() && snapshot_steps[next_snapshot] == n {
            trace.snapshots.push(Snapshot {
                time: pending[next_snapshot],
                step: n,
                cells: cells.to_vec(),
            });
            next_snapshot += 1;
        }
    };
    take(&mut trace, 0, &first);
    for n in 1..=steps {
        let cfl = cfl_number(&field, laws, dt, dx);
        field = match step(&field, dt, dx, &plan.model, &plan.solver, plan.time.cfl_max) {
            Ok(f) => f,
            Err(e) => return Err(fail(trace, n, e)),
        };
        // n * dt avoids drift from repeated addition.
        field.time = n as f64 * dt;
        let cells = match field.primitives(laws) {
            Ok(p) => p,
            Err(e) => return Err(fail(trace, n, e)),
        };
        trace
            .diagnostics
            .push(diagnostics(n, field.time, dt, cfl, &cells, dx));
        take(&mut trace, n, &cells);
    }
    Ok(trace)
}

/// Builds the initial condition from `config` and runs it.
pub fn run_scenario(
    config: &ScenarioConfig,
) -> std::result::Result<SimulationTrace, Box<RunFailure>> {
    let empty = |error: Error| {
        Box::new(RunFailure {
            trace: SimulationTrace {
                config: config.clone(),
                x: Vec::new(),
                snapshots: Vec::new(),
                diagnostics: Vec::new(),
            },
            step: 0,
            error,
        })
    };
    let plan = config.run_plan().map_err(empty)?;
    let initial = build_initial_condition(config).map_err(empty)?;
    simulate(&plan, initial, config.clone(), config.output.x_convention)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::primitive_to_conserved;

    fn model() -> Model {
        Model::reference(0.2).unwrap()
    }

    fn uniform(model: &Model, rho: f64, n: usize) -> ConservedField {
        let p = model.equilibrium_cell(rho).unwrap();
        ConservedField::new(vec![primitive_to_conserved(&p, &model.laws); n])
    }

    #[test]
    fn grid_validation_and_positions() {
        assert!(Grid::new(3, 10.0).is_err());
        assert!(Grid::new(4, 0.0).is_err());
        let g = Grid::new(40, 200.0).unwrap();
        assert_eq!(g.dx(), 5.0);
        assert_eq!(g.positions(XConvention::Center)[0], 2.5);
        assert_eq!(g.positions(XConvention::Node)[39], 200.0);
    }

    #[test]
    fn ghost_cells_wrap() {
        let m = model();
        let mut f = uniform(&m, 0.1, 5);
        f.cells[4].rho_m = 0.5;
        let ext = apply_periodic_bc(&f);
        assert_eq!(ext.len(), 7);
        assert_eq!(ext[0], f.cells[4]);
        assert_eq!(ext[6], f.cells[0]);
        let u = uniform(&m, 0.1, 5);
        assert!(apply_periodic_bc(&u).iter().all(|c| *c == u.cells[0]));
    }

    #[test]
    fn empty_still_road_has_zero_cfl() {
        let f = ConservedField::new(vec![ConservedCell::default(); 8]);
        assert_eq!(cfl_number(&f, &model().laws, 0.05, 5.0), 0.0);
    }

    #[test]
    fn cfl_guard_rejects_step() {
        let m = model();
        let f = uniform(&m, 0.1, 8);
        let err = homogeneous_step(&f, 10.0, 5.0, &m.laws, &SolverConfig::default(), 1.0);
        assert!(matches!(err, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn uniform_equilibrium_is_fixed_point() {
        let m = model();
        let f = uniform(&m, 0.15, 10);
        let next = step(&f, 0.05, 5.0, &m, &SolverConfig::default(), 1.0).unwrap();
        for (a, b) in f.cells.iter().zip(&next.cells) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn source_touches_momentum_only() {
        let m = model();
        let mut f = uniform(&m, 0.15, 10);
        for (j, u) in f.cells.iter_mut().enumerate() {
            u.rho_c += 0.01 * j as f64;
            u.x_c += 0.02 * j as f64;
        }
        let solver = SolverConfig::default();
        let star = homogeneous_step(&f, 0.05, 5.0, &m.laws, &solver, 1.0).unwrap();
        let full = step(&f, 0.05, 5.0, &m, &solver, 1.0).unwrap();
        for (a, b) in star.cells.iter().zip(&full.cells) {
            assert_eq!(a.rho_m, b.rho_m);
            assert_eq!(a.rho_c, b.rho_c);
        }
    }

    #[test]
    fn jump_moves_at_most_one_cell_per_step() {
        let m = model();
        let mut f = uniform(&m, 0.1, 20);
        let hi = primitive_to_conserved(&m.equilibrium_cell(0.3).unwrap(), &m.laws);
        f.cells[10] = hi;
        let orig = f.clone();
        let next = homogeneous_step(&f, 0.05, 5.0, &m.laws, &SolverConfig::default(), 1.0).unwrap();
        for j in (0..20).filter(|j| !(9..=11).contains(j)) {
            assert_eq!(next.cells[j], orig.cells[j], "cell {j}");
        }
    }
}
