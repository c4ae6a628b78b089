//! Classical fourth-order Runge–Kutta time stepping with monitored
//! functionals.

use std::fmt::Write as _;

use crate::field::FieldGrid;

type Evaluator<'a, E> = Box<dyn Fn(&FieldGrid) -> Result<f64, E> + 'a>;

pub struct Monitor<'a, E> {
    pub name: String,
    pub eval: Evaluator<'a, E>,
}

impl<'a, E> Monitor<'a, E> {
    pub fn new(name: impl Into<String>, eval: impl Fn(&FieldGrid) -> Result<f64, E> + 'a) -> Self {
        Self { name: name.into(), eval: Box::new(eval) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub t_end: f64,
    /// Monitors are logged every this many steps (and at the final time).
    pub output_every: usize,
    /// Snapshots are stored at these step multiples; `None` keeps only the
    /// initial and final states.
    pub snapshot_every: Option<usize>,
}

impl StepPlan {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, output_every: 1, snapshot_every: None }
    }

    /// Number of steps and the step actually taken: `t_end` is reached
    /// exactly by shrinking `dt` to `t_end / ceil(t_end / dt)`.
    pub fn steps(&self) -> (usize, f64) {
        if self.dt <= 0.0 || self.t_end <= 0.0 {
            return (0, 0.0);
        }
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Monitors whose initial value is smaller than this (in magnitude) report
/// absolute rather than relative drift.
pub const ABSOLUTE_DRIFT_BELOW: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// One row per logged time, one column per monitor.
    pub values: Vec<Vec<f64>>,
    pub snapshots: Vec<(f64, FieldGrid)>,
    pub final_state: FieldGrid,
    pub steps: usize,
}

impl Trajectory {
    /// `max_t |H(t) − H(0)| / |H(0)|` for monitor `k`; absolute when
    /// `|H(0)|` is below [`ABSOLUTE_DRIFT_BELOW`].
    pub fn relative_drift(&self, k: usize) -> f64 {
        let h0 = self.values[0][k];
        let worst = self.values.iter().fold(0.0_f64, |m, row| m.max((row[k] - h0).abs()));
        if h0.abs() < ABSOLUTE_DRIFT_BELOW {
            worst
        } else {
            worst / h0.abs()
        }
    }

    pub fn max_relative_drift(&self) -> f64 {
        (0..self.names.len()).map(|k| self.relative_drift(k)).fold(0.0, f64::max)
    }

    /// `t,<monitor names>` header and one row per logged time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.values) {
            let _ = write!(out, "{t:.17e}");
            for v in row {
                let _ = write!(out, ",{v:.17e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Plain-text snapshot rows `x, field-index, component-index, value`.
pub fn snapshot_rows(state: &FieldGrid) -> String {
    let mut out = String::from("x,field,component,value\n");
    let grid = state.grid();
    for a in 0..state.fields() {
        for i in 0..state.comps() {
            for (j, v) in state.component(a, i).iter().enumerate() {
                let _ = writeln!(out, "{:.17e},{},{},{:.17e}", grid.x(j), a, i, v);
            }
        }
    }
    out
}

pub fn rk4_step<E>(rhs: &dyn Fn(&FieldGrid) -> Result<FieldGrid, E>, state: &FieldGrid, dt: f64) -> Result<FieldGrid, E> {
    let k1 = rhs(state)?;
    let mut s = state.clone();
    s.axpy(0.5 * dt, &k1);
    let k2 = rhs(&s)?;
    let mut s = state.clone();
    s.axpy(0.5 * dt, &k2);
    let k3 = rhs(&s)?;
    let mut s = state.clone();
    s.axpy(dt, &k3);
    let k4 = rhs(&s)?;
    let mut next = state.clone();
    next.axpy(dt / 6.0, &k1);
    next.axpy(dt / 3.0, &k2);
    next.axpy(dt / 3.0, &k3);
    next.axpy(dt / 6.0, &k4);
    Ok(next)
}

pub fn integrate<E>(
    rhs: &dyn Fn(&FieldGrid) -> Result<FieldGrid, E>,
    initial: &FieldGrid,
    plan: &StepPlan,
    monitors: &[Monitor<'_, E>],
) -> Result<Trajectory, E> {
    let (steps, dt) = plan.steps();
    let log = |state: &FieldGrid| monitors.iter().map(|m| (m.eval)(state)).collect::<Result<Vec<f64>, E>>();
    let mut traj = Trajectory {
        names: monitors.iter().map(|m| m.name.clone()).collect(),
        times: vec![0.0],
        values: vec![log(initial)?],
        snapshots: vec![(0.0, initial.clone())],
        final_state: initial.clone(),
        steps,
    };
    let every = plan.output_every.max(1);
    let mut state = initial.clone();
    for step in 1..=steps {
        state = rk4_step(rhs, &state, dt)?;
        let t = step as f64 * dt;
        if step % every == 0 || step == steps {
            traj.times.push(t);
            traj.values.push(log(&state)?);
        }
        let snap = plan.snapshot_every.is_some_and(|k| k > 0 && step % k == 0);
        if snap || step == steps {
            traj.snapshots.push((t, state.clone()));
        }
    }
    traj.final_state = state;
    Ok(traj)
}
