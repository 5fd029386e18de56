//! Named problem presets: parameters, grids, initial data and operator
//! orderings for the linear diffusion-with-potential problem and the
//! Gray-Scott system.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::compositions::{integrate, IntegrateOptions, OperatorOrdering, Scheme, SplitState, StepError, Trajectory};
use crate::spectral::{make_grid, Field, Grid};
use crate::subflows::{
    Flow, FlowError, FlowParams, GSState, GsLinearFlow, GsNonlinearFlow, HeatFlow, NonlinearFlowChoice,
    PotentialFlow,
};

pub const PRESET_NAMES: [&str; 6] = ["linpot-high", "linpot-low", "gs-high", "gs-low", "gs-selfrep", "gs-chaos"];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown preset '{name}' (available: {})", PRESET_NAMES.join(", "))]
pub struct UnknownPreset {
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// `u_t = D u_xx + V(x) u`; operator A is diffusion, B the potential.
    LinearPotential,
    /// Gray-Scott; operator A is the linear part, B the `u v^2` reaction.
    GrayScott,
}

/// Initial data, sampled on the problem grid.
#[derive(Clone, Copy, Debug)]
pub enum InitialCondition {
    Scalar(fn(f64) -> f64),
    Pair(fn(f64) -> f64, fn(f64) -> f64),
}

/// State of either problem family.
#[derive(Clone, Debug, PartialEq)]
pub enum State {
    Scalar(Field),
    Pair(GSState),
}

impl State {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            State::Scalar(f) => f.grid(),
            State::Pair(s) => s.grid(),
        }
    }

    /// Species fields in order (`u`, then `v` for Gray-Scott).
    pub fn species(&self) -> Vec<&Field> {
        match self {
            State::Scalar(f) => vec![f],
            State::Pair(s) => vec![&s.u, &s.v],
        }
    }

    pub fn max_imag(&self) -> f64 {
        self.species().iter().map(|f| f.max_imag()).fold(0.0, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        self.species().iter().map(|f| f.norm_inf()).fold(0.0, f64::max)
    }
}

impl SplitState for State {
    fn project_real(&mut self) {
        match self {
            State::Scalar(f) => f.project_real(),
            State::Pair(s) => s.project_real(),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            State::Scalar(f) => f.is_finite(),
            State::Pair(s) => s.is_finite(),
        }
    }
}

/// A split operator of either problem family, acting on [`State`].
pub enum ProblemFlow {
    Heat(HeatFlow),
    Potential(PotentialFlow),
    GsLinear(GsLinearFlow),
    GsNonlinear(GsNonlinearFlow),
}

impl Flow<State> for ProblemFlow {
    fn advance(&mut self, state: &mut State, tau: Complex64) -> Result<(), FlowError> {
        match (self, state) {
            (ProblemFlow::Heat(f), State::Scalar(s)) => f.advance(s, tau),
            (ProblemFlow::Potential(f), State::Scalar(s)) => f.advance(s, tau),
            (ProblemFlow::GsLinear(f), State::Pair(s)) => f.advance(s, tau),
            (ProblemFlow::GsNonlinear(f), State::Pair(s)) => f.advance(s, tau),
            _ => Err(FlowError::InvalidParameter("flow applied to a state of the wrong problem family".into())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub name: String,
    pub kind: ProblemKind,
    pub params: FlowParams,
    pub grid: Arc<Grid>,
    pub initial: InitialCondition,
    pub ordering: OperatorOrdering,
    /// Gray-Scott only.
    pub nonlinear: NonlinearFlowChoice,
    /// Final time of the convergence studies, when the preset has one.
    pub t_final: Option<f64>,
    /// Step of the order-8 reference solution.
    pub reference_dt: f64,
    /// Step used by simulation runs.
    pub default_dt: Option<f64>,
    pub snapshot_stride: usize,
}

/// `0.5 - 0.2 exp(sin 8x)`, initial data of both linear-potential presets.
pub fn linpot_initial(x: f64) -> f64 {
    0.5 - 0.2 * (8.0 * x).sin().exp()
}

fn gs_fig2_u(x: f64) -> f64 {
    0.0903 * (1.0 + 0.9 * (3.0 * x).cos().exp())
}

fn gs_fig2_v(x: f64) -> f64 {
    0.952 * (1.0 - 0.9 * x.cos().sin())
}

fn selfrep_u(x: f64) -> f64 {
    (-2.0 * x * x).exp()
}

fn selfrep_v(x: f64) -> f64 {
    0.1 + (-4.0 * x * x).exp()
}

fn chaos_u(x: f64) -> f64 {
    1.0 + (-2.0 * (10.0 * (x - 0.25)).powi(8)).exp() + (-2.0 * (10.0 * (x + 0.23)).powi(8)).exp()
}

fn chaos_v(x: f64) -> f64 {
    (-4.0 * (10.0 * x).powi(6)).exp() + (-4.0 * (10.0 * (x - 0.75)).powi(6)).exp()
}

/// Looks up a registered preset.
pub fn preset(name: &str) -> Result<Problem, UnknownPreset> {
    let grid = |n, a, b| make_grid(n, a, b).expect("preset grids are valid");
    let linpot = |d: f64| Problem {
        name: name.to_string(),
        kind: ProblemKind::LinearPotential,
        params: FlowParams::linear_potential(d),
        grid: grid(1024, -PI, PI),
        initial: InitialCondition::Scalar(linpot_initial),
        ordering: OperatorOrdering::BFirst,
        nonlinear: NonlinearFlowChoice::Exact,
        t_final: Some(1.0),
        reference_dt: 2f64.powi(-20),
        default_dt: None,
        snapshot_stride: 1,
    };
    let gs_study = |d_u: f64, d_v: f64| Problem {
        name: name.to_string(),
        kind: ProblemKind::GrayScott,
        params: FlowParams::gray_scott(d_u, d_v, 0.09, 0.086),
        grid: grid(512, -PI, PI),
        initial: InitialCondition::Pair(gs_fig2_u, gs_fig2_v),
        ordering: OperatorOrdering::AFirst,
        nonlinear: NonlinearFlowChoice::Exact,
        t_final: Some(10.0),
        reference_dt: 1e-4,
        default_dt: None,
        snapshot_stride: 1,
    };
    let problem = match name {
        "linpot-high" => linpot(10.0),
        "linpot-low" => linpot(0.005),
        "gs-high" => gs_study(1.0, 0.01),
        "gs-low" => gs_study(0.001, 0.001),
        "gs-selfrep" => Problem {
            params: FlowParams::gray_scott(0.001, 0.0001, 0.04, 0.1),
            grid: grid(512, -1.5 * PI, 1.5 * PI),
            initial: InitialCondition::Pair(selfrep_u, selfrep_v),
            nonlinear: NonlinearFlowChoice::Midpoint,
            t_final: None,
            default_dt: Some(1.0),
            ..gs_study(0.0, 0.0)
        },
        "gs-chaos" => Problem {
            params: FlowParams::gray_scott(2e-5, 1e-5, 0.028, 0.081),
            grid: grid(256, -1.25, 1.25),
            initial: InitialCondition::Pair(chaos_u, chaos_v),
            nonlinear: NonlinearFlowChoice::Midpoint,
            t_final: None,
            default_dt: Some(0.25),
            ..gs_study(0.0, 0.0)
        },
        _ => return Err(UnknownPreset { name: name.to_string() }),
    };
    Ok(problem)
}

impl Problem {
    pub fn initial_state(&self) -> State {
        match self.initial {
            InitialCondition::Scalar(f) => State::Scalar(Field::from_real_fn(self.grid.clone(), f)),
            InitialCondition::Pair(fu, fv) => State::Pair(GSState {
                u: Field::from_real_fn(self.grid.clone(), fu),
                v: Field::from_real_fn(self.grid.clone(), fv),
            }),
        }
    }

    /// Fresh `(A, B)` flows. Each integration should own its flows, since
    /// they carry multiplier caches.
    pub fn flows(&self) -> (ProblemFlow, ProblemFlow) {
        match self.kind {
            ProblemKind::LinearPotential => (
                ProblemFlow::Heat(HeatFlow::new(self.grid.clone(), self.params.d)),
                ProblemFlow::Potential(PotentialFlow::new(self.params.potential_field(self.grid.clone()))),
            ),
            ProblemKind::GrayScott => (
                ProblemFlow::GsLinear(GsLinearFlow::new(self.grid.clone(), self.params)),
                ProblemFlow::GsNonlinear(GsNonlinearFlow(self.nonlinear)),
            ),
        }
    }

    /// Integrates the preset's initial data to `t_final`.
    pub fn run(
        &self,
        scheme: &Scheme,
        dt: f64,
        t_final: f64,
        options: IntegrateOptions,
    ) -> Result<Trajectory<State>, StepError> {
        let (mut fa, mut fb) = self.flows();
        integrate(scheme, self.ordering, &mut fa, &mut fb, self.initial_state(), dt, t_final, options)
    }

    /// Stable text identifying everything that determines a solution.
    pub fn fingerprint(&self) -> String {
        let p = &self.params;
        format!(
            "name={};kind={:?};n={};x=[{:e},{:e});ordering={};nonlinear={};d={:e};du={:e};dv={:e};alpha={:e};beta={:e}",
            self.name,
            self.kind,
            self.grid.n(),
            self.grid.x_min(),
            self.grid.x_max(),
            self.ordering,
            self.nonlinear,
            p.d,
            p.d_u,
            p.d_v,
            p.alpha,
            p.beta
        )
    }
}
