use num_complex::Complex64;

use super::{OperatorOrdering, Scheme, StepError};
use crate::spectral::Field;
use crate::subflows::{Flow, GSState};

/// State that can be projected back onto the reals after a full step.
pub trait SplitState: Clone {
    fn project_real(&mut self);
    fn is_finite(&self) -> bool;
}

impl SplitState for Field {
    fn project_real(&mut self) {
        Field::project_real(self)
    }

    fn is_finite(&self) -> bool {
        Field::is_finite(self)
    }
}

impl SplitState for GSState {
    fn project_real(&mut self) {
        GSState::project_real(self)
    }

    fn is_finite(&self) -> bool {
        GSState::is_finite(self)
    }
}

/// Applies the stages of `scheme` in order without the final projection.
pub(crate) fn apply_stages<S, FA, FB>(
    scheme: &Scheme,
    ordering: OperatorOrdering,
    flow_a: &mut FA,
    flow_b: &mut FB,
    state: &mut S,
    dt: f64,
) -> Result<(), StepError>
where
    FA: Flow<S> + ?Sized,
    FB: Flow<S> + ?Sized,
{
    let zero = Complex64::new(0.0, 0.0);
    for (stage, s) in scheme.stages.iter().enumerate() {
        let substeps: [(Complex64, bool); 2] = match ordering {
            OperatorOrdering::AFirst => [(s.a, true), (s.b, false)],
            OperatorOrdering::BFirst => [(s.a, false), (s.b, true)],
        };
        for (coef, is_a) in substeps {
            if coef == zero {
                continue;
            }
            let tau = coef * dt;
            let res = if is_a { flow_a.advance(state, tau) } else { flow_b.advance(state, tau) };
            res.map_err(|source| StepError::Flow { stage, operator: if is_a { "A" } else { "B" }, source })?;
        }
    }
    Ok(())
}

/// One time step of size `dt`, followed by projection onto real states.
///
/// With [`OperatorOrdering::AFirst`] stage `j` runs `flow_a` for `a_j dt`
/// then `flow_b` for `b_j dt`; `BFirst` exchanges the two flows.
pub fn step<S, FA, FB>(
    scheme: &Scheme,
    ordering: OperatorOrdering,
    flow_a: &mut FA,
    flow_b: &mut FB,
    state: &mut S,
    dt: f64,
) -> Result<(), StepError>
where
    S: SplitState,
    FA: Flow<S> + ?Sized,
    FB: Flow<S> + ?Sized,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(StepError::BadStep(dt));
    }
    apply_stages(scheme, ordering, flow_a, flow_b, state, dt)?;
    state.project_real();
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IntegrateOptions {
    /// Record a snapshot every `stride` steps (and at `t = 0`); `None`
    /// records nothing but the final state.
    pub snapshot_stride: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub final_state: S,
    pub steps: usize,
    /// `(time, state)` pairs, including the initial state when enabled.
    pub snapshots: Vec<(f64, S)>,
}

/// Number of steps of size `dt` tiling `[0, t_final]`.
pub fn step_count(dt: f64, t_final: f64) -> Result<usize, StepError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(StepError::BadStep(dt));
    }
    let ratio = t_final / dt;
    let rounded = ratio.round();
    if !(ratio.is_finite() && rounded >= 1.0 && (ratio - rounded).abs() <= 1e-9 * rounded) {
        return Err(StepError::RaggedTiling { ratio });
    }
    Ok(rounded as usize)
}

/// Repeats [`step`] until `t_final`, which `dt` must tile exactly.
pub fn integrate<S, FA, FB>(
    scheme: &Scheme,
    ordering: OperatorOrdering,
    flow_a: &mut FA,
    flow_b: &mut FB,
    initial: S,
    dt: f64,
    t_final: f64,
    options: IntegrateOptions,
) -> Result<Trajectory<S>, StepError>
where
    S: SplitState,
    FA: Flow<S> + ?Sized,
    FB: Flow<S> + ?Sized,
{
    let steps = step_count(dt, t_final)?;
    let mut state = initial;
    let mut snapshots = Vec::new();
    if options.snapshot_stride.is_some() {
        snapshots.push((0.0, state.clone()));
    }
    for n in 1..=steps {
        step(scheme, ordering, flow_a, flow_b, &mut state, dt)
            .map_err(|e| StepError::AtStep { step: n, source: Box::new(e) })?;
        if !state.is_finite() {
            return Err(StepError::NonFinite { step: n });
        }
        if let Some(stride) = options.snapshot_stride {
            if n % stride.max(1) == 0 {
                snapshots.push((n as f64 * dt, state.clone()));
            }
        }
    }
    Ok(Trajectory { final_state: state, steps, snapshots })
}
