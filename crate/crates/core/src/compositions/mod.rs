//! Splitting schemes as flattened `(a, b)` stage lists, their construction,
//! file format and the time-stepping loop.
//!
//! Stage `j` of a scheme advances the first operator by `a_j dt` and then
//! the second by `b_j dt`. Which physical operator is "first" is decided by
//! [`OperatorOrdering`] at step time, not by the scheme.

mod construct;
mod io;
mod stepper;

use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

pub use construct::{build_order, lie_trotter, strang, triple_jump, triple_jump_coefficients, triple_jump_root};
pub use io::{format_scheme, load_scheme, parse_scheme, save_scheme, LoadOptions, LoadedScheme};
pub use stepper::{integrate, step, step_count, IntegrateOptions, SplitState, Trajectory};

use crate::subflows::FlowError;

/// Consistency tolerance for constructed schemes.
pub const CONSTRUCTED_SUM_TOL: f64 = 1e-12;
/// Consistency tolerance beyond which a loaded scheme is rejected.
pub const LOADED_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("triple jump needs an even base order, got {0}")]
    OddBaseOrder(u32),
    #[error("root index {index} out of range for base order {order} ({count} roots)")]
    RootIndex { index: usize, order: u32, count: usize },
    #[error("stage {stage} has a coefficient with negative real part ({which} = {value})")]
    Inadmissible { stage: usize, which: char, value: Complex64 },
    #[error("no admissible root sequence yields order {0}")]
    NoAdmissibleRoots(u32),
    #[error("unsupported order {0} (expected 2, 4, 6 or 8)")]
    UnsupportedOrder(u32),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("consistency violated: sum of {which} coefficients is {sum} (deficit {deficit:e})")]
    Consistency { which: char, sum: Complex64, deficit: f64 },
    #[error("scheme file has no stages")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Errors raised while advancing a state.
#[derive(Debug, Error)]
pub enum StepError {
    #[error("stage {stage} ({operator} operator): {source}")]
    Flow {
        stage: usize,
        operator: &'static str,
        #[source]
        source: FlowError,
    },
    #[error("t_final / dt = {ratio} is not an integer step count")]
    RaggedTiling { ratio: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("non-finite state after step {step}")]
    NonFinite { step: usize },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<StepError>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage {
    pub a: Complex64,
    pub b: Complex64,
}

impl Stage {
    pub fn new(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    pub fn real(a: f64, b: f64) -> Self {
        Self { a: Complex64::new(a, 0.0), b: Complex64::new(b, 0.0) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchemeSource {
    Constructed,
    Loaded(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scheme {
    pub stages: Vec<Stage>,
    pub nominal_order: u32,
    pub name: String,
    pub source: SchemeSource,
}

/// Which physical operator is advanced with the `a` coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorOrdering {
    AFirst,
    BFirst,
}

impl fmt::Display for OperatorOrdering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AFirst => "A_first",
            Self::BFirst => "B_first",
        })
    }
}

impl Scheme {
    pub fn new(name: impl Into<String>, nominal_order: u32, stages: Vec<Stage>) -> Self {
        Self { stages, nominal_order, name: name.into(), source: SchemeSource::Constructed }
    }

    pub fn sum_a(&self) -> Complex64 {
        self.stages.iter().map(|s| s.a).sum()
    }

    pub fn sum_b(&self) -> Complex64 {
        self.stages.iter().map(|s| s.b).sum()
    }

    /// Largest deviation of the coefficient sums from one.
    pub fn consistency_defect(&self) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        (self.sum_a() - one).norm().max((self.sum_b() - one).norm())
    }

    pub fn check_consistency(&self, tol: f64) -> Result<(), SchemeError> {
        for (which, sum) in [('a', self.sum_a()), ('b', self.sum_b())] {
            let deficit = (sum - Complex64::new(1.0, 0.0)).norm();
            if !(deficit <= tol) {
                return Err(SchemeError::Consistency { which, sum, deficit });
            }
        }
        Ok(())
    }

    /// First stage coefficient with a negative real part.
    pub fn check_admissible(&self) -> Result<(), SchemeError> {
        for (stage, s) in self.stages.iter().enumerate() {
            for (which, value) in [('a', s.a), ('b', s.b)] {
                if value.re < 0.0 {
                    return Err(SchemeError::Inadmissible { stage, which, value });
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, sum_tol: f64) -> Result<(), SchemeError> {
        self.check_consistency(sum_tol)?;
        self.check_admissible()
    }

    /// Whether any coefficient has a nonzero imaginary part.
    pub fn is_complex(&self) -> bool {
        self.stages.iter().any(|s| s.a.im != 0.0 || s.b.im != 0.0)
    }

    /// Nonzero coefficients in application order.
    pub fn coefficients(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.stages.iter().flat_map(|s| [s.a, s.b]).filter(|c| *c != Complex64::new(0.0, 0.0))
    }

    /// Largest `|arg|` over the nonzero coefficients.
    pub fn max_abs_arg(&self) -> f64 {
        self.coefficients().map(|c| c.arg().abs()).fold(0.0, f64::max)
    }

    /// Number of `(a, b)` stage pairs.
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// The same substep sequence with the roles of the two operators
    /// exchanged: stepping `self` with `AFirst` equals stepping the result
    /// with `BFirst`.
    pub fn role_swapped(&self) -> Scheme {
        let zero = Complex64::new(0.0, 0.0);
        let mut seq = Vec::with_capacity(2 * self.stages.len() + 1);
        seq.push(zero);
        for s in &self.stages {
            seq.push(s.a);
            seq.push(s.b);
        }
        if seq.len() % 2 == 1 {
            seq.push(zero);
        }
        let stages = seq.chunks(2).map(|p| Stage::new(p[0], p[1])).collect();
        Scheme {
            stages,
            nominal_order: self.nominal_order,
            name: format!("{}-swapped", self.name),
            source: self.source.clone(),
        }
    }

    /// Multiplies every coefficient by `gamma`.
    pub fn scaled(&self, gamma: Complex64) -> Vec<Stage> {
        self.stages.iter().map(|s| Stage::new(s.a * gamma, s.b * gamma)).collect()
    }
}

/// Appends `next` to `stages`, merging a trailing `(a, 0)` stage with the
/// first stage of `next`.
pub(crate) fn concat_stages(stages: &mut Vec<Stage>, next: &[Stage]) {
    let mut rest = next;
    if let (Some(last), Some(first)) = (stages.last_mut(), next.first()) {
        if last.b == Complex64::new(0.0, 0.0) {
            last.a += first.a;
            last.b = first.b;
            rest = &next[1..];
        }
    }
    stages.extend_from_slice(rest);
}
