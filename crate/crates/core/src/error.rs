use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A Lagrangian, residual or derivative produced a non-finite value.
    #[error("non-finite evaluation in {context} at {inputs:?}")]
    Evaluation {
        context: &'static str,
        inputs: Vec<f64>,
    },

    /// The implicit z-coupling factor `1 - h D4 L_d` vanished.
    #[error("dissipation denominator is singular (|1 - h D4| = {value:e})")]
    DenominatorSingular { value: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (|F| = {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian (pivot {pivot:e})")]
    SingularJacobian { pivot: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("inconsistent initial conditions (|G| = {residual:e})")]
    ConsistencyFailure { residual: f64 },

    #[error("grids do not align: {0}")]
    GridMismatch(String),

    #[error("degenerate window {index}: second-moment eigenvalues too close")]
    DegenerateWindow { index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn check_finite(context: &'static str, value: f64, inputs: &[f64]) -> Result<f64> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Evaluation {
                context,
                inputs: inputs.to_vec(),
            })
        }
    }

    pub(crate) fn check_all_finite(context: &'static str, values: &[f64], inputs: &[f64]) -> Result<()> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Evaluation {
                context,
                inputs: inputs.to_vec(),
            })
        }
    }
}
