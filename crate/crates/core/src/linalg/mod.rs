//! Linear algebra used by the geometry solvers.

pub mod cg;
pub mod cholesky;
pub mod sparse;
pub mod vec3;

pub use cg::{conjugate_gradient, CgReport};
pub use cholesky::{reverse_cuthill_mckee, EnvelopeCholesky, FactorError};
pub use sparse::CsrMatrix;

use crate::scalar::Real;

/// Above this many unknowns the direct solver is replaced by conjugate gradient.
pub const DIRECT_SOLVE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("conjugate gradient stalled at relative residual {0:e}")]
    CgStalled(f64),
}

/// Solve a symmetric positive definite system, by envelope Cholesky up to
/// [`DIRECT_SOLVE_LIMIT`] unknowns and by preconditioned CG beyond.
pub fn solve_spd<T: Real>(m: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>, SolveError> {
    if m.n() <= DIRECT_SOLVE_LIMIT {
        Ok(EnvelopeCholesky::factor(m)?.solve(b))
    } else {
        let (x, rep) = conjugate_gradient(m, b, T::epsilon() * T::c(64.0), 20 * m.n());
        if rep.converged {
            Ok(x)
        } else {
            Err(SolveError::CgStalled(rep.relative_residual))
        }
    }
}
