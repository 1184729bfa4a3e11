//! Fixtures shared by the benchmarks.

use levy_ep::{Coefficient, ExpPhase, LevyModel, SdeProblem};

/// `dY = Y dX` with `X` a Brownian motion with small drift, `y₀ = 1`, `T = 1`.
pub fn gbm() -> (SdeProblem, LevyModel) {
    (
        SdeProblem::new(Coefficient::linear(1.0), vec![1.0], 1.0, 1.0).expect("valid problem"),
        LevyModel::brownian(0.05, 1.0).expect("valid model"),
    )
}

/// Hyperexponential jump diffusion with one phase on each side.
pub fn hyperexponential() -> LevyModel {
    LevyModel::hyperexponential(0.0, 1.0, 1.0, vec![ExpPhase::new(0.5, 3.0)], vec![ExpPhase::new(0.5, 4.0)])
        .expect("valid model")
}
