//! Fixtures shared by the benchmarks.

use tomoprop_core::numerics::UniformGrid;
use tomoprop_core::states::make_state;
use tomoprop_core::tomography::{tomogram_from_wavefunction, ForwardOptions};
use tomoprop_core::{StateSpec, ThetaGrid, Tomogram, WaveFunction};

/// Gaussian packet `(x0, p0, σ) = (1, 0.5, 1)` on `[-12, 12]`.
pub fn packet_state(points: usize) -> WaveFunction {
    let grid = UniformGrid::symmetric(12.0, points).expect("valid grid");
    make_state(&StateSpec::gaussian(1.0, 0.5, 1.0), &grid).expect("valid state")
}

/// Tomogram of [`packet_state`] with `nx` X points and `ntheta` angles.
pub fn packet_tomogram(points: usize, nx: usize, ntheta: usize) -> Tomogram {
    let x_grid = UniformGrid::symmetric(12.0, nx).expect("valid grid");
    let theta = ThetaGrid::new(ntheta).expect("valid angles");
    tomogram_from_wavefunction(&packet_state(points), &x_grid, &theta, ForwardOptions::default())
        .expect("finite tomogram")
}
