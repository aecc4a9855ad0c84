//! Peak cancellation: kernel synthesis, threshold design and the
//! budget-tracked cancellation loop.

mod cancel;
mod kernel;
mod threshold;
mod tracker;
mod window;

pub use cancel::{cancel_peaks, cancel_symbol, detect_peak, PcReport, PeakEvent, StopReason, DEFAULT_MAX_ITER};
pub use kernel::{bare_pulse, kernel_alpha, kernel_spectral_split, pulse_alpha, synthesize_kernel, synthesize_kernel_with, PcKernel, ALPHA_REFINEMENT, DEFAULT_PEAK_ENERGY_SCALE};
pub use threshold::{
    distortion_integral, distortion_integral_closed, distortion_integral_quadrature, solve_optimum_threshold,
    DistortionEvaluator, ThresholdSolution, ThresholdSolver,
};
pub use tracker::{estimate_increments, BudgetScope, DistortionTracker, EvmSumMode, Increments};
pub use window::WindowParams;
