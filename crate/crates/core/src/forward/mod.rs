//! Time-discrete quasistatic plasticity: the per-step coupled problem in
//! `(Σ_i, u_i)`, multiplier recovery and trajectory assembly.

mod load;
pub mod reduced;
mod step;
mod trajectory;

pub use load::{LoadProgram, Waveform};
pub use step::{recover_multiplier, solve_step, StepOptions, StepResult, REPROJECT_TOL};
pub use trajectory::{
    check_complementarity, displacement_metric, energy_identity, load_metric, run_forward, ComplementarityReport,
    EnergyReport, ForwardDiagnostics, Interpolated, Trajectory, TrajectoryRecord,
};
