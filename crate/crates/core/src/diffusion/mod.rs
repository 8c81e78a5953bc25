//! Variance schedules and the forward/reverse diffusion processes.

mod process;
mod schedule;

pub use process::{forward_step, EpsModel, FrequencyDiffusion, ReverseNoise, TrainingDraw, TrajectoryPoint};
pub use schedule::{make_schedule, strided_steps, DiffusionSchedule, ScheduleParams};
