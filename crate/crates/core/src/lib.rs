//! Motion-compensated frequency selective extrapolation for concealing lost
//! blocks in video, together with the temporal baselines it is measured
//! against and an experiment harness.
//!
//! The processing chain for one lost block is
//! [`motion::estimate_all`] → [`motion::check_reliability`] →
//! [`volume::assemble_volume`] → [`fse::fse_generate_model`] →
//! [`fse::cut_patch`]; [`conceal::conceal_sequence`] runs it over a whole
//! sequence.

pub mod baselines;
pub mod conceal;
pub mod fse;
pub mod harness;
pub mod loss;
pub mod motion;
pub mod video_io;
pub mod volume;

pub use conceal::{conceal_sequence, Algorithm, ConcealConfig, ConcealRun};
pub use fse::{FseConfig, FseModel, GridDims};
pub use harness::psnr::{psnr_lost_pixels, Psnr};
pub use loss::{LossBlock, LossMask};
pub use motion::MotionVector;
pub use video_io::Sequence;
