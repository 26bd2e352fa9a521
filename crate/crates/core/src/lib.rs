//! Visible + event camera single-object tracking.
//!
//! The crate covers the whole pipeline: an event file format and a
//! frame-to-event simulator ([`event`], [`sim`]), event images ([`repr`]),
//! a small neural core with analytic gradients ([`nn`]), early/middle/late
//! fusion including the cross-modality transformer ([`fusion`]), the online
//! tracking-by-classification loop ([`tracker`]) and benchmark metrics
//! ([`eval`]).

pub mod bbox;
pub mod config;
pub mod eval;
pub mod event;
pub mod frames;
pub mod fusion;
pub mod nn;
pub mod repr;
pub mod scalar;
pub mod sim;
pub mod synthetic;
pub mod tensor;
pub mod tracker;

pub use bbox::BBox;
pub use event::{Event, EventStream, Polarity};
pub use scalar::Scalar;
pub use tensor::{ShapeError, Tensor};
