pub mod chains;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod markov;
pub mod mixing;
pub mod mollify;
pub mod par;
pub mod pointfield;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod tessellation;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Interval, Point, Rect, Region};
