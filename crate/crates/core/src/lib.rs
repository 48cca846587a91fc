//! Deterministic indoor radio path tracing with multi-view path images.
//!
//! The pipeline runs scene → [`tracer::trace_pair`] → [`views`] encoding →
//! [`reconstruct`] back to 3D, and [`dataset`] drives it at scale.
//!
//! ```no_run
//! use raydio::{bundled, geometry::Point, tracer::{trace_pair, TraceConfig}};
//!
//! let scene = bundled::shoebox();
//! let index = scene.build_index();
//! let csi = trace_pair(
//!     &scene,
//!     &index,
//!     &Point::new(1.0, 1.0, 1.0),
//!     &Point::new(4.0, 3.0, 1.5),
//!     &TraceConfig::default(),
//! )
//! .unwrap();
//! println!("{} paths", csi.paths.len());
//! ```

pub mod bundled;
pub mod channel;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod reconstruct;
pub mod tracer;
pub mod views;

pub use error::{Error, Result};
