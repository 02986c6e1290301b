pub mod bridges;
pub mod chain;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod hydro;
pub mod oneline;
pub mod params;
pub mod path;
pub mod rng;
pub mod scalar;
mod site;
pub mod slopes;
pub mod special;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use params::TiltParams;
pub use path::{trapezoid_area, Ensemble, Path};
pub use rng::RngStream;
pub use scalar::Real;
pub use slopes::{shift_slopes, ExtReal, SlopePair};

pub type TimeGrid64 = TimeGrid<f64>;
pub type Path64 = Path<f64>;
pub type Ensemble64 = Ensemble<f64>;
pub type TiltParams64 = TiltParams<f64>;
pub type SlopePair64 = SlopePair<f64>;
