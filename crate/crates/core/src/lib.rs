pub mod descent;
pub mod error;
pub mod homog;
pub mod io;
pub mod limits;
pub mod point;
pub mod poly;
pub mod rational;
pub mod series;
pub mod singan;

pub use error::{Error, Result};
pub use point::Point;
pub use poly::{Monomial, Polynomial};
pub use rational::RationalFunction;
