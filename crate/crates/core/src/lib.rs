//! Forward acoustic and electromagnetic scattering by spheres and gridded media,
//! two-sphere phaseless data synthesis and the checks built on top of it.

pub mod acoustic;
pub mod eigencheck;
pub mod em;
pub mod error;
pub mod geometry;
pub mod phaseless;
pub mod scalar;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ModalTable = specfun::ModalTable<f64>;
pub type ModalTable32 = specfun::ModalTable<f32>;
pub type Vec3 = geometry::Vec3<f64>;
pub type SpherePoint = geometry::SpherePoint<f64>;
pub type TangentFrame = geometry::TangentFrame<f64>;
pub type SphereGrid = geometry::SphereGrid<f64>;
