//! Lines on cubic hypersurfaces over finite fields, p-adic fields and the reals.

pub mod certificate;
pub mod finite_field;
pub mod forms;
pub mod line_search;
pub mod linalg;
pub mod padic;
pub mod quadforms;
pub mod real_geometry;
pub mod ring;
