pub mod admm;
pub mod error;
pub mod estimators;
pub mod io;
pub(crate) mod linalg;
pub mod model;
pub mod path;
pub mod prox;
pub mod simulate;
pub mod sparse;
