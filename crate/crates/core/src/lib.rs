//! Finite-volume solver for the LWR traffic model with flux constraints
//! along moving interfaces.

pub mod flux;
pub mod mesh;
pub mod scheme;
pub mod trajectory;
pub mod multi;
pub mod diagnostics;
pub mod scenario;
pub mod run;
pub mod archive;
