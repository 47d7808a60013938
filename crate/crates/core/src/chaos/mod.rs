//! Truncated Wiener-chaos spaces over the increments of a uniform grid.

mod gram;
pub mod hermite;
mod index;
pub mod io;
mod project;
mod quadrature;
mod refine;
mod variable;

pub use gram::gram_matrix;
pub use hermite::{hermite_eval, psi, MAX_HERMITE_DEGREE};
pub use index::{basis_size, enumerate_indices, Catalog, CatalogLimits, ChaosSpace, MultiIndex};
pub use project::{gamma_project, MonteCarlo, Projector, ProjectorOptions};
pub use quadrature::GaussHermite;
pub use refine::refine;
pub(crate) use variable::PsiTable;
pub use variable::{ChaosRandomVariable, ChaosVector};
