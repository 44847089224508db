//! Linear and nonlinear solver kernels: sparse storage, ILU(0), restarted
//! GMRES, a direct sparse LU, a Newton driver and the Jacobian-free
//! Newton-Krylov fixed-point accelerator. All kernels are single-threaded and
//! deterministic.

pub mod csr;
pub mod gmres;
pub mod ilu;
pub mod jfnk;
pub mod lu;
pub mod newton;

pub use csr::{CsrMatrix, TripletBuilder};
pub use gmres::{gmres, GmresConfig, GmresOutcome};
pub use ilu::Ilu0;
pub use jfnk::{newton_krylov_fixed_point, FixedPointConfig, FixedPointStats};
pub use lu::SparseLu;
pub use newton::{newton_solve, newton_solve_with_reference, NewtonConfig, NewtonOutcome, NewtonProblem};
