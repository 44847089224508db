//! fracpore: two-phase Darcy flow coupled with linear poro-elastic deformation
//! in fractured porous media.
//!
//! Fractures are codimension-one interfaces (line segments in 2D) carrying
//! their own phase pressures. Phase pressures may be discontinuous across
//! matrix-fracture interfaces: each fracture edge carries, per phase, one
//! fracture unknown plus two interface-side unknowns, exchanged through an
//! upwinded two-point flux with normal transmissivity `T_f` and buffered by a
//! thin damaged-rock layer on each side. The matrix flow is discretized with a
//! cell-centered two-point flux approximation (TPFA) on orthogonality-admissible
//! triangular meshes; the mechanics with quadratic triangular finite elements
//! enriched by duplicated degrees of freedom along fracture paths so that
//! displacements can jump across fractures. The coupling runs through the
//! equivalent pressure (capillary-energy based), the Biot porosity closure and
//! the fracture aperture `d_f = -[[u]]`.
//!
//! The time loop uses adaptive stepping with chopping; each step staggers a
//! two-phase flow Newton solve against a direct mechanics solve, with the
//! outer fixed point accelerated by Jacobian-free Newton-Krylov.
//!
//! See the `book/` directory for a guided tour, and `Scenario` /
//! [`coupling::run`] for the main entry points.

pub mod coupling;
pub mod error;
pub mod flow;
pub mod mech;
pub mod mesh;
pub mod output;
pub mod rockphys;
pub mod scenario;
pub mod solvers;
pub mod units;
pub mod verify;

pub use error::FracporeError;
pub use mesh::Mesh;

// Book doctest includes are enabled once the guide exists (see below).
