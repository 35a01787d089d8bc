//! Spectra of Laplacians on warped products `B x_f F` with a 1-D base.
//!
//! Separation of variables reduces the warped Laplacian to a family of
//! weighted Sturm-Liouville operators on the base, one per fiber eigenvalue.
//! This crate discretizes that family conservatively, solves it, assembles
//! the product spectrum with multiplicities, classifies levels
//! (warped-simple, G-simple), differentiates eigenvalues along warping
//! perturbations with independent oracles, and cross-checks everything
//! against a direct 2-D discretization of the product operator.
//!
//! Modules:
//!
//! - [`mesh`]: compact 1-D bases (circle, interval) on uniform grids;
//! - [`warp`]: warping functions, perturbation directions, weighted
//!   quadrature;
//! - [`fiber`]: closed-form fiber spectra with multiplicities and
//!   representation labels;
//! - [`operator`]: the weighted base pencil and its eigensolver;
//! - [`assemble`]: product-spectrum assembly, multiplicity bookkeeping and
//!   classification;
//! - [`perturb`]: eigenvalue derivatives, degenerate slope matrices,
//!   splitting searches, curve tracing;
//! - [`product`]: the independent 2-D product-operator validator.
//!
//! Family solves, splitting candidate sweeps and curve-tracing grids run on
//! rayon when the `parallel` feature (default) is enabled; disabling it
//! yields a fully sequential build with bit-identical results.

pub mod assemble;
mod eigen;
pub mod error;
pub mod fiber;
pub mod mesh;
pub mod operator;
mod par;
pub mod perturb;
pub mod product;
pub mod warp;

pub use error::{Error, Result};

pub use assemble::{
    assemble_spectrum, classify_g_simple, classify_warped_simple, flat_circle_branches,
    AssembledLevel, BranchEigenvalues, LevelSource, SpectrumClassification,
};
pub use fiber::{
    circle_fiber, custom_fiber, discrete_circle_fiber, sphere_fiber, FiberEntry, FiberSpectrum,
    IrrepLabel,
};
pub use mesh::{BaseKind, BaseMesh, BoundaryCondition};
pub use operator::{
    assemble_operator, eigensolve, eigensolve_values, spectrum_of_family, EigenDecomposition,
    FamilyBranch, FamilySpectrum, SkippedMu, WeightedOperator,
};
pub use perturb::{
    degenerate_derivative_matrix, derivative_report, eigenvalue_derivative,
    eigenvalue_derivative_via_l, fd_cluster_slopes, fd_slope, fourier_candidates,
    hellmann_feynman_slope, split_search, trace_curves, CandidateDirections, CandidateOutcome,
    CurveBranch, DegenerateReport, DerivativeReport, EigenCurves, FdSlope, PerturbationReport,
    WeightExponent,
};
pub use product::{
    assemble_full_product, assembled_discrete_multiset, product_eigenvalues, validate_separation,
    ProductOperator, ValidationReport,
};
pub use warp::{
    dirichlet_energy, face_slopes, weighted_inner, PerturbationDirection, WarpField, WarpingSpec,
};
