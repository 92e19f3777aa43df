//! Sub-Riemannian calculus on stratified Lie groups.
//!
//! The crate provides, in rough dependency order:
//!
//! - [`poly`], [`group`]: exact polynomial vector fields on stratified
//!   (homogeneous Carnot) groups, with dilations, group law, brackets and
//!   the sampled Hörmander rank check;
//! - [`expr`], [`horizontal`]: a scalar-field expression language with
//!   symbolic differentiation, and the horizontal operators built on it
//!   (gradient, p-sub-Laplacian, infinity-sub-Laplacian);
//! - [`quadrature`], [`domain`], [`integrate`]: Gauss-Legendre tensor
//!   rules, admissible domains with oriented boundary patches, volume and
//!   boundary-form integration (the group divergence formula);
//! - [`gauge`], [`greens`], [`picone`]: calibrated homogeneous gauges and
//!   fundamental solutions, Green's identities, flux normalization,
//!   Picone/Hardy/Diaz-Saa checks, boundary-condition diagnostics;
//! - [`solver`]: finite-difference discretization of the Dirichlet problem
//!   for the p-sub-Laplacian and the theorem-level experiments;
//! - [`suite`], [`report`], [`config`]: the full verification battery with
//!   CSV/JSON reporting and config-file formats.

pub mod config;
pub mod domain;
pub mod expr;
pub mod gauge;
pub mod greens;
pub mod group;
pub mod horizontal;
pub mod integrate;
pub mod picone;
pub mod poly;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod suite;

pub use expr::{parse_expression, parse_with_params, Expression};
pub use group::{build_group, lie_bracket, Preset, StratifiedGroup, StratifiedGroupSpec, VectorField};
