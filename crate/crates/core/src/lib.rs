//! Approximation of piecewise-smooth functions from scattered or gridded
//! samples, by non-linear least squares over combinations of uniform-knot
//! cubic splines joined with min/max/sign operations.
//!
//! The pipeline: generate or load samples ([`synth`], [`io`]), pick a problem
//! family ([`objectives`]), minimize with differential evolution
//! ([`optimizer`]), then post-process — level-set extraction and segmentation
//! live in [`geometry`], patch merging in [`blending`].

mod linalg;

pub mod blending;
pub mod geometry;
pub mod io;
pub mod objectives;
pub mod optimizer;
pub mod spline;
pub mod synth;

pub use spline::{
    fit_spline_1d, fit_spline_2d, KnotGrid1D, KnotGrid2D, SampleSet, Spline1D, Spline2D,
    SplineError, SplineFit,
};
