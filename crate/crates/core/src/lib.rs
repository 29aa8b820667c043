//! Polarimetric SAR decomposition toolkit and a desk-scale harness for
//! physically inspired self-supervised pretraining.
//!
//! The pipeline runs complex scattering matrices through coherency
//! estimation, Yamaguchi four-component decomposition and Rayleigh
//! equiprobability quantization to produce pseudo-labels, then trains a
//! scattering-query decoder against those labels and a power-conservation
//! target.

pub mod autodiff;
pub mod bases;
pub mod cli;
pub mod grid;
pub mod io;
pub mod labels;
pub mod polsar;
pub mod pretrain;
pub mod queries;
pub mod scene;
pub mod yamaguchi;

pub use bases::{basis_matrix, reconstruct_power, synthesize_pixel, BasisKind, ScatteringBasis, TenPowers};
pub use grid::Grid;
pub use labels::{fit_rayleigh, generate_labels, median_threshold, BinaryLabelStack, RayleighFit};
pub use polsar::{
    boxcar_coherency, pauli_vector, rank1_coherency, span_pixel, span_raster, symmetrize_reciprocal, CoherencyMatrix,
    ComplexSample, PauliVector, PolsarRaster, RasterMetadata, ScatteringMatrix,
};
pub use queries::{independence_report, init_query, IndependenceReport, ScatteringQuery};
pub use scene::{synthesize_scene, SceneSpec};
pub use yamaguchi::{decompose_raster, yamaguchi_decompose, ComponentStack, YamaguchiPowers};
