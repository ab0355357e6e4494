pub mod baselines;
pub mod bench;
pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod distance;
pub mod error;
pub mod io;
pub mod projection;
pub mod sequencer;
pub mod sim;
pub mod validity;

pub use bench::{
    evaluate_scores, grid_optimize, run_experiment, BenchmarkResult, ExperimentSpec, GridResult,
    GridSpec, IndexKind, RpAggregate, Setup,
};
pub use baselines::{
    diffusion_map, pca_transform, random_projection, DiffusionModel, Method, PcaModel,
    TransformResult,
};
pub use data::{DataMatrix, SelectionIndex};
pub use diagnostics::{diagnostic_svg, PlotSpec};
pub use distance::DistanceMatrix;
pub use error::{Error, Result};
pub use projection::{fit_projection, Distances, OsdKind, Projection};
pub use sequencer::{
    advance_step, build_sequence, order_initial, select_seed, transform, GpMatrix,
    GuidedSequence, SequencerConfig, Side, StepRecord,
};
pub use validity::{
    best_f_measure, c_index, f_measure, gamma_index, silhouette_index, ward_cluster,
    ward_linkage, Dendrogram, PartitionLabels, ValidationReport,
};
