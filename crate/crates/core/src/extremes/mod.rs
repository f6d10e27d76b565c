//! From observation matrices to dependence tensors.

mod directional;
mod estimators;
mod preprocess;
mod tensor;

pub use directional::{direction_class, directional_tail_profile, ProfilePoint, DIRECTION_LABELS};
pub use estimators::{empirical_chi, empirical_chibar, PairEstimate, UniformScores, DEFAULT_THRESHOLD};
pub use preprocess::{block_maxima, moving_average_residuals, ordinal_ranks, rank_transform_frechet, DEFAULT_MA_WINDOW};
pub use tensor::{dependence_tensor, DependenceTensor, QualityReport, TENSOR_MAGIC};
