//! Input laws, noise models, problem specifications and the moment and
//! geometry parameters of the input law.

mod geometry;
mod input;
mod noise;
mod spec;

pub use geometry::{
    hyperplane_mass, matrix_params, matrix_params_mc, norm_equivalence, singularity_prob, small_ball_ratio,
    wilson_interval, MatrixParams, MatrixParamsEstimate, SingularityEstimate,
};
pub use input::{InputDist, InputKind, ProjectionComponent};
pub use noise::NoiseModel;
pub use spec::{
    class_membership_check, max_legal_mu, moment_ratio_bound, sample_dataset, Dataset, DistClass, Membership,
    ProblemSpec,
};
