//! Self-contained numerical kernel shared by every other module.

pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use linalg::{cholesky, sym_eigen, LowerTriangular, Spectrum, SINGULAR_RTOL, SymMatrix};
pub use quadrature::{gauss_hermite_expectation, integrate_graded, normal_expectation_piecewise, GaussHermite, GaussLegendre};
pub use rng::RngStream;
pub use special::{
    chi_square_cdf, chi_square_quantile, erf, inv_gamma_cdf, ln_gamma, reg_lower_gamma,
    reg_upper_gamma, shifted_normal_abs_moment, sinhc, std_normal_abs_moment,
};
