//! Numerical engines: kernels, an SMO kernel-SVM trainer, EM-fitted diagonal
//! Gaussian mixtures, and cross-validated SVM grid search.

pub mod cv;
pub mod gmm;
pub mod kernel;
pub mod smo;

pub use cv::{grid_search_rbf, median_heuristic_gamma, GridChoice, SvmGrid};
pub use gmm::{gmm_fit, gmm_fit_with, gmm_posteriors, GmmConfig, GmmModel};
pub use kernel::{gram_matrix, rbf, KernelSpec};
pub use smo::{smo_train, solve_dual, svm_decision, svm_predict, DualSolution, SvmConfig, SvmModel};
