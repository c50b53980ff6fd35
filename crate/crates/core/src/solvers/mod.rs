//! Sparse reconstruction algorithms.

mod bregman;
mod config;
mod enhance;
mod ista;
mod light;
mod lista;
mod objective;
mod prox;

pub use bregman::{split_bregman_l1tv, BregmanState, SplitBregman, StepInfo, AXIS_TV_WEIGHT};
pub use config::{
    ConfigOverrides, SolverConfig, SolverReport, DEFAULT_LAMBDA1_SCALE, DEFAULT_LAMBDA2_RATIO, SPECTRAL_ITERS,
};
pub use enhance::tv_denoise_enhance;
pub use ista::{debias, ista_fiber, ista_slice, ista_tensor, Variant};
pub use light::{light_reconstruct, light_reconstruct_enhance};
pub use lista::{
    lista_infer, lista_init, lista_loss, lista_tensor, lista_train, normalized_mse, FiberDataset, LearnedIstaParams,
};
pub use objective::objective_eval;
pub use prox::{soft_threshold, soft_threshold_slice, soft_threshold_tensor};
