//! Evaluation metrics, parameter and FLOPs accounting, and field-pair
//! mutual information.

mod complexity;
mod metrics;
mod mi;

pub use complexity::{count_params, count_params_uniform, cross_dim_map, estimate_flops, flops, Dims};
pub use metrics::{auc, logloss, spearman, PROB_CLAMP};
pub use mi::{field_pair_mi, mi_matrix, MiMatrix};
