//! The Markov chain on channel strengths: rates, kernel, killed chain, oscillation.

pub mod kernel;
pub mod oscillation;
pub mod process;
pub mod rates;

pub use kernel::{couple_pareto, q_tail, q_tail_closed, sample_q, sample_q_rejection, KernelVariant};
pub use oscillation::{simulate_f, FPath};
pub use process::{
    doob_compare, g_acceptance_mean, p_exact, p_exact_mc, p_lower, survival_estimate, transition_sample, ChainState, ConstantP,
    DoobComparison, GridP, PModel,
};
pub use rates::{
    certify_c1, certify_c2, exact_block_ratio, g_mass, g_mu, g_mu_closed, lambda0_split, lambda_j, lambda_sum, lambdas_closed,
    log_grid, r_bar_constants, rate_scale, rate_table_csv, GMass, RateTable,
};
