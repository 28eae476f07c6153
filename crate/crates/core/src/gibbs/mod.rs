//! Full conditionals and the Gibbs samplers built from them.

mod conditionals;
pub mod geweke;
mod sampler;

pub use conditionals::{
    coefficient_block_draw, coefficient_block_draw_gram, gamma_conditional, inclusion_prob,
    mu_conditional, mudiff_conditional, shared_inclusion_prob, sigma_conditionals,
    tau_conditionals, ConditionalParams, RATE_FLOOR,
};
pub use sampler::{run_sampler, Sampler, SamplerOutput};
