//! Joint-distribution check of the samplers: prior draws against a chain
//! that alternates Gibbs sweeps with fresh outcomes. |z| beyond about 4
//! points at a wrong conditional.
//!
//! cargo run --release --example geweke_check -- [draws] [seed]

use hdid::datagen::{generate, GenerativeConfig};
use hdid::gibbs::geweke::{default_statistics, geweke_check};
use hdid::model::{InverseGammaPrior, Method, ModelSpec, PriorConfig, SharedGammaRule};
use hdid::numerics::RngStream;

fn main() -> hdid::Result<()> {
    let mut args = std::env::args().skip(1);
    let draws = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(11);

    // Small design with two covariates; only X and T are used.
    let mut gen = GenerativeConfig::study(6);
    gen.individuals = 3;
    gen.alpha = vec![1.0, 0.0];
    gen.beta_base = vec![0.0, 0.0];
    gen.beta_change = vec![0.0, 0.0];
    let (template, _) = generate(&gen, &mut RngStream::new(seed, 0))?;

    let mut priors = PriorConfig::with_spike(2, 0.15);
    priors.slab_scale = vec![1.0; 2];
    priors.intercept_var_base = 1.0;
    priors.intercept_var_change = 1.0;
    priors.treatment_var = 1.0;
    priors.variance_prior = Some(InverseGammaPrior { shape: 5.0, rate: 4.0 });

    for method in [Method::Full, Method::Separate, Method::Shared] {
        let mut p = priors.clone();
        p.shared_gamma = SharedGammaRule::Conjugate;
        let spec = ModelSpec::new(method.clone()).with_centering(false);
        let mut rng = RngStream::new(seed, 1);
        let stats = geweke_check(&template, &spec, &p, &default_statistics(), draws, &mut rng)?;
        println!("{}", method.name());
        for s in &stats {
            println!(
                "  {:<15} prior {:>8.4} ({:.4})  chain {:>8.4} ({:.4})  z {:>6.2}",
                s.name, s.prior_mean, s.prior_se, s.chain_mean, s.chain_se, s.z
            );
        }
    }
    Ok(())
}
