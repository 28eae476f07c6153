//! Fits every method to a dataset stored as two CSV files and prints the
//! treatment effect and the change-model inclusion rates.
//!
//! cargo run --release --example fit_csv -- <individuals.csv> <groups.csv> [seed]
//!
//! Without arguments a small simulated dataset is used.

use std::path::PathBuf;

use hdid::cli::read_dataset;
use hdid::datagen::{generate, GenerativeConfig};
use hdid::gibbs::run_sampler;
use hdid::model::{validate, Method, ModelSpec, PosteriorSummary, PriorConfig};
use hdid::numerics::RngStream;

fn main() -> hdid::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(3);
    let data = if args.len() >= 2 {
        read_dataset(&PathBuf::from(&args[0]), &PathBuf::from(&args[1]))?
    } else {
        generate(&GenerativeConfig::study(60), &mut RngStream::new(seed, 0))?.0
    };
    let priors = PriorConfig::analysis(data.num_covariates());

    let methods = [Method::Full, Method::Separate, Method::Shared, Method::Sufficient, Method::Efficient];
    for w in validate(&data, &ModelSpec::new(Method::Full), &priors).warnings {
        eprintln!("warning: {w}");
    }
    println!("{:<11} {:>7} {:>17}   inclusion (change)", "method", "delta", "95% interval");
    for m in methods {
        let spec = ModelSpec::new(m.clone());
        let out = run_sampler(&data, &spec, &priors, &mut RngStream::new(seed, 1))?;
        let s = PosteriorSummary::from_draws(&m, &data.covariate_names, &out.draws);
        let d = s.parameter("delta").expect("delta is summarised");
        let incl: Vec<String> = s.change_inclusion.iter().map(|p| format!("{p:.2}")).collect();
        println!(
            "{:<11} {:>7.3} [{:>6.3}, {:>6.3}]   {}",
            s.method,
            d.mean,
            d.lower,
            d.upper,
            incl.join(" ")
        );
    }
    Ok(())
}
