//! Draws one dataset from the eight-covariate design and writes it in the
//! CSV layout that `hdid fit` reads.
//!
//! cargo run --example simulate -- [out_dir] [groups] [seed]

use std::path::PathBuf;

use hdid::cli::write_dataset;
use hdid::datagen::{generate, GenerativeConfig};
use hdid::numerics::RngStream;

fn main() -> hdid::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sim".into()));
    let groups = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let config = GenerativeConfig::study(groups);
    let (data, truth) = generate(&config, &mut RngStream::new(seed, 0))?;
    std::fs::create_dir_all(&out).map_err(|e| hdid::Error::io(&out, e))?;
    write_dataset(
        &data,
        &format!("example simulate groups={groups} seed={seed}"),
        &out.join("individuals.csv"),
        &out.join("groups.csv"),
    )?;

    let naive: f64 = {
        let t = &data.treatment;
        let d: Vec<f64> = truth.mu_diff.clone();
        let (mt, md) = (mean(t), mean(&d));
        let cov: f64 = t.iter().zip(&d).map(|(a, b)| (a - mt) * (b - md)).sum();
        cov / t.iter().map(|a| (a - mt).powi(2)).sum::<f64>()
    };
    println!("wrote {} groups x {} covariates to {}", data.num_groups(), data.num_covariates(), out.display());
    println!("true effect {:.3}, naive slope of mudiff on T {naive:.3}", truth.delta);
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
