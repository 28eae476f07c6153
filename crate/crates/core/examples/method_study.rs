//! Variable-selection study: every method fitted to the same simulated
//! datasets with eight candidate covariates.
//!
//! cargo run --release --example method_study -- [groups] [replications] [seed]

use hdid::study::{run_method_study, study_methods, StudySettings};

fn main() -> hdid::Result<()> {
    let mut args = std::env::args().skip(1);
    let groups = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let reps = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);

    let reports = run_method_study(groups, &study_methods(), &StudySettings::new(reps, seed))?;
    println!(
        "{:<11} {:>7} {:>7} {:>7} {:>9} {:>9}",
        "method", "bias", "mse", "cover", "#change", "#base"
    );
    for r in &reports {
        println!(
            "{:<11} {:>7.3} {:>7.3} {:>7.3} {:>9.2} {:>9.2}",
            r.label, r.bias, r.mse, r.coverage, r.change_predictors, r.base_predictors
        );
    }
    println!("\nchange-model inclusion probabilities");
    for r in &reports {
        let row: Vec<String> = r.change_inclusion.iter().map(|p| format!("{p:.3}")).collect();
        println!("{:<11} {}", r.label, row.join(" "));
    }
    Ok(())
}
