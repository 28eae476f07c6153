//! Omitted-variable bias of the treatment effect as covariates are added one
//! at a time, with and without adjusting the baseline for treatment.
//!
//! cargo run --release --example bias_table -- [replications] [seed]

use hdid::datagen::GenerativeConfig;
use hdid::oracle::table_a1_sweep;

fn main() -> hdid::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps = args.next().and_then(|a| a.parse().ok()).unwrap_or(10_000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(2024);

    let rows = table_a1_sweep(&GenerativeConfig::study(50), reps, seed)?;
    println!("{:<6} {:>10} {:>10}", "", "no adjust", "adjust T");
    for r in rows {
        println!("{:<6} {:>10.3} {:>10.3}", r.label, r.no_adjust.mean, r.adjust.mean);
    }
    Ok(())
}
