//! Fixed covariate sets with a single generating covariate: bias, MSE and
//! coverage for each covariate role and each of the eight model choices.
//!
//! cargo run --release --example choice_grid -- [replications] [seed]

use hdid::study::{run_choice_grid, StudySettings};

fn main() -> hdid::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(11);

    let cells = run_choice_grid(&StudySettings::new(reps, seed))?;
    for role in cells.chunks(8) {
        println!("{}", role[0].role);
        for c in role {
            let r = &c.report;
            println!(
                "  choice {}  bias {:>7.3}  mse {:>6.3}  coverage {:>5.3}",
                c.choice, r.bias, r.mse, r.coverage
            );
        }
    }
    Ok(())
}
