// Calibrate the moment-matching prior for q = 6 and check the implied
// correlation moments by simulation.

use cholmix::dists::RngStream;
use cholmix::priors::{correlations_into, CalibrationOptions, MmPrior};

pub fn run_example() -> cholmix::Result<()> {
    let (u, v, q) = (0.1, 0.09, 6);
    let prior = MmPrior::calibrated(u, v, q, &CalibrationOptions::default())?;
    let r = prior.mu.len();
    let mut rng = RngStream::new(11);
    let n = 20_000;
    let (mut sum, mut sum_sq) = (vec![0.0; r], vec![0.0; r]);
    let mut rho = vec![0.0; r];
    for _ in 0..n {
        let gamma = prior.sample(&mut rng)?;
        correlations_into(&gamma, q, &mut rho);
        for i in 0..r {
            sum[i] += rho[i];
            sum_sq[i] += rho[i] * rho[i];
        }
    }
    let nf = n as f64;
    let mut i = 0;
    for m in 1..q {
        let cells: Vec<String> = (0..m)
            .map(|_| {
                let mean = sum[i] / nf;
                let var = sum_sq[i] / nf - mean * mean;
                i += 1;
                format!("{mean:.3}/{var:.3}")
            })
            .collect();
        println!("row {m}: {}", cells.join("  "));
    }
    println!("target mean/var: {u}/{v}");
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
