// Fit the same simulated dataset under the NEG and MM priors on `gamma` and
// compare the squared-error loss of each posterior mean.

use cholmix::cholesky::CovMatrix;
use cholmix::dists::RngStream;
use cholmix::gibbs::{fit, summarize, FitConfig, Model};
use cholmix::priors::{GammaPrior, PriorSpec};
use cholmix::simulation::{make_structure, sel_loss, simulate_dataset, StructureKind, StructureSpec};

pub fn run_example() -> cholmix::Result<()> {
    let q = 4;
    let truth = make_structure(&StructureSpec::new(StructureKind::Tridiagonal, q))?;
    let data = simulate_dataset(&truth, 80, q, 1, 0.0, &RngStream::new(21))?;
    // Short chains keep the example quick; real fits want thousands of draws.
    let config = FitConfig {
        n_iter: 1500,
        n_burnin: 500,
        seed: 21,
        ..FitConfig::default()
    };
    for gamma in [GammaPrior::neg(), GammaPrior::mm()] {
        let label = cholmix::commands::prior_label(&gamma);
        let model = Model::new(&data, PriorSpec::with_gamma(gamma))?;
        let summary = summarize(&fit(&model, &config)?)?;
        let loss = sel_loss(&CovMatrix::new(summary.omega_mean.clone())?, &truth)?;
        println!("{label}: sel {loss:.5}, sigma2 {:.4}", summary.sigma2_mean);
        println!(
            "  rho[1][0] {:.3} ({:.3}, {:.3})",
            summary.rho_mean[(1, 0)],
            summary.rho_lower[(1, 0)],
            summary.rho_upper[(1, 0)]
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
