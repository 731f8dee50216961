// A miniature prior comparison: two structures, both priors, two replicates
// each, scored by squared-error loss.

use cholmix::commands::{mean_losses, run_benchmark, BenchmarkConfig, Design};
use cholmix::gibbs::FitConfig;
use cholmix::priors::{GammaPrior, PriorSpec};
use cholmix::simulation::StructureKind;

pub fn run_example() -> cholmix::Result<()> {
    let cfg = BenchmarkConfig {
        structures: vec![StructureKind::Identity, StructureKind::Tridiagonal],
        priors: vec![GammaPrior::neg(), GammaPrior::mm()],
        replicates: 2,
        design: Design {
            subjects: 60,
            visits: 4,
            responses: 1,
            sigma2: 0.25,
        },
        prior: PriorSpec::default(),
        fit: FitConfig {
            n_iter: 800,
            n_burnin: 300,
            seed: 41,
            ..FitConfig::default()
        },
        seed: 41,
        output_dir: std::env::temp_dir(),
    };
    let records = run_benchmark(&cfg)?;
    for r in &records {
        println!("{} {} #{}: {:.5}", r.structure, r.prior, r.replicate, r.sel);
    }
    for (s, p, m) in mean_losses(&records) {
        println!("mean {s} {p}: {m:.5}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
