// Two responses over four visits with covariates and missing visits: write
// the panel as long-format CSV, then fit it from disk the way the CLI does.

use cholmix::commands::{cmd_fit, FitCommand};
use cholmix::dists::RngStream;
use cholmix::gibbs::FitConfig;
use cholmix::io::LoadOptions;
use cholmix::priors::PriorSpec;
use cholmix::simulation::{make_structure, simulate_panel, PanelDesign, StructureKind, StructureSpec};

pub fn run_example() -> cholmix::Result<()> {
    let (responses, visits) = (2, 4);
    let omega = make_structure(&StructureSpec::new(StructureKind::Full, responses * visits))?;
    let design = PanelDesign {
        subjects: 60,
        visits,
        responses,
        covariates: 2,
        missing_prob: 0.1,
        sigma2: 0.25,
        beta: vec![1.0, 0.4, 0.0, -0.25, 0.0],
    };
    let data = simulate_panel(&omega, &design, &RngStream::new(51))?;

    let dir = std::env::temp_dir().join(format!("cholmix-panel-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| cholmix::Error::io(&dir, e))?;
    let input = dir.join("panel.csv");
    cholmix::io::write_dataset_csv(&input, &data)?;
    println!("wrote {} rows to {}", data.n_rows(), input.display());

    let out = cmd_fit(&FitCommand {
        input,
        output_dir: dir.join("fit"),
        load: LoadOptions {
            log_transform: true,
            standardize: true,
        },
        fit: FitConfig {
            n_iter: 1000,
            n_burnin: 400,
            seed: 51,
            ..FitConfig::default()
        },
        prior: PriorSpec::default(),
    })?;
    let s = &out.summary;
    for (k, name) in data.x_names().iter().enumerate() {
        println!(
            "{name:>8}: {:+.3} (inclusion {:.2})",
            s.beta_mean[k], s.inclusion_prob[k]
        );
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    std::fs::remove_dir_all(&dir).map_err(|e| cholmix::Error::io(&dir, e))?;
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
