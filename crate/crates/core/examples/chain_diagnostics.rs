// Run two short chains, lay them out as a chain table and flag traces with
// a large Geweke score or a small effective sample size.

use cholmix::dists::RngStream;
use cholmix::gibbs::{fit, FitConfig, Model};
use cholmix::io::{chain_table, diagnose_table};
use cholmix::priors::PriorSpec;
use cholmix::simulation::{make_structure, simulate_dataset, StructureKind, StructureSpec};

pub fn run_example() -> cholmix::Result<()> {
    let truth = make_structure(&StructureSpec::new(StructureKind::Identity, 3))?;
    let data = simulate_dataset(&truth, 60, 3, 1, 0.25, &RngStream::new(31))?;
    let model = Model::new(&data, PriorSpec::default())?;
    let chains = fit(
        &model,
        &FitConfig {
            n_iter: 1200,
            n_burnin: 400,
            thin: 2,
            n_chains: 2,
            seed: 31,
        },
    )?;
    let table = chain_table(&chains, data.x_names(), data.z_names());
    let rows = diagnose_table(&table)?;
    println!("{} columns, {} rows per chain", table.columns.len(), table.n_rows() / 2);
    for r in rows
        .iter()
        .filter(|r| r.parameter == "sigma2" || r.is_flagged())
        .take(8)
    {
        println!(
            "chain {} {:>12}: mean {:+.3}, ess {:6.1}, z {:+.2} [{}]",
            r.chain, r.parameter, r.mean, r.ess, r.geweke_z, r.flag
        );
    }
    let flagged = rows.iter().filter(|r| r.is_flagged()).count();
    println!("{flagged} of {} traces flagged", rows.len());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
