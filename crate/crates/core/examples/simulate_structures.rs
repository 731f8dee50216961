// Generate every benchmark structure at q = 12 and one dataset from the
// tridiagonal truth.

use cholmix::dists::RngStream;
use cholmix::linalg::min_eigenvalue;
use cholmix::simulation::{make_structure, simulate_dataset, StructureKind, StructureSpec};

pub fn run_example() -> cholmix::Result<()> {
    let q = 12;
    for kind in StructureKind::ALL {
        let omega = make_structure(&StructureSpec::new(kind, q).with_seed(3))?;
        let m = omega.matrix();
        let nonzero = (0..q)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != 0.0)
            .count();
        println!(
            "{:>14}: {nonzero:2} nonzero below the diagonal, min eigenvalue {:.3}",
            kind.name(),
            min_eigenvalue(m)
        );
    }

    let omega = make_structure(&StructureSpec::new(StructureKind::Tridiagonal, 6))?;
    let data = simulate_dataset(&omega, 50, 3, 2, 0.25, &RngStream::new(5))?;
    println!(
        "tridiagonal dataset: {} subjects, {} rows, {} random effects",
        data.n_subjects(),
        data.n_rows(),
        data.q()
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
