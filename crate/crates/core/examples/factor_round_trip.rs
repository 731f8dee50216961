// Build a covariance from modified-Cholesky factors, take it apart again and
// read correlations straight off the `gamma` vector.

use cholmix::cholesky::{compose, corr_from_gamma, corr_matrix, decompose, CholeskyFactors};

pub fn run_example() -> cholmix::Result<()> {
    // q = 4: two zero scales would drop effects; here all are active.
    let lambda = vec![1.0, 0.8, 1.2, 0.5];
    let gamma = vec![0.3, -0.2, 0.5, 0.0, 0.1, -0.4];
    let factors = CholeskyFactors::new(lambda, gamma)?;
    let omega = compose(&factors);
    println!("omega =\n{:.4}", omega.matrix());

    let back = decompose(&omega)?;
    let err = back
        .gamma()
        .iter()
        .zip(factors.gamma())
        .chain(back.lambda().iter().zip(factors.lambda()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    println!("largest round-trip error: {err:.2e}");
    assert!(err < 1e-10);

    let corr = corr_matrix(&factors);
    for (m, l) in [(1, 0), (3, 1)] {
        let direct = corr_from_gamma(factors.gamma(), m, l);
        println!("rho[{m}][{l}] = {direct:.6} (matrix {:.6})", corr.matrix[(m, l)]);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
