//! Checks the analytic gradients of the composite loss against central
//! finite differences, then shows that a corrupted gradient is caught.

use scenario_mining::cvqvae::{grad_check, toy_problem, GradCheckOptions, LossWeights};

fn main() -> scenario_mining::Result<()> {
    let (params, samples) = toy_problem(vec![16], 1);
    let weights = LossWeights { lambda_cl: 1.0, lambda_int: 1.0, commitment: 0.25 };
    let report = grad_check(&params, &samples, &weights, &GradCheckOptions::default())?;
    for (tensor, err) in &report.per_tensor {
        println!("{tensor:<20} {err:.2e}");
    }
    println!("max relative error {:.2e} over {} parameters", report.max_rel_error, report.checks.len());

    let worst = report.checks.iter().max_by(|a, b| a.numeric.abs().total_cmp(&b.numeric.abs())).unwrap();
    let opts = GradCheckOptions { corrupt: Some((worst.tensor.clone(), worst.index)), ..GradCheckOptions::default() };
    let broken = grad_check(&params, &samples, &weights, &opts)?;
    println!("with {}[{}] doubled: max relative error {:.3}", worst.tensor, worst.index, broken.max_rel_error);
    Ok(())
}
