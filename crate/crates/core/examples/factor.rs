//! Minimal end-to-end run: factor 57 in exact mode and print the outcome.

use qfactor::instance::FactoringInstance;
use qfactor::simulator::{AnsatzFamily, AnsatzSpec};
use qfactor::vqe::{run_vqe, RunConfig};

fn main() -> qfactor::Result<()> {
    let instance = FactoringInstance::new(57)?.with_factors(3, 19)?;
    let ansatz = AnsatzSpec::new(AnsatzFamily::LinearCnot, instance.qubits(), 4);
    let mut config = RunConfig::new(instance, ansatz);
    config.seed = 11;

    let record = run_vqe(&config)?;
    println!(
        "success={} max_fidelity={:.4} first_success_eval={:?} evaluations={}",
        record.success,
        record.max_fidelity.unwrap_or(0.0),
        record.first_success_eval,
        record.evaluations,
    );
    Ok(())
}
