//! One adaptive chain on the bimodal interval density.

use std::sync::Arc;

use aimh::chain::{run_chain, FromTarget, KernelSchedule};
use aimh::proposals::TwoModeKernel;
use aimh::targets::Example1Target;

fn main() -> aimh::Result<()> {
    let target = Arc::new(Example1Target::new(2000.0)?);
    let kernel = TwoModeKernel::new(0.4, 0.02, 0.5, (0.0, 1.0))?;
    let trace = run_chain(target.clone(), KernelSchedule::single(Box::new(kernel)), &FromTarget(target), 10_000, 7)?;
    println!("accepted {} of {}", trace.accepted, trace.len());
    Ok(())
}
