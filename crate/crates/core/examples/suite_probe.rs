//! Runs the canonical moving-planes and stability suites and prints every
//! check with its measured value and margin, plus the sweep table as CSV.

use fraclap::suites::{run_maxprinciple_suite, run_stability_sweep, SuiteConfig};

fn main() {
    let t0 = std::time::Instant::now();
    let sweep = run_stability_sweep(&SuiteConfig::stability_default()).unwrap();
    println!("== stability ({:?}) ==", t0.elapsed());
    if let Some(table) = &sweep.table {
        print!("{}", table.to_csv());
    }
    for c in &sweep.checks {
        println!(
            "{} pass={} measured={:.6e} target={:.6e} margin={:.3e}",
            c.id, c.pass, c.measured, c.target, c.margin
        );
    }

    let t1 = std::time::Instant::now();
    let mp = run_maxprinciple_suite(&SuiteConfig::maxprinciple_default()).unwrap();
    println!("== maxprinciple ({:?}) ==", t1.elapsed());
    for c in &mp.checks {
        println!(
            "{} pass={} measured={:.6e} target={:.6e} margin={:.3e} inputs={}",
            c.id, c.pass, c.measured, c.target, c.margin, c.inputs
        );
    }
}
