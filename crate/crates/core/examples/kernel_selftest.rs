//! Checks every vector kernel on this host against the scalar scan.

use pqscan::scan::selftest::run_differential;
use pqscan::scan::Capabilities;

fn main() -> pqscan::Result<()> {
    let caps = Capabilities::detect();
    println!("instruction sets: {:?}", caps.available());
    let report = run_differential(&caps, 2000, 1)?;
    for case in &report.cases {
        println!("{case}");
    }
    for s in &report.scalar_only {
        println!("{s}: scalar only");
    }
    println!("{}", if report.passed() { "all kernels agree" } else { "MISMATCH" });
    Ok(())
}
