//! Validate the bundled inputs, then a catalog with one pedestrian missing.
//!
//!     cargo run -p hubsim --example validate_inputs

use hubsim::inputs::{fixture_context, has_errors, validate_inputs};

fn main() {
    let ctx = fixture_context();
    let mut inputs = ctx.inputs.clone();
    let findings = validate_inputs(&inputs);
    println!(
        "fixtures: {} findings, errors: {}",
        findings.len(),
        has_errors(&findings)
    );

    inputs.catalog.pedestrians.pop();
    for f in validate_inputs(&inputs) {
        println!("{:?} {}: {}", f.severity, f.source, f.message);
    }
}
