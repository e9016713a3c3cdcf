//! Acceptance suite: one test per physical claim, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p xssh-core --test acceptance -- --nocapture` to see the lines.

use std::io::Write;

use xssh_core::reproduce::{self, Check};

fn run(name: &'static str, check: Check) {
    let result = reproduce::run_check(name, check);
    // written to the raw handle so the line shows up even when output is captured
    let _ = writeln!(std::io::stderr(), "{}", result.line());
    assert!(result.passed, "{}", result.line());
}

#[test]
fn edge_energy_exact() {
    run("edge_energy_exact", reproduce::edge_energy_exact);
}

#[test]
fn coupling_law() {
    run("coupling_law", reproduce::coupling_law);
}

#[test]
fn state_transfer() {
    run("state_transfer", reproduce::state_transfer);
}

#[test]
fn swap_fidelity() {
    run("swap_fidelity", reproduce::swap_fidelity);
}

#[test]
fn fidelity_map() {
    run("fidelity_map", reproduce::fidelity_map);
}

#[test]
fn disorder_plateau() {
    run("disorder_plateau", reproduce::disorder_plateau);
}

#[test]
fn propagator_equivalence() {
    run("propagator_equivalence", reproduce::propagator_equivalence);
}

#[test]
fn super_subradiance() {
    run("super_subradiance", reproduce::super_subradiance);
}

#[test]
fn master_equation_sanity() {
    run("master_equation_sanity", reproduce::master_equation_sanity);
}

#[test]
fn remote_entanglement() {
    run("remote_entanglement", reproduce::remote_entanglement);
}

#[test]
fn gate_time_tuning() {
    run("gate_time_tuning", reproduce::gate_time_tuning);
}

#[test]
fn parity_robustness() {
    run("parity_robustness", reproduce::parity_robustness);
}
