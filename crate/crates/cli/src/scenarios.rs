//! One runner per scenario, each turning a resolved config into artifacts.

use serde_json::json;
use xssh_core::dynamics::{
    disorder_ensemble, gate_time_sweep, log_log_slope, swap_traces, transfer_scenario, EnsembleOptions, TraceRow,
};
use xssh_core::effective::{count_islands, recalibrate_for_disorder, sweet_point, sweet_seed, swap_map};
use xssh_core::model::build_total_hamiltonian;
use xssh_core::open_system::{
    bell_transfer_protocol, dissipative_trace, fit_decay_rate, remote_entanglement_protocol,
    steady_concurrence_estimate, ChainBath, DissipativeTrace,
};
use xssh_core::spectral::spectrum_table;
use xssh_core::{EdgeWindow, SectoredDensityMatrix, SweetPoint, SystemSpec};

use crate::config::{EdgeState, Scenario, ScenarioConfig};
use crate::failure::Failure;
use crate::output::{Artifact, Csv};

const TRACE_HEADER: [&str; 6] = ["time", "pop_1S", "pop_1A", "pop_2A", "pop_2S", "fidelity"];
const DISSIPATIVE_HEADER: [&str; 7] = ["time", "pop_S", "pop_A", "p_ground", "bell_plus", "bell_minus", "concurrence"];

pub fn run(config: &ScenarioConfig) -> Result<Vec<Artifact>, Failure> {
    let clean_only = matches!(
        config.scenario,
        Scenario::SwapMap | Scenario::Disorder | Scenario::GateSweep
    );
    if clean_only && config.system.disorder.delta != 0.0 {
        return Err(Failure::config(
            Some("system.disorder.delta".into()),
            format!("scenario `{}` runs on the clean system; set delta to 0", config.scenario),
        ));
    }
    let system = config.system.build()?;
    match config.scenario {
        Scenario::Spectrum => spectrum(&system),
        Scenario::Transfer => transfer(config, &system),
        Scenario::Swap => swap(config, &system),
        Scenario::SwapMap => fidelity_map(config),
        Scenario::Calibrate => calibrate(config, &system),
        Scenario::Disorder => disorder(config),
        Scenario::Dissipative => dissipative(config, &system),
        Scenario::Entangle => entangle(config, &system),
        Scenario::BellTransfer => bell_transfer(config, &system),
        Scenario::GateSweep => gate_sweep(config),
    }
}

fn trace_csv(rows: &[TraceRow]) -> Csv {
    let mut csv = Csv::new(&TRACE_HEADER);
    for r in rows {
        let [a, b, c, d] = r.populations;
        csv.row(vec![r.time.into(), a.into(), b.into(), c.into(), d.into(), r.fidelity.into()]);
    }
    csv
}

fn dissipative_csv(trace: &DissipativeTrace) -> Csv {
    let mut csv = Csv::new(&DISSIPATIVE_HEADER);
    for r in &trace.rows {
        csv.row(vec![
            r.time.into(),
            r.pop_s.into(),
            r.pop_a.into(),
            r.p_ground.into(),
            r.bell_plus.into(),
            r.bell_minus.into(),
            r.concurrence.into(),
        ]);
    }
    csv
}

fn spectrum(system: &SystemSpec) -> Result<Vec<Artifact>, Failure> {
    let rows = spectrum_table(&build_total_hamiltonian(system)?, EdgeWindow::Auto)?;
    let mut csv = Csv::new(&["index", "energy", "parity", "ipr", "is_edge"]);
    for r in rows {
        csv.row(vec![r.index.into(), r.energy.into(), r.parity.into(), r.ipr.into(), r.is_edge.into()]);
    }
    Ok(vec![Artifact::csv("spectrum.csv", csv)])
}

fn transfer(config: &ScenarioConfig, system: &SystemSpec) -> Result<Vec<Artifact>, Failure> {
    let report = transfer_scenario(system, config.params.n_steps.expect("resolved"))?;
    let peak = report
        .trace
        .iter()
        .max_by(|a, b| a.populations[3].total_cmp(&b.populations[3]))
        .expect("non-empty trace");
    let summary = json!({
        "coupling": report.coupling,
        "transfer_time": report.transfer_time,
        "population_at_transfer": report.population_at_transfer,
        "peak_pop_2S": peak.populations[3],
        "peak_time": peak.time,
        "dark_retention": report.dark_retention,
    });
    Ok(vec![
        Artifact::csv("transfer.csv", trace_csv(&report.trace)),
        Artifact::json("transfer.summary.json", &summary),
    ])
}

fn calibrated(config: &ScenarioConfig, system: &SystemSpec) -> Result<SweetPoint, Failure> {
    let k = config.params.k_index.expect("resolved");
    let c = &config.system;
    if c.disorder.delta > 0.0 {
        Ok(recalibrate_for_disorder(system, k)?)
    } else {
        Ok(sweet_point(k, c.j1, c.j2, c.n_cells)?)
    }
}

fn swap(config: &ScenarioConfig, system: &SystemSpec) -> Result<Vec<Artifact>, Failure> {
    let sweet = calibrated(config, system)?;
    let traces = swap_traces(system, &sweet, config.params.n_steps.expect("resolved"))?;
    let mut out = Vec::new();
    let mut states = Vec::new();
    for t in &traces {
        let name = format!("swap_{}.csv", t.label.replace('+', "_"));
        states.push(json!({"label": t.label, "file": name, "final_fidelity": t.final_fidelity}));
        out.push(Artifact::csv(name, trace_csv(&t.rows)));
    }
    let summary = json!({
        "k_minus": sweet.k_minus,
        "k_plus": sweet.k_plus,
        "k_index": sweet.k_index,
        "t_swap": sweet.t_swap,
        "fidelity": sweet.fidelity,
        "junction": sweet.junction.k,
        "states": states,
    });
    out.push(Artifact::json("swap.summary.json", &summary));
    Ok(out)
}

fn calibrate(config: &ScenarioConfig, system: &SystemSpec) -> Result<Vec<Artifact>, Failure> {
    let sweet = calibrated(config, system)?;
    Ok(vec![Artifact::json("calibrate.json", &sweet)])
}

fn fidelity_map(config: &ScenarioConfig) -> Result<Vec<Artifact>, Failure> {
    let c = &config.system;
    let n = config.params.grid_points.expect("resolved");
    let k_max = config.params.k_max.expect("resolved");
    let ks: Vec<f64> = (0..n).map(|i| k_max * i as f64 / (n - 1) as f64).collect();
    let cells = swap_map(c.j1, c.j2, c.n_cells, &ks)?;
    let mut csv = Csv::new(&["k_minus", "k_plus", "fidelity"]);
    for cell in &cells {
        csv.row(vec![cell.k_minus.into(), cell.k_plus.into(), cell.fidelity.into()]);
    }
    let values: Vec<f64> = cells.iter().map(|c| c.fidelity).collect();
    let summary = json!({
        "grid_points": n,
        "islands_above_0.99": count_islands(&values, n, 0.99),
        "cells_above_0.99": values.iter().filter(|v| **v > 0.99).count(),
        "max_fidelity": values.iter().copied().fold(0.0, f64::max),
    });
    Ok(vec![
        Artifact::csv("swap_map.csv", csv),
        Artifact::json("swap_map.summary.json", &summary),
    ])
}

fn disorder(config: &ScenarioConfig) -> Result<Vec<Artifact>, Failure> {
    let (c, p) = (&config.system, &config.params);
    let k = p.k_index.expect("resolved");
    let sweet = sweet_point(k, c.j1, c.j2, c.n_cells)?;
    let (k0, _, _) = sweet_seed(k, c.j1, c.j2, c.n_cells)?;
    let base = SystemSpec::clean(c.n_cells, c.j1, c.j2, sweet.junction)?;
    let mut table = Csv::new(&["delta", "mean", "std", "recalibrated"]);
    let mut instances = Csv::new(&["delta", "recalibrated", "seed", "fidelity", "flagged"]);
    for &frac in p.delta_fractions.as_ref().expect("resolved") {
        for recalibrate in [true, false] {
            let opts = EnsembleOptions {
                delta: frac * k0,
                n_instances: p.n_instances.expect("resolved"),
                seed: config.seed.expect("resolved"),
                mode: p.disorder_mode.expect("resolved"),
                recalibrate,
            };
            let report = disorder_ensemble(&base, &sweet, &opts)?;
            table.row(vec![
                report.delta.into(),
                report.mean_fidelity.into(),
                report.std_fidelity.into(),
                recalibrate.into(),
            ]);
            for r in &report.per_instance {
                instances.row(vec![
                    report.delta.into(),
                    recalibrate.into(),
                    r.seed.into(),
                    r.fidelity.into(),
                    r.flagged.into(),
                ]);
            }
        }
    }
    let summary = json!({"k_minus_seed": k0, "sweet_point": sweet});
    Ok(vec![
        Artifact::csv("disorder.csv", table),
        Artifact::csv("disorder_instances.csv", instances),
        Artifact::json("disorder.summary.json", &summary),
    ])
}

fn dissipative(config: &ScenarioConfig, system: &SystemSpec) -> Result<Vec<Artifact>, Failure> {
    let p = &config.params;
    let gamma0 = p.gamma0.expect("resolved");
    let t_max = p.t_max.expect("resolved");
    let bath = ChainBath::new(&system.chain1, gamma0)?;
    let (gamma_a, gamma_s) = bath.edge_decay()?;
    let initial = p.initial_state.expect("resolved");
    let psi = match initial {
        EdgeState::S => &bath.doublet.psi_s,
        EdgeState::A => &bath.doublet.psi_a,
    };
    let trace = dissipative_trace(
        &bath,
        &SectoredDensityMatrix::from_real(psi)?,
        t_max,
        p.n_steps.expect("resolved"),
    )?;
    let times: Vec<f64> = trace.rows.iter().map(|r| r.time).collect();
    let pops: Vec<f64> = trace
        .rows
        .iter()
        .map(|r| if initial == EdgeState::S { r.pop_s } else { r.pop_a })
        .collect();
    let window = if gamma0 > 0.0 { t_max.min(2.0 / gamma0) } else { t_max };
    let summary = json!({
        "gamma_a": gamma_a,
        "gamma_s": gamma_s,
        "fitted_rate": fit_decay_rate(&times, &pops, window),
        "final_population": pops.last(),
        "max_trace_error": trace.max_trace_error,
        "min_eigenvalue": trace.min_eigenvalue,
        "concurrence_mismatch": trace.concurrence_mismatch,
    });
    Ok(vec![
        Artifact::csv("dissipative.csv", dissipative_csv(&trace)),
        Artifact::json("dissipative.summary.json", &summary),
    ])
}

fn entangle(config: &ScenarioConfig, system: &SystemSpec) -> Result<Vec<Artifact>, Failure> {
    let p = &config.params;
    let gamma0 = p.gamma0.expect("resolved");
    let trace = remote_entanglement_protocol(
        &system.chain1,
        gamma0,
        p.t_max.expect("resolved"),
        p.n_steps.expect("resolved"),
    )?;
    let peak = trace
        .rows
        .iter()
        .max_by(|a, b| a.concurrence.total_cmp(&b.concurrence))
        .expect("non-empty trace");
    let bath = ChainBath::new(&system.chain1, gamma0)?;
    let summary = json!({
        "max_concurrence": peak.concurrence,
        "time_of_max": peak.time,
        "final_concurrence": trace.rows.last().map(|r| r.concurrence),
        "steady_estimate": steady_concurrence_estimate(&bath.doublet),
        "max_trace_error": trace.max_trace_error,
        "min_eigenvalue": trace.min_eigenvalue,
    });
    Ok(vec![
        Artifact::csv("entangle.csv", dissipative_csv(&trace)),
        Artifact::json("entangle.summary.json", &summary),
    ])
}

fn bell_transfer(config: &ScenarioConfig, system: &SystemSpec) -> Result<Vec<Artifact>, Failure> {
    let p = &config.params;
    let mut report = bell_transfer_protocol(
        system,
        p.gamma0.expect("resolved"),
        p.t_max,
        p.n_steps.expect("resolved"),
    )?;
    let mut csv = Csv::new(&["time", "pop_1", "pop_2", "p_ground", "concurrence_1", "concurrence_2"]);
    for r in &report.rows {
        csv.row(vec![
            r.time.into(),
            r.pop_1.into(),
            r.pop_2.into(),
            r.p_ground.into(),
            r.concurrence_1.into(),
            r.concurrence_2.into(),
        ]);
    }
    report.rows.clear();
    let mut summary = serde_json::to_value(&report).expect("report serializes");
    if let Some(map) = summary.as_object_mut() {
        map.remove("rows");
    }
    Ok(vec![
        Artifact::csv("bell_transfer.csv", csv),
        Artifact::json("bell_transfer.summary.json", &summary),
    ])
}

fn gate_sweep(config: &ScenarioConfig) -> Result<Vec<Artifact>, Failure> {
    let p = &config.params;
    let j2s = p.j2_values.as_ref().expect("resolved");
    let kps = p.k_plus_values.as_ref().expect("resolved");
    let rows = gate_time_sweep(j2s, kps, config.system.n_cells, p.k_index.expect("resolved"))?;
    let mut csv = Csv::new(&["j2", "k_plus", "j1_opt", "t_swap", "fidelity", "calibrated"]);
    for r in &rows {
        csv.row(vec![
            r.j2.into(),
            r.k_plus.into(),
            r.j1_opt.into(),
            r.t_swap.into(),
            r.fidelity.into(),
            r.calibrated.into(),
        ]);
    }
    let slopes: Vec<_> = j2s
        .iter()
        .map(|&j2| {
            let sel: Vec<_> = rows.iter().filter(|r| r.j2 == j2 && r.calibrated).collect();
            let x: Vec<f64> = sel.iter().map(|r| r.k_plus).collect();
            let y: Vec<f64> = sel.iter().map(|r| r.t_swap).collect();
            let slope = if x.len() >= 2 { Some(log_log_slope(&x, &y)) } else { None };
            json!({"j2": j2, "log_log_slope": slope})
        })
        .collect();
    Ok(vec![
        Artifact::csv("gate_sweep.csv", csv),
        Artifact::json("gate_sweep.summary.json", &json!({"n_cells": config.system.n_cells, "slopes": slopes})),
    ])
}
