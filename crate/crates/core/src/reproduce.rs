//! Numerical checks behind `xssh repro`: one function per physical claim,
//! each returning a pass/fail verdict with the measured numbers.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    disorder_ensemble, gate_time_sweep, instance_seeds, log_log_slope, swap_traces, transfer_scenario,
    EnsembleOptions, GateSweepRow,
};
use crate::effective::{analytic_propagator, count_islands, spin_hamiltonian, swap_map, sweet_point, sweet_seed};
use crate::error::Result;
use crate::linalg::max_abs_diff4;
use crate::model::{build_chain_hamiltonian, draw_bond_disorder, ChainSpec, DisorderMode, JunctionSpec, SystemSpec};
use crate::open_system::{
    bell_transfer_protocol, build_kernel, build_layout, collective_modes, dissipative_trace, fit_decay_rate,
    remote_entanglement_protocol, steady_concurrence_estimate, AtomLayout, ChainBath, MasterEquation,
    SectoredDensityMatrix,
};
use crate::spectral::{chain_doublet, edge_amplitude_eta, edge_energy, extract_edge_doublet, parity, EdgeWindow};
use crate::dynamics::StateVector;

/// Base seed of every randomized check.
pub const REPRO_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    /// `PASS name: detail` or `FAIL name: detail`.
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub type Check = fn() -> Result<CheckResult>;

/// Every check in reporting order.
pub fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("edge_energy_exact", edge_energy_exact as Check),
        ("coupling_law", coupling_law),
        ("state_transfer", state_transfer),
        ("swap_fidelity", swap_fidelity),
        ("fidelity_map", fidelity_map),
        ("disorder_plateau", disorder_plateau),
        ("propagator_equivalence", propagator_equivalence),
        ("super_subradiance", super_subradiance),
        ("master_equation_sanity", master_equation_sanity),
        ("remote_entanglement", remote_entanglement),
        ("gate_time_tuning", gate_time_tuning),
        ("parity_robustness", parity_robustness),
    ]
}

/// Runs one check, turning an error into a failed verdict.
pub fn run_check(name: &'static str, check: Check) -> CheckResult {
    check().unwrap_or_else(|e| CheckResult::new(name, false, format!("error {}: {e}", e.name())))
}

pub fn run_all() -> Vec<CheckResult> {
    checks().into_iter().map(|(n, c)| run_check(n, c)).collect()
}

pub fn edge_energy_exact() -> Result<CheckResult> {
    let mut worst = 0.0_f64;
    for n in [3, 5, 7] {
        for j1 in [0.2, 0.3, 0.4, 0.5] {
            let d = chain_doublet(&ChainSpec::new(n, j1, 1.0)?)?;
            worst = worst.max((edge_energy(j1, 1.0, n)? - d.eps_s).abs());
        }
    }
    Ok(CheckResult::new(
        "edge_energy_exact",
        worst < 1e-9,
        format!("max |closed form - diagonalization| = {worst:.3e} (< 1e-9)"),
    ))
}

/// Half the splitting of the symmetric pair, read from the projected block.
fn symmetric_splitting(n: usize, j1: f64, k: f64) -> Result<f64> {
    let sys = SystemSpec::clean(n, j1, 1.0, JunctionSpec::uniform(k))?;
    let setup = crate::dynamics::GateModel::new(&sys)?.setup(&sys.junction)?;
    let h = setup.effective()?;
    let (a, b, c) = (h[(0, 0)], h[(3, 3)], h[(0, 3)]);
    Ok((0.25 * (a - b).powi(2) + c * c).sqrt())
}

pub fn coupling_law() -> Result<CheckResult> {
    let eta = edge_amplitude_eta(0.4, 1.0, 5)?;
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for k in [0.03, 0.05, 0.07] {
        let measured = symmetric_splitting(5, 0.4, k)?;
        let predicted = 2.0 * k * eta * eta;
        let rel = (measured - predicted).abs() / measured;
        worst = worst.max(rel);
        parts.push(format!("K={k}: g={measured:.5e} vs 2K eta^2={predicted:.5e}"));
    }
    Ok(CheckResult::new(
        "coupling_law",
        worst < 0.05,
        format!("{}; max rel err {worst:.3} (< 0.05)", parts.join(", ")),
    ))
}

pub fn state_transfer() -> Result<CheckResult> {
    let sys = SystemSpec::clean(5, 0.4, 1.0, JunctionSpec::uniform(0.07))?;
    let r = transfer_scenario(&sys, 200)?;
    Ok(CheckResult::new(
        "state_transfer",
        r.population_at_transfer >= 0.99 && r.dark_retention >= 0.99,
        format!(
            "P(2S) at T_t={:.2} is {:.5} (>= 0.99); min 1A retention over 2T_t {:.5} (>= 0.99)",
            r.transfer_time, r.population_at_transfer, r.dark_retention
        ),
    ))
}

pub fn swap_fidelity() -> Result<CheckResult> {
    let sp = sweet_point(2, 0.51, 1.0, 5)?;
    let sys = SystemSpec::clean(5, 0.51, 1.0, sp.junction)?;
    let traces = swap_traces(&sys, &sp, 100)?;
    let worst = traces.iter().map(|t| t.final_fidelity).fold(f64::INFINITY, f64::min);
    let states: Vec<String> = traces
        .iter()
        .map(|t| format!("{} {:.5}", t.label, t.final_fidelity))
        .collect();
    Ok(CheckResult::new(
        "swap_fidelity",
        sp.fidelity > 0.999 && worst > 0.99,
        format!(
            "K+={:.5} K-={:.5} T={:.2}: F={:.6} (> 0.999); states {} (> 0.99)",
            sp.k_plus,
            sp.k_minus,
            sp.t_swap,
            sp.fidelity,
            states.join(", ")
        ),
    ))
}

/// Cells above `threshold` whose mirror image (or a neighbour of it) is not.
pub fn mirror_mismatches(values: &[f64], n: usize, threshold: f64) -> usize {
    let hi = |r: isize, c: isize| -> bool {
        r >= 0 && c >= 0 && (r as usize) < n && (c as usize) < n && values[r as usize * n + c as usize] > threshold
    };
    let mut bad = 0;
    for r in 0..n as isize {
        for c in 0..n as isize {
            if !hi(r, c) {
                continue;
            }
            let near = (-1..=1).any(|dr| (-1..=1).any(|dc| hi(c + dr, r + dc)));
            if !near {
                bad += 1;
            }
        }
    }
    bad
}

pub const MAP_POINTS: usize = 41;

pub fn fidelity_map() -> Result<CheckResult> {
    let ks: Vec<f64> = (0..MAP_POINTS).map(|i| 0.1 * i as f64 / (MAP_POINTS - 1) as f64).collect();
    let cells = swap_map(0.51, 1.0, 5, &ks)?;
    let values: Vec<f64> = cells.iter().map(|c| c.fidelity).collect();
    let islands = count_islands(&values, MAP_POINTS, 0.99);
    let high = values.iter().filter(|v| **v > 0.99).count();
    let mismatch = mirror_mismatches(&values, MAP_POINTS, 0.99);
    Ok(CheckResult::new(
        "fidelity_map",
        islands >= 2 && mismatch == 0,
        format!("{MAP_POINTS}x{MAP_POINTS} grid: {islands} islands (>= 2), {high} cells > 0.99, {mismatch} cells without a mirror partner (0)"),
    ))
}

pub fn disorder_plateau() -> Result<CheckResult> {
    let sp = sweet_point(2, 0.51, 1.0, 5)?;
    let (k0, _, _) = sweet_seed(2, 0.51, 1.0, 5)?;
    let base = SystemSpec::clean(5, 0.51, 1.0, sp.junction)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for frac in [0.25, 0.5, 1.0] {
        let mut opts = EnsembleOptions {
            delta: frac * k0,
            n_instances: 100,
            seed: REPRO_SEED,
            mode: DisorderMode::Mirrored,
            recalibrate: true,
        };
        let with = disorder_ensemble(&base, &sp, &opts)?;
        opts.recalibrate = false;
        let without = disorder_ensemble(&base, &sp, &opts)?;
        ok &= with.mean_fidelity > 0.99 && with.std_fidelity < 0.01;
        if frac >= 0.5 {
            ok &= without.mean_fidelity < with.mean_fidelity && without.std_fidelity > with.std_fidelity;
        }
        parts.push(format!(
            "{frac}K-0: recal {:.5}+-{:.1e}, fixed {:.5}+-{:.1e}",
            with.mean_fidelity, with.std_fidelity, without.mean_fidelity, without.std_fidelity
        ));
    }
    Ok(CheckResult::new("disorder_plateau", ok, parts.join("; ")))
}

/// `exp(-i H t)` by scaling and squaring of a Taylor series.
pub fn expm_taylor(h: &Matrix4<C64>, time: f64) -> Matrix4<C64> {
    let a = h * C64::new(0.0, -time);
    let norm: f64 = a.iter().map(|z| z.norm()).sum();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * C64::new(scale, 0.0);
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..=24 {
        term = term * a * C64::new(1.0 / k as f64, 0.0);
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

pub fn propagator_equivalence() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(REPRO_SEED);
    let mut worst = 0.0_f64;
    let mut cross = 0.0_f64;
    for _ in 0..1000 {
        let p = crate::effective::SpinModelParams::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        );
        let time = rng.random_range(0.0..20.0);
        let u = analytic_propagator(&p, time);
        worst = worst.max(max_abs_diff4(&u, &expm_taylor(&spin_hamiltonian(&p), time)));
        for (r, c) in [(0, 1), (0, 2), (3, 1), (3, 2)] {
            cross = cross.max(u[(r, c)].norm()).max(u[(c, r)].norm());
        }
    }
    Ok(CheckResult::new(
        "propagator_equivalence",
        worst < 1e-10 && cross == 0.0,
        format!("1000 draws: max |analytic - expm| = {worst:.3e} (< 1e-10); max Pi/Sigma cross element {cross:e} (0)"),
    ))
}

fn decay_fit_for_symmetric(bath: &ChainBath, gamma_s: f64) -> Result<f64> {
    let rho0 = SectoredDensityMatrix::from_real(&bath.doublet.psi_s)?;
    let window = 2.0 / gamma_s;
    let trace = dissipative_trace(bath, &rho0, window, 200)?;
    let t: Vec<f64> = trace.rows.iter().map(|r| r.time).collect();
    let p: Vec<f64> = trace.rows.iter().map(|r| r.pop_s).collect();
    Ok(fit_decay_rate(&t, &p, window))
}

pub fn super_subradiance() -> Result<CheckResult> {
    let gamma0 = 0.035;
    let bath = ChainBath::new(&ChainSpec::new(5, 0.25, 1.0)?, gamma0)?;
    let modes = collective_modes(&bath.kernel)?;
    let bright: Vec<f64> = modes.iter().map(|m| m.rate).filter(|r| *r > 1e-10 * gamma0).collect();
    let rates_ok = bright.len() == 2
        && (bright[0] - 2.0 * gamma0).abs() < 1e-10 * gamma0
        && (bright[1] - 8.0 * gamma0).abs() < 1e-10 * gamma0;
    let (gamma_a, gamma_s) = bath.edge_decay()?;
    let fitted = decay_fit_for_symmetric(&bath, gamma_s)?;
    let fit_err = (fitted - gamma_s).abs() / gamma_s;
    Ok(CheckResult::new(
        "super_subradiance",
        rates_ok && gamma_a < 1e-3 * gamma0 && fit_err < 0.05,
        format!(
            "bright rates {:?}/gamma0 (2, 8); gamma_A = {:.4} gamma0 (< 1e-3); gamma_S = {:.4} gamma0, fitted {:.4} gamma0 (rel err {:.3} < 0.05)",
            bright.iter().map(|r| r / gamma0).collect::<Vec<_>>(),
            gamma_a / gamma0,
            gamma_s / gamma0,
            fitted / gamma0,
            fit_err
        ),
    ))
}

pub fn master_equation_sanity() -> Result<CheckResult> {
    let gamma0 = 0.035;
    let mut trace_err = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    let bath = ChainBath::new(&ChainSpec::new(5, 0.25, 1.0)?, gamma0)?;
    for psi in [&bath.doublet.psi_s, &bath.doublet.psi_a] {
        let t = dissipative_trace(&bath, &SectoredDensityMatrix::from_real(psi)?, 10.0 / gamma0, 200)?;
        trace_err = trace_err.max(t.max_trace_error);
        min_eig = min_eig.min(t.min_eigenvalue);
    }
    let t = remote_entanglement_protocol(&ChainSpec::new(5, 0.25, 1.0)?, gamma0, 500.0, 200)?;
    trace_err = trace_err.max(t.max_trace_error);
    min_eig = min_eig.min(t.min_eigenvalue);
    let sys = SystemSpec::clean(3, 0.25, 1.0, JunctionSpec::z2(0.1, 0.0))?;
    let b = bell_transfer_protocol(&sys, gamma0, None, 200)?;
    trace_err = trace_err.max(b.max_trace_error);
    min_eig = min_eig.min(b.min_eigenvalue);

    let kernel = build_kernel(&AtomLayout { positions: vec![0.0] }, 1.0)?;
    let eq = MasterEquation::new(&DMatrix::zeros(1, 1), &kernel)?;
    let times: Vec<f64> = (0..=100).map(|i| 0.05 * i as f64).collect();
    let states = eq.trajectory(&SectoredDensityMatrix::pure(&StateVector::basis(1, 0)), &times, 1.0)?;
    let single = times
        .iter()
        .zip(&states)
        .map(|(t, s)| (s.rho_ee[(0, 0)].re - (-t).exp()).abs())
        .fold(0.0, f64::max);
    Ok(CheckResult::new(
        "master_equation_sanity",
        trace_err < 1e-8 && min_eig >= -1e-8 && single < 1e-6,
        format!(
            "max trace error {trace_err:.2e} (< 1e-8); min eigenvalue {min_eig:.2e} (>= -1e-8); single-atom decay error {single:.2e} (< 1e-6)"
        ),
    ))
}

pub const ENTANGLE_T_MAX: f64 = 2000.0;

pub fn remote_entanglement() -> Result<CheckResult> {
    let chain = ChainSpec::new(5, 0.25, 1.0)?;
    let trace = remote_entanglement_protocol(&chain, 0.035, ENTANGLE_T_MAX, 4000)?;
    let c0 = trace.rows[0].concurrence;
    let c_max = trace.rows.iter().map(|r| r.concurrence).fold(0.0, f64::max);
    let late: Vec<f64> = trace
        .rows
        .iter()
        .filter(|r| r.time >= 0.25 * ENTANGLE_T_MAX)
        .map(|r| r.concurrence)
        .collect();
    let mean = late.iter().sum::<f64>() / late.len() as f64;
    let expected = steady_concurrence_estimate(&chain_doublet(&chain)?);
    let rel = (mean - expected).abs() / expected;
    Ok(CheckResult::new(
        "remote_entanglement",
        c0 == 0.0 && (c_max - 0.49).abs() <= 0.05 && rel < 0.1,
        format!(
            "C(0) = {c0}; C_max = {c_max:.4} (0.49 +- 0.05); late mean {mean:.4} vs 0.5|<S|Psi+>|^4 = {expected:.4} (rel err {rel:.3} < 0.1)"
        ),
    ))
}

/// Sweet-line sweeps used by the gate-time check.
pub fn gate_time_windows() -> [(usize, Vec<f64>); 2] {
    let span = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    };
    [(3, span(0.06, 0.18, 7)), (5, span(0.06, 0.18, 7))]
}

fn central(rows: &[GateSweepRow]) -> &[GateSweepRow] {
    let n = rows.len();
    &rows[n / 4..n - n / 4]
}

pub fn gate_time_tuning() -> Result<CheckResult> {
    let mut ok = true;
    let mut slopes = Vec::new();
    let mut parts = Vec::new();
    for (n, ks) in gate_time_windows() {
        let rows = gate_time_sweep(&[1.0], &ks, n, 1)?;
        let decreasing = rows.windows(2).all(|w| w[1].t_swap < w[0].t_swap);
        let mid = central(&rows);
        let min_f = mid.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);
        let x: Vec<f64> = rows.iter().map(|r| r.k_plus).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.t_swap).collect();
        let slope = log_log_slope(&x, &y);
        ok &= decreasing && min_f > 0.99 && slope < 0.0;
        slopes.push(slope);
        parts.push(format!(
            "N={n}: T decreasing {decreasing}, central min F {min_f:.5}, slope {slope:.3}"
        ));
    }
    ok &= slopes[1] < slopes[0];
    Ok(CheckResult::new("gate_time_tuning", ok, parts.join("; ")))
}

pub fn parity_robustness() -> Result<CheckResult> {
    let gamma0 = 0.035;
    let n = 5;
    let modes = collective_modes(&build_kernel(&build_layout(n)?, gamma0)?)?;
    let mut flips = 0;
    let mut worst_gamma_a = 0.0_f64;
    let mut sum_gamma_a = 0.0;
    let mut min_ps = f64::INFINITY;
    let mut max_pa = f64::NEG_INFINITY;
    let seeds = instance_seeds(REPRO_SEED, 100);
    for &s in &seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let chain = ChainSpec::new(n, 0.25, 1.0)?.with_disorder(draw_bond_disorder(n, 0.1, &mut rng))?;
        let d = extract_edge_doublet(&build_chain_hamiltonian(&chain)?, EdgeWindow::Auto)?;
        let (ps, pa) = (parity(&d.psi_s)?, parity(&d.psi_a)?);
        if ps <= 0.0 || pa >= 0.0 {
            flips += 1;
        }
        min_ps = min_ps.min(ps);
        max_pa = max_pa.max(pa);
        let (ga, _) = crate::open_system::effective_edge_decay(&d, &modes);
        worst_gamma_a = worst_gamma_a.max(ga);
        sum_gamma_a += ga;
    }
    Ok(CheckResult::new(
        "parity_robustness",
        flips == 0 && worst_gamma_a < 0.05 * gamma0,
        format!(
            "100 instances: {flips} sign flips (0), min P(S) {min_ps:.4}, max P(A) {max_pa:.4}; gamma_A max {:.4} gamma0, mean {:.4} gamma0 (< 0.05)",
            worst_gamma_a / gamma0,
            sum_gamma_a / seeds.len() as f64 / gamma0
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_expm_of_diagonal() {
        let h = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -2.0, 0.5, 3.0).map(C64::from));
        let u = expm_taylor(&h, 7.0);
        for (i, e) in [1.0, -2.0, 0.5, 3.0].iter().enumerate() {
            assert!((u[(i, i)] - C64::from_polar(1.0, -e * 7.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn mirror_test_on_symmetric_grid() {
        #[rustfmt::skip]
        let g = [
            0.0, 1.0, 0.0,
            1.0, 0.0, 0.0,
            0.0, 0.0, 0.0,
        ];
        assert_eq!(mirror_mismatches(&g, 3, 0.5), 0);
        let lone = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(mirror_mismatches(&lone, 3, 0.5), 1);
    }
}
