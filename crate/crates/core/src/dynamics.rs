//! Closed-system propagation, gate fidelities, disorder ensembles and gate-time sweeps.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::effective::{
    self, recalibrate_with_seed, sweet_seed, swap_gate, SweetPoint, CALIBRATION_REQUIRED,
};
use crate::error::{Error, Result};
use crate::linalg::{ensure_symmetric, sorted_eigh};
use crate::model::{
    build_total_hamiltonian, draw_system_disorder, ChainSpec, DisorderMode, DisorderSpec,
    JunctionSpec, SystemSpec,
};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::spectral::{
    bare_logical_basis, edge_amplitude_eta, edge_energy, manifold_from_eigh, EdgeManifold, EdgeWindow,
};

const NORM_TOL: f64 = 1e-8;

/// Single-excitation state over the sites of one or two chains.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: DVector<C64>,
}

impl StateVector {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("state must be normalized (|psi| = {norm})")));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(psi: &DVector<f64>) -> Result<Self> {
        Self::new(psi.map(|x| C64::new(x, 0.0)))
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut amplitudes = DVector::zeros(n);
        amplitudes[i] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<other|self>`.
    pub fn overlap(&self, other: &StateVector) -> C64 {
        other.amplitudes.dotc(&self.amplitudes)
    }

    /// `|<phi|self>|^2` for a real state `phi`.
    pub fn population_on(&self, phi: &DVector<f64>) -> f64 {
        phi.iter()
            .zip(self.amplitudes.iter())
            .map(|(p, a)| a * *p)
            .sum::<C64>()
            .norm_sqr()
    }
}

/// `exp(-i H t)` through one diagonalization of `H`.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Propagator {
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        ensure_symmetric(h)?;
        let (values, vectors) = sorted_eigh(h);
        Ok(Self { values, vectors })
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.values.iter().map(|e| C64::from_polar(1.0, -e * t)).collect()
    }

    pub fn evolve(&self, psi: &StateVector, t: f64) -> StateVector {
        let phases = self.phases(t);
        let n = self.values.len();
        let mut coeff: Vec<C64> = (0..n)
            .map(|k| {
                self.vectors
                    .column(k)
                    .iter()
                    .zip(psi.amplitudes.iter())
                    .map(|(v, a)| a * *v)
                    .sum::<C64>()
            })
            .collect();
        for (c, p) in coeff.iter_mut().zip(&phases) {
            *c *= p;
        }
        let amplitudes = DVector::from_fn(n, |i, _| {
            (0..n).map(|k| coeff[k] * self.vectors[(i, k)]).sum::<C64>()
        });
        StateVector { amplitudes }
    }

    /// `<psi|H|psi>`.
    pub fn energy(&self, psi: &StateVector) -> f64 {
        (0..self.values.len())
            .map(|k| {
                let c: C64 = self
                    .vectors
                    .column(k)
                    .iter()
                    .zip(psi.amplitudes.iter())
                    .map(|(v, a)| a * *v)
                    .sum();
                self.values[k] * c.norm_sqr()
            })
            .sum()
    }
}

pub fn evolve_unitary(h: &DMatrix<f64>, psi0: &StateVector, time: f64) -> Result<StateVector> {
    if psi0.len() != h.nrows() {
        return Err(Error::InvalidArgument(format!(
            "state has {} amplitudes, Hamiltonian is {}x{}",
            psi0.len(),
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(Propagator::new(h)?.evolve(psi0, time))
}

/// `|<target|psi>|^2`.
pub fn state_fidelity(psi: &StateVector, target: &StateVector) -> f64 {
    psi.overlap(target).norm_sqr()
}

/// Haar-averaged fidelity of a (possibly leaky) logical block `gate` to a unitary `target`.
pub fn gate_fidelity(gate: &Matrix4<C64>, target: &Matrix4<C64>) -> f64 {
    let m = target.adjoint() * gate;
    let tr = m.trace().norm_sqr();
    let tr_mm = (m * m.adjoint()).trace().re;
    (tr + tr_mm) / 20.0
}

/// Logical block `D^T exp(-iHt) D` of a propagator for the manifold columns.
#[derive(Debug, Clone)]
pub struct LogicalPropagator {
    values: Vec<f64>,
    /// `V^T D`, eigenbasis components of the four logical states.
    components: DMatrix<f64>,
}

impl LogicalPropagator {
    pub fn new(propagator: &Propagator, basis: &DMatrix<f64>) -> Self {
        Self {
            values: propagator.values.clone(),
            components: propagator.vectors.transpose() * basis,
        }
    }

    pub fn gate(&self, t: f64) -> Matrix4<C64> {
        let mut g = Matrix4::zeros();
        for (k, e) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -e * t);
            let row = self.components.row(k);
            for a in 0..4 {
                for b in 0..4 {
                    g[(a, b)] += phase * (row[a] * row[b]);
                }
            }
        }
        g
    }
}

pub fn average_gate_fidelity(
    h_total: &DMatrix<f64>,
    manifold: &EdgeManifold,
    gate_time: f64,
    target: &Matrix4<C64>,
) -> Result<f64> {
    if manifold.gap <= 0.0 {
        return Err(Error::ManifoldLeakage { gap: manifold.gap });
    }
    let propagator = Propagator::new(h_total)?;
    Ok(gate_fidelity(
        &LogicalPropagator::new(&propagator, &manifold.states).gate(gate_time),
        target,
    ))
}

/// A fixed pair of chains whose junction is varied, as in a calibration loop.
#[derive(Debug, Clone)]
pub struct GateModel {
    pub system: SystemSpec,
    chains: DMatrix<f64>,
    bare: DMatrix<f64>,
    window: EdgeWindow,
}

/// Everything needed to evolve one junction setting.
#[derive(Debug, Clone)]
pub struct GateSetup {
    pub hamiltonian: DMatrix<f64>,
    pub propagator: Propagator,
    pub manifold: EdgeManifold,
    pub logical: LogicalPropagator,
}

impl GateSetup {
    pub fn fidelity(&self, t: f64, target: &Matrix4<C64>) -> f64 {
        gate_fidelity(&self.logical.gate(t), target)
    }

    /// Projected Hamiltonian in the manifold basis.
    pub fn effective(&self) -> Result<Matrix4<f64>> {
        effective::project_effective(&self.hamiltonian, &self.manifold)
    }
}

impl GateModel {
    pub fn new(system: &SystemSpec) -> Result<Self> {
        let chains = build_total_hamiltonian(&system.with_junction(JunctionSpec::zero()))?;
        let bare = bare_logical_basis(&chains, EdgeWindow::Auto)?;
        Ok(Self {
            system: system.clone(),
            chains,
            bare,
            window: EdgeWindow::Auto,
        })
    }

    pub fn hamiltonian(&self, junction: &JunctionSpec) -> DMatrix<f64> {
        let mut h = self.chains.clone();
        let [s1, s1b, s2, s2b] = self.system.central_sites();
        for (k, (a, b)) in junction.k.iter().zip([(s1, s2), (s1b, s2), (s1, s2b), (s1b, s2b)]) {
            h[(a, b)] += *k;
            h[(b, a)] += *k;
        }
        h
    }

    pub fn setup(&self, junction: &JunctionSpec) -> Result<GateSetup> {
        junction.validate()?;
        let hamiltonian = self.hamiltonian(junction);
        let propagator = Propagator::new(&hamiltonian)?;
        let manifold = manifold_from_eigh(
            &propagator.values,
            &propagator.vectors,
            self.bare.clone(),
            self.window,
        )?;
        if manifold.gap <= 0.0 {
            return Err(Error::ManifoldLeakage { gap: manifold.gap });
        }
        let logical = LogicalPropagator::new(&propagator, &manifold.states);
        Ok(GateSetup {
            hamiltonian,
            propagator,
            manifold,
            logical,
        })
    }

    pub fn swap_fidelity(&self, junction: &JunctionSpec, t: f64) -> Result<f64> {
        Ok(self.setup(junction)?.fidelity(t, &swap_gate()))
    }
}

/// One row of a population trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub time: f64,
    /// Populations of (1S, 1A, 2A, 2S).
    pub populations: [f64; 4],
    pub fidelity: f64,
}

/// Evolves `psi0` and records manifold populations and the overlap with `target`.
pub fn population_trace(
    setup: &GateSetup,
    psi0: &StateVector,
    target: &StateVector,
    t_max: f64,
    n_steps: usize,
) -> Vec<TraceRow> {
    let steps = n_steps.max(1);
    (0..=steps)
        .map(|i| {
            let time = t_max * i as f64 / steps as f64;
            let psi = setup.propagator.evolve(psi0, time);
            let mut populations = [0.0; 4];
            for (a, p) in populations.iter_mut().enumerate() {
                *p = psi.population_on(&setup.manifold.state(a));
            }
            TraceRow {
                time,
                populations,
                fidelity: state_fidelity(&psi, target),
            }
        })
        .collect()
}

/// Logical state `sum_a c_a |state_a>` in the site basis.
pub fn logical_state(manifold: &EdgeManifold, coefficients: &[C64; 4]) -> Result<StateVector> {
    let n = manifold.states.nrows();
    let amplitudes = DVector::from_fn(n, |i, _| {
        (0..4).map(|a| coefficients[a] * manifold.states[(i, a)]).sum::<C64>()
    });
    StateVector::new(amplitudes)
}

/// Result of the state-transfer scenario.
#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    /// Measured `<1S|H|2S>`.
    pub coupling: f64,
    pub transfer_time: f64,
    pub population_at_transfer: f64,
    /// Minimum population kept on 1A over two transfer times (C4 junction).
    pub dark_retention: f64,
    pub trace: Vec<TraceRow>,
}

/// Transfer from 1S to 2S through the junction of `system`.
pub fn transfer_scenario(system: &SystemSpec, n_steps: usize) -> Result<TransferReport> {
    let model = GateModel::new(system)?;
    let setup = model.setup(&system.junction)?;
    let h_eff = setup.effective()?;
    let coupling = h_eff[(0, 3)].abs();
    let transfer_time = effective::transfer_time(coupling)?;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let psi_1s = logical_state(&setup.manifold, &[one, zero, zero, zero])?;
    let psi_1a = logical_state(&setup.manifold, &[zero, one, zero, zero])?;
    let psi_2s = logical_state(&setup.manifold, &[zero, zero, zero, one])?;
    let trace = population_trace(&setup, &psi_1s, &psi_2s, 2.0 * transfer_time, n_steps);
    let population_at_transfer = state_fidelity(&setup.propagator.evolve(&psi_1s, transfer_time), &psi_2s);
    let dark = population_trace(&setup, &psi_1a, &psi_1a, 2.0 * transfer_time, n_steps.max(200));
    let dark_retention = dark.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);
    Ok(TransferReport {
        coupling,
        transfer_time,
        population_at_transfer,
        dark_retention,
        trace,
    })
}

/// Initial logical states used for SWAP traces: 2S, 2A and `(2S + 2A)/sqrt(2)`.
pub fn swap_probe_states() -> [(&'static str, [C64; 4]); 3] {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [("2S", [z, z, z, o]), ("2A", [z, z, o, z]), ("2S+2A", [z, z, h, h])]
}

#[derive(Debug, Clone, Serialize)]
pub struct SwapTrace {
    pub label: &'static str,
    pub final_fidelity: f64,
    pub rows: Vec<TraceRow>,
}

/// SWAP evolution of the probe states over one gate period.
pub fn swap_traces(system: &SystemSpec, sweet: &SweetPoint, n_steps: usize) -> Result<Vec<SwapTrace>> {
    let setup = GateModel::new(system)?.setup(&sweet.junction)?;
    let gate = swap_gate();
    swap_probe_states()
        .into_iter()
        .map(|(label, c)| {
            let psi0 = logical_state(&setup.manifold, &c)?;
            let mut swapped = [C64::new(0.0, 0.0); 4];
            for (a, s) in swapped.iter_mut().enumerate() {
                *s = (0..4).map(|b| gate[(a, b)] * c[b]).sum();
            }
            let target = logical_state(&setup.manifold, &swapped)?;
            let rows = population_trace(&setup, &psi0, &target, sweet.t_swap, n_steps);
            let final_fidelity = rows.last().map(|r| r.fidelity).unwrap_or(0.0);
            Ok(SwapTrace {
                label,
                final_fidelity,
                rows,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstanceResult {
    pub seed: u64,
    pub fidelity: f64,
    /// Recalibration failed; `fidelity` is that of the unrefined seed.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub delta: f64,
    pub recalibrated: bool,
    pub n_instances: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub per_instance: Vec<InstanceResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    pub delta: f64,
    pub n_instances: usize,
    pub seed: u64,
    pub mode: DisorderMode,
    pub recalibrate: bool,
}

/// Per-instance seeds derived from one base seed.
pub fn instance_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

fn disordered_system(base: &SystemSpec, disorder: &DisorderSpec) -> Result<SystemSpec> {
    let n = base.n_cells();
    let (d1, d2) = draw_system_disorder(n, disorder)?;
    let clean = ChainSpec::new(n, base.chain1.j1, base.chain1.j2)?;
    SystemSpec::new(
        clean.clone().with_disorder(d1)?,
        clean.with_disorder(d2)?,
        base.junction,
    )
}

fn instance_fidelity(
    base: &SystemSpec,
    sweet: &SweetPoint,
    opts: &EnsembleOptions,
    seed: u64,
) -> Result<InstanceResult> {
    let disorder = DisorderSpec {
        delta: opts.delta,
        seed,
        mode: opts.mode,
    };
    let system = disordered_system(base, &disorder)?;
    if !opts.recalibrate {
        let fidelity = GateModel::new(&system)?.swap_fidelity(&sweet.junction, sweet.t_swap)?;
        return Ok(InstanceResult {
            seed,
            fidelity,
            flagged: false,
        });
    }
    let (point, seed_fidelity) = recalibrate_with_seed(&system, sweet.k_index)?;
    let flagged = point.fidelity < CALIBRATION_REQUIRED;
    Ok(InstanceResult {
        seed,
        fidelity: if flagged { seed_fidelity } else { point.fidelity },
        flagged,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// SWAP fidelity statistics over bond-disorder realizations.
///
/// Without recalibration every instance runs at the clean sweet point's
/// junction and gate time. Instances run in parallel and are reported in
/// seed order, so the report only depends on the options.
pub fn disorder_ensemble(base: &SystemSpec, sweet: &SweetPoint, opts: &EnsembleOptions) -> Result<EnsembleReport> {
    if !(opts.delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be >= 0, got {}", opts.delta)));
    }
    let seeds = instance_seeds(opts.seed, opts.n_instances);
    let per_instance = seeds
        .par_iter()
        .map(|&s| instance_fidelity(base, sweet, opts, s))
        .collect::<Result<Vec<_>>>()?;
    let fid: Vec<f64> = per_instance.iter().map(|r| r.fidelity).collect();
    let (mean_fidelity, std_fidelity) = mean_std(&fid);
    Ok(EnsembleReport {
        delta: opts.delta,
        recalibrated: opts.recalibrate,
        n_instances: opts.n_instances,
        mean_fidelity,
        std_fidelity,
        per_instance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateSweepRow {
    pub j2: f64,
    pub k_plus: f64,
    pub j1_opt: f64,
    pub t_swap: f64,
    pub fidelity: f64,
    pub calibrated: bool,
}

/// `j1` on which the sweet-line relation `eps_S = 2 eta^2 (4k-1) K-` holds.
pub fn sweet_line_j1(k_minus: f64, j2: f64, n_cells: usize, k_index: usize) -> Option<f64> {
    let limit = j2 * n_cells as f64 / (n_cells as f64 + 1.0);
    let f = |j1: f64| -> Option<f64> {
        let eps = edge_energy(j1, j2, n_cells).ok()?;
        let eta = edge_amplitude_eta(j1, j2, n_cells).ok()?;
        Some(eps.abs() - 2.0 * eta * eta * (4.0 * k_index as f64 - 1.0) * k_minus)
    };
    // scan for the first sign change from the dimerized side
    let grid = 400;
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..grid {
        let j1 = limit * i as f64 / grid as f64;
        let Some(v) = f(j1) else { continue };
        if let Some((pj, pv)) = prev {
            if pv < 0.0 && v >= 0.0 {
                let (mut lo, mut hi) = (pj, j1);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid)? < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
        }
        prev = Some((j1, v));
    }
    None
}

/// Gate time along the sweet line `K- = K+/3`, with `j1` tuned per point.
pub fn gate_time_sweep(
    j2_values: &[f64],
    k_plus_values: &[f64],
    n_cells: usize,
    k_index: usize,
) -> Result<Vec<GateSweepRow>> {
    if k_index == 0 {
        return Err(Error::InvalidArgument("k_index must be >= 1".into()));
    }
    let jobs: Vec<(f64, f64)> = j2_values
        .iter()
        .flat_map(|&j2| k_plus_values.iter().map(move |&kp| (j2, kp)))
        .collect();
    jobs.par_iter()
        .map(|&(j2, k_plus)| sweep_point(j2, k_plus, n_cells, k_index))
        .collect()
}

fn sweep_point(j2: f64, k_plus: f64, n_cells: usize, k_index: usize) -> Result<GateSweepRow> {
    let k_minus = k_plus / 3.0;
    let failed = GateSweepRow {
        j2,
        k_plus,
        j1_opt: f64::NAN,
        t_swap: f64::NAN,
        fidelity: 0.0,
        calibrated: false,
    };
    let Some(j1_seed) = sweet_line_j1(k_minus, j2, n_cells, k_index) else {
        return Ok(failed);
    };
    let Ok((_, _, t_seed)) = sweet_seed(k_index, j1_seed, j2, n_cells) else {
        return Ok(failed);
    };
    let junction = JunctionSpec::z2(k_plus, k_minus);
    let limit = j2 * n_cells as f64 / (n_cells as f64 + 1.0);
    let objective = |x: &[f64]| -> f64 {
        let system = match SystemSpec::clean(n_cells, x[0], j2, junction) {
            Ok(s) => s,
            Err(_) => return 1.0,
        };
        GateModel::new(&system)
            .and_then(|m| m.swap_fidelity(&junction, x[1]))
            .map(|f| 1.0 - f)
            .unwrap_or(1.0)
    };
    let lower = [0.9 * j1_seed, 0.9 * t_seed];
    let upper = [(1.1 * j1_seed).min(0.999 * limit), 1.1 * t_seed];
    let best = nelder_mead(objective, &[j1_seed, t_seed], &lower, &upper, NelderMeadOptions::default());
    let fidelity = 1.0 - best.value;
    Ok(GateSweepRow {
        j2,
        k_plus,
        j1_opt: best.x[0],
        t_swap: best.x[1],
        fidelity,
        calibrated: fidelity >= CALIBRATION_REQUIRED,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
