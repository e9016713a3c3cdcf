//! Waveguide-coupled chains: collective decay, the excitation-sectored master
//! equation, concurrence of the edge pair, and entanglement protocols.
//!
//! With at most one excitation and no drive, the master equation closes on
//! the single-excitation block `rho_ee` and the ground population:
//! `rho_ee' = -i (H_eff rho_ee - rho_ee H_eff^dag)` with
//! `H_eff = H + H_nl - (i/2) Gamma`, and `p_g' = Tr(Gamma rho_ee)`.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics::{GateModel, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_eigh, sorted_eigh};
use crate::model::{build_chain_hamiltonian, build_total_hamiltonian, ChainSpec, SystemSpec};
use crate::spectral::{extract_edge_doublet, EdgeDoublet, EdgeWindow};

const PSD_TOL: f64 = 1e-10;
const STEP_DRIFT_TOL: f64 = 1e-9;
const DT_FLOOR: f64 = 1e-8;

/// Atom coordinates along the waveguide, in units of the resonant wavelength.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomLayout {
    pub positions: Vec<f64>,
}

/// Edge atoms a quarter wavelength from the bulk, bulk atoms half a wavelength apart.
pub fn build_layout(n_cells: usize) -> Result<AtomLayout> {
    if n_cells == 0 {
        return Err(Error::InvalidArgument("layout needs at least one cell".into()));
    }
    let n = 2 * n_cells;
    let mut positions = Vec::with_capacity(n);
    positions.push(0.0);
    positions.push(0.25);
    for j in 2..n {
        let step = if j == n - 1 { 0.25 } else { 0.5 };
        positions.push(positions[j - 1] + step);
    }
    positions.truncate(n);
    Ok(AtomLayout { positions })
}

/// Coherent (`g`) and dissipative (`gamma`) couplings mediated by the waveguide.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipationKernel {
    pub g: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub gamma0: f64,
}

impl DissipationKernel {
    pub fn zero(n: usize) -> Self {
        Self {
            g: DMatrix::zeros(n, n),
            gamma: DMatrix::zeros(n, n),
            gamma0: 0.0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.gamma.nrows()
    }

    /// Two chains on independent waveguides.
    pub fn block_diagonal(a: &Self, b: &Self) -> Self {
        let (na, nb) = (a.n_sites(), b.n_sites());
        let mut g = DMatrix::zeros(na + nb, na + nb);
        let mut gamma = g.clone();
        g.view_mut((0, 0), (na, na)).copy_from(&a.g);
        g.view_mut((na, na), (nb, nb)).copy_from(&b.g);
        gamma.view_mut((0, 0), (na, na)).copy_from(&a.gamma);
        gamma.view_mut((na, na), (nb, nb)).copy_from(&b.gamma);
        Self {
            g,
            gamma,
            gamma0: a.gamma0.max(b.gamma0),
        }
    }

    pub fn min_gamma_eigenvalue(&self) -> f64 {
        sorted_eigh(&self.gamma).0.first().copied().unwrap_or(0.0)
    }
}

/// `g_ij = gamma0 sin(2 pi d)/2`, `gamma_ij = gamma0 cos(2 pi d)`.
pub fn build_kernel(layout: &AtomLayout, gamma0: f64) -> Result<DissipationKernel> {
    if !(gamma0 >= 0.0 && gamma0.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma0 must be >= 0, got {gamma0}")));
    }
    let x = &layout.positions;
    let n = x.len();
    let phase = |i: usize, j: usize| 2.0 * std::f64::consts::PI * (x[i] - x[j]).abs();
    let g = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.5 * gamma0 * phase(i, j).sin() });
    let gamma = DMatrix::from_fn(n, n, |i, j| if i == j { gamma0 } else { gamma0 * phase(i, j).cos() });
    let kernel = DissipationKernel { g, gamma, gamma0 };
    let min_eigenvalue = kernel.min_gamma_eigenvalue();
    if min_eigenvalue < -PSD_TOL * gamma0.max(f64::MIN_POSITIVE) {
        return Err(Error::NonPsdKernel { min_eigenvalue });
    }
    Ok(kernel)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveMode {
    pub rate: f64,
    pub vector: DVector<f64>,
}

/// Eigenmodes of the decay matrix, sorted by rate.
pub fn collective_modes(kernel: &DissipationKernel) -> Result<Vec<CollectiveMode>> {
    let (rates, vectors) = sorted_eigh(&kernel.gamma);
    if let Some(&min) = rates.first() {
        if min < -PSD_TOL * kernel.gamma0.max(f64::MIN_POSITIVE) {
            return Err(Error::NonPsdKernel { min_eigenvalue: min });
        }
    }
    Ok(rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| CollectiveMode {
            rate: rate.max(0.0),
            vector: vectors.column(i).into_owned(),
        })
        .collect())
}

/// `sum_m Gamma_m |<m|psi>|^2`.
pub fn mode_decay(psi: &DVector<f64>, modes: &[CollectiveMode]) -> f64 {
    modes.iter().map(|m| m.rate * m.vector.dot(psi).powi(2)).sum()
}

/// Effective decay rates `(gamma_A, gamma_S)` of a chain's edge states.
pub fn effective_edge_decay(doublet: &EdgeDoublet, modes: &[CollectiveMode]) -> (f64, f64) {
    (mode_decay(&doublet.psi_a, modes), mode_decay(&doublet.psi_s, modes))
}

/// State restricted to at most one excitation: the excited block and the ground weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SectoredDensityMatrix {
    pub rho_ee: DMatrix<C64>,
    pub p_ground: f64,
}

impl SectoredDensityMatrix {
    pub fn pure(psi: &StateVector) -> Self {
        let a = &psi.amplitudes;
        Self {
            rho_ee: a * a.adjoint(),
            p_ground: 0.0,
        }
    }

    pub fn from_real(psi: &DVector<f64>) -> Result<Self> {
        Ok(Self::pure(&StateVector::from_real(psi)?))
    }

    pub fn n_sites(&self) -> usize {
        self.rho_ee.nrows()
    }

    /// `Tr(rho_ee) + p_ground`.
    pub fn total_trace(&self) -> f64 {
        self.rho_ee.trace().re + self.p_ground
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho_ee + self.rho_ee.adjoint()) * C64::new(0.5, 0.0);
        hermitian_eigenvalues(&herm).first().copied().unwrap_or(0.0)
    }

    /// `<phi|rho_ee|phi>` for a real state.
    pub fn population_on(&self, phi: &DVector<f64>) -> f64 {
        let c = phi.map(|x| C64::new(x, 0.0));
        c.dotc(&(&self.rho_ee * &c)).re
    }

    /// Populations of `(|e_i> +- |e_j>)/sqrt(2)`.
    pub fn bell_populations(&self, i: usize, j: usize) -> (f64, f64) {
        let diag = self.rho_ee[(i, i)].re + self.rho_ee[(j, j)].re;
        let coh = self.rho_ee[(i, j)].re;
        (0.5 * diag + coh, 0.5 * diag - coh)
    }

    /// Two-atom state of sites `i`, `j` in the basis `|gg>, |g e_j>, |e_i g>, |e_i e_j>`.
    pub fn reduced_pair(&self, i: usize, j: usize) -> Matrix4<C64> {
        let mut r = Matrix4::zeros();
        let rest: f64 = (0..self.n_sites())
            .filter(|&k| k != i && k != j)
            .map(|k| self.rho_ee[(k, k)].re)
            .sum();
        r[(0, 0)] = C64::new(self.p_ground + rest, 0.0);
        r[(1, 1)] = self.rho_ee[(j, j)];
        r[(2, 2)] = self.rho_ee[(i, i)];
        r[(1, 2)] = self.rho_ee[(j, i)];
        r[(2, 1)] = self.rho_ee[(i, j)];
        r
    }
}

/// `2 |rho_ij|`, the concurrence of a single-excitation pair.
pub fn concurrence_shortcut(rho: &SectoredDensityMatrix, i: usize, j: usize) -> f64 {
    2.0 * rho.rho_ee[(i, j)].norm()
}

/// Wootters concurrence of an arbitrary two-qubit density matrix.
pub fn wootters_concurrence(rho: &Matrix4<C64>) -> f64 {
    let o = C64::new(0.0, 0.0);
    let yy = Matrix4::new(
        o, o, o, -C64::new(1.0, 0.0),
        o, o, C64::new(1.0, 0.0), o,
        o, C64::new(1.0, 0.0), o, o,
        -C64::new(1.0, 0.0), o, o, o,
    );
    let tilde = yy * rho.conjugate() * yy;
    let dyn_rho = DMatrix::from_fn(4, 4, |r, c| rho[(r, c)]);
    let (vals, vecs) = hermitian_eigh(&dyn_rho);
    let sqrt_diag = DMatrix::from_diagonal(&vals.map(|v| C64::new(v.max(0.0).sqrt(), 0.0)));
    let sqrt_rho = &vecs * sqrt_diag * vecs.adjoint();
    let dyn_tilde = DMatrix::from_fn(4, 4, |r, c| tilde[(r, c)]);
    let m = &sqrt_rho * dyn_tilde * &sqrt_rho;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut s: Vec<f64> = hermitian_eigenvalues(&m).iter().map(|v| v.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    (s[0] - s[1] - s[2] - s[3]).max(0.0)
}

/// Concurrence of the two ends of a chain occupying `offset..offset + n_chain`.
pub fn concurrence_edge_pair(rho: &SectoredDensityMatrix, offset: usize, n_chain: usize) -> f64 {
    concurrence_shortcut(rho, offset, offset + n_chain - 1)
}

/// Generator of the sectored master equation.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    h_eff: DMatrix<C64>,
    gamma: DMatrix<C64>,
}

impl MasterEquation {
    pub fn new(h: &DMatrix<f64>, kernel: &DissipationKernel) -> Result<Self> {
        crate::linalg::ensure_symmetric(h)?;
        if kernel.n_sites() != h.nrows() {
            return Err(Error::InvalidArgument(format!(
                "kernel covers {} sites, Hamiltonian {}",
                kernel.n_sites(),
                h.nrows()
            )));
        }
        let h_eff = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| {
            C64::new(h[(i, j)] + kernel.g[(i, j)], -0.5 * kernel.gamma[(i, j)])
        });
        Ok(Self {
            h_eff,
            gamma: kernel.gamma.map(|x| C64::new(x, 0.0)),
        })
    }

    /// `Tr(Gamma rho_ee)`, the rate at which the ground state fills.
    pub fn ground_feed(&self, rho_ee: &DMatrix<C64>) -> f64 {
        self.gamma.component_mul(&rho_ee.transpose()).sum().re
    }

    /// Fourth-order Taylor polynomial of `exp(-i H_eff dt)`.
    fn step_operator(&self, dt: f64) -> DMatrix<C64> {
        let n = self.h_eff.nrows();
        let a = &self.h_eff * C64::new(0.0, -dt);
        let mut term = DMatrix::<C64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..=4 {
            term = (&term * &a) * C64::new(1.0 / k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    /// `rho -> T rho T^dag`; the ground state gains exactly what the excited block loses.
    fn apply(step: &DMatrix<C64>, state: &SectoredDensityMatrix) -> SectoredDensityMatrix {
        let mut rho_ee = step * &state.rho_ee * step.adjoint();
        rho_ee = (&rho_ee + rho_ee.adjoint()) * C64::new(0.5, 0.0);
        let lost = state.rho_ee.trace().re - rho_ee.trace().re;
        SectoredDensityMatrix {
            rho_ee,
            p_ground: state.p_ground + lost,
        }
    }

    /// Largest step whose step-doubling discrepancy per unit time is below tolerance.
    ///
    /// Starts from `0.01 min(1, 1/gamma0)` and halves.
    pub fn choose_step(&self, gamma0: f64) -> Result<f64> {
        let mut dt = 0.01 * (1.0f64).min(if gamma0 > 0.0 { 1.0 / gamma0 } else { 1.0 });
        loop {
            let one = self.step_operator(dt);
            let two = self.step_operator(2.0 * dt);
            let drift = (&one * &one - two).camax() / (2.0 * dt);
            if drift < STEP_DRIFT_TOL {
                return Ok(dt);
            }
            dt *= 0.5;
            if dt < DT_FLOOR {
                return Err(Error::IntegratorStall { time: 0.0, dt });
            }
        }
    }

    /// States at the given increasing `times` (the first may be 0).
    pub fn trajectory(
        &self,
        rho0: &SectoredDensityMatrix,
        times: &[f64],
        gamma0: f64,
    ) -> Result<Vec<SectoredDensityMatrix>> {
        let dt = self.choose_step(gamma0)?;
        let mut out = Vec::with_capacity(times.len());
        let mut cached: Option<(f64, DMatrix<C64>)> = None;
        let mut state = rho0.clone();
        let mut now = 0.0;
        for &t in times {
            if t < now {
                return Err(Error::InvalidArgument("sample times must be increasing and >= 0".into()));
            }
            let span = t - now;
            let steps = (span / dt).ceil() as usize;
            if steps > 0 {
                let h = span / steps as f64;
                if cached.as_ref().map(|c| c.0) != Some(h) {
                    cached = Some((h, self.step_operator(h)));
                }
                let op = &cached.as_ref().expect("step operator").1;
                for _ in 0..steps {
                    state = Self::apply(op, &state);
                }
            }
            if !state.rho_ee.iter().all(|z| z.is_finite()) {
                return Err(Error::IntegratorStall { time: t, dt });
            }
            now = t;
            out.push(state.clone());
        }
        Ok(out)
    }
}

/// Propagates `rho0` for a time `t`.
pub fn evolve_master(
    rho0: &SectoredDensityMatrix,
    h: &DMatrix<f64>,
    kernel: &DissipationKernel,
    t: f64,
) -> Result<SectoredDensityMatrix> {
    let eq = MasterEquation::new(h, kernel)?;
    let mut states = eq.trajectory(rho0, &[t], kernel.gamma0)?;
    Ok(states.remove(0))
}

/// Least-squares decay rate of `ln p(t)` over samples with `t <= window`.
pub fn fit_decay_rate(times: &[f64], populations: &[f64], window: f64) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(populations)
        .filter(|(t, p)| **t <= window && **p > 0.0)
        .map(|(t, p)| (*t, p.ln()))
        .collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    -sxy / sxx
}

pub fn uniform_times(t_max: f64, n_samples: usize) -> Vec<f64> {
    let n = n_samples.max(1);
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

/// One sample of a single-chain dissipative run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipativeRow {
    pub time: f64,
    pub pop_s: f64,
    pub pop_a: f64,
    pub p_ground: f64,
    pub bell_plus: f64,
    pub bell_minus: f64,
    pub concurrence: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipativeTrace {
    pub rows: Vec<DissipativeRow>,
    /// Largest `|Tr rho_ee + p_g - 1|` over the samples.
    pub max_trace_error: f64,
    /// Smallest eigenvalue of `rho_ee` over the samples.
    pub min_eigenvalue: f64,
    /// Largest gap between the shortcut and the Wootters concurrence.
    pub concurrence_mismatch: f64,
}

/// Edge doublet, kernel and Hamiltonian of one chain on the structured layout.
#[derive(Debug, Clone)]
pub struct ChainBath {
    pub hamiltonian: DMatrix<f64>,
    pub doublet: EdgeDoublet,
    pub kernel: DissipationKernel,
}

impl ChainBath {
    pub fn new(chain: &ChainSpec, gamma0: f64) -> Result<Self> {
        let hamiltonian = build_chain_hamiltonian(chain)?;
        let doublet = extract_edge_doublet(&hamiltonian, EdgeWindow::Auto)?;
        let kernel = build_kernel(&build_layout(chain.n_cells)?, gamma0)?;
        Ok(Self {
            hamiltonian,
            doublet,
            kernel,
        })
    }

    /// `(gamma_A, gamma_S)` from the collective modes.
    pub fn edge_decay(&self) -> Result<(f64, f64)> {
        Ok(effective_edge_decay(&self.doublet, &collective_modes(&self.kernel)?))
    }
}

/// Master-equation run of one chain from `rho0`.
pub fn dissipative_trace(
    bath: &ChainBath,
    rho0: &SectoredDensityMatrix,
    t_max: f64,
    n_samples: usize,
) -> Result<DissipativeTrace> {
    let eq = MasterEquation::new(&bath.hamiltonian, &bath.kernel)?;
    let times = uniform_times(t_max, n_samples);
    let states = eq.trajectory(rho0, &times, bath.kernel.gamma0)?;
    let last = bath.hamiltonian.nrows() - 1;
    let mut trace = DissipativeTrace {
        rows: Vec::with_capacity(states.len()),
        max_trace_error: 0.0,
        min_eigenvalue: f64::INFINITY,
        concurrence_mismatch: 0.0,
    };
    for (&time, s) in times.iter().zip(&states) {
        let (bell_plus, bell_minus) = s.bell_populations(0, last);
        let concurrence = concurrence_shortcut(s, 0, last);
        let general = wootters_concurrence(&s.reduced_pair(0, last));
        trace.concurrence_mismatch = trace.concurrence_mismatch.max((general - concurrence).abs());
        trace.max_trace_error = trace.max_trace_error.max((s.total_trace() - 1.0).abs());
        trace.min_eigenvalue = trace.min_eigenvalue.min(s.min_eigenvalue());
        trace.rows.push(DissipativeRow {
            time,
            pop_s: s.population_on(&bath.doublet.psi_s),
            pop_a: s.population_on(&bath.doublet.psi_a),
            p_ground: s.p_ground,
            bell_plus,
            bell_minus,
            concurrence,
        });
    }
    Ok(trace)
}

/// Pumps the first atom of the chain and follows the edge-pair entanglement.
pub fn remote_entanglement_protocol(
    chain: &ChainSpec,
    gamma0: f64,
    t_max: f64,
    n_samples: usize,
) -> Result<DissipativeTrace> {
    let bath = ChainBath::new(chain, gamma0)?;
    let rho0 = SectoredDensityMatrix::pure(&StateVector::basis(chain.n_sites(), 0));
    dissipative_trace(&bath, &rho0, t_max, n_samples)
}

/// `0.5 |<psi_S|Psi+>|^4`, the steady concurrence expected after pumping one edge.
pub fn steady_concurrence_estimate(doublet: &EdgeDoublet) -> f64 {
    let n = doublet.psi_s.len();
    let overlap = (doublet.psi_s[0] + doublet.psi_s[n - 1]) / std::f64::consts::SQRT_2;
    0.5 * overlap.powi(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellTransferRow {
    pub time: f64,
    /// Population of the initial edge state of chain 1.
    pub pop_1: f64,
    /// Population of the partner edge state of chain 2.
    pub pop_2: f64,
    pub p_ground: f64,
    pub concurrence_1: f64,
    pub concurrence_2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BellTransferReport {
    /// "S" or "A": which edge state carries the entanglement.
    pub channel: &'static str,
    pub gamma_a: f64,
    pub gamma_s: f64,
    pub coupling: f64,
    pub transfer_time: f64,
    pub initial_concurrence: f64,
    pub peak_concurrence_2: f64,
    pub peak_population_2: f64,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    pub rows: Vec<BellTransferRow>,
}

/// Moves an edge-entangled state from chain 1 to chain 2 through the junction.
///
/// Chain 1 starts in whichever of its edge states decays slower on the
/// structured layout; each chain has its own waveguide. The transfer time
/// is taken from the projected coupling of that state to its partner.
pub fn bell_transfer_protocol(
    system: &SystemSpec,
    gamma0: f64,
    t_max: Option<f64>,
    n_samples: usize,
) -> Result<BellTransferReport> {
    let b1 = ChainBath::new(&system.chain1, gamma0)?;
    let b2 = ChainBath::new(&system.chain2, gamma0)?;
    let (gamma_a, gamma_s) = b1.edge_decay()?;
    let use_a = gamma_a < gamma_s;
    let (index_1, index_2, channel) = if use_a { (1, 2, "A") } else { (0, 3, "S") };

    let setup = GateModel::new(system)?.setup(&system.junction)?;
    let h_eff = setup.effective()?;
    let coupling = h_eff[(index_1, index_2)].abs();
    if coupling < 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "junction does not couple the {channel} edge states (|g| = {coupling:.3e})"
        )));
    }
    let transfer_time = crate::effective::transfer_time(coupling)?;
    let t_max = t_max.unwrap_or(2.0 * transfer_time);

    let h = build_total_hamiltonian(system)?;
    let kernel = DissipationKernel::block_diagonal(&b1.kernel, &b2.kernel);
    let eq = MasterEquation::new(&h, &kernel)?;
    let psi_1 = setup.manifold.state(index_1);
    let psi_2 = setup.manifold.state(index_2);
    let rho0 = SectoredDensityMatrix::from_real(&psi_1)?;
    let times = uniform_times(t_max, n_samples);
    let states = eq.trajectory(&rho0, &times, gamma0)?;

    let m = system.chain1.n_sites();
    let mut report = BellTransferReport {
        channel,
        gamma_a,
        gamma_s,
        coupling,
        transfer_time,
        initial_concurrence: concurrence_edge_pair(&states[0], 0, m),
        peak_concurrence_2: 0.0,
        peak_population_2: 0.0,
        max_trace_error: 0.0,
        min_eigenvalue: f64::INFINITY,
        rows: Vec::with_capacity(states.len()),
    };
    for (&time, s) in times.iter().zip(&states) {
        let row = BellTransferRow {
            time,
            pop_1: s.population_on(&psi_1),
            pop_2: s.population_on(&psi_2),
            p_ground: s.p_ground,
            concurrence_1: concurrence_edge_pair(s, 0, m),
            concurrence_2: concurrence_edge_pair(s, m, m),
        };
        report.peak_concurrence_2 = report.peak_concurrence_2.max(row.concurrence_2);
        report.peak_population_2 = report.peak_population_2.max(row.pop_2);
        report.max_trace_error = report.max_trace_error.max((s.total_trace() - 1.0).abs());
        report.min_eigenvalue = report.min_eigenvalue.min(s.min_eigenvalue());
        report.rows.push(row);
    }
    Ok(report)
}
