//! Cross-checks of closed forms and fast paths against independent computations.

use nalgebra::{DMatrix, DVector, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xssh_core::dynamics::{gate_fidelity, GateModel, Propagator, StateVector};
use xssh_core::effective::{analytic_propagator, spin_hamiltonian, swap_gate};
use xssh_core::linalg::{complexify, hermitian_eigh, sorted_eigh};
use xssh_core::model::{build_chain_hamiltonian, build_total_hamiltonian};
use xssh_core::open_system::{
    build_kernel, build_layout, collective_modes, concurrence_shortcut, wootters_concurrence,
    SectoredDensityMatrix,
};
use xssh_core::spectral::{
    bare_logical_basis, edge_amplitude_eta, edge_energy, extract_edge_doublet, spectrum_table,
};
use xssh_core::{ChainSpec, EdgeWindow, JunctionSpec, SpinModelParams, SystemSpec, C64};

fn expm_by_eigh(h: &Matrix4<C64>, t: f64) -> Matrix4<C64> {
    let dense = DMatrix::from_fn(4, 4, |r, c| h[(r, c)]);
    let (vals, vecs) = hermitian_eigh(&dense);
    let phases = DMatrix::from_diagonal(&vals.map(|e| C64::from_polar(1.0, -e * t)));
    let u = &vecs * phases * vecs.adjoint();
    Matrix4::from_fn(|r, c| u[(r, c)])
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[test]
fn block_propagator_matches_eigendecomposition() {
    let p = SpinModelParams::new(0.013, 0.021, -0.007);
    let h = spin_hamiltonian(&p);
    for t in [0.0, 1.7, 55.0, 812.3] {
        let a = analytic_propagator(&p, t);
        let b = expm_by_eigh(&h, t);
        let err = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "t = {t}: {err}");
    }
}

#[test]
fn closed_form_fidelity_matches_haar_sampling() {
    let p = SpinModelParams::new(0.02, 0.05, 0.01);
    let gate = analytic_propagator(&p, 23.0);
    let target = swap_gate();
    let exact = gate_fidelity(&gate, &target);
    let m = target.adjoint() * gate;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples = 40_000;
    let mut acc = 0.0;
    for _ in 0..samples {
        let v = nalgebra::Vector4::from_fn(|_, _| C64::new(gaussian(&mut rng), gaussian(&mut rng)));
        let psi = v / C64::from(v.norm());
        acc += psi.dotc(&(m * psi)).norm_sqr();
    }
    let mc = acc / samples as f64;
    assert!((mc - exact).abs() < 1e-3, "haar {mc} vs closed form {exact}");
}

#[test]
fn edge_energy_matches_diagonalization() {
    for (n, j1) in [(3, 0.3), (5, 0.4), (5, 0.51), (8, 0.6), (11, 0.7)] {
        let chain = ChainSpec::new(n, j1, 1.0).unwrap();
        let (vals, _) = sorted_eigh(&build_chain_hamiltonian(&chain).unwrap());
        let smallest = vals.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
        let closed = edge_energy(j1, 1.0, n).unwrap().abs();
        assert!((smallest - closed).abs() < 1e-12 * closed.max(1e-300) + 1e-15, "n={n} j1={j1}");
    }
}

#[test]
fn central_amplitude_matches_eigenvector() {
    let (n, j1) = (5, 0.4);
    let chain = ChainSpec::new(n, j1, 1.0).unwrap();
    let d = extract_edge_doublet(&build_chain_hamiltonian(&chain).unwrap(), EdgeWindow::Auto).unwrap();
    let eta = edge_amplitude_eta(j1, 1.0, n).unwrap();
    assert!((d.psi_s[n - 1].abs() - eta).abs() < 1e-8);
    assert!((d.psi_s[n].abs() - eta).abs() < 1e-8);
}

#[test]
fn measured_coupling_is_eta_squared_times_total_junction() {
    let (n, j1, k) = (5, 0.4, 0.07);
    let system = SystemSpec::clean(n, j1, 1.0, JunctionSpec::uniform(k)).unwrap();
    let h = GateModel::new(&system).unwrap().setup(&system.junction).unwrap().effective().unwrap();
    let eta = edge_amplitude_eta(j1, 1.0, n).unwrap();
    let predicted = 4.0 * k * eta * eta;
    assert!((h[(0, 3)].abs() - predicted).abs() / predicted < 1e-3);
}

#[test]
fn effective_model_tracks_full_dynamics() {
    let system = SystemSpec::clean(5, 0.4, 1.0, JunctionSpec::uniform(0.07)).unwrap();
    let h = build_total_hamiltonian(&system).unwrap();
    let h0 = build_total_hamiltonian(&system.with_junction(JunctionSpec::zero())).unwrap();
    let bare = bare_logical_basis(&h0, EdgeWindow::Auto).unwrap();

    let h4 = bare.transpose() * &h * &bare;
    let (e4, v4) = sorted_eigh(&h4);
    let full = Propagator::new(&h).unwrap();
    let psi0 = StateVector::from_real(&bare.column(0).into_owned()).unwrap();

    let g = h4[(0, 3)].abs();
    let t_end = std::f64::consts::PI / g;
    let mut worst: f64 = 0.0;
    for i in 0..=50 {
        let t = t_end * i as f64 / 50.0;
        let psi = full.evolve(&psi0, t);
        for a in 0..4 {
            let amp: C64 = (0..4)
                .map(|k| C64::from_polar(1.0, -e4[k] * t) * v4[(a, k)] * v4[(0, k)])
                .sum();
            let reduced = amp.norm_sqr();
            let direct = psi.population_on(&bare.column(a).into_owned());
            worst = worst.max((reduced - direct).abs());
        }
    }
    assert!(worst < 0.02, "population mismatch {worst}");
}

#[test]
fn dimer_spectrum() {
    let system = SystemSpec::clean(1, 0.3, 1.0, JunctionSpec::zero()).unwrap();
    let h = build_total_hamiltonian(&system).unwrap();
    let rows = spectrum_table(&h, EdgeWindow::Fixed(0.5)).unwrap();
    let energies: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    for (e, want) in energies.iter().zip([-0.3, -0.3, 0.3, 0.3]) {
        assert!((e - want).abs() < 1e-14);
    }
}

#[test]
fn chain_spectrum_is_chirally_paired() {
    let chain = ChainSpec::new(6, 0.45, 1.0).unwrap();
    let (vals, _) = sorted_eigh(&build_chain_hamiltonian(&chain).unwrap());
    let n = vals.len();
    for i in 0..n {
        assert!((vals[i] + vals[n - 1 - i]).abs() < 1e-12);
    }
}

#[test]
fn evolution_matches_complex_eigendecomposition() {
    let system = SystemSpec::clean(3, 0.5, 1.0, JunctionSpec::new(0.1, 0.02, 0.03, 0.08)).unwrap();
    let h = build_total_hamiltonian(&system).unwrap();
    let psi0 = StateVector::basis(h.nrows(), 2);
    let t = 13.7;
    let fast = Propagator::new(&h).unwrap().evolve(&psi0, t);

    let (vals, vecs) = hermitian_eigh(&complexify(&h));
    let phases = DMatrix::from_diagonal(&vals.map(|e| C64::from_polar(1.0, -e * t)));
    let u = &vecs * phases * vecs.adjoint();
    let slow = &u * &psi0.amplitudes;
    assert!((fast.amplitudes - slow).norm() < 1e-11);
}

#[test]
fn decay_rates_sum_to_trace() {
    let gamma0 = 0.035;
    let kernel = build_kernel(&build_layout(5).unwrap(), gamma0).unwrap();
    let modes = collective_modes(&kernel).unwrap();
    let total: f64 = modes.iter().map(|m| m.rate).sum();
    assert!((total - 10.0 * gamma0).abs() < 1e-12);
    let bright: Vec<f64> = modes.iter().map(|m| m.rate / gamma0).filter(|r| *r > 1e-9).collect();
    assert_eq!(bright.len(), 2);
    assert!((bright[0] - 2.0).abs() < 1e-9 && (bright[1] - 8.0).abs() < 1e-9);
}

#[test]
fn wootters_agrees_with_shortcut_on_single_excitation_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = 6;
        let mut rho = DMatrix::<C64>::zeros(n, n);
        let mut weight = 0.0;
        for _ in 0..3 {
            let v = DVector::from_fn(n, |_, _| C64::new(gaussian(&mut rng), gaussian(&mut rng)));
            let v = &v / C64::from(v.norm());
            let w: f64 = rng.random();
            rho += &v * v.adjoint() * C64::from(w);
            weight += w;
        }
        let p_ground: f64 = rng.random::<f64>() * 0.5;
        rho *= C64::from((1.0 - p_ground) / weight);
        let state = SectoredDensityMatrix { rho_ee: rho, p_ground };
        let (i, j) = (0, n - 1);
        let general = wootters_concurrence(&state.reduced_pair(i, j));
        let short = concurrence_shortcut(&state, i, j);
        assert!((general - short).abs() < 1e-9, "{general} vs {short}");
    }
}
