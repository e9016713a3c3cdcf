//! Two-spin effective model of the edge manifold and SWAP calibration.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{gate_fidelity, GateModel};
use crate::error::{Error, Result};
use crate::linalg::kron4;
use crate::model::{build_chain_hamiltonian, JunctionSpec, SystemSpec};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::spectral::{edge_amplitude_eta, edge_energy, extract_edge_doublet, EdgeManifold, EdgeWindow};

/// Smallest fidelity accepted from a calibration.
pub const CALIBRATION_REQUIRED: f64 = 0.99;
/// Fidelity above which the five-coupling refinement is skipped.
const RECALIBRATION_TARGET: f64 = 0.999;
const REFINE_BOX: f64 = 0.1;

/// `H_eff[a][b] = <state_a|H|state_b>` in the order (1S, 1A, 2A, 2S).
pub fn project_effective(h_total: &DMatrix<f64>, manifold: &EdgeManifold) -> Result<Matrix4<f64>> {
    if manifold.gap <= 0.0 {
        return Err(Error::ManifoldLeakage { gap: manifold.gap });
    }
    let d = &manifold.states;
    if d.nrows() != h_total.nrows() || d.ncols() != 4 {
        return Err(Error::InvalidArgument(format!(
            "manifold of shape {}x{} does not match a {}-site Hamiltonian",
            d.nrows(),
            d.ncols(),
            h_total.nrows()
        )));
    }
    let p = d.transpose() * h_total * d;
    Ok(Matrix4::from_fn(|r, c| 0.5 * (p[(r, c)] + p[(c, r)])))
}

/// Couplings of `t sz.sz + u sx.sx - v sy.sy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinModelParams {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

impl SpinModelParams {
    pub fn new(t: f64, u: f64, v: f64) -> Self {
        Self { t, u, v }
    }

    /// Reads `(t, u, v)` off a projected Hamiltonian, averaging the redundant entries.
    pub fn from_projection(h: &Matrix4<f64>) -> Self {
        Self {
            t: 0.25 * (h[(0, 0)] + h[(3, 3)] - h[(1, 1)] - h[(2, 2)]),
            u: 0.5 * (h[(0, 3)] + h[(1, 2)]),
            v: 0.5 * (h[(0, 3)] - h[(1, 2)]),
        }
    }

    /// Rabi frequency inside {ud, du}.
    pub fn omega_sigma(&self) -> f64 {
        2.0 * (self.u - self.v)
    }

    /// Rabi frequency inside {uu, dd}.
    pub fn omega_pi(&self) -> f64 {
        2.0 * (self.u + self.v)
    }
}

/// Closed-form spin couplings for a Z2 junction.
///
/// Each symmetric edge state carries amplitude `eta` on both central sites,
/// so the junction couples the symmetric pair with `2 eta^2 (K+ + K-)` and
/// the antisymmetric pair with `2 eta^2 (K+ - K-)`.
pub fn spin_params(j1: f64, j2: f64, n_cells: usize, k_plus: f64, k_minus: f64) -> Result<SpinModelParams> {
    let eps = edge_energy(j1, j2, n_cells)?;
    let eta2 = edge_amplitude_eta(j1, j2, n_cells)?.powi(2);
    Ok(SpinModelParams {
        t: eps,
        u: 2.0 * eta2 * k_plus,
        v: 2.0 * eta2 * k_minus,
    })
}

fn pauli() -> [Matrix2<C64>; 3] {
    let o = C64::new(0.0, 0.0);
    let r = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        Matrix2::new(o, r, r, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(r, o, o, -r),
    ]
}

pub fn spin_hamiltonian(p: &SpinModelParams) -> Matrix4<C64> {
    let [x, y, z] = pauli();
    kron4(&z, &z) * C64::from(p.t) + kron4(&x, &x) * C64::from(p.u) - kron4(&y, &y) * C64::from(p.v)
}

/// `exp(-i H_spin time)` from the block form of the propagator.
pub fn analytic_propagator(p: &SpinModelParams, time: f64) -> Matrix4<C64> {
    let phase = |e: f64| C64::from_polar(1.0, -e * time);
    let (s_plus, s_minus) = (phase(p.t + p.u + p.v), phase(p.t - p.u - p.v));
    let (a_plus, a_minus) = (phase(-p.t + p.u - p.v), phase(-p.t - p.u + p.v));
    let mut m = Matrix4::zeros();
    let (rp, rm) = ((s_plus + s_minus) * 0.5, (s_plus - s_minus) * 0.5);
    m[(0, 0)] = rp;
    m[(3, 3)] = rp;
    m[(0, 3)] = rm;
    m[(3, 0)] = rm;
    let (rp, rm) = ((a_plus + a_minus) * 0.5, (a_plus - a_minus) * 0.5);
    m[(1, 1)] = rp;
    m[(2, 2)] = rp;
    m[(1, 2)] = rm;
    m[(2, 1)] = rm;
    m
}

/// Time `pi / (2 g)` for a complete exchange through coupling `g`.
pub fn transfer_time(g: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::InvalidArgument(format!("coupling must be positive, got {g}")));
    }
    Ok(std::f64::consts::PI / (2.0 * g))
}

/// SWAP in the (uu, ud, du, dd) basis.
pub fn swap_gate() -> Matrix4<C64> {
    let mut m = Matrix4::zeros();
    for (r, c) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        m[(r, c)] = C64::new(1.0, 0.0);
    }
    m
}

/// SWAP with the sign of the `du` state flipped.
pub fn swap_gate_flipped() -> Matrix4<C64> {
    let mut m = swap_gate();
    m[(1, 2)] = -m[(1, 2)];
    m[(2, 1)] = -m[(2, 1)];
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweetPoint {
    pub k_minus: f64,
    pub k_plus: f64,
    pub k_index: usize,
    pub t_swap: f64,
    pub fidelity: f64,
    /// Couplings actually used; Z2-shaped unless a disorder recalibration freed them.
    pub junction: JunctionSpec,
    pub evaluations: usize,
}

/// Analytic seed `(K-0, K+0, T)` for the `k`-th SWAP island.
pub fn sweet_seed(k_index: usize, j1: f64, j2: f64, n_cells: usize) -> Result<(f64, f64, f64)> {
    if k_index == 0 {
        return Err(Error::InvalidArgument("k_index must be >= 1".into()));
    }
    let eps = edge_energy(j1, j2, n_cells)?.abs();
    let eta2 = edge_amplitude_eta(j1, j2, n_cells)?.powi(2);
    Ok(seed_from(eps, eta2, k_index))
}

fn seed_from(eps: f64, eta2: f64, k_index: usize) -> (f64, f64, f64) {
    let k_minus = eps / (2.0 * eta2 * (4.0 * k_index as f64 - 1.0));
    let t_swap = std::f64::consts::PI / (8.0 * eta2 * k_minus);
    (k_minus, 3.0 * k_minus, t_swap)
}

fn z2_refine(model: &GateModel, seed: (f64, f64, f64), k_index: usize) -> SweetPoint {
    let (km, kp, t) = seed;
    let objective = |x: &[f64]| -> f64 {
        model
            .swap_fidelity(&JunctionSpec::z2(x[0], x[1]), x[2])
            .map(|f| 1.0 - f)
            .unwrap_or(1.0)
    };
    let x0 = [kp, km, t];
    let lower: Vec<f64> = x0.iter().map(|v| v * (1.0 - REFINE_BOX)).collect();
    let upper: Vec<f64> = x0.iter().map(|v| v * (1.0 + REFINE_BOX)).collect();
    let best = nelder_mead(objective, &x0, &lower, &upper, NelderMeadOptions::default());
    SweetPoint {
        k_minus: best.x[1],
        k_plus: best.x[0],
        k_index,
        t_swap: best.x[2],
        fidelity: 1.0 - best.value,
        junction: JunctionSpec::z2(best.x[0], best.x[1]),
        evaluations: best.evaluations,
    }
}

/// Seeds the `k`-th sweet point analytically and refines it within +-10%.
pub fn sweet_point(k_index: usize, j1: f64, j2: f64, n_cells: usize) -> Result<SweetPoint> {
    let seed = sweet_seed(k_index, j1, j2, n_cells)?;
    let system = SystemSpec::clean(n_cells, j1, j2, JunctionSpec::z2(seed.1, seed.0))?;
    let point = z2_refine(&GateModel::new(&system)?, seed, k_index);
    check_calibration(point)
}

fn check_calibration(point: SweetPoint) -> Result<SweetPoint> {
    if point.fidelity > CALIBRATION_REQUIRED {
        Ok(point)
    } else {
        Err(Error::CalibrationFailed {
            fidelity: point.fidelity,
            required: CALIBRATION_REQUIRED,
            evaluations: point.evaluations,
        })
    }
}

/// Recalibrated point together with the fidelity of its unrefined seed.
pub(crate) fn recalibrate_with_seed(system: &SystemSpec, k_index: usize) -> Result<(SweetPoint, f64)> {
    if k_index == 0 {
        return Err(Error::InvalidArgument("k_index must be >= 1".into()));
    }
    let n = system.n_cells();
    let s = n - 1;
    let mut eps = 0.0;
    let mut eta = 1.0;
    for chain in [&system.chain1, &system.chain2] {
        let d = extract_edge_doublet(&build_chain_hamiltonian(chain)?, EdgeWindow::Auto)?;
        eps += 0.5 * d.eps_s.abs();
        eta *= (0.5 * (d.psi_s[s].powi(2) + d.psi_s[s + 1].powi(2))).sqrt();
    }
    let seed = seed_from(eps, eta, k_index);
    let model = GateModel::new(system)?;
    let seed_fidelity = model.swap_fidelity(&JunctionSpec::z2(seed.1, seed.0), seed.2)?;
    let mut point = z2_refine(&model, seed, k_index);
    if point.fidelity < RECALIBRATION_TARGET {
        let x0 = [
            point.junction.k[0],
            point.junction.k[1],
            point.junction.k[2],
            point.junction.k[3],
            point.t_swap,
        ];
        let objective = |x: &[f64]| -> f64 {
            model
                .swap_fidelity(&JunctionSpec::new(x[0], x[1], x[2], x[3]), x[4])
                .map(|f| 1.0 - f)
                .unwrap_or(1.0)
        };
        let lower: Vec<f64> = x0.iter().map(|v| v * 0.75).collect();
        let upper: Vec<f64> = x0.iter().map(|v| v * 1.25).collect();
        let opts = NelderMeadOptions {
            max_evaluations: 1000,
            ..Default::default()
        };
        let best = nelder_mead(objective, &x0, &lower, &upper, opts);
        point.evaluations += best.evaluations;
        if 1.0 - best.value > point.fidelity {
            let k = [best.x[0], best.x[1], best.x[2], best.x[3]];
            point.fidelity = 1.0 - best.value;
            point.junction = JunctionSpec { k };
            point.k_plus = 0.5 * (k[0] + k[3]);
            point.k_minus = 0.5 * (k[1] + k[2]);
            point.t_swap = best.x[4];
        }
    }
    Ok((point, seed_fidelity))
}

/// Re-derives the sweet point of a disordered system from its own edge states.
///
/// The seed uses the numerically measured edge energy (averaged over the
/// two chains) and central amplitudes; the refinement first moves along the
/// Z2 family and then, if needed, frees all four couplings.
pub fn recalibrate_for_disorder(system: &SystemSpec, k_index: usize) -> Result<SweetPoint> {
    check_calibration(recalibrate_with_seed(system, k_index)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapCell {
    pub k_minus: f64,
    pub k_plus: f64,
    pub fidelity: f64,
    pub t_swap: f64,
}

/// Number of gate times tried per map cell.
pub const MAP_TIME_SAMPLES: usize = 81;

/// Best SWAP fidelity over a `(K-, K+)` grid.
///
/// Each cell tries gate times within +-10% of the first Sigma-exchange time
/// `pi / (2 |g_A|)` and both sign conventions of the `du` state, so the map
/// does not depend on the gauge of the second chain. Cells are returned row
/// by row with `K-` as the slow index.
pub fn swap_map(j1: f64, j2: f64, n_cells: usize, k_values: &[f64]) -> Result<Vec<MapCell>> {
    let model = GateModel::new(&SystemSpec::clean(n_cells, j1, j2, JunctionSpec::zero())?)?;
    let targets = [swap_gate(), swap_gate_flipped()];
    let cells: Vec<(f64, f64)> = k_values
        .iter()
        .flat_map(|&km| k_values.iter().map(move |&kp| (km, kp)))
        .collect();
    cells
        .par_iter()
        .map(|&(k_minus, k_plus)| {
            let setup = model.setup(&JunctionSpec::z2(k_plus, k_minus))?;
            let g_a = setup.effective()?[(1, 2)].abs();
            let mut cell = MapCell {
                k_minus,
                k_plus,
                fidelity: 0.0,
                t_swap: f64::NAN,
            };
            if g_a < 1e-9 {
                return Ok(cell);
            }
            let t0 = std::f64::consts::PI / (2.0 * g_a);
            for i in 0..MAP_TIME_SAMPLES {
                let t = t0 * (0.9 + 0.2 * i as f64 / (MAP_TIME_SAMPLES - 1) as f64);
                let gate = setup.logical.gate(t);
                for target in &targets {
                    let f = gate_fidelity(&gate, target);
                    if f > cell.fidelity {
                        cell.fidelity = f;
                        cell.t_swap = t;
                    }
                }
            }
            Ok(cell)
        })
        .collect()
}

/// Connected regions (4-neighbour) of an `n x n` row-major grid above `threshold`.
pub fn count_islands(values: &[f64], n: usize, threshold: f64) -> usize {
    let mut seen = vec![false; values.len()];
    let mut islands = 0;
    for start in 0..values.len() {
        if seen[start] || values[start] <= threshold {
            continue;
        }
        islands += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (r, c) = (i / n, i % n);
            let mut push = |j: usize| {
                if !seen[j] && values[j] > threshold {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                push(i - n);
            }
            if r + 1 < n {
                push(i + n);
            }
            if c > 0 {
                push(i - 1);
            }
            if c + 1 < n {
                push(i + 1);
            }
        }
    }
    islands
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff4, unitarity_error};
    use crate::model::build_total_hamiltonian;
    use crate::spectral::extract_edge_manifold;

    fn projected(n: usize, j1: f64, junction: JunctionSpec) -> Matrix4<f64> {
        let sys = SystemSpec::clean(n, j1, 1.0, junction).unwrap();
        let h = build_total_hamiltonian(&sys).unwrap();
        let m = extract_edge_manifold(&h, EdgeWindow::Auto).unwrap();
        project_effective(&h, &m).unwrap()
    }

    #[test]
    fn uncoupled_projection_is_diagonal() {
        let h = projected(5, 0.4, JunctionSpec::zero());
        let eps = edge_energy(0.4, 1.0, 5).unwrap();
        let expected = Matrix4::from_diagonal(&nalgebra::Vector4::new(eps, -eps, -eps, eps));
        assert!((h - expected).amax() < 1e-10);
    }

    #[test]
    fn c4_couples_only_symmetric_states() {
        let h = projected(5, 0.4, JunctionSpec::uniform(0.07));
        let g = h[(0, 3)].abs();
        assert!(g > 1e-3);
        for (r, c) in [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)] {
            assert!(h[(r, c)].abs() < 1e-3 * g, "({r},{c}) = {}", h[(r, c)]);
        }
    }

    #[test]
    fn z2_projection_matches_closed_form() {
        let (kp, km) = (0.07, 0.05);
        let h = projected(5, 0.4, JunctionSpec::z2(kp, km));
        let p = spin_params(0.4, 1.0, 5, kp, km).unwrap();
        let q = SpinModelParams::from_projection(&h);
        assert!(((q.u + q.v) - (p.u + p.v)).abs() / (p.u + p.v) < 0.05);
        assert!(((q.u - q.v).abs() - (p.u - p.v)).abs() / (p.u - p.v) < 0.05);
        assert!((q.t - p.t).abs() < 0.05 * p.t.abs() + 1e-6);
    }

    #[test]
    fn spin_param_ratios() {
        let p = spin_params(0.4, 1.0, 5, 0.07, 0.07).unwrap();
        assert_eq!(p.u, p.v);
        let p = spin_params(0.4, 1.0, 5, 0.07, 0.05).unwrap();
        assert!((p.u / p.v - 1.4).abs() < 1e-12);
        assert!((p.t - edge_energy(0.4, 1.0, 5).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn propagator_basics() {
        let p = SpinModelParams::new(0.013, 0.021, 0.008);
        assert!(max_abs_diff4(&analytic_propagator(&p, 0.0), &Matrix4::identity()) < 1e-15);
        for t in [0.5, 3.0, 170.0] {
            let u = analytic_propagator(&p, t);
            assert!(unitarity_error(&u) < 1e-12);
            for (r, c) in [(0, 1), (0, 2), (3, 1), (3, 2)] {
                assert_eq!(u[(r, c)], C64::new(0.0, 0.0));
                assert_eq!(u[(c, r)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn c4_blocks_sigma_exchange() {
        let p = SpinModelParams::new(0.01, 0.02, 0.02);
        for t in [1.0, 10.0, 100.0] {
            assert!(analytic_propagator(&p, t)[(1, 2)].norm() < 1e-15);
        }
    }

    #[test]
    fn hamiltonian_layout() {
        let p = SpinModelParams::new(1.0, 2.0, 3.0);
        let h = spin_hamiltonian(&p);
        assert_eq!(h[(0, 0)].re, 1.0);
        assert_eq!(h[(1, 1)].re, -1.0);
        assert_eq!(h[(0, 3)].re, 5.0);
        assert_eq!(h[(1, 2)].re, -1.0);
        let back = SpinModelParams::from_projection(&h.map(|z| z.re));
        assert_eq!(back, p);
    }

    #[test]
    fn transfer_time_examples() {
        assert!((transfer_time(std::f64::consts::FRAC_PI_2).unwrap() - 1.0).abs() < 1e-15);
        assert!(transfer_time(0.0).is_err());
    }

    #[test]
    fn seed_ratio_is_three() {
        let (km, kp, t) = sweet_seed(2, 0.51, 1.0, 5).unwrap();
        assert_eq!(kp / km, 3.0);
        assert!(t > 0.0);
        assert!(sweet_seed(0, 0.51, 1.0, 5).is_err());
    }

    #[test]
    fn islands_are_counted() {
        #[rustfmt::skip]
        let grid = [
            1.0, 1.0, 0.0,
            0.0, 0.0, 0.0,
            0.0, 1.0, 1.0,
        ];
        assert_eq!(count_islands(&grid, 3, 0.5), 2);
        assert_eq!(count_islands(&[0.0; 9], 3, 0.5), 0);
    }
}
