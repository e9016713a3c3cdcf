//! Edge states of finite SSH chains and of the crossed system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_symmetric, orthonormalize_columns, sorted_eigh};
use crate::model::{build_chain_hamiltonian, ChainSpec};

/// Logical labels of the manifold columns, in storage order.
pub const LOGICAL_LABELS: [&str; 4] = ["uu", "ud", "du", "dd"];
/// Edge-state names of the manifold columns, in storage order.
pub const STATE_NAMES: [&str; 4] = ["1S", "1A", "2A", "2S"];

const BISECTION_STEPS: usize = 200;
const LAMBDA_MIN: f64 = 1e-9;
const LAMBDA_MAX: f64 = 50.0;
/// Below this doublet splitting the two edge eigenvectors are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// `sinh(a x) / sinh(b x)` for `0 < a <= b`, without overflow.
fn sinh_ratio(a: f64, b: f64, x: f64) -> f64 {
    let num = -(-2.0 * a * x).exp_m1();
    let den = -(-2.0 * b * x).exp_m1();
    ((a - b) * x).exp() * num / den
}

/// Localization exponent from `sinh(N l) / sinh((N+1) l) = j1 / j2`.
pub fn solve_lambda(j1: f64, j2: f64, n_cells: usize) -> Result<f64> {
    if !(j1 > 0.0 && j2 > 0.0) || n_cells == 0 {
        return Err(Error::InvalidArgument(format!(
            "solve_lambda needs j1, j2 > 0 and N >= 1 (got {j1}, {j2}, {n_cells})"
        )));
    }
    let n = n_cells as f64;
    let ratio = j1 / j2;
    let limit = n / (n + 1.0);
    if ratio >= limit {
        return Err(Error::NoEdgeSolution { ratio, limit });
    }
    // strictly decreasing in lambda
    let f = |l: f64| sinh_ratio(n, n + 1.0, l) - ratio;
    let (mut lo, mut hi) = (LAMBDA_MIN, LAMBDA_MAX);
    if f(lo) <= 0.0 {
        return Err(Error::NoEdgeSolution { ratio, limit });
    }
    if f(hi) > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "j1/j2 = {ratio} is below the resolvable range (lambda > {LAMBDA_MAX})"
        )));
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form energy of the symmetric edge state, `eps_S = -eps_A`.
pub fn edge_energy(j1: f64, j2: f64, n_cells: usize) -> Result<f64> {
    let l = solve_lambda(j1, j2, n_cells)?;
    let sign = if n_cells % 2 == 1 { 1.0 } else { -1.0 };
    Ok(sign * j2 * sinh_ratio(1.0, n_cells as f64 + 1.0, l))
}

/// Amplitude of the symmetric edge state on a central site.
pub fn edge_amplitude_eta(j1: f64, j2: f64, n_cells: usize) -> Result<f64> {
    let l = solve_lambda(j1, j2, n_cells)?;
    let n = n_cells as f64;
    // every sinh is scaled by exp(-N l) to stay finite
    let scaled = |x: f64| 0.5 * ((x - n * l).exp() - (-x - n * l).exp());
    let num = scaled((n + 1.0) * l / 2.0);
    let sum: f64 = (1..=n_cells)
        .map(|i| scaled((n + 1.0 - i as f64) * l).powi(2))
        .sum();
    Ok(num / (2.0 * sum).sqrt())
}

/// Rule for which eigenvalues count as "near zero".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum EdgeWindow {
    /// Half of the smallest |E| outside the expected edge count.
    #[default]
    Auto,
    /// Fixed threshold on |E|.
    Fixed(f64),
}

impl EdgeWindow {
    /// Half the bulk band edge `|j2 - j1|` of the infinite chain.
    pub fn analytic(j1: f64, j2: f64) -> Self {
        EdgeWindow::Fixed(0.5 * (j2 - j1).abs())
    }
}

/// Indices (into an ascending spectrum) of the `count` near-zero states, plus the gap.
fn select_edge_states(values: &[f64], count: usize, window: EdgeWindow) -> Result<(Vec<usize>, f64)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    let threshold = match window {
        EdgeWindow::Fixed(t) => t,
        EdgeWindow::Auto => match order.get(count) {
            Some(&i) => 0.5 * values[i].abs(),
            None => f64::INFINITY,
        },
    };
    let found = values.iter().filter(|e| e.abs() < threshold).count();
    if found != count {
        return Err(Error::ZeroManifoldAmbiguous {
            expected: count,
            found,
        });
    }
    let edge_max = values[order[count - 1]].abs();
    let gap = order
        .get(count)
        .map(|&i| values[i].abs() - edge_max)
        .unwrap_or(f64::INFINITY);
    let mut picked: Vec<usize> = order[..count].to_vec();
    picked.sort_unstable();
    Ok((picked, gap))
}

/// `<psi| I |psi>` with `I` the site inversion `j <-> 2N - 1 - j`.
fn inversion_expectation(psi: &DVector<f64>) -> f64 {
    let n = psi.len();
    (0..n).map(|j| psi[j] * psi[n - 1 - j]).sum()
}

fn invert(psi: &DVector<f64>) -> DVector<f64> {
    let n = psi.len();
    DVector::from_fn(n, |j, _| psi[n - 1 - j])
}

/// Flips the sign so the first significant amplitude (site 1 when it is
/// nonzero) is positive.
fn fix_sign(mut psi: DVector<f64>) -> DVector<f64> {
    let scale = psi.amax();
    let pivot = psi.iter().copied().find(|x| x.abs() > 1e-8 * scale).unwrap_or(1.0);
    if pivot < 0.0 {
        psi.neg_mut();
    }
    psi
}

/// Symmetric/antisymmetric edge pair of a single chain.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDoublet {
    pub psi_s: DVector<f64>,
    pub psi_a: DVector<f64>,
    /// `<psi_S|H|psi_S>`; equals `-<psi_A|H|psi_A>` for a clean chain.
    pub eps_s: f64,
    pub eps_a: f64,
    pub lambda: Option<f64>,
    /// Smallest bulk |E| minus largest edge |E|.
    pub gap: f64,
}

impl EdgeDoublet {
    /// Left-localized combination `(psi_S + psi_A)/sqrt(2)`.
    pub fn psi_left(&self) -> DVector<f64> {
        (&self.psi_s + &self.psi_a) / std::f64::consts::SQRT_2
    }

    /// Right-localized combination `(psi_S - psi_A)/sqrt(2)`.
    pub fn psi_right(&self) -> DVector<f64> {
        (&self.psi_s - &self.psi_a) / std::f64::consts::SQRT_2
    }
}

/// Extracts the near-zero doublet of a chain Hamiltonian.
///
/// Non-degenerate eigenvectors are returned as they are (sign fixed) and
/// labelled by the sign of their inversion parity, so disorder shows up as
/// reduced parity. A degenerate pair is split with the inversion
/// projectors instead.
pub fn extract_edge_doublet(h_chain: &DMatrix<f64>, window: EdgeWindow) -> Result<EdgeDoublet> {
    ensure_symmetric(h_chain)?;
    let (values, vectors) = sorted_eigh(h_chain);
    let (picked, gap) = select_edge_states(&values, 2, window)?;
    let cols: Vec<DVector<f64>> = picked.iter().map(|&i| vectors.column(i).into_owned()).collect();

    let (psi_s, psi_a) = if values[picked[0]].abs().max(values[picked[1]].abs()) < DEGENERACY_TOL {
        let basis = DMatrix::from_columns(&cols);
        let project = |sign: f64| {
            let mut best = DVector::zeros(h_chain.nrows());
            let mut weight = -1.0;
            for c in &cols {
                let p = (c + invert(c) * sign) * 0.5;
                let w = p.norm_squared();
                if w > weight {
                    weight = w;
                    best = p;
                }
            }
            // re-project inside the null space and normalize
            let inside = &basis * (basis.transpose() * &best);
            inside.normalize()
        };
        (project(1.0), project(-1.0))
    } else {
        let p0 = inversion_expectation(&cols[0]);
        let p1 = inversion_expectation(&cols[1]);
        if p0 >= p1 {
            (cols[0].clone(), cols[1].clone())
        } else {
            (cols[1].clone(), cols[0].clone())
        }
    };
    let psi_s = fix_sign(psi_s);
    let psi_a = fix_sign(psi_a);
    let eps_s = (psi_s.transpose() * h_chain * &psi_s)[(0, 0)];
    let eps_a = (psi_a.transpose() * h_chain * &psi_a)[(0, 0)];
    Ok(EdgeDoublet {
        psi_s,
        psi_a,
        eps_s,
        eps_a,
        lambda: None,
        gap,
    })
}

/// Doublet of a chain spec, with `lambda` filled in for clean chains.
pub fn chain_doublet(spec: &ChainSpec) -> Result<EdgeDoublet> {
    let h = build_chain_hamiltonian(spec)?;
    let mut doublet = extract_edge_doublet(&h, EdgeWindow::Auto)?;
    if spec.is_clean() {
        doublet.lambda = solve_lambda(spec.j1, spec.j2, spec.n_cells).ok();
    }
    Ok(doublet)
}

fn check_normalized(psi: &DVector<f64>) -> Result<()> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("state must be normalized (|psi| = {norm})")));
    }
    Ok(())
}

/// Inversion parity of a normalized single-chain state, in `[-1, 1]`.
///
/// Computed as `(1/2) sum_j |psi_j + psi_{2N+1-j}|^2 - 1`, which is `+1` for
/// even and `-1` for odd states.
pub fn parity(psi: &DVector<f64>) -> Result<f64> {
    check_normalized(psi)?;
    let n = psi.len();
    let sum: f64 = (0..n).map(|j| (psi[j] + psi[n - 1 - j]).powi(2)).sum();
    Ok(0.5 * sum - 1.0)
}

/// Inverse participation ratio `sum_i p_i^2`.
pub fn ipr(psi: &DVector<f64>) -> Result<f64> {
    check_normalized(psi)?;
    Ok(psi.iter().map(|x| x.powi(4)).sum())
}

/// The four hybridized edge states of the crossed system.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeManifold {
    /// `4N x 4` orthonormal columns in the order (1S, 1A, 2A, 2S), spanning
    /// the near-zero eigenspace of the full Hamiltonian.
    pub states: DMatrix<f64>,
    /// Per-chain edge states (junction off) in the same order.
    pub bare: DMatrix<f64>,
    /// Diagonal of the Hamiltonian in `states`.
    pub energies: [f64; 4],
    /// Smallest bulk |E| minus largest edge |E| of the full Hamiltonian.
    pub gap: f64,
}

impl EdgeManifold {
    pub fn labels(&self) -> [&'static str; 4] {
        LOGICAL_LABELS
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.states * self.states.transpose()
    }

    pub fn state(&self, i: usize) -> DVector<f64> {
        self.states.column(i).into_owned()
    }
}

/// Per-chain doublets placed in the `4N` basis: columns (1S, 1A, 2A, 2S).
pub fn bare_logical_basis(h_total: &DMatrix<f64>, window: EdgeWindow) -> Result<DMatrix<f64>> {
    let n = h_total.nrows();
    if n % 4 != 0 {
        return Err(Error::InvalidArgument(format!("crossed system needs 4N sites, got {n}")));
    }
    let m = n / 2;
    let d1 = extract_edge_doublet(&h_total.view((0, 0), (m, m)).into_owned(), window)?;
    let d2 = extract_edge_doublet(&h_total.view((m, m), (m, m)).into_owned(), window)?;
    let mut basis = DMatrix::zeros(n, 4);
    basis.view_mut((0, 0), (m, 1)).copy_from(&d1.psi_s);
    basis.view_mut((0, 1), (m, 1)).copy_from(&d1.psi_a);
    basis.view_mut((m, 2), (m, 1)).copy_from(&d2.psi_a);
    basis.view_mut((m, 3), (m, 1)).copy_from(&d2.psi_s);
    Ok(basis)
}

/// Extracts the four-state edge manifold of the crossed system.
///
/// The per-chain edge states are projected onto the four near-zero
/// eigenvectors of `h_total` and orthonormalized with the polar
/// decomposition, which keeps each column as close as possible to its
/// bare counterpart. With the junction off the result is the bare basis.
pub fn extract_edge_manifold(h_total: &DMatrix<f64>, window: EdgeWindow) -> Result<EdgeManifold> {
    ensure_symmetric(h_total)?;
    let bare = bare_logical_basis(h_total, window)?;
    let (values, vectors) = sorted_eigh(h_total);
    manifold_from_eigh(&values, &vectors, bare, window)
}

/// [`extract_edge_manifold`] from an already computed ascending
/// eigendecomposition and bare basis.
pub fn manifold_from_eigh(
    values: &[f64],
    vectors: &DMatrix<f64>,
    bare: DMatrix<f64>,
    window: EdgeWindow,
) -> Result<EdgeManifold> {
    let (picked, gap) = select_edge_states(values, 4, window)?;
    let v = DMatrix::from_columns(&picked.iter().map(|&i| vectors.column(i)).collect::<Vec<_>>());
    let overlap = v.transpose() * &bare;
    let rotation = orthonormalize_columns(&overlap);
    let states = &v * &rotation;
    // H restricted to the picked eigenvectors is diagonal
    let mut energies = [0.0; 4];
    for (a, e) in energies.iter_mut().enumerate() {
        *e = picked
            .iter()
            .enumerate()
            .map(|(r, &i)| values[i] * rotation[(r, a)].powi(2))
            .sum();
    }
    Ok(EdgeManifold {
        states,
        bare,
        energies,
        gap,
    })
}

/// Per-chain inversion parity of a state on the crossed system.
pub fn system_parity(psi: &DVector<f64>) -> f64 {
    let m = psi.len() / 2;
    let first = psi.rows(0, m).into_owned();
    let second = psi.rows(m, m).into_owned();
    inversion_expectation(&first) + inversion_expectation(&second)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub energy: f64,
    pub parity: f64,
    pub ipr: f64,
    pub is_edge: bool,
}

/// Full spectrum with parity, IPR and edge flags (the `spectrum` table).
pub fn spectrum_table(h_total: &DMatrix<f64>, window: EdgeWindow) -> Result<Vec<SpectrumRow>> {
    ensure_symmetric(h_total)?;
    let (values, vectors) = sorted_eigh(h_total);
    let edge = select_edge_states(&values, 4, window).map(|(p, _)| p).unwrap_or_default();
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, &energy)| {
            let psi = vectors.column(i).into_owned();
            SpectrumRow {
                index: i,
                energy,
                parity: system_parity(&psi),
                ipr: psi.iter().map(|x| x.powi(4)).sum(),
                is_edge: edge.contains(&i),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_total_hamiltonian, JunctionSpec, SystemSpec};

    fn residual(l: f64, j1: f64, n: usize) -> f64 {
        let n = n as f64;
        ((n * l).sinh() / ((n + 1.0) * l).sinh() - j1).abs()
    }

    #[test]
    fn lambda_residual() {
        for n in [1, 3, 5, 7, 11] {
            for j1 in [0.05, 0.2, 0.4, 0.45] {
                if j1 >= n as f64 / (n as f64 + 1.0) {
                    continue;
                }
                let l = solve_lambda(j1, 1.0, n).unwrap();
                assert!(residual(l, j1, n) < 1e-12, "N={n} j1={j1}");
            }
        }
    }

    #[test]
    fn lambda_small_coupling_asymptote() {
        let l = solve_lambda(1e-6, 1.0, 5).unwrap();
        assert!((l - (1e6_f64).ln()).abs() < 1e-5);
    }

    #[test]
    fn lambda_boundary_has_no_solution() {
        assert!(matches!(
            solve_lambda(5.0 / 6.0, 1.0, 5),
            Err(Error::NoEdgeSolution { .. })
        ));
        assert!(matches!(edge_energy(0.9, 1.0, 5), Err(Error::NoEdgeSolution { .. })));
    }

    #[test]
    fn dimerized_limit() {
        assert!(edge_energy(1e-9, 1.0, 5).unwrap().abs() < 1e-30);
        assert!(edge_amplitude_eta(1e-9, 1.0, 5).unwrap() < 1e-15);
        let d = chain_doublet(&ChainSpec::new(5, 1e-9, 1.0).unwrap()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..10 {
            let expect_s = if j == 0 || j == 9 { r } else { 0.0 };
            assert!((d.psi_s[j] - expect_s).abs() < 1e-6);
        }
        assert!((d.psi_a[0] - r).abs() < 1e-6 && (d.psi_a[9] + r).abs() < 1e-6);
    }

    #[test]
    fn energy_shrinks_with_length() {
        let e5 = edge_energy(0.4, 1.0, 5).unwrap();
        let e7 = edge_energy(0.4, 1.0, 7).unwrap();
        assert!(e7.abs() < e5.abs());
    }

    #[test]
    fn doublet_energies_match_closed_form() {
        let d = chain_doublet(&ChainSpec::new(5, 0.4, 1.0).unwrap()).unwrap();
        let eps = edge_energy(0.4, 1.0, 5).unwrap();
        assert!((d.eps_s - eps).abs() < 1e-10);
        assert!((d.eps_a + eps).abs() < 1e-10);
        assert!((d.psi_s.dot(&d.psi_a)).abs() < 1e-10);
        assert!((parity(&d.psi_s).unwrap() - 1.0).abs() < 1e-10);
        assert!((parity(&d.psi_a).unwrap() + 1.0).abs() < 1e-10);
        assert!(d.psi_s[0] > 0.0 && d.psi_a[0] > 0.0);
        assert!(d.lambda.is_some());
    }

    #[test]
    fn eta_is_centre_amplitude() {
        for (n, j1) in [(3, 0.3), (5, 0.4), (5, 0.51), (7, 0.25)] {
            let d = chain_doublet(&ChainSpec::new(n, j1, 1.0).unwrap()).unwrap();
            let eta = edge_amplitude_eta(j1, 1.0, n).unwrap();
            let centre = d.psi_s[n - 1].abs();
            assert!((eta - centre).abs() / centre < 0.05, "N={n} j1={j1}");
            assert!((d.psi_s[n].abs() - centre).abs() < 1e-10);
        }
    }

    #[test]
    fn no_doublet_in_trivial_phase() {
        let h = build_chain_hamiltonian(&ChainSpec::new(5, 1.5, 1.0).unwrap()).unwrap();
        assert!(matches!(
            extract_edge_doublet(&h, EdgeWindow::Auto),
            Err(Error::ZeroManifoldAmbiguous { expected: 2, .. })
        ));
    }

    #[test]
    fn ipr_limits() {
        let mut single = DVector::zeros(10);
        single[3] = 1.0;
        assert_eq!(ipr(&single).unwrap(), 1.0);
        let uniform = DVector::from_element(10, 1.0 / 10f64.sqrt());
        assert!((ipr(&uniform).unwrap() - 0.1).abs() < 1e-15);
        assert!(ipr(&DVector::from_element(4, 1.0)).is_err());
    }

    #[test]
    fn localization_grows_as_ratio_drops() {
        let s = |j1| chain_doublet(&ChainSpec::new(5, j1, 1.0).unwrap()).unwrap().psi_s;
        assert!(ipr(&s(0.3)).unwrap() > ipr(&s(0.6)).unwrap());
    }

    #[test]
    fn parity_of_mixture() {
        let d = chain_doublet(&ChainSpec::new(5, 0.4, 1.0).unwrap()).unwrap();
        assert!(parity(&d.psi_left()).unwrap().abs() < 1e-10);
    }

    #[test]
    fn uncoupled_manifold_is_bare() {
        let sys = SystemSpec::clean(5, 0.4, 1.0, JunctionSpec::zero()).unwrap();
        let h = build_total_hamiltonian(&sys).unwrap();
        let m = extract_edge_manifold(&h, EdgeWindow::Auto).unwrap();
        assert!((&m.states - &m.bare).amax() < 1e-10);
        let eps = edge_energy(0.4, 1.0, 5).unwrap();
        let expected = [eps, -eps, -eps, eps];
        for (e, x) in m.energies.iter().zip(expected) {
            assert!((e - x).abs() < 1e-10);
        }
        assert!(m.gap > 0.0);
    }

    #[test]
    fn manifold_orthonormal_with_junction() {
        let sys = SystemSpec::clean(5, 0.51, 1.0, JunctionSpec::z2(0.22, 0.075)).unwrap();
        let h = build_total_hamiltonian(&sys).unwrap();
        let m = extract_edge_manifold(&h, EdgeWindow::Auto).unwrap();
        assert!((m.states.transpose() * &m.states - DMatrix::identity(4, 4)).amax() < 1e-10);
        // each dressed column stays close to its bare partner
        for i in 0..4 {
            assert!(m.states.column(i).dot(&m.bare.column(i)) > 0.9);
        }
    }

    #[test]
    fn spectrum_flags_four_edge_states() {
        let sys = SystemSpec::clean(5, 0.4, 1.0, JunctionSpec::uniform(0.07)).unwrap();
        let rows = spectrum_table(&build_total_hamiltonian(&sys).unwrap(), EdgeWindow::Auto).unwrap();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows.iter().filter(|r| r.is_edge).count(), 4);
        assert!(rows.iter().filter(|r| r.is_edge).all(|r| r.energy.abs() < 0.1));
    }
}
