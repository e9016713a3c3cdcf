//! System specifications and single-excitation Hamiltonians.
//!
//! Basis ordering (zero-based) used by every matrix and output file:
//! `mu = (chain - 1) * 2N + 2 * (cell - 1) + (0 for A, 1 for B)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One SSH chain of `2 * n_cells` sites.
///
/// Bond `b` joins sites `b` and `b + 1`; even bonds are intra-cell (`j1`),
/// odd bonds inter-cell (`j2`). `bond_disorder[b]` is added to bond `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_cells: usize,
    pub j1: f64,
    pub j2: f64,
    pub bond_disorder: Vec<f64>,
}

impl ChainSpec {
    pub fn new(n_cells: usize, j1: f64, j2: f64) -> Result<Self> {
        let spec = Self {
            n_cells,
            j1,
            j2,
            bond_disorder: vec![0.0; (2 * n_cells).saturating_sub(1)],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_disorder(mut self, offsets: Vec<f64>) -> Result<Self> {
        self.bond_disorder = offsets;
        self.validate()?;
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_cells
    }

    pub fn n_bonds(&self) -> usize {
        2 * self.n_cells - 1
    }

    pub fn is_clean(&self) -> bool {
        self.bond_disorder.iter().all(|d| *d == 0.0)
    }

    /// Effective hopping on bond `b`, disorder included.
    pub fn bond(&self, b: usize) -> f64 {
        let base = if b % 2 == 0 { self.j1 } else { self.j2 };
        base + self.bond_disorder[b]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells == 0 {
            return Err(Error::spec("n_cells", "must be at least 1"));
        }
        if !(self.j1 > 0.0 && self.j1.is_finite()) {
            return Err(Error::spec("j1", format!("must be positive, got {}", self.j1)));
        }
        if !(self.j2 > 0.0 && self.j2.is_finite()) {
            return Err(Error::spec("j2", format!("must be positive, got {}", self.j2)));
        }
        if self.bond_disorder.len() != self.n_bonds() {
            return Err(Error::spec(
                "bond_disorder",
                format!(
                    "expected {} offsets (2N-1), got {}",
                    self.n_bonds(),
                    self.bond_disorder.len()
                ),
            ));
        }
        Ok(())
    }
}

/// Junction couplings `K1..K4`.
///
/// `K1`: (1,s)-(2,s), `K2`: (1,s+1)-(2,s), `K3`: (1,s)-(2,s+1),
/// `K4`: (1,s+1)-(2,s+1), where `s`/`s+1` are the A/B sites of the
/// central cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct JunctionSpec {
    pub k: [f64; 4],
}

impl JunctionSpec {
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64) -> Self {
        Self { k: [k1, k2, k3, k4] }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// All four couplings equal (C4-symmetric junction).
    pub fn uniform(k: f64) -> Self {
        Self { k: [k; 4] }
    }

    /// Junction invariant under the 180 degree rotation of the four-node
    /// square, which exchanges K1 with K4 and K2 with K3.
    ///
    /// Opens the antisymmetric channel with strength proportional to
    /// `k_plus - k_minus` and keeps the {1S, 2S} and {1A, 2A} subspaces
    /// decoupled.
    pub fn z2(k_plus: f64, k_minus: f64) -> Self {
        Self {
            k: [k_plus, k_minus, k_minus, k_plus],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, k) in self.k.iter().enumerate() {
            if !(k.is_finite() && *k >= 0.0) {
                return Err(Error::spec(
                    "k",
                    format!("K{} must be non-negative, got {}", i + 1, k),
                ));
            }
        }
        Ok(())
    }
}

/// Two identical-length chains crossing at their centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub chain1: ChainSpec,
    pub chain2: ChainSpec,
    pub junction: JunctionSpec,
}

impl SystemSpec {
    pub fn new(chain1: ChainSpec, chain2: ChainSpec, junction: JunctionSpec) -> Result<Self> {
        let spec = Self {
            chain1,
            chain2,
            junction,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Two clean copies of the same chain.
    pub fn clean(n_cells: usize, j1: f64, j2: f64, junction: JunctionSpec) -> Result<Self> {
        let chain = ChainSpec::new(n_cells, j1, j2)?;
        Self::new(chain.clone(), chain, junction)
    }

    pub fn n_cells(&self) -> usize {
        self.chain1.n_cells
    }

    pub fn n_sites(&self) -> usize {
        4 * self.n_cells()
    }

    pub fn with_junction(&self, junction: JunctionSpec) -> Self {
        Self {
            junction,
            ..self.clone()
        }
    }

    /// Flattened indices of the central sites `(1,s), (1,s+1), (2,s), (2,s+1)`.
    pub fn central_sites(&self) -> [usize; 4] {
        let n = self.n_cells();
        let cell = (n + 1) / 2;
        [
            SiteIndex::new(Chain::One, cell, Sublattice::A).flat(n),
            SiteIndex::new(Chain::One, cell, Sublattice::B).flat(n),
            SiteIndex::new(Chain::Two, cell, Sublattice::A).flat(n),
            SiteIndex::new(Chain::Two, cell, Sublattice::B).flat(n),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.chain1.validate()?;
        self.chain2.validate()?;
        self.junction.validate()?;
        if self.chain1.n_cells != self.chain2.n_cells {
            return Err(Error::spec(
                "n_cells",
                format!(
                    "chains must have equal length ({} vs {})",
                    self.chain1.n_cells, self.chain2.n_cells
                ),
            ));
        }
        if self.chain1.n_cells % 2 == 0 {
            return Err(Error::spec(
                "n_cells",
                format!("must be odd so the central cell is defined, got {}", self.chain1.n_cells),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chain {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

/// A site label `(chain, cell, sublattice)` with one-based cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SiteIndex {
    pub chain: Chain,
    pub cell: usize,
    pub sublattice: Sublattice,
}

impl SiteIndex {
    pub fn new(chain: Chain, cell: usize, sublattice: Sublattice) -> Self {
        Self {
            chain,
            cell,
            sublattice,
        }
    }

    pub fn flat(&self, n_cells: usize) -> usize {
        debug_assert!(self.cell >= 1 && self.cell <= n_cells);
        let chain = match self.chain {
            Chain::One => 0,
            Chain::Two => 1,
        };
        let sub = match self.sublattice {
            Sublattice::A => 0,
            Sublattice::B => 1,
        };
        chain * 2 * n_cells + 2 * (self.cell - 1) + sub
    }

    pub fn from_flat(mu: usize, n_cells: usize) -> Option<Self> {
        if mu >= 4 * n_cells {
            return None;
        }
        let chain = if mu < 2 * n_cells { Chain::One } else { Chain::Two };
        let local = mu % (2 * n_cells);
        let sublattice = if local % 2 == 0 { Sublattice::A } else { Sublattice::B };
        Some(Self::new(chain, local / 2 + 1, sublattice))
    }
}

/// How bond disorder is shared between the two chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DisorderMode {
    /// Both chains receive the same realization and stay identical.
    #[default]
    Mirrored,
    /// Each chain draws its own offsets.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub delta: f64,
    pub seed: u64,
    #[serde(default)]
    pub mode: DisorderMode,
}

impl DisorderSpec {
    pub fn none() -> Self {
        Self {
            delta: 0.0,
            seed: 0,
            mode: DisorderMode::Mirrored,
        }
    }
}

/// Uniform offsets in `[-delta, delta]`, one per bond.
pub fn draw_bond_disorder<R: Rng + ?Sized>(n_cells: usize, delta: f64, rng: &mut R) -> Vec<f64> {
    (0..2 * n_cells - 1)
        .map(|_| {
            if delta > 0.0 {
                rng.random_range(-delta..=delta)
            } else {
                0.0
            }
        })
        .collect()
}

/// Draws the disorder of both chains from `seed`.
pub fn draw_system_disorder(
    n_cells: usize,
    disorder: &DisorderSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(disorder.delta >= 0.0 && disorder.delta.is_finite()) {
        return Err(Error::spec("disorder.delta", "must be a non-negative number"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(disorder.seed);
    let first = draw_bond_disorder(n_cells, disorder.delta, &mut rng);
    let second = match disorder.mode {
        DisorderMode::Mirrored => first.clone(),
        DisorderMode::Independent => draw_bond_disorder(n_cells, disorder.delta, &mut rng),
    };
    Ok((first, second))
}

/// JSON form of a system: `{"n_cells", "j1", "j2", "k": [..4], "disorder": {"delta", "seed"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_cells: usize,
    pub j1: f64,
    #[serde(default = "unit_j2")]
    pub j2: f64,
    #[serde(default)]
    pub k: [f64; 4],
    #[serde(default = "DisorderSpec::none")]
    pub disorder: DisorderSpec,
}

fn unit_j2() -> f64 {
    1.0
}

impl SystemConfig {
    pub fn junction(&self) -> JunctionSpec {
        JunctionSpec { k: self.k }
    }

    /// Validates the configuration and draws the disorder realization.
    pub fn build(&self) -> Result<SystemSpec> {
        let clean = ChainSpec::new(self.n_cells, self.j1, self.j2)?;
        let (d1, d2) = draw_system_disorder(self.n_cells, &self.disorder)?;
        SystemSpec::new(
            clean.clone().with_disorder(d1)?,
            clean.with_disorder(d2)?,
            self.junction(),
        )
    }
}

/// Tight-binding matrix of one chain (zero diagonal in the rotating frame).
pub fn build_chain_hamiltonian(spec: &ChainSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = spec.n_sites();
    let mut h = DMatrix::zeros(n, n);
    for b in 0..spec.n_bonds() {
        let t = spec.bond(b);
        if !(t > 0.0) {
            return Err(Error::spec(
                "bond_disorder",
                format!("bond {b} has non-positive hopping {t}"),
            ));
        }
        h[(b, b + 1)] = t;
        h[(b + 1, b)] = t;
    }
    Ok(h)
}

/// The four junction couplings as a `4N x 4N` symmetric matrix.
pub fn build_junction_hamiltonian(system: &SystemSpec) -> Result<DMatrix<f64>> {
    system.validate()?;
    let n = system.n_sites();
    let [s1, s1b, s2, s2b] = system.central_sites();
    let links = [(s1, s2), (s1b, s2), (s1, s2b), (s1b, s2b)];
    let mut h = DMatrix::zeros(n, n);
    for (k, (a, b)) in system.junction.k.iter().zip(links) {
        h[(a, b)] += *k;
        h[(b, a)] += *k;
    }
    Ok(h)
}

pub fn build_total_hamiltonian(system: &SystemSpec) -> Result<DMatrix<f64>> {
    let mut h = build_junction_hamiltonian(system)?;
    let m = system.chain1.n_sites();
    h.view_mut((0, 0), (m, m))
        .copy_from(&build_chain_hamiltonian(&system.chain1)?);
    h.view_mut((m, m), (m, m))
        .copy_from(&build_chain_hamiltonian(&system.chain2)?);
    Ok(h)
}

/// Chiral operator `diag(+1, -1, +1, ...)` of an `n`-site block.
pub fn chiral_signs(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sorted_eigh;

    #[test]
    fn dimer_matrix() {
        let h = build_chain_hamiltonian(&ChainSpec::new(1, 0.4, 1.0).unwrap()).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.4, 0.0]));
    }

    #[test]
    fn bond_pattern() {
        let h = build_chain_hamiltonian(&ChainSpec::new(3, 0.3, 1.0).unwrap()).unwrap();
        for i in 0..3 {
            assert_eq!(h[(2 * i, 2 * i + 1)], 0.3);
        }
        for i in 0..2 {
            assert_eq!(h[(2 * i + 1, 2 * i + 2)], 1.0);
        }
        assert!((0..6).all(|i| h[(i, i)] == 0.0));
    }

    #[test]
    fn four_site_chain_against_characteristic_polynomial() {
        // det(H - x) = x^4 - (2 a^2 + b^2) x^2 + a^4 for hoppings a, b, a.
        let (a, b) = (1.0_f64, 1.0_f64);
        let h = build_chain_hamiltonian(&ChainSpec::new(2, a, b).unwrap()).unwrap();
        let (vals, _) = sorted_eigh(&h);
        let p = 2.0 * a * a + b * b;
        let disc = (p * p - 4.0 * a.powi(4)).sqrt();
        let mut roots = vec![
            ((p + disc) / 2.0).sqrt(),
            ((p - disc) / 2.0).sqrt(),
            -((p + disc) / 2.0).sqrt(),
            -((p - disc) / 2.0).sqrt(),
        ];
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (v, r) in vals.iter().zip(&roots) {
            assert!((v - r).abs() < 1e-12, "{v} vs {r}");
        }
        // uniform four-site chain: 2cos(k pi / 5)
        let golden = 2.0 * (std::f64::consts::PI / 5.0).cos();
        assert!((vals[3] - golden).abs() < 1e-12);
    }

    #[test]
    fn negative_bond_rejected() {
        let spec = ChainSpec::new(2, 0.3, 1.0)
            .unwrap()
            .with_disorder(vec![-0.4, 0.0, 0.0])
            .unwrap();
        assert!(matches!(
            build_chain_hamiltonian(&spec),
            Err(Error::InvalidSpec { field: "bond_disorder", .. })
        ));
    }

    #[test]
    fn disorder_length_checked() {
        let err = ChainSpec::new(3, 0.3, 1.0)
            .unwrap()
            .with_disorder(vec![0.0; 4])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidSpec { field: "bond_disorder", .. }));
    }

    #[test]
    fn even_cell_count_rejected() {
        let err = SystemSpec::clean(4, 0.4, 1.0, JunctionSpec::uniform(0.07)).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec { field: "n_cells", .. }));
    }

    #[test]
    fn junction_positions_n5() {
        let sys = SystemSpec::clean(5, 0.4, 1.0, JunctionSpec::uniform(0.07)).unwrap();
        let h = build_junction_hamiltonian(&sys).unwrap();
        let mut nonzero = vec![];
        for i in 0..20 {
            for j in 0..20 {
                if h[(i, j)] != 0.0 {
                    assert_eq!(h[(i, j)], 0.07);
                    nonzero.push((i, j));
                }
            }
        }
        let mut expected = vec![(4, 14), (5, 14), (4, 15), (5, 15)];
        expected.extend(expected.clone().into_iter().map(|(a, b)| (b, a)));
        expected.sort();
        nonzero.sort();
        assert_eq!(nonzero, expected);
    }

    #[test]
    fn junction_term_by_term() {
        let (a, b, c, d) = (0.011, 0.023, 0.037, 0.041);
        let sys = SystemSpec::clean(3, 0.4, 1.0, JunctionSpec::new(a, b, c, d)).unwrap();
        let h = build_junction_hamiltonian(&sys).unwrap();
        // raising/lowering operator products in the one-excitation basis
        let n = 3;
        let site = |chain, sub| SiteIndex::new(chain, 2, sub).flat(n);
        let mut expected = DMatrix::<f64>::zeros(12, 12);
        let mut hop = |k: f64, from: usize, to: usize| {
            expected[(from, to)] += k;
            expected[(to, from)] += k;
        };
        hop(a, site(Chain::One, Sublattice::A), site(Chain::Two, Sublattice::A));
        hop(b, site(Chain::One, Sublattice::B), site(Chain::Two, Sublattice::A));
        hop(c, site(Chain::One, Sublattice::A), site(Chain::Two, Sublattice::B));
        hop(d, site(Chain::One, Sublattice::B), site(Chain::Two, Sublattice::B));
        assert_eq!(h, expected);
    }

    #[test]
    fn zero_junction_is_direct_sum() {
        let chain = ChainSpec::new(5, 0.4, 1.0).unwrap();
        let sys = SystemSpec::new(chain.clone(), chain.clone(), JunctionSpec::zero()).unwrap();
        let h = build_total_hamiltonian(&sys).unwrap();
        let hc = build_chain_hamiltonian(&chain).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let expected = if i < 10 && j < 10 {
                    hc[(i, j)]
                } else if i >= 10 && j >= 10 {
                    hc[(i - 10, j - 10)]
                } else {
                    0.0
                };
                assert_eq!(h[(i, j)], expected);
            }
        }
    }

    #[test]
    fn site_index_round_trip() {
        for n in [1, 3, 5] {
            for mu in 0..4 * n {
                let site = SiteIndex::from_flat(mu, n).unwrap();
                assert_eq!(site.flat(n), mu);
            }
        }
        assert_eq!(
            SiteIndex::new(Chain::Two, 3, Sublattice::B).flat(5),
            2 * 5 + 2 * 2 + 1
        );
    }

    #[test]
    fn mirrored_and_independent_draws() {
        let mut spec = DisorderSpec {
            delta: 0.1,
            seed: 42,
            mode: DisorderMode::Mirrored,
        };
        let (a, b) = draw_system_disorder(5, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|d| d.abs() <= 0.1));
        spec.mode = DisorderMode::Independent;
        let (c, d) = draw_system_disorder(5, &spec).unwrap();
        assert_eq!(a, c);
        assert_ne!(c, d);
        assert_eq!(draw_system_disorder(5, &spec).unwrap(), (c, d));
    }

    #[test]
    fn system_config_json() {
        let cfg: SystemConfig = serde_json::from_str(
            r#"{"n_cells": 5, "j1": 0.4, "j2": 1.0, "k": [0.07, 0.07, 0.07, 0.07],
                "disorder": {"delta": 0.05, "seed": 7}}"#,
        )
        .unwrap();
        assert_eq!(cfg.disorder.mode, DisorderMode::Mirrored);
        let sys = cfg.build().unwrap();
        assert_eq!(sys.junction, JunctionSpec::uniform(0.07));
        assert!(!sys.chain1.is_clean());
        let bad = serde_json::from_str::<SystemConfig>(r#"{"n_cells": 5, "j1": 0.4, "kk": 1}"#);
        assert!(bad.is_err());
    }
}
