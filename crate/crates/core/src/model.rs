//! Model parameters and the spin-boson Hamiltonian in the product basis
//! `|z⟩ ⊗ |k⟩` of a two-level system and a truncated oscillator.
//!
//! The oscillator number basis is taken at the frequency `r` of the
//! harmonic part, so `(P² + r²Q²)/2` is diagonal with entries `r(k + ½)`
//! and the coordinate `Q = (a + a†)/√(2r)` couples only neighbouring levels.
//! Basis vectors are ordered `i = 2k + z` with `z = 0` for spin up and
//! `z = 1` for spin down.

use crate::error::{Error, Result};

/// Physical parameters of an excitonic dimer with one relative vibration.
///
/// Energies share one arbitrary unit, `gamma` is energy per length and
/// `omega` is an angular frequency in matching units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimerParams {
    pub eps1: f64,
    pub eps2: f64,
    pub gamma: f64,
    pub omega: f64,
    /// Magnitude of the (negative) transfer matrix element.
    pub v: f64,
}

/// Dimensionless parameters of the spin-boson Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    p: f64,
    r: f64,
    eps_plus: f64,
    eps_minus: f64,
}

impl ModelParams {
    /// Coupling `p ≥ 0`, adiabaticity `r > 0`, asymmetry `eps_minus`; the
    /// energy centre `eps_plus` starts at zero.
    pub fn new(p: f64, r: f64, eps_minus: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::domain("p", format!("must be finite and >= 0, got {p}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::domain("r", format!("must be finite and > 0, got {r}")));
        }
        if !eps_minus.is_finite() {
            return Err(Error::domain("eps_minus", "must be finite"));
        }
        Ok(Self {
            p,
            r,
            eps_plus: 0.0,
            eps_minus,
        })
    }

    pub fn with_eps_plus(mut self, eps_plus: f64) -> Result<Self> {
        if !eps_plus.is_finite() {
            return Err(Error::domain("eps_plus", "must be finite"));
        }
        self.eps_plus = eps_plus;
        Ok(self)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn eps_plus(&self) -> f64 {
        self.eps_plus
    }

    pub fn eps_minus(&self) -> f64 {
        self.eps_minus
    }

    /// Prefactor `√(p/2)·r` of `Q σ_z`.
    pub fn coordinate_coupling(&self) -> f64 {
        (self.p / 2.0).sqrt() * self.r
    }

    /// Ladder-operator form of the vibronic coupling, `√(p·r)/2`.
    pub fn ladder_coupling(&self) -> f64 {
        (self.p * self.r).sqrt() / 2.0
    }
}

/// Maps dimer parameters onto the dimensionless spin-boson parameters.
/// Energies are measured in units of `2V`.
pub fn reduce_dimer_params(d: &DimerParams) -> Result<ModelParams> {
    if !(d.omega.is_finite() && d.omega > 0.0) {
        return Err(Error::domain("omega", format!("must be > 0, got {}", d.omega)));
    }
    if !(d.v.is_finite() && d.v > 0.0) {
        return Err(Error::domain("v", format!("must be > 0, got {}", d.v)));
    }
    let p = d.gamma * d.gamma / (2.0 * d.v * d.omega * d.omega);
    let r = d.omega / (2.0 * d.v);
    let eps_plus = (d.eps1 + d.eps2) / (4.0 * d.v);
    let eps_minus = (d.eps1 - d.eps2) / (4.0 * d.v);
    ModelParams::new(p, r, eps_minus)?.with_eps_plus(eps_plus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    /// Eigenvalue of `σ_z`.
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn offset(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Spin::Up => "up",
            Spin::Down => "down",
        }
    }
}

/// A product basis vector `|spin⟩|level⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisState {
    pub spin: Spin,
    pub level: usize,
}

impl BasisState {
    pub fn new(spin: Spin, level: usize) -> Self {
        Self { spin, level }
    }

    pub fn index(&self) -> usize {
        2 * self.level + self.spin.offset()
    }

    pub fn from_index(i: usize) -> Self {
        let spin = if i.is_multiple_of(2) { Spin::Up } else { Spin::Down };
        Self { spin, level: i / 2 }
    }
}

/// Oscillator truncation and the number of low-lying states kept for analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    n_osc: usize,
    keep: usize,
}

impl BasisSpec {
    pub const DEFAULT_N_OSC: usize = 2000;
    pub const DEFAULT_KEEP: usize = 1100;

    pub fn new(n_osc: usize, keep: usize) -> Result<Self> {
        if n_osc == 0 {
            return Err(Error::domain("n_osc", "must be positive"));
        }
        let dim = n_osc
            .checked_mul(2)
            .ok_or_else(|| Error::Resource(format!("matrix dimension 2*{n_osc} overflows")))?;
        if keep == 0 || keep > dim {
            return Err(Error::domain(
                "keep",
                format!("must satisfy 0 < keep <= 2*n_osc = {dim}, got {keep}"),
            ));
        }
        Ok(Self { n_osc, keep })
    }

    /// Keeps every eigenstate of the truncated problem.
    pub fn full(n_osc: usize) -> Result<Self> {
        Self::new(n_osc, n_osc.saturating_mul(2))
    }

    pub fn n_osc(&self) -> usize {
        self.n_osc
    }

    pub fn keep(&self) -> usize {
        self.keep
    }

    pub fn dim(&self) -> usize {
        2 * self.n_osc
    }
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            n_osc: Self::DEFAULT_N_OSC,
            keep: Self::DEFAULT_KEEP,
        }
    }
}

/// `⟨bra|H|ket⟩` in closed form.
pub fn hamiltonian_element(
    m: &ModelParams,
    n_osc: usize,
    bra: BasisState,
    ket: BasisState,
) -> Result<f64> {
    for s in [bra, ket] {
        if s.level >= n_osc {
            return Err(Error::IndexOutOfRange {
                what: "oscillator level",
                index: s.level,
                limit: n_osc,
            });
        }
    }
    Ok(element_unchecked(m, bra, ket))
}

// eps_plus is added last so that the diagonal agrees bit for bit with the
// shift/base split of `SymmetricBandMatrix`.
fn element_unchecked(m: &ModelParams, bra: BasisState, ket: BasisState) -> f64 {
    let (k, k2) = (bra.level, ket.level);
    if bra.spin != ket.spin {
        return if k == k2 { -0.5 } else { 0.0 };
    }
    let sign = bra.spin.sign();
    if k == k2 {
        m.eps_plus + diagonal_base(m, bra.spin, k)
    } else if k.abs_diff(k2) == 1 {
        sign * m.ladder_coupling() * (k.max(k2) as f64).sqrt()
    } else {
        0.0
    }
}

fn diagonal_base(m: &ModelParams, spin: Spin, k: usize) -> f64 {
    m.r * (k as f64 + 0.5) + spin.sign() * m.eps_minus
}

/// Real symmetric matrix with total bandwidth 2 in the `2k + z` ordering.
///
/// `bands[i] = [a(i,i), a(i,i+1), a(i,i+2)]` without the uniform diagonal
/// shift, which is kept separately so that it can be added to eigenvalues
/// after diagonalization.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricBandMatrix {
    dim: usize,
    shift: f64,
    bands: Vec<[f64; 3]>,
    params: ModelParams,
    basis: BasisSpec,
}

impl SymmetricBandMatrix {
    pub const BANDWIDTH: usize = 2;

    /// Parameters the matrix was assembled from.
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn n_osc(&self) -> usize {
        self.dim / 2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Multiple of the identity contained in the matrix.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Entry `(i, j)` without the identity shift.
    pub fn base_entry(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim, "({i}, {j}) outside {0}x{0}", self.dim);
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        match hi - lo {
            d @ 0..=2 => self.bands[lo][d],
            _ => 0.0,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let base = self.base_entry(i, j);
        if i == j {
            self.shift + base
        } else {
            base
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (i < self.dim && j < self.dim).then(|| self.entry(i, j))
    }

    /// `out = A·x`
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = (self.shift + self.bands[i][0]) * x[i];
            for d in 1..=Self::BANDWIDTH {
                if i + d < self.dim {
                    acc += self.bands[i][d] * x[i + d];
                }
                if i >= d {
                    acc += self.bands[i - d][d] * x[i - d];
                }
            }
            out[i] = acc;
        }
    }

    /// Row-major dense copy, without the identity shift.
    pub fn dense_base(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for d in 0..=Self::BANDWIDTH {
                if i + d < n {
                    out[i * n + i + d] = self.bands[i][d];
                    out[(i + d) * n + i] = self.bands[i][d];
                }
            }
        }
        out
    }

    /// Largest `|(HΠ − ΠH)_ij|` for the parity `Π = σ_x ⊗ (−1)^k`.
    pub fn parity_commutator_max(&self) -> f64 {
        let n = self.dim;
        let partner = |i: usize| i ^ 1;
        let sign = |i: usize| if (i / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut worst = 0.0f64;
        for i in 0..n {
            let lo = i.saturating_sub(4);
            let hi = (i + 4).min(n - 1);
            for j in lo..=hi {
                let h_pi = self.entry(i, partner(j)) * sign(j);
                let pi_h = sign(i) * self.entry(partner(i), j);
                worst = worst.max((h_pi - pi_h).abs());
            }
        }
        worst
    }
}

/// Assembles the Hamiltonian in the truncated product basis.
pub fn build_hamiltonian(m: &ModelParams, b: &BasisSpec) -> Result<SymmetricBandMatrix> {
    let dim = b.dim();
    let mut bands: Vec<[f64; 3]> = Vec::new();
    bands
        .try_reserve_exact(dim)
        .map_err(|e| Error::Resource(format!("band storage for dimension {dim}: {e}")))?;
    let g = m.ladder_coupling();
    for i in 0..dim {
        let s = BasisState::from_index(i);
        let diag = diagonal_base(m, s.spin, s.level);
        let flip = if s.spin == Spin::Up { -0.5 } else { 0.0 };
        let vib = if s.level + 1 < b.n_osc() {
            s.spin.sign() * g * ((s.level + 1) as f64).sqrt()
        } else {
            0.0
        };
        bands.push([diag, flip, vib]);
    }
    Ok(SymmetricBandMatrix {
        dim,
        shift: m.eps_plus,
        bands,
        params: *m,
        basis: *b,
    })
}
