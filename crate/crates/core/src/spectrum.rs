//! Dense diagonalization of the assembled Hamiltonian and the resulting
//! eigenstate coefficient tables.

use std::io::{BufRead, Write};

use faer::{Mat, Side};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, BasisSpec, ModelParams, Spin, SymmetricBandMatrix};

/// Largest dimension handed to the dense solver (two `dim²` f64 buffers).
pub const MAX_DENSE_DIM: usize = 16_384;

/// Lowest eigenpairs of the spin-boson Hamiltonian.
///
/// `coeffs` is state-major: state `λ` occupies `coeffs[λ·dim .. (λ+1)·dim]`
/// in the basis order `2m + z`, so `c_{z,m}^{(λ)} = coeffs[λ·dim + 2m + z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    params: ModelParams,
    basis: BasisSpec,
    energies: Vec<f64>,
    coeffs: Vec<f64>,
    fingerprint: u64,
}

impl EigenSystem {
    /// Validates and wraps precomputed eigenpairs.
    pub fn from_parts(
        params: ModelParams,
        basis: BasisSpec,
        energies: Vec<f64>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let dim = basis.dim();
        if energies.len() != basis.keep() {
            return Err(Error::domain(
                "energies",
                format!("expected {} values, got {}", basis.keep(), energies.len()),
            ));
        }
        if coeffs.len() != basis.keep() * dim {
            return Err(Error::domain(
                "coeffs",
                format!("expected {} values, got {}", basis.keep() * dim, coeffs.len()),
            ));
        }
        if energies.windows(2).any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt())) {
            return Err(Error::domain("energies", "not sorted ascending"));
        }
        let fingerprint = fingerprint(&params, &basis, &energies, &coeffs);
        Ok(Self {
            params,
            basis,
            energies,
            coeffs,
            fingerprint,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn keep(&self) -> usize {
        self.basis.keep()
    }

    pub fn n_osc(&self) -> usize {
        self.basis.n_osc()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Content hash tying derived spectra back to this eigensystem.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// All kept eigenvectors, state-major: `coeffs[λ·dim + 2m + z]`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn check_index(&self, lambda: usize) -> Result<()> {
        if lambda < self.keep() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "eigenstate",
                index: lambda,
                limit: self.keep(),
            })
        }
    }

    pub fn energy(&self, lambda: usize) -> Result<f64> {
        self.check_index(lambda)?;
        Ok(self.energies[lambda])
    }

    /// Coefficient vector of state `lambda` in basis order.
    pub fn state(&self, lambda: usize) -> Result<&[f64]> {
        self.check_index(lambda)?;
        let dim = self.dim();
        Ok(&self.coeffs[lambda * dim..(lambda + 1) * dim])
    }

    /// `c_{z,m}^{(λ)}`; panics when out of range.
    pub fn coeff(&self, lambda: usize, spin: Spin, m: usize) -> f64 {
        assert!(lambda < self.keep() && m < self.n_osc());
        self.coeffs[lambda * self.dim() + 2 * m + spin.offset()]
    }

    /// The `m = 0` spin amplitudes `(c↑0, c↓0)`.
    pub fn ground_level_spin(&self, lambda: usize) -> Result<(f64, f64)> {
        let s = self.state(lambda)?;
        Ok((s[0], s[1]))
    }

    /// Writes `energies.csv` and `coeffs.csv` style tables.
    pub fn write_csv<E: Write, C: Write>(&self, mut energies: E, mut coeffs: C) -> Result<()> {
        write_header(&mut energies, &self.params, &self.basis)?;
        writeln!(energies, "lambda,energy")?;
        for (l, e) in self.energies.iter().enumerate() {
            writeln!(energies, "{l},{e:e}")?;
        }
        write_header(&mut coeffs, &self.params, &self.basis)?;
        writeln!(coeffs, "lambda,z,m,c")?;
        let dim = self.dim();
        for l in 0..self.keep() {
            for (i, c) in self.coeffs[l * dim..(l + 1) * dim].iter().enumerate() {
                let z = if i % 2 == 0 { Spin::Up } else { Spin::Down };
                writeln!(coeffs, "{l},{},{},{c:e}", z.label(), i / 2)?;
            }
        }
        energies.flush()?;
        coeffs.flush()?;
        Ok(())
    }

    /// Reads the tables written by [`EigenSystem::write_csv`].
    pub fn read_csv<E: BufRead, C: BufRead>(energies: E, coeffs: C) -> Result<Self> {
        let (params, basis, rows) = read_table(energies, "lambda,energy")?;
        let mut ev = vec![f64::NAN; basis.keep()];
        let mut seen = 0usize;
        for (line, fields) in rows {
            let [l, e] = fields_array::<2>(&fields, line)?;
            let l = parse_index(l, line, basis.keep())?;
            ev[l] = parse_f64(e, line)?;
            seen += 1;
        }
        if seen != basis.keep() {
            return Err(Error::Format {
                line: 0,
                reason: format!("expected {} energies, found {seen}", basis.keep()),
            });
        }

        let (cparams, cbasis, rows) = read_table(coeffs, "lambda,z,m,c")?;
        if cparams != params || cbasis != basis {
            return Err(Error::Format {
                line: 0,
                reason: "energy and coefficient tables disagree on parameters".into(),
            });
        }
        let dim = basis.dim();
        let mut cv = vec![0.0; basis.keep() * dim];
        let mut count = 0usize;
        for (line, fields) in rows {
            let [l, z, m, c] = fields_array::<4>(&fields, line)?;
            let l = parse_index(l, line, basis.keep())?;
            let m = parse_index(m, line, basis.n_osc())?;
            let z = match z {
                "up" => Spin::Up,
                "down" => Spin::Down,
                other => {
                    return Err(Error::Format {
                        line,
                        reason: format!("unknown spin `{other}`"),
                    })
                }
            };
            cv[l * dim + 2 * m + z.offset()] = parse_f64(c, line)?;
            count += 1;
        }
        if count != cv.len() {
            return Err(Error::Format {
                line: 0,
                reason: format!("expected {} coefficients, found {count}", cv.len()),
            });
        }
        Self::from_parts(params, basis, ev, cv)
    }
}

fn fingerprint(params: &ModelParams, basis: &BasisSpec, energies: &[f64], coeffs: &[f64]) -> u64 {
    let mut h = Sha256::new();
    for x in [params.p(), params.r(), params.eps_plus(), params.eps_minus()] {
        h.update(x.to_bits().to_le_bytes());
    }
    h.update((basis.n_osc() as u64).to_le_bytes());
    h.update((basis.keep() as u64).to_le_bytes());
    for x in energies.iter().chain(coeffs) {
        h.update(x.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn write_header<W: Write>(w: &mut W, params: &ModelParams, basis: &BasisSpec) -> Result<()> {
    writeln!(w, "# sbdimer eigensystem v1")?;
    writeln!(w, "# p={:e}", params.p())?;
    writeln!(w, "# r={:e}", params.r())?;
    writeln!(w, "# eps_plus={:e}", params.eps_plus())?;
    writeln!(w, "# eps_minus={:e}", params.eps_minus())?;
    writeln!(w, "# n_osc={}", basis.n_osc())?;
    writeln!(w, "# keep={}", basis.keep())?;
    Ok(())
}

type Rows = Vec<(usize, Vec<String>)>;

fn read_table<R: BufRead>(reader: R, columns: &str) -> Result<(ModelParams, BasisSpec, Rows)> {
    let mut header = std::collections::HashMap::new();
    let mut rows = Vec::new();
    let mut saw_columns = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !saw_columns {
            if line.trim() != columns {
                return Err(Error::Format {
                    line: lineno,
                    reason: format!("expected column header `{columns}`"),
                });
            }
            saw_columns = true;
            continue;
        }
        rows.push((lineno, line.split(',').map(|s| s.trim().to_string()).collect()));
    }
    let get = |k: &str| {
        header.get(k).ok_or_else(|| Error::Format {
            line: 0,
            reason: format!("missing header `{k}`"),
        })
    };
    let num = |k: &str| -> Result<f64> { parse_f64(get(k)?, 0) };
    let int = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| Error::Format {
            line: 0,
            reason: format!("bad integer for `{k}`"),
        })
    };
    let params = ModelParams::new(num("p")?, num("r")?, num("eps_minus")?)?.with_eps_plus(num("eps_plus")?)?;
    let basis = BasisSpec::new(int("n_osc")?, int("keep")?)?;
    Ok((params, basis, rows))
}

fn fields_array<const N: usize>(fields: &[String], line: usize) -> Result<[&str; N]> {
    if fields.len() != N {
        return Err(Error::Format {
            line,
            reason: format!("expected {N} fields, got {}", fields.len()),
        });
    }
    Ok(std::array::from_fn(|i| fields[i].as_str()))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Format {
        line,
        reason: format!("not a number: `{s}`"),
    })
}

fn parse_index(s: &str, line: usize, limit: usize) -> Result<usize> {
    let v: usize = s.parse().map_err(|_| Error::Format {
        line,
        reason: format!("not an index: `{s}`"),
    })?;
    if v >= limit {
        return Err(Error::Format {
            line,
            reason: format!("index {v} >= {limit}"),
        });
    }
    Ok(v)
}

fn dense(h: &SymmetricBandMatrix) -> Result<Mat<f64>> {
    let n = h.dim();
    if n > MAX_DENSE_DIM {
        return Err(Error::Resource(format!(
            "dense diagonalization of dimension {n} exceeds the limit {MAX_DENSE_DIM}"
        )));
    }
    Ok(Mat::from_fn(n, n, |i, j| h.base_entry(i, j)))
}

/// Lowest `keep` eigenpairs of `h`.
///
/// The uniform diagonal shift of `h` is added to the eigenvalues after the
/// decomposition, so it never perturbs the eigenvectors. Each eigenvector is
/// signed so that its largest-magnitude component (lowest index on ties) is
/// positive.
pub fn diagonalize(h: &SymmetricBandMatrix, keep: usize) -> Result<EigenSystem> {
    let basis = BasisSpec::new(h.n_osc(), keep)?;
    let a = dense(h)?;
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let n = h.dim();
    let mut energies = Vec::with_capacity(keep);
    let mut coeffs = Vec::with_capacity(keep * n);
    for l in 0..keep {
        let e = s[l] + h.shift();
        if !e.is_finite() {
            return Err(Error::Eigensolver(format!("non-finite eigenvalue at index {l}")));
        }
        energies.push(e);
        let start = coeffs.len();
        coeffs.extend((0..n).map(|i| u[(i, l)]));
        fix_sign(&mut coeffs[start..]);
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvector component".into()));
    }
    EigenSystem::from_parts(*h.params(), basis, energies, coeffs)
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// All eigenvalues of `h`, ascending.
pub fn eigenvalues(h: &SymmetricBandMatrix) -> Result<Vec<f64>> {
    let a = dense(h)?;
    let mut ev = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    for e in ev.iter_mut() {
        *e += h.shift();
    }
    if ev.iter().any(|e| !e.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok(ev)
}

/// Assembles and diagonalizes in one step.
pub fn solve(m: &ModelParams, b: &BasisSpec) -> Result<EigenSystem> {
    let h = build_hamiltonian(m, b)?;
    diagonalize(&h, b.keep())
}

/// Eigenvalue stability of the kept window under a larger oscillator basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub n_osc_small: usize,
    pub n_osc_large: usize,
    pub keep: usize,
    pub max_abs_shift: f64,
    pub tolerance: f64,
    pub converged: bool,
}

impl ConvergenceReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n_osc_small,n_osc_large,keep,max_abs_shift,tolerance,converged")?;
        writeln!(
            w,
            "{},{},{},{:e},{:e},{}",
            self.n_osc_small, self.n_osc_large, self.keep, self.max_abs_shift, self.tolerance, self.converged
        )?;
        Ok(())
    }
}

/// Larger truncation used by [`convergence_check`]: `⌈1.25·n_osc⌉`.
pub fn enlarged_n_osc(n_osc: usize) -> usize {
    n_osc + n_osc.div_ceil(4)
}

/// Compares the kept eigenvalues at `n_osc` against `⌈1.25·n_osc⌉`.
pub fn convergence_check(m: &ModelParams, b: &BasisSpec, tolerance: f64) -> Result<ConvergenceReport> {
    let small = eigenvalues(&build_hamiltonian(m, b)?)?;
    let n_large = enlarged_n_osc(b.n_osc());
    let large = eigenvalues(&build_hamiltonian(m, &BasisSpec::new(n_large, b.keep())?)?)?;
    Ok(compare_windows(&small, &large, b, n_large, tolerance))
}

/// Like [`convergence_check`] but reuses an existing eigensystem for the small basis.
pub fn convergence_against(es: &EigenSystem, tolerance: f64) -> Result<ConvergenceReport> {
    let b = es.basis();
    let n_large = enlarged_n_osc(b.n_osc());
    let large = eigenvalues(&build_hamiltonian(es.params(), &BasisSpec::new(n_large, b.keep())?)?)?;
    Ok(compare_windows(es.energies(), &large, b, n_large, tolerance))
}

fn compare_windows(small: &[f64], large: &[f64], b: &BasisSpec, n_large: usize, tolerance: f64) -> ConvergenceReport {
    let keep = b.keep();
    let max_abs_shift = small[..keep]
        .iter()
        .zip(&large[..keep])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ConvergenceReport {
        n_osc_small: b.n_osc(),
        n_osc_large: n_large,
        keep,
        max_abs_shift,
        tolerance,
        converged: max_abs_shift <= tolerance,
    }
}

/// Largest `‖H v_λ − E_λ v_λ‖ / max(1, |E_λ|)` over the kept states.
pub fn max_relative_residual(h: &SymmetricBandMatrix, es: &EigenSystem) -> f64 {
    let n = h.dim();
    assert_eq!(n, es.dim());
    let mut hv = vec![0.0; n];
    let mut worst = 0.0f64;
    for (l, &e) in es.energies().iter().enumerate() {
        let v = es.state(l).expect("index within keep");
        h.matvec(v, &mut hv);
        let res = hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(res / e.abs().max(1.0));
    }
    worst
}

/// Deviations from orthonormality of the kept coefficient vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthonormalityDefect {
    /// `max_λ |‖v_λ‖² − 1|`
    pub max_norm_error: f64,
    /// `max_{λ≠μ} |⟨v_λ|v_μ⟩|`
    pub max_overlap: f64,
}

pub fn orthonormality_defect(es: &EigenSystem) -> OrthonormalityDefect {
    let (n, k) = (es.dim(), es.keep());
    let v = Mat::from_fn(n, k, |i, l| es.coeffs[l * n + i]);
    let gram = v.transpose() * &v;
    let mut max_norm_error = 0.0f64;
    let mut max_overlap = 0.0f64;
    for a in 0..k {
        for b in 0..k {
            let g: f64 = gram[(a, b)];
            if a == b {
                max_norm_error = max_norm_error.max((g - 1.0).abs());
            } else {
                max_overlap = max_overlap.max(g.abs());
            }
        }
    }
    OrthonormalityDefect {
        max_norm_error,
        max_overlap,
    }
}
