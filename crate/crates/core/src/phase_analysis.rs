//! Eigenstate diagnostics: Bloch projections, Husimi projections at fixed
//! spin direction, and the parity expectation of the symmetric model.

use std::io::Write;

use rayon::prelude::*;

use crate::adiabatic::Orbit;
use crate::error::{Error, Result};
use crate::spectrum::EigenSystem;

/// Real two-component spin vector `c↑|↑⟩ + c↓|↓⟩` of unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinProjection {
    c_up: f64,
    c_down: f64,
}

impl SpinProjection {
    pub const UP: SpinProjection = SpinProjection { c_up: 1.0, c_down: 0.0 };
    pub const DOWN: SpinProjection = SpinProjection { c_up: 0.0, c_down: 1.0 };

    /// Normalizes `(c_up, c_down)`; rejects the zero vector.
    pub fn new(c_up: f64, c_down: f64) -> Result<Self> {
        let n = c_up.hypot(c_down);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::domain("spin", "needs a finite nonzero vector"));
        }
        Ok(Self {
            c_up: c_up / n,
            c_down: c_down / n,
        })
    }

    /// Equal-weight combination `(1, 1)/√2`.
    pub fn symmetric() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { c_up: h, c_down: h }
    }

    pub(crate) fn from_unit(c_up: f64, c_down: f64) -> Self {
        debug_assert!((c_up * c_up + c_down * c_down - 1.0).abs() < 1e-12);
        Self { c_up, c_down }
    }

    pub fn c_up(&self) -> f64 {
        self.c_up
    }

    pub fn c_down(&self) -> f64 {
        self.c_down
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_up * self.c_up + self.c_down * self.c_down
    }

    /// The orthogonal direction `(−c↓, c↑)`.
    pub fn orthogonal(&self) -> Self {
        Self {
            c_up: -self.c_down,
            c_down: self.c_up,
        }
    }

    pub fn sigma_x(&self) -> f64 {
        2.0 * self.c_up * self.c_down
    }

    pub fn sigma_z(&self) -> f64 {
        self.c_up * self.c_up - self.c_down * self.c_down
    }
}

/// A point of the oscillator phase plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    /// Coherent-state label `α = √(r/2)·Q + i·P/√(2r)` as `(Re α, Im α)`.
    pub fn alpha(&self, r: f64) -> (f64, f64) {
        ((r / 2.0).sqrt() * self.q, self.p / (2.0 * r).sqrt())
    }
}

/// `x_λ = ⟨λ|σ_x|λ⟩ = Σ_m 2 c↑m c↓m`.
pub fn bloch_projection(es: &EigenSystem, lambda: usize) -> Result<f64> {
    let v = es.state(lambda)?;
    Ok(v.chunks_exact(2).map(|c| 2.0 * c[0] * c[1]).sum())
}

/// `(E_λ, x_λ)` for every kept state, ascending in energy.
pub fn bloch_scan(es: &EigenSystem) -> Vec<(f64, f64)> {
    (0..es.keep())
        .map(|l| (es.energies()[l], bloch_projection(es, l).expect("index within keep")))
        .collect()
}

/// `⟨λ|σ_x ⊗ (−1)^m|λ⟩`.
pub fn parity_expectation(es: &EigenSystem, lambda: usize) -> Result<f64> {
    let v = es.state(lambda)?;
    Ok(v.chunks_exact(2)
        .enumerate()
        .map(|(m, c)| {
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            s * (c[0] * c[1] + c[1] * c[0])
        })
        .sum())
}

/// `⟨λ|σ_z|λ⟩`.
pub fn sigma_z_expectation(es: &EigenSystem, lambda: usize) -> Result<f64> {
    let v = es.state(lambda)?;
    Ok(v.chunks_exact(2).map(|c| c[0] * c[0] - c[1] * c[1]).sum())
}

/// Coherent-state overlaps `⟨m|α⟩ = α^m/√(m!)·e^{−|α|²/2}` summed against
/// a weight vector.
///
/// Only the levels where `|⟨m|α⟩|` is representable and non-negligible are
/// visited: the first of them is evaluated in log-magnitude/phase form, the
/// rest by the recurrence `⟨m+1|α⟩ = ⟨m|α⟩·α/√(m+1)`.
#[derive(Debug, Clone)]
pub struct CoherentOverlap {
    r: f64,
    inv_sqrt: Vec<f64>,
    half_log_factorial: Vec<f64>,
}

impl CoherentOverlap {
    pub fn new(r: f64, n_levels: usize) -> Self {
        let mut inv_sqrt = vec![0.0; n_levels.max(1)];
        let mut half_log_factorial = vec![0.0; n_levels.max(1)];
        for m in 1..n_levels {
            inv_sqrt[m] = 1.0 / (m as f64).sqrt();
            half_log_factorial[m] = half_log_factorial[m - 1] + 0.5 * (m as f64).ln();
        }
        Self {
            r,
            inv_sqrt,
            half_log_factorial,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.inv_sqrt.len()
    }

    /// Levels outside `[lo, hi]` contribute below ~1e-40 in amplitude.
    fn level_window(&self, mean: f64) -> (usize, usize) {
        let spread = mean.sqrt();
        let lo = (mean - 16.0 * spread - 40.0).floor().max(0.0) as usize;
        let hi = (mean + 20.0 * spread + 60.0).ceil();
        let last = self.n_levels() - 1;
        let hi = if hi >= last as f64 { last } else { hi as usize };
        (lo.min(last), hi)
    }

    /// `Σ_m w_m ⟨m|α⟩` as `(re, im)`.
    pub fn project(&self, weights: &[f64], pt: PhasePoint) -> (f64, f64) {
        assert!(weights.len() <= self.n_levels());
        if weights.is_empty() {
            return (0.0, 0.0);
        }
        let (ar, ai) = pt.alpha(self.r);
        let mean = ar * ar + ai * ai;
        let (lo, hi) = self.level_window(mean);
        let hi = hi.min(weights.len() - 1);
        if lo > hi {
            return (0.0, 0.0);
        }
        let (mut tr, mut ti) = if lo == 0 {
            ((-0.5 * mean).exp(), 0.0)
        } else {
            let log_mag = lo as f64 * 0.5 * mean.ln() - self.half_log_factorial[lo] - 0.5 * mean;
            let phase = lo as f64 * ai.atan2(ar);
            let mag = log_mag.exp();
            (mag * phase.cos(), mag * phase.sin())
        };
        let mut sr = weights[lo] * tr;
        let mut si = weights[lo] * ti;
        for (w, s) in weights[lo + 1..=hi].iter().zip(&self.inv_sqrt[lo + 1..=hi]) {
            let nr = (tr * ar - ti * ai) * s;
            let ni = (tr * ai + ti * ar) * s;
            tr = nr;
            ti = ni;
            sr += w * tr;
            si += w * ti;
        }
        (sr, si)
    }
}

/// Spin-projected amplitudes `c↑m s↑ + c↓m s↓` of one eigenstate.
pub fn spin_weights(es: &EigenSystem, lambda: usize, s: SpinProjection) -> Result<Vec<f64>> {
    let v = es.state(lambda)?;
    Ok(v.chunks_exact(2)
        .map(|c| c[0] * s.c_up() + c[1] * s.c_down())
        .collect())
}

/// `h_λ(α(Q,P); s) = |Σ_m (c↑m s↑ + c↓m s↓)⟨m|α⟩|²`.
pub fn husimi_value(es: &EigenSystem, lambda: usize, pt: PhasePoint, s: SpinProjection) -> Result<f64> {
    let w = spin_weights(es, lambda, s)?;
    let (re, im) = CoherentOverlap::new(es.params().r(), es.n_osc()).project(&w, pt);
    Ok(re * re + im * im)
}

/// Rectangular phase-space window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseWindow {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl PhaseWindow {
    pub fn new(q_min: f64, q_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let ok = [q_min, q_max, p_min, p_max].iter().all(|x| x.is_finite()) && q_min < q_max && p_min < p_max;
        if !ok {
            return Err(Error::domain("window", format!("degenerate window [{q_min},{q_max}]x[{p_min},{p_max}]")));
        }
        Ok(Self {
            q_min,
            q_max,
            p_min,
            p_max,
        })
    }

    /// Symmetric window `[-q, q] × [-p, p]`.
    pub fn centered(q: f64, p: f64) -> Result<Self> {
        Self::new(-q, q, -p, p)
    }
}

/// Husimi projection of one eigenstate sampled on a uniform grid whose
/// outermost cell centres lie on the window edges.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiGrid {
    pub window: PhaseWindow,
    pub nq: usize,
    pub np: usize,
    /// `values[iq * np + ip]`
    pub values: Vec<f64>,
    pub lambda: usize,
    pub energy: f64,
    pub spin: SpinProjection,
}

impl HusimiGrid {
    pub fn dq(&self) -> f64 {
        (self.window.q_max - self.window.q_min) / (self.nq - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.window.p_max - self.window.p_min) / (self.np - 1) as f64
    }

    pub fn q_at(&self, iq: usize) -> f64 {
        self.window.q_min + iq as f64 * self.dq()
    }

    pub fn p_at(&self, ip: usize) -> f64 {
        self.window.p_min + ip as f64 * self.dp()
    }

    pub fn value(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq * self.np + ip]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Cell of the largest value (first in storage order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best / self.np, best % self.np)
    }

    /// `(1/2π) Σ h ΔQ ΔP`, the phase-space integral of the grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dq() * self.dp() / (2.0 * std::f64::consts::PI)
    }

    /// Fractional grid coordinates of a phase point.
    fn to_cell(&self, q: f64, p: f64) -> (f64, f64) {
        ((q - self.window.q_min) / self.dq(), (p - self.window.p_min) / self.dp())
    }

    /// Cells whose centre lies within `half_width` cells (Euclidean, in
    /// cell units) of any orbit polyline.
    pub fn tube_mask(&self, orbits: &[Orbit], half_width: f64) -> Vec<bool> {
        let mut core = vec![false; self.values.len()];
        let mut mark = |x: f64, y: f64| {
            let (i, j) = (x.round(), y.round());
            if i >= 0.0 && j >= 0.0 && (i as usize) < self.nq && (j as usize) < self.np {
                core[i as usize * self.np + j as usize] = true;
            }
        };
        for o in orbits {
            for seg in o.points.windows(2) {
                let (x0, y0) = self.to_cell(seg[0].0, seg[0].1);
                let (x1, y1) = self.to_cell(seg[1].0, seg[1].1);
                let steps = ((x1 - x0).hypot(y1 - y0) * 4.0).ceil().max(1.0) as usize;
                for s in 0..=steps {
                    let t = s as f64 / steps as f64;
                    mark(x0 + t * (x1 - x0), y0 + t * (y1 - y0));
                }
            }
        }
        let reach = half_width.floor() as isize;
        let r2 = half_width * half_width;
        let mut mask = vec![false; core.len()];
        for iq in 0..self.nq {
            for ip in 0..self.np {
                if !core[iq * self.np + ip] {
                    continue;
                }
                for di in -reach..=reach {
                    for dj in -reach..=reach {
                        if (di * di + dj * dj) as f64 > r2 {
                            continue;
                        }
                        let (a, b) = (iq as isize + di, ip as isize + dj);
                        if a >= 0 && b >= 0 && (a as usize) < self.nq && (b as usize) < self.np {
                            mask[a as usize * self.np + b as usize] = true;
                        }
                    }
                }
            }
        }
        mask
    }

    /// Share of the total grid mass inside the tube of `half_width` cells
    /// around the orbits.
    pub fn tube_mass_fraction(&self, orbits: &[Orbit], half_width: f64) -> f64 {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let mask = self.tube_mask(orbits, half_width);
        let inside: f64 = self.values.iter().zip(&mask).filter(|(_, &m)| m).map(|(v, _)| v).sum();
        inside / total
    }

    /// Rows of constant `P` (ascending), columns of constant `Q` (ascending).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let win = &self.window;
        writeln!(w, "# husimi lambda={} energy={:e}", self.lambda, self.energy)?;
        writeln!(
            w,
            "# window q_min={:e} q_max={:e} p_min={:e} p_max={:e} nq={} np={}",
            win.q_min, win.q_max, win.p_min, win.p_max, self.nq, self.np
        )?;
        writeln!(w, "# spin c_up={:e} c_down={:e}", self.spin.c_up(), self.spin.c_down())?;
        for ip in 0..self.np {
            let mut first = true;
            for iq in 0..self.nq {
                if !first {
                    w.write_all(b",")?;
                }
                first = false;
                write!(w, "{:e}", self.value(iq, ip))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Plain (P2) 16-bit graymap scaled to the grid maximum; `Q` runs left to
    /// right and `P` bottom to top.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        const MAXVAL: f64 = 65535.0;
        writeln!(w, "P2")?;
        writeln!(w, "# husimi lambda={}", self.lambda)?;
        writeln!(w, "{} {}", self.nq, self.np)?;
        writeln!(w, "65535")?;
        let max = self.max();
        let scale = if max > 0.0 { MAXVAL / max } else { 0.0 };
        let mut line = String::new();
        for ip in (0..self.np).rev() {
            for iq in 0..self.nq {
                let level = (self.value(iq, ip) * scale).round().clamp(0.0, MAXVAL) as u32;
                let token = level.to_string();
                if !line.is_empty() && line.len() + 1 + token.len() > 70 {
                    writeln!(w, "{line}")?;
                    line.clear();
                }
                if !line.is_empty() {
                    line.push(' ');
                }
                line.push_str(&token);
            }
            writeln!(w, "{line}")?;
            line.clear();
        }
        Ok(())
    }
}

/// Evaluates the Husimi projection of state `lambda` on an `nq × np` grid.
pub fn husimi_grid(
    es: &EigenSystem,
    lambda: usize,
    window: PhaseWindow,
    nq: usize,
    np: usize,
    s: SpinProjection,
) -> Result<HusimiGrid> {
    if nq < 2 || np < 2 {
        return Err(Error::domain("resolution", format!("need nq, np >= 2, got {nq}x{np}")));
    }
    let weights = spin_weights(es, lambda, s)?;
    let kernel = CoherentOverlap::new(es.params().r(), es.n_osc());
    let dq = (window.q_max - window.q_min) / (nq - 1) as f64;
    let dp = (window.p_max - window.p_min) / (np - 1) as f64;
    let mut values = vec![0.0; nq * np];
    values.par_chunks_mut(np).enumerate().for_each(|(iq, col)| {
        let q = window.q_min + iq as f64 * dq;
        for (ip, out) in col.iter_mut().enumerate() {
            let p = window.p_min + ip as f64 * dp;
            let (re, im) = kernel.project(&weights, PhasePoint::new(q, p));
            *out = re * re + im * im;
        }
    });
    Ok(HusimiGrid {
        window,
        nq,
        np,
        values,
        lambda,
        energy: es.energies()[lambda],
        spin: s,
    })
}

/// Sign structure of a Bloch scan relative to the upper-potential minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochRegions {
    /// States below the upper-potential minimum.
    pub below: usize,
    pub below_nonpositive: usize,
    /// Positive and negative projections in `[upper_min, upper_min + width]`.
    pub window_positive: usize,
    pub window_negative: usize,
    pub window_positive_median: f64,
    pub window_negative_median: f64,
    /// Blocks of consecutive states above the window, and how many of them
    /// contain both signs.
    pub above_blocks: usize,
    pub above_blocks_mixed: usize,
    pub max_abs: f64,
}

/// Summarizes `scan` into the single-branch region below `upper_min`, the
/// coexistence window of width `width` above it, and the region beyond,
/// split into blocks of `block` consecutive states.
pub fn bloch_regions(scan: &[(f64, f64)], upper_min: f64, width: f64, block: usize) -> BlochRegions {
    let below: Vec<f64> = scan.iter().filter(|(e, _)| *e < upper_min).map(|(_, x)| *x).collect();
    let window: Vec<f64> = scan
        .iter()
        .filter(|(e, _)| *e >= upper_min && *e <= upper_min + width)
        .map(|(_, x)| *x)
        .collect();
    let above: Vec<f64> = scan.iter().filter(|(e, _)| *e > upper_min + width).map(|(_, x)| *x).collect();
    let median = |mut v: Vec<f64>| {
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let pos: Vec<f64> = window.iter().copied().filter(|x| *x > 0.0).collect();
    let neg: Vec<f64> = window.iter().copied().filter(|x| *x < 0.0).collect();
    let blocks: Vec<&[f64]> = above.chunks_exact(block.max(1)).collect();
    BlochRegions {
        below: below.len(),
        below_nonpositive: below.iter().filter(|x| **x <= 0.0).count(),
        window_positive: pos.len(),
        window_negative: neg.len(),
        window_positive_median: median(pos),
        window_negative_median: median(neg),
        above_blocks: blocks.len(),
        above_blocks_mixed: blocks
            .iter()
            .filter(|b| b.iter().any(|x| *x > 0.0) && b.iter().any(|x| *x < 0.0))
            .count(),
        max_abs: scan.iter().map(|(_, x)| x.abs()).fold(0.0, f64::max),
    }
}
