//! Optical absorption from the vibronic ground state `|g⟩ = |vac⟩ ⊗ |m=0⟩`.

use std::io::Write;

use crate::adiabatic::{franck_condon_energies, franck_condon_spread, Branch};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::phase_analysis::SpinProjection;
use crate::spectrum::EigenSystem;

/// `|c↑0|` below which the spin ratio is reported as undefined.
pub const RATIO_THRESHOLD: f64 = 1e-14;

/// Projections of the two monomer transition dipoles onto the field polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    mu1: f64,
    mu2: f64,
}

impl OpticalParams {
    pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
        if !(mu1.is_finite() && mu2.is_finite()) {
            return Err(Error::domain("mu", "dipoles must be finite"));
        }
        if mu1 == 0.0 && mu2 == 0.0 {
            return Err(Error::domain("mu", "mu1 and mu2 cannot both vanish"));
        }
        Ok(Self { mu1, mu2 })
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn norm_sqr(&self) -> f64 {
        self.mu1 * self.mu1 + self.mu2 * self.mu2
    }

    /// File-name tag such as `1_0` or `0.5_-1`.
    pub fn tag(&self) -> String {
        format!("{}_{}", self.mu1, self.mu2)
    }
}

impl Default for OpticalParams {
    fn default() -> Self {
        Self { mu1: 1.0, mu2: 1.0 }
    }
}

/// `s_μ = (μ₁, μ₂)/√(μ₁² + μ₂²)`.
pub fn spin_direction(o: &OpticalParams) -> SpinProjection {
    let n = o.norm_sqr().sqrt();
    SpinProjection::from_unit(o.mu1 / n, o.mu2 / n)
}

/// `M_λg = μ₁ c↑0 + μ₂ c↓0`.
pub fn transition_element(es: &EigenSystem, lambda: usize, o: &OpticalParams) -> Result<f64> {
    let (up, down) = es.ground_level_spin(lambda)?;
    Ok(o.mu1 * up + o.mu2 * down)
}

/// `Q_λg = M_λg² / (μ₁² + μ₂²)`, computed as the squared overlap with `s_μ`.
pub fn absorption_strength(es: &EigenSystem, lambda: usize, o: &OpticalParams) -> Result<f64> {
    let (up, down) = es.ground_level_spin(lambda)?;
    let s = spin_direction(o);
    let a = s.c_up() * up + s.c_down() * down;
    Ok(a * a)
}

/// One absorption line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub lambda: usize,
    pub energy: f64,
    pub strength: f64,
}

/// Closed energy interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWindow {
    pub min: f64,
    pub max: f64,
}

impl EnergyWindow {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(Error::domain("window", format!("invalid energy window [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn everything() -> Self {
        Self {
            min: f64::NEG_INFINITY,
            max: f64::INFINITY,
        }
    }

    pub fn contains(&self, e: f64) -> bool {
        self.min <= e && e <= self.max
    }

    pub fn around(centre: f64, half_width: f64) -> Self {
        Self {
            min: centre - half_width,
            max: centre + half_width,
        }
    }
}

/// Unbroadened lines of one optical setting inside a window.
#[derive(Debug, Clone, PartialEq)]
pub struct StickSpectrum {
    pub lines: Vec<Line>,
    pub window: EnergyWindow,
    pub optical: OpticalParams,
    /// Fingerprint of the eigensystem the lines come from.
    pub source: u64,
}

impl StickSpectrum {
    pub fn total(&self) -> f64 {
        self.lines.iter().map(|l| l.strength).sum()
    }

    pub fn strengths(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.strength).collect()
    }

    /// Restriction to a sub-window.
    pub fn within(&self, window: EnergyWindow) -> StickSpectrum {
        StickSpectrum {
            lines: self.lines.iter().copied().filter(|l| window.contains(l.energy)).collect(),
            window,
            optical: self.optical,
            source: self.source,
        }
    }

    pub fn summary(&self) -> BandSummary {
        let total = self.total();
        let mean_energy = if total > 0.0 {
            self.lines.iter().map(|l| l.energy * l.strength).sum::<f64>() / total
        } else {
            f64::NAN
        };
        let peak = self
            .lines
            .iter()
            .copied()
            .fold(None, |best: Option<Line>, l| match best {
                Some(b) if b.strength >= l.strength => Some(b),
                _ => Some(l),
            });
        BandSummary {
            lines: self.lines.len(),
            total,
            mean_energy,
            peak,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# mu1={:e} mu2={:e}", self.optical.mu1, self.optical.mu2)?;
        writeln!(w, "# window={:e},{:e}", self.window.min, self.window.max)?;
        writeln!(w, "# source={:016x}", self.source)?;
        writeln!(w, "lambda,energy,strength")?;
        for l in &self.lines {
            writeln!(w, "{},{:e},{:e}", l.lambda, l.energy, l.strength)?;
        }
        Ok(())
    }
}

/// Aggregates of one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSummary {
    pub lines: usize,
    pub total: f64,
    /// Strength-weighted mean energy, NaN for an empty or dark band.
    pub mean_energy: f64,
    pub peak: Option<Line>,
}

pub fn stick_spectrum(es: &EigenSystem, o: &OpticalParams, window: EnergyWindow) -> StickSpectrum {
    let lines = es
        .energies()
        .iter()
        .enumerate()
        .filter(|(_, e)| window.contains(**e))
        .map(|(l, &energy)| Line {
            lambda: l,
            energy,
            strength: absorption_strength(es, l, o).expect("index within keep"),
        })
        .collect();
    StickSpectrum {
        lines,
        window,
        optical: *o,
        source: es.fingerprint(),
    }
}

/// `r = c↓0 / c↑0`, `None` when `|c↑0| < RATIO_THRESHOLD`.
pub fn spin_ratio(es: &EigenSystem, lambda: usize) -> Result<Option<f64>> {
    let (up, down) = es.ground_level_spin(lambda)?;
    Ok(if up.abs() < RATIO_THRESHOLD {
        None
    } else {
        Some(down / up)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub lambda: usize,
    pub energy: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioCurve {
    pub points: Vec<RatioPoint>,
    pub source: u64,
}

impl RatioCurve {
    pub fn get(&self, lambda: usize) -> Option<&RatioPoint> {
        self.points
            .binary_search_by_key(&lambda, |p| p.lambda)
            .ok()
            .map(|i| &self.points[i])
    }

    /// Defined ratios only, in energy order.
    pub fn defined(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.ratio).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# source={:016x}", self.source)?;
        writeln!(w, "lambda,energy,ratio,defined")?;
        for p in &self.points {
            match p.ratio {
                Some(r) => writeln!(w, "{},{:e},{:e},1", p.lambda, p.energy, r)?,
                None => writeln!(w, "{},{:e},,0", p.lambda, p.energy)?,
            }
        }
        Ok(())
    }
}

pub fn ratio_curve(es: &EigenSystem, window: EnergyWindow) -> RatioCurve {
    let points = es
        .energies()
        .iter()
        .enumerate()
        .filter(|(_, e)| window.contains(**e))
        .map(|(l, &energy)| RatioPoint {
            lambda: l,
            energy,
            ratio: spin_ratio(es, l).expect("index within keep"),
        })
        .collect();
    RatioCurve {
        points,
        source: es.fingerprint(),
    }
}

/// Strengths at `target` rebuilt from the `(μ₁, 0)` spectrum `base` and the
/// spin ratios: `Q(μ) = (μ₁ + μ₂ r)² / (μ₁² + μ₂²) · Q⁺`. Lines without a
/// defined ratio are recomputed from the eigenvector coefficients.
pub fn interpolate_band(
    es: &EigenSystem,
    base: &StickSpectrum,
    ratios: &RatioCurve,
    target: &OpticalParams,
) -> Result<StickSpectrum> {
    for source in [base.source, ratios.source] {
        if source != es.fingerprint() {
            return Err(Error::ProvenanceMismatch {
                left: es.fingerprint(),
                right: source,
            });
        }
    }
    if base.optical.mu2 != 0.0 {
        return Err(Error::domain("base", "reference spectrum must have mu2 = 0"));
    }
    let (m1, m2) = (target.mu1, target.mu2);
    let norm = target.norm_sqr();
    let lines = base
        .lines
        .iter()
        .map(|l| {
            let strength = match ratios.get(l.lambda).and_then(|p| p.ratio) {
                Some(r) => {
                    let f = m1 + m2 * r;
                    f * f / norm * l.strength
                }
                None => absorption_strength(es, l.lambda, target)?,
            };
            Ok(Line { strength, ..*l })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StickSpectrum {
        lines,
        window: base.window,
        optical: *target,
        source: base.source,
    })
}

/// Default half-width of a band window around its vertical transition
/// energy: the larger of five oscillator quanta and four estimated band
/// standard deviations.
pub fn default_band_half_width(m: &ModelParams, branch: Branch) -> f64 {
    (5.0 * m.r()).max(4.0 * franck_condon_spread(m, branch))
}

/// `(lower, upper)` band windows centred on the vertical transition
/// energies; `half_width = None` selects the default.
pub fn band_windows(m: &ModelParams, half_width: Option<f64>) -> (EnergyWindow, EnergyWindow) {
    let (lo, hi) = franck_condon_energies(m);
    let w = |b| half_width.unwrap_or_else(|| default_band_half_width(m, b));
    (
        EnergyWindow::around(lo, w(Branch::Lower)),
        EnergyWindow::around(hi, w(Branch::Upper)),
    )
}

/// Fraction of adjacent nonzero line pairs whose strengths differ by more
/// than `decades` orders of magnitude.
pub fn adjacent_contrast(strengths: &[f64], decades: f64) -> f64 {
    let pairs: Vec<f64> = strengths
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| (w[1] / w[0]).log10().abs())
        .collect();
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().filter(|x| **x > decades).count() as f64 / pairs.len() as f64
}

/// Total variation of a sequence divided by its range; 1 for monotone data.
pub fn normalized_variation(values: &[f64]) -> f64 {
    let tv: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.len() < 2 || max <= min {
        return 0.0;
    }
    tv / (max - min)
}

/// Sum of unit-area Gaussians of standard deviation `width` weighted by
/// the line strengths, sampled at `energies`.
pub fn broaden(lines: &[Line], energies: &[f64], width: f64) -> Result<Vec<f64>> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::domain("width", "broadening width must be positive"));
    }
    let norm = 1.0 / (width * (2.0 * std::f64::consts::PI).sqrt());
    Ok(energies
        .iter()
        .map(|&e| {
            lines
                .iter()
                .map(|l| {
                    let x = (e - l.energy) / width;
                    l.strength * norm * (-0.5 * x * x).exp()
                })
                .sum()
        })
        .collect())
}
