//! Adiabatic reference systems: the spin part diagonalized at fixed `Q`.
//!
//! All potentials include the energy centre `ε₊` so that they share an
//! energy axis with the exact eigenvalues.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::phase_analysis::SpinProjection;

/// Scan resolution used to locate extrema and turning points.
pub const SCAN_POINTS: usize = 4096;

/// Absolute energy tolerance of sampled orbit points.
pub const CONTOUR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Lower, Branch::Upper];

    fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Upper => "upper",
            Branch::Lower => "lower",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `2ε₋ + √(2p)·r·Q`
fn mixing_argument(m: &ModelParams, q: f64) -> f64 {
    2.0 * (m.eps_minus() + m.coordinate_coupling() * q)
}

/// Half the adiabatic gap, `√(¼ + (ε₋ + √(p/2)·r·Q)²)`.
fn half_gap(m: &ModelParams, q: f64) -> f64 {
    0.5 * mixing_argument(m, q).hypot(1.0)
}

/// `(U⁻(Q), U⁺(Q))`
pub fn adiabatic_potentials(m: &ModelParams, q: f64) -> (f64, f64) {
    let base = m.eps_plus() + 0.5 * m.r() * m.r() * q * q;
    let g = half_gap(m, q);
    (base - g, base + g)
}

pub fn potential(m: &ModelParams, branch: Branch, q: f64) -> f64 {
    let (lo, hi) = adiabatic_potentials(m, q);
    match branch {
        Branch::Upper => hi,
        Branch::Lower => lo,
    }
}

/// `dU/dQ` on one branch.
pub fn potential_slope(m: &ModelParams, branch: Branch, q: f64) -> f64 {
    let a = mixing_argument(m, q);
    let c = m.coordinate_coupling();
    m.r() * m.r() * q + branch.sign() * c * a / a.hypot(1.0)
}

/// `A(Q)`, the `σ_z` expectation of the upper adiabatic state.
pub fn adiabatic_mixing(m: &ModelParams, q: f64) -> f64 {
    let a = mixing_argument(m, q);
    a / a.hypot(1.0)
}

/// `⟨σ_x⟩` of the adiabatic state on `branch`: negative on the upper branch.
pub fn adiabatic_bloch(m: &ModelParams, q: f64, branch: Branch) -> f64 {
    -branch.sign() / mixing_argument(m, q).hypot(1.0)
}

/// `(φ⁺, φ⁻)` at `Q`.
pub fn adiabatic_states(m: &ModelParams, q: f64) -> (SpinProjection, SpinProjection) {
    let a = adiabatic_mixing(m, q);
    let plus = ((1.0 + a) / 2.0).sqrt();
    let minus = ((1.0 - a) / 2.0).sqrt();
    (
        SpinProjection::from_unit(plus, -minus),
        SpinProjection::from_unit(minus, plus),
    )
}

/// Vertical transition energies `(U⁻(0), U⁺(0))`.
pub fn franck_condon_energies(m: &ModelParams) -> (f64, f64) {
    adiabatic_potentials(m, 0.0)
}

/// Estimated energy spread of the vertical band on `branch`: the slope at
/// `Q = 0` times the width `1/√(2r)` of the oscillator ground state.
pub fn franck_condon_spread(m: &ModelParams, branch: Branch) -> f64 {
    potential_slope(m, branch, 0.0).abs() / (2.0 * m.r()).sqrt()
}

/// Half-width of a `Q` interval outside of which `U(Q) > energy` on both branches.
pub fn allowed_bound(m: &ModelParams, energy: f64) -> f64 {
    // U ≥ ε₊ + r²Q²/2 − ½ − |ε₋| − c|Q|
    let r2 = m.r() * m.r();
    let c = m.coordinate_coupling();
    let rhs = (energy - m.eps_plus() + 0.5 + m.eps_minus().abs()).max(0.0);
    let q = (c + (c * c + 2.0 * r2 * rhs).sqrt()) / r2;
    1.01 * q + 1.0
}

/// A local minimum of one adiabatic potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Well {
    pub q: f64,
    pub energy: f64,
}

/// Local minima of `U_branch` in `[-q_bound, q_bound]`, located by sign changes
/// of the slope on a uniform scan and refined by bisection.
pub fn local_minima(m: &ModelParams, branch: Branch, q_bound: f64) -> Vec<Well> {
    let step = 2.0 * q_bound / (SCAN_POINTS - 1) as f64;
    let slope = |q: f64| potential_slope(m, branch, q);
    let mut out = Vec::new();
    let mut q0 = -q_bound;
    let mut s0 = slope(q0);
    for i in 1..SCAN_POINTS {
        let q1 = -q_bound + i as f64 * step;
        let s1 = slope(q1);
        if s0 < 0.0 && s1 >= 0.0 {
            let q = bisect(slope, q0, q1);
            out.push(Well {
                q,
                energy: potential(m, branch, q),
            });
        }
        q0 = q1;
        s0 = s1;
    }
    out
}

/// Global minimum of `U_branch`.
pub fn potential_minimum(m: &ModelParams, branch: Branch) -> Well {
    let bound = allowed_bound(m, potential(m, branch, 0.0));
    local_minima(m, branch, bound)
        .into_iter()
        .min_by(|a, b| a.energy.total_cmp(&b.energy))
        .expect("confining potential has a minimum")
}

// Root of a function with f(a) and f(b) of opposite sign (or zero), iterated
// until the bracket stops shrinking.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    if fa == 0.0 {
        return a;
    }
    let neg_at_a = fa < 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == neg_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Closed energy contour `½P² + U(Q) = E` of one connected allowed region.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub branch: Branch,
    pub energy: f64,
    /// Closed polyline: the last point repeats the first.
    pub points: Vec<(f64, f64)>,
}

impl Orbit {
    /// Enclosed phase-space area (shoelace formula).
    pub fn area(&self) -> f64 {
        let twice: f64 = self
            .points
            .windows(2)
            .map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1)
            .sum();
        0.5 * twice.abs()
    }

    /// Largest `|½P² + U(Q) − E|` over the sampled points.
    pub fn max_residual(&self, m: &ModelParams) -> f64 {
        self.points
            .iter()
            .map(|&(q, p)| (0.5 * p * p + potential(m, self.branch, q) - self.energy).abs())
            .fold(0.0, f64::max)
    }

    pub fn turning_points(&self) -> (f64, f64) {
        let qs = self.points.iter().map(|p| p.0);
        let lo = qs.clone().fold(f64::INFINITY, f64::min);
        let hi = qs.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Classical orbits of `H(Q,P) = ½P² + U_branch(Q)` at `energy`, one per
/// connected classically allowed interval. Each interval is sampled at
/// `n_points` uniformly spaced `Q` values with mirrored `±P` halves.
pub fn classical_orbit(m: &ModelParams, branch: Branch, energy: f64, n_points: usize) -> Result<Vec<Orbit>> {
    if n_points < 2 {
        return Err(Error::domain("n_points", "need at least 2 samples per orbit half"));
    }
    let intervals = allowed_intervals(m, branch, energy);
    if intervals.is_empty() {
        return Err(Error::EmptyOrbit {
            branch: branch.label(),
            energy,
            minimum: potential_minimum(m, branch).energy,
        });
    }
    let kinetic = |q: f64| (2.0 * (energy - potential(m, branch, q))).max(0.0).sqrt();
    Ok(intervals
        .into_iter()
        .map(|(a, b)| {
            let qs: Vec<f64> = (0..n_points)
                .map(|j| match j {
                    0 => a,
                    j if j == n_points - 1 => b,
                    j => a + (b - a) * j as f64 / (n_points - 1) as f64,
                })
                .collect();
            let mut points: Vec<(f64, f64)> = qs.iter().map(|&q| (q, kinetic(q))).collect();
            points.extend(qs.iter().rev().skip(1).map(|&q| (q, -kinetic(q))));
            if let Some(&first) = points.first() {
                points.push(first);
            }
            Orbit {
                branch,
                energy,
                points,
            }
        })
        .collect())
}

/// Maximal intervals where `U_branch(Q) ≤ energy`.
pub fn allowed_intervals(m: &ModelParams, branch: Branch, energy: f64) -> Vec<(f64, f64)> {
    let bound = allowed_bound(m, energy);
    let excess = |q: f64| energy - potential(m, branch, q);
    let step = 2.0 * bound / (SCAN_POINTS - 1) as f64;
    // Uniform scan plus the exact minima, so narrow pockets just above a
    // well bottom are not stepped over.
    let mut samples: Vec<f64> = (0..SCAN_POINTS).map(|i| -bound + i as f64 * step).collect();
    samples.extend(local_minima(m, branch, bound).into_iter().map(|w| w.q));
    samples.sort_by(f64::total_cmp);
    samples.dedup();

    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for w in samples.windows(2) {
        let (q0, q1) = (w[0], w[1]);
        let (f0, f1) = (excess(q0), excess(q1));
        match (f0 >= 0.0, f1 >= 0.0) {
            (false, true) => start = Some(bisect(excess, q0, q1)),
            (true, false) => {
                let end = bisect(excess, q0, q1);
                intervals.push((start.take().unwrap_or(q0), end));
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, bound));
    }
    intervals
}

/// Rows `(Q, U⁻, U⁺)` on a uniform grid.
pub fn potential_scan(m: &ModelParams, q_min: f64, q_max: f64, n: usize) -> Vec<(f64, f64, f64)> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let q = q_min + (q_max - q_min) * i as f64 / (n - 1) as f64;
            let (lo, hi) = adiabatic_potentials(m, q);
            (q, lo, hi)
        })
        .collect()
}

pub fn write_potential_csv<W: Write>(mut w: W, rows: &[(f64, f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "Q,U_minus,U_plus")?;
    for (q, lo, hi) in rows {
        writeln!(w, "{q:e},{lo:e},{hi:e}")?;
    }
    Ok(())
}

/// Rows `branch, component, Q, P`.
pub fn write_orbits_csv<W: Write>(mut w: W, orbits: &[Orbit]) -> std::io::Result<()> {
    writeln!(w, "branch,component,Q,P")?;
    let mut component = 0usize;
    let mut last: Option<Branch> = None;
    for o in orbits {
        if last != Some(o.branch) {
            component = 0;
            last = Some(o.branch);
        }
        for (q, p) in &o.points {
            writeln!(w, "{},{component},{q:e},{p:e}", o.branch)?;
        }
        component += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn set_a() -> ModelParams {
        ModelParams::new(4.0, 0.1, 5.0).unwrap()
    }

    fn set_b() -> ModelParams {
        ModelParams::new(20.0, 0.1, 10.0).unwrap()
    }

    #[test]
    fn potentials_at_origin() {
        let sym = ModelParams::new(7.0, 0.3, 0.0).unwrap();
        assert_eq!(adiabatic_potentials(&sym, 0.0), (-0.5, 0.5));
        let (lo, hi) = adiabatic_potentials(&set_b(), 0.0);
        assert_abs_diff_eq!(lo, -10.0124922, epsilon = 1e-7);
        assert_abs_diff_eq!(hi, 10.0124922, epsilon = 1e-7);
        let (lo, hi) = franck_condon_energies(&set_a());
        assert_abs_diff_eq!(lo, -5.0249378, epsilon = 1e-7);
        assert_abs_diff_eq!(hi, 5.0249378, epsilon = 1e-7);
    }

    #[test]
    fn mixing_and_bloch_values() {
        let sym = ModelParams::new(1.0, 0.5, 0.0).unwrap();
        assert_eq!(adiabatic_mixing(&sym, 0.0), 0.0);
        assert_eq!(adiabatic_bloch(&sym, 0.0, Branch::Lower), 1.0);
        assert_eq!(adiabatic_bloch(&sym, 0.0, Branch::Upper), -1.0);
        assert_abs_diff_eq!(adiabatic_mixing(&set_a(), 0.0), 10.0 / 101f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(adiabatic_bloch(&set_a(), 0.0, Branch::Lower), 0.0995037, epsilon = 1e-7);
        let big = ModelParams::new(1.0, 0.5, 1e6).unwrap();
        let a = adiabatic_mixing(&big, 0.0);
        assert!(a < 1.0 && a > 1.0 - 1e-12);
    }

    #[test]
    fn symmetric_point_states() {
        let sym = ModelParams::new(1.0, 0.5, 0.0).unwrap();
        let (up, lo) = adiabatic_states(&sym, 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(up.c_up(), h, epsilon = 1e-15);
        assert_abs_diff_eq!(up.c_down(), -h, epsilon = 1e-15);
        assert_abs_diff_eq!(lo.c_up(), h, epsilon = 1e-15);
        assert_abs_diff_eq!(lo.c_down(), h, epsilon = 1e-15);
    }

    // Explicit 2x2 diagonalization of h_ad at fixed Q as an oracle.
    fn spin_hamiltonian_eigen(m: &ModelParams, q: f64) -> [(f64, [f64; 2]); 2] {
        let d = m.eps_minus() + m.coordinate_coupling() * q;
        let off = -0.5;
        let mean = m.eps_plus() + 0.5 * m.r() * m.r() * q * q;
        let rad = (d * d + off * off).sqrt();
        let vec_for = |e: f64| {
            // (d - (e - mean)) x + off y = 0
            let (x, y) = (off, (e - mean) - d);
            let n = x.hypot(y);
            [x / n, y / n]
        };
        [(mean - rad, vec_for(mean - rad)), (mean + rad, vec_for(mean + rad))]
    }

    proptest! {
        #[test]
        fn adiabatic_identities(p in 0.0..40.0f64, r in 0.02..1.5f64, em in -12.0..12.0f64, q in -150.0..150.0f64) {
            let m = ModelParams::new(p, r, em).unwrap();
            let (lo, hi) = adiabatic_potentials(&m, q);
            prop_assert!(hi - lo >= 1.0 - 1e-12);
            let xl = adiabatic_bloch(&m, q, Branch::Lower);
            let xu = adiabatic_bloch(&m, q, Branch::Upper);
            prop_assert_eq!(xu, -xl);
            let a = adiabatic_mixing(&m, q);
            prop_assert!((xl * xl + a * a - 1.0).abs() < 1e-12);
            prop_assert!(a.abs() <= 1.0);

            let (up, low) = adiabatic_states(&m, q);
            prop_assert!((up.c_up() * low.c_up() + up.c_down() * low.c_down()).abs() < 1e-12);
            prop_assert!((up.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((low.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!((up.sigma_x() - xu).abs() < 1e-12);
            prop_assert!((low.sigma_x() - xl).abs() < 1e-12);
            prop_assert!((up.sigma_z() - a).abs() < 1e-12);
            prop_assert!((low.sigma_z() + a).abs() < 1e-12);

            let [(e0, v0), (e1, v1)] = spin_hamiltonian_eigen(&m, q);
            prop_assert!((e0 - lo).abs() < 1e-9 * (1.0 + lo.abs()));
            prop_assert!((e1 - hi).abs() < 1e-9 * (1.0 + hi.abs()));
            // eigenvectors agree up to sign
            prop_assert!(((v0[0] * low.c_up() + v0[1] * low.c_down()).abs() - 1.0).abs() < 1e-9);
            prop_assert!(((v1[0] * up.c_up() + v1[1] * up.c_down()).abs() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn slope_matches_finite_difference(p in 0.0..40.0f64, r in 0.05..1.0f64, em in -12.0..12.0f64, q in -100.0..100.0f64) {
            let m = ModelParams::new(p, r, em).unwrap();
            for b in Branch::BOTH {
                let h = 1e-5;
                let fd = (potential(&m, b, q + h) - potential(&m, b, q - h)) / (2.0 * h);
                prop_assert!((fd - potential_slope(&m, b, q)).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn harmonic_ellipse() {
        let m = ModelParams::new(0.0, 0.3, 0.0).unwrap();
        let e = 2.0;
        let orbits = classical_orbit(&m, Branch::Lower, e, 200).unwrap();
        assert_eq!(orbits.len(), 1);
        let o = &orbits[0];
        for &(q, p) in &o.points {
            let ellipse = 0.5 * p * p + 0.5 * 0.09 * q * q - (e + 0.5);
            assert!(ellipse.abs() <= 1e-10, "{q} {p} {ellipse}");
        }
        assert!(o.max_residual(&m) <= 1e-10);
        // area of the ellipse: 2π (E + ½) / r; the polygon converges slowly
        // near the turning points
        let exact = 2.0 * std::f64::consts::PI * 2.5 / 0.3;
        assert!((o.area() - exact).abs() < 1e-3 * exact);
        assert_eq!(o.points.first(), o.points.last());
    }

    #[test]
    fn set_a_upper_orbit_fits_window() {
        let m = set_a();
        let orbits = classical_orbit(&m, Branch::Upper, 5.0028, 400).unwrap();
        assert_eq!(orbits.len(), 1);
        let o = &orbits[0];
        assert!(o.max_residual(&m) <= CONTOUR_TOLERANCE);
        for &(q, p) in &o.points {
            assert!((-50.0..=50.0).contains(&q) && (-5.0..=5.0).contains(&p), "({q}, {p})");
        }
    }

    #[test]
    fn double_well_reports_two_components() {
        // Symmetric strong coupling: the lower potential has two wells.
        let m = ModelParams::new(20.0, 0.1, 0.0).unwrap();
        let wells = local_minima(&m, Branch::Lower, 200.0);
        assert_eq!(wells.len(), 2);
        let barrier = potential(&m, Branch::Lower, 0.0);
        let below = 0.5 * (wells[0].energy + barrier);
        let orbits = classical_orbit(&m, Branch::Lower, below, 100).unwrap();
        assert_eq!(orbits.len(), 2);
        let above = barrier + 1.0;
        assert_eq!(classical_orbit(&m, Branch::Lower, above, 100).unwrap().len(), 1);
        for o in &orbits {
            assert!(o.max_residual(&m) <= CONTOUR_TOLERANCE);
        }
    }

    #[test]
    fn empty_orbit_below_minimum() {
        let m = set_b();
        let min = potential_minimum(&m, Branch::Upper);
        let err = classical_orbit(&m, Branch::Upper, min.energy - 0.1, 50).unwrap_err();
        assert!(matches!(err, Error::EmptyOrbit { branch: "upper", .. }));
    }

    #[test]
    fn pocket_just_above_minimum_is_found() {
        let m = set_b();
        let min = potential_minimum(&m, Branch::Upper);
        let orbits = classical_orbit(&m, Branch::Upper, min.energy + 1e-9, 10).unwrap();
        assert_eq!(orbits.len(), 1);
        let (a, b) = orbits[0].turning_points();
        assert!(a <= min.q && min.q <= b);
    }

    // ∮P dQ = 2∫ √(2(E − U)) dQ by midpoint quadrature between turning points.
    fn action_integral(m: &ModelParams, b: Branch, e: f64) -> f64 {
        let ivs = allowed_intervals(m, b, e);
        assert_eq!(ivs.len(), 1);
        let (lo, hi) = ivs[0];
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|i| {
                let q = lo + (i as f64 + 0.5) * h;
                2.0 * (2.0 * (e - potential(m, b, q))).max(0.0).sqrt() * h
            })
            .sum()
    }

    #[test]
    fn orbit_area_grows_with_energy() {
        let m = set_a();
        let mut last = 0.0;
        for e in [4.5, 5.0, 6.0, 8.0, 12.0] {
            let o = &classical_orbit(&m, Branch::Upper, e, 2000).unwrap()[0];
            let area = o.area();
            let action = action_integral(&m, Branch::Upper, e);
            assert!(area > last);
            assert!((area - action).abs() < 1e-3 * action, "{area} vs {action}");
            last = area;
        }
    }

    #[test]
    fn set_b_wells() {
        let m = set_b();
        let up = potential_minimum(&m, Branch::Upper);
        let lo = potential_minimum(&m, Branch::Lower);
        assert!(up.q < 0.0 && lo.q > 0.0);
        assert!(potential_slope(&m, Branch::Upper, up.q).abs() < 1e-9);
        // the Franck–Condon point sits above the upper-well bottom
        assert!(franck_condon_energies(&m).1 > up.energy);
    }

    #[test]
    fn csv_shapes() {
        let m = set_a();
        let rows = potential_scan(&m, -10.0, 10.0, 5);
        let mut buf = Vec::new();
        write_potential_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("Q,U_minus,U_plus\n-1e1,"));
        let orbits = classical_orbit(&m, Branch::Upper, 6.0, 3).unwrap();
        let mut buf = Vec::new();
        write_orbits_csv(&mut buf, &orbits).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 6);
    }
}
