//! Build, diagonalize, analyze and emit.

use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use sbdimer_core::absorption::{band_windows, default_band_half_width, ratio_curve};
use sbdimer_core::adiabatic::{
    allowed_bound, classical_orbit, franck_condon_energies, franck_condon_spread, potential_minimum, potential_scan,
    write_orbits_csv, write_potential_csv, Branch,
};
use sbdimer_core::phase_analysis::{bloch_projection, husimi_grid, parity_expectation, sigma_z_expectation};
use sbdimer_core::spectrum::convergence_against;
use sbdimer_core::{stick_spectrum, EigenSystem, EnergyWindow, Error, ModelParams, PhaseWindow};

use crate::cache::Session;
use crate::config::RunConfig;
use crate::error::{CliError, InStage, Result, Stage};

/// Half-width, in grid cells, of the tube around classical orbits used for
/// the Husimi concentration summary.
pub const TUBE_CELLS: f64 = 3.0;

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Independent output groups; each CLI subcommand selects some of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Spectrum,
    Bloch,
    Adiabatic,
    Husimi,
    Absorb,
    Ratio,
}

impl Task {
    pub const ALL: [Task; 6] = [Task::Spectrum, Task::Bloch, Task::Adiabatic, Task::Husimi, Task::Absorb, Task::Ratio];

    fn needs_eigensystem(self) -> bool {
        self != Task::Adiabatic
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Every file emitted by one run, in emission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Digest of the manifest file itself.
    pub sha256: String,
}

impl Manifest {
    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.path.as_str())
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entries.iter().any(|e| e.path == path)
    }

    /// `sha256sum`-compatible text.
    pub fn render(entries: &[ManifestEntry]) -> String {
        entries.iter().map(|e| format!("{}  {}\n", e.sha256, e.path)).collect()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files into one directory and remembers them for the manifest or
/// for cleanup.
struct Emitter {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<ManifestEntry>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).in_stage(Stage::Manifest)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
        })
    }

    fn emit(&mut self, stage: Stage, name: &str, body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        body(&mut buf).in_stage(stage)?;
        fs::write(self.dir.join(name), &buf).in_stage(stage)?;
        self.written.push(ManifestEntry {
            path: name.to_string(),
            sha256: sha256_hex(&buf),
        });
        Ok(())
    }

    fn finish(self) -> Result<Manifest> {
        let text = Manifest::render(&self.written);
        let path = self.dir.join(MANIFEST_NAME);
        if let Err(e) = fs::write(&path, &text) {
            self.discard();
            return Err(CliError::Stage {
                stage: Stage::Manifest,
                source: e.into(),
            });
        }
        Ok(Manifest {
            dir: self.dir,
            entries: self.written,
            sha256: sha256_hex(text.as_bytes()),
        })
    }

    fn discard(self) {
        for e in &self.written {
            let _ = fs::remove_file(self.dir.join(&e.path));
        }
        let _ = fs::remove_file(self.dir.join(MANIFEST_NAME));
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

fn header(w: &mut Vec<u8>, m: &ModelParams, es: Option<&EigenSystem>) -> io::Result<()> {
    write!(
        w,
        "# p={:e} r={:e} eps_plus={:e} eps_minus={:e}",
        m.p(),
        m.r(),
        m.eps_plus(),
        m.eps_minus()
    )?;
    if let Some(es) = es {
        write!(w, " n_osc={} keep={} source={:016x}", es.n_osc(), es.keep(), es.fingerprint())?;
    }
    writeln!(w)
}

/// Runs the full pipeline without a disk cache.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    run_tasks(&mut Session::default(), cfg, &Task::ALL)
}

/// Runs the selected output groups into `cfg.output_dir` and writes the
/// manifest. On failure every file written by this run is removed.
pub fn run_tasks(session: &mut Session, cfg: &RunConfig, tasks: &[Task]) -> Result<Manifest> {
    let mut em = Emitter::new(&cfg.output_dir)?;
    match emit_all(session, cfg, tasks, &mut em) {
        Ok(()) => em.finish(),
        Err(e) => {
            em.discard();
            Err(e)
        }
    }
}

fn emit_all(session: &mut Session, cfg: &RunConfig, tasks: &[Task], em: &mut Emitter) -> Result<()> {
    let es = if tasks.iter().any(|t| t.needs_eigensystem()) {
        Some(session.eigensystem(&cfg.model, &cfg.basis)?)
    } else {
        None
    };
    for task in Task::ALL.iter().filter(|t| tasks.contains(t)) {
        match (task, es.as_deref()) {
            (Task::Spectrum, Some(es)) => spectrum(cfg, es, em)?,
            (Task::Bloch, Some(es)) => bloch(es, em)?,
            (Task::Adiabatic, _) => adiabatic(cfg, em)?,
            (Task::Husimi, Some(es)) => husimi(cfg, es, em)?,
            (Task::Absorb, Some(es)) => absorb(cfg, es, em)?,
            (Task::Ratio, Some(es)) => ratio(es, em)?,
            _ => unreachable!("eigensystem computed for every task that needs it"),
        }
    }
    Ok(())
}

fn spectrum(cfg: &RunConfig, es: &EigenSystem, em: &mut Emitter) -> Result<()> {
    let mut energies = Vec::new();
    es.write_csv(&mut energies, io::sink()).in_stage(Stage::Spectrum)?;
    em.emit(Stage::Spectrum, "energies.csv", |w| w.write_all(&energies))?;
    if let Some(tol) = cfg.convergence_tolerance {
        let report = convergence_against(es, tol).in_stage(Stage::Convergence)?;
        let mut buf = Vec::new();
        report.write_csv(&mut buf).in_stage(Stage::Convergence)?;
        em.emit(Stage::Convergence, "convergence.csv", |w| w.write_all(&buf))?;
    }
    Ok(())
}

fn bloch(es: &EigenSystem, em: &mut Emitter) -> Result<()> {
    let rows = (0..es.keep())
        .map(|l| {
            Ok((
                es.energy(l)?,
                bloch_projection(es, l)?,
                parity_expectation(es, l)?,
                sigma_z_expectation(es, l)?,
            ))
        })
        .collect::<Result<Vec<_>, Error>>()
        .in_stage(Stage::Bloch)?;
    em.emit(Stage::Bloch, "bloch.csv", |w| {
        header(w, es.params(), Some(es))?;
        writeln!(w, "lambda,energy,bloch,parity,sigma_z")?;
        for (l, (e, x, par, z)) in rows.iter().enumerate() {
            writeln!(w, "{l},{e:e},{x:e},{par:e},{z:e}")?;
        }
        Ok(())
    })
}

fn potential_range(cfg: &RunConfig) -> (f64, f64) {
    cfg.potential.q_range.unwrap_or_else(|| {
        let m = &cfg.model;
        let (_, hi) = franck_condon_energies(m);
        let q = allowed_bound(m, hi + 10.0 * m.r() + 1.0);
        (-q, q)
    })
}

fn adiabatic(cfg: &RunConfig, em: &mut Emitter) -> Result<()> {
    let m = &cfg.model;
    let (q_min, q_max) = potential_range(cfg);
    let rows = potential_scan(m, q_min, q_max, cfg.potential.points);
    em.emit(Stage::Adiabatic, "adiabatic_potentials.csv", |w| {
        header(w, m, None)?;
        write_potential_csv(w, &rows)
    })?;
    let (lo_win, hi_win) = band_windows(m, cfg.band_half_width);
    let (lo_fc, hi_fc) = franck_condon_energies(m);
    em.emit(Stage::Adiabatic, "franck_condon.csv", |w| {
        header(w, m, None)?;
        writeln!(w, "branch,fc_energy,spread,half_width,window_min,window_max,well_q,well_energy")?;
        for (b, fc, win) in [(Branch::Lower, lo_fc, lo_win), (Branch::Upper, hi_fc, hi_win)] {
            let well = potential_minimum(m, b);
            let half = cfg.band_half_width.unwrap_or_else(|| default_band_half_width(m, b));
            writeln!(
                w,
                "{b},{fc:e},{:e},{half:e},{:e},{:e},{:e},{:e}",
                franck_condon_spread(m, b),
                win.min,
                win.max,
                well.q,
                well.energy
            )?;
        }
        Ok(())
    })
}

/// Phase-space window enclosing both classical orbits at `energy`.
pub fn auto_husimi_window(m: &ModelParams, energy: f64) -> PhaseWindow {
    let q = allowed_bound(m, energy);
    let floor = potential_minimum(m, Branch::Lower).energy;
    let p = 1.1 * (2.0 * (energy - floor)).max(0.0).sqrt() + 1.0;
    PhaseWindow::centered(q, p).expect("positive extents")
}

/// Orbits of both branches at `energy`; a branch whose minimum lies above
/// `energy` contributes none.
pub fn orbits_at(m: &ModelParams, energy: f64, n_points: usize) -> sbdimer_core::Result<Vec<sbdimer_core::Orbit>> {
    let mut out = Vec::new();
    for b in Branch::BOTH {
        match classical_orbit(m, b, energy, n_points) {
            Ok(o) => out.extend(o),
            Err(Error::EmptyOrbit { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn husimi(cfg: &RunConfig, es: &EigenSystem, em: &mut Emitter) -> Result<()> {
    let h = &cfg.husimi;
    let m = es.params();
    let mut summary = Vec::new();
    for &l in &h.states {
        let energy = es.energy(l).in_stage(Stage::Husimi)?;
        let window = h.window.unwrap_or_else(|| auto_husimi_window(m, energy));
        let grid = husimi_grid(es, l, window, h.nq, h.np, h.spin).in_stage(Stage::Husimi)?;
        let orbits = orbits_at(m, energy, h.orbit_points).in_stage(Stage::Husimi)?;
        em.emit(Stage::Husimi, &format!("husimi_{l}.csv"), |w| {
            header(w, m, Some(es))?;
            grid.write_csv(w)
        })?;
        em.emit(Stage::Husimi, &format!("husimi_{l}.pgm"), |w| grid.write_pgm(w))?;
        em.emit(Stage::Husimi, &format!("orbit_{l}.csv"), |w| {
            header(w, m, None)?;
            writeln!(w, "# energy={energy:e}")?;
            write_orbits_csv(w, &orbits)
        })?;
        summary.push((l, energy, grid.integral(), grid.tube_mass_fraction(&orbits, TUBE_CELLS), grid.max()));
    }
    if summary.is_empty() {
        return Ok(());
    }
    em.emit(Stage::Husimi, "husimi_summary.csv", |w| {
        header(w, m, Some(es))?;
        writeln!(w, "lambda,energy,integral,tube_fraction,max")?;
        for (l, e, i, t, x) in &summary {
            writeln!(w, "{l},{e:e},{i:e},{t:e},{x:e}")?;
        }
        Ok(())
    })
}

/// `(tag, band, summary)` rows for every optical setting.
pub fn band_rows(cfg: &RunConfig, es: &EigenSystem) -> Vec<(String, Branch, EnergyWindow, sbdimer_core::absorption::BandSummary)> {
    let (lo, hi) = band_windows(es.params(), cfg.band_half_width);
    let mut rows = Vec::new();
    for o in &cfg.optical {
        for (b, win) in [(Branch::Lower, lo), (Branch::Upper, hi)] {
            rows.push((o.tag(), b, win, stick_spectrum(es, o, win).summary()));
        }
    }
    rows
}

fn fmt_opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn absorb(cfg: &RunConfig, es: &EigenSystem, em: &mut Emitter) -> Result<()> {
    for o in &cfg.optical {
        let s = stick_spectrum(es, o, EnergyWindow::everything());
        em.emit(Stage::Absorption, &format!("absorption_{}.csv", o.tag()), |w| {
            header(w, es.params(), Some(es))?;
            s.write_csv(w)
        })?;
    }
    let rows = band_rows(cfg, es);
    em.emit(Stage::Absorption, "bands.csv", |w| {
        header(w, es.params(), Some(es))?;
        writeln!(w, "optical,band,window_min,window_max,lines,total,mean_energy,peak_lambda,peak_energy,peak_strength")?;
        for (tag, b, win, s) in &rows {
            writeln!(
                w,
                "{tag},{b},{:e},{:e},{},{:e},{:e},{},{},{}",
                win.min,
                win.max,
                s.lines,
                s.total,
                s.mean_energy,
                fmt_opt(s.peak.map(|p| p.lambda)),
                fmt_opt(s.peak.map(|p| format!("{:e}", p.energy))),
                fmt_opt(s.peak.map(|p| format!("{:e}", p.strength))),
            )?;
        }
        Ok(())
    })
}

fn ratio(es: &EigenSystem, em: &mut Emitter) -> Result<()> {
    let curve = ratio_curve(es, EnergyWindow::everything());
    em.emit(Stage::Ratio, "ratio.csv", |w| {
        header(w, es.params(), Some(es))?;
        curve.write_csv(w)
    })
}
