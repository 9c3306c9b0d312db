//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Unknown and repeated keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sbdimer_core::{reduce_dimer_params, BasisSpec, DimerParams, ModelParams, OpticalParams, PhaseWindow, SpinProjection};

use crate::error::{CliError, Result};

pub const KEYS: &[&str] = &[
    "p",
    "r",
    "eps_plus",
    "eps_minus",
    "eps1",
    "eps2",
    "gamma",
    "omega",
    "v",
    "n_osc",
    "keep",
    "optical",
    "husimi_states",
    "husimi_q_min",
    "husimi_q_max",
    "husimi_p_min",
    "husimi_p_max",
    "husimi_nq",
    "husimi_np",
    "husimi_spin",
    "orbit_points",
    "potential_q_min",
    "potential_q_max",
    "potential_points",
    "band_half_width",
    "check_convergence",
    "convergence_tolerance",
    "output_dir",
    "sweep_axis",
    "sweep_values",
];

const DIMER_KEYS: [&str; 5] = ["eps1", "eps2", "gamma", "omega", "v"];
const REDUCED_KEYS: [&str; 4] = ["p", "r", "eps_plus", "eps_minus"];

// Parameters of the demo run used when no model keys are given: symmetric
// and weakly coupled.
const DEMO_P: f64 = 1.0;
const DEMO_R: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct HusimiSettings {
    pub states: Vec<usize>,
    /// `None` sizes the window from the classically allowed region.
    pub window: Option<PhaseWindow>,
    pub nq: usize,
    pub np: usize,
    pub spin: SpinProjection,
    pub orbit_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSettings {
    /// `None` covers both vertical transition energies plus a margin.
    pub q_range: Option<(f64, f64)>,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    P,
    R,
    EpsMinus,
    /// `μ₂/μ₁`; infinity selects `(0, 1)`.
    MuRatio,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "p" => SweepAxis::P,
            "r" => SweepAxis::R,
            "eps_minus" => SweepAxis::EpsMinus,
            "mu_ratio" => SweepAxis::MuRatio,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::P => "p",
            SweepAxis::R => "r",
            SweepAxis::EpsMinus => "eps_minus",
            SweepAxis::MuRatio => "mu_ratio",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub basis: BasisSpec,
    pub optical: Vec<OpticalParams>,
    pub husimi: HusimiSettings,
    pub potential: PotentialSettings,
    /// `None` selects the default band windows.
    pub band_half_width: Option<f64>,
    /// Tolerance of the truncation check, `None` when disabled.
    pub convergence_tolerance: Option<f64>,
    pub output_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("empty config is valid")
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

struct Entries {
    map: BTreeMap<&'static str, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| CliError::Parse {
                line: *line,
                reason: format!("`{key}`: cannot parse `{v}`: {e}"),
            }),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.get(key)?;
        match v {
            Some(x) if !x.is_finite() => Err(CliError::invalid(key, "must be finite")),
            v => Ok(v),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some((line, v)) = self.map.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|e| CliError::Parse {
                    line: *line,
                    reason: format!("`{key}`: cannot parse `{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn pair(&self, key: &str) -> Result<Option<(f64, f64)>> {
        let Some((line, v)) = self.map.get(key) else {
            return Ok(None);
        };
        parse_pair(v).map(Some).ok_or_else(|| CliError::Parse {
            line: *line,
            reason: format!("`{key}`: expected `a:b`, got `{v}`"),
        })
    }
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(':')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(CliError::Parse {
                line,
                reason: format!("expected `key = value`, got `{content}`"),
            });
        };
        let k = k.trim();
        let Some(&key) = KEYS.iter().find(|&&known| known == k) else {
            return Err(CliError::Parse {
                line,
                reason: format!("unknown key `{k}`"),
            });
        };
        let v = v.trim();
        if v.is_empty() {
            return Err(CliError::Parse {
                line,
                reason: format!("empty value for `{key}`"),
            });
        }
        if let Some((first, _)) = map.insert(key, (line, v.to_string())) {
            return Err(CliError::Parse {
                line,
                reason: format!("`{key}` already set on line {first}"),
            });
        }
    }
    Ok(Entries { map })
}

fn model_error(e: sbdimer_core::Error) -> CliError {
    match e {
        sbdimer_core::Error::Domain { name, reason } => CliError::invalid(name, reason),
        other => CliError::invalid("model", other.to_string()),
    }
}

fn model_from(e: &Entries) -> Result<ModelParams> {
    let dimer: Vec<&str> = DIMER_KEYS.iter().copied().filter(|k| e.has(k)).collect();
    if !dimer.is_empty() {
        if let Some(k) = REDUCED_KEYS.iter().find(|k| e.has(k)) {
            return Err(CliError::invalid(k, "cannot be combined with dimer parameters (eps1, eps2, gamma, omega, v)"));
        }
        if dimer.len() != DIMER_KEYS.len() {
            let missing: Vec<&str> = DIMER_KEYS.iter().copied().filter(|k| !e.has(k)).collect();
            return Err(CliError::invalid(missing[0], format!("dimer parameters need all of {DIMER_KEYS:?}")));
        }
        let d = DimerParams {
            eps1: e.real("eps1")?.unwrap(),
            eps2: e.real("eps2")?.unwrap(),
            gamma: e.real("gamma")?.unwrap(),
            omega: e.real("omega")?.unwrap(),
            v: e.real("v")?.unwrap(),
        };
        return reduce_dimer_params(&d).map_err(model_error);
    }
    let p = e.real("p")?.unwrap_or(DEMO_P);
    let r = e.real("r")?.unwrap_or(DEMO_R);
    let eps_minus = e.real("eps_minus")?.unwrap_or(0.0);
    let eps_plus = e.real("eps_plus")?.unwrap_or(0.0);
    ModelParams::new(p, r, eps_minus)
        .and_then(|m| m.with_eps_plus(eps_plus))
        .map_err(model_error)
}

fn positive_count(e: &Entries, key: &str, default: usize, min: usize) -> Result<usize> {
    let n = e.get::<usize>(key)?.unwrap_or(default);
    if n < min {
        return Err(CliError::invalid(key, format!("must be at least {min}, got {n}")));
    }
    Ok(n)
}

fn optical_from(e: &Entries) -> Result<Vec<OpticalParams>> {
    let Some((line, v)) = e.map.get("optical") else {
        return Ok(vec![OpticalParams::default()]);
    };
    let mut out: Vec<OpticalParams> = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (a, b) = parse_pair(item).ok_or_else(|| CliError::Parse {
            line: *line,
            reason: format!("`optical`: expected `mu1:mu2`, got `{item}`"),
        })?;
        let o = OpticalParams::new(a, b).map_err(|err| CliError::invalid("optical", err.to_string()))?;
        if out.iter().any(|x| x.tag() == o.tag()) {
            return Err(CliError::invalid("optical", format!("setting {item} listed twice")));
        }
        out.push(o);
    }
    if out.is_empty() {
        return Err(CliError::invalid("optical", "needs at least one setting"));
    }
    Ok(out)
}

fn husimi_window(e: &Entries) -> Result<Option<PhaseWindow>> {
    let keys = ["husimi_q_min", "husimi_q_max", "husimi_p_min", "husimi_p_max"];
    let vals = keys.iter().map(|k| e.real(k)).collect::<Result<Vec<_>>>()?;
    if vals.iter().all(Option::is_none) {
        return Ok(None);
    }
    if let Some(i) = vals.iter().position(Option::is_none) {
        return Err(CliError::invalid(keys[i], "the Husimi window needs all four bounds"));
    }
    let v: Vec<f64> = vals.into_iter().map(Option::unwrap).collect();
    PhaseWindow::new(v[0], v[1], v[2], v[3])
        .map(Some)
        .map_err(|err| CliError::invalid("husimi_q_min", err.to_string()))
}

fn parse_bool(e: &Entries, key: &str, default: bool) -> Result<bool> {
    match e.raw(key) {
        None => Ok(default),
        Some("true" | "yes" | "1") => Ok(true),
        Some("false" | "no" | "0") => Ok(false),
        Some(other) => Err(CliError::invalid(key, format!("expected true or false, got `{other}`"))),
    }
}

fn sweep_from(e: &Entries) -> Result<Option<SweepSpec>> {
    match (e.raw("sweep_axis"), e.has("sweep_values")) {
        (None, false) => Ok(None),
        (None, true) => Err(CliError::invalid("sweep_axis", "required when sweep_values is set")),
        (Some(_), false) => Err(CliError::invalid("sweep_values", "required when sweep_axis is set")),
        (Some(name), true) => {
            let axis = SweepAxis::parse(name)
                .ok_or_else(|| CliError::invalid("sweep_axis", format!("expected p, r, eps_minus or mu_ratio, got `{name}`")))?;
            let values: Vec<f64> = e.list("sweep_values")?.unwrap_or_default();
            if values.is_empty() {
                return Err(CliError::invalid("sweep_values", "needs at least one value"));
            }
            if let Some(v) = values.iter().find(|v| v.is_nan() || (v.is_infinite() && axis != SweepAxis::MuRatio)) {
                return Err(CliError::invalid("sweep_values", format!("{v} is not allowed on axis {axis}")));
            }
            Ok(Some(SweepSpec { axis, values }))
        }
    }
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let e = tokenize(text)?;
    let model = model_from(&e)?;
    let n_osc = e.get::<usize>("n_osc")?.unwrap_or(BasisSpec::DEFAULT_N_OSC);
    let keep = e.get::<usize>("keep")?.unwrap_or(BasisSpec::DEFAULT_KEEP.min(2 * n_osc));
    let basis = BasisSpec::new(n_osc, keep).map_err(|err| match err {
        sbdimer_core::Error::Domain { name, reason } => CliError::invalid(name, reason),
        other => CliError::invalid("keep", other.to_string()),
    })?;

    let states: Vec<usize> = e.list("husimi_states")?.unwrap_or_default();
    if let Some(s) = states.iter().find(|&&s| s >= keep) {
        return Err(CliError::invalid("husimi_states", format!("state {s} is not below keep = {keep}")));
    }
    let spin = match e.pair("husimi_spin")? {
        None => SpinProjection::symmetric(),
        Some((a, b)) => SpinProjection::new(a, b).map_err(|err| CliError::invalid("husimi_spin", err.to_string()))?,
    };
    let husimi = HusimiSettings {
        states,
        window: husimi_window(&e)?,
        nq: positive_count(&e, "husimi_nq", 240, 2)?,
        np: positive_count(&e, "husimi_np", 100, 2)?,
        spin,
        orbit_points: positive_count(&e, "orbit_points", 400, 2)?,
    };

    let q_range = match (e.real("potential_q_min")?, e.real("potential_q_max")?) {
        (None, None) => None,
        (Some(a), Some(b)) if a < b => Some((a, b)),
        (Some(_), Some(_)) => return Err(CliError::invalid("potential_q_max", "must exceed potential_q_min")),
        _ => return Err(CliError::invalid("potential_q_min", "set both potential_q_min and potential_q_max")),
    };
    let potential = PotentialSettings {
        q_range,
        points: positive_count(&e, "potential_points", 801, 2)?,
    };

    let band_half_width = e.real("band_half_width")?;
    if let Some(w) = band_half_width {
        if w <= 0.0 {
            return Err(CliError::invalid("band_half_width", "must be > 0"));
        }
    }
    let tolerance = e.real("convergence_tolerance")?.unwrap_or(1e-3);
    if tolerance <= 0.0 {
        return Err(CliError::invalid("convergence_tolerance", "must be > 0"));
    }
    let convergence_tolerance = parse_bool(&e, "check_convergence", true)?.then_some(tolerance);

    Ok(RunConfig {
        model,
        basis,
        optical: optical_from(&e)?,
        husimi,
        potential,
        band_half_width,
        convergence_tolerance,
        output_dir: e.raw("output_dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
        sweep: sweep_from(&e)?,
    })
}
