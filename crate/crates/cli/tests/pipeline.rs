use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};

use sbdimer_cli::pipeline::MANIFEST_NAME;
use sbdimer_cli::{parse_config, run_pipeline, run_tasks, sweep, CliError, RunConfig, Session, Stage, Task};
use sbdimer_core::{parity_expectation, stick_spectrum, EnergyWindow};

const SMALL: &str = "p = 4\nr = 0.3\neps_minus = 1\nn_osc = 60\nkeep = 40\noptical = 1:1, 1:0, 0:1\nhusimi_states = 3, 10\nhusimi_nq = 40\nhusimi_np = 20\n";

fn small(dir: &Path) -> RunConfig {
    let mut cfg = parse_config(SMALL).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

#[test]
fn manifest_is_complete_and_checksums_match() {
    let tmp = tempfile::tempdir().unwrap();
    let m = run_pipeline(&small(tmp.path())).unwrap();
    let expected = [
        "energies.csv",
        "convergence.csv",
        "bloch.csv",
        "adiabatic_potentials.csv",
        "franck_condon.csv",
        "husimi_3.csv",
        "husimi_3.pgm",
        "orbit_3.csv",
        "husimi_10.csv",
        "husimi_10.pgm",
        "orbit_10.csv",
        "husimi_summary.csv",
        "absorption_1_1.csv",
        "absorption_1_0.csv",
        "absorption_0_1.csv",
        "bands.csv",
        "ratio.csv",
    ];
    assert_eq!(m.paths().collect::<Vec<_>>(), expected);
    let mut on_disk = listing(tmp.path());
    assert!(on_disk.remove(MANIFEST_NAME));
    assert_eq!(on_disk, m.paths().map(String::from).collect());
    for e in &m.entries {
        let bytes = fs::read(tmp.path().join(&e.path)).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), e.sha256);
    }
    let text = fs::read_to_string(tmp.path().join(MANIFEST_NAME)).unwrap();
    assert_eq!(text.lines().count(), expected.len());
    assert_eq!(hex::encode(Sha256::digest(text.as_bytes())), m.sha256);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_pipeline(&small(&tmp.path().join("a"))).unwrap();
    let b = run_pipeline(&small(&tmp.path().join("b"))).unwrap();
    assert_eq!(a.entries, b.entries);
    assert_eq!(a.sha256, b.sha256);
}

#[test]
fn failure_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    fs::create_dir_all(out.join("ratio.csv")).unwrap();
    let err = run_pipeline(&small(&out)).unwrap_err();
    assert_eq!(err.stage(), Some(Stage::Ratio), "{err}");
    assert!(err.to_string().contains("stage `ratio`"));
    assert_eq!(listing(&out), BTreeSet::from(["ratio.csv".to_string()]));
}

#[test]
fn subcommand_subsets() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.convergence_tolerance = None;
    let m = run_tasks(&mut Session::default(), &cfg, &[Task::Adiabatic]).unwrap();
    assert_eq!(m.paths().collect::<Vec<_>>(), ["adiabatic_potentials.csv", "franck_condon.csv"]);
    let m = run_tasks(&mut Session::default(), &cfg, &[Task::Spectrum]).unwrap();
    assert_eq!(m.paths().collect::<Vec<_>>(), ["energies.csv"]);
}

#[test]
fn eps_minus_sweep_with_parity_selection_at_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.convergence_tolerance = None;
    cfg.husimi.states.clear();
    cfg.sweep = parse_config("sweep_axis = eps_minus\nsweep_values = 0, 2, 5").unwrap().sweep;
    let mut session = Session::default();
    let report = sweep(&mut session, &cfg, &Task::ALL).unwrap();
    assert_eq!(report.failures(), 0);
    assert_eq!(report.runs.len(), 3);
    let summary = fs::read_to_string(&report.summary).unwrap();
    // three values × three optical settings × two bands
    assert_eq!(summary.lines().count(), 1 + 18);
    assert!(summary.lines().skip(1).all(|l| l.contains(",ok,")));

    let zero = sbdimer_cli::sweep::point_config(&cfg, sbdimer_cli::SweepAxis::EpsMinus, 0.0).unwrap();
    let es = session.eigensystem(&zero.model, &zero.basis).unwrap();
    let s = stick_spectrum(&es, &zero.optical[0], EnergyWindow::everything());
    let mut odd = 0;
    for line in &s.lines {
        if parity_expectation(&es, line.lambda).unwrap() < 0.0 {
            odd += 1;
            assert!(line.strength <= 1e-16);
        }
    }
    assert!(odd > 0);
}

#[test]
fn single_value_sweep_matches_direct_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("sweep"));
    cfg.sweep = parse_config("sweep_axis = p\nsweep_values = 4").unwrap().sweep;
    let report = sweep(&mut Session::default(), &cfg, &Task::ALL).unwrap();
    let swept = report.runs[0].outcome.as_ref().unwrap();
    let direct = run_pipeline(&small(&tmp.path().join("direct"))).unwrap();
    assert_eq!(swept.entries, direct.entries);
}

#[test]
fn mu_ratio_sweep_reproduces_optical_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("sweep"));
    cfg.husimi.states.clear();
    cfg.convergence_tolerance = None;
    cfg.sweep = parse_config("sweep_axis = mu_ratio\nsweep_values = 0, 1, inf").unwrap().sweep;
    let mut session = Session::default();
    let report = sweep(&mut session, &cfg, &Task::ALL).unwrap();
    let direct_cfg = {
        let mut c = cfg.clone();
        c.sweep = None;
        c.output_dir = tmp.path().join("direct");
        c
    };
    let direct = run_tasks(&mut session, &direct_cfg, &Task::ALL).unwrap();
    for (run, tag) in report.runs.iter().zip(["1_0", "1_1", "0_1"]) {
        let m = run.outcome.as_ref().unwrap();
        let name = format!("absorption_{tag}.csv");
        assert!(m.contains(&name), "{name}");
        let a = fs::read(run.dir.join(&name)).unwrap();
        let b = fs::read(direct.dir.join(&name)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn sweep_records_failures_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.convergence_tolerance = None;
    cfg.husimi.states.clear();
    cfg.sweep = parse_config("sweep_axis = p\nsweep_values = -1, 2").unwrap().sweep;
    let report = sweep(&mut Session::default(), &cfg, &Task::ALL).unwrap();
    assert_eq!(report.failures(), 1);
    assert!(matches!(report.runs[0].outcome, Err(CliError::Invalid { .. })));
    assert!(report.runs[1].outcome.is_ok());
    let summary = fs::read_to_string(&report.summary).unwrap();
    assert!(summary.lines().nth(1).unwrap().contains("failed"));
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sbdimer"))
}

#[test]
fn binary_runs_subcommands_with_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("small.conf");
    fs::write(&conf, format!("{SMALL}check_convergence = false\n")).unwrap();
    let cache = tmp.path().join("cache");
    let run = |sub: &str, out: &str| {
        binary()
            .args([sub, "--config"])
            .arg(&conf)
            .arg("--out")
            .arg(tmp.path().join(out))
            .arg("--cache")
            .arg(&cache)
            .output()
            .unwrap()
    };
    let first = run("spectrum", "one");
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 2);
    let second = run("spectrum", "two");
    assert!(second.status.success());
    assert_eq!(
        fs::read(tmp.path().join("one/energies.csv")).unwrap(),
        fs::read(tmp.path().join("two/energies.csv")).unwrap()
    );
    for sub in ["bloch", "adiabatic", "husimi", "absorb", "ratio", "all"] {
        let o = run(sub, sub);
        assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(tmp.path().join(sub).join(MANIFEST_NAME).is_file());
    }
}

#[test]
fn binary_reports_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "p = 1\nwidth = 3\n").unwrap();
    let o = binary().arg("all").arg("--config").arg(&conf).output().unwrap();
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("width"), "{err}");

    fs::write(&conf, "p = -1\n").unwrap();
    let o = binary().arg("spectrum").arg("--config").arg(&conf).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("`p`"));

    let o = binary().arg("spectrum").arg("--config").arg(tmp.path().join("missing.conf")).output().unwrap();
    assert!(!o.status.success());
}
