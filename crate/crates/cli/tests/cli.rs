use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use faraday_core::engine::{doppler_fwhm_hz, Experiment};
use faraday_core::units::SUGGESTED_GAMMA;
use faraday_sim::commands::{validate_with, SPECTRUM_HEADER};
use faraday_sim::validate::TOLERANCES;

const GAMMA: &str = "medium.gamma_rad_s = 2pi*18e6\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_faraday-sim"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("FARADAY_SIM_JOBS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn sweep_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.conf", &format!("{GAMMA}scan.steps = 41\n"));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("central slope:") && out.contains("peak rotation:"), "{out}");
    let o = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .env("FARADAY_SIM_JOBS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("B_gauss,transmission,rotation_rad,ellipticity_rad,signal,status\n"));
    assert_eq!(text.lines().count(), 42);
}

#[test]
fn output_path_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_config.csv");
    let cfg = write_config(dir.path(), "run.conf", &format!("{GAMMA}output.path = {}\n", target.display()));
    let o = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.exists());
}

#[test]
fn single_point_scan_at_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    for (engine, exact) in [("analytic", true), ("multilevel", false)] {
        let body = format!("{GAMMA}engine = {engine}\ndoppler.enabled = false\nscan.b_start_mg = 0\nscan.b_stop_mg = 0\nscan.steps = 1\n");
        let cfg = write_config(dir.path(), "zero.conf", &body);
        let out = dir.path().join("zero.csv");
        let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{engine}: {}", stderr(&o));
        let csv = std::fs::read_to_string(&out).unwrap();
        let rot = column(&csv, "rotation_rad");
        assert_eq!(rot.len(), 1);
        if exact {
            assert_eq!(rot[0], 0.0);
        } else {
            assert!(rot[0].abs() < 1e-8, "{engine}: {}", rot[0]);
        }
    }
}

#[test]
fn config_errors_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("missing.conf", "field.power_w = 3e-3\n", "medium.gamma_rad_s"),
        ("typo.conf", "medium.gamma_rad_s = 1e8\nmedium.densty_cm3 = 1e12\n", "medium.densty_cm3"),
        ("range.conf", "medium.gamma_rad_s = 1e8\nmedium.delta_rho = 2\n", "medium.delta_rho"),
    ];
    for (name, body, key) in cases {
        let cfg = write_config(dir.path(), name, body);
        let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x.csv").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(stderr(&o).contains(key), "{name}: {}", stderr(&o));
    }
    let o = run(&["sweep"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--config"));
    let o = run(&["sweep", "--config", dir.path().join("absent.conf").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = write_config(dir.path(), "ok.conf", GAMMA);
    let o = bin().args(["sweep", "--config", cfg.to_str().unwrap()]).env("FARADAY_SIM_JOBS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--jobs"));
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("no/such/dir.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // evaluation only, in an opaque cell: the closed form has no solution
    let cfg = write_config(dir.path(), "opaque.conf", &format!("{GAMMA}medium.density_cm3 = 1e15\noptimize.free =\n"));
    let o = run(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical failure"));
}

#[test]
fn optimize_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "opt.conf", GAMMA);
    let o = run(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = stdout(&o);
    let field = |k: &str| -> f64 {
        r.lines().find_map(|l| l.strip_prefix(&format!("{k}: "))).unwrap().trim().parse().unwrap()
    };
    assert!((field("alpha0_L") - 0.864665).abs() < 1e-3);
    let b = field("b_min_G_per_rtHz");
    assert!(b > 1e-11 && b < 1e-9, "{b}");
    assert!(r.contains("free variables: density"));

    let cfg = write_config(dir.path(), "eval.conf", &format!("{GAMMA}optimize.free =\n"));
    let o = run(&["optimize", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("evaluation only"));
}

#[test]
fn validate_passes_and_echoes_tolerances() {
    let o = run(&["validate"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    let suites: Vec<&str> = out.lines().filter(|l| l.starts_with("suite=")).collect();
    assert_eq!(suites.len(), 5);
    assert!(suites.iter().all(|l| l.contains("result=pass")), "{out}");
    let echoed = |name: &str| -> f64 {
        out.lines()
            .find_map(|l| l.strip_prefix(&format!("tolerance {name} = ")))
            .unwrap()
            .parse()
            .unwrap()
    };
    for (name, v) in TOLERANCES {
        assert_eq!(echoed(name), *v, "{name}");
    }
    assert_eq!(echoed("four_level.coherence_rel"), 2e-2);
    assert_eq!(echoed("four_level.rates_rel"), 5e-2);
    assert_eq!(echoed("closed_form.rel"), 1e-2);
    assert_eq!(echoed("doppler.refinement_rel"), 5e-3);
    assert_eq!(echoed("doppler.max_nodes"), 129.0);
    assert_eq!(echoed("doppler.voigt_rel"), 1e-3);
    assert_eq!(echoed("steady_state.min_eigenvalue"), -1e-6);
}

#[test]
fn sign_flip_in_phase_rate_fails_antisymmetry() {
    let flipped = |omega: f64, delta: f64, m: &faraday_core::units::MediumParams| {
        let mut r = faraday_core::analytic::local_response(omega, delta, m)?;
        // odd part of the phase rate made even
        r.phase_rate_minus = r.phase_rate_plus;
        Ok(r)
    };
    let (report, ok) = validate_with(&flipped);
    assert!(!ok);
    let line = report.lines().find(|l| l.starts_with("suite=antisymmetry")).unwrap();
    assert!(line.contains("result=fail"), "{line}");
}

#[test]
fn spectrum_symmetry_width_and_transparency() {
    let dir = tempfile::tempdir().unwrap();
    let weak = write_config(dir.path(), "weak.conf", &format!("{GAMMA}field.power_w = 1e-7\nspectrum.steps = 61\n"));
    let strong = write_config(dir.path(), "strong.conf", &format!("{GAMMA}spectrum.steps = 61\n"));
    let mut csv = Vec::new();
    for cfg in [&weak, &strong] {
        let out = dir.path().join("spectrum.csv");
        let o = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        csv.push(std::fs::read_to_string(&out).unwrap());
    }
    assert!(csv[0].starts_with(SPECTRUM_HEADER));

    for text in &csv {
        for (p, m) in [("im_chi_plus", "im_chi_minus"), ("re_chi_plus", "re_chi_minus")] {
            for (a, b) in column(text, p).iter().zip(column(text, m)) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{p}: {a} vs {b}");
            }
        }
    }

    // full width from the half-maximum crossing below the main peak; the
    // F' = 2 line on the blue side keeps the upper crossing from being clean
    let det = column(&csv[0], "detuning_MHz");
    let abs = column(&csv[0], "im_chi_plus");
    let (ipk, peak) = abs.iter().copied().enumerate().fold((0, 0.0), |a, (i, v)| if v > a.1 { (i, v) } else { a });
    let j = (0..ipk).rev().find(|&i| abs[i] < 0.5 * peak).unwrap();
    let cross = det[j] + (0.5 * peak - abs[j]) / (abs[j + 1] - abs[j]) * (det[j + 1] - det[j]);
    let fwhm_mhz = 2.0 * (det[ipk] - cross);
    let doppler_mhz = doppler_fwhm_hz(&Experiment::rb87_default(1e12, SUGGESTED_GAMMA)).unwrap() * 1e-6;
    assert!(fwhm_mhz >= doppler_mhz, "{fwhm_mhz} MHz < {doppler_mhz} MHz");

    let at_zero = |text: &str| {
        let d = column(text, "detuning_MHz");
        let i = d.iter().position(|x| *x == 0.0).unwrap();
        column(text, "im_chi_plus")[i]
    };
    let ratio = at_zero(&csv[1]) / at_zero(&csv[0]);
    assert!(ratio < 0.2, "{ratio}");
}
