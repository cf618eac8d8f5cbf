use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qbm::Simulation;
use qbm_cli::commands::{compute_sweep, log_log_slope};
use qbm_cli::{RawConfig, RunConfig};

fn qbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn decay_writes_csv_report_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = configs().join("fig3.conf");
    let o = qbm(&["decay", "--config", cfg.to_str().unwrap(), "--out", out, "--samples", "61", "--plot-script"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("fig3_decay.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,n12_exact,n12_gr,n12_id1,n12_id2");
    assert_eq!(lines.len(), 62);
    assert!(!csv.contains('\r'));
    let report = read(&dir.path().join("fig3_report.txt"));
    assert!(report.contains("regime: GOLDEN_RULE"));
    assert!(report.contains("1/e crossings"));
    assert!(read(&dir.path().join("fig3_plot.gp")).contains("fig3_decay.csv"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig5.conf");
    for dir in [&a, &b] {
        let o = qbm(&["decay", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let x = fs::read(a.path().join("fig5_decay.csv")).unwrap();
    let y = fs::read(b.path().join("fig5_decay.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn closed_system_with_two_samples() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbm(&[
        "decay",
        "--set",
        "damping_rate=0",
        "--set",
        "dq=10",
        "--samples",
        "2",
        "--tmax",
        "3",
        "--curves",
        "exact",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("run_decay.csv"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let n: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((n - 1.0).abs() < 1e-12, "{row}");
        assert!(row.ends_with(",,,"));
    }
}

#[test]
fn no_prefactor_flag_reaches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbm(&["decay", "--set", "dq=16", "--no-prefactor", "--samples", "5", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(&dir.path().join("run_report.txt")).contains("include_prefactor: false"));
}

#[test]
fn regimes_label_paper_scenarios() {
    for (dq, dp, label) in [
        ("16", "0", "GOLDEN_RULE"),
        ("80", "0", "CROSSOVER"),
        ("200", "0", "INTERACTION_DOMINATED_1"),
        ("4000", "0", "INTERACTION_DOMINATED_2"),
        ("0", "800000", "INTERACTION_DOMINATED_2"),
    ] {
        let o = qbm(&["regimes", "--set", &format!("dq={dq}"), "--set", &format!("dp={dp}"), "--format", "csv"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains(&format!("regime,{label}")), "dq={dq} dp={dp}: {}", stdout(&o));
    }
}

#[test]
fn zero_separation_is_a_config_error() {
    let o = qbm(&["regimes", "--set", "dq=0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("domain error"));
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let o = qbm(&["decay", "--set", "colour=red"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qbm(&["decay", "--samples", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qbm(&["decay", "--config", "/nonexistent/x.conf"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qbm(&["decay", "--curves", "exact,nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coarse_wigner_grid_is_rejected_with_guidance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qbm(&["wigner", "--set", "dq=40", "--set", "grid_np=21", "--set", "grid_nq=21", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hint: increase grid_nq"));
}

#[test]
fn wigner_writes_grids_and_density() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig2.conf");
    let o = qbm(&["wigner", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("fig2_wigner_0.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "-10,10,201,-5,5,401");
    assert_eq!(lines.count(), 401);
    let dat = read(&dir.path().join("fig2_wigner_0.dat"));
    assert!(dat.starts_with("# qmin qmax nq pmin pmax np t"));
    let density = read(&dir.path().join("fig2_density.csv"));
    assert_eq!(density.lines().next().unwrap(), "q,density_t0");
}

#[test]
fn single_packet_gives_single_hump() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbm(&[
        "wigner",
        "--set",
        "dq=8",
        "--set",
        "amplitudes=1,0",
        "--set",
        "grid_q=-10,10",
        "--set",
        "grid_p=-4,4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let density = read(&dir.path().join("run_density.csv"));
    let rows: Vec<(f64, f64)> = density
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    let (q_peak, _) = rows.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!((q_peak + 4.0).abs() < 0.1);
    let right: f64 = rows.iter().filter(|r| r.0 > 0.0).map(|r| r.1).sum();
    assert!(right < 1e-6);
}

fn sweep(text: &str) -> Vec<qbm_cli::commands::SweepRow> {
    let cfg = RunConfig::from_raw(&RawConfig::parse(text).unwrap()).unwrap();
    compute_sweep(&cfg, &Simulation::new(cfg.params)).unwrap()
}

#[test]
fn single_entry_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbm(&["sweep", "--set", "sweep_values=200", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("run_sweep.csv"));
    assert_eq!(csv.lines().next().unwrap(), "dq,tau_exact,tau_gr,tau_id1,tau_id2");
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn position_sweep_slope_flips_from_quadratic_to_linear() {
    let rows = sweep("sweep_axis = dq\nsweep_log = 100, 10000, 9");
    let slope = |i: usize, j: usize| {
        log_log_slope(
            &[rows[i].separation, rows[j].separation],
            &[rows[i].exact, rows[j].exact],
        )
    };
    let (low, high) = (slope(0, 2), slope(6, 8));
    assert!(low < -1.4, "{low}");
    assert!((high + 1.0).abs() < 0.1, "{high}");
}

#[test]
fn momentum_sweep_follows_square_root() {
    let rows = sweep("dq = 0\nsweep_axis = dp\nsweep_log = 1e6, 1e8, 3");
    let x: Vec<f64> = rows.iter().map(|r| r.separation).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.id2).collect();
    assert!((log_log_slope(&x, &y) + 0.5).abs() < 1e-9);
}
