use std::path::Path;
use std::process::{Command, Output};

use vpme_core::diagnostics::read_diagnostics;
use vpme_core::experiments::read_moments;
use vpme_core::particles::ParticleEnsemble;
use vpme_core::snapshot;

const SMALL: &str = "\
dim = 1
n_grid = 32
n_particles = 2000
dt = 0.01
t_end = 0.1
scenario = perturbed_maxwellian
log_every = 2
";

fn vpme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpme"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_diagnostics_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = vpme(&["--config", &cfg, "--out", out.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let recs = read_diagnostics(&out.join("diagnostics.csv")).unwrap();
    assert_eq!(recs.len(), 6);
    assert!((recs.last().unwrap().time - 0.1).abs() < 1e-12);
    assert!(out.join("snap_0000000.bin").exists());
    assert!(out.join("snap_0000010.bin").exists());
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = vpme(&["--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7", "run"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (
            std::fs::read(out.join("diagnostics.csv")).unwrap(),
            std::fs::read(out.join("snap_0000010.bin")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dim = 1\n# comment\nn_grid = 32\nbogus = 3\n");
    let o = vpme(&["--config", &cfg, "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":4:"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "n_grid = 32\nn_grid = 64\n");
    let o = vpme(&["--config", &cfg, "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":2:"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "scenario = nope\n");
    assert_eq!(vpme(&["--config", &cfg, "run"]).status.code(), Some(2));
}

#[test]
fn missing_config_is_an_input_error() {
    let o = vpme(&["--config", "/nonexistent/exp.cfg", "run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}delta = 0.9\nmax_iters = 1\nnewton_tol = 1e-14\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = vpme(&["--config", &cfg, "--out", out.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn w2_between_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let a = ParticleEnsemble::with_uniform_weights(1, vec![0.1, 0.4, 0.7], vec![0.0, 1.0, -1.0]).unwrap();
    let mut b = a.clone();
    b.translate(&[0.05]).unwrap();
    let pa = dir.path().join("a.bin");
    let pb = dir.path().join("b.bin");
    snapshot::write(&pa, &a, 0.0).unwrap();
    snapshot::write(&pb, &b, 0.0).unwrap();

    let o = vpme(&["w2", pa.to_str().unwrap(), pa.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    let w2: f64 = text.lines().next().unwrap().trim_start_matches("w2 = ").parse().unwrap();
    assert_eq!(w2, 0.0);

    let o = vpme(&["w2", pa.to_str().unwrap(), pb.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    let w2: f64 = text.lines().next().unwrap().trim_start_matches("w2 = ").parse().unwrap();
    assert!((w2 - 0.05).abs() < 1e-12, "{w2}");
}

#[test]
fn corrupt_snapshot_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = ParticleEnsemble::with_uniform_weights(1, vec![0.1, 0.4], vec![0.0, 1.0]).unwrap();
    let pa = dir.path().join("a.bin");
    snapshot::write(&pa, &a, 0.0).unwrap();
    let mut bytes = std::fs::read(&pa).unwrap();
    bytes.truncate(bytes.len() - 5);
    let pb = dir.path().join("b.bin");
    std::fs::write(&pb, bytes).unwrap();
    let o = vpme(&["w2", pa.to_str().unwrap(), pb.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed"), "{}", stderr(&o));

    let c = ParticleEnsemble::with_uniform_weights(2, vec![0.1, 0.4, 0.2, 0.3], vec![0.0; 4]).unwrap();
    let pc = dir.path().join("c.bin");
    snapshot::write(&pc, &c, 0.0).unwrap();
    let o = vpme(&["w2", pa.to_str().unwrap(), pc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn moments_and_mollify_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = vpme(&["--config", &cfg, "--out", out.to_str().unwrap(), "moments", "--orders", "2,4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = read_moments(&out.join("moments.csv")).unwrap();
    assert_eq!(table.orders, vec![2.0, 4.0]);
    assert!(table.sup.iter().zip(table.initial()).all(|(s, i)| s >= i));

    let o = vpme(&["--config", &cfg, "--out", out.to_str().unwrap(), "mollify", "--radii", "0.1,0.2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = vpme(&["--config", &cfg, "--out", out.to_str().unwrap(), "mollify", "--radii", "0.2,0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("mollify.csv").exists());
}

#[test]
fn stability_writes_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = vpme(&["--config", &cfg, "--out", out.to_str().unwrap(), "stability", "--eps", "0.1,0.05"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fit = std::fs::read_to_string(out.join("stability_fit.csv")).unwrap();
    assert!(fit.starts_with("eps,C,residual,t0_implied,floor_dominated"));
    assert_eq!(fit.lines().count(), 3);
}
