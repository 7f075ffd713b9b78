use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = "\
schema_version = 1

[family]
kind = polynomial
eta = 1
beta = 1
theta = [[1, 0.5], [0.5, 1]]
gamma = [[2, 1], [1, 2]]

[grid]
radius = 4
mesh = 0.0625

[lyapunov]
horizon = 1

[solve]
variants = P
sources = [[0, 1]]
times = [0.5]

[verify]
checks = domination, mass, support, chapman_kolmogorov
seed = 3
times = [0.1, 0.5]
points = [[0], [1]]
";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.conf");
    fs::write(&p, text).unwrap();
    p
}

fn kernelbound(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kernelbound"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .env_remove("KERNELBOUND_OUT")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn check_and_verify_pass_on_a_valid_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let r = kernelbound(&["check"], &cfg, &out);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    assert!(text(&r.stdout).contains("hypotheses polynomial"));
    let r = kernelbound(&["verify"], &cfg, &out);
    assert_eq!(r.status.code(), Some(0), "{}{}", text(&r.stdout), text(&r.stderr));
    let summary = fs::read_to_string(out.join("verify_summary.txt")).unwrap();
    assert!(summary.contains("chapman_kolmogorov"));
    assert!(out.join("verify_results.csv").exists());
}

#[test]
fn equal_coupling_exponents_fail_with_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("gamma = [[2, 1], [1, 2]]", "gamma = [[2, 2], [1, 2]]"));
    let r = kernelbound(&["check"], &cfg, &dir.path().join("out"));
    assert_eq!(r.status.code(), Some(1));
    let stdout = text(&r.stdout);
    assert!(stdout.contains("fails"), "{stdout}");
    assert!(stdout.contains("(h,k) = (1,2)"), "{stdout}");
}

#[test]
fn missing_key_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("theta = [[1, 0.5], [0.5, 1]]\n", ""));
    let r = kernelbound(&["check"], &cfg, &dir.path().join("out"));
    assert_eq!(r.status.code(), Some(2));
    let err = text(&r.stderr);
    assert!(err.contains("run.conf:3: [family]"), "{err}");
    assert!(err.contains("theta"), "{err}");
}

#[test]
fn unknown_check_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("checks = domination", "checks = frobnicate, domination"));
    let r = kernelbound(&["verify"], &cfg, &dir.path().join("out"));
    assert_eq!(r.status.code(), Some(2));
    assert!(text(&r.stderr).contains("frobnicate"));
}

#[test]
fn randomized_checks_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("seed = 3\n", ""));
    let out = dir.path().join("out");
    let r = kernelbound(&["verify"], &cfg, &out);
    assert_eq!(r.status.code(), Some(2));
    assert!(text(&r.stderr).contains("seed"));
    let r = kernelbound(&["verify", "--seed", "3"], &cfg, &out);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
}

#[test]
fn grid_over_budget_exits_with_resource_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("mesh = 0.0625", "mesh = 0.0625\nmax_unknowns = 50"));
    let r = kernelbound(&["solve"], &cfg, &dir.path().join("out"));
    assert_eq!(r.status.code(), Some(3));
    assert!(text(&r.stderr).contains("resource limit"));
}

#[test]
fn shrunken_ledger_fails_the_weighted_bound() {
    let dir = tempfile::tempdir().unwrap();
    let text_cfg = BASE
        .replace("checks = domination, mass, support, chapman_kolmogorov", "checks = weighted_bound")
        .replace("[solve]", "[bounds]\nledger_scale = 1e-6\ntraining = [4, 0.0625]\nholdout = [6, 0.0625]\n\n[solve]");
    let cfg = write_config(dir.path(), &text_cfg);
    let r = kernelbound(&["verify"], &cfg, &dir.path().join("out"));
    assert_eq!(r.status.code(), Some(1), "{}", text(&r.stderr));
    assert!(text(&r.stdout).contains("weighted_bound               FAIL"));
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("[solve]", "[bounds]\ntraining = [4, 0.0625]\n\n[solve]"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let r = kernelbound(&["synth"], &cfg, out);
        assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "bound_certificate.txt"));
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn solve_writes_a_loadable_kernel_store() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let out = dir.path().join("out");
    let r = kernelbound(&["solve"], &cfg, &out);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    let index = fs::read_to_string(out.join("kernels/index.csv")).unwrap();
    assert_eq!(index.lines().count(), 2);
    let kf = kernelbound::solver::io::load_kernel(&out.join("kernels/P_s1_k1_t1.bin")).unwrap();
    assert_eq!(kf.k, 0);
    assert!((kf.time() - 0.5).abs() < 1e-12);
    assert!(kf.total_mass() > 0.0);
}

#[test]
fn environment_variable_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let target = dir.path().join("from_env");
    let r = Command::new(env!("CARGO_BIN_EXE_kernelbound"))
        .args(["check", "--quiet", "--config"])
        .arg(&cfg)
        .env("KERNELBOUND_OUT", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    assert!(target.join("hypotheses.txt").exists());
}

#[test]
fn jobs_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASE);
    let one = dir.path().join("one");
    let two = dir.path().join("two");
    for (out, jobs) in [(&one, "1"), (&two, "2")] {
        let r = kernelbound(&["solve", "--jobs", jobs], &cfg, out);
        assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    }
    let f = "kernels/P_s1_k1_t1.bin";
    assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(two.join(f)).unwrap());
}

#[test]
fn solve_on_the_heat_oracle_reproduces_the_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "\
schema_version = 1

[family]
preset = heat

[grid]
radius = 12
mesh = 0.015625
dt = 0.00390625

[solve]
variants = P
sources = [[0, 1]]
times = [0.5]
",
    );
    let out = dir.path().join("out");
    let r = kernelbound(&["solve"], &cfg, &out);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    let kf = kernelbound::solver::io::load_kernel(&out.join("kernels/P_s1_k1_t1.bin")).unwrap();
    let err = kernelbound::verify::oracle::oracle_l1_error(&kf, |x, y, _| {
        kernelbound::verify::oracle::heat_kernel(0.5, x, y)
    })
    .unwrap();
    assert!(err <= 0.02, "L1 error {err}");
}

#[test]
fn solve_without_sources_writes_an_empty_store() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("sources = [[0, 1]]", "sources = []"));
    let out = dir.path().join("out");
    let r = kernelbound(&["solve"], &cfg, &out);
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    assert_eq!(fs::read_to_string(out.join("kernels/index.csv")).unwrap().lines().count(), 1);
}

#[test]
fn infeasible_synthesis_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BASE.replace("horizon = 1", "horizon = 1\nrho = 50"));
    let r = kernelbound(&["synth"], &cfg, &dir.path().join("out"));
    assert_eq!(r.status.code(), Some(1), "{}", text(&r.stderr));
    assert!(text(&r.stderr).contains("ρ = 50 outside the feasible interval"), "{}", text(&r.stderr));
}
