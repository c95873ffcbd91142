use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lowrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
seed = 3
trials = 2
mass_grid = [2048.0, 4096.0, 8192.0, 16384.0]
baselines = ["plain_2r_svd"]

[model]
k = 24
r = 1
target_mass = 4096.0
shape = { shape = "random_factors" }
observation = { kind = "poisson" }

[curated]
r = 1
"#;

#[test]
fn gen_sample_recover_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let cfg = cfg.to_str().unwrap();
    let m = dir.path().join("m.txt");
    let x = dir.path().join("x.txt");
    let est = dir.path().join("est.txt");

    assert!(lowrank(&["--config", cfg, "--out", m.to_str().unwrap(), "gen"]).status.success());
    let header = std::fs::read_to_string(&m).unwrap();
    assert!(header.starts_with("24 1 poisson\n"));

    let o = lowrank(&["--config", cfg, "--out", x.to_str().unwrap(), "sample", "--model", m.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let run = || {
        lowrank(&[
            "--out",
            est.to_str().unwrap(),
            "recover",
            "--input",
            x.to_str().unwrap(),
            "--model",
            m.to_str().unwrap(),
            "--no-timing",
        ])
    };
    let (a, b) = (run(), run());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,r,model,x_l1,normalized_l1,zeroed_weight,restarts,runtime_ms"
    );
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[0], "24");
    let err: f64 = fields[4].parse().unwrap();
    assert!(err > 0.0 && err < 1.0);
    assert_eq!(fields[7], "");
    assert!(std::fs::read_to_string(&est).unwrap().starts_with("24 2 poisson\n"));
}

#[test]
fn counterexample_file_has_expected_triples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ce.json",
        r#"{"model": {"k": 8, "r": 2, "target_mass": 16.0,
            "shape": {"shape": "counterexample", "n_max": 2},
            "observation": {"kind": "bernoulli"}},
            "curated": {"r": 2}}"#,
    );
    let o = lowrank(&["--config", cfg.to_str().unwrap(), "gen"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let body: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(body.len(), 32);
    assert!(body.iter().all(|l| l.ends_with(" 0.5")));
}

#[test]
fn scaling_output_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let cfg = cfg.to_str().unwrap();
    let one = lowrank(&["--config", cfg, "--threads", "1", "scaling"]);
    let four = lowrank(&["--config", cfg, "--threads", "4", "scaling"]);
    assert!(one.status.success());
    assert_eq!(stdout(&one), stdout(&four));
    let text = stdout(&one);
    assert!(text.starts_with("row,point,mass,trial,curated,plain_2r_svd,"));
    assert!(text.lines().last().unwrap().starts_with("slope,"));
    let other_seed = lowrank(&["--config", cfg, "--seed", "4", "scaling"]);
    assert_ne!(stdout(&one), stdout(&other_seed));
}

#[test]
fn counterexample_flags() {
    let o = lowrank(&["counterexample", "--k", "4", "--n-max", "1", "--trials", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 3 + 1);
    let bad = lowrank(&["counterexample", "--k", "6", "--n-max", "2"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write_config(dir.path(), "bad.toml", &SMALL.replace("trials = 2", "trials = 0"));
    assert_eq!(lowrank(&["--config", broken.to_str().unwrap(), "gen"]).status.code(), Some(1));
    assert_eq!(lowrank(&["gen"]).status.code(), Some(1));
    assert_eq!(lowrank(&["no-such-command"]).status.code(), Some(1));

    let malformed = write_config(dir.path(), "x.txt", "2 1 poisson\n0 0 1.0\n0 x 2.0\n");
    let o = lowrank(&["recover", "--input", malformed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn zero_observation_gives_zero_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let x = write_config(dir.path(), "x.txt", "3 1 poisson\n");
    let est = dir.path().join("est.txt");
    let o = lowrank(&["--out", est.to_str().unwrap(), "recover", "--input", x.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&est).unwrap(), "3 2 poisson\n");
}

#[test]
fn lemmas_pass_and_report_counts() {
    let o = lowrank(&["lemmas", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("lemma,instances,violations,worst_excess,passed\n"));
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[2], f[4]), ("0", "true"), "{line}");
    }
    assert!(text.contains("dampcon,200,0,"));
}
