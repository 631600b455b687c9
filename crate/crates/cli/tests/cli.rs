use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn lsv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsv"))
        .args(args)
        .env_remove("LSV_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    lsv(&args)
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"
schema_version = 1
gamma = 0.3
law = { kind = "fair-coin-placeholder" }
grid = { kind = "uniform", n = 256 }
n_pull = 50
"#;

fn small_with_law(law: &str, gamma: f64) -> String {
    SMALL
        .replace(r#"{ kind = "fair-coin-placeholder" }"#, law)
        .replace("gamma = 0.3", &format!("gamma = {gamma}"))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn density_of_doubling_is_uniform() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("density", &golden("doubling.toml"), dir.path(), &[]));
    let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let h: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(h.len(), 4096);
    assert!(h.iter().all(|v| (v - h[0]).abs() <= 1e-12));
}

#[test]
fn decay_slope_for_half_beta() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run("decay", &golden("beta05.toml"), dir.path(), &["--check"]));
    let j = json(&dir.path().join("decay.json"));
    let slope = j["fits"][0]["fit"]["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() <= 0.35, "{slope}");
    let csv = std::fs::read_to_string(dir.path().join("decay_L1.csv")).unwrap();
    assert!(csv.starts_with("n,value,stderr,method\n"));
}

#[test]
fn validate_reports_errors_and_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let no_b0 = write_config(
        d,
        "b0.toml",
        &small_with_law(r#"{ kind = "constant", beta = 0.4 }"#, 0.2),
    );
    let o = lsv(&["validate", "--config", no_b0.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("b0"));

    let body = small_with_law(r#"{ kind = "constant", beta = 0.2 }"#, 0.2)
        .replace("n_pull = 50", "n_pull = 50\nepsilon = 0.6");
    let eps = write_config(d, "eps.toml", &body);
    let o = lsv(&["validate", "--config", eps.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("epsilon"));

    let slow = write_config(
        d,
        "slow.toml",
        &small_with_law(r#"{ kind = "constant", beta = 0.6 }"#, 0.6),
    );
    let o = lsv(&["validate", "--config", slow.to_str().unwrap()]);
    ok(&o);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(
        out.contains("0.667") && out.contains("CLT diagnostics disabled"),
        "{out}"
    );

    let v2 = write_config(d, "v2.toml", &SMALL.replace("schema_version = 1", "schema_version = 2"));
    assert_eq!(
        lsv(&["validate", "--config", v2.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let extra = write_config(
        d,
        "extra.toml",
        &format!(
            "{}\nunknown_key = 1\n",
            small_with_law(r#"{ kind = "constant", beta = 0.2 }"#, 0.2)
        ),
    );
    assert_eq!(
        lsv(&["validate", "--config", extra.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(lsv(&["validate"]).status.code(), Some(2));
}

#[test]
fn golden_runs_pass_report_check() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [
        (
            "doubling.toml",
            &[
                "env-sample",
                "orbit",
                "ulam",
                "density",
                "corr",
                "variance",
                "clt",
                "moments",
                "coupling",
                "annealed",
            ][..],
        ),
        (
            "beta05.toml",
            &["return-tails", "decay", "corr", "martingale-check", "coupling"][..],
        ),
    ];
    for (config, cmds) in runs {
        let out = dir.path().join(config.trim_end_matches(".toml"));
        for cmd in cmds {
            ok(&run(cmd, &golden(config), &out, &[]));
        }
        let o = lsv(&["report", "--out", out.to_str().unwrap(), "--check"]);
        ok(&o);
        let text = String::from_utf8_lossy(&o.stdout);
        assert!(text.contains(&format!("all {} run(s) verified", cmds.len())), "{text}");
        assert!(!text.contains(" NO"), "{text}");

        let manifest = json(&out.join("manifest.json"));
        for r in manifest["runs"].as_array().unwrap() {
            for f in r["outputs"].as_array().unwrap() {
                assert!(out.join(f["path"].as_str().unwrap()).exists());
            }
        }
    }

    let out = dir.path().join("doubling");
    std::fs::write(out.join("orbit.csv"), "k,t,beta,x\n").unwrap();
    assert_eq!(lsv(&["report", "--out", out.to_str().unwrap()]).status.code(), Some(5));
}

#[test]
fn rerun_in_shared_directory_supersedes_stale_entries() {
    let out = tempfile::tempdir().unwrap();
    ok(&run("corr", &golden("doubling.toml"), out.path(), &[]));
    ok(&run("corr", &golden("beta05.toml"), out.path(), &[]));
    ok(&lsv(&["report", "--out", out.path().to_str().unwrap(), "--check"]));
    let manifest = json(&out.path().join("manifest.json"));
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("one"), dir.path().join("eight"));
    let cfg = write_config(
        dir.path(),
        "mix.toml",
        r#"
schema_version = 1
gamma = 0.1
law = { kind = "iid-discrete", values = [0.1, 0.3], probs = [0.5, 0.5] }
grid = { kind = "uniform", n = 512 }
n_pull = 200

[mc]
n_samples = 3000
seed = 99

[corr]
lags = [0, 1, 2, 4, 8, 16]
fit = [1.0, 16.0]

[variance]
ns = [100, 400]
monte_carlo = true

[clt]
ns = [100, 400]

[moments]
ns = [100, 200, 400]

[coupling]
horizon = 200
c_u = 2.0
n_samples = 20000
depth = 30

[annealed]
n_paths = 3
lags = [0, 1, 2]
n_max = 20
monte_carlo = true
"#,
    );
    let cmds = [
        "env-sample",
        "orbit",
        "corr",
        "variance",
        "clt",
        "moments",
        "coupling",
        "annealed",
    ];
    for (out, threads) in [(&a, "1"), (&b, "8")] {
        for cmd in cmds {
            ok(&run(cmd, &cfg, out, &["--threads", threads]));
        }
    }
    let mut compared = 0;
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_str().unwrap().ends_with(".csv") {
            let x = std::fs::read(a.join(&name)).unwrap();
            let y = std::fs::read(b.join(&name)).unwrap();
            assert!(x == y, "{name:?} differs");
            compared += 1;
        }
    }
    assert_eq!(compared, cmds.len());
}

#[test]
fn seed_override_changes_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "coin.toml",
        &small_with_law(
            r#"{ kind = "iid-discrete", values = [0.1, 0.45], probs = [0.5, 0.5] }"#,
            0.1,
        ),
    );
    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("env.csv")).unwrap();
    ok(&run("env-sample", &cfg, &dir.path().join("a"), &["--seed", "5"]));
    ok(&run("env-sample", &cfg, &dir.path().join("b"), &["--seed", "5"]));
    ok(&run("env-sample", &cfg, &dir.path().join("c"), &["--seed", "6"]));
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    let j = json(&dir.path().join("a").join("env.json"));
    assert_eq!(j["b0"].as_f64(), Some(0.5));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // CLT needs 1/gamma - 1 > 1.
    let o = run("clt", &golden("beta05.toml"), d, &[]);
    assert_eq!(o.status.code(), Some(4));

    // A small coboundary has Sigma^2_n / n below the degeneracy threshold.
    let cob = write_config(
        d,
        "cob.toml",
        r#"
schema_version = 1
gamma = 0.1
law = { kind = "constant", beta = 0.0 }
grid = { kind = "uniform", n = 256 }
n_pull = 50

[observable]
base = { kind = "coboundary", beta = 0.0, psi = { kind = "cos", freq = 1.0 } }
weight = { a = 0.05 }
centered = true

[mc]
n_samples = 100

[clt]
ns = [5000]
"#,
    );
    assert_eq!(run("clt", &cob, d, &[]).status.code(), Some(3));

    // Unreachable defect bound: the run succeeds, --check turns it into 5.
    let strict = std::fs::read_to_string(golden("beta05.toml"))
        .unwrap()
        .replace("[martingale]\nn = 50", "[martingale]\nn = 50\nmax_defect = 1e-30");
    let strict = write_config(d, "strict.toml", &strict);
    ok(&run("martingale-check", &strict, d, &[]));
    assert_eq!(run("martingale-check", &strict, d, &["--check"]).status.code(), Some(5));

    let missing = d.join("nope.toml");
    assert_eq!(run("density", &missing, d, &[]).status.code(), Some(2));
}
