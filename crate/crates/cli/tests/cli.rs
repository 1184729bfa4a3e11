use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use levy_ep_cli::{list_registries, run_experiment, CliError, ExperimentConfig, ExperimentKind};

const CONVERGE: &str = "\
experiment = converge
model.kind = brownian
model.drift = 0.05
model.sigma = 1
problem.coefficient = linear
problem.y0 = 1
problem.horizon = 1
run.master_seed = 11
run.paths = 1000
run.n_values = 16, 32, 64, 128, 256
converge.schemes = euler_poisson, enhanced
converge.slope_band = -1.25, -0.35
";

const HYPER: &str = "\
experiment = converge
model.kind = hyperexponential
model.drift = 0.1
model.sigma = 0.5
model.jump_rate = 1
model.up_weights = 0.5
model.up_rates = 3
model.down_weights = 0.5
model.down_rates = 4
problem.coefficient = linear
problem.y0 = 1
run.master_seed = 1
run.paths = 1000
";

fn bin(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_levy-ep"));
    cmd.args(args).env_remove("LEVY_EP_WORKERS");
    if let Some(w) = workers {
        cmd.env("LEVY_EP_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn list_names_every_registry() {
    let text = list_registries();
    for name in [
        "euler_poisson",
        "enhanced",
        "euler_maruyama",
        "brownian",
        "compound_poisson",
        "hyperexponential",
        "jump_diffusion",
        "zero",
        "constant",
        "linear",
        "sine",
        "converge",
        "gridstats",
        "validate-sampler",
        "pide",
        "simulate",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
    assert!(text.contains("linear (a(y) = scale * y)"));
    let out = bin(&["list"], None);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
}

#[test]
fn missing_master_seed_is_a_usage_error() {
    let text = CONVERGE.replace("run.master_seed = 11\n", "");
    match ExperimentConfig::parse(&text) {
        Err(CliError::Usage { field, .. }) => assert_eq!(field, "run.master_seed"),
        other => panic!("expected usage error, got {other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.kv", &text);
    let out = bin(&["converge", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("run.master_seed"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn bad_fields_name_their_path() {
    let cases = [
        (CONVERGE.replace("problem.coefficient = linear", "problem.coefficient = cubic"), "problem.coefficient"),
        (CONVERGE.replace("model.kind = brownian", "model.kind = stable"), "model.kind"),
        (CONVERGE.replace("model.sigma = 1", "model.sigma = abc"), "model.sigma"),
        (CONVERGE.replace("experiment = converge", "experiment = nope"), "experiment"),
        (CONVERGE.replace("run.paths = 1000", "run.paths = -3"), "run.paths"),
    ];
    for (text, field) in cases {
        match ExperimentConfig::parse(&text) {
            Err(CliError::Usage { field: f, .. }) => assert_eq!(f, field),
            other => panic!("{field}: expected usage error, got {other:?}"),
        }
    }
}

#[test]
fn capability_error_names_model_and_scheme() {
    let config = ExperimentConfig::parse(HYPER).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&config.with_out(dir.path())).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, CliError::Capability { .. }));
    assert!(msg.contains("hyperexponential") && msg.contains("euler_poisson"), "{msg}");
    let cfg = write(dir.path(), "h.kv", HYPER);
    let out = bin(&["converge", "--config", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn converge_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.kv", CONVERGE);
    let out_dir = dir.path().join("out");
    let out = bin(&["converge", "--config", &cfg, "--out", out_dir.to_str().unwrap()], None);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("PASS euler_poisson_slope"));
    let csv = fs::read_to_string(out_dir.join("converge_euler_poisson.csv")).unwrap();
    assert!(csv.starts_with("scheme,n,mse,se,slope,slope_ci_lo,slope_ci_hi\n"));
    assert_eq!(csv.lines().count(), 6);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "PASS");
    assert_eq!(manifest["experiment"], "converge");
    let hash = manifest["outputs"]["converge_euler_poisson.csv"].as_str().unwrap();
    assert_eq!(hash, levy_ep_cli::content_hash(csv.as_bytes()));
}

#[test]
fn failed_check_exits_nonzero() {
    let text = CONVERGE.replace("-1.25, -0.35", "-0.2, -0.1");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.kv", &text);
    let out = bin(&["converge", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    let manifest = fs::read_to_string(dir.path().join("o/manifest.json")).unwrap();
    assert!(manifest.contains("\"FAIL\""));
}

#[test]
fn outputs_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.kv", CONVERGE);
    let mut runs = Vec::new();
    for (i, w) in [None, Some("1"), Some("3")].into_iter().enumerate() {
        let o = dir.path().join(format!("run{i}"));
        let out = bin(&["converge", "--config", &cfg, "--out", o.to_str().unwrap()], w);
        assert!(out.status.success());
        runs.push(read_dir_sorted(&o));
    }
    let o = dir.path().join("flag");
    assert!(bin(&["converge", "--config", &cfg, "--out", o.to_str().unwrap(), "--workers", "2"], None)
        .status
        .success());
    runs.push(read_dir_sorted(&o));
    for r in &runs[1..] {
        assert_eq!(r, &runs[0]);
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.kv", CONVERGE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    bin(&["converge", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "99"], None);
    let edited = write(dir.path(), "d.kv", &CONVERGE.replace("master_seed = 11", "master_seed = 99"));
    bin(&["converge", "--config", &edited, "--out", b.to_str().unwrap()], None);
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
    let csv_a = fs::read(a.join("converge_enhanced.csv")).unwrap();
    let c = dir.path().join("c");
    bin(&["converge", "--config", &cfg, "--out", c.to_str().unwrap()], None);
    assert_ne!(csv_a, fs::read(c.join("converge_enhanced.csv")).unwrap());
}

#[test]
fn manifest_reruns_reproduce_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let config = ExperimentConfig::parse(CONVERGE).unwrap().with_out(&first);
    run_experiment(&config).unwrap();
    let second = dir.path().join("second");
    let out = bin(
        &[
            "converge",
            "--config",
            first.join("manifest.json").to_str().unwrap(),
            "--out",
            second.to_str().unwrap(),
        ],
        Some("2"),
    );
    assert!(out.status.success());
    assert_eq!(read_dir_sorted(&first), read_dir_sorted(&second));
}

#[test]
fn subcommand_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.kv", CONVERGE);
    let out = bin(&["pide", "--config", &cfg, "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

fn run_kind(text: &str, kind: ExperimentKind) -> (levy_ep_cli::RunOutcome, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::parse(text).unwrap();
    assert_eq!(config.kind, kind);
    let outcome = run_experiment(&config.with_out(dir.path())).unwrap();
    (outcome, dir)
}

#[test]
fn gridstats_experiment() {
    let text = "\
experiment = gridstats
run.master_seed = 3
run.paths = 2000
run.n_values = 16, 64, 256
";
    let (o, dir) = run_kind(text, ExperimentKind::Gridstats);
    assert!(o.passed(), "{:?}", o.checks);
    let tau = fs::read_to_string(dir.path().join("gridstats_tau.csv")).unwrap();
    assert!(tau.starts_with("n,estimate,se,bound,pass\n"));
    assert!(dir.path().join("gridstats_deviation.csv").exists());
}

#[test]
fn validate_sampler_experiment() {
    let text = HYPER.replace("experiment = converge", "experiment = validate-sampler").replace(
        "run.paths = 1000",
        "run.paths = 100000\nvalidate.q = 2\nvalidate.thetas = -3, -1, 0.5, 2",
    );
    let (o, dir) = run_kind(&text, ExperimentKind::ValidateSampler);
    assert!(o.passed(), "{:?}", o.checks);
    assert!(o.checks.iter().any(|c| c.name == "wiener_hopf_identity"));
    let cf = fs::read_to_string(dir.path().join("validate_cf.csv")).unwrap();
    assert_eq!(cf.lines().count(), 5);
    let bad = HYPER
        .replace("experiment = converge", "experiment = validate-sampler")
        .replace("run.paths = 1000", "run.paths = 100000\nvalidate.sampler = exact");
    let config = ExperimentConfig::parse(&bad).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(run_experiment(&config.with_out(tmp.path())), Err(CliError::Capability { .. })));
}

#[test]
fn pide_experiment() {
    let text = "\
experiment = pide
model.kind = brownian
model.drift = 0.05
model.sigma = 1
problem.coefficient = linear
problem.y0 = 1
run.master_seed = 4
run.paths = 20000
pide.f = bump:1:0.5
pide.steps = 4
pide.nodes = 512
";
    let (o, dir) = run_kind(text, ExperimentKind::Pide);
    assert!(o.passed(), "{:?}", o.checks);
    let csv = fs::read_to_string(dir.path().join("pide_rothe.csv")).unwrap();
    assert!(csv.starts_with("i,x0,u_i,mc_mean,mc_se,z\n"));
}

#[test]
fn simulate_experiment() {
    for scheme in ["euler_poisson", "enhanced", "euler_maruyama"] {
        let text = format!(
            "\
experiment = simulate
model.kind = jump_diffusion
model.drift = 0.1
model.sigma = 0.5
model.jump_rate = 2
model.jump_law = two_point
model.jump.up = 0.2
model.jump.down = -0.3
problem.coefficient = sine
problem.y0 = 0.5
run.master_seed = 5
run.paths = 3
run.n_values = 8
simulate.scheme = {scheme}
"
        );
        let (o, dir) = run_kind(&text, ExperimentKind::Simulate);
        assert!(o.passed() && o.checks.is_empty());
        let csv = fs::read_to_string(dir.path().join(format!("simulate_{scheme}.csv"))).unwrap();
        assert!(csv.starts_with("path_id,step,t_i,y_1,dx_1\n"));
        if scheme != "enhanced" {
            assert_eq!(csv.lines().count(), 1 + 3 * 9);
        }
    }
}
