use std::path::Path;
use std::process::Command;

use papr_lab::experiments;
use papr_lab::{ExperimentConfig, ExperimentKind, LabError};

const SMALL_CCDF: &str = r#"
kind = "ccdf"
seed = 9
methods = ["none", "proposed", "repeated-cf", "companding"]

[trials]
symbols = 40
frame_symbols = 10
enforce_minimums = false
"#;

const SMALL_BER: &str = r#"
kind = "ber-esdm"
seed = 4
methods = ["proposed"]

[trials]
symbols = 20
frame_symbols = 5
enforce_minimums = false

[ber]
ebn0_db = [4.0, 12.0]
eigen_draws = 2000
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_papr-lab"))
}

fn run_cli(dir: &Path, cfg: &str, args: &[&str]) -> (std::process::Output, String) {
    let cfg_path = dir.join("cfg.toml");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = dir.join("out.csv");
    let o = bin().arg("run").arg(&cfg_path).arg("--out").arg(&out).args(args).output().unwrap();
    let csv = std::fs::read_to_string(&out).unwrap_or_default();
    (o, csv)
}

#[test]
fn same_seed_gives_identical_csv() {
    let d = tempfile::tempdir().unwrap();
    let (o1, a) = run_cli(d.path(), SMALL_CCDF, &[]);
    assert!(o1.status.success(), "{}", String::from_utf8_lossy(&o1.stderr));
    let (_, b) = run_cli(d.path(), SMALL_CCDF, &["--threads", "3"]);
    assert_eq!(a, b);
    let (_, c) = run_cli(d.path(), SMALL_CCDF, &["--seed", "10"]);
    assert_ne!(a, c);
    let header = a.lines().next().unwrap();
    assert!(header.starts_with("# papr-lab schema=1 kind=ccdf seed=9 config_sha256="), "{header}");
    assert!(a.lines().nth(1).unwrap().starts_with("method,abscissa_db,probability"));
}

fn run_in_pool(cfg: &ExperimentConfig, threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let r = pool.install(|| experiments::run(cfg)).unwrap();
    r.table.to_csv_string(&cfg.hash(), cfg.seed).unwrap()
}

#[test]
fn worker_count_does_not_change_results() {
    for text in [SMALL_CCDF, SMALL_BER] {
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let serial = run_in_pool(&cfg, 1);
        assert_eq!(serial, run_in_pool(&cfg, 4));
    }
}

#[test]
fn presets_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            cfg.check_minimums().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn config_errors_name_the_problem() {
    match ExperimentConfig::from_toml("kind = \"ccdf\"\nbogus = 1\n") {
        Err(LabError::Parse(m)) => assert!(m.contains("bogus"), "{m}"),
        other => panic!("{other:?}"),
    }
    match ExperimentConfig::from_toml("[pc]\nt1 = 0.2\nt2 = 0.7\n") {
        Err(e) => assert!(e.to_string().contains("T2") || e.to_string().contains("t2"), "{e}"),
        Ok(_) => panic!("wide window accepted"),
    }
    assert!(ExperimentConfig::from_toml("kind = \"nonsense\"\n").is_err());
}

#[test]
fn undersized_runs_are_refused() {
    let cfg = ExperimentConfig::from_toml("kind = \"ccdf\"\n[trials]\nsymbols = 10\n").unwrap();
    match experiments::run(&cfg) {
        Err(LabError::Minimum(m)) => assert!(m.contains("trials.symbols >= 1954"), "{m}"),
        other => panic!("{other:?}"),
    }
    let mut sweep = cfg.clone();
    sweep.kind = ExperimentKind::WindowSweep;
    assert!(matches!(sweep.check_minimums(), Err(LabError::Minimum(_))));
}

#[test]
fn cli_reports_errors_with_exit_code() {
    let d = tempfile::tempdir().unwrap();
    let (o, _) = run_cli(d.path(), "kind = \"ccdf\"\n[trials]\nsymbols = 10\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:") && err.contains("trials.symbols"), "{err}");
    let o = bin().arg("run").arg(d.path().join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
