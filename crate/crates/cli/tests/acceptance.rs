//! Criterion 16: every CLI acceptance run, re-executed from its serialized
//! configuration with one and with eight worker threads, produces
//! byte-identical outputs.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_stosem")
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let mut out: Vec<(String, String)> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["name"].as_str().unwrap().to_string(),
                e["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    out.sort();
    out
}

fn run_ok(args: &[&str]) {
    let output = Command::new(bin()).args(args).output().unwrap();
    assert!(
        output.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn criterion_16_replay_determinism() {
    let work = tempfile::tempdir().unwrap();
    let q_path = work.path().join("q.csv");
    std::fs::write(&q_path, "-2,2\n1,-1\n").unwrap();
    let q = q_path.to_str().unwrap();

    // the CLI acceptance set: one run per module, with randomness where the
    // engines use it
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "transfer",
            str_vec(&["transfer", "ulam", "--map", "tent", "--n", "128"]),
        ),
        (
            "exactness",
            str_vec(&[
                "transfer",
                "exactness",
                "--map",
                "logistic",
                "--n",
                "256",
                "--f0",
                "uniform",
                "--steps",
                "20",
            ]),
        ),
        (
            "chains",
            str_vec(&[
                "chains",
                "erythrocyte",
                "--b",
                "5",
                "--d",
                "1",
                "--N",
                "100",
            ]),
        ),
        (
            "evolve",
            str_vec(&[
                "chains", "evolve", "--q", q, "--x0", "delta:0", "--t", "1.5",
            ]),
        ),
        ("spectral", str_vec(&["spectral", "perron", "--q", q])),
        (
            "sde",
            str_vec(&[
                "sde",
                "em",
                "--model",
                "logistic",
                "--sigma2",
                "1",
                "--T",
                "50",
                "--burn-in",
                "5",
            ]),
        ),
        (
            "sde-law",
            str_vec(&["sde", "stationary", "--model", "logistic", "--sigma2", "1"]),
        ),
        (
            "telegraph",
            str_vec(&[
                "pdmp",
                "telegraph",
                "--lambda",
                "1",
                "--T",
                "2",
                "--paths",
                "20000",
            ]),
        ),
        (
            "kac",
            str_vec(&["pdmp", "kac", "--lambda", "1", "--dx", "0.01", "--T", "2"]),
        ),
        (
            "gene",
            str_vec(&[
                "pdmp",
                "gene",
                "--variant",
                "one-d",
                "--theta",
                "0.5",
                "--cycles",
                "2000",
            ]),
        ),
        (
            "vesicle",
            str_vec(&[
                "pdmp", "vesicle", "--L", "1", "--target", "0.6", "--kappa", "5", "--runs", "4000",
            ]),
        ),
        (
            "mckendrick",
            str_vec(&[
                "structured",
                "mckendrick",
                "--mu",
                "0.2",
                "--psi",
                "gauss:1.0,0.15,2.0",
                "--a-max",
                "6",
                "--cells",
                "800",
                "--T",
                "12",
            ]),
        ),
        (
            "cellcycle",
            str_vec(&[
                "structured",
                "cellcycle",
                "--preset",
                "benchmark",
                "--T",
                "12",
            ]),
        ),
    ];

    for (name, args) in &runs {
        let base = work.path().join(format!("{name}-base"));
        let replay1 = work.path().join(format!("{name}-replay1"));
        let replay8 = work.path().join(format!("{name}-replay8"));

        let mut base_args = str_vec(&["--seed", "7", "--threads", "2", "--out"]);
        base_args.push(base.to_str().unwrap().to_string());
        base_args.extend(args.iter().cloned());
        run_ok(&as_strs(&base_args));

        let config = base.join("config.json");
        for (dir, threads) in [(&replay1, "1"), (&replay8, "8")] {
            let rep_args = vec![
                "--config".to_string(),
                config.to_str().unwrap().to_string(),
                "--threads".to_string(),
                threads.to_string(),
                "--out".to_string(),
                dir.to_str().unwrap().to_string(),
            ];
            run_ok(&as_strs(&rep_args));
        }

        let d0 = digests(&base);
        let d1 = digests(&replay1);
        let d8 = digests(&replay8);
        assert_eq!(d0, d1, "{name}: single-thread replay differs");
        assert_eq!(d0, d8, "{name}: eight-thread replay differs");
        println!(
            "ACCEPTANCE 16 PASS - replay determinism [{name}]: {} outputs byte-identical at 1 and 8 threads",
            d0.len()
        );
    }
}

fn str_vec(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn as_strs(items: &[String]) -> Vec<&str> {
    items.iter().map(|s| s.as_str()).collect()
}
