use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use enthier::bounds::DecompositionEnsemble;
use enthier::io::{write_state_file, LoadedState};
use enthier::{states, PureState};
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enthier"))
        .args(args)
        .env_remove("ENTHIER_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn error_code(o: &Output) -> String {
    assert_eq!(o.status.code(), Some(2), "stderr: {}", stderr(o));
    let line = stderr(o).lines().last().unwrap_or_default().to_string();
    let v: Value = serde_json::from_str(&line).unwrap_or_else(|e| panic!("{e}: {line}"));
    v["error"]["code"].as_str().unwrap().to_string()
}

fn write(dir: &TempDir, name: &str, state: LoadedState) -> PathBuf {
    let p = dir.path().join(name);
    write_state_file(&p, &state, Some(name)).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn partition_counts_and_listing() {
    assert_eq!(
        stdout(&run(&["partitions", "--n", "6", "--k", "4", "--count-only"])),
        "65\n"
    );
    assert_eq!(
        stdout(&run(&["partitions", "--n", "8", "--k", "3", "--count-only"])),
        "966\n"
    );
    let listing = stdout(&run(&["partitions", "--n", "3", "--k", "2"]));
    let lines: Vec<&str> = listing.lines().collect();
    assert_eq!(lines, ["12|3", "13|2", "1|23"]);
    let set: std::collections::BTreeSet<&str> = lines.into_iter().collect();
    assert_eq!(set, ["1|23", "12|3", "13|2"].into_iter().collect());
    assert_eq!(
        stdout(&run(&["partitions", "--n", "7", "--k", "3"])).lines().count(),
        301
    );
    assert_eq!(error_code(&run(&["partitions", "--n", "3", "--k", "4"])), "InvalidK");
    assert_eq!(
        error_code(&run(&["partitions", "--n", "3", "--k", "1", "--count-only"])),
        "InvalidK"
    );
}

#[test]
fn compute_examples() {
    let dir = TempDir::new().unwrap();
    let psi1 = write(&dir, "psi1.json", LoadedState::Pure(states::psi1()));
    let o = run(&["compute", s(&psi1), "--family", "kgm", "--k", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json_out(&o);
    assert_eq!(v["value"].as_f64().unwrap(), 0.902358310926);
    assert_eq!(v["label"], "psi1.json");
    assert!(v.get("attaining_partition").is_none());

    let zero = write(
        &dir,
        "zero.json",
        LoadedState::Pure(PureState::basis(vec![2; 4], &[0; 4]).unwrap()),
    );
    for args in [
        vec!["--family", "kgm", "--k", "2"],
        vec!["--family", "kme", "--k", "3"],
        vec!["--family", "qkgm", "--k", "2", "--param", "2"],
        vec!["--family", "qkme", "--k", "4", "--param", "3"],
        vec!["--family", "akgm", "--k", "2", "--param", "0.5"],
    ] {
        let mut full = vec!["compute", s(&zero)];
        full.extend(args);
        assert_eq!(json_out(&run(&full))["value"].as_f64(), Some(0.0));
    }

    let ghz5 = write(&dir, "ghz5.json", LoadedState::Pure(states::ghz(5)));
    let v = json_out(&run(&["compute", s(&ghz5), "--family", "kme", "--k", "3", "--scores"]));
    assert_eq!(v["value"].as_f64(), Some(1.0));
    assert_eq!(v["attaining_partition"], "123|4|5");
    let scores = v["per_partition_scores"].as_array().unwrap();
    assert_eq!(scores.len(), 25);
    assert!(scores.iter().all(|x| x["score"].as_f64() == Some(1.0)));
}

#[test]
fn compute_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "w4.json", LoadedState::Pure(states::w(4)));
    let args = [
        "compute",
        s(&f),
        "--family",
        "qkgm",
        "--k",
        "3",
        "--param",
        "1.5",
        "--scores",
    ];
    let a = run(&args);
    assert_eq!(a.stdout, run(&args).stdout);
    assert!(json_out(&a)["notes"][0].as_str().unwrap().contains("extrapolated"));
}

#[test]
fn compute_input_errors() {
    let dir = TempDir::new().unwrap();
    let ghz = write(&dir, "ghz.json", LoadedState::Pure(states::ghz(3)));
    assert_eq!(
        error_code(&run(&["compute", s(&ghz), "--family", "kgm", "--k", "4"])),
        "InvalidK"
    );
    assert_eq!(
        error_code(&run(&[
            "compute",
            s(&ghz),
            "--family",
            "qkgm",
            "--k",
            "2",
            "--param",
            "1"
        ])),
        "InvalidParam"
    );
    assert_eq!(
        error_code(&run(&["compute", s(&ghz), "--family", "akgm", "--k", "2"])),
        "InvalidParam"
    );

    let missing = dir.path().join("nope.json");
    assert_eq!(
        error_code(&run(&["compute", s(&missing), "--family", "kgm", "--k", "2"])),
        "Io"
    );

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{\"version\": 1").unwrap();
    assert_eq!(
        error_code(&run(&["compute", s(&garbage), "--family", "kgm", "--k", "2"])),
        "InvalidFormat"
    );

    let mixed = write(&dir, "mixed.json", LoadedState::Mixed(states::ghz(3).to_density()));
    assert_eq!(
        error_code(&run(&["compute", s(&mixed), "--family", "kgm", "--k", "2"])),
        "InvalidState"
    );
}

fn bell_text(scale: f64) -> String {
    let a = std::f64::consts::FRAC_1_SQRT_2 * scale;
    format!(r#"{{"version":1,"kind":"pure","dims":[2,2],"amplitudes":[[{a},0],[0,0],[0,0],[{a},0]]}}"#)
}

#[test]
fn load_normalization_policy() {
    let dir = TempDir::new().unwrap();
    let slightly = dir.path().join("slightly.json");
    std::fs::write(&slightly, bell_text(1.0 + 3e-7)).unwrap();
    let o = run(&["compute", s(&slightly), "--family", "kgm", "--k", "2"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
    assert_eq!(json_out(&o)["value"].as_f64(), Some(1.0));
    assert_eq!(
        error_code(&run(&[
            "compute",
            s(&slightly),
            "--family",
            "kgm",
            "--k",
            "2",
            "--no-normalize"
        ])),
        "InvalidState"
    );

    let far = dir.path().join("far.json");
    std::fs::write(&far, bell_text(1.01)).unwrap();
    assert_eq!(
        error_code(&run(&["compute", s(&far), "--family", "kgm", "--k", "2"])),
        "InvalidState"
    );
}

#[test]
fn sweep_csv_is_stable_and_well_formed() {
    let args = [
        "sweep",
        "--template",
        "fig1",
        "--family",
        "kgm",
        "--k",
        "3",
        "--steps",
        "2001",
    ];
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, run(&args).stdout);
    let text = stdout(&a);
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,value_gm,value_me");
    assert_eq!(lines.len(), 2002);
    assert_eq!(lines[1], "0,0,0");
    assert!(lines.iter().all(|l| l.split(',').count() == 3 && !l.ends_with(',')));
    let info = stderr(&a);
    assert!(info.contains("kinks: value_gm=0 value_me="), "{info}");

    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fig2.csv");
    let o = run(&[
        "sweep",
        "--template",
        "fig2",
        "--family",
        "kgm",
        "--k",
        "3",
        "--steps",
        "201",
        "--output",
        s(&out),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 202);
}

#[test]
fn sweep_input_errors() {
    let base = ["sweep", "--template", "fig1", "--family", "kgm", "--k", "3"];
    let with = |extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        run(&v)
    };
    assert_eq!(error_code(&with(&["--steps", "1"])), "InvalidParam");
    assert_eq!(error_code(&with(&["--theta-end", "inf"])), "InvalidParam");
    assert_eq!(error_code(&with(&["--theta-end", "banana"])), "InvalidParam");
    assert_eq!(
        error_code(&run(&["sweep", "--template", "fig1", "--family", "kgm", "--k", "5"])),
        "InvalidK"
    );
}

#[test]
fn custom_template_sweep() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("bell.json");
    std::fs::write(
        &t,
        r#"{"version":1,"dims":[2,2],"terms":[{"index":0,"scale":[1,0],"theta":"cos"},{"index":3,"scale":[1,0],"theta":"sin"}]}"#,
    )
    .unwrap();
    let o = run(&[
        "sweep",
        "--template",
        s(&t),
        "--family",
        "kgm",
        "--k",
        "2",
        "--theta-end",
        "pi/2",
        "--steps",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mid: Vec<f64> = text
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(mid[1], 1.0);
    assert_eq!(mid[2], 1.0);
}

#[test]
fn ratio_command() {
    let o = run(&["ratio", "--alpha", "0.5", "--n-min", "3", "--n-max", "3"]);
    assert_eq!(
        stdout(&o),
        "n,w_value,ghz_value,ratio\n3,0.887521098473,0.910179721124,0.97510533126\n"
    );

    let o = run(&["ratio", "--alpha", "0", "--n-min", "3", "--n-max", "10"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("degenerate"));
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(",1")));

    let o = run(&["ratio", "--alpha", "0.5", "--n-min", "4", "--n-max", "20"]);
    assert!(o.status.success());
    let ratios: Vec<f64> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 17);
    assert!(ratios.iter().all(|&r| r < 1.0));
    assert!(stderr(&o).contains("does not increase"));

    assert_eq!(
        error_code(&run(&["ratio", "--n-min", "2", "--n-max", "5"])),
        "InvalidParam"
    );
    assert_eq!(
        error_code(&run(&["ratio", "--n-min", "3", "--n-max", "65"])),
        "InvalidParam"
    );
    assert_eq!(
        error_code(&run(&["ratio", "--n-min", "6", "--n-max", "5"])),
        "InvalidParam"
    );
    assert_eq!(error_code(&run(&["ratio", "--alpha", "1"])), "InvalidParam");
}

#[test]
fn verify_command() {
    let o = run(&["verify", "--suite", "sep-zero", "--n", "4", "--samples", "20"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(json_out(&o)["passed"], true);

    let args = [
        "verify",
        "--suite",
        "thm2",
        "--n",
        "4",
        "--samples",
        "50",
        "--seed",
        "5",
    ];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, run(&args).stdout);
    let v = json_out(&a);
    assert_eq!(v["seed"], 5);
    for p in v["properties"].as_array().unwrap() {
        assert!(p["worst_slack"].as_f64().unwrap() >= -1e-10);
    }

    let env = Command::new(env!("CARGO_BIN_EXE_enthier"))
        .args(args)
        .env("ENTHIER_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(json_out(&env)["seed"], 77);
    let bad_env = Command::new(env!("CARGO_BIN_EXE_enthier"))
        .args(args)
        .env("ENTHIER_SEED", "x")
        .output()
        .unwrap();
    assert_eq!(error_code(&bad_env), "InvalidParam");

    let unknown = run(&["verify", "--suite", "thm7"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert_eq!(
        error_code(&run(&["verify", "--suite", "thm2", "--samples", "0"])),
        "InvalidParam"
    );
}

#[test]
fn verify_pi_sandwich_small() {
    let o = run(&[
        "verify",
        "--suite",
        "pi-sandwich",
        "--n",
        "3",
        "--samples",
        "3",
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn bound_command() {
    let dir = TempDir::new().unwrap();
    let ens = DecompositionEnsemble::new(vec![
        (0.5, states::ghz(3)),
        (0.5, PureState::basis(vec![2; 3], &[0, 0, 0]).unwrap()),
    ])
    .unwrap();
    let mixed = write(&dir, "mix.json", LoadedState::Mixed(ens.density()));
    let args = [
        "bound",
        s(&mixed),
        "--family",
        "kgm",
        "--k",
        "2",
        "--restarts",
        "3",
        "--refine-iters",
        "30",
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json_out(&o);
    assert!(v["upper_bound"].as_f64().unwrap() <= 0.5 + 1e-12);
    assert!(v["reconstruction_error"].as_f64().unwrap() <= 1e-8);
    assert_eq!(o.stdout, run(&args).stdout);

    let pure = write(&dir, "psi2.json", LoadedState::Pure(states::psi2()));
    let b = json_out(&run(&[
        "bound",
        s(&pure),
        "--family",
        "kgm",
        "--k",
        "2",
        "--restarts",
        "1",
    ]));
    let c = json_out(&run(&["compute", s(&pure), "--family", "kgm", "--k", "2"]));
    assert_eq!(b["upper_bound"], c["value"]);

    assert_eq!(
        error_code(&run(&[
            "bound",
            s(&mixed),
            "--family",
            "kgm",
            "--k",
            "2",
            "--ensemble-sizes",
            "1"
        ])),
        "InvalidParam"
    );
}
