use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dmtlab_cli::codebook_io::{format_codebook, parse_codebook};
use dmtlab_cli::commands::{CRITERION_HEADER, EXPONENT_HEADER, OUTAGE_HEADER};

fn dmtlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmtlab"))
        .args(args)
        .env_remove("DMTLAB_SEED")
        .output()
        .expect("run dmtlab")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_and_unknown_flags() {
    let out = dmtlab(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("curve") && text.contains("criterion") && text.contains("[default: 100000]")
    );
    let out = dmtlab(&["outage", "--no-such-flag"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("Usage"));
}

#[test]
fn curve_rows() {
    let csv = stdout(&dmtlab(&[
        "curve", "--pdp", "0.5,0.5", "--mt", "2", "--mr", "2",
    ]));
    assert_eq!(csv, "r,d\n0,8\n1,3\n2,0\n");
    assert_eq!(stdout(&dmtlab(&["curve"])), "r,d\n0,1\n1,0\n");
    assert_eq!(
        stdout(&dmtlab(&["curve", "--pdp", "0.5,0.5", "--slots", "4"])),
        "r,d\n0,2\n1,0\n"
    );
    let sampled = stdout(&dmtlab(&[
        "curve", "--rank", "1", "--mt", "2", "--mr", "2", "--step", "0.5",
    ]));
    assert_eq!(sampled, "r,d\n0,4\n0.5,2.5\n1,1\n1.5,0.5\n2,0\n");
    assert_eq!(dmtlab(&["curve", "--rank", "0"]).status.code(), Some(2));
}

#[test]
fn outage_matches_closed_form_and_is_reproducible() {
    let args = [
        "outage", "--snr-db", "20", "--rates", "0.5", "--trials", "200000", "--seed", "3",
    ];
    let csv = stdout(&dmtlab(&args));
    assert_eq!(csv.lines().next().unwrap(), OUTAGE_HEADER.join(","));
    let row = &rows(&csv)[0];
    let (lo, hi): (f64, f64) = (row[6].parse().unwrap(), row[7].parse().unwrap());
    let oracle = 1.0 - (-(100f64.sqrt() - 1.0) / 100.0).exp();
    assert!(lo <= oracle && oracle <= hi, "{row:?}");
    assert_eq!(stdout(&dmtlab(&args)), csv);
    let mut one_worker = args.to_vec();
    one_worker.extend(["--workers", "1"]);
    assert_eq!(stdout(&dmtlab(&one_worker)), csv);
    assert!(!csv.contains('\r'));
}

#[test]
fn validation_errors_exit_2() {
    assert_eq!(dmtlab(&["outage", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(
        dmtlab(&["outage", "--snr-db", "0", "--trials", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dmtlab(&["outage", "--snr-db=-3", "--trials", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dmtlab(&["outage", "--pdp", "0.5,-0.5", "--trials", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dmtlab(&["outage", "--rates", "2", "--trials", "10"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dmtlab(&["outage", "--modes", "bogus"]).status.code(),
        Some(2)
    );
}

#[test]
fn seed_from_environment() {
    let base = ["outage", "--snr-db", "10", "--trials", "2000"];
    let via_env = Command::new(env!("CARGO_BIN_EXE_dmtlab"))
        .args(base)
        .env("DMTLAB_SEED", "41")
        .output()
        .unwrap();
    let mut flagged = base.to_vec();
    flagged.extend(["--seed", "41"]);
    assert_eq!(stdout(&via_env), stdout(&dmtlab(&flagged)));
    assert_ne!(stdout(&via_env), stdout(&dmtlab(&base)));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.toml",
        "seed = 9\ntrials = 3000\nsnr_db = [10, 20]\nrates = [0.5, 1.0]\n[channel]\npdp = [0.5, 0.5]\nslots = 4\n[antennas]\nm_t = 2\nm_r = 2\n",
    );
    let csv = stdout(&dmtlab(&["outage", "--config", &cfg]));
    assert_eq!(rows(&csv).len(), 4);
    assert!(rows(&csv).iter().all(|r| r[3] == "3000"));
    let csv = stdout(&dmtlab(&[
        "outage", "--config", &cfg, "--trials", "500", "--snr-db", "15",
    ]));
    let r = rows(&csv);
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[0] == "15" && row[3] == "500"));
    let bad = write(dir.path(), "bad.toml", "trails = 3\n");
    let out = dmtlab(&["outage", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trails"));
}

#[test]
fn jensen_modes() {
    let base = [
        "jensen", "--pdp", "0.5,0.5", "--slots", "2", "--snr-db", "10", "--trials", "5000",
    ];
    let exact = stdout(&dmtlab(&base));
    assert!(rows(&exact).iter().all(|r| r[2] == "exact"));
    let mut reduced = base.to_vec();
    reduced.extend(["--mode", "reduced"]);
    assert!(rows(&stdout(&dmtlab(&reduced)))
        .iter()
        .all(|r| r[2] == "reduced"));
}

#[test]
fn exponent_from_injected_counts() {
    let dir = tempfile::tempdir().unwrap();
    let trials: u64 = 1_000_000_000_000;
    let mut text = String::from("snr_db,trials,outages\n");
    for db in [10.0, 20.0, 30.0] {
        let p = 10f64.powf(-2.0 * db / 10.0);
        text.push_str(&format!(
            "{db},{trials},{}\n",
            (p * trials as f64).round() as u64
        ));
    }
    let input = write(dir.path(), "counts.csv", &text);
    let csv = stdout(&dmtlab(&["exponent", "--input", &input, "--rates", "0"]));
    assert_eq!(csv.lines().next().unwrap(), EXPONENT_HEADER.join(","));
    let row = &rows(&csv)[0];
    let d: f64 = row[2].parse().unwrap();
    assert!((d - 2.0).abs() < 1e-9, "{row:?}");
    assert_eq!(row[7], "1");

    let sparse = write(
        dir.path(),
        "sparse.csv",
        "snr_db,trials,outages\n10,1000,60\n20,1000,4\n30,1000,0\n",
    );
    let out = dmtlab(&["exponent", "--input", &sparse]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("fewer than two"));
}

fn fitted(args: &[&str]) -> f64 {
    let csv = stdout(&dmtlab(args));
    rows(&csv)[0][2].parse().unwrap()
}

#[test]
fn exponent_sweeps_near_zero_rate() {
    let flat = fitted(&[
        "exponent",
        "--mode",
        "level",
        "--rates",
        "0.01",
        "--snr-db",
        "10,15,20,25,30",
        "--trials",
        "200000",
    ]);
    assert!((flat - 1.0).abs() < 0.1, "{flat}");
    let two_tap = fitted(&[
        "exponent",
        "--mode",
        "level",
        "--pdp",
        "0.5,0.5",
        "--rates",
        "0.01",
        "--snr-db",
        "10,12.5,15,17.5,20",
        "--trials",
        "1000000",
    ]);
    assert!((two_tap - 2.0).abs() < 0.25, "{two_tap}");
}

#[test]
fn criterion_reports() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write(
        dir.path(),
        "dd.txt",
        "# delay diversity\n1 2 2\n1,0 1,0\n-1,0 -1,0\n",
    );
    let out = dmtlab(&["criterion", "--codebook", &fixture, "--pdp", "0.5,0.5"]);
    let csv = stdout(&out);
    assert_eq!(csv.lines().next().unwrap(), CRITERION_HEADER.join(","));
    let r = rows(&csv);
    assert_eq!((r[0][4].as_str(), r[0][6].as_str()), ("2", "true"));
    assert!(stderr(&out).contains("overall: PASS"));

    let zero = write(
        dir.path(),
        "zero.txt",
        "1 2 3\n1,0 1,0\n1,0 1,0\n-1,0 -1,0\n",
    );
    let out = dmtlab(&["criterion", "--codebook", &zero, "--pdp", "0.5,0.5"]);
    let r = rows(&stdout(&out));
    assert_eq!(
        (
            r[0][2].as_str(),
            r[0][3].as_str(),
            r[0][4].as_str(),
            r[0][6].as_str()
        ),
        ("0", "1", "0", "false")
    );
    assert!(stderr(&out).contains("overall: FAIL"));

    let wide = write(
        dir.path(),
        "wide.txt",
        "2 2 2\n1,0 0,0\n0,0 1,0\n-1,0 0,0\n0,0 -1,0\n",
    );
    let out = dmtlab(&["criterion", "--codebook", &wide, "--pdp", "0.5,0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("N >= rho*m_t"), "{}", stderr(&out));

    let broken = write(dir.path(), "broken.txt", "1 2 2\n1,0 1;0\n");
    let out = dmtlab(&["criterion", "--codebook", &broken]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2, field 2"), "{}", stderr(&out));
}

#[test]
fn delay_diversity_family_and_saved_codebook() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("saved.txt");
    let out = dmtlab(&[
        "criterion",
        "--delay-diversity",
        "4",
        "--pdp",
        "0.5,0.5",
        "--slots",
        "4",
        "--mt",
        "2",
        "--mr",
        "2",
        "--snr-db",
        "10,20,30",
        "--rates",
        "1",
        "--save-codebook",
        saved.to_str().unwrap(),
    ]);
    stdout(&out);
    let err = stderr(&out);
    assert!(
        err.contains("non-vanishing: true") && err.contains("overall: PASS"),
        "{err}"
    );
    let cb = parse_codebook(&fs::read_to_string(&saved).unwrap()).unwrap();
    assert_eq!((cb.m_t, cb.slots, cb.codewords.len()), (2, 4, 4));
    assert_eq!(
        format_codebook(&cb.codewords),
        fs::read_to_string(&saved).unwrap()
    );
}

#[test]
fn pep_bounds_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = write(dir.path(), "one.txt", "1 1 2\n0,0\n2,0\n");
    let out_path = dir.path().join("pep.csv");
    let out = dmtlab(&[
        "pep",
        "--codebook",
        &fixture,
        "--snr-db",
        "6.020599913279624",
        "--rates",
        "1",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let csv = fs::read_to_string(&out_path).unwrap();
    let row = &rows(&csv)[0];
    let p: f64 = row[3].parse().unwrap();
    // snr = 4, |e|^2 = 4: 1 / (1 + 4/4 * 4) = 0.2.
    assert!((p - 0.2).abs() < 1e-12, "{row:?}");
    assert!(stderr(&out).contains("union bound"));
}

#[test]
fn bundled_configs_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let out = dmtlab(&["curve", "--config", path.to_str().unwrap()]);
            assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
            seen += 1;
        }
    }
    assert!(seen >= 1);
}
