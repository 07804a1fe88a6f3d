//! End-to-end tests of the devbound binary: documented examples,
//! exit codes, report formats, config resolution, and rerun purity.

use std::process::{Command, Output};

fn devbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_devbound"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout_str(out: &Output) -> String {
    assert!(
        out.status.success(),
        "expected success, stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).expect("reports are UTF-8")
}

/// Splits one CSV line, honoring quoted fields with embedded commas
/// and doubled quotes.
fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        if quoted {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    cur.push('"');
                    chars.next();
                } else {
                    quoted = false;
                }
            } else {
                cur.push(c);
            }
        } else {
            match c {
                '"' => quoted = true,
                ',' => fields.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            }
        }
    }
    fields.push(cur);
    fields
}

/// Parses a CSV report into rows of 10 cells, header checked and dropped.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(
        lines.next().expect("report has a header"),
        "experiment,sequence,n,quantity,value,regime,argmax_log_index,std_error,ci_lo,ci_hi"
    );
    lines
        .map(|line| {
            let fields = split_csv_line(line);
            assert_eq!(fields.len(), 10, "every row has 10 cells: {line}");
            fields
        })
        .collect()
}

fn value_of<'a>(rows: &'a [Vec<String>], quantity: &str) -> &'a Vec<String> {
    rows.iter()
        .find(|r| r[3] == quantity)
        .unwrap_or_else(|| panic!("no row with quantity {quantity}"))
}

#[test]
fn phi_example_matches_documented_value() {
    let out = devbound(&["phi", "--lnJp1", "4", "--q", "0.25", "--n", "100"]);
    let rows = csv_rows(&stdout_str(&out));
    let row = value_of(&rows, "phi");
    let value: f64 = row[4].parse().unwrap();
    assert!((value - 0.1).abs() < 1e-12, "phi(ln 4, 1/4, 100) = 0.1, got {value}");
    assert_eq!(row[5], "subgaussian");
}

#[test]
fn bound_example_is_constant_at_n1() {
    let out =
        devbound(&["bound", "--family", "step", "--lnJp1", "4", "--q", "0.25", "--n", "1"]);
    let rows = csv_rows(&stdout_str(&out));
    let row = value_of(&rows, "delta_rate");
    let value: f64 = row[4].parse().unwrap();
    assert_eq!(value, 1.0, "a single observation always has unit rate");
    assert_eq!(row[5], "constant");
}

#[test]
fn oracle_example_matches_hand_computation() {
    // One fair coordinate, two samples: the mean is 0, 1/2, or 1 with
    // probabilities 1/4, 1/2, 1/4, so E|mean - 1/2| = 1/4.
    let out = devbound(&["oracle", "--family", "step", "--J", "1", "--q", "0.5", "--n", "2"]);
    let rows = csv_rows(&stdout_str(&out));
    let value: f64 = value_of(&rows, "delta_exact")[4].parse().unwrap();
    assert!((value - 0.25).abs() < 1e-15, "got {value}");
}

#[test]
fn exit_codes_follow_the_contract() {
    let help = devbound(&["--help"]);
    assert_eq!(help.status.code(), Some(0));

    let usage = devbound(&["nosuchcommand"]);
    assert_eq!(usage.status.code(), Some(1));

    let domain = devbound(&["phi", "--lnJp1", "-3", "--q", "0.25", "--n", "10"]);
    assert_eq!(domain.status.code(), Some(1));
    assert!(!domain.stderr.is_empty(), "validation errors explain themselves");

    let resource =
        devbound(&["oracle", "--family", "step", "--J", "2", "--q", "0.25", "--n", "200000"]);
    assert_eq!(resource.status.code(), Some(2));

    let io = devbound(&[
        "phi",
        "--lnJp1",
        "4",
        "--q",
        "0.25",
        "--n",
        "10",
        "--out",
        "/nonexistent-devbound-dir/report.csv",
    ]);
    assert_eq!(io.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_reruns_and_threads() {
    let args = [
        "simulate", "--family", "step", "--J", "8", "--q", "0.125", "--n", "40", "--trials",
        "800", "--seed", "42",
    ];
    let run = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_devbound"))
            .args(args)
            .env("DEVBOUND_THREADS", threads)
            .output()
            .expect("binary spawns");
        assert!(out.status.success());
        out.stdout
    };
    let single = run("1");
    assert_eq!(single, run("1"), "same thread count, same bytes");
    assert_eq!(single, run("8"), "worker count must not leak into reports");
}

#[test]
fn config_file_drives_sweep_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.json");
    std::fs::write(
        &config_path,
        r#"{
            "sequences": [
                {"family": "step", "j": 4, "q": 0.25},
                {"family": "blocks", "blocks": "0:0.3;0:0.05"}
            ],
            "n": [16, 64],
            "trials": 300,
            "seed": 9,
            "quantities": ["rate", "exact", "sim_mean"],
            "output": "json"
        }"#,
    )
    .unwrap();
    let config = config_path.to_str().unwrap();

    let out = devbound(&["sweep", "--config", config]);
    let parsed: serde_json::Value =
        serde_json::from_str(&stdout_str(&out)).expect("json output parses");
    let arr = parsed.as_array().unwrap();
    // 2 sequences x 2 n x (rate + exact + sim_mean summary of 4 rows).
    assert_eq!(arr.len(), 2 * 2 * 6);
    for obj in arr {
        assert_eq!(obj["experiment"], serde_json::json!("sweep"));
    }
    let quantities: Vec<&str> =
        arr.iter().map(|o| o["quantity"].as_str().unwrap()).collect();
    assert!(quantities.contains(&"delta_rate"));
    assert!(quantities.contains(&"delta_exact"));
    assert!(quantities.contains(&"sim_mean"));

    // A format flag beats the config file's output field.
    let out = devbound(&["sweep", "--config", config, "--format", "csv", "--quantities", "rate"]);
    let rows = csv_rows(&stdout_str(&out));
    assert_eq!(rows.len(), 4, "quantity flag narrows the sweep to rates only");
    assert!(rows.iter().all(|r| r[3] == "delta_rate"));
}

#[test]
fn dkw_pairs_each_exceedance_with_its_bound() {
    let out = devbound(&[
        "dkw", "--x0", "0.1", "--x0", "0.25", "--n", "64", "--trials", "400", "--t", "1",
        "--t", "2",
    ]);
    let rows = csv_rows(&stdout_str(&out));
    for x0 in ["0.1", "0.25"] {
        let id = format!("uniform(x0={x0})");
        for t in ["1", "2"] {
            let exceed = rows
                .iter()
                .find(|r| r[1] == id && r[3] == format!("exceed_t{t}"))
                .expect("exceedance row present");
            let bound = rows
                .iter()
                .find(|r| r[1] == id && r[3] == format!("bound_t{t}"))
                .expect("bound row present");
            let e: f64 = exceed[4].parse().unwrap();
            let b: f64 = bound[4].parse().unwrap();
            assert!((0.0..=1.0).contains(&e));
            assert!(b > 0.0);
        }
    }
}

#[test]
fn raw_dump_has_one_value_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let raw_path = dir.path().join("devs.txt");
    let out = devbound(&[
        "simulate",
        "--family",
        "step",
        "--J",
        "2",
        "--q",
        "0.5",
        "--n",
        "20",
        "--trials",
        "64",
        "--seed",
        "3",
        "--raw",
        raw_path.to_str().unwrap(),
    ]);
    let rows = csv_rows(&stdout_str(&out));
    let reported_mean: f64 = value_of(&rows, "sim_mean")[4].parse().unwrap();

    let raw = std::fs::read_to_string(&raw_path).unwrap();
    let values: Vec<f64> = raw.lines().map(|l| l.parse().expect("raw lines parse")).collect();
    assert_eq!(values.len(), 64);
    assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    assert!(
        (mean - reported_mean).abs() < 1e-12,
        "raw dump and summary disagree: {mean} vs {reported_mean}"
    );
}

#[test]
fn openproblem_reports_the_normalized_gap() {
    let out = devbound(&["openproblem", "--n", "100"]);
    let rows = csv_rows(&stdout_str(&out));
    let delta_plus: f64 = value_of(&rows, "delta_plus")[4].parse().unwrap();
    let sqrt_term: f64 = value_of(&rows, "sqrt_S_over_n")[4].parse().unwrap();
    let t_term: f64 = value_of(&rows, "T_over_n")[4].parse().unwrap();
    let psi: f64 = value_of(&rows, "psi")[4].parse().unwrap();
    assert!(delta_plus > sqrt_term, "the gap being probed is positive");
    let recomputed = (delta_plus - sqrt_term) / t_term;
    assert!((psi - recomputed).abs() < 1e-12);
}

#[test]
fn lq_and_hp_emit_banded_rows() {
    let out = devbound(&[
        "lq", "--family", "step", "--J", "4", "--q", "0.5", "--n", "100", "--qnorm", "2",
        "--exact",
    ]);
    let rows = csv_rows(&stdout_str(&out));
    let lower: f64 = value_of(&rows, "lq_lower_q2")[4].parse().unwrap();
    let upper: f64 = value_of(&rows, "lq_upper_q2")[4].parse().unwrap();
    let exact: f64 = value_of(&rows, "lq_exact_root_q2")[4].parse().unwrap();
    // The upper edge is certified; the lower edge is a rate, sharp only
    // up to universal constants, so it gets a factor check.
    assert!(exact <= upper, "{exact} <= {upper}");
    assert!(lower <= 4.0 * exact && exact <= 4.0 * lower, "{lower} vs {exact}");

    let out = devbound(&[
        "hp", "--family", "step", "--J", "4", "--q", "0.5", "--n", "100", "--gamma", "0.1",
    ]);
    let rows = csv_rows(&stdout_str(&out));
    let lower: f64 = value_of(&rows, "hp_lower_g0.1")[4].parse().unwrap();
    let upper: f64 = value_of(&rows, "hp_upper_g0.1")[4].parse().unwrap();
    let mcdiarmid: f64 = value_of(&rows, "hp_mcdiarmid_g0.1")[4].parse().unwrap();
    assert!(lower <= upper, "{lower} <= {upper}");
    assert!(mcdiarmid > 0.0);
}

#[test]
fn constant_overrides_change_epsilon() {
    let base = devbound(&["epsilon", "--lnJp1", "2", "--q", "0.25", "--n", "100"]);
    let tweaked = devbound(&[
        "epsilon", "--lnJp1", "2", "--q", "0.25", "--n", "100", "--const", "c1=5",
    ]);
    let base_eps: f64 = value_of(&csv_rows(&stdout_str(&base)), "epsilon")[4].parse().unwrap();
    let tweaked_eps: f64 =
        value_of(&csv_rows(&stdout_str(&tweaked)), "epsilon")[4].parse().unwrap();
    assert!(
        tweaked_eps >= base_eps,
        "raising the deviation constant cannot shrink epsilon: {base_eps} vs {tweaked_eps}"
    );

    let bad = devbound(&["epsilon", "--lnJp1", "2", "--q", "0.25", "--n", "100", "--const", "c0=9"]);
    assert_eq!(bad.status.code(), Some(1), "constants outside their ranges are rejected");
}
