use std::path::Path;
use std::process::{Command, Output};

use brq_cli::commands::{analytic_table, fig4_table};
use brq_cli::config::{CommandKind, ExperimentConfig, Format, Grid, ModelKind};
use brq_cli::table::Cell;
use brq_cli::CliError;
use brq_core::channel::Accounting;
use brq_core::BrqError;
use proptest::prelude::*;

fn brq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brq"))
        .args(args)
        .output()
        .unwrap()
}

fn csv_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (head, rows)
}

fn col(head: &[String], row: &[String], name: &str) -> f64 {
    let i = head
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    row[i].parse().unwrap()
}

#[test]
fn analytic_rate_factor_two_gives_e_minus_two() {
    let out = brq(&["analytic", "--mean-snr-db", "10", "--rate-factor", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let (head, rows) = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 1);
    let p = col(&head, &rows[0], "p_R");
    assert!((p - (-2f64).exp()).abs() < 1e-12);
    assert!((p - 0.1353).abs() < 1e-4);
}

#[test]
fn analytic_zero_rate_gives_zero_rates() {
    let out = brq(&[
        "analytic",
        "--mean-snr-db",
        "10",
        "--rate",
        "0",
        "--feedback-bits",
        "1,2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let (head, rows) = csv_rows(&out.stdout);
    for name in [
        "brq_full_rate",
        "r_limited_rate",
        "brq_quant_rate_F1",
        "brq_quant_rate_F2",
        "delay_slots",
    ] {
        assert_eq!(col(&head, &rows[0], name), 0.0, "{name}");
    }
}

#[test]
fn analytic_quantized_not_above_full() {
    let out = brq(&[
        "analytic",
        "--mean-snr-db",
        "10",
        "--rate-factor",
        "2",
        "--feedback-bits",
        "1",
    ]);
    let (head, rows) = csv_rows(&out.stdout);
    assert!(col(&head, &rows[0], "brq_quant_rate_F1") <= col(&head, &rows[0], "brq_full_rate"));
}

#[test]
fn analytic_json_matches_csv() {
    let args = ["analytic", "--mean-snr-db", "0,20", "--rate-factor", "3"];
    let csv_out = brq(&args);
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&brq(&json_args).stdout).unwrap();
    let (head, rows) = csv_rows(&csv_out.stdout);
    for (r, obj) in rows.iter().zip(json.as_array().unwrap()) {
        assert_eq!(
            obj["brq_full_rate"].as_f64().unwrap(),
            col(&head, r, "brq_full_rate")
        );
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(brq(&["simulate", "--slots", "0"]).status.code(), Some(2));
    assert_eq!(brq(&["simulate", "--slots", "abc"]).status.code(), Some(2));
    assert_eq!(
        brq(&["simulate", "--feedback-bits", "2", "--slots", "1000"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        brq(&["analytic", "--rate", "2", "--rate-factor", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        brq(&["analytic", "--model", "trace"]).status.code(),
        Some(2)
    );
    assert_eq!(
        brq(&["fig5", "--model", "deterministic"]).status.code(),
        Some(2)
    );
    assert_eq!(brq(&["simulate", "--payload"]).status.code(), Some(2));
    assert_eq!(brq(&["nonsense"]).status.code(), Some(2));
    assert_eq!(
        brq(&["analytic", "--config", "/nonexistent/brq.conf"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn exit_codes_follow_error_kind() {
    let numeric = CliError::Core(BrqError::QuadratureNonConvergence {
        achieved: 1.0,
        requested: 0.1,
    });
    assert_eq!(numeric.exit_code(), 3);
    assert_eq!(
        CliError::Core(BrqError::BisectionFailure("x".into())).exit_code(),
        3
    );
    let broken = BrqError::ChainBroken {
        slot: 3,
        parity: 1.0,
        required: 2.0,
    };
    assert_eq!(CliError::Core(broken.clone()).exit_code(), 4);
    let wrapped = BrqError::InReplication {
        index: 2,
        source: Box::new(broken),
    };
    assert_eq!(CliError::Core(wrapped).exit_code(), 4);
    assert_eq!(CliError::Integrity("x".into()).exit_code(), 4);
    assert_eq!(
        CliError::Core(BrqError::InvalidInput("x".into())).exit_code(),
        2
    );
    assert_eq!(CliError::Core(BrqError::TraceExhausted(4)).exit_code(), 2);
}

#[test]
fn simulate_ci_covers_analytic() {
    let sim = brq(&["simulate", "--mean-snr-db", "10", "--rate-factor", "2"]);
    assert_eq!(sim.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_slice(&sim.stdout).unwrap();
    let ana = brq(&["analytic", "--mean-snr-db", "10", "--rate-factor", "2"]);
    let (head, rows) = csv_rows(&ana.stdout);
    let want = col(&head, &rows[0], "brq_full_rate");
    let (mean, hw) = (
        s["rate_mean"].as_f64().unwrap(),
        s["rate_half_width"].as_f64().unwrap(),
    );
    assert!((mean - want).abs() <= hw, "{mean} +- {hw} vs {want}");
    assert_eq!(s["integrity"], "pass");
}

#[test]
fn summary_json_has_stats_fields() {
    let out = brq(&["simulate", "--slots", "2000", "--replications", "3"]);
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in [
        "replications",
        "rate_mean",
        "rate_half_width",
        "delay_mean",
        "delay_half_width",
        "delay_histogram",
        "renewals",
        "delivered_bits",
        "undelivered_bits",
        "integrity",
        "replication_rates",
    ] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    assert!(s["rate_half_width"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulate_reruns_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, threads: &str| {
        let out = dir.path().join(format!("{tag}.json"));
        let log = dir.path().join(format!("{tag}.csv"));
        let status = brq(&[
            "simulate",
            "--feedback-bits",
            "2",
            "--block-len",
            "16",
            "--slots",
            "3200",
            "--replications",
            "5",
            "--seed",
            "42",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
            "--log",
            log.to_str().unwrap(),
        ])
        .status;
        assert!(status.success());
        (std::fs::read(out).unwrap(), std::fs::read(log).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let (head, rows) = csv_rows(&a.1);
    assert_eq!(rows.len(), 3200);
    assert_eq!(head[0], "slot");
}

#[test]
fn integer_payload_simulation_passes_integrity() {
    let out = brq(&[
        "simulate",
        "--rate",
        "4.39",
        "--mode",
        "integer",
        "--payload",
        "--slots",
        "5000",
        "--replications",
        "2",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["integrity"], "pass");
}

#[test]
fn trace_model_reads_db_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.txt");
    std::fs::write(&path, "# dB\n10\n0\n20\n").unwrap();
    let out = brq(&[
        "simulate",
        "--model",
        "trace",
        "--trace",
        path.to_str().unwrap(),
        "--rate",
        "3",
        "--slots",
        "3",
        "--replications",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let too_long = brq(&[
        "simulate",
        "--model",
        "trace",
        "--trace",
        path.to_str().unwrap(),
        "--rate",
        "3",
        "--slots",
        "4",
        "--replications",
        "1",
    ]);
    assert_eq!(too_long.status.code(), Some(2));
}

#[test]
fn fig4_default_columns() {
    let out = brq(&["fig4"]);
    assert_eq!(out.status.code(), Some(0));
    let (head, rows) = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 31);
    for name in [
        "mean_snr_db",
        "wf_rate",
        "prior_fixed_rate",
        "normalized_prior_fixed_rate",
        "rate_R_k2",
        "p_R_k2",
        "brq_full_rate_k2",
        "normalized_brq_full_rate_k2",
        "brq_quant_rate_F1_k2",
        "normalized_brq_quant_rate_F1_k3",
        "brq_full_rate_k3",
    ] {
        assert!(head.iter().any(|h| h == name), "missing {name}");
    }
    let mut last = 0.0;
    for r in &rows {
        assert!((col(&head, r, "p_R_k2") - (-2f64).exp()).abs() < 1e-12);
        let n = col(&head, r, "normalized_brq_full_rate_k2");
        assert!(n >= last);
        last = n;
    }
}

#[test]
fn fig5_default_columns() {
    let out = brq(&["fig5"]);
    let (head, rows) = csv_rows(&out.stdout);
    assert_eq!(
        head,
        [
            "ratio",
            "rate_R",
            "p_R",
            "brq_full_rate",
            "brq_quant_rate_F1",
            "brq_quant_rate_F2",
            "brq_quant_rate_F8"
        ]
    );
    assert_eq!(col(&head, &rows[0], "brq_full_rate"), 0.0);
    // p_R = 1/2 at ratio ln 2 is outside the grid; every F=1 cell is present.
    assert!(rows.iter().all(|r| !r[4].is_empty()));
}

#[test]
fn fig5_marks_insufficient_feedback() {
    let ln2 = std::f64::consts::LN_2.to_string();
    let grid = format!("{ln2}:{ln2}:1");
    let out = brq(&["fig5", "--ratio-grid", &grid]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = csv_rows(&out.stdout);
    assert_eq!(rows[0][4], "");
    assert_ne!(rows[0][5], "");
}

#[test]
fn fig4_single_point_matches_analytic() {
    let mut cfg = ExperimentConfig {
        command: Some(CommandKind::Fig4),
        mean_snr_db: Some(vec![12.5]),
        rate_factor: Some(vec![2.0]),
        feedback_bits: Some(vec![1.0]),
        ..Default::default()
    };
    let f4 = fig4_table(&cfg).unwrap();
    cfg.command = Some(CommandKind::Analytic);
    let an = analytic_table(&cfg).unwrap();
    let pick = |t: &brq_cli::table::Table, c: &str| t.column(c).unwrap()[0].clone();
    for (a, f) in [
        ("wf_rate", "wf_rate"),
        ("prior_fixed_rate", "prior_fixed_rate"),
        ("rate_R", "rate_R_k2"),
        ("p_R", "p_R_k2"),
        ("brq_full_rate", "brq_full_rate_k2"),
        ("normalized_brq_full_rate", "normalized_brq_full_rate_k2"),
        ("brq_quant_rate_F1", "brq_quant_rate_F1_k2"),
    ] {
        assert_eq!(pick(&an, a), pick(&f4, f), "{a}");
    }
    assert!(matches!(pick(&an, "brq_full_rate"), Cell::Num(_)));
}

#[test]
fn fig4_with_simulation_columns() {
    let out = brq(&[
        "fig4",
        "--snr-grid-db",
        "10:10:1",
        "--rate-factor",
        "2",
        "--feedback-bits",
        "2",
        "--simulate",
        "--slots",
        "6400",
        "--replications",
        "3",
        "--block-len",
        "16",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (head, rows) = csv_rows(&out.stdout);
    let sim = col(&head, &rows[0], "sim_brq_full_rate_k2");
    assert!((sim - col(&head, &rows[0], "brq_full_rate_k2")).abs() < 0.1);
    assert!(col(&head, &rows[0], "sim_brq_quant_rate_F2_k2") > 0.0);
}

#[test]
fn validate_passes_at_small_scale() {
    let out = brq(&["validate", "--slots", "50000", "--replications", "10"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert!(text.contains("full-csit-rate"));
}

#[test]
fn validate_skips_overflowing_feedback() {
    // F = 1 with L = 16 leaves 11 bits for the mask; five or more
    // successes in a block do not fit.
    let out = brq(&[
        "validate",
        "--slots",
        "50000",
        "--replications",
        "10",
        "--block-len",
        "16",
        "--feedback-bits",
        "1,8",
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(
        text.lines()
            .any(|l| l.starts_with("SKIP quantized-safety: F = 1")),
        "{text}"
    );
    assert!(
        text.lines()
            .any(|l| l.starts_with("PASS quantized-safety: F = 8")),
        "{text}"
    );
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(
        &path,
        "# analytic point\nmean-snr-db = 20\nrate-factor = 3\nfeedback-bits = 2\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let (head, rows) = csv_rows(&brq(&["analytic", "--config", p]).stdout);
    assert_eq!(col(&head, &rows[0], "mean_snr_db"), 20.0);
    assert!((col(&head, &rows[0], "p_R") - (-3f64).exp()).abs() < 1e-12);
    let (head, rows) = csv_rows(&brq(&["analytic", "--config", p, "--rate-factor", "2"]).stdout);
    assert!((col(&head, &rows[0], "p_R") - (-2f64).exp()).abs() < 1e-12);
    assert_eq!(col(&head, &rows[0], "mean_snr_db"), 20.0);

    std::fs::write(&path, "no-such-key = 1\n").unwrap();
    assert_eq!(brq(&["analytic", "--config", p]).status.code(), Some(2));
    std::fs::write(&path, "just text\n").unwrap();
    assert_eq!(brq(&["analytic", "--config", p]).status.code(), Some(2));
}

#[test]
fn config_text_example() {
    let c = ExperimentConfig {
        command: Some(CommandKind::Simulate),
        mean_snr_db: Some(vec![10.0]),
        feedback_bits: Some(vec![2.0]),
        block_len: Some(64),
        mode: Some(Accounting::Integer),
        include_warmup: Some(true),
        snr_grid_db: Some(Grid {
            start: 0.0,
            stop: 30.0,
            step: 0.5,
        }),
        ..Default::default()
    };
    assert_eq!(
        c.to_text(),
        "command = simulate\nmean-snr-db = 10\nfeedback-bits = 2\nblock-len = 64\nmode = integer\ninclude-warmup = true\nsnr-grid-db = 0:30:0.5\n"
    );
    assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
}

#[test]
fn grid_points_include_both_ends() {
    let g: Grid = "0:30:1".parse().unwrap();
    let p = g.points();
    assert_eq!(p.len(), 31);
    assert_eq!(p[30], 30.0);
    assert_eq!("0:1:0.1".parse::<Grid>().unwrap().points().len(), 11);
    assert!("1:0:1".parse::<Grid>().is_err());
    assert!("0:1:0".parse::<Grid>().is_err());
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        (-300i32..300).prop_map(|e| 1.5 * 10f64.powi(e))
    ]
}

fn path() -> impl Strategy<Value = std::path::PathBuf> {
    "[a-z0-9_./-]{1,20}".prop_map(|s| Path::new(&s).to_path_buf())
}

prop_compose! {
    fn grid()(start in -50.0f64..50.0, span in 0.0f64..100.0, step in 0.01f64..10.0) -> Grid {
        Grid { start, stop: start + span, step }
    }
}

prop_compose! {
    fn config()(
        command in proptest::option::of(prop_oneof![
            Just(CommandKind::Analytic), Just(CommandKind::Simulate), Just(CommandKind::Fig4),
            Just(CommandKind::Fig5), Just(CommandKind::Validate)]),
        model in proptest::option::of(prop_oneof![
            Just(ModelKind::Rayleigh), Just(ModelKind::Deterministic), Just(ModelKind::Trace)]),
        mean_snr_db in proptest::option::of(proptest::collection::vec(finite(), 1..4)),
        trace in proptest::option::of(path()),
        rate in proptest::option::of(finite()),
        rate_factor in proptest::option::of(proptest::collection::vec(finite(), 1..4)),
        slot_len in proptest::option::of(any::<u32>()),
        feedback_bits in proptest::option::of(proptest::collection::vec(finite(), 1..4)),
        block_len in proptest::option::of(0usize..100_000),
        seed in proptest::option::of(any::<u64>()),
        slots in proptest::option::of(any::<u64>()),
        replications in proptest::option::of(0usize..100_000),
        mode in proptest::option::of(prop_oneof![Just(Accounting::Fluid), Just(Accounting::Integer)]),
        flags in proptest::array::uniform3(proptest::option::of(any::<bool>())),
        grids in (proptest::option::of(grid()), proptest::option::of(grid())),
        out in proptest::option::of(path()),
        format in proptest::option::of(prop_oneof![Just(Format::Csv), Just(Format::Json)]),
        log in proptest::option::of(path()),
        threads in proptest::option::of(0usize..64),
    ) -> ExperimentConfig {
        ExperimentConfig {
            command, model, mean_snr_db, trace, rate, rate_factor, slot_len, feedback_bits, block_len, seed,
            slots, replications, mode,
            include_warmup: flags[0], payload: flags[1], simulate: flags[2],
            snr_grid_db: grids.0, ratio_grid: grids.1,
            out, format, log, threads,
        }
    }
}

proptest! {
    #[test]
    fn config_round_trips(c in config()) {
        let text = c.to_text();
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn merge_prefers_the_overlay(a in config(), b in config()) {
        let mut m = a.clone();
        m.merge(&b);
        for k in brq_cli::config::KEYS {
            let want = b.get(k).or_else(|| a.get(k));
            prop_assert_eq!(m.get(k), want);
        }
    }
}
