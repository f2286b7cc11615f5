//! End-to-end runs of the `parafeed` binary.

use std::path::Path;
use std::process::{Command, Output};

fn parafeed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parafeed"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn json_stdout(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

// Flags that shrink the desk scenario enough for fast process-level tests.
const SMALL: &[&str] = &[
    "--n-tx",
    "4",
    "--n-subcarriers",
    "8",
    "--n-paths",
    "2",
    "--window-len",
    "2",
];

#[test]
fn allocate_reports_the_closed_form_split() {
    let out = json_stdout(&parafeed(&["allocate", "--total-bits", "16"]));
    assert_eq!(out["method"], "closed-form");
    assert_eq!(
        (out["q_theta"].as_u64(), out["q_tau"].as_u64(), out["q_beta"].as_u64(), out["q_phi"].as_u64()),
        (Some(3), Some(12), Some(0), Some(1))
    );
    assert!(out["objective"].as_f64().unwrap() > 0.0);

    let brute = json_stdout(&parafeed(&[
        "allocate",
        "--total-bits",
        "16",
        "--method",
        "brute-force",
    ]));
    for key in ["q_theta", "q_tau", "q_beta", "q_phi", "objective"] {
        assert_eq!(brute[key], out[key], "{key} differs from closed form");
    }
    // Every 4-way split of 16 bits: C(19, 3).
    assert_eq!(brute["visited"], 969);
}

#[test]
fn quantize_emits_a_payload_that_matches_the_bit_count() {
    let mut args = vec!["quantize", "--total-bits", "12", "--method", "uniform", "--seed", "5"];
    args.extend_from_slice(SMALL);
    let out = json_stdout(&parafeed(&args));
    let bits = out["payload_bits"].as_u64().unwrap();
    assert_eq!(bits, 2 * 12);
    let hex = out["payload_hex"].as_str().unwrap();
    assert_eq!(hex.len() as u64, 2 * bits.div_ceil(8));
    assert_eq!(out["paths"].as_array().unwrap().len(), 2);
    assert!(out["channel_nmse"].as_f64().unwrap() >= 0.0);
}

#[test]
fn verify_jacobians_passes_on_the_default_scenario() {
    let out = json_stdout(&parafeed(&[
        "verify",
        "--what",
        "jacobians",
        "--samples",
        "3",
        "--seed",
        "2",
    ]));
    assert_eq!(out["pass"], true, "{out}");
    for family in out["families"].as_array().unwrap() {
        assert!(family["max_relative_error"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn verify_theorem1_reports_offset_deviations() {
    let out = json_stdout(&parafeed(&[
        "verify",
        "--what",
        "theorem1",
        "--samples",
        "300",
        "--seed",
        "2",
    ]));
    assert_eq!(out["pass"], true, "{out}");
    let dev = out["offsets"]["deviation_bits"].as_array().unwrap();
    assert!((dev[0].as_f64().unwrap() + 0.625).abs() < 1e-9);
    assert!(dev[1].as_f64().unwrap().abs() < 1e-9);
    assert!((dev[2].as_f64().unwrap() - 4.338).abs() < 1e-3);
    assert!(dev[3].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn generate_train_eval_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("tiny.ccsi");
    let checkpoint = dir.path().join("weights.bin");
    let attention = dir.path().join("attention.csv");

    let mut args = vec!["generate", "--count", "8", "--output", dataset.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let generated = json_stdout(&parafeed(&args));
    assert_eq!(generated["samples"], 8);
    assert!(dataset.exists());

    let mut args = vec![
        "train",
        "--dataset",
        dataset.to_str().unwrap(),
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--epochs",
        "2",
        "--batch-size",
        "4",
        "--d-model",
        "8",
        "--n-heads",
        "2",
    ];
    args.extend_from_slice(SMALL);
    let trained = json_stdout(&parafeed(&args));
    assert_eq!(trained["history"].as_array().unwrap().len(), 2);
    assert!(trained["final_epoch"]["encoder_nmse"].as_f64().unwrap().is_finite());
    assert!(checkpoint.exists());

    let mut args = vec![
        "eval",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--dataset",
        dataset.to_str().unwrap(),
        "--dump-attention",
        attention.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL);
    let scored = json_stdout(&parafeed(&args));
    assert_eq!(scored["samples"], 8);
    assert!(scored["nmse"].as_f64().unwrap() >= 0.0);
    let cosine = scored["cosine"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&cosine));

    let dump = std::fs::read_to_string(&attention).unwrap();
    let mut lines = dump.lines();
    assert_eq!(lines.next(), Some("stage,head,row,col,weight"));
    // Two heads of 2x2 encoder maps plus two heads of 2x2 decoder maps.
    assert_eq!(lines.count(), 16);
    assert!(dump.contains("encoder,") && dump.contains("decoder,"));
}

#[test]
fn simulate_writes_byte_identical_csv_for_identical_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> std::path::PathBuf {
        let csv = dir.path().join(name);
        let mut args = vec![
            "simulate",
            "--estimator",
            "oracle",
            "--allocation",
            "uniform",
            "--bits",
            "8,16",
            "--seeds",
            "1,2",
            "--snr-db-grid",
            "0,10",
            "--symbols-per-subcarrier",
            "25",
            "--output",
            csv.to_str().unwrap(),
        ];
        args.extend_from_slice(SMALL);
        let out = json_stdout(&parafeed(&args));
        assert_eq!(out["rows"], 2 * 2 * 2);
        csv
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["estimator"], "oracle");
    assert_eq!(manifest["scenario"]["n_tx"], 4);

    let csv = std::fs::read_to_string(&a).unwrap();
    let header = csv.lines().nth(1).unwrap();
    assert_eq!(
        header,
        "seed,q_total,q_theta,q_tau,q_beta,q_phi,snr_db,nmse_linear,nmse_db,cosine,ber"
    );
}

#[test]
fn config_file_feeds_defaults_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("settings.toml");
    std::fs::write(
        &config,
        "[scenario]\nn_tx = 8\nn_subcarriers = 16\nn_paths = 2\nwindow_len = 2\n",
    )
    .unwrap();

    let n_tx_in_header = |dataset: &Path| -> u32 {
        let bytes = std::fs::read(dataset).unwrap();
        assert_eq!(&bytes[..5], b"CCSI1");
        u32::from_le_bytes(bytes[9..13].try_into().unwrap())
    };

    let from_file = dir.path().join("file.ccsi");
    json_stdout(&parafeed(&[
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--count",
        "1",
        "--output",
        from_file.to_str().unwrap(),
    ]));
    assert_eq!(n_tx_in_header(&from_file), 8);

    let from_flag = dir.path().join("flag.ccsi");
    json_stdout(&parafeed(&[
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--n-tx",
        "4",
        "--count",
        "1",
        "--output",
        from_flag.to_str().unwrap(),
    ]));
    assert_eq!(n_tx_in_header(&from_flag), 4);

    std::fs::write(&config, "[scenario]\nantennas = 8\n").unwrap();
    let out = parafeed(&[
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--count",
        "1",
        "--output",
        dir.path().join("bad.ccsi").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("antennas"));
}

#[test]
fn trained_simulate_requires_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "simulate",
        "--estimator",
        "trained",
        "--bits",
        "8",
        "--seeds",
        "1",
        "--output",
    ];
    let out_path = dir.path().join("x.csv");
    args.push(out_path.to_str().unwrap());
    args.extend_from_slice(SMALL);
    let out = parafeed(&args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--checkpoint"));
}
