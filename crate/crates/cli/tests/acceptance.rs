//! Acceptance criterion 8: a rate sweep with a fixed seed emits
//! byte-identical data files regardless of the worker-thread count.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_nonlocal-mc")
}

fn run_sweep(dir: &Path, config: &Path, threads: usize) {
    let status = Command::new(bin())
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--seed",
            "12345",
            "--threads",
            &threads.to_string(),
            "rate-sweep",
        ])
        .status()
        .expect("spawn nonlocal-mc");
    assert!(status.success(), "rate-sweep exited with {status}");
}

#[test]
fn criterion_8_rate_sweep_is_deterministic_across_thread_counts() {
    let root = std::env::temp_dir().join("nonlocal_mc_acceptance_8");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();
    let config = root.join("sweep.toml");
    std::fs::write(
        &config,
        "[rate_sweep]\ngammas = [0.2, 0.5]\nns = [16, 32]\ntrials = 6\n",
    )
    .unwrap();

    let one = root.join("threads1");
    let four = root.join("threads4");
    run_sweep(&one, &config, 1);
    run_sweep(&four, &config, 4);

    let rates1 = std::fs::read(one.join("rates.csv")).unwrap();
    let rates4 = std::fs::read(four.join("rates.csv")).unwrap();
    let errors1 = std::fs::read(one.join("errors.csv")).unwrap();
    let errors4 = std::fs::read(four.join("errors.csv")).unwrap();

    let ok = rates1 == rates4 && errors1 == errors4;
    println!(
        "ACCEPTANCE 8 (thread-count determinism): {} — rates.csv {} bytes, errors.csv {} bytes",
        if ok { "PASS" } else { "FAIL" },
        rates1.len(),
        errors1.len(),
    );
    assert!(ok, "outputs differ between --threads 1 and --threads 4");

    std::fs::remove_dir_all(&root).ok();
}
