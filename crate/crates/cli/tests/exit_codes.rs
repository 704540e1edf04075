//! The exit-code contract: 0 on success, 1 when the inputs are at fault,
//! 2 when reading a file or processing fails.

use std::process::{Command, Stdio};

fn run(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pws"))
        .args(args)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["--version"]), 0);
    assert_eq!(run(&["synth", "--help"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]), 1);
    assert_eq!(run(&["synth"]), 1); // missing required flags
    assert_eq!(run(&["process", "--no-such-flag"]), 1);
}

#[test]
fn wrong_stage_delay_count_exits_one() {
    // Checked before any file is opened, so the missing captures are
    // irrelevant: two delays instead of three is a usage error.
    let code = run(&[
        "process",
        "--ref",
        "/nonexistent/a.iq",
        "--surv",
        "/nonexistent/b.iq",
        "--window-s",
        "1",
        "--hop-s",
        "0.5",
        "--stage-delays-ms",
        "5,20",
    ]);
    assert_eq!(code, 1, "a malformed delay triple is a user error");
}

#[test]
fn bad_scenario_contents_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.ini");
    std::fs::write(&config, "[capture]\nduration_s = 1.0\n").unwrap();
    let out = dir.path().join("x.iq");
    let code = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--out-ref",
        out.to_str().unwrap(),
        "--out-surv",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "a scenario missing required keys is a user error");
}

#[test]
fn missing_files_exit_two() {
    let code = run(&[
        "synth",
        "--config",
        "/nonexistent/scene.ini",
        "--out-ref",
        "/tmp/x.iq",
        "--out-surv",
        "/tmp/y.iq",
    ]);
    assert_eq!(code, 2, "an unreadable scenario file is an I/O failure");
    let code = run(&[
        "process",
        "--ref",
        "/nonexistent/a.iq",
        "--surv",
        "/nonexistent/b.iq",
        "--window-s",
        "1",
        "--hop-s",
        "0.5",
    ]);
    assert_eq!(code, 2, "unreadable captures are an I/O failure");
}

#[test]
fn infeasible_processing_parameters_exit_one() {
    // A valid capture that is far too short for the requested window.
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scene.ini");
    std::fs::write(
        &config,
        "[capture]\nduration_s = 0.2\nsample_rate_hz = 8e3\n\
         [waveform]\nkind = cw\n\
         [scene]\ncarrier_hz = 2.4e9\ndirect_path_gain_db = 0\n",
    )
    .unwrap();
    let reference = dir.path().join("r.iq");
    let surveillance = dir.path().join("s.iq");
    assert_eq!(
        run(&[
            "synth",
            "--config",
            config.to_str().unwrap(),
            "--out-ref",
            reference.to_str().unwrap(),
            "--out-surv",
            surveillance.to_str().unwrap(),
        ]),
        0
    );
    let code = run(&[
        "process",
        "--ref",
        reference.to_str().unwrap(),
        "--surv",
        surveillance.to_str().unwrap(),
        "--window-s",
        "5",
        "--hop-s",
        "1",
    ]);
    assert_eq!(code, 1, "a window longer than the capture is a user error");
}
