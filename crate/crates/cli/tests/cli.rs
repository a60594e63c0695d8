use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splatstream"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} exited with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("scene.ply");
    let tree = dir.path().join("scene.tree");
    let path = dir.path().join("path.csv");
    ok(&["gen-scene", "--n", "2500", "--seed", "4", "--out", s(&ply)]);
    let built = ok(&["build-tree", "-i", s(&ply), "-o", s(&tree), "--partition-size", "64"]);
    assert!(built.contains("leaves 2500"), "{built}");

    let verified = ok(&["verify", "--tree", s(&tree), "--frames", "40", "--path-kind", "random-walk", "--width", "320", "--height", "180"]);
    assert_eq!(verified.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{verified}");

    ok(&["gen-path", "--tree", s(&tree), "--out", s(&path), "--frames", "90", "--fps", "30", "--path-kind", "orbit"]);

    let mut outputs = Vec::new();
    for workers in ["1", "2"] {
        let csv = dir.path().join(format!("run{workers}.csv"));
        let transcript = dir.path().join(format!("run{workers}.vtrs"));
        let stdout = ok(&[
            "--workers", workers, "simulate", "--tree", s(&tree), "--path-file", s(&path), "--width", "160",
            "--height", "90", "--window", "8", "--jitter", "3", "--quality-every", "30", "--csv", s(&csv),
            "--transcript", s(&transcript),
        ]);
        assert!(stdout.contains("mirror true phantom-free true"), "{stdout}");
        outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(&transcript).unwrap()));
    }
    assert!(outputs[0] == outputs[1], "worker count changed the outputs");
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(csv.lines().count(), 2 + 90);

    let png = dir.path().join("frame.png");
    ok(&["render", "--tree", s(&tree), "--path-file", s(&path), "--frame", "5", "--width", "64", "--height", "48", "-o", s(&png)]);
    assert!(std::fs::metadata(&png).unwrap().len() > 0);

    let sweep = dir.path().join("sweep.csv");
    ok(&[
        "sweep", "--tree", s(&tree), "--path-file", s(&path), "--width", "96", "--height", "54", "--param", "tau",
        "--values", "2,8", "--csv", s(&sweep),
    ]);
    assert_eq!(std::fs::read_to_string(&sweep).unwrap().lines().count(), 4);
}

#[test]
fn errors_exit_with_two() {
    let out = run(&["build-tree", "-i", "/nonexistent/scene.ply", "-o", "/tmp/never.tree"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["gen-scene", "--n", "0", "--out", "/tmp/never.ply"]);
    assert_eq!(out.status.code(), Some(2));
}
