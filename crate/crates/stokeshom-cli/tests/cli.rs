use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stokeshom"))
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn unknown_key_rejected_with_suggestion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "kapa = 3\ndelta = -1.0\n").unwrap();
    let out = bin()
        .args(["gen", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("did you mean `kappa`"), "{err}");
    assert!(err.contains("`delta`"), "{err}");
}

#[test]
fn gen_then_gaps_reuses_realization() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let status = bin()
        .args(["gen", "--seed", "11", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let particles = std::fs::read_to_string(dir.join("particles_seed11.csv")).unwrap();
    assert!(particles.starts_with("n,x_1,x_2,radius\n"));

    let status = bin()
        .args(["gaps", "--seed", "11", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let gaps = std::fs::read_to_string(dir.join("gaps_seed11.csv")).unwrap();
    assert!(gaps.starts_with("n,rho_circ,rho_refined,nearest\n"));
    assert_eq!(gaps.lines().count(), particles.lines().count());

    let m = manifest(&dir);
    assert_eq!(m["steps"][0]["status"], "ok");
    assert!(m["parameters"]["tol"].as_f64().unwrap() > 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("det.toml");
    std::fs::write(&cfg, "grid_n = 32\nphi = 0.08\nseeds = [5]\ntol = 1e-6\n").unwrap();
    let mut names = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let status = bin()
            .args(["effective", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&dir)
            .status()
            .unwrap();
        assert!(status.success());
        let mut files: Vec<String> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            // the manifest carries wall-clock timestamps; numeric artifacts must match
            .filter(|n| n != "manifest.json")
            .collect();
        files.sort();
        names.push(files);
    }
    assert_eq!(names[0], names[1]);
    assert!(!names[0].is_empty());
    for name in &names[0] {
        let a = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between runs");
    }
}

#[test]
fn injected_failure_gives_partial_results_and_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let cfg = tmp.path().join("small.toml");
    std::fs::write(
        &cfg,
        "grid_n = 32\nphi = 0.05\nseeds = [1, 2, 3]\nkappa_ladder = [100.0, 1000.0, 10000.0]\ntol = 1e-6\n",
    )
    .unwrap();
    let out = bin()
        .args(["effective", "--inject-failure", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success(), "expected nonzero exit");
    assert!(dir.join("effective_seed1.json").exists());
    assert!(!dir.join("effective_seed2.json").exists());
    assert!(dir.join("effective_seed3.json").exists());
    let agg = std::fs::read_to_string(dir.join("effective.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3, "header plus two result rows");
    let m = manifest(&dir);
    let failed: Vec<_> = m["steps"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["status"].as_str().unwrap().starts_with("failed"))
        .collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0]["status"].as_str().unwrap().contains("injected"));
}
