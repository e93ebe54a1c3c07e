use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pt-spectra");

fn pt_spectra(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn catalog_lists_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let o = pt_spectra(&["catalog", "--list"], dir.path());
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    for name in ["jordan2x2", "gap2x2", "degenerate2x2", "harmonic_quartic", "double_well", "cubic_i"] {
        assert!(out.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        ("track.json", r#"{"family":"jordan2x2","task":"track","epsilon":{"max":1,"steps":50},"interval":[-1,0.5]}"#),
        (
            "rspe.json",
            r#"{"family":"harmonic_quartic","task":"rspe","E":1,"order":4,"discretization":{"method":"basis","n_modes":40,"omega":1},"output":"quartic"}"#,
        ),
        (
            "audit.json",
            r#"{"family":"cubic_i","task":"audit","epsilon":0.1,"discretization":{"method":"fd","half_width":8,"n_points":200},"seed":7}"#,
        ),
    ];
    for (name, text) in configs {
        fs::write(dir.path().join(name), text).unwrap();
        for run in ["a", "b"] {
            let o = pt_spectra(&["--out-dir", run, "run", name], dir.path());
            assert!(o.status.success(), "{name}: {}", stderr(&o));
        }
    }
    let mut files: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    assert_eq!(files.len(), 5);
    for f in files {
        let a = fs::read(dir.path().join("a").join(&f)).unwrap();
        let b = fs::read(dir.path().join("b").join(&f)).unwrap();
        assert_eq!(a, b, "{f:?} differs between runs");
    }
    let csv = fs::read_to_string(dir.path().join("a/track_branches.csv")).unwrap();
    assert!(csv.starts_with("epsilon,branch_id,re,im,residual,verdict,flags\n"));
}

#[test]
fn malformed_json_reports_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{\"family\": \"gap2x2\",\n \"task\": spectrum}").unwrap();
    let o = pt_spectra(&["run", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("byte 30"), "{}", stderr(&o));
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"family":"gap2x2","task":"spectrum","epsilons":[0.1,0.2]}"#).unwrap();
    let o = pt_spectra(&["run", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("epsilons"));
    fs::write(dir.path().join("d.json"), r#"{"family":"gap2x2","task":"spectra"}"#).unwrap();
    let o = pt_spectra(&["run", "d.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("task"), "{}", stderr(&o));
}

#[test]
fn defective_series_fails_with_multiplicities() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("j.json"), r#"{"family":"jordan2x2","task":"rspe","E":0}"#).unwrap();
    let o = pt_spectra(&["run", "j.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("defective") && e.contains("m_g = 1") && e.contains("m_a = 2"), "{e}");
}

#[test]
fn verify_subset_and_fault_injection() {
    let dir = tempfile::tempdir().unwrap();
    let o = pt_spectra(&["verify", "--only", "99"], dir.path());
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));

    let o = pt_spectra(&["verify", "--only", "11", "--inject-pt-sign-error"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL] 11"));
}
