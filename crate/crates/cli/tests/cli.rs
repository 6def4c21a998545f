use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn adanav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adanav"))
        .current_dir(dir)
        .env_remove("ADANAV_OUTPUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .count()
}

#[test]
fn one_session_has_960_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let o = adanav(tmp.path(), &["--out", "o", "--set", "synth.sessions=1", "synth"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = tmp.path().join("o/dataset/s000");
    assert_eq!(data_rows(&s.join("eda.csv")), 960);
    assert_eq!(data_rows(&s.join("accel.csv")), 960);
}

#[test]
fn config_errors_exit_1_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["--out", "o", "--set", "optimizer.budget=0", "synth"][..],
        &["--out", "o", "--set", "synth.sessions=-3", "synth"],
        &["--out", "o", "--set", "detectors.kim2004.min_rise_s=9", "synth"],
        &["--out", "o", "--config", "missing.toml", "synth"],
        &["--out", "o", "--no-such-flag", "synth"],
        &["--out", "o"],
    ] {
        let o = adanav(tmp.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!tmp.path().join("o").exists(), "{args:?}");
    }
    assert_eq!(adanav(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = adanav(tmp.path(), &["--out", "o", "train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("manifest"));
}

#[test]
fn output_dir_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "[run]\nout = \"from_config\"\n[synth]\nsessions = 1\n").unwrap();
    let run = |env: Option<&str>, out: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_adanav"));
        c.current_dir(tmp.path()).env_remove("ADANAV_OUTPUT_DIR");
        if let Some(e) = env {
            c.env("ADANAV_OUTPUT_DIR", e);
        }
        c.args(["--config", "c.toml"]);
        if let Some(o) = out {
            c.args(["--out", o]);
        }
        assert!(c.arg("synth").output().unwrap().status.success());
    };
    run(None, None);
    run(Some("from_env"), None);
    run(Some("from_env2"), Some("from_flag"));
    for d in ["from_config", "from_env", "from_flag"] {
        assert!(tmp.path().join(d).join("dataset/manifest.csv").exists(), "{d}");
    }
    assert!(!tmp.path().join("from_env2").exists());
}

#[test]
fn printed_config_reloads_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let a = adanav(tmp.path(), &["--seed", "5", "--set", "detectors.neurokit.min_amplitude=0.03", "config"]);
    assert!(a.status.success());
    fs::write(tmp.path().join("dump.toml"), a.stdout.clone()).unwrap();
    let b = adanav(tmp.path(), &["--config", "dump.toml", "config"]);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("seed = 5"));
}

#[test]
fn report_rerenders_the_evaluated_table() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["--out", "o", "--seed", "2", "--budget", "6", "--set", "synth.sessions=8", "--set", "synth.duration_s=120"];
    let o = adanav(tmp.path(), &[&base[..], &["run"]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("o");
    for f in ["model.txt", "gains.txt", "history.csv", "report/table.csv", "report/sessions.csv", "report/msdv.svg"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_to_string(dir.join("history.csv")).unwrap().lines().count(), 7);
    let table = fs::read_to_string(dir.join("report/table.csv")).unwrap();
    let svg = fs::read_to_string(dir.join("report/msdv.svg")).unwrap();
    fs::remove_file(dir.join("report/table.csv")).unwrap();
    let r = adanav(tmp.path(), &[&base[..], &["report"]].concat());
    assert!(r.status.success());
    assert_eq!(fs::read_to_string(dir.join("report/table.csv")).unwrap(), table);
    assert_eq!(fs::read_to_string(dir.join("report/msdv.svg")).unwrap(), svg);
    assert!(stdout(&r).contains("neurokit"));
}
