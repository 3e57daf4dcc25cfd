use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edgepriv::manifest::RunManifest;

const TINY: &str = r#"
seeds = [1, 2]
duration_s = 30.0

[area]
width = 800.0
height = 600.0

[population]
cars = 8
buses = 2
passengers_per_bus = 3
pedestrians = 6

[topology]
placement = "fixed_count"
bs_count = 20
mh_count = 5
"#;

fn edgepriv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgepriv"))
        .args(args)
        .output()
        .unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        Workspace { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn run(&self, cmd: &str, extra: &[&str]) -> Output {
        let config = self.dir.path().join("tiny.toml");
        let out = self.out();
        let mut args = vec![
            cmd,
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        edgepriv(&args)
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files_under(root: &Path) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap();
                found.insert(
                    rel.components()
                        .map(|c| c.as_os_str().to_string_lossy())
                        .collect::<Vec<_>>()
                        .join("/"),
                );
            }
        }
    }
    found
}

#[test]
fn staged_commands_produce_every_artifact() {
    let ws = Workspace::new();
    for cmd in ["generate", "run", "report"] {
        let o = ws.run(cmd, &[]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    let files = files_under(&ws.out());
    for f in [
        "config.toml",
        "topology/bs.csv",
        "topology/mh.csv",
        "traces/trace_seed1.csv",
        "traces/trace_seed2.csv",
        "outcomes/outcomes_seed1_epsinf.csv",
        "report/report.json",
        "report/table3.csv",
        "report/fig5.csv",
        "report/fig6.csv",
        "report/fig7.csv",
        "report/fig8.csv",
        "report/acceptance.csv",
        "manifest_generate.json",
        "manifest_run.json",
        "manifest_report.json",
    ] {
        assert!(files.contains(f), "missing {f}; have {files:?}");
    }
    let outcome = std::fs::read_to_string(ws.out().join("outcomes/outcomes_seed2_eps0.01.csv")).unwrap();
    assert_eq!(outcome.lines().count(), 1 + 30 * 20);
}

#[test]
fn manifests_list_every_file_on_disk() {
    let ws = Workspace::new();
    let o = ws.run("all", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut listed = BTreeSet::new();
    for cmd in ["generate", "run", "report"] {
        let name = format!("manifest_{cmd}.json");
        let m = RunManifest::read(&ws.out().join(&name)).unwrap();
        assert_eq!(m.command, cmd);
        assert_eq!(m.seeds, vec![1, 2]);
        assert!(m.config_hash.len() >= 16);
        listed.insert(name);
        listed.extend(m.artifacts);
        if cmd == "run" {
            assert_eq!(m.runs.len(), 6);
            assert!(m.runs.iter().all(|r| r.requests == 600));
        }
    }
    assert_eq!(listed, files_under(&ws.out()));
}

#[test]
fn repeated_executions_are_byte_identical() {
    let a = Workspace::new();
    let b = Workspace::new();
    for ws in [&a, &b] {
        let o = ws.run("all", &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let files = files_under(&a.out());
    assert_eq!(files, files_under(&b.out()));
    for f in files.iter().filter(|f| !f.starts_with("manifest_")) {
        let x = std::fs::read(a.out().join(f)).unwrap();
        let y = std::fs::read(b.out().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn existing_outputs_need_overwrite() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run("all", &[])), 0);
    let before = std::fs::read(ws.out().join("report/fig6.csv")).unwrap();
    let o = ws.run("run", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--overwrite"), "{}", stderr(&o));
    assert_eq!(code(&ws.run("report", &[])), 2);
    let o = ws.run("all", &["--overwrite"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(before, std::fs::read(ws.out().join("report/fig6.csv")).unwrap());
}

#[test]
fn run_without_artifacts_points_at_generate() {
    let ws = Workspace::new();
    let o = ws.run("run", &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--generate"), "{}", stderr(&o));
    let o = ws.run("run", &["--generate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(ws.out().join("traces/trace_seed2.csv").exists());
}

#[test]
fn report_with_a_missing_level_fails() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run("generate", &[])), 0);
    assert_eq!(code(&ws.run("run", &[])), 0);
    std::fs::remove_file(ws.out().join("outcomes/outcomes_seed2_eps0.1.csv")).unwrap();
    let o = ws.run("report", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seed 2"), "{}", stderr(&o));
}

#[test]
fn overrides_narrow_the_grid() {
    let ws = Workspace::new();
    let o = ws.run("all", &["--seeds", "2", "--epsilons", "inf,0.05"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let outcomes = files_under(&ws.out().join("outcomes"));
    assert_eq!(
        outcomes,
        BTreeSet::from([
            "outcomes_seed2_epsinf.csv".to_string(),
            "outcomes_seed2_eps0.05.csv".to_string()
        ])
    );
}

#[test]
fn invalid_configuration_exits_one() {
    let ws = Workspace::new();
    let bad = ws.dir.path().join("bad.toml");
    std::fs::write(&bad, "duration_s = 10.0\nno_such_key = 1\n").unwrap();
    let o = edgepriv(&[
        "generate",
        "--config",
        bad.to_str().unwrap(),
        "--out-dir",
        ws.out().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));

    assert_eq!(code(&ws.run("generate", &["--seeds", ""])), 1);
    assert_eq!(code(&ws.run("generate", &["--epsilons", "-1"])), 1);
    assert_eq!(code(&edgepriv(&["frobnicate"])), 1);
    assert!(!ws.out().exists());
}

#[test]
fn printed_defaults_parse_back() {
    for args in [&["config"][..], &["config", "--desk"][..]] {
        let o = edgepriv(args);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8(o.stdout).unwrap();
        let config = edgepriv::ExperimentConfig::from_toml_str(&text).unwrap();
        let expected = if args.len() == 2 {
            edgepriv::ExperimentConfig::desk_scale()
        } else {
            edgepriv::ExperimentConfig::default()
        };
        assert_eq!(config, expected);
    }
}
