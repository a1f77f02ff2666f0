use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mvmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path, extra: &[&str]) -> (String, String) {
    let input = dir.join("input");
    let mut args = vec!["synth", "--out-dir", input.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = mvmc(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    (
        input.join("events.csv").to_string_lossy().into_owned(),
        input.join("metadata.csv").to_string_lossy().into_owned(),
    )
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (events, metadata) = synth(tmp.path(), &[]);
    let run = |out: &str, jobs: &str| {
        let dir = tmp.path().join(out);
        let o = mvmc(&[
            "pipeline",
            "--events",
            &events,
            "--metadata",
            &metadata,
            "--seed",
            "7",
            "--jobs",
            jobs,
            "--dump",
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files(&dir)
    };
    let a = run("a", "1");
    let b = run("b", "3");
    assert_eq!(a, b);
    for name in [
        "manifest.json",
        "consensus_2004.json",
        "stability_fms.csv",
        "cluster_trend.csv",
        "matrices/2001_tactic.csv",
    ] {
        assert!(a.contains_key(Path::new(name)), "{name} missing");
    }
}

#[test]
fn empty_sample_exits_with_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (events, _) = synth(tmp.path(), &["--kind", "reversion"]);
    let out_dir = tmp.path().join("out");
    let o = mvmc(&[
        "pipeline",
        "--events",
        &events,
        "--min-attacks",
        "100000",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("empty sample"), "{stderr}");
    assert!(!out_dir.exists());
}

#[test]
fn year_window_limits_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (events, metadata) = synth(tmp.path(), &["--years", "1997..2018"]);
    let out_dir = tmp.path().join("out");
    let o = mvmc(&[
        "pipeline",
        "--events",
        &events,
        "--metadata",
        &metadata,
        "--years",
        "2001..2003",
        "--runs",
        "3",
        "--min-attacks",
        "30",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let consensus: Vec<String> = files(&out_dir)
        .into_keys()
        .map(|p| p.to_string_lossy().into_owned())
        .filter(|p| p.starts_with("consensus_"))
        .collect();
    assert_eq!(
        consensus,
        [
            "consensus_2001.json",
            "consensus_2002.json",
            "consensus_2003.json"
        ]
    );
    let header = std::fs::read_to_string(out_dir.join("stability_ari.csv")).unwrap();
    assert!(header.starts_with("year,2001,2002,2003\n"), "{header}");
}

#[test]
fn bad_configuration_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let (events, _) = synth(tmp.path(), &["--kind", "reversion"]);
    for args in [
        vec!["pipeline", "--events", events.as_str(), "--runs", "0"],
        vec![
            "pipeline",
            "--events",
            events.as_str(),
            "--distance",
            "manhattan",
        ],
        vec![
            "pipeline",
            "--events",
            events.as_str(),
            "--years",
            "2003-2001",
        ],
        vec!["stability", "--events", events.as_str(), "--metric", "nmi"],
        vec!["pipeline"],
    ] {
        assert_eq!(mvmc(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (events, metadata) = synth(tmp.path(), &["--kind", "reversion"]);
    let config = tmp.path().join("mvmc.toml");
    let from_file = tmp.path().join("from_file");
    std::fs::write(
        &config,
        format!(
            "events = {events:?}\nmetadata = {metadata:?}\nseed = 5\nruns = 2\nout_dir = {:?}\n",
            from_file.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = mvmc(&[
        "ensemble",
        "--config",
        config.to_str().unwrap(),
        "--year",
        "2002",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(from_file.join("consensus_2002.json")).unwrap();
    assert!(text.contains("\"seed\": 5"), "{text}");
    assert!(text.contains("\"runs\": 2"), "{text}");

    let from_flag = tmp.path().join("from_flag");
    let o = mvmc(&[
        "ensemble",
        "--config",
        config.to_str().unwrap(),
        "--year",
        "2002",
        "--runs",
        "4",
        "--out-dir",
        from_flag.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(from_flag.join("consensus_2002.json")).unwrap();
    assert!(text.contains("\"runs\": 4"), "{text}");

    std::fs::write(&config, "bogus_key = 1\n").unwrap();
    let o = mvmc(&[
        "ensemble",
        "--config",
        config.to_str().unwrap(),
        "--year",
        "2002",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stage_commands_write_their_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (events, metadata) = synth(tmp.path(), &[]);
    let out = tmp.path().join("out");
    let common = [
        "--events",
        &events,
        "--metadata",
        &metadata,
        "--runs",
        "3",
        "--seed",
        "7",
        "--out-dir",
        out.to_str().unwrap(),
    ];
    let stage = |name: &str, extra: &[&str]| {
        let mut args = vec![name];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        let o = mvmc(&args);
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        String::from_utf8(o.stdout).unwrap()
    };
    stage("ingest", &["--dump"]);
    assert!(out.join("2003_weapon.csv").exists());
    stage("graphs", &["--dump", "--year", "2002"]);
    assert!(out.join("2002_target_edges.csv").exists());
    assert!(out.join("2002_target_graph.json").exists());
    stage("cluster", &["--year", "2002"]);
    let clusters: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("clusters_2002.json")).unwrap())
            .unwrap();
    assert_eq!(clusters["labels"].as_object().unwrap().len(), 36);
    assert_eq!(clusters["gammas"].as_array().unwrap().len(), 3);
    stage("stability", &["--metric", "fms"]);
    assert!(out.join("stability_fms.csv").exists());
    stage("stats", &[]);
    assert!(out.join("rbg_stats.csv").exists());
    let printed = stage("ergm", &["--year", "2003"]);
    assert!(printed.contains("nodematch.ideology"), "{printed}");
    let model = out.join("ergm_2003.json");
    let printed = stage(
        "ergm-predict",
        &[
            "--year",
            "2003",
            "--theta-file",
            model.to_str().unwrap(),
            "--pair",
            "Group A1,Group B2",
        ],
    );
    let logit: f64 = printed
        .lines()
        .next()
        .unwrap()
        .strip_prefix("logit ")
        .unwrap()
        .parse()
        .unwrap();
    let prob: f64 = printed
        .lines()
        .nth(1)
        .unwrap()
        .strip_prefix("probability ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((prob - 1.0 / (1.0 + (-logit).exp())).abs() < 1e-6);
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("ergm_2003.json"), "{manifest}");
}

#[test]
fn predict_with_named_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    let (events, metadata) = synth(tmp.path(), &["--kind", "reversion"]);
    let theta = tmp.path().join("theta.json");
    std::fs::write(&theta, r#"{"sum_weights": -0.0108}"#).unwrap();
    let o = mvmc(&[
        "ergm-predict",
        "--events",
        &events,
        "--metadata",
        &metadata,
        "--year",
        "2001",
        "--theta-file",
        theta.to_str().unwrap(),
        "--pair",
        "Group 01,Group 02",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // Each group has 20 single-category events, so 60 units of weight.
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("logit -1.296000\n"), "{stdout}");

    let o = mvmc(&[
        "ergm-predict",
        "--events",
        &events,
        "--year",
        "2001",
        "--theta-file",
        theta.to_str().unwrap(),
        "--pair",
        "Group 01,Nobody",
    ]);
    assert_eq!(o.status.code(), Some(3));
}
