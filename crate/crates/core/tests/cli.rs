use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const XML: &str = r#"<?xml version="1.0"?>
<MedlineCitationSet>
  <MedlineCitation><PMID>1</PMID><Article><ArticleTitle>Allele frequency</ArticleTitle>
    <Abstract><AbstractText>Alleles were typed.</AbstractText></Abstract></Article>
    <MeshHeadingList><MeshHeading><DescriptorName>Alleles</DescriptorName></MeshHeading>
    <MeshHeading><DescriptorName>Humans</DescriptorName></MeshHeading></MeshHeadingList></MedlineCitation>
  <MedlineCitation><PMID>2</PMID><Article><ArticleTitle>Hip fracture</ArticleTitle></Article>
    <MeshHeadingList><MeshHeading><DescriptorName>Fractures</DescriptorName></MeshHeading></MeshHeadingList></MedlineCitation>
  <MedlineCitation><PMID>3</PMID><Article><ArticleTitle>No headings</ArticleTitle>
    <Abstract><AbstractText>Text only.</AbstractText></Abstract></Article></MedlineCitation>
  <MedlineCitation><PMID>4</PMID><Article><ArticleTitle></ArticleTitle></Article></MedlineCitation>
</MedlineCitationSet>
"#;

fn triage(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triage"))
        .args(args)
        .current_dir(dir)
        .env_remove("TRIAGE_CONFIG")
        .env_remove("TRIAGE_K")
        .env_remove("TRIAGE_SEED")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = triage(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn synth_corpus(dir: &Path, n: &str) {
    ok(
        dir,
        &[
            "synth",
            "--citations",
            n,
            "--seed",
            "5",
            "--out",
            "corpus.jsonl",
        ],
    );
}

#[test]
fn ingest_xml_reports_missing_fields() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("in.xml"), XML).unwrap();
    ok(
        dir.path(),
        &["ingest", "--corpus", "in.xml", "--out", "out/corpus.jsonl"],
    );
    let stats = json(&dir.path().join("out/corpus.stats.json"));
    assert_eq!(stats["citations"], 4);
    assert_eq!(stats["without_abstract"], 2);
    assert_eq!(stats["without_descriptors"], 2);
    assert_eq!(stats["without_title"], 1);
    let lines = fs::read_to_string(dir.path().join("out/corpus.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 4);
    assert!(lines.lines().next().unwrap().contains("\"Alleles\""));
    assert!(dir.path().join("out/corpus.config.json").exists());
}

#[test]
fn ingest_tsv_gives_descriptor_sets() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("rel.tsv"),
        "10\tAlleles\n11\tFractures\n10\tHumans\n",
    )
    .unwrap();
    ok(
        dir.path(),
        &["ingest", "--corpus", "rel.tsv", "--out", "c.jsonl"],
    );
    let text = fs::read_to_string(dir.path().join("c.jsonl")).unwrap();
    let rows: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["id"], "10");
    assert_eq!(
        rows[0]["descriptors"],
        serde_json::json!(["Alleles", "Humans"])
    );
    assert_eq!(rows[1]["title"], "");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // usage
    assert_eq!(triage(p, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(triage(p, &["train"]).status.code(), Some(1));
    // unreadable input
    assert_eq!(
        triage(
            p,
            &["ingest", "--corpus", "missing.xml", "--out", "x.jsonl"]
        )
        .status
        .code(),
        Some(2)
    );
    fs::write(
        p.join("bad.xml"),
        "<MedlineCitationSet><MedlineCitation><PMID>1</PMID>",
    )
    .unwrap();
    assert_eq!(
        triage(p, &["ingest", "--corpus", "bad.xml", "--out", "x.jsonl"])
            .status
            .code(),
        Some(2)
    );
    // degenerate: every citation genetic
    fs::write(
        p.join("one_class.jsonl"),
        "{\"id\":\"1\",\"descriptors\":[\"A\"],\"label\":\"genetic\"}\n{\"id\":\"2\",\"descriptors\":[\"B\"],\"label\":\"genetic\"}\n",
    )
    .unwrap();
    assert_eq!(
        triage(p, &["train", "--corpus", "one_class.jsonl"])
            .status
            .code(),
        Some(3)
    );
    // missing artifact
    synth_corpus(p, "200");
    let out = triage(
        p,
        &[
            "score",
            "--corpus",
            "corpus.jsonl",
            "--indicators",
            "nowhere/indicators.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    // misaligned external predictions
    fs::write(p.join("ext.csv"), "id,label\nnot-a-citation,genetic\n").unwrap();
    let out = triage(
        p,
        &[
            "compare",
            "--corpus",
            "corpus.jsonl",
            "--k",
            "5",
            "--external",
            "ext.csv",
            "--out-dir",
            "cmp",
        ],
    );
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn train_score_evaluate_compose() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth_corpus(p, "1500");
    ok(p, &["train", "--corpus", "corpus.jsonl", "--out-dir", "m"]);
    let summary = json(&p.join("m/train_summary.json"));
    let s = &summary["summary"];
    assert_eq!(
        s["significant"].as_u64().unwrap(),
        s["positive"].as_u64().unwrap()
            + s["negative"].as_u64().unwrap()
            + s["tied"].as_array().unwrap().len() as u64
    );
    let indicators = fs::read_to_string(p.join("m/indicators.csv")).unwrap();
    assert!(indicators.contains("Planted Positive 000,+1,"));
    assert!(!indicators.lines().any(|l| l.starts_with("Humans,")));

    // no exclusion: the filtered profile's descriptors are a subset
    ok(
        p,
        &[
            "train",
            "--corpus",
            "corpus.jsonl",
            "--exclusion",
            "none",
            "--out-dir",
            "all",
        ],
    );
    let descriptors = |f: &str| -> std::collections::BTreeSet<String> {
        fs::read_to_string(p.join(f))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("descriptor,"))
            .map(|l| l.rsplitn(3, ',').last().unwrap().to_owned())
            .collect()
    };
    let filtered = descriptors("m/frequency_profile.csv");
    let full = descriptors("all/frequency_profile.csv");
    assert!(filtered.is_subset(&full) && full.contains("Humans") && !filtered.contains("Humans"));

    ok(
        p,
        &[
            "score",
            "--corpus",
            "corpus.jsonl",
            "--indicators",
            "m/indicators.csv",
            "--threshold",
            "-2",
            "--out-dir",
            "s",
        ],
    );
    let hist = fs::read_to_string(p.join("s/histogram.csv")).unwrap();
    let total: u64 = hist
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 1500);
    assert_eq!(json(&p.join("s/score_summary.json"))["threshold"], -2);

    ok(
        p,
        &[
            "evaluate",
            "--corpus",
            "corpus.jsonl",
            "--k",
            "5",
            "--seed",
            "3",
            "--out-dir",
            "e",
        ],
    );
    let report = json(&p.join("e/cv_report.json"));
    assert_eq!(report["folds"].as_array().unwrap().len(), 5);
    assert_eq!(report["refit_per_fold"], true);
    let calibration = fs::read_to_string(p.join("e/calibration.csv")).unwrap();
    assert!(calibration.starts_with("theta,fold1,fold2,fold3,fold4,fold5,mean\n"));
    assert_eq!(
        fs::read_to_string(p.join("e/predictions.csv"))
            .unwrap()
            .lines()
            .count(),
        1501
    );

    ok(
        p,
        &[
            "evaluate",
            "--corpus",
            "corpus.jsonl",
            "--k",
            "5",
            "--indicators",
            "m/indicators.csv",
            "--out-dir",
            "fixed",
        ],
    );
    assert_eq!(
        json(&p.join("fixed/cv_report.json"))["refit_per_fold"],
        false
    );
}

#[test]
fn scorer_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth_corpus(p, "600");
    ok(
        p,
        &[
            "evaluate",
            "--corpus",
            "corpus.jsonl",
            "--k",
            "4",
            "--seed",
            "9",
            "--out-dir",
            "e",
        ],
    );
    let own: String = fs::read_to_string(p.join("e/predictions.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{},{}\n", f[0], f[3])
        })
        .collect();
    fs::write(p.join("self.csv"), format!("id,label\n{own}")).unwrap();
    ok(
        p,
        &[
            "compare",
            "--corpus",
            "corpus.jsonl",
            "--k",
            "4",
            "--seed",
            "9",
            "--no-nb",
            "--external",
            "self.csv",
            "--out-dir",
            "c",
        ],
    );
    let report = json(&p.join("c/compare_report.json"));
    let pooled = &report["pairs"][0]["pooled"];
    assert_eq!(pooled["statistic"], 0.0);
    assert_eq!(pooled["p_value"], 1.0);
    assert_eq!(pooled["no_discordant_pairs"], true);
    assert_eq!(
        report["systems"][0]["metrics"],
        report["systems"][1]["metrics"]
    );
}

#[test]
fn compare_mcnemar_matches_hand_count() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth_corpus(p, "800");
    ok(
        p,
        &[
            "evaluate",
            "--corpus",
            "corpus.jsonl",
            "--k",
            "5",
            "--seed",
            "2",
            "--out-dir",
            "e",
        ],
    );
    // an external system that always answers nongenetic
    let corpus = fs::read_to_string(p.join("corpus.jsonl")).unwrap();
    let rows: Vec<Value> = corpus
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ext: String = rows
        .iter()
        .map(|r| format!("{},nongenetic\n", r["id"].as_str().unwrap()))
        .collect();
    fs::write(p.join("constant.csv"), format!("id,label\n{ext}")).unwrap();
    ok(
        p,
        &[
            "compare",
            "--corpus",
            "corpus.jsonl",
            "--k",
            "5",
            "--seed",
            "2",
            "--no-nb",
            "--external",
            "constant.csv",
            "--out-dir",
            "c",
        ],
    );

    let predictions = fs::read_to_string(p.join("e/predictions.csv")).unwrap();
    let (mut n01, mut n10) = (0u64, 0u64);
    for l in predictions.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        let a_right = f[3] == f[4];
        let b_right = f[4] == "nongenetic";
        match (a_right, b_right) {
            (true, false) => n01 += 1,
            (false, true) => n10 += 1,
            _ => {}
        }
    }
    let want = ((n01 as f64 - n10 as f64).abs() - 1.0).powi(2) / (n01 + n10) as f64;
    let pooled = &json(&p.join("c/compare_report.json"))["pairs"][0]["pooled"];
    assert_eq!(pooled["n01"], n01);
    assert_eq!(pooled["n10"], n10);
    assert!((pooled["statistic"].as_f64().unwrap() - want).abs() < 1e-12);
}

#[test]
fn option_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    synth_corpus(p, "300");
    fs::write(p.join("triage.toml"), "k = 4\nseed = 21\n").unwrap();
    let run = |extra: &[&str], env: &[(&str, &str)], out: &str| -> Value {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_triage"));
        cmd.current_dir(p).env_remove("TRIAGE_CONFIG");
        for (k, v) in env {
            cmd.env(k, v);
        }
        let mut args = vec!["evaluate", "--corpus", "corpus.jsonl", "--out-dir", out];
        args.extend_from_slice(extra);
        let o = cmd.args(args).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        json(&p.join(out).join("config.json"))["settings"].clone()
    };
    // environment only
    let s = run(&[], &[("TRIAGE_K", "3"), ("TRIAGE_SEED", "8")], "a");
    assert_eq!((s["k"].as_u64(), s["seed"].as_u64()), (Some(3), Some(8)));
    // file beats environment
    let s = run(&["--config", "triage.toml"], &[("TRIAGE_K", "3")], "b");
    assert_eq!((s["k"].as_u64(), s["seed"].as_u64()), (Some(4), Some(21)));
    // flag beats file
    let s = run(
        &["--config", "triage.toml", "--k", "6"],
        &[("TRIAGE_K", "3")],
        "c",
    );
    assert_eq!((s["k"].as_u64(), s["seed"].as_u64()), (Some(6), Some(21)));
    // config file named by the environment
    let s = run(&[], &[("TRIAGE_CONFIG", "triage.toml")], "d");
    assert_eq!(s["k"].as_u64(), Some(4));
    // defaults
    let s = run(&[], &[], "e");
    assert_eq!((s["k"].as_u64(), s["seed"].as_u64()), (Some(10), Some(0)));

    let doc = json(&p.join("e/config.json"));
    assert_eq!(doc["version"], chisq_triage::VERSION);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(
        json(&p.join("e/cv_report.json"))["config_hash"],
        doc["config_hash"]
    );
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, workers) in dirs.iter().zip(["1", "3"]) {
        synth_corpus(dir.path(), "1200");
        ok(
            dir.path(),
            &[
                "--workers",
                workers,
                "train",
                "--corpus",
                "corpus.jsonl",
                "--out-dir",
                "m",
            ],
        );
    }
    for f in [
        "frequency_profile.csv",
        "indicators.csv",
        "train_summary.json",
        "config.json",
    ] {
        assert_eq!(
            fs::read(dirs[0].path().join("m").join(f)).unwrap(),
            fs::read(dirs[1].path().join("m").join(f)).unwrap(),
            "{f}"
        );
    }
}
