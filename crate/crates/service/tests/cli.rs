mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixture_dir, HASH_DIM};
use serde_json::Value;

fn fixtures() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn wikicheck(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wikicheck"));
    cmd.args(args).env("WIKICHECK_LOG", "error");
    for (k, _) in std::env::vars() {
        if k.starts_with("WIKICHECK_") && k != "WIKICHECK_LOG" {
            cmd.env_remove(k);
        }
    }
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, head: Option<&Path>) -> std::path::PathBuf {
    let mut text = format!(
        "[wiki]\nfixture_path = {:?}\n[nli]\nencoder = \"hash:{HASH_DIM}\"\n",
        fixture_dir().display().to_string()
    );
    if let Some(h) = head {
        text.push_str(&format!("head_path = {:?}\n", h.display().to_string()));
    }
    let path = dir.join("wikicheck.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = wikicheck(&["frobnicate"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn evaluate_matches_hand_computed_report() {
    let records = fixtures().join("eval_records.jsonl");
    let out = wikicheck(&["evaluate", records.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    // 1 and 4 are fully correct; 2 has the wrong label; 3 misses half of its only group
    assert_eq!(r["fever_score"], 0.5);
    assert_eq!(r["accuracy"], 0.75);
    // F1@5 over non-NEI records: 2/3, 1, 2/3
    assert!((r["evidence_f1@k"].as_f64().unwrap() - 7.0 / 9.0).abs() < 1e-12);
    assert_eq!(r["n_records"], 4);
}

#[test]
fn prepare_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let fever = fixtures().join("fever/train.jsonl");
    let dump = fixtures().join("fever/dump");
    let run = |name: &str| {
        let out_path = dir.path().join(name);
        let out = wikicheck(
            &[
                "prepare-data",
                fever.to_str().unwrap(),
                dump.to_str().unwrap(),
                "--seed",
                "11",
                "--clean",
                "--filter",
                "--out",
                out_path.to_str().unwrap(),
            ],
            None,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read_to_string(&out_path).unwrap(),
            std::fs::read_to_string(dir.path().join(format!("{name}.report.json"))).unwrap(),
        )
    };
    let (a, report_a) = run("a.tsv");
    let (b, report_b) = run("b.tsv");
    assert_eq!(a, b);
    assert_eq!(report_a, report_b);
    let lines: Vec<&str> = a.lines().collect();
    // 5 resolved S/R refs (one listed in two groups, removed by dedup) plus 2 NEI samples
    assert_eq!(lines.len(), 6, "{a}");
    assert!(lines.contains(&"Roman Atwood is a content creator.\tHe is best known for his vlogs , where he posts updates about his life on a daily basis .\tSUPPORTS"));
    assert!(lines
        .iter()
        .any(|l| l.starts_with("Mogadishu is in Kenya.\tMogadishu ( [ ˌmɔːɡəˈdiːʃuː ] ) is the capital")));
    assert_eq!(lines.iter().filter(|l| l.ends_with("\tNEI")).count(), 2);
    let report: Value = serde_json::from_str(&report_a).unwrap();
    assert_eq!(report["n_input"], 7);
    assert_eq!(report["n_after_dedup"], 6);
    assert_eq!(report["n_after_undersample"], 6);
    assert_eq!(report["seed"], 11);
}

#[test]
fn train_check_search_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.tsv");
    std::fs::write(
        &pairs,
        "Mogadishu is the capital of Somalia.\tMogadishu is the capital of Somalia.\tSUPPORTS\n\
         Mogadishu is landlocked.\tIt lies on the coast of the Indian Ocean.\tREFUTES\n\
         Mogadishu is landlocked.\tThe city has served as an important port for centuries.\tNEI\n",
    )
    .unwrap();
    let config = write_config(dir.path(), None);
    let head = dir.path().join("head.json");
    let out = wikicheck(
        &[
            "train-head",
            pairs.to_str().unwrap(),
            "--out",
            head.to_str().unwrap(),
            "--epochs",
            "5",
            "--hidden",
            "8",
        ],
        Some(&config),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 6);
    assert!(dir.path().join("head.json.loss.tsv").exists());

    let config = write_config(dir.path(), Some(&head));
    let out = wikicheck(&["check", "Mogadishu is the capital of Somalia."], Some(&config));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["candidates"], serde_json::json!(["Mogadishu", "Somalia"]));

    let out = wikicheck(&["search", "Mogadishu is the capital of Somalia."], Some(&config));
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["plan"]["queries"], serde_json::json!(["Mogadishu", "Somalia"]));
    assert_eq!(s["plan"]["strategy"], "separate");

    let claims = dir.path().join("claims.txt");
    std::fs::write(
        &claims,
        "Mogadishu is the capital of Somalia.\n\nTokyo never hosted the Olympics.\n",
    )
    .unwrap();
    let out = wikicheck(&["profile", claims.to_str().unwrap()], Some(&config));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    for stage in [
        "NER_model",
        "wiki_search",
        "wiki_texts",
        "embedding_claim",
        "embedding_hypothesis",
        "classification",
    ] {
        assert!(table.contains(stage), "{table}");
    }

    let out = wikicheck(&["check", "   "], Some(&config));
    assert_eq!(out.status.code(), Some(1));
}
