use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mimicguard::cli::{run, EXIT_DATA, EXIT_OK, EXIT_THEFT, EXIT_USAGE};
use mimicguard::report::RunReport;
use mimicguard_core::corpus::natural_image;
use mimicguard_core::imagecore::{save_image, SaveFormat};
use mimicguard_core::verify::{Decision, VerificationVerdict};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mimicguard"))
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn write_corpus(dir: &Path, count: usize, size: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..count {
        let img = natural_image(size, size, seed + i as u64);
        save_image(&img, dir.join(format!("art{i:02}.png")), SaveFormat::Png).unwrap();
    }
}

fn read_verdict(path: &Path) -> VerificationVerdict {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn register_pair(tmp: &Path) -> (PathBuf, String) {
    let store = tmp.join("registry.jsonl");
    let key = tmp.join("artist.key");
    assert_eq!(run(["keygen", "--out", &s(&key), "--seed", "7"]), EXIT_OK);
    let mut ids = Vec::new();
    for (role, payload) in [("unauthorized", "a5c3f00f"), ("authorized", "5a3c0ff0")] {
        let out = bin()
            .args(["register", "--store", &s(&store), "--artist", "alice", "--role", role, "--key", &s(&key)])
            .args(["--payload", payload])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        ids.push(String::from_utf8(out.stdout).unwrap().trim().to_string());
    }
    (store, ids.remove(0))
}

#[test]
fn embed_attack_extract_verify_round_trip() {
    let start = Instant::now();
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    write_corpus(&t.join("art"), 5, 256, 100);
    let (store, rec) = register_pair(t);

    let marked = t.join("marked");
    assert_eq!(
        run(["embed", "--in", &s(&t.join("art")), "--out", &s(&marked), "--record", &rec, "--store", &s(&store)]),
        EXIT_OK
    );
    let manifest: RunReport = serde_json::from_str(&std::fs::read_to_string(marked.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.results.len(), 5);
    assert!(manifest.results.iter().all(|r| r.psnr.unwrap() >= 38.0));
    assert_eq!(manifest.canonical_hash, manifest.compute_hash());

    let attacked = t.join("attacked");
    assert_eq!(
        run(["attack", "--in", &s(&marked), "--out", &s(&attacked), "--spec", "jpeg:q=75", "--seed", "1"]),
        EXIT_OK
    );

    let extract = t.join("extract.json");
    assert_eq!(
        run(["extract", "--in", &s(&attacked), "--record", &rec, "--store", &s(&store), "--out", &s(&extract)]),
        EXIT_OK
    );
    let ex: RunReport = serde_json::from_str(&std::fs::read_to_string(&extract).unwrap()).unwrap();
    let samples = ex.samples.unwrap();
    assert_eq!(samples.len(), 5);
    assert!(samples.mean_bits() >= 28.0, "{}", samples.mean_bits());
    // the authorized counterpart is registered, so each image gets a ruling
    assert!(ex.results.iter().all(|r| r.ruling.as_deref() == Some("unauthorized")));

    let verdict = t.join("verdict.json");
    let code = run([
        "verify", "--in", &s(&attacked), "--record", &rec, "--store", &s(&store), "--out", &s(&verdict), "--fail-on-theft",
    ]);
    assert_eq!(code, EXIT_THEFT);
    let v = read_verdict(&verdict);
    assert_eq!(v.decision, Decision::TheftDetected);
    assert_eq!(v.sample_count, 5);
    assert!(v.p_mean.is_none());

    // unmarked art tested against the same record carries no evidence
    let clean = t.join("clean.json");
    assert_eq!(
        run(["verify", "--in", &s(&t.join("art")), "--record", &rec, "--store", &s(&store), "--out", &s(&clean), "--fail-on-theft"]),
        EXIT_OK
    );
    assert_eq!(read_verdict(&clean).decision, Decision::NoEvidence);
    assert!(start.elapsed().as_secs() < 60, "{:?}", start.elapsed());
}

#[test]
fn simulated_theft_exits_three_and_clean_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let samples = tmp.path().join("s.json");
    let verdict = tmp.path().join("v.json");
    let ok = bin()
        .args(["simulate", "--preset", "t1-artist-watermarked", "--n", "100", "--seed", "3", "--out", &s(&samples)])
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("simulated"));
    let st = bin()
        .args(["verify", "--samples", &s(&samples), "--null", "chance", "--fail-on-theft", "--out", &s(&verdict)])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(EXIT_THEFT));
    let v = read_verdict(&verdict);
    assert_eq!(v.decision, Decision::TheftDetected);
    assert_eq!(v.sample_count, 100);

    assert_eq!(
        run(["simulate", "--preset", "t1-artist-clean", "--n", "100", "--seed", "3", "--out", &s(&samples)]),
        EXIT_OK
    );
    assert_eq!(run(["verify", "--samples", &s(&samples), "--fail-on-theft", "--out", &s(&verdict)]), EXIT_OK);
    assert_eq!(read_verdict(&verdict).decision, Decision::NoEvidence);
}

#[test]
fn report_renders_table_csv() {
    let tmp = TempDir::new().unwrap();
    let samples = tmp.path().join("s.json");
    let run_file = tmp.path().join("run.json");
    let csv = tmp.path().join("table.csv");
    assert_eq!(
        run(["simulate", "--preset", "t1-artist-watermarked", "--n", "1000", "--out", &s(&samples), "--report", &s(&run_file)]),
        EXIT_OK
    );
    assert_eq!(run(["report", "--run", &s(&run_file), "--format", "csv", "--out", &s(&csv)]), EXIT_OK);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "row,0-20%,20-40%,40-60%,60-80%,80-100%,avg(bits),best(bits)");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    let total: u64 = row[1..6].iter().map(|c| c.parse::<u64>().unwrap()).sum();
    assert_eq!(total, 1000);

    let plot = tmp.path().join("plot.json");
    assert_eq!(run(["report", "--run", &s(&run_file), "--format", "json", "--binning", "ten", "--out", &s(&plot)]), EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plot).unwrap()).unwrap();
    assert_eq!(v["histograms"][0]["counts"].as_array().unwrap().len(), 10);
    assert!(!v["power_curve"].as_array().unwrap().is_empty());
}

#[test]
fn empty_directory_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let key = tmp.path().join("k.key");
    assert_eq!(run(["keygen", "--out", &s(&key)]), EXIT_OK);
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = bin()
        .args(["embed", "--in", &s(&empty), "--out", &s(&tmp.path().join("o"))])
        .args(["--payload", "deadbeef", "--method", "dwt-dct", "--key", &s(&key)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no images found"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bin().args(["embed", "--bogus"]).status().unwrap().code(), Some(EXIT_USAGE));
    assert_eq!(bin().arg("--help").status().unwrap().code(), Some(EXIT_OK));
    assert_eq!(run(["attack", "--in", ".", "--out", "x", "--spec", "smudge:q=1"]), EXIT_USAGE);
    assert_eq!(run(["simulate", "--preset", "t1-artist-clean", "--mix", "p=1.5", "--out", "x"]), EXIT_USAGE);
}

#[test]
fn reports_are_byte_identical_under_fixed_epoch() {
    let tmp = TempDir::new().unwrap();
    let report = tmp.path().join("run.json");
    let samples = tmp.path().join("s.json");
    let mut copies = Vec::new();
    for _ in 0..2 {
        let st = bin()
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .args(["simulate", "--preset", "t2-dwt-dct", "--n", "200", "--seed", "9", "--out", &s(&samples)])
            .args(["--report", &s(&report)])
            .status()
            .unwrap();
        assert!(st.success());
        copies.push(std::fs::read(&report).unwrap());
    }
    assert_eq!(copies[0], copies[1]);
}

#[test]
fn concurrent_registrations_all_land() {
    let tmp = TempDir::new().unwrap();
    let store = tmp.path().join("registry.jsonl");
    let children: Vec<_> = (0..6)
        .map(|i| {
            bin()
                .args(["register", "--store", &s(&store), "--artist", &format!("artist{i}")])
                .args(["--insecure-inline-key", "00112233445566778899aabbccddeeff", "--seed", &i.to_string()])
                .spawn()
                .unwrap()
        })
        .collect();
    for mut c in children {
        assert!(c.wait().unwrap().success());
    }
    let text = std::fs::read_to_string(&store).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn all_records_flags_only_the_embedded_artist() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let store = t.join("registry.jsonl");
    let mut ids = Vec::new();
    for (i, artist) in ["ann", "ben", "cat"].iter().enumerate() {
        let key = t.join(format!("{artist}.key"));
        assert_eq!(run(["keygen", "--out", &s(&key), "--seed", &i.to_string()]), EXIT_OK);
        let out = bin()
            .args(["register", "--store", &s(&store), "--artist", artist, "--key", &s(&key), "--seed", &(10 + i).to_string()])
            .output()
            .unwrap();
        assert!(out.status.success());
        ids.push(String::from_utf8(out.stdout).unwrap().trim().to_string());
    }
    write_corpus(&t.join("art"), 12, 256, 40);
    let marked = t.join("marked");
    assert_eq!(run(["embed", "--in", &s(&t.join("art")), "--out", &s(&marked), "--record", &ids[1], "--store", &s(&store)]), EXIT_OK);
    let out = t.join("verdicts.json");
    assert_eq!(
        run(["verify", "--in", &s(&marked), "--all-records", "--store", &s(&store), "--out", &s(&out), "--fail-on-theft"]),
        EXIT_THEFT
    );
    let verdicts: std::collections::BTreeMap<String, VerificationVerdict> =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(verdicts.len(), 3);
    for (i, id) in ids.iter().enumerate() {
        let expected = if i == 1 { Decision::TheftDetected } else { Decision::NoEvidence };
        assert_eq!(verdicts[id].decision, expected, "{id}");
    }
}
