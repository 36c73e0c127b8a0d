use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MOLS: &str = "\
CCO ethanol
c1ccccc1O phenol
CC(=O)O acetic
CCN ethylamine
c1ccncc1 pyridine
CCCC butane
OCCO glycol
CC(C)O ipa
c1ccccc1C toluene
CCOC ether
";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapecl"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_path_buf();
    std::fs::write(path.join("mols.smi"), MOLS).unwrap();
    (dir, path)
}

#[test]
fn conformers_are_deterministic() {
    let (_d, p) = setup();
    ok(&p, &["conformers", "--smiles", "mols.smi", "--max-confs", "3", "--seed", "7", "--out", "a.sdf"]);
    ok(&p, &["conformers", "--smiles", "mols.smi", "--max-confs", "3", "--seed", "7", "--out", "b.sdf"]);
    let a = std::fs::read(p.join("a.sdf")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.sdf")).unwrap());
    assert!(String::from_utf8(a).unwrap().matches("$$$$").count() >= 10);
}

#[test]
fn fused_ring_only_input_exits_2() {
    let (_d, p) = setup();
    std::fs::write(p.join("fused.smi"), "c1ccc2ccccc2c1 naphthalene\n").unwrap();
    let out = run(&p, &["conformers", "--smiles", "fused.smi", "--out", "f.sdf"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(p.join("mixed.smi"), "c1ccc2ccccc2c1 naphthalene\nCCO ethanol\n").unwrap();
    ok(&p, &["conformers", "--smiles", "mixed.smi", "--out", "m.sdf"]);
    let text = std::fs::read_to_string(p.join("m.sdf")).unwrap();
    assert!(text.starts_with("ethanol"));
    assert!(!text.contains("naphthalene"));
}

#[test]
fn matrix_has_all_pairs() {
    let (_d, p) = setup();
    ok(&p, &["conformers", "--smiles", "mols.smi", "--max-confs", "2", "--out", "c.sdf"]);
    ok(&p, &["matrix", "--sdf", "c.sdf", "--out", "m.mcls", "--csv", "m.csv", "--workers", "2"]);
    let csv = std::fs::read_to_string(p.join("m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 45);
}

#[test]
fn stats_on_methane() {
    let (_d, p) = setup();
    std::fs::write(p.join("methane.smi"), "C methane\n").unwrap();
    ok(&p, &["conformers", "--smiles", "methane.smi", "--max-confs", "1", "--out", "c.sdf"]);
    let table = ok(&p, &["stats", "--sdf", "c.sdf"]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "property,min,max,mean,median,std");
    assert_eq!(lines[1], "heavy_atoms,1.0000,1.0000,1.0000,1.0000,0.0000");
    // 12.011 + 4 * 1.008
    assert!(lines[2].starts_with("molecular_weight,16.0430,"), "{}", lines[2]);
    assert_eq!(lines.len(), 8);
}

#[test]
fn exit_codes() {
    let (_d, p) = setup();
    std::fs::write(p.join("empty.sdf"), "").unwrap();
    assert_eq!(run(&p, &["stats", "--sdf", "empty.sdf"]).status.code(), Some(65));
    assert_eq!(run(&p, &["stats", "--sdf", "absent.sdf"]).status.code(), Some(66));
    assert_eq!(run(&p, &["eval", "--ckpt", "absent.ckpt", "--matrix", "m.mcls"]).status.code(), Some(66));
    assert_eq!(run(&p, &["--no-such-flag"]).status.code(), Some(64));
    assert_eq!(run(&p, &["--help"]).status.code(), Some(0));
    ok(&p, &["conformers", "--smiles", "mols.smi", "--max-confs", "1", "--out", "c.sdf"]);
    ok(&p, &["matrix", "--sdf", "c.sdf", "--out", "m.mcls"]);
    for split in ["0.6,0.2", "0.5,0.5,0.5", "a,b,c", "-0.2,0.6,0.6"] {
        let out = run(&p, &["train", "--matrix", "m.mcls", "--smiles", "mols.smi", "--split", split, "--out", "x.ckpt"]);
        assert_eq!(out.status.code(), Some(64), "{split}");
    }
    std::fs::write(p.join("short.smi"), "CCO ethanol\n").unwrap();
    let out = run(&p, &["train", "--matrix", "m.mcls", "--smiles", "short.smi", "--out", "x.ckpt"]);
    assert_eq!(out.status.code(), Some(65));
}

#[test]
fn train_eval_embed_nn() {
    let (_d, p) = setup();
    ok(&p, &["conformers", "--smiles", "mols.smi", "--max-confs", "1", "--out", "c.sdf"]);
    ok(&p, &["matrix", "--sdf", "c.sdf", "--out", "m.mcls"]);
    ok(
        &p,
        &[
            "train", "--matrix", "m.mcls", "--smiles", "mols.smi", "--split", "0.6,0.2,0.2", "--out", "a.ckpt",
            "--batch-size", "4", "--max-epochs", "3",
        ],
    );
    let history = std::fs::read_to_string(p.join("a.ckpt.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);

    ok(&p, &["eval", "--ckpt", "a.ckpt", "--matrix", "m.mcls", "--split-role", "train", "--out", "r.json"]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["shape"]["pairs"], 15);
    assert!(report["shape"]["r"].is_number());
    assert!(report["baseline2d"]["color"]["mae"].is_number());

    ok(&p, &["embed", "--ckpt", "a.ckpt", "--smiles", "mols.smi", "--sdf", "c.sdf", "--out", "e.csv"]);
    let emb = std::fs::read_to_string(p.join("e.csv")).unwrap();
    let header: Vec<&str> = emb.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 64 + 32 + 32 + 4);
    assert_eq!(header[header.len() - 4..], ["rg", "pmi1", "pmi2", "pmi3"]);
    assert_eq!(emb.lines().count(), 11);

    let nn = ok(&p, &["nn", "--embeddings", "e.csv", "--query", "phenol", "--k", "4", "--matrix", "m.mcls"]);
    let rows: Vec<Vec<&str>> = nn.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[1] != "phenol" && r.len() == 5));
    let d: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[0] <= w[1]));

    let out = run(&p, &["nn", "--embeddings", "e.csv", "--query", "phenol", "--metric", "tanimoto2d"]);
    assert_eq!(out.status.code(), Some(64));
    let tn = ok(
        &p,
        &["nn", "--embeddings", "e.csv", "--query", "phenol", "--k", "1", "--metric", "tanimoto2d", "--smiles", "mols.smi"],
    );
    assert!(tn.lines().nth(1).unwrap().starts_with("1,toluene,"));
}
