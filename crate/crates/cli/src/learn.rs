//! Subcommands around the network: train, eval, embed, nn.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use shapecl::conform::shape_descriptors;
use shapecl::datagen::{load_matrix, split_dataset, PairMatrix, SplitSpec};
use shapecl::model::{EncoderKind, Model, ModelConfig, MolInput};
use shapecl::molio::{morgan_fingerprint, parse_smiles, read_smiles_file, tanimoto_2d, BitFingerprint, MolGraph};
use shapecl::tensor::{load_checkpoint, save_checkpoint};
use shapecl::train::{evaluate, fit, null_baseline, write_history_csv, TrainConfig};

use crate::error::{data, read_text, require, write_output, CliError, CliResult};
use crate::prep::load_sdf;

pub struct TrainArgs {
    pub matrix: PathBuf,
    pub smiles: PathBuf,
    pub kind: EncoderKind,
    pub full_size: bool,
    pub split: String,
    pub out: PathBuf,
    pub history: Option<PathBuf>,
    pub cfg: TrainConfig,
}

pub fn parse_split(s: &str) -> CliResult<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--split {s:?}: expected three comma-separated numbers")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(CliError::Usage(format!("--split {s:?}: expected three fractions"))),
    }
}

fn open_matrix(path: &Path) -> CliResult<PairMatrix> {
    require(path)?;
    load_matrix(path).map_err(|e| data(&path.display().to_string(), e))
}

/// `(name, smiles)` in matrix order.
fn align_smiles(matrix: &PairMatrix, smiles: &[(String, String)]) -> CliResult<Vec<(String, String)>> {
    let by_name: HashMap<&str, &str> = smiles.iter().map(|(n, s)| (n.as_str(), s.as_str())).collect();
    matrix
        .names
        .iter()
        .map(|n| {
            by_name
                .get(n.as_str())
                .map(|s| (n.clone(), s.to_string()))
                .ok_or_else(|| CliError::Data(format!("no SMILES for matrix molecule {n}")))
        })
        .collect()
}

fn read_smiles_pairs(path: &Path) -> CliResult<Vec<(String, String)>> {
    Ok(read_smiles_file(&read_text(path)?)
        .into_iter()
        .map(|e| (e.name, e.smiles))
        .collect())
}

fn parse_all(mols: &[(String, String)]) -> CliResult<Vec<MolGraph>> {
    mols.iter()
        .map(|(n, s)| {
            parse_smiles(s)
                .map(|mut g| {
                    g.name = n.clone();
                    g
                })
                .map_err(|e| data(n, e))
        })
        .collect()
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let fractions = parse_split(&args.split)?;
    args.cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let matrix = open_matrix(&args.matrix)?;
    let split = split_dataset(matrix.n(), fractions, args.cfg.seed).map_err(|e| match e {
        shapecl::datagen::DataError::InvalidFractions(_) => CliError::Usage(format!("--split {}: {e}", args.split)),
        other => data("split", other),
    })?;
    let mols = align_smiles(&matrix, &read_smiles_pairs(&args.smiles)?)?;
    let graphs = parse_all(&mols)?;
    let base = if args.full_size {
        ModelConfig::full()
    } else {
        ModelConfig::small()
    };
    let mut model = Model::new(base.with_kind(args.kind), args.cfg.seed).map_err(|e| data("model", e))?;
    let inputs: Vec<MolInput> = graphs.iter().map(|g| model.prepare(g)).collect();
    log::info!(
        "training {:?} model ({} parameters) on {}/{}/{} molecules",
        args.kind,
        model.param_count(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let out = fit(&mut model, &inputs, &matrix, &split, &args.cfg).map_err(|e| data("training", e))?;
    let meta = json!({
        "train": args.cfg,
        "split": {"train": split.train, "val": split.val, "test": split.test, "seed": split.seed},
        "molecules": mols,
        "best_epoch": out.best_epoch,
        "best_val_loss": out.best_val_loss,
    });
    save_checkpoint(&out.best.to_checkpoint(meta), &args.out).map_err(|e| data("writing checkpoint", e))?;
    let history = args.history.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".history.csv");
        PathBuf::from(p)
    });
    write_history_csv(&out.history, &history).map_err(|e| data("writing history", e))?;
    log::info!("best epoch {} (validation loss {:.5})", out.best_epoch, out.best_val_loss);
    Ok(())
}

fn open_checkpoint(path: &Path) -> CliResult<(Model, Value)> {
    require(path)?;
    let ckpt = load_checkpoint(path).map_err(|e| data(&path.display().to_string(), e))?;
    let model = Model::from_checkpoint(&ckpt).map_err(|e| data(&path.display().to_string(), e))?;
    Ok((model, ckpt.meta))
}

fn meta_split(meta: &Value) -> CliResult<SplitSpec> {
    let s = meta.get("split").ok_or_else(|| CliError::Data("checkpoint has no split".into()))?;
    let idx = |k: &str| -> CliResult<Vec<usize>> {
        serde_json::from_value(s.get(k).cloned().unwrap_or(Value::Null))
            .map_err(|e| CliError::Data(format!("checkpoint split.{k}: {e}")))
    };
    Ok(SplitSpec {
        train: idx("train")?,
        val: idx("val")?,
        test: idx("test")?,
        seed: s.get("seed").and_then(Value::as_u64).unwrap_or(0),
    })
}

pub fn eval(ckpt: &Path, matrix: &Path, role: &str, smiles: Option<&Path>, workers: usize) -> CliResult<String> {
    let (model, meta) = open_checkpoint(ckpt)?;
    let matrix = open_matrix(matrix)?;
    let split = meta_split(&meta)?;
    let indices = split
        .role(role)
        .ok_or_else(|| CliError::Usage(format!("--split-role {role:?}: expected train, val or test")))?
        .to_vec();
    let pairs: Vec<(String, String)> = match smiles {
        Some(p) => read_smiles_pairs(p)?,
        None => serde_json::from_value(meta.get("molecules").cloned().unwrap_or(Value::Null))
            .map_err(|e| CliError::Data(format!("checkpoint molecules: {e}")))?,
    };
    let mols = align_smiles(&matrix, &pairs)?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= matrix.n()) {
        return Err(CliError::Data(format!("split index {bad} outside a {}-molecule matrix", matrix.n())));
    }
    let graphs = parse_all(&mols)?;
    let inputs: Vec<MolInput> = graphs.iter().map(|g| model.prepare(g)).collect();
    let report = evaluate(&model, &inputs, &matrix, &indices, workers).map_err(|e| data("evaluation", e))?;
    let fps: Vec<BitFingerprint> = graphs.iter().map(|g| morgan_fingerprint(g, 2, 2048)).collect();
    let baseline = null_baseline(&matrix, &fps, &indices).map_err(|e| data("baseline", e))?;
    let out = json!({
        "role": role,
        "molecules": indices.len(),
        "shape": report.shape,
        "color": report.color,
        "baseline2d": baseline,
    });
    Ok(serde_json::to_string_pretty(&out).expect("metrics serialize") + "\n")
}

pub fn embed(ckpt: &Path, smiles: &Path, sdf: Option<&Path>, out: &Path) -> CliResult<()> {
    let (model, _) = open_checkpoint(ckpt)?;
    let entries = read_smiles_file(&read_text(smiles)?);
    let descriptors: HashMap<String, [f64; 4]> = match sdf {
        Some(p) => load_sdf(p, Some(1))?
            .into_iter()
            .map(|s| {
                let d = shape_descriptors(&s.conformers[0]);
                let m = d.principal_moments;
                (s.graph.name.clone(), [d.radius_of_gyration, m[0], m[1], m[2]])
            })
            .collect(),
        None => HashMap::new(),
    };
    let mut names = Vec::new();
    let mut inputs = Vec::new();
    for e in &entries {
        match parse_smiles(&e.smiles) {
            Ok(g) => {
                names.push(e.name.clone());
                inputs.push(model.prepare(&g));
            }
            Err(err) => log::warn!("{} (line {}): {err}; skipped", e.name, e.line),
        }
    }
    if inputs.is_empty() {
        return Err(CliError::Data(format!("{}: no usable molecules", smiles.display())));
    }
    let refs: Vec<&MolInput> = inputs.iter().collect();
    let emb = model.embed(&refs, 256).map_err(|e| data("embedding", e))?;
    let c = &model.config;
    let mut text = String::from("name");
    for (prefix, n) in [("h", c.width), ("zs", c.out_dim), ("zc", c.out_dim)] {
        for k in 0..n {
            let _ = write!(text, ",{prefix}{k}");
        }
    }
    if sdf.is_some() {
        text.push_str(",rg,pmi1,pmi2,pmi3");
    }
    text.push('\n');
    for (name, e) in names.iter().zip(&emb) {
        text.push_str(name);
        for x in e.h.iter().chain(&e.z_shape).chain(&e.z_color) {
            let _ = write!(text, ",{x}");
        }
        if sdf.is_some() {
            match descriptors.get(name) {
                Some(d) => d.iter().for_each(|x| {
                    let _ = write!(text, ",{x}");
                }),
                None => text.push_str(",,,,"),
            }
        }
        text.push('\n');
    }
    write_output(out, text.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Shape,
    Color,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Tanimoto2d,
}

struct EmbeddingTable {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    columns: Vec<String>,
}

fn read_embeddings(path: &Path) -> CliResult<EmbeddingTable> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Data(format!("{}: empty file", path.display())))?;
    let columns: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
    let mut names = Vec::new();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        names.push(fields.next().unwrap_or_default().to_string());
        let row = fields
            .map(|f| if f.is_empty() { Ok(f64::NAN) } else { f.parse::<f64>() })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), k + 2)))?;
        if row.len() != columns.len() {
            return Err(CliError::Data(format!("{} line {}: wrong field count", path.display(), k + 2)));
        }
        rows.push(row);
    }
    Ok(EmbeddingTable { names, rows, columns })
}

pub struct NnArgs<'a> {
    pub embeddings: &'a Path,
    pub query: &'a str,
    pub k: usize,
    pub space: Space,
    pub metric: Metric,
    pub smiles: Option<&'a Path>,
    pub matrix: Option<&'a Path>,
}

pub fn nn(args: &NnArgs) -> CliResult<String> {
    let table = read_embeddings(args.embeddings)?;
    let q = table
        .names
        .iter()
        .position(|n| n == args.query)
        .ok_or_else(|| CliError::Data(format!("query {:?} not in {}", args.query, args.embeddings.display())))?;
    let distances: Vec<f64> = match args.metric {
        Metric::Euclidean => {
            let prefix = match args.space {
                Space::Shape => "zs",
                Space::Color => "zc",
                Space::Graph => "h",
            };
            let cols: Vec<usize> = (0..table.columns.len())
                .filter(|&c| {
                    let name = &table.columns[c];
                    name.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok())
                })
                .collect();
            if cols.is_empty() {
                return Err(CliError::Data(format!("no {prefix}* columns in {}", args.embeddings.display())));
            }
            table
                .rows
                .iter()
                .map(|r| cols.iter().map(|&c| (r[c] - table.rows[q][c]).powi(2)).sum::<f64>().sqrt())
                .collect()
        }
        Metric::Tanimoto2d => {
            let path = args
                .smiles
                .ok_or_else(|| CliError::Usage("--metric tanimoto2d needs --smiles".into()))?;
            let by_name: HashMap<String, String> = read_smiles_pairs(path)?.into_iter().collect();
            let fps = table
                .names
                .iter()
                .map(|n| {
                    let s = by_name
                        .get(n)
                        .ok_or_else(|| CliError::Data(format!("no SMILES for {n}")))?;
                    let g = parse_smiles(s).map_err(|e| data(n, e))?;
                    Ok(morgan_fingerprint(&g, 2, 2048))
                })
                .collect::<CliResult<Vec<_>>>()?;
            fps.iter()
                .map(|f| 1.0 - tanimoto_2d(f, &fps[q]).expect("same length"))
                .collect()
        }
    };
    let matrix = match args.matrix {
        Some(p) => Some(open_matrix(p)?),
        None => None,
    };
    let mut hits: Vec<usize> = (0..table.names.len()).filter(|&i| i != q).collect();
    hits.sort_by(|&a, &b| {
        distances[a]
            .total_cmp(&distances[b])
            .then_with(|| table.names[a].cmp(&table.names[b]))
    });
    hits.truncate(args.k);
    let mut out = String::from("rank,name,distance");
    if matrix.is_some() {
        out.push_str(",shape_tanimoto,color_tanimoto");
    }
    out.push('\n');
    for (rank, &h) in hits.iter().enumerate() {
        let _ = write!(out, "{},{},{}", rank + 1, table.names[h], distances[h]);
        if let Some(m) = &matrix {
            match (m.index_of(args.query), m.index_of(&table.names[h])) {
                (Some(i), Some(j)) => {
                    let _ = write!(out, ",{},{}", m.shape_at(i, j), m.color_at(i, j));
                }
                _ => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    Ok(out)
}
