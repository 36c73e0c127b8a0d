//! Subcommands that prepare data: conformers, matrix, stats.

use std::io::BufReader;
use std::path::Path;

use shapecl::conform::{generate_conformers, rotatable_bonds, ConformerSet};
use shapecl::datagen::{build_matrix, save_matrix, write_csv};
use shapecl::molio::{parse_smiles, read_sdf, read_smiles_file, write_sdf_record, MolGraph};
use shapecl::overlay::{assign_features, atom_kinds, OverlayOptions, PharmacophoreKind};

use crate::error::{data, read_text, require, write_output, CliError, CliResult};

pub fn load_sdf(path: &Path, max_confs: Option<usize>) -> CliResult<Vec<ConformerSet>> {
    require(path)?;
    let file = std::fs::File::open(path).map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))?;
    let records = read_sdf(BufReader::new(file)).map_err(|e| data(&path.display().to_string(), e))?;
    ConformerSet::group(records, max_confs).map_err(|e| data(&path.display().to_string(), e))
}

pub fn conformers(smiles: Option<&Path>, sdf: Option<&Path>, max_confs: usize, seed: u64, out: &Path) -> CliResult<()> {
    if max_confs == 0 {
        return Err(CliError::Usage("--max-confs must be at least 1".into()));
    }
    let mut buf = Vec::new();
    let (mut ok, mut failed) = (0usize, 0usize);
    match (smiles, sdf) {
        (Some(path), None) => {
            for entry in read_smiles_file(&read_text(path)?) {
                let graph = parse_smiles(&entry.smiles).map(|mut g| {
                    g.name = entry.name.clone();
                    g
                });
                match graph.map_err(|e| e.to_string()).and_then(|g| {
                    generate_conformers(&g, max_confs, seed).map_err(|e| e.to_string())
                }) {
                    Ok(set) => {
                        for c in &set.conformers {
                            write_sdf_record(&mut buf, &set.graph, c).expect("writing to memory");
                        }
                        ok += 1;
                    }
                    Err(e) => {
                        log::warn!("{} (line {}): {e}; skipped", entry.name, entry.line);
                        failed += 1;
                    }
                }
            }
        }
        (None, Some(path)) => {
            for set in load_sdf(path, Some(max_confs))? {
                for c in &set.conformers {
                    write_sdf_record(&mut buf, &set.graph, c).expect("writing to memory");
                }
                ok += 1;
            }
        }
        _ => return Err(CliError::Usage("give exactly one of --smiles or --sdf".into())),
    }
    write_output(out, &buf)?;
    log::info!("{ok} molecules written, {failed} failed");
    if ok == 0 {
        return Err(CliError::Partial("no molecule succeeded".into()));
    }
    Ok(())
}

pub fn matrix(
    sdf: &Path,
    out: &Path,
    workers: usize,
    random_starts: usize,
    seed: u64,
    csv: Option<&Path>,
) -> CliResult<()> {
    let mut sets = load_sdf(sdf, None)?;
    if sets.len() < 2 {
        return Err(CliError::Data(format!("need at least 2 molecules, found {}", sets.len())));
    }
    sets.iter_mut().for_each(assign_features);
    let opts = OverlayOptions {
        random_starts,
        seed,
        ..OverlayOptions::default()
    };
    let (m, report) = build_matrix(&sets, workers, &opts).map_err(|e| data("matrix", e))?;
    log::info!(
        "{} pairs, {} overlays in {:.2} s: {:.1} pairs/s",
        report.pairs,
        report.overlay_calls,
        report.seconds,
        report.pairs_per_second()
    );
    if report.failed_pairs > 0 {
        log::warn!("{} pairs failed and hold NaN", report.failed_pairs);
    }
    save_matrix(&m, out).map_err(|e| data("writing matrix", e))?;
    if let Some(path) = csv {
        let f = std::fs::File::create(path).map_err(|e| data("writing CSV", e))?;
        write_csv(&m, std::io::BufWriter::new(f)).map_err(|e| data("writing CSV", e))?;
    }
    Ok(())
}

/// Per-molecule properties in table order.
pub const PROPERTIES: [&str; 7] = [
    "heavy_atoms",
    "molecular_weight",
    "rotatable_bonds",
    "aromatic_rings",
    "hbd",
    "hba",
    "heteroatoms",
];

pub fn properties(g: &MolGraph) -> [f64; 7] {
    let kinds: Vec<Vec<PharmacophoreKind>> = (0..g.atom_count()).map(|i| atom_kinds(g, i)).collect();
    let count = |k: PharmacophoreKind| kinds.iter().filter(|ks| ks.contains(&k)).count() as f64;
    [
        g.atom_count() as f64,
        g.molecular_weight(),
        rotatable_bonds(g).len() as f64,
        g.aromatic_rings().count() as f64,
        count(PharmacophoreKind::Donor),
        count(PharmacophoreKind::Acceptor),
        g.atoms().iter().filter(|a| a.element.is_hetero()).count() as f64,
    ]
}

/// `[min, max, mean, median, std]`; std uses `n − 1` (0 for one value).
pub fn summarize(values: &[f64]) -> [f64; 5] {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    let std = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    [v[0], v[n - 1], mean, median, std]
}

pub fn stats(sdf: &Path) -> CliResult<String> {
    let sets = load_sdf(sdf, Some(1))?;
    if sets.is_empty() {
        return Err(CliError::Data(format!("{}: no molecules", sdf.display())));
    }
    let rows: Vec<[f64; 7]> = sets.iter().map(|s| properties(&s.graph)).collect();
    let mut out = String::from("property,min,max,mean,median,std\n");
    for (k, name) in PROPERTIES.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let s = summarize(&col);
        out.push_str(&format!("{name},{:.4},{:.4},{:.4},{:.4},{:.4}\n", s[0], s[1], s[2], s[3], s[4]));
    }
    Ok(out)
}
