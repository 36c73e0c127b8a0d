//! MDL molfile V2000 records, heavy atoms only.

use std::io::{BufRead, Write};

use nalgebra::Vector3;

use super::element::Element;
use super::graph::{Atom, Bond, BondOrder, MolGraph};
use super::smiles::{aromatize, default_h_count};
use super::{MolError, Result};
use crate::conform::Conformer;

pub type SdfRecord = (MolGraph, Conformer);

fn format_err(line: usize, msg: impl Into<String>) -> MolError {
    MolError::Format {
        line,
        msg: msg.into(),
    }
}

fn field(line: &str, start: usize, len: usize) -> &str {
    let end = (start + len).min(line.len());
    if start >= line.len() {
        ""
    } else {
        line[start..end].trim()
    }
}

/// Reads every record of an SD file. Hydrogen atoms are dropped and folded
/// into their neighbor's hydrogen count; coordinates stay in Å.
pub fn read_sdf<R: BufRead>(reader: R) -> Result<Vec<SdfRecord>> {
    let mut records = Vec::new();
    let mut block: Vec<String> = Vec::new();
    let mut block_start = 1;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r').to_string();
        if line.starts_with("$$$$") {
            records.push(parse_record(&block, block_start, records.len())?);
            block.clear();
            block_start = idx + 2;
        } else {
            block.push(line);
        }
    }
    if block.iter().any(|l| !l.trim().is_empty()) {
        records.push(parse_record(&block, block_start, records.len())?);
    }
    Ok(records)
}

fn parse_record(lines: &[String], first_line: usize, index: usize) -> Result<SdfRecord> {
    if lines.len() < 4 {
        return Err(format_err(first_line, "record shorter than header + counts line"));
    }
    let name = match lines[0].trim() {
        "" => format!("mol{}", index + 1),
        n => n.to_string(),
    };
    let counts = &lines[3];
    let counts_line = first_line + 3;
    if counts.contains("V3000") {
        return Err(MolError::UnsupportedFeature("V3000 molfiles".into()));
    }
    let n_atoms: usize = field(counts, 0, 3)
        .parse()
        .map_err(|_| format_err(counts_line, "malformed atom count"))?;
    let n_bonds: usize = field(counts, 3, 3)
        .parse()
        .map_err(|_| format_err(counts_line, "malformed bond count"))?;
    if lines.len() < 4 + n_atoms + n_bonds {
        return Err(format_err(
            first_line + lines.len(),
            "truncated atom or bond block",
        ));
    }

    let mut elements = Vec::with_capacity(n_atoms);
    let mut charges = Vec::with_capacity(n_atoms);
    let mut coords = Vec::with_capacity(n_atoms);
    for k in 0..n_atoms {
        let line = &lines[4 + k];
        let ln = first_line + 4 + k;
        if line.len() < 34 {
            return Err(format_err(ln, "atom line too short"));
        }
        let coord = |s: usize| -> Result<f64> {
            field(line, s, 10)
                .parse()
                .map_err(|_| format_err(ln, "malformed coordinate"))
        };
        coords.push(Vector3::new(coord(0)?, coord(10)?, coord(20)?));
        let sym = field(line, 31, 3);
        let e = Element::from_symbol(sym)
            .ok_or_else(|| MolError::UnsupportedFeature(format!("element {sym}")))?;
        elements.push(e);
        let code: i32 = match field(line, 36, 3) {
            "" => 0,
            s => s.parse().map_err(|_| format_err(ln, "malformed charge field"))?,
        };
        charges.push(match code {
            1..=3 => 4 - code,
            5..=7 => 4 - code,
            _ => 0,
        });
    }
    let mut bonds_raw = Vec::with_capacity(n_bonds);
    for k in 0..n_bonds {
        let line = &lines[4 + n_atoms + k];
        let ln = first_line + 4 + n_atoms + k;
        let num = |s: usize| -> Result<usize> {
            field(line, s, 3)
                .parse()
                .map_err(|_| format_err(ln, "malformed bond line"))
        };
        let (a, b, t) = (num(0)?, num(3)?, num(6)?);
        if a == 0 || b == 0 || a > n_atoms || b > n_atoms {
            return Err(format_err(ln, "bond references missing atom"));
        }
        let order = BondOrder::from_code(t as u8)
            .filter(|_| t <= 4)
            .ok_or_else(|| MolError::UnsupportedFeature(format!("bond type {t}")))?;
        bonds_raw.push((a - 1, b - 1, order));
    }
    let mut charge_block_seen = false;
    for line in &lines[4 + n_atoms + n_bonds..] {
        if line.starts_with("M  END") {
            break;
        }
        if let Some(rest) = line.strip_prefix("M  CHG") {
            if !charge_block_seen {
                charges.iter_mut().for_each(|c| *c = 0);
                charge_block_seen = true;
            }
            let nums: Vec<i32> = rest.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            for pair in nums.get(1..).unwrap_or(&[]).chunks(2) {
                if let [a, v] = pair {
                    if *a >= 1 && (*a as usize) <= n_atoms {
                        charges[*a as usize - 1] = *v;
                    }
                }
            }
        }
    }

    // drop hydrogens
    let mut new_index = vec![usize::MAX; n_atoms];
    let mut heavy = Vec::new();
    for (i, e) in elements.iter().enumerate() {
        if *e != Element::H {
            new_index[i] = heavy.len();
            heavy.push(i);
        }
    }
    if heavy.is_empty() {
        return Err(MolError::InvalidGraph(format!("record {name} has no heavy atoms")));
    }
    let mut removed_h = vec![0u32; n_atoms];
    let mut bonds = Vec::new();
    let mut aromatic = vec![false; n_atoms];
    for &(a, b, order) in &bonds_raw {
        match (elements[a] == Element::H, elements[b] == Element::H) {
            (false, false) => {
                if order == BondOrder::Aromatic {
                    aromatic[a] = true;
                    aromatic[b] = true;
                }
                bonds.push(Bond::new(new_index[a], new_index[b], order));
            }
            (true, false) => removed_h[b] += 1,
            (false, true) => removed_h[a] += 1,
            (true, true) => {}
        }
    }
    let mut used = vec![0u32; n_atoms];
    for &(a, b, order) in &bonds_raw {
        if elements[a] != Element::H && elements[b] != Element::H {
            used[a] += order.valence();
            used[b] += order.valence();
        }
    }
    let atoms: Vec<Atom> = heavy
        .iter()
        .map(|&i| {
            let implicit = default_h_count(elements[i], charges[i], aromatic[i], used[i]).unwrap_or(0);
            Atom {
                element: elements[i],
                formal_charge: charges[i],
                aromatic: aromatic[i],
                h_count: implicit.max(removed_h[i]),
                degree: 0,
            }
        })
        .collect();
    let graph = aromatize(MolGraph::new(name, atoms, bonds)?);
    let coords = heavy.iter().map(|&i| coords[i]).collect();
    Ok((graph, Conformer::new(coords)))
}

/// Writes one V2000 record (heavy atoms, `$$$$` terminated).
pub fn write_sdf_record<W: Write>(out: &mut W, graph: &MolGraph, conf: &Conformer) -> std::io::Result<()> {
    writeln!(out, "{}", graph.name)?;
    writeln!(out, "  shapecl          3D")?;
    writeln!(out)?;
    writeln!(
        out,
        "{:>3}{:>3}  0  0  0  0  0  0  0  0999 V2000",
        graph.atom_count(),
        graph.bonds().len()
    )?;
    for (atom, p) in graph.atoms().iter().zip(&conf.coords) {
        let code = match atom.formal_charge {
            c @ -3..=3 if c != 0 => 4 - c,
            _ => 0,
        };
        writeln!(
            out,
            "{:>10.4}{:>10.4}{:>10.4} {:<3} 0{:>3}  0  0  0  0  0  0  0  0  0  0",
            p.x,
            p.y,
            p.z,
            atom.element.symbol(),
            code
        )?;
    }
    for b in graph.bonds() {
        writeln!(
            out,
            "{:>3}{:>3}{:>3}  0  0  0  0",
            b.begin + 1,
            b.end + 1,
            b.order.code()
        )?;
    }
    let charged: Vec<(usize, i32)> = graph
        .atoms()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.formal_charge != 0)
        .map(|(i, a)| (i + 1, a.formal_charge))
        .collect();
    for chunk in charged.chunks(8) {
        write!(out, "M  CHG{:>3}", chunk.len())?;
        for (i, c) in chunk {
            write!(out, " {i:>3} {c:>3}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "M  END")?;
    writeln!(out, "$$$$")
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    const METHANE: &str = "methane
  test

  5  4  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.0000 C   0  0  0  0  0  0  0  0  0  0  0  0
    0.6291    0.6291    0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.6291   -0.6291    0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
   -0.6291    0.6291   -0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
    0.6291   -0.6291   -0.6291 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0  0  0  0
  1  3  1  0  0  0  0
  1  4  1  0  0  0  0
  1  5  1  0  0  0  0
M  END
$$$$
";

    #[test]
    fn empty_stream() {
        assert!(read_sdf("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn methane_drops_hydrogens() {
        let recs = read_sdf(METHANE.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        let (g, c) = &recs[0];
        assert_eq!(g.atom_count(), 1);
        assert_eq!(g.atoms()[0].h_count, 4);
        assert_eq!(c.coords.len(), 1);
        assert_eq!(g.name, "methane");
    }

    #[test]
    fn round_trip_with_charges() {
        let g = parse_smiles("C[N+](C)(C)CC(=O)[O-]").unwrap();
        let coords = (0..g.atom_count()).map(|i| Vector3::new(i as f64 * 1.5, 0.25, -1.0)).collect();
        let conf = Conformer::new(coords);
        let mut buf = Vec::new();
        write_sdf_record(&mut buf, &g, &conf).unwrap();
        write_sdf_record(&mut buf, &g, &conf).unwrap();
        let recs = read_sdf(buf.as_slice()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].0.atoms(), g.atoms());
        assert_eq!(recs[0].0.bonds(), g.bonds());
        for (a, b) in recs[1].1.coords.iter().zip(&conf.coords) {
            assert!((a - b).norm() < 1e-4);
        }
    }

    #[test]
    fn aromatic_round_trip() {
        let g = parse_smiles("c1ccncc1").unwrap();
        let conf = Conformer::new(vec![Vector3::zeros(); 6]);
        let mut buf = Vec::new();
        write_sdf_record(&mut buf, &g, &conf).unwrap();
        let recs = read_sdf(buf.as_slice()).unwrap();
        assert_eq!(recs[0].0.atoms(), g.atoms());
    }

    #[test]
    fn malformed_inputs() {
        let bad_counts = METHANE.replace("  5  4  0", "  x  4  0");
        assert!(matches!(read_sdf(bad_counts.as_bytes()), Err(MolError::Format { .. })));
        let truncated: String = METHANE.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_sdf(truncated.as_bytes()), Err(MolError::Format { .. })));
        let v3000 = METHANE.replace("V2000", "V3000");
        assert!(matches!(read_sdf(v3000.as_bytes()), Err(MolError::UnsupportedFeature(_))));
    }
}
