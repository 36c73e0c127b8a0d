use std::fmt::Write as _;

/// One line of a SMILES list file: `SMILES<TAB>name`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesEntry {
    pub smiles: String,
    pub name: String,
    pub line: usize,
}

/// Reads `SMILES<TAB>name` lines; `#` starts a comment line and blank lines
/// are skipped. Lines without a tab are split on the first run of
/// whitespace; a missing name becomes `mol<line>`.
pub fn read_smiles_file(text: &str) -> Vec<SmilesEntry> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (smiles, name) = match line.split_once('\t') {
            Some((s, n)) => (s.trim(), n.trim()),
            None => {
                let t = line.trim();
                match t.split_once(char::is_whitespace) {
                    Some((s, n)) => (s, n.trim()),
                    None => (t, ""),
                }
            }
        };
        let name = if name.is_empty() {
            format!("mol{line_no}")
        } else {
            name.to_string()
        };
        out.push(SmilesEntry {
            smiles: smiles.to_string(),
            name,
            line: line_no,
        });
    }
    out
}

pub fn write_smiles_file<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut s = String::new();
    for (smiles, name) in entries {
        let _ = writeln!(s, "{smiles}\t{name}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines() {
        let text = "# header\nCCO\tethanol\n\nc1ccccc1 benzene\nC\n";
        let e = read_smiles_file(text);
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].name, "ethanol");
        assert_eq!(e[1].smiles, "c1ccccc1");
        assert_eq!(e[1].name, "benzene");
        assert_eq!(e[2].name, "mol5");
        let back = read_smiles_file(&write_smiles_file(e.iter().map(|x| (x.smiles.as_str(), x.name.as_str()))));
        assert_eq!(back.len(), 3);
        assert_eq!(back[2].name, "mol5");
    }
}
