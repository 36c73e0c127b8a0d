//! SMILES subset: organic-subset and bracket atoms, bonds `- = # :`, branches,
//! ring closures `0-9` and `%nn`. Stereo marks are accepted and ignored.

use std::collections::BTreeMap;

use log::warn;

use super::element::Element;
use super::graph::{Atom, Bond, BondOrder, MolGraph};
use super::{MolError, Result};

#[derive(Debug, Clone)]
struct RawAtom {
    element: Element,
    aromatic: bool,
    charge: i32,
    /// `Some` for bracket atoms, which carry their hydrogen count explicitly.
    bracket_h: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
struct RawBond {
    a: usize,
    b: usize,
    symbol: Option<char>,
}

fn syntax(pos: usize, msg: impl Into<String>) -> MolError {
    MolError::Syntax {
        pos,
        msg: msg.into(),
    }
}

/// Parses a SMILES string into a heavy-atom graph with implicit hydrogens.
///
/// Lowercase ring atoms are aromatic as written; Kekulé rings are aromatized
/// when every ring atom contributes to a `4n + 2` pi system.
pub fn parse_smiles(text: &str) -> Result<MolGraph> {
    let text = text.trim();
    if text.is_empty() {
        return Err(syntax(0, "empty SMILES"));
    }
    if !text.is_ascii() {
        return Err(syntax(0, "non-ASCII input"));
    }
    let (atoms, bonds) = tokenize(text)?;
    build_graph(text, atoms, bonds)
}

fn tokenize(text: &str) -> Result<(Vec<RawAtom>, Vec<RawBond>)> {
    let s = text.as_bytes();
    let mut atoms: Vec<RawAtom> = Vec::new();
    let mut bonds: Vec<RawBond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(char, usize)> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut open_rings: BTreeMap<u32, (usize, Option<char>, usize)> = BTreeMap::new();
    let mut warned_stereo = false;
    let mut i = 0;

    let add_bond = |bonds: &mut Vec<RawBond>, a: usize, b: usize, symbol: Option<char>, pos: usize| {
        if a == b || bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a)) {
            return Err(syntax(pos, "ring closure duplicates an existing bond"));
        }
        bonds.push(RawBond { a, b, symbol });
        Ok(())
    };

    while i < s.len() {
        let c = s[i] as char;
        match c {
            '(' => {
                let p = prev.ok_or_else(|| syntax(i, "branch opened before any atom"))?;
                if pending.is_some() {
                    return Err(syntax(i, "bond symbol before '('"));
                }
                branches.push((p, i));
                i += 1;
            }
            ')' => {
                let (p, _) = branches.pop().ok_or_else(|| syntax(i, "unbalanced ')'"))?;
                if pending.is_some() {
                    return Err(syntax(i, "dangling bond before ')'"));
                }
                prev = Some(p);
                i += 1;
            }
            '-' | '=' | '#' | ':' | '/' | '\\' => {
                if pending.is_some() {
                    return Err(syntax(i, "two consecutive bond symbols"));
                }
                if prev.is_none() {
                    return Err(syntax(i, "bond symbol before any atom"));
                }
                let sym = if c == '/' || c == '\\' {
                    if !warned_stereo {
                        warn!("ignoring stereo bond marks in {text}");
                        warned_stereo = true;
                    }
                    '-'
                } else {
                    c
                };
                pending = Some((sym, i));
                i += 1;
            }
            '$' => return Err(MolError::UnsupportedFeature("quadruple bonds".into())),
            '.' => {
                return Err(MolError::UnsupportedFeature(
                    "multi-component SMILES ('.')".into(),
                ))
            }
            '*' => return Err(MolError::UnsupportedFeature("wildcard atom '*'".into())),
            '0'..='9' | '%' => {
                let start = i;
                let label = if c == '%' {
                    if i + 2 >= s.len() || !s[i + 1].is_ascii_digit() || !s[i + 2].is_ascii_digit() {
                        return Err(syntax(i, "'%' must be followed by two digits"));
                    }
                    i += 3;
                    ((s[i - 2] - b'0') * 10 + (s[i - 1] - b'0')) as u32
                } else {
                    i += 1;
                    (s[start] - b'0') as u32
                };
                let cur = prev.ok_or_else(|| syntax(start, "ring closure before any atom"))?;
                let sym = pending.take().map(|(c, _)| c);
                match open_rings.remove(&label) {
                    Some((other, open_sym, _)) => {
                        let symbol = match (open_sym, sym) {
                            (Some(x), Some(y)) if x != y => {
                                return Err(syntax(start, "conflicting ring-closure bond symbols"))
                            }
                            (x, y) => x.or(y),
                        };
                        add_bond(&mut bonds, other, cur, symbol, start)?;
                    }
                    None => {
                        open_rings.insert(label, (cur, sym, start));
                    }
                }
            }
            '[' => {
                let (atom, next) = parse_bracket(s, i, text, &mut warned_stereo)?;
                let idx = atoms.len();
                atoms.push(atom);
                if let Some(p) = prev {
                    let sym = pending.take().map(|(c, _)| c);
                    add_bond(&mut bonds, p, idx, sym, i)?;
                }
                prev = Some(idx);
                i = next;
            }
            _ if c.is_ascii_alphabetic() => {
                let (element, aromatic, len) = organic_atom(s, i)?;
                let idx = atoms.len();
                atoms.push(RawAtom {
                    element,
                    aromatic,
                    charge: 0,
                    bracket_h: None,
                });
                if let Some(p) = prev {
                    let sym = pending.take().map(|(c, _)| c);
                    add_bond(&mut bonds, p, idx, sym, i)?;
                }
                prev = Some(idx);
                i += len;
            }
            '@' => return Err(syntax(i, "chirality mark outside bracket atom")),
            _ => return Err(syntax(i, format!("unexpected character '{c}'"))),
        }
    }
    if let Some((_, pos)) = pending {
        return Err(syntax(pos, "dangling bond at end of input"));
    }
    if let Some((_, pos)) = branches.last() {
        return Err(syntax(*pos, "unbalanced '('"));
    }
    if let Some((label, (_, _, pos))) = open_rings.iter().next() {
        return Err(syntax(*pos, format!("unclosed ring bond {label}")));
    }
    if atoms.is_empty() {
        return Err(syntax(0, "no atoms"));
    }
    Ok((atoms, bonds))
}

fn organic_atom(s: &[u8], i: usize) -> Result<(Element, bool, usize)> {
    let c = s[i] as char;
    let next = s.get(i + 1).map(|&b| b as char);
    Ok(match (c, next) {
        ('C', Some('l')) => (Element::Cl, false, 2),
        ('B', Some('r')) => (Element::Br, false, 2),
        ('B', _) => (Element::B, false, 1),
        ('C', _) => (Element::C, false, 1),
        ('N', _) => (Element::N, false, 1),
        ('O', _) => (Element::O, false, 1),
        ('P', _) => (Element::P, false, 1),
        ('S', _) => (Element::S, false, 1),
        ('F', _) => (Element::F, false, 1),
        ('I', _) => (Element::I, false, 1),
        ('b', _) => (Element::B, true, 1),
        ('c', _) => (Element::C, true, 1),
        ('n', _) => (Element::N, true, 1),
        ('o', _) => (Element::O, true, 1),
        ('p', _) => (Element::P, true, 1),
        ('s', _) => (Element::S, true, 1),
        _ => {
            return Err(MolError::UnsupportedFeature(format!(
                "atom '{c}' outside the organic subset must be bracketed"
            )))
        }
    })
}

fn parse_bracket(s: &[u8], start: usize, text: &str, warned: &mut bool) -> Result<(RawAtom, usize)> {
    let mut i = start + 1;
    let peek = |i: usize| s.get(i).map(|&b| b as char);
    if peek(i).is_some_and(|c| c.is_ascii_digit()) {
        return Err(MolError::UnsupportedFeature("isotope labels".into()));
    }
    let first = peek(i).ok_or_else(|| syntax(i, "unterminated bracket atom"))?;
    let (element, aromatic) = if first.is_ascii_uppercase() {
        let two = peek(i + 1).filter(|c| c.is_ascii_lowercase());
        match two {
            Some(second) => {
                let sym: String = [first, second].iter().collect();
                match Element::from_symbol(&sym) {
                    Some(e) => {
                        i += 2;
                        (e, false)
                    }
                    None => {
                        return Err(MolError::UnsupportedFeature(format!("element {sym}")));
                    }
                }
            }
            None => {
                let sym = first.to_string();
                let e = Element::from_symbol(&sym)
                    .ok_or_else(|| MolError::UnsupportedFeature(format!("element {sym}")))?;
                i += 1;
                (e, false)
            }
        }
    } else if first == '*' {
        return Err(MolError::UnsupportedFeature("wildcard atom '*'".into()));
    } else {
        let e = match first {
            'b' => Element::B,
            'c' => Element::C,
            'n' => Element::N,
            'o' => Element::O,
            'p' => Element::P,
            's' => Element::S,
            _ => return Err(MolError::UnsupportedFeature(format!("aromatic atom '{first}'"))),
        };
        i += 1;
        (e, true)
    };
    if peek(i) == Some('@') {
        if !*warned {
            warn!("ignoring chirality marks in {text}");
            *warned = true;
        }
        while peek(i) == Some('@') {
            i += 1;
        }
        for tag in ["TH", "AL", "SP", "TB", "OH"] {
            if s[i..].starts_with(tag.as_bytes()) {
                i += 2;
                while peek(i).is_some_and(|c| c.is_ascii_digit()) {
                    i += 1;
                }
            }
        }
    }
    let mut h = 0;
    if peek(i) == Some('H') {
        i += 1;
        h = 1;
        if let Some(d) = peek(i).and_then(|c| c.to_digit(10)) {
            h = d;
            i += 1;
        }
    }
    let mut charge = 0i32;
    if let Some(sign @ ('+' | '-')) = peek(i) {
        let unit = if sign == '+' { 1 } else { -1 };
        i += 1;
        if let Some(d) = peek(i).and_then(|c| c.to_digit(10)) {
            charge = unit * d as i32;
            i += 1;
        } else {
            charge = unit;
            while peek(i) == Some(sign) {
                charge += unit;
                i += 1;
            }
        }
    }
    if peek(i) == Some(':') {
        warn!("ignoring atom class in {text}");
        i += 1;
        while peek(i).is_some_and(|c| c.is_ascii_digit()) {
            i += 1;
        }
    }
    if peek(i) != Some(']') {
        return Err(syntax(i, "expected ']'"));
    }
    Ok((
        RawAtom {
            element,
            aromatic,
            charge,
            bracket_h: Some(h),
        },
        i + 1,
    ))
}

/// Hydrogen count filling the smallest standard valence at or above `used`.
///
/// Aromatic B, C, N and P receive one extra bond for their share of the pi
/// system when a higher valence allows it; aromatic O and S donate a lone
/// pair instead.
pub(crate) fn default_h_count(element: Element, charge: i32, aromatic: bool, used: u32) -> Option<u32> {
    let valences = element.valences(charge);
    let mut used = used;
    if aromatic
        && matches!(element, Element::B | Element::C | Element::N | Element::P)
        && valences.iter().any(|&v| v > used)
    {
        used += 1;
    }
    valences.iter().find(|&&v| v >= used).map(|&v| v - used)
}

fn build_graph(text: &str, raw: Vec<RawAtom>, raw_bonds: Vec<RawBond>) -> Result<MolGraph> {
    let order_of = |b: &RawBond| -> BondOrder {
        match b.symbol {
            Some('=') => BondOrder::Double,
            Some('#') => BondOrder::Triple,
            Some(':') => BondOrder::Aromatic,
            Some(_) => BondOrder::Single,
            None if raw[b.a].aromatic && raw[b.b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        }
    };
    let orders: Vec<BondOrder> = raw_bonds.iter().map(order_of).collect();

    let mut used = vec![0u32; raw.len()];
    for (b, o) in raw_bonds.iter().zip(&orders) {
        used[b.a] += o.valence();
        used[b.b] += o.valence();
    }
    let mut h_counts = Vec::with_capacity(raw.len());
    for (i, a) in raw.iter().enumerate() {
        let h = match a.bracket_h {
            Some(h) => h,
            None => default_h_count(a.element, a.charge, a.aromatic, used[i]).ok_or(MolError::Valence {
                atom: i,
                element: a.element.symbol(),
                valence: used[i],
            })?,
        };
        h_counts.push(h);
    }

    // fold explicit [H] atoms into their neighbor's count
    let mut keep = vec![true; raw.len()];
    for (i, a) in raw.iter().enumerate() {
        if a.element != Element::H {
            continue;
        }
        let incident: Vec<usize> = (0..raw_bonds.len())
            .filter(|&k| raw_bonds[k].a == i || raw_bonds[k].b == i)
            .collect();
        let heavy = match incident.as_slice() {
            [k] if orders[*k] == BondOrder::Single && a.charge == 0 && h_counts[i] == 0 => {
                let other = if raw_bonds[*k].a == i { raw_bonds[*k].b } else { raw_bonds[*k].a };
                (raw[other].element != Element::H).then_some(other)
            }
            _ => None,
        };
        let heavy = heavy.ok_or_else(|| {
            MolError::UnsupportedFeature("hydrogen atom not attached to exactly one heavy atom".into())
        })?;
        keep[i] = false;
        h_counts[heavy] += 1;
    }
    let mut new_index = vec![usize::MAX; raw.len()];
    let mut atoms = Vec::new();
    for (i, a) in raw.iter().enumerate() {
        if keep[i] {
            new_index[i] = atoms.len();
            atoms.push(Atom {
                element: a.element,
                formal_charge: a.charge,
                aromatic: a.aromatic,
                h_count: h_counts[i],
                degree: 0,
            });
        }
    }
    let mut bonds: Vec<Bond> = raw_bonds
        .iter()
        .zip(&orders)
        .filter(|(b, _)| keep[b.a] && keep[b.b])
        .map(|(b, &o)| Bond::new(new_index[b.a], new_index[b.b], o))
        .collect();

    let graph = MolGraph::new(text, atoms.clone(), bonds.clone())?;
    for (i, a) in atoms.iter().enumerate() {
        if a.aromatic && !graph.is_ring_atom(i) {
            return Err(syntax(0, format!("aromatic atom {i} is not in a ring")));
        }
    }
    for (bi, b) in bonds.iter_mut().enumerate() {
        if b.order == BondOrder::Aromatic && !graph.is_ring_bond(bi) {
            b.order = BondOrder::Single;
        }
    }
    let graph = MolGraph::new(text, atoms, bonds)?;
    Ok(aromatize(graph))
}

/// Marks rings aromatic when each ring atom is sp2-like and the ring holds
/// `4n + 2` pi electrons.
pub(crate) fn aromatize(graph: MolGraph) -> MolGraph {
    let mut atoms = graph.atoms().to_vec();
    let mut bonds = graph.bonds().to_vec();
    let mut changed = false;
    for ring in graph.rings() {
        if ring.atoms.iter().all(|&a| atoms[a].aromatic)
            && ring.bonds.iter().all(|&b| bonds[b].order == BondOrder::Aromatic)
        {
            continue;
        }
        let mut electrons = 0u32;
        let mut ok = true;
        for &a in &ring.atoms {
            let atom = &graph.atoms()[a];
            let mut in_ring_double = false;
            let mut exo_double_hetero = false;
            let mut exo_double_carbon = false;
            for &(nb, bi) in graph.neighbors(a) {
                let o = graph.bonds()[bi].order;
                if o == BondOrder::Double || o == BondOrder::Aromatic {
                    if ring.bonds.contains(&bi) {
                        in_ring_double = true;
                    } else if o == BondOrder::Double {
                        if graph.atoms()[nb].element.is_hetero() {
                            exo_double_hetero = true;
                        } else {
                            exo_double_carbon = true;
                        }
                    }
                }
            }
            let contribution = if in_ring_double || atom.aromatic {
                Some(1)
            } else if exo_double_carbon {
                None
            } else if exo_double_hetero {
                Some(0)
            } else {
                match (atom.element, atom.formal_charge) {
                    (Element::N, 0) if atom.degree + atom.h_count == 3 => Some(2),
                    (Element::O | Element::S, 0) if atom.degree == 2 => Some(2),
                    (Element::C, -1) => Some(2),
                    _ => None,
                }
            };
            match contribution {
                Some(e) => electrons += e,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && electrons % 4 == 2 {
            changed = true;
            for &a in &ring.atoms {
                atoms[a].aromatic = true;
            }
            for &b in &ring.bonds {
                bonds[b].order = BondOrder::Aromatic;
            }
        }
    }
    if !changed {
        return graph;
    }
    MolGraph::new(graph.name.clone(), atoms, bonds).expect("aromatization preserves validity")
}

/// Writes a (non-canonical) SMILES string by depth-first traversal from atom 0.
pub fn to_smiles(graph: &MolGraph) -> String {
    let n = graph.atom_count();
    // pass 1: classify bonds into tree edges and ring closures
    let mut visited = vec![false; n];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closures_open: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut closures_close: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut is_closure = vec![false; graph.bonds().len()];
    let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(0, None, 0)];
    visited[0] = true;
    while let Some((u, parent_bond, k)) = stack.pop() {
        let nbrs = graph.neighbors(u);
        if k >= nbrs.len() {
            continue;
        }
        stack.push((u, parent_bond, k + 1));
        let (v, b) = nbrs[k];
        if Some(b) == parent_bond || is_closure[b] {
            continue;
        }
        if visited[v] {
            is_closure[b] = true;
            closures_open[v].push(b);
            closures_close[u].push(b);
        } else {
            visited[v] = true;
            children[u].push((v, b));
            stack.push((v, Some(b), 0));
        }
    }

    // pass 2: emit
    let mut out = String::new();
    let mut digit_of: Vec<Option<u32>> = vec![None; graph.bonds().len()];
    let mut free_digits: Vec<u32> = (1..100).rev().collect();
    enum Step {
        Atom(usize, Option<usize>),
        Text(&'static str),
    }
    let mut work = vec![Step::Atom(0, None)];
    while let Some(step) = work.pop() {
        let (u, via) = match step {
            Step::Text(t) => {
                out.push_str(t);
                continue;
            }
            Step::Atom(u, via) => (u, via),
        };
        if let Some(b) = via {
            out.push_str(bond_symbol(graph, b));
        }
        out.push_str(&atom_token(graph, u));
        for &b in &closures_close[u] {
            let d = digit_of[b].take().expect("closure opened before it closes");
            out.push_str(bond_symbol(graph, b));
            push_digit(&mut out, d);
            free_digits.push(d);
            free_digits.sort_unstable_by(|a, b| b.cmp(a));
        }
        for &b in &closures_open[u] {
            let d = free_digits.pop().expect("fewer than 100 open rings");
            digit_of[b] = Some(d);
            push_digit(&mut out, d);
        }
        let kids = &children[u];
        for (idx, &(v, b)) in kids.iter().enumerate().rev() {
            if idx + 1 == kids.len() {
                work.push(Step::Atom(v, Some(b)));
            } else {
                work.push(Step::Text(")"));
                work.push(Step::Atom(v, Some(b)));
                work.push(Step::Text("("));
            }
        }
    }
    out
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        out.push_str(&d.to_string());
    } else {
        out.push_str(&format!("%{d:02}"));
    }
}

fn bond_symbol(graph: &MolGraph, b: usize) -> &'static str {
    let bond = graph.bonds()[b];
    let both_aromatic = graph.atoms()[bond.begin].aromatic && graph.atoms()[bond.end].aromatic;
    match bond.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn atom_token(graph: &MolGraph, i: usize) -> String {
    let atom = &graph.atoms()[i];
    let used: u32 = graph
        .neighbors(i)
        .iter()
        .map(|&(_, b)| graph.bonds()[b].order.valence())
        .sum();
    let sym = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    let organic = !matches!(atom.element, Element::H);
    if organic
        && atom.formal_charge == 0
        && default_h_count(atom.element, 0, atom.aromatic, used) == Some(atom.h_count)
    {
        return sym;
    }
    let mut t = format!("[{sym}");
    match atom.h_count {
        0 => {}
        1 => t.push('H'),
        h => t.push_str(&format!("H{h}")),
    }
    match atom.formal_charge {
        0 => {}
        1 => t.push('+'),
        -1 => t.push('-'),
        c if c > 0 => t.push_str(&format!("+{c}")),
        c => t.push_str(&format!("-{}", -c)),
    }
    t.push(']');
    t
}
