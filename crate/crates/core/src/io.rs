//! Text formats for fans and fan complexes.
//!
//! A fan file has a `dim n` line, `ray i: a1 ... an` lines and
//! `cone: i1 ... ik` lines referring to ray labels. `#` starts a comment.
//! A source fan of a subdivision may also carry `map: s -> t` lines with
//! canonical cone ids of the source and target fans.
//!
//! A complex file is a fan file followed by a `complex` line, then
//! `component <cone>: <degrees>` lines and `map <s> -> <t> sign <±1>`
//! blocks whose indented lines `<row> <col>: <poly>` give the nonzero
//! entries of the raw map.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::complex::FanComplex;
use crate::error::{Error, Result};
use crate::fan::{ConeId, Fan};
use crate::graded::PolyMatrix;
use crate::poly::Poly;

/// A parsed fan file.
#[derive(Clone, Debug)]
pub struct FanFile {
    pub fan: Fan,
    /// Explicit `map:` entries, if any.
    pub map: Vec<(ConeId, ConeId)>,
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn parse_ints<T: std::str::FromStr>(s: &str, line: usize) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|w| w.parse::<T>().map_err(|_| Error::parse(line, format!("expected an integer, found `{w}`"))))
        .collect()
}

pub fn parse_fan(text: &str) -> Result<FanFile> {
    let mut dim: Option<usize> = None;
    let mut rays: BTreeMap<i64, (usize, Vec<i64>)> = BTreeMap::new();
    let mut cones: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut map = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("dim ") {
            if dim.is_some() {
                return Err(Error::parse(ln, "repeated `dim` line"));
            }
            let n = rest.trim().parse().map_err(|_| Error::parse(ln, "dimension must be a nonnegative integer"))?;
            dim = Some(n);
        } else if let Some(rest) = line.strip_prefix("ray ") {
            let (label, coords) = rest.split_once(':').ok_or_else(|| Error::parse(ln, "expected `ray i: a1 ... an`"))?;
            let label: i64 = label.trim().parse().map_err(|_| Error::parse(ln, "ray label must be an integer"))?;
            let coords = parse_ints(coords, ln)?;
            if rays.insert(label, (ln, coords)).is_some() {
                return Err(Error::parse(ln, format!("ray {label} defined twice")));
            }
        } else if let Some(rest) = line.strip_prefix("cone:") {
            cones.push((ln, parse_ints(rest, ln)?));
        } else if let Some(rest) = line.strip_prefix("map:") {
            let (s, t) = rest.split_once("->").ok_or_else(|| Error::parse(ln, "expected `map: s -> t`"))?;
            let s: usize = s.trim().parse().map_err(|_| Error::parse(ln, "source cone id must be an integer"))?;
            let t: usize = t.trim().parse().map_err(|_| Error::parse(ln, "target cone id must be an integer"))?;
            map.push((ConeId(s), ConeId(t)));
        } else {
            return Err(Error::parse(ln, format!("unrecognized line `{line}`")));
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(1, "missing `dim` line"))?;
    let mut index = BTreeMap::new();
    let mut vectors = Vec::new();
    for (label, (ln, coords)) in rays {
        if coords.len() != dim {
            return Err(Error::parse(ln, format!("ray {label} has {} coordinates, expected {dim}", coords.len())));
        }
        index.insert(label, vectors.len());
        vectors.push(coords);
    }
    let mut cone_list = Vec::new();
    for (ln, labels) in cones {
        let ids = labels
            .iter()
            .map(|l| index.get(l).copied().ok_or_else(|| Error::parse(ln, format!("unknown ray {l}"))))
            .collect::<Result<Vec<_>>>()?;
        cone_list.push(ids);
    }
    let fan = Fan::new(dim, vectors, cone_list)?;
    Ok(FanFile { fan, map })
}

pub fn read_fan(path: &std::path::Path) -> Result<FanFile> {
    parse_fan(&std::fs::read_to_string(path)?)
}

/// Canonical text of a complex, fan included.
pub fn write_complex(m: &FanComplex) -> String {
    let mut out = m.fan.to_text();
    out.push_str("complex\n");
    for (c, module) in m.components() {
        let degs: Vec<String> = module.generators.iter().map(i32::to_string).collect();
        out.push_str(&format!("component {c}: {}\n", degs.join(" ")));
    }
    for ((s, t), raw) in m.maps() {
        out.push_str(&format!("map {s} -> {t} sign {:+}\n", m.fan.sign(s, t)));
        for (i, row) in raw.entries.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if !p.is_zero() {
                    out.push_str(&format!("  {i} {j}: {p}\n"));
                }
            }
        }
    }
    out
}

pub fn parse_complex(text: &str) -> Result<FanComplex> {
    let lines: Vec<&str> = text.lines().collect();
    let split = lines
        .iter()
        .position(|l| strip_comment(l) == "complex")
        .ok_or_else(|| Error::parse(lines.len().max(1), "missing `complex` line"))?;
    let fan = Arc::new(parse_fan(&lines[..split].join("\n"))?.fan);
    let mut m = FanComplex::new(fan.clone());

    let cone = |s: &str, ln: usize| -> Result<ConeId> {
        let id: usize = s.trim().parse().map_err(|_| Error::parse(ln, format!("bad cone id `{}`", s.trim())))?;
        if id >= fan.len() {
            return Err(Error::parse(ln, format!("cone {id} is not a cone of the fan")));
        }
        Ok(ConeId(id))
    };

    // (source, target) -> (line, entries)
    let mut maps: Vec<(ConeId, ConeId, usize, Vec<(usize, usize, String, usize)>)> = Vec::new();
    for (i, raw) in lines.iter().enumerate().skip(split + 1) {
        let ln = i + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("component ") {
            let (c, degs) = rest.split_once(':').ok_or_else(|| Error::parse(ln, "expected `component c: degrees`"))?;
            let c = cone(c, ln)?;
            m.set_component(c, parse_ints(degs, ln)?);
        } else if let Some(rest) = line.strip_prefix("map ") {
            let (pair, sign) = rest.split_once("sign").ok_or_else(|| Error::parse(ln, "expected `map s -> t sign ±1`"))?;
            let (s, t) = pair.split_once("->").ok_or_else(|| Error::parse(ln, "expected `map s -> t sign ±1`"))?;
            let (s, t) = (cone(s, ln)?, cone(t, ln)?);
            if !fan.facets(s).contains(&t) {
                return Err(Error::parse(ln, format!("cone {t} is not a facet of cone {s}")));
            }
            let sign: i32 = sign.trim().parse().map_err(|_| Error::parse(ln, "sign must be +1 or -1"))?;
            if sign != fan.sign(s, t) {
                return Err(Error::parse(ln, format!("sign {sign:+} disagrees with the orientation of the fan")));
            }
            maps.push((s, t, ln, Vec::new()));
        } else if raw.starts_with(char::is_whitespace) && !maps.is_empty() {
            let (pos, poly) = line.split_once(':').ok_or_else(|| Error::parse(ln, "expected `row col: poly`"))?;
            let idx: Vec<usize> = parse_ints(pos, ln)?;
            if idx.len() != 2 {
                return Err(Error::parse(ln, "expected `row col: poly`"));
            }
            maps.last_mut().expect("nonempty").3.push((idx[0], idx[1], poly.to_string(), ln));
        } else {
            return Err(Error::parse(ln, format!("unrecognized line `{line}`")));
        }
    }

    for (s, t, ln, entries) in maps {
        let (src, tgt) = (m.component(s), m.component(t));
        let nv = tgt.nvars();
        let mut matrix = vec![vec![Poly::zero(nv); src.rank()]; tgt.rank()];
        for (r, c, poly, eln) in entries {
            if r >= tgt.rank() || c >= src.rank() {
                return Err(Error::parse(eln, format!("entry ({r}, {c}) outside a {}x{} matrix", tgt.rank(), src.rank())));
            }
            matrix[r][c] = Poly::parse(&poly, nv).map_err(|e| Error::parse(eln, e))?;
        }
        let pm = PolyMatrix::new(src, tgt, fan.restriction(s, t), matrix).map_err(|e| Error::parse(ln, e.to_string()))?;
        m.set_map(s, t, pm);
    }
    Ok(m)
}
