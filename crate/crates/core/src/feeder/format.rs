//! Plain-text feeder format.
//!
//! ```text
//! [meta]
//! name = ieee37
//! v_nominal_kv = 4.8        # line-to-line
//! s_base_kva = 1000
//! source = 799
//! source_pu = 1.0           # optional, defaults to 1.0
//!
//! [nodes]
//! id, phases
//! 799, abc
//!
//! [branches]
//! from, to, z_aa_ohm, z_ab_ohm, z_ac_ohm, z_ba_ohm, z_bb_ohm, z_bc_ohm, z_ca_ohm, z_cb_ohm, z_cc_ohm
//! 799, 701, 0.1026+j0.0692, ...
//!
//! [loads]
//! node, phase, p_kw, q_kvar
//! 701, a, 140, 70
//! ```
//!
//! `#` starts a comment. The first row of every table section is the
//! column header and must match the layout above.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{FeederSpec, NetworkModel, Phase, PhaseImpedanceMatrix, PhaseSet};
use crate::error::{Error, Result};

const NODE_HEADER: [&str; 2] = ["id", "phases"];
const BRANCH_HEADER: [&str; 11] = [
    "from", "to", "z_aa_ohm", "z_ab_ohm", "z_ac_ohm", "z_ba_ohm", "z_bb_ohm", "z_bc_ohm",
    "z_ca_ohm", "z_cb_ohm", "z_cc_ohm",
];
const LOAD_HEADER: [&str; 4] = ["node", "phase", "p_kw", "q_kvar"];

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Meta,
    Nodes,
    Branches,
    Loads,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, field: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| perr(line, format!("field {field}: cannot parse '{s}' as a number")))?;
    if !v.is_finite() {
        return Err(perr(line, format!("field {field}: non-finite value")));
    }
    Ok(v)
}

/// Parses `r+jx`, `r-jx` or a bare real number.
pub(crate) fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    let Some(j) = s.find('j') else {
        return s.parse().ok().map(|re| Complex64::new(re, 0.0));
    };
    let (re_part, im_part) = s.split_at(j);
    let im_part = &im_part[1..];
    let (re_str, sign) = match re_part.strip_suffix('+') {
        Some(r) => (r, 1.0),
        None => (re_part.strip_suffix('-')?, -1.0),
    };
    let re: f64 = re_str.trim().parse().ok()?;
    let im: f64 = im_part.trim().parse().ok()?;
    (re.is_finite() && im.is_finite()).then(|| Complex64::new(re, sign * im))
}

fn format_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() && z.im != 0.0 {
        format!("{}-j{}", z.re, -z.im)
    } else {
        format!("{}+j{}", z.re, z.im.abs())
    }
}

fn check_header(line: usize, fields: &[&str], expected: &[&str]) -> Result<()> {
    if fields.len() != expected.len() || fields.iter().zip(expected).any(|(a, b)| !a.eq_ignore_ascii_case(b)) {
        return Err(perr(
            line,
            format!("expected header '{}', found '{}'", expected.join(", "), fields.join(", ")),
        ));
    }
    Ok(())
}

pub fn parse_feeder(content: &str) -> Result<FeederSpec> {
    let mut spec = FeederSpec {
        source_pu: 1.0,
        ..FeederSpec::default()
    };
    let mut have = (false, false, false, false); // name, kv, base, source
    let mut section = Section::None;
    let mut header_seen = false;

    for (i, raw) in content.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[meta]" => Section::Meta,
                "[nodes]" => Section::Nodes,
                "[branches]" => Section::Branches,
                "[loads]" => Section::Loads,
                other => return Err(perr(ln, format!("unknown section {other}"))),
            };
            header_seen = false;
            continue;
        }
        match section {
            Section::None => return Err(perr(ln, "content before the first section")),
            Section::Meta => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| perr(ln, "expected key = value"))?;
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "name" => {
                        spec.name = value.to_string();
                        have.0 = true;
                    }
                    "v_nominal_kv" => {
                        spec.v_nominal_kv = parse_f64(ln, key, value)?;
                        have.1 = true;
                    }
                    "s_base_kva" => {
                        spec.s_base_kva = parse_f64(ln, key, value)?;
                        have.2 = true;
                    }
                    "source" => {
                        spec.source = value.to_string();
                        have.3 = true;
                    }
                    "source_pu" => spec.source_pu = parse_f64(ln, key, value)?,
                    other => return Err(perr(ln, format!("unknown meta key {other}"))),
                }
            }
            Section::Nodes | Section::Branches | Section::Loads => {
                let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                if !header_seen {
                    let expected: &[&str] = match section {
                        Section::Nodes => &NODE_HEADER,
                        Section::Branches => &BRANCH_HEADER,
                        _ => &LOAD_HEADER,
                    };
                    check_header(ln, &fields, expected)?;
                    header_seen = true;
                    continue;
                }
                match section {
                    Section::Nodes => {
                        if fields.len() != 2 {
                            return Err(perr(ln, format!("node row needs 2 fields, found {}", fields.len())));
                        }
                        let phases = PhaseSet::parse(fields[1])
                            .ok_or_else(|| perr(ln, format!("field phases: invalid phase set '{}'", fields[1])))?;
                        spec.nodes.push((fields[0].to_string(), phases));
                    }
                    Section::Branches => {
                        if fields.len() != 11 {
                            return Err(perr(ln, format!("branch row needs 11 fields, found {}", fields.len())));
                        }
                        let mut z = PhaseImpedanceMatrix::zero();
                        for (k, f) in fields[2..].iter().enumerate() {
                            z.0[k / 3][k % 3] = parse_complex(f).ok_or_else(|| {
                                perr(ln, format!("field {}: cannot parse '{f}' as r+jx", BRANCH_HEADER[k + 2]))
                            })?;
                        }
                        spec.branches.push((fields[0].to_string(), fields[1].to_string(), z));
                    }
                    _ => {
                        if fields.len() != 4 {
                            return Err(perr(ln, format!("load row needs 4 fields, found {}", fields.len())));
                        }
                        let mut chars = fields[1].chars();
                        let phase = match (chars.next(), chars.next()) {
                            (Some(c), None) => Phase::from_char(c),
                            _ => None,
                        }
                        .ok_or_else(|| perr(ln, format!("field phase: invalid phase '{}'", fields[1])))?;
                        spec.loads.push((
                            fields[0].to_string(),
                            phase,
                            parse_f64(ln, "p_kw", fields[2])?,
                            parse_f64(ln, "q_kvar", fields[3])?,
                        ));
                    }
                }
            }
        }
    }
    let missing = [
        (have.0, "name"),
        (have.1, "v_nominal_kv"),
        (have.2, "s_base_kva"),
        (have.3, "source"),
    ];
    if let Some((_, key)) = missing.iter().find(|(ok, _)| !ok) {
        return Err(perr(0, format!("missing meta key {key}")));
    }
    Ok(spec)
}

/// Serialise a feeder in the text format. Parsing the output yields an
/// identical model.
pub fn write_feeder(net: &NetworkModel, header_comment: Option<&str>) -> String {
    let spec = net.to_spec();
    let mut out = String::new();
    if let Some(comment) = header_comment {
        for l in comment.lines() {
            let _ = writeln!(out, "# {l}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "[meta]");
    let _ = writeln!(out, "name = {}", spec.name);
    let _ = writeln!(out, "v_nominal_kv = {}", spec.v_nominal_kv);
    let _ = writeln!(out, "s_base_kva = {}", spec.s_base_kva);
    let _ = writeln!(out, "source = {}", spec.source);
    let _ = writeln!(out, "source_pu = {}", spec.source_pu);
    let _ = writeln!(out, "\n[nodes]\n{}", NODE_HEADER.join(", "));
    for (id, phases) in &spec.nodes {
        let _ = writeln!(out, "{id}, {phases}");
    }
    let _ = writeln!(out, "\n[branches]\n{}", BRANCH_HEADER.join(", "));
    for (f, t, z) in &spec.branches {
        let entries: Vec<String> = z.0.iter().flatten().map(|c| format_complex(*c)).collect();
        let _ = writeln!(out, "{f}, {t}, {}", entries.join(", "));
    }
    let _ = writeln!(out, "\n[loads]\n{}", LOAD_HEADER.join(", "));
    for (node, phase, p, q) in &spec.loads {
        let _ = writeln!(out, "{node}, {phase}, {p}, {q}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feeder::load_feeder;

    const SMALL: &str = "\
[meta]
name = small
v_nominal_kv = 4.16
s_base_kva = 1000
source = 0

[nodes]
id, phases
0, abc
1, abc
2, a   # single-phase lateral

[branches]
from, to, z_aa_ohm, z_ab_ohm, z_ac_ohm, z_ba_ohm, z_bb_ohm, z_bc_ohm, z_ca_ohm, z_cb_ohm, z_cc_ohm
0, 1, 0.1+j0.2, 0.01+j0.05, 0+j0, 0.01+j0.05, 0.1+j0.2, 0, 0, 0, 0.1+j0.2
1, 2, 0.3+j0.3, 0, 0, 0, 0, 0, 0, 0, 0

[loads]
node, phase, p_kw, q_kvar
2, a, 10, 5
1, b, 20, -3
";

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5+j0.25"), Some(Complex64::new(0.5, 0.25)));
        assert_eq!(parse_complex("0.0673-j0.0368"), Some(Complex64::new(0.0673, -0.0368)));
        assert_eq!(parse_complex("-1e-3+j2"), Some(Complex64::new(-1e-3, 2.0)));
        assert_eq!(parse_complex("3"), Some(Complex64::new(3.0, 0.0)));
        assert_eq!(parse_complex("1+x2"), None);
        assert_eq!(parse_complex("j2"), None);
    }

    #[test]
    fn parses_small_feeder() {
        let net = load_feeder(SMALL).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(net.name(), "small");
        assert_eq!(net.source_pu(), 1.0);
        let two = net.index_of("2").unwrap();
        assert_eq!(net.phases(two), PhaseSet::single(Phase::A));
        assert_eq!(net.load(two)[0], Complex64::new(10.0, 5.0));
        assert_eq!(net.total_demand_kw(), 30.0);
    }

    #[test]
    fn writer_round_trips() {
        let net = load_feeder(SMALL).unwrap();
        let text = write_feeder(&net, Some("round trip"));
        let again = load_feeder(&text).unwrap();
        assert_eq!(write_feeder(&again, Some("round trip")), text);
        assert_eq!(again.branches(), net.branches());
    }

    #[test]
    fn reports_line_of_bad_field() {
        let bad = SMALL.replace("0.3+j0.3", "0.3+k0.3");
        match parse_feeder(&bad) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 16);
                assert!(msg.contains("z_aa_ohm"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_wrong_header() {
        let bad = SMALL.replace("node, phase, p_kw, q_kvar", "node, phase, p, q");
        assert!(matches!(parse_feeder(&bad), Err(Error::Parse { line: 19, .. })));
    }

    #[test]
    fn missing_meta_is_an_error() {
        let bad = SMALL.replace("source = 0\n", "");
        assert!(matches!(parse_feeder(&bad), Err(Error::Parse { .. })));
    }
}
