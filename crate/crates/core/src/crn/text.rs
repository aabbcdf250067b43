//! Line-oriented CRN text format.
//!
//! ```text
//! # comment
//! input 1 X1+ X1-
//! output 1 H3,1+ H3,1-
//! init I2,1+ 0.5
//! rxn: X1+ -> I2,1+ + I2,2- @ 1
//! rxn: M2,1 + I2,1- -> 2*H3,1- @ 1
//! ```
//!
//! Reactant multiplicity is written by repetition (`A + A`), product
//! multiplicity with an `n*` prefix; an empty product list is `0`.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use super::{Crn, CrnError, DualRailPair, Multiset, Reaction, Species};

pub(super) fn write_reaction(f: &mut impl fmt::Write, r: &Reaction) -> fmt::Result {
    let mut first = true;
    for (s, n) in r.reactants.iter() {
        for _ in 0..n {
            if !first {
                f.write_str(" + ")?;
            }
            write!(f, "{s}")?;
            first = false;
        }
    }
    f.write_str(" -> ")?;
    if r.products.is_empty() {
        f.write_str("0")?;
    }
    for (i, (s, n)) in r.products.iter().enumerate() {
        if i > 0 {
            f.write_str(" + ")?;
        }
        if n > 1 {
            write!(f, "{n}*")?;
        }
        write!(f, "{s}")?;
    }
    write!(f, " @ {}", r.rate)
}

pub(super) fn print(crn: &Crn) -> String {
    let mut out = String::new();
    for (i, p) in crn.inputs.iter().enumerate() {
        let _ = writeln!(out, "input {} {} {}", i + 1, p.plus, p.minus);
    }
    for (j, p) in crn.outputs.iter().enumerate() {
        let _ = writeln!(out, "output {} {} {}", j + 1, p.plus, p.minus);
    }
    for (s, v) in &crn.init {
        // + 0.0 turns -0 into 0
        let _ = writeln!(out, "init {s} {}", v + 0.0);
    }
    for r in &crn.reactions {
        out.push_str("rxn: ");
        let _ = write_reaction(&mut out, r);
        out.push('\n');
    }
    out
}

fn species(tok: &str, line: usize) -> Result<Species, CrnError> {
    tok.parse().map_err(|e: CrnError| CrnError::Parse {
        line,
        detail: e.to_string(),
    })
}

fn side(text: &str, line: usize, allow_empty: bool) -> Result<Multiset, CrnError> {
    let text = text.trim();
    let mut m = Multiset::new();
    if allow_empty && text == "0" {
        return Ok(m);
    }
    for term in text.split(" + ") {
        let term = term.trim();
        let (n, name) = match term.split_once('*') {
            Some((n, name)) => {
                let n: u32 = n.trim().parse().map_err(|_| CrnError::Parse {
                    line,
                    detail: format!("bad multiplicity in {term:?}"),
                })?;
                if n == 0 {
                    return Err(CrnError::Parse {
                        line,
                        detail: format!("zero multiplicity in {term:?}"),
                    });
                }
                (n, name.trim())
            }
            None => (1, term),
        };
        m.add(species(name, line)?, n);
    }
    Ok(m)
}

fn parse_reaction(body: &str, line: usize) -> Result<Reaction, CrnError> {
    let err = |detail: &str| CrnError::Parse {
        line,
        detail: detail.to_string(),
    };
    let (lhs, rest) = body.split_once("->").ok_or_else(|| err("missing '->'"))?;
    let (rhs, k) = rest.split_once('@').ok_or_else(|| err("missing '@ <rate>'"))?;
    let rate: f64 = k
        .trim()
        .parse()
        .map_err(|_| err(&format!("bad rate constant {:?}", k.trim())))?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(err(&format!("rate constant {rate} must be positive")));
    }
    let reactants = side(lhs, line, false)?;
    let products = side(rhs, line, true)?;
    Ok(Reaction::new(reactants, products, rate))
}

fn parse_pair(
    rest: &[&str],
    line: usize,
    slots: &mut Vec<Option<DualRailPair>>,
) -> Result<(), CrnError> {
    let err = |detail: String| CrnError::Parse { line, detail };
    let [idx, plus, minus] = rest else {
        return Err(err("expected '<index> <S+> <S->'".into()));
    };
    let idx: usize = idx
        .parse()
        .ok()
        .filter(|&i| i >= 1)
        .ok_or_else(|| err(format!("bad index {idx:?}")))?;
    let pair = DualRailPair {
        plus: species(plus, line)?,
        minus: species(minus, line)?,
    };
    pair.check().map_err(|e| err(e.to_string()))?;
    if slots.len() < idx {
        slots.resize(idx, None);
    }
    if slots[idx - 1].replace(pair).is_some() {
        return Err(err(format!("index {idx} declared twice")));
    }
    Ok(())
}

fn collect_pairs(
    slots: Vec<Option<DualRailPair>>,
    what: &str,
) -> Result<Vec<DualRailPair>, CrnError> {
    slots
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| CrnError::Pair(format!("{what} index {} is missing", i + 1)))
        })
        .collect()
}

pub(super) fn parse(src: &str) -> Result<Crn, CrnError> {
    let mut crn = Crn::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut seen_init = BTreeSet::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if let Some(body) = text.strip_prefix("rxn:") {
            crn.reactions.push(parse_reaction(body, line)?);
            continue;
        }
        let toks: Vec<&str> = text.split_whitespace().collect();
        match toks.as_slice() {
            ["init", name, value] => {
                let s = species(name, line)?;
                let v: f64 = value.parse().map_err(|_| CrnError::Parse {
                    line,
                    detail: format!("bad concentration {value:?}"),
                })?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(CrnError::Parse {
                        line,
                        detail: format!("concentration {v} is negative or not finite"),
                    });
                }
                if !seen_init.insert(s.clone()) {
                    return Err(CrnError::Parse {
                        line,
                        detail: format!("duplicate init for {s}"),
                    });
                }
                crn.set_conc(s, v);
            }
            ["input", rest @ ..] => parse_pair(rest, line, &mut inputs)?,
            ["output", rest @ ..] => parse_pair(rest, line, &mut outputs)?,
            _ => {
                return Err(CrnError::Parse {
                    line,
                    detail: format!("unrecognized line {text:?}"),
                })
            }
        }
    }
    crn.inputs = collect_pairs(inputs, "input")?;
    crn.outputs = collect_pairs(outputs, "output")?;
    crn.validate()?;
    Ok(crn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_round_trip() {
        let crn = parse("rxn: A + B -> C @ 1").unwrap();
        assert_eq!(crn.to_text(), "rxn: A + B -> C @ 1\n");
        assert_eq!(parse(&crn.to_text()).unwrap(), crn);
    }

    #[test]
    fn multiplicity_preserved() {
        let crn = parse("rxn: X -> 2*B + C @ 0.5\nrxn: A + A -> 0 @ 3").unwrap();
        let b = Species::named("B");
        assert_eq!(crn.reactions[0].products.count(&b), 2);
        assert_eq!(crn.reactions[1].reactants.count(&Species::named("A")), 2);
        let text = crn.to_text();
        assert!(text.contains("X -> 2*B + C @ 0.5"), "{text}");
        assert!(text.contains("A + A -> 0 @ 3"), "{text}");
        assert_eq!(parse(&text).unwrap(), crn);
    }

    #[test]
    fn full_header_round_trip() {
        let src = "# demo\ninput 1 X1+ X1-\noutput 1 H2,1+ H2,1-\ninit H2,1- 0.25\n\
                   rxn: X1+ -> H2,1+ @ 1\nrxn: X1- -> H2,1- @ 1\n";
        let crn = parse(src).unwrap();
        assert_eq!(crn.inputs.len(), 1);
        assert_eq!(crn.conc(&Species::named("H2,1-")), 0.25);
        assert_eq!(parse(&crn.to_text()).unwrap(), crn);
    }

    fn line_of(src: &str) -> usize {
        match parse(src) {
            Err(CrnError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of("init X1+ -2"), 1);
        assert_eq!(line_of("# c\nrxn: A -> B @ 0"), 2);
        assert_eq!(line_of("rxn: A -> B @ -1"), 1);
        assert_eq!(line_of("rxn: A -> B"), 1);
        assert_eq!(line_of("rxn: X1 -> B @ 1"), 1);
        assert_eq!(line_of("init A 1\ninit A 2"), 2);
        assert_eq!(line_of("bogus"), 1);
        assert_eq!(line_of("input 1 X1+ X2-"), 1);
        assert_eq!(line_of("rxn:  -> B @ 1"), 1);
    }

    #[test]
    fn missing_pair_index() {
        assert!(matches!(parse("input 2 X2+ X2-"), Err(CrnError::Pair(_))));
    }
}
