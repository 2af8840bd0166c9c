//! Circuit text format.
//!
//! One instruction per line, `#` starts a comment:
//!
//! ```text
//! MAGIC 1            # optional: the last k qubits form the magic register
//! H 0
//! CNOT 0 1
//! T 0
//! MZ 1 -> m0
//! IF m0 == -1: S 0
//! OBS Z0 X1          # terminal Pauli, must be the last instruction
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::circuit::{Circuit, CliffordGate, Op, RecordId};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliOperator, Phase};

/// A whitespace token with its 1-based column.
#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok {
                    text: &line[s..i],
                    col: line[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            text: &line[s..],
            col: line[..s].chars().count() + 1,
        });
    }
    out
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_index(tok: Tok<'_>, line: usize) -> Result<usize> {
    tok.text
        .parse::<usize>()
        .map_err(|_| err(line, tok.col, format!("expected a qubit index, found `{}`", tok.text)))
}

fn expect_args(head: Tok<'_>, args: &[Tok<'_>], k: usize, line: usize) -> Result<()> {
    if args.len() != k {
        let col = args.get(k).map_or(head.col, |t| t.col);
        return Err(err(
            line,
            col,
            format!("{} takes {k} qubit index(es), found {}", head.text, args.len()),
        ));
    }
    Ok(())
}

/// Parses a Clifford gate from its tokens.
fn parse_clifford(toks: &[Tok<'_>], line: usize) -> Result<CliffordGate> {
    let Some((&head, args)) = toks.split_first() else {
        return Err(err(line, 1, "expected a gate"));
    };
    let name = head.text.to_ascii_uppercase();
    let one = |f: fn(usize) -> CliffordGate| -> Result<CliffordGate> {
        expect_args(head, args, 1, line)?;
        Ok(f(parse_index(args[0], line)?))
    };
    let two = |f: fn(usize, usize) -> CliffordGate| -> Result<CliffordGate> {
        expect_args(head, args, 2, line)?;
        let (a, b) = (parse_index(args[0], line)?, parse_index(args[1], line)?);
        if a == b {
            return Err(err(line, args[1].col, "two-qubit gate on a repeated qubit"));
        }
        Ok(f(a, b))
    };
    match name.as_str() {
        "H" => one(CliffordGate::H),
        "S" => one(CliffordGate::S),
        "SDG" | "SDAG" => one(CliffordGate::Sdg),
        "X" => one(CliffordGate::X),
        "Y" => one(CliffordGate::Y),
        "Z" => one(CliffordGate::Z),
        "CNOT" | "CX" => two(CliffordGate::Cnot),
        "CZ" => two(CliffordGate::Cz),
        _ => Err(err(line, head.col, format!("unknown gate `{}`", head.text))),
    }
}

/// Parses `Z0 X2`, `-Z0`, or `I`.
fn parse_observable(toks: &[Tok<'_>], line: usize) -> Result<Vec<(usize, Pauli, usize)>> {
    let mut out = Vec::new();
    for tok in toks {
        let mut chars = tok.text.chars();
        let letter = chars.next().and_then(Pauli::from_char);
        let rest = chars.as_str();
        match letter {
            Some(Pauli::I) if rest.is_empty() => continue,
            Some(p) if !rest.is_empty() => {
                let q = rest
                    .parse::<usize>()
                    .map_err(|_| err(line, tok.col + 1, format!("bad qubit index in `{}`", tok.text)))?;
                out.push((q, p, tok.col));
            }
            _ => return Err(err(line, tok.col, format!("bad Pauli factor `{}`", tok.text))),
        }
    }
    Ok(out)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses a circuit; every failure carries its line and column.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut ops = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut by_name: HashMap<String, usize> = HashMap::new();
    let mut max_qubit: Option<usize> = None;
    let mut magic: Option<usize> = None;
    let mut observable: Option<(Vec<(usize, Pauli, usize)>, Phase, usize)> = None;
    let mut touch = |q: usize| max_qubit = Some(max_qubit.map_or(q, |m: usize| m.max(q)));

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = strip_comment(raw);
        let toks = tokenize(body);
        let Some(&head) = toks.first() else { continue };
        if observable.is_some() {
            return Err(err(line, head.col, "instructions after OBS"));
        }
        let name = head.text.to_ascii_uppercase();
        match name.as_str() {
            "MAGIC" => {
                if !ops.is_empty() || magic.is_some() {
                    return Err(err(line, head.col, "MAGIC must appear once, before any gate"));
                }
                expect_args(head, &toks[1..], 1, line)?;
                magic = Some(parse_index(toks[1], line)?);
            }
            "T" => {
                expect_args(head, &toks[1..], 1, line)?;
                let q = parse_index(toks[1], line)?;
                touch(q);
                ops.push(Op::T(q));
            }
            "MZ" => {
                if toks.len() != 4 || toks[2].text != "->" {
                    return Err(err(line, head.col, "expected `MZ q -> name`"));
                }
                let q = parse_index(toks[1], line)?;
                let rec = toks[3].text;
                if by_name.contains_key(rec) {
                    return Err(err(line, toks[3].col, format!("record `{rec}` already defined")));
                }
                touch(q);
                by_name.insert(rec.to_string(), names.len());
                ops.push(Op::MeasureZ {
                    qubit: q,
                    record: RecordId(names.len()),
                });
                names.push(rec.to_string());
            }
            "IF" => {
                // IF name == ±1: GATE args
                let colon = body
                    .find(':')
                    .ok_or_else(|| err(line, head.col, "expected `IF name == ±1: GATE`"))?;
                let cond = tokenize(&body[..colon]);
                if cond.len() != 4 || cond[2].text != "==" {
                    return Err(err(line, head.col, "expected `IF name == ±1: GATE`"));
                }
                let rec = cond[1];
                let id = *by_name
                    .get(rec.text)
                    .ok_or_else(|| err(line, rec.col, format!("undefined record `{}`", rec.text)))?;
                let outcome: i8 = match cond[3].text {
                    "-1" => -1,
                    "1" | "+1" => 1,
                    other => return Err(err(line, cond[3].col, format!("outcome must be ±1, found `{other}`"))),
                };
                let offset = body[..colon + 1].chars().count();
                let gate_toks: Vec<Tok<'_>> = tokenize(&body[colon + 1..])
                    .into_iter()
                    .map(|t| Tok {
                        text: t.text,
                        col: t.col + offset,
                    })
                    .collect();
                if gate_toks.is_empty() {
                    return Err(err(line, offset + 1, "missing gate after `:`"));
                }
                if gate_toks[0].text.eq_ignore_ascii_case("T") {
                    return Err(err(line, gate_toks[0].col, "conditional gates must be Clifford"));
                }
                let gate = parse_clifford(&gate_toks, line)?;
                gate.qubits().into_iter().for_each(&mut touch);
                ops.push(Op::Conditional {
                    record: RecordId(id),
                    outcome,
                    gate,
                });
            }
            "OBS" => {
                let mut rest: Vec<Tok<'_>> = toks[1..].to_vec();
                let mut phase = Phase::PLUS_ONE;
                if let Some(first) = rest.first().copied() {
                    if let Some(tail) = first.text.strip_prefix('-') {
                        phase = Phase::MINUS_ONE;
                        if tail.is_empty() {
                            rest.remove(0);
                        } else {
                            rest[0] = Tok {
                                text: tail,
                                col: first.col + 1,
                            };
                        }
                    }
                }
                if rest.is_empty() {
                    return Err(err(line, head.col, "OBS needs at least one factor (use `I` for identity)"));
                }
                let factors = parse_observable(&rest, line)?;
                let mut seen = std::collections::HashSet::new();
                for &(q, _, col) in &factors {
                    if !seen.insert(q) {
                        return Err(err(line, col, format!("qubit {q} appears twice in OBS")));
                    }
                    touch(q);
                }
                observable = Some((factors, phase, line));
            }
            _ => {
                let gate = parse_clifford(&toks, line)?;
                gate.qubits().into_iter().for_each(&mut touch);
                ops.push(Op::Clifford(gate));
            }
        }
    }

    let last_line = text.lines().count().max(1);
    let Some((factors, phase, obs_line)) = observable else {
        return Err(err(last_line, 1, "missing OBS line"));
    };
    let mut n = max_qubit.map_or(1, |m| m + 1);
    let n_magic = magic.unwrap_or(0);
    if n_magic > n {
        n = n_magic;
    }
    let n_data = n - n_magic;
    let terms: Vec<(usize, Pauli)> = factors.iter().map(|&(q, p, _)| (q, p)).collect();
    let obs = PauliOperator::from_sparse(n, &terms)
        .map_err(|e| err(obs_line, 1, e.to_string()))?
        .with_phase(phase);
    Circuit::new(n_data, n_magic, ops, names, obs).map_err(|e| match e {
        Error::Parse { .. } => e,
        other => err(last_line, 1, other.to_string()),
    })
}

/// Writes a circuit in the text format; `parse_circuit` inverts it.
pub fn circuit_to_text(c: &Circuit) -> String {
    let mut s = String::new();
    if c.n_magic() > 0 {
        let _ = writeln!(s, "MAGIC {}", c.n_magic());
    }
    let names = c.record_names();
    for op in c.ops() {
        let _ = match op {
            Op::Clifford(g) => writeln!(s, "{g}"),
            Op::T(q) => writeln!(s, "T {q}"),
            Op::MeasureZ { qubit, record } => writeln!(s, "MZ {qubit} -> {}", names[record.0]),
            Op::Conditional { record, outcome, gate } => {
                writeln!(s, "IF {} == {}: {gate}", names[record.0], outcome)
            }
        };
    }
    let _ = writeln!(s, "OBS {}", c.observable().to_sparse_string());
    s
}

/// Parses Clifford gates separated by newlines or `;` (used by recipes).
pub fn parse_gate_list(text: &str) -> Result<Vec<CliffordGate>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        for part in strip_comment(raw).split(';') {
            let toks = tokenize(part);
            if toks.is_empty() {
                continue;
            }
            out.push(parse_clifford(&toks, lineno + 1)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::gadgetize;

    #[test]
    fn minimal_circuit() {
        let c = parse_circuit("H 0\nOBS Z0").unwrap();
        assert_eq!(c.num_qubits(), 1);
        assert_eq!(c.t_count(), 0);
    }

    #[test]
    fn missing_obs() {
        let e = parse_circuit("T 0").unwrap_err();
        assert!(e.to_string().contains("missing OBS"), "{e}");
    }

    #[test]
    fn located_errors() {
        match parse_circuit("H 0\nFOO 1\nOBS Z0").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 1)),
            e => panic!("{e}"),
        }
        match parse_circuit("H 0\n  CNOT 0 x\nOBS Z0").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 10)),
            e => panic!("{e}"),
        }
        match parse_circuit("IF m0 == -1: S 0\nOBS Z0").unwrap_err() {
            Error::Parse { line, column, message } => {
                assert_eq!((line, column), (1, 4));
                assert!(message.contains("undefined record"));
            }
            e => panic!("{e}"),
        }
        assert!(parse_circuit("OBS Z0\nH 0").is_err());
        assert!(parse_circuit("MZ 0 -> a\nIF a == 2: S 0\nOBS Z0").is_err());
        assert!(parse_circuit("MZ 0 -> a\nIF a == -1: T 0\nOBS Z0").is_err());
    }

    #[test]
    fn comments_and_signs() {
        let c = parse_circuit("# prep\nH 0 # hadamard\nCNOT 0 2\nOBS -Z0 X2\n").unwrap();
        assert_eq!(c.num_qubits(), 3);
        assert_eq!(c.observable().to_sparse_string(), "-Z0 X2");
    }

    #[test]
    fn gadget_roundtrip() {
        let c = parse_circuit("H 0\nT 0\nS 0\nT 0\nOBS X0").unwrap();
        let g = gadgetize(&c);
        let text = circuit_to_text(&g);
        assert!(text.starts_with("MAGIC 2\n"));
        let back = parse_circuit(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(circuit_to_text(&back), text);
    }

    #[test]
    fn gate_list() {
        let g = parse_gate_list("H 0; CNOT 0 1\nSDG 1").unwrap();
        assert_eq!(g, vec![CliffordGate::H(0), CliffordGate::Cnot(0, 1), CliffordGate::Sdg(1)]);
        assert!(parse_gate_list("T 0").is_err());
    }
}
