//! DIMACS minimum-cost-flow text format.
//!
//! Reads the `min` problem format (`c`, `p min N M`, `n id supply`,
//! `a u v low cap cost` lines); arc lower bounds must be zero. Writes a
//! solution as one `f u v value` line per arc followed by `s <cost>`.

use crate::error::{Error, Result};
use crate::graph::FlowInstance;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

pub fn read_dimacs(path: &Path) -> Result<FlowInstance> {
    let file = std::fs::File::open(path)?;
    parse_dimacs(BufReader::new(file))
}

pub fn parse_dimacs_str(text: &str) -> Result<FlowInstance> {
    parse_dimacs(text.as_bytes())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_dimacs<R: Read>(reader: R) -> Result<FlowInstance> {
    let reader = BufReader::new(reader);
    let mut n = 0usize;
    let mut m_declared = 0usize;
    let mut saw_problem = false;
    let mut edges = Vec::new();
    let mut cost = Vec::new();
    let mut cap = Vec::new();
    let mut demand = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("c") | Some("") => continue,
            Some("p") => {
                if saw_problem {
                    return Err(parse_err(lineno, "duplicate problem line"));
                }
                if tok.next() != Some("min") {
                    return Err(parse_err(lineno, "expected problem type 'min'"));
                }
                n = next_num(&mut tok, lineno, "vertex count")?;
                m_declared = next_num(&mut tok, lineno, "arc count")?;
                demand = vec![0i64; n];
                saw_problem = true;
            }
            Some("n") => {
                if !saw_problem {
                    return Err(parse_err(lineno, "node line before problem line"));
                }
                let id: usize = next_num(&mut tok, lineno, "node id")?;
                let supply: i64 = next_num(&mut tok, lineno, "node supply")?;
                if id == 0 || id > n {
                    return Err(parse_err(lineno, format!("dangling node id {id}")));
                }
                demand[id - 1] = supply;
            }
            Some("a") => {
                if !saw_problem {
                    return Err(parse_err(lineno, "arc line before problem line"));
                }
                let u: usize = next_num(&mut tok, lineno, "arc tail")?;
                let v: usize = next_num(&mut tok, lineno, "arc head")?;
                let low: i64 = next_num(&mut tok, lineno, "arc lower bound")?;
                let hi: i64 = next_num(&mut tok, lineno, "arc capacity")?;
                let c: i64 = next_num(&mut tok, lineno, "arc cost")?;
                if u == 0 || u > n {
                    return Err(parse_err(lineno, format!("dangling node id {u}")));
                }
                if v == 0 || v > n {
                    return Err(parse_err(lineno, format!("dangling node id {v}")));
                }
                if low != 0 {
                    return Err(parse_err(
                        lineno,
                        format!("nonzero arc lower bound {low} is not supported"),
                    ));
                }
                edges.push((u - 1, v - 1));
                cap.push(hi);
                cost.push(c);
            }
            Some(other) => {
                return Err(parse_err(lineno, format!("unknown line type '{other}'")));
            }
        }
    }

    if !saw_problem {
        return Err(parse_err(0, "missing problem line"));
    }
    if edges.len() != m_declared {
        return Err(parse_err(
            0,
            format!(
                "problem line declared {m_declared} arcs but {} were given",
                edges.len()
            ),
        ));
    }
    FlowInstance::new(n, edges, cost, cap, demand)
}

/// Writes one `f u v value` line per arc plus a final `s <cost>` line.
pub fn write_flow<W: Write>(mut w: W, inst: &FlowInstance, flow: &[i64]) -> Result<()> {
    for (e, &(a, b)) in inst.edges.iter().enumerate() {
        writeln!(w, "f {} {} {}", a + 1, b + 1, flow[e])?;
    }
    writeln!(w, "s {}", inst.flow_cost_int(flow))?;
    Ok(())
}

/// Emits the instance back in DIMACS format, bit-exactly re-parseable.
pub fn write_dimacs<W: Write>(mut w: W, inst: &FlowInstance) -> Result<()> {
    writeln!(w, "p min {} {}", inst.n, inst.m())?;
    for (v, &d) in inst.demand.iter().enumerate() {
        if d != 0 {
            writeln!(w, "n {} {}", v + 1, d)?;
        }
    }
    for (e, &(a, b)) in inst.edges.iter().enumerate() {
        writeln!(w, "a {} {} 0 {} {}", a + 1, b + 1, inst.cap[e], inst.cost[e])?;
    }
    Ok(())
}

fn next_num<T: std::str::FromStr>(
    tok: &mut std::str::SplitWhitespace<'_>,
    line: usize,
    what: &str,
) -> Result<T> {
    tok.next()
        .ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("malformed {what}")))
}
