//! The `dagfile v1` text format.
//!
//! ```text
//! dagfile v1
//! var Z levels=No,Yes ref=No
//! var X levels=No,Yes ref=No
//! edge Z -> X
//! cpt Z | : 0.5,0.5
//! cpt X | Z=No : 0.8,0.2
//! cpt X | Z=Yes : 0.3,0.7
//! ```
//!
//! A file with only `var` lines is a schema. `cpt` lines turn a graph into a
//! structural model: one line per parent-level combination, `Parent=level`
//! pairs in any order, probabilities in level order. `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use causeway_core::graph::{CausalDag, GraphError, Variable};
use causeway_core::synth::{Cpt, ScmSpec};
use causeway_core::Schema;

pub const HEADER: &str = "dagfile v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone)]
struct CptLine {
    line: usize,
    child: String,
    combo: Vec<(String, String)>,
    probs: Vec<f64>,
}

#[derive(Debug, Default)]
struct Parsed {
    variables: Vec<(usize, Variable)>,
    edges: Vec<(usize, String, String)>,
    cpts: Vec<CptLine>,
}

fn parse_var(line: usize, rest: &str) -> Result<Variable, FormatError> {
    let mut parts = rest.split_whitespace();
    let name = parts.next().map_or_else(|| err(line, "`var` needs a name"), Ok)?;
    let (mut levels, mut reference) = (None, None);
    for part in parts {
        match part.split_once('=') {
            Some(("levels", v)) if levels.is_none() => levels = Some(v.split(',').map(str::trim).collect::<Vec<_>>()),
            Some(("ref", v)) if reference.is_none() => reference = Some(v),
            _ => {
                return err(
                    line,
                    format!("unexpected `{part}` (expected levels=<l1,...> ref=<level>)"),
                )
            }
        }
    }
    let levels = levels.map_or_else(|| err(line, format!("`{name}` has no levels=")), Ok)?;
    let reference = reference.map_or_else(|| err(line, format!("`{name}` has no ref=")), Ok)?;
    Variable::new(name, levels, reference).map_err(|e| FormatError {
        line,
        message: e.to_string(),
    })
}

fn parse_edge(line: usize, rest: &str) -> Result<(String, String), FormatError> {
    match rest.split_once("->") {
        Some((s, d)) if !s.trim().is_empty() && !d.trim().is_empty() && !d.contains("->") => {
            let (s, d) = (s.trim(), d.trim());
            if s.contains(char::is_whitespace) || d.contains(char::is_whitespace) {
                return err(line, "edge endpoints must be single names");
            }
            Ok((s.to_string(), d.to_string()))
        }
        _ => err(line, "expected `edge <src> -> <dst>`"),
    }
}

fn parse_cpt(line: usize, rest: &str) -> Result<CptLine, FormatError> {
    let (head, probs) = rest
        .split_once(':')
        .map_or_else(|| err(line, "expected `cpt <child> | <parents> : <p1,...>`"), Ok)?;
    let (child, combo) = head
        .split_once('|')
        .map_or_else(|| err(line, "expected `|` after the child name"), Ok)?;
    let child = child.trim();
    if child.is_empty() || child.contains(char::is_whitespace) {
        return err(line, "expected a single child name before `|`");
    }
    let mut pairs = Vec::new();
    for item in combo.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once('=') {
            Some((p, l)) if !p.trim().is_empty() && !l.trim().is_empty() => {
                pairs.push((p.trim().to_string(), l.trim().to_string()))
            }
            _ => return err(line, format!("expected `Parent=level`, found `{item}`")),
        }
    }
    let probs = probs
        .split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<f64>().map_err(|_| FormatError {
                line,
                message: format!("`{p}` is not a number"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CptLine {
        line,
        child: child.to_string(),
        combo: pairs,
        probs,
    })
}

fn parse(text: &str) -> Result<Parsed, FormatError> {
    let mut out = Parsed::default();
    let mut saw_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !saw_header {
            if content.split_whitespace().collect::<Vec<_>>() != ["dagfile", "v1"] {
                return err(line, format!("expected `{HEADER}` header, found `{content}`"));
            }
            saw_header = true;
            continue;
        }
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        match keyword {
            "var" => out.variables.push((line, parse_var(line, rest)?)),
            "edge" => {
                let (s, d) = parse_edge(line, rest)?;
                out.edges.push((line, s, d));
            }
            "cpt" => out.cpts.push(parse_cpt(line, rest)?),
            "dagfile" => return err(line, "repeated header"),
            other => return err(line, format!("unknown keyword `{other}`")),
        }
    }
    if !saw_header {
        return err(1, format!("missing `{HEADER}` header"));
    }
    Ok(out)
}

fn build_graph(p: &Parsed) -> Result<CausalDag, FormatError> {
    let mut declared: BTreeMap<&str, usize> = BTreeMap::new();
    for (line, v) in &p.variables {
        if let Some(first) = declared.insert(v.name(), *line) {
            return err(
                *line,
                format!("variable `{}` already declared on line {first}", v.name()),
            );
        }
    }
    let mut seen = BTreeMap::new();
    for (line, s, d) in &p.edges {
        for end in [s, d] {
            if !declared.contains_key(end.as_str()) {
                return err(*line, format!("edge {s} -> {d} names undeclared variable `{end}`"));
            }
        }
        if s == d {
            return err(*line, format!("self-loop on `{s}`"));
        }
        if let Some(first) = seen.insert((s, d), *line) {
            return err(*line, format!("edge {s} -> {d} already declared on line {first}"));
        }
    }
    let vars = p.variables.iter().map(|(_, v)| v.clone()).collect();
    CausalDag::new(vars, p.edges.iter().map(|(_, s, d)| (s.as_str(), d.as_str()))).map_err(|e| {
        let line = match &e {
            GraphError::CycleDetected { edge, .. } => seen.get(&(&edge.0, &edge.1)).copied().unwrap_or(1),
            _ => 1,
        };
        FormatError {
            line,
            message: e.to_string(),
        }
    })
}

/// Parses a DAG file. `cpt` lines are rejected; use [`parse_scm`].
pub fn parse_dag(text: &str) -> Result<CausalDag, FormatError> {
    let p = parse(text)?;
    if let Some(c) = p.cpts.first() {
        return err(c.line, "`cpt` lines belong in a structural-model file");
    }
    build_graph(&p)
}

/// Parses the variable block of a DAG or SCM file. Other lines are
/// syntax-checked and ignored.
pub fn parse_schema(text: &str) -> Result<Schema, FormatError> {
    let p = parse(text)?;
    let mut names = BTreeSet::new();
    for (line, v) in &p.variables {
        if !names.insert(v.name()) {
            return err(*line, format!("variable `{}` declared twice", v.name()));
        }
    }
    if p.variables.is_empty() {
        return err(1, "no `var` lines");
    }
    Ok(Schema::new(p.variables.into_iter().map(|(_, v)| v).collect()).expect("names checked"))
}

/// Parses a structural-model file: a DAG plus one complete table per variable.
pub fn parse_scm(text: &str) -> Result<ScmSpec, FormatError> {
    let p = parse(text)?;
    let g = build_graph(&p)?;
    let var_line: BTreeMap<&str, usize> = p.variables.iter().map(|(l, v)| (v.name(), *l)).collect();
    let mut by_child: BTreeMap<&str, Vec<&CptLine>> = BTreeMap::new();
    for c in &p.cpts {
        if !g.contains(&c.child) {
            return err(c.line, format!("table for undeclared variable `{}`", c.child));
        }
        by_child.entry(c.child.as_str()).or_default().push(c);
    }
    let mut cpts = Vec::with_capacity(g.len());
    for v in g.variables() {
        let lines = by_child.get(v.name()).map(Vec::as_slice).unwrap_or_default();
        if lines.is_empty() {
            return err(var_line[v.name()], format!("no `cpt` lines for `{}`", v.name()));
        }
        cpts.push(build_cpt(&g, v, lines)?);
    }
    ScmSpec::new(g, cpts).map_err(|e| FormatError {
        line: 1,
        message: e.to_string(),
    })
}

fn build_cpt(g: &CausalDag, child: &Variable, lines: &[&CptLine]) -> Result<Cpt, FormatError> {
    // parent order (and so row order) follows the child's first line
    let graph_parents = g.parents(child.name()).expect("declared");
    let first = &lines[0].combo;
    if first.len() != graph_parents.len() || !first.iter().all(|(n, _)| graph_parents.contains(&n.as_str())) {
        return err(
            lines[0].line,
            format!(
                "`{}` is conditioned on exactly [{}] in the graph",
                child.name(),
                graph_parents.join(",")
            ),
        );
    }
    let parents: Vec<&Variable> = first.iter().map(|(n, _)| g.variable(n).expect("declared")).collect();
    let n_rows: usize = parents.iter().map(|p| p.n_levels()).product();
    let mut rows: Vec<Option<(usize, Vec<f64>)>> = vec![None; n_rows];
    for c in lines {
        if c.combo.len() != parents.len() || !c.combo.iter().all(|(n, _)| parents.iter().any(|p| p.name() == n)) {
            return err(
                c.line,
                format!(
                    "`{}` is conditioned on exactly [{}] in the graph",
                    child.name(),
                    graph_parents.join(",")
                ),
            );
        }
        let mut index = 0;
        for p in &parents {
            let (_, level) = c.combo.iter().find(|(n, _)| n == p.name()).expect("checked");
            let l = p.level_index(level).map_or_else(
                || err(c.line, format!("`{level}` is not a level of `{}`", p.name())),
                Ok,
            )?;
            index = index * p.n_levels() + l;
        }
        if c.probs.len() != child.n_levels() {
            return err(
                c.line,
                format!(
                    "{} probabilities for the {} levels of `{}`",
                    c.probs.len(),
                    child.n_levels(),
                    child.name()
                ),
            );
        }
        if let Some((first, _)) = &rows[index] {
            return err(c.line, format!("parent combination already given on line {first}"));
        }
        Cpt::new(child, &[], vec![c.probs.clone()]).map_err(|e| FormatError {
            line: c.line,
            message: e.to_string(),
        })?;
        rows[index] = Some((c.line, c.probs.clone()));
    }
    if let Some(missing) = rows.iter().position(Option::is_none) {
        let mut rest = missing;
        let mut combo = vec![String::new(); parents.len()];
        for (slot, p) in combo.iter_mut().zip(&parents).rev() {
            *slot = format!("{}={}", p.name(), p.level(rest % p.n_levels()));
            rest /= p.n_levels();
        }
        return err(
            lines[0].line,
            format!("`{}` has no row for {}", child.name(), combo.join(",")),
        );
    }
    let rows = rows.into_iter().map(|r| r.expect("all present").1).collect();
    Cpt::new(child, &parents, rows).map_err(|e| FormatError {
        line: lines[0].line,
        message: e.to_string(),
    })
}

fn write_var(out: &mut String, v: &Variable) {
    let _ = writeln!(
        out,
        "var {} levels={} ref={}",
        v.name(),
        v.levels().join(","),
        v.reference_level()
    );
}

/// Renders variables in declaration order, edges in declaration order.
pub fn render_dag(g: &CausalDag) -> String {
    render_dag_annotated(g, &[], |_, _| None)
}

/// Like [`render_dag`], with leading comment lines and an optional trailing
/// comment per edge.
pub fn render_dag_annotated<'a>(
    g: &CausalDag,
    preamble: &[&str],
    note: impl Fn(&str, &str) -> Option<&'a str>,
) -> String {
    let mut out = String::new();
    for line in preamble {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(HEADER);
    out.push('\n');
    for v in g.variables() {
        write_var(&mut out, v);
    }
    for (s, d) in g.edges() {
        match note(s, d) {
            Some(n) => _ = writeln!(out, "edge {s} -> {d}  # {n}"),
            None => _ = writeln!(out, "edge {s} -> {d}"),
        }
    }
    out
}

/// Canonical text used for graph identity: declared variable order, edges
/// sorted by name.
pub fn canonical_dag(g: &CausalDag) -> String {
    let mut out = format!("{HEADER}\n");
    for v in g.variables() {
        write_var(&mut out, v);
    }
    for (s, d) in g.edge_names() {
        let _ = writeln!(out, "edge {s} -> {d}");
    }
    out
}

pub fn render_schema(schema: &Schema) -> String {
    let mut out = format!("{HEADER}\n");
    for v in schema.variables() {
        write_var(&mut out, v);
    }
    out
}

/// Renders a model; probabilities use the shortest text that parses back to
/// the same `f64`.
pub fn render_scm(m: &ScmSpec, preamble: &[&str]) -> String {
    let g = m.graph();
    let mut out = render_dag_annotated(g, preamble, |_, _| None);
    for v in g.variables() {
        let cpt = m.cpt(v.name()).expect("complete model");
        let parents: Vec<&Variable> = cpt.parents().iter().map(|p| g.variable(p).expect("declared")).collect();
        for (r, combo) in cpt.combinations().enumerate() {
            let combo: Vec<String> = parents
                .iter()
                .zip(&combo)
                .map(|(p, &l)| format!("{}={}", p.name(), p.level(l)))
                .collect();
            let probs: Vec<String> = cpt.row_at(r).iter().map(f64::to_string).collect();
            let _ = writeln!(out, "cpt {} | {} : {}", v.name(), combo.join(","), probs.join(","));
        }
    }
    out
}
