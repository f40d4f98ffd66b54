//! Generic sparse mixed-integer program representation.
//!
//! A [`MipInstance`] stores variables with bounds and integrality flags,
//! sparse constraint rows and an objective sense. It is immutable once
//! built; every downstream stage (solvers, feature extraction, fixing)
//! works on clones or borrows of it.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MipError {
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error("variable {0} has no usable MPS name")]
    UnnamedVariable(usize),
    #[error("constraint {0} has no usable MPS name")]
    UnnamedConstraint(usize),
    #[error("MPS parse error at line {line}: {msg}")]
    MpsParse { line: usize, msg: String },
    #[error("instance json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    /// `+1` for minimization, `-1` for maximization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        }
    }

    /// True when `a` is strictly better than `b` in this sense.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Min => a < b,
            Sense::Max => a > b,
        }
    }

    /// Objective value of "no solution" in this sense.
    pub fn worst(self) -> f64 {
        match self {
            Sense::Min => f64::INFINITY,
            Sense::Max => f64::NEG_INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConSense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(with = "bound_serde")]
    pub lb: f64,
    #[serde(with = "bound_serde")]
    pub ub: f64,
    pub is_integer: bool,
    pub obj_coeff: f64,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lb: f64, ub: f64, obj_coeff: f64) -> Self {
        Variable {
            name: name.into(),
            lb,
            ub,
            is_integer: false,
            obj_coeff,
        }
    }

    pub fn integer(name: impl Into<String>, lb: f64, ub: f64, obj_coeff: f64) -> Self {
        Variable {
            name: name.into(),
            lb,
            ub,
            is_integer: true,
            obj_coeff,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// `(variable index, coefficient)` sorted by index.
    pub terms: Vec<(usize, f64)>,
    pub sense: ConSense,
    pub rhs: f64,
}

impl Constraint {
    /// Builds a row, sorting terms and merging repeated indices.
    pub fn new(
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: ConSense,
        rhs: f64,
    ) -> Self {
        let mut terms = terms;
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (idx, coeff) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == idx => last.1 += coeff,
                _ => merged.push((idx, coeff)),
            }
        }
        Constraint {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MipInstance {
    pub name: String,
    pub sense: Sense,
    pub vars: Vec<Variable>,
    pub cons: Vec<Constraint>,
}

impl MipInstance {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn integer_indices(&self) -> Vec<usize> {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_integer)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn num_integer(&self) -> usize {
        self.vars.iter().filter(|v| v.is_integer).count()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(x)
            .map(|(v, xi)| v.obj_coeff * xi)
            .sum()
    }

    /// Checks bounds, rows and (optionally) integrality of `x` within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64, check_integrality: bool) -> bool {
        if x.len() != self.vars.len() {
            return false;
        }
        for (v, &xi) in self.vars.iter().zip(x) {
            if !xi.is_finite() || xi < v.lb - tol || xi > v.ub + tol {
                return false;
            }
            if check_integrality && v.is_integer && (xi - xi.round()).abs() > tol {
                return false;
            }
        }
        self.cons.iter().all(|c| {
            let act = c.activity(x);
            let slack_tol = tol * (1.0 + c.rhs.abs());
            match c.sense {
                ConSense::Le => act <= c.rhs + slack_tol,
                ConSense::Ge => act >= c.rhs - slack_tol,
                ConSense::Eq => (act - c.rhs).abs() <= slack_tol,
            }
        })
    }

    pub fn to_json(&self) -> Result<String, MipError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MipError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One invariant violation found by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BoundOrder {
        var: usize,
        lb: f64,
        ub: f64,
    },
    NanBound {
        var: usize,
    },
    NonFiniteObjective {
        var: usize,
    },
    DuplicateVarName {
        name: String,
        first: usize,
        second: usize,
    },
    BadIndex {
        con: usize,
        index: usize,
    },
    UnsortedTerms {
        con: usize,
    },
    DuplicateTerm {
        con: usize,
        index: usize,
    },
    NonFiniteCoeff {
        con: usize,
        index: usize,
    },
    NonFiniteRhs {
        con: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::BoundOrder { var, lb, ub } => write!(f, "var {var}: lb {lb} > ub {ub}"),
            Violation::NanBound { var } => write!(f, "var {var}: NaN bound"),
            Violation::NonFiniteObjective { var } => {
                write!(f, "var {var}: non-finite objective coefficient")
            }
            Violation::DuplicateVarName {
                name,
                first,
                second,
            } => {
                write!(f, "vars {first} and {second} share the name {name:?}")
            }
            Violation::BadIndex { con, index } => {
                write!(f, "con {con}: variable index {index} out of range")
            }
            Violation::UnsortedTerms { con } => write!(f, "con {con}: terms not sorted by index"),
            Violation::DuplicateTerm { con, index } => {
                write!(f, "con {con}: duplicate index {index}")
            }
            Violation::NonFiniteCoeff { con, index } => {
                write!(f, "con {con}: non-finite coefficient on {index}")
            }
            Violation::NonFiniteRhs { con } => write!(f, "con {con}: non-finite rhs"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), MipError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(MipError::Invalid(self))
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Collects every invariant violation. Never fails.
pub fn validate(mip: &MipInstance) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, v) in mip.vars.iter().enumerate() {
        if v.lb.is_nan() || v.ub.is_nan() {
            violations.push(Violation::NanBound { var: i });
        } else if v.lb > v.ub {
            violations.push(Violation::BoundOrder {
                var: i,
                lb: v.lb,
                ub: v.ub,
            });
        }
        if !v.obj_coeff.is_finite() {
            violations.push(Violation::NonFiniteObjective { var: i });
        }
        if !v.name.is_empty() {
            if let Some(&first) = seen.get(v.name.as_str()) {
                violations.push(Violation::DuplicateVarName {
                    name: v.name.clone(),
                    first,
                    second: i,
                });
            } else {
                seen.insert(&v.name, i);
            }
        }
    }
    let n = mip.vars.len();
    for (c, con) in mip.cons.iter().enumerate() {
        if !con.rhs.is_finite() {
            violations.push(Violation::NonFiniteRhs { con: c });
        }
        let mut prev: Option<usize> = None;
        let mut unsorted = false;
        for &(idx, coeff) in &con.terms {
            if idx >= n {
                violations.push(Violation::BadIndex { con: c, index: idx });
            }
            if !coeff.is_finite() {
                violations.push(Violation::NonFiniteCoeff { con: c, index: idx });
            }
            if let Some(p) = prev {
                if p == idx {
                    violations.push(Violation::DuplicateTerm { con: c, index: idx });
                } else if p > idx {
                    unsorted = true;
                }
            }
            prev = Some(idx);
        }
        if unsorted {
            violations.push(Violation::UnsortedTerms { con: c });
        }
    }
    ValidationReport { violations }
}

/// Undirected variable-constraint incidence graph.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteGraph {
    pub n_vars: usize,
    pub n_cons: usize,
    /// For each variable, the constraints it appears in (nonzero coefficient).
    pub var_adj: Vec<Vec<usize>>,
    /// For each constraint, its variables.
    pub con_adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn edge_count(&self) -> usize {
        self.var_adj.iter().map(Vec::len).sum()
    }

    pub fn var_degree(&self, var: usize) -> usize {
        self.var_adj[var].len()
    }

    pub fn has_edge(&self, var: usize, con: usize) -> bool {
        self.var_adj[var].binary_search(&con).is_ok()
    }

    /// C(x_i): every constraint connected to `var` by some path.
    pub fn reachable_constraints(&self, var: usize) -> Vec<usize> {
        let mut seen_var = vec![false; self.n_vars];
        let mut seen_con = vec![false; self.n_cons];
        let mut queue = VecDeque::from([var]);
        seen_var[var] = true;
        while let Some(v) = queue.pop_front() {
            for &c in &self.var_adj[v] {
                if !seen_con[c] {
                    seen_con[c] = true;
                    for &w in &self.con_adj[c] {
                        if !seen_var[w] {
                            seen_var[w] = true;
                            queue.push_back(w);
                        }
                    }
                }
            }
        }
        (0..self.n_cons).filter(|&c| seen_con[c]).collect()
    }
}

pub fn build_bipartite_graph(mip: &MipInstance) -> Result<BipartiteGraph, MipError> {
    validate(mip).into_result()?;
    let mut var_adj = vec![Vec::new(); mip.vars.len()];
    let mut con_adj = vec![Vec::new(); mip.cons.len()];
    for (c, con) in mip.cons.iter().enumerate() {
        for &(j, a) in &con.terms {
            if a != 0.0 {
                var_adj[j].push(c);
                con_adj[c].push(j);
            }
        }
    }
    Ok(BipartiteGraph {
        n_vars: mip.vars.len(),
        n_cons: mip.cons.len(),
        var_adj,
        con_adj,
    })
}

const OBJ_ROW: &str = "OBJ";

fn mps_name_ok(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(char::is_whitespace) && !name.starts_with('$')
}

/// Writes free-format MPS with explicit bounds for every column.
pub fn export_mps(mip: &MipInstance) -> Result<String, MipError> {
    validate(mip).into_result()?;
    for (i, v) in mip.vars.iter().enumerate() {
        if !mps_name_ok(&v.name) {
            return Err(MipError::UnnamedVariable(i));
        }
    }
    for (i, c) in mip.cons.iter().enumerate() {
        if !mps_name_ok(&c.name) || c.name == OBJ_ROW {
            return Err(MipError::UnnamedConstraint(i));
        }
    }

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mip.vars.len()];
    for (c, con) in mip.cons.iter().enumerate() {
        for &(j, a) in &con.terms {
            columns[j].push((c, a));
        }
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "NAME {}",
        if mps_name_ok(&mip.name) {
            mip.name.as_str()
        } else {
            "PROBLEM"
        }
    );
    if mip.sense == Sense::Max {
        let _ = writeln!(out, "OBJSENSE\n    MAX");
    }
    let _ = writeln!(out, "ROWS\n N  {OBJ_ROW}");
    for con in &mip.cons {
        let tag = match con.sense {
            ConSense::Le => "L",
            ConSense::Eq => "E",
            ConSense::Ge => "G",
        };
        let _ = writeln!(out, " {tag}  {}", con.name);
    }
    let _ = writeln!(out, "COLUMNS");
    let mut in_int = false;
    let mut marker = 0usize;
    for (j, v) in mip.vars.iter().enumerate() {
        if v.is_integer != in_int {
            let kind = if v.is_integer { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    MARKER{marker} 'MARKER' '{kind}'");
            marker += 1;
            in_int = v.is_integer;
        }
        let mut wrote = false;
        if v.obj_coeff != 0.0 {
            let _ = writeln!(out, "    {} {OBJ_ROW} {}", v.name, v.obj_coeff);
            wrote = true;
        }
        for &(c, a) in &columns[j] {
            let _ = writeln!(out, "    {} {} {}", v.name, mip.cons[c].name, a);
            wrote = true;
        }
        if !wrote {
            let _ = writeln!(out, "    {} {OBJ_ROW} 0", v.name);
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER{marker} 'MARKER' 'INTEND'");
    }
    let _ = writeln!(out, "RHS");
    for con in &mip.cons {
        if con.rhs != 0.0 {
            let _ = writeln!(out, "    RHS {} {}", con.name, con.rhs);
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for v in &mip.vars {
        if v.lb == v.ub {
            let _ = writeln!(out, " FX BND {} {}", v.name, v.lb);
        } else if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(out, " FR BND {}", v.name);
        } else {
            if v.lb == f64::NEG_INFINITY {
                let _ = writeln!(out, " MI BND {}", v.name);
            } else {
                let _ = writeln!(out, " LO BND {} {}", v.name, v.lb);
            }
            if v.ub == f64::INFINITY {
                let _ = writeln!(out, " PL BND {}", v.name);
            } else {
                let _ = writeln!(out, " UP BND {} {}", v.name, v.ub);
            }
        }
    }
    let _ = writeln!(out, "ENDATA");
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

/// Reads free-format MPS (the subset produced by [`export_mps`] plus the
/// common bound types).
pub fn parse_mps(text: &str) -> Result<MipInstance, MipError> {
    let err = |line: usize, msg: &str| MipError::MpsParse {
        line,
        msg: msg.to_string(),
    };
    let parse_num = |line: usize, s: &str| -> Result<f64, MipError> {
        s.parse::<f64>()
            .map_err(|_| err(line, &format!("bad number {s:?}")))
    };

    let mut name = String::new();
    let mut sense = Sense::Min;
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<(String, ConSense)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut vars: Vec<Variable> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut row_terms: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut integer_block = false;
    let mut bounded: HashSet<usize> = HashSet::new();
    let mut section = Section::None;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        if header {
            section = match tokens[0].to_ascii_uppercase().as_str() {
                "NAME" => {
                    name = tokens.get(1).map(|s| s.to_string()).unwrap_or_default();
                    Section::Name
                }
                "OBJSENSE" => {
                    if let Some(s) = tokens.get(1) {
                        sense = parse_sense(s).ok_or_else(|| err(line_no, "bad OBJSENSE"))?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(err(line_no, &format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::ObjSense => {
                sense = parse_sense(tokens[0]).ok_or_else(|| err(line_no, "bad OBJSENSE"))?;
            }
            Section::Rows => {
                if tokens.len() != 2 {
                    return Err(err(line_no, "ROWS entry needs type and name"));
                }
                let kind = tokens[0].to_ascii_uppercase();
                let rname = tokens[1].to_string();
                if kind == "N" {
                    if obj_row.is_none() {
                        obj_row = Some(rname);
                    }
                    continue;
                }
                let cs = match kind.as_str() {
                    "L" => ConSense::Le,
                    "G" => ConSense::Ge,
                    "E" => ConSense::Eq,
                    _ => return Err(err(line_no, "unknown row type")),
                };
                row_index.insert(rname.clone(), rows.len());
                rows.push((rname, cs));
                row_terms.push(Vec::new());
                rhs.push(0.0);
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    match tokens[2] {
                        "'INTORG'" => integer_block = true,
                        "'INTEND'" => integer_block = false,
                        _ => return Err(err(line_no, "unknown marker")),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err(line_no, "COLUMNS entry needs 3 or 5 fields"));
                }
                let vname = tokens[0];
                let j = match var_index.get(vname) {
                    Some(&j) => j,
                    None => {
                        let j = vars.len();
                        var_index.insert(vname.to_string(), j);
                        vars.push(Variable {
                            name: vname.to_string(),
                            lb: 0.0,
                            ub: f64::INFINITY,
                            is_integer: integer_block,
                            obj_coeff: 0.0,
                        });
                        j
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let value = parse_num(line_no, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        vars[j].obj_coeff = value;
                    } else {
                        let r = *row_index
                            .get(pair[0])
                            .ok_or_else(|| err(line_no, "unknown row"))?;
                        row_terms[r].push((j, value));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err(line_no, "RHS entry needs 3 or 5 fields"));
                }
                for pair in tokens[1..].chunks(2) {
                    let value = parse_num(line_no, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        continue;
                    }
                    let r = *row_index
                        .get(pair[0])
                        .ok_or_else(|| err(line_no, "unknown row"))?;
                    rhs[r] = value;
                }
            }
            Section::Ranges => return Err(err(line_no, "RANGES are not supported")),
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(err(line_no, "BOUNDS entry too short"));
                }
                let kind = tokens[0].to_ascii_uppercase();
                let j = *var_index
                    .get(tokens[2])
                    .ok_or_else(|| err(line_no, "unknown column"))?;
                let value = match tokens.get(3) {
                    Some(s) => Some(parse_num(line_no, s)?),
                    None => None,
                };
                let need = |v: Option<f64>| v.ok_or_else(|| err(line_no, "bound value missing"));
                let var = &mut vars[j];
                bounded.insert(j);
                match kind.as_str() {
                    "LO" => var.lb = need(value)?,
                    "UP" => var.ub = need(value)?,
                    "FX" => {
                        let v = need(value)?;
                        var.lb = v;
                        var.ub = v;
                    }
                    "FR" => {
                        var.lb = f64::NEG_INFINITY;
                        var.ub = f64::INFINITY;
                    }
                    "MI" => var.lb = f64::NEG_INFINITY,
                    "PL" => var.ub = f64::INFINITY,
                    "BV" => {
                        var.lb = 0.0;
                        var.ub = 1.0;
                        var.is_integer = true;
                    }
                    "LI" => {
                        var.lb = need(value)?;
                        var.is_integer = true;
                    }
                    "UI" => {
                        var.ub = need(value)?;
                        var.is_integer = true;
                    }
                    _ => return Err(err(line_no, "unknown bound type")),
                }
            }
            Section::None | Section::Name | Section::End => {
                return Err(err(line_no, "data outside a section"));
            }
        }
    }

    let cons = rows
        .into_iter()
        .zip(row_terms)
        .zip(rhs)
        .map(|(((rname, cs), terms), r)| Constraint {
            name: rname,
            terms,
            sense: cs,
            rhs: r,
        })
        .collect();
    Ok(MipInstance {
        name,
        sense,
        vars,
        cons,
    })
}

fn parse_sense(s: &str) -> Option<Sense> {
    match s.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Some(Sense::Max),
        "MIN" | "MINIMIZE" => Some(Sense::Min),
        _ => None,
    }
}

/// JSON cannot carry infinities, so bounds are written as numbers or the
/// strings `"inf"` / `"-inf"`.
mod bound_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad bound {other:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MipInstance {
        MipInstance {
            name: "tiny".into(),
            sense: Sense::Min,
            vars: vec![
                Variable::integer("x", 0.0, 10.0, 1.0),
                Variable::continuous("y", 0.0, f64::INFINITY, 2.0),
            ],
            cons: vec![Constraint::new(
                "c",
                vec![(0, 1.0), (1, 1.0)],
                ConSense::Ge,
                1.0,
            )],
        }
    }

    #[test]
    fn well_formed_is_clean() {
        assert!(validate(&tiny()).is_empty());
    }

    #[test]
    fn inverted_bounds_reported_once() {
        let mut m = tiny();
        m.vars[0].lb = 5.0;
        m.vars[0].ub = 3.0;
        let report = validate(&m);
        assert_eq!(
            report.violations,
            vec![Violation::BoundOrder {
                var: 0,
                lb: 5.0,
                ub: 3.0
            }]
        );
    }

    #[test]
    fn out_of_range_index_reported_once() {
        let mut m = tiny();
        m.cons[0].terms = vec![(0, 1.0), (99, 1.0)];
        let report = validate(&m);
        assert_eq!(
            report.violations,
            vec![Violation::BadIndex { con: 0, index: 99 }]
        );
    }

    #[test]
    fn duplicate_names_and_terms() {
        let mut m = tiny();
        m.vars[1].name = "x".into();
        m.cons[0].terms = vec![(1, 1.0), (1, 2.0), (0, 1.0)];
        let report = validate(&m);
        assert!(report.violations.contains(&Violation::DuplicateVarName {
            name: "x".into(),
            first: 0,
            second: 1
        }));
        assert!(report
            .violations
            .contains(&Violation::DuplicateTerm { con: 0, index: 1 }));
        assert!(report
            .violations
            .contains(&Violation::UnsortedTerms { con: 0 }));
    }

    #[test]
    fn constraint_new_merges_and_sorts() {
        let c = Constraint::new("c", vec![(3, 1.0), (1, 2.0), (3, 0.5)], ConSense::Le, 0.0);
        assert_eq!(c.terms, vec![(1, 2.0), (3, 1.5)]);
    }

    #[test]
    fn single_edge_and_isolated_node() {
        let m = MipInstance {
            name: "g".into(),
            sense: Sense::Min,
            vars: vec![
                Variable::continuous("a", 0.0, 1.0, 0.0),
                Variable::continuous("b", 0.0, 1.0, 0.0),
            ],
            cons: vec![Constraint::new("c", vec![(0, 1.0)], ConSense::Le, 1.0)],
        };
        let g = build_bipartite_graph(&m).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.var_degree(1), 0);
        assert!(g.reachable_constraints(1).is_empty());
        assert_eq!(g.reachable_constraints(0), vec![0]);
    }

    #[test]
    fn invalid_instance_rejected_by_graph_builder() {
        let mut m = tiny();
        m.cons[0].terms.push((7, 1.0));
        assert!(matches!(
            build_bipartite_graph(&m),
            Err(MipError::Invalid(_))
        ));
    }

    #[test]
    fn mps_has_integer_markers() {
        let m = MipInstance {
            name: "one".into(),
            sense: Sense::Min,
            vars: vec![Variable::integer("x", 0.0, f64::INFINITY, 1.0)],
            cons: vec![Constraint::new("c1", vec![(0, 1.0)], ConSense::Ge, 1.0)],
        };
        let text = export_mps(&m).unwrap();
        let org = text.find("'INTORG'").unwrap();
        let col = text.find("    x OBJ 1").unwrap();
        let end = text.find("'INTEND'").unwrap();
        assert!(org < col && col < end);
        assert!(!text.contains("OBJSENSE"));
    }

    #[test]
    fn mps_max_sense_section() {
        let mut m = tiny();
        m.sense = Sense::Max;
        let text = export_mps(&m).unwrap();
        assert!(text.contains("OBJSENSE\n    MAX\n"));
        assert_eq!(parse_mps(&text).unwrap().sense, Sense::Max);
    }

    #[test]
    fn mps_rejects_unnamed_variable() {
        let mut m = tiny();
        m.vars[1].name = String::new();
        assert!(matches!(export_mps(&m), Err(MipError::UnnamedVariable(1))));
    }

    #[test]
    fn mps_round_trip_restores_instance() {
        let mut m = tiny();
        m.vars.push(Variable::continuous(
            "free",
            f64::NEG_INFINITY,
            f64::INFINITY,
            0.0,
        ));
        m.vars.push(Variable::integer("fixed", 2.0, 2.0, -1.0));
        m.cons.push(Constraint::new(
            "e",
            vec![(2, 1.0), (3, -2.5)],
            ConSense::Eq,
            -3.0,
        ));
        let text = export_mps(&m).unwrap();
        let back = parse_mps(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(export_mps(&back).unwrap(), text);
    }

    #[test]
    fn json_round_trip_with_infinite_bounds() {
        let m = tiny();
        let text = m.to_json().unwrap();
        assert!(text.contains("\"inf\""));
        assert_eq!(MipInstance::from_json(&text).unwrap(), m);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "NAME t\nROWS\n N OBJ\n L c\nCOLUMNS\n    x c notanumber\nENDATA\n";
        match parse_mps(text) {
            Err(MipError::MpsParse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }
}
