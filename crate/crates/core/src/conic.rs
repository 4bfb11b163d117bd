//! Explicit mixed-integer conic program for constrained logistic best subset
//! selection, with a Conic Benchmark Format (version 3) writer and reader.
//!
//! Variables are laid out as `theta (N) | theta0 | t (M) | u (M) | v (M) |
//! r (N) | z (N)`. Per example two exponential cones `[u, 1, -margin - t]` and
//! `[v, 1, -t]` together with `u + v <= 1` model `t >= softplus(margin)`; per
//! feature the rotated cone `[z, r, theta]` gives `z r >= theta^2 / 2`, so
//! `z = 0` forces `theta = 0`. The objective is `sum t + lambda sum r`.
//!
//! Exponential cones use the ordering `x1 >= x2 exp(x3 / x2)`; rotated cones
//! are `2 x1 x2 >= |x3..|^2`. Binary `z` is an integer variable in `L+` with
//! an explicit `1 - z >= 0` row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bnb::SolveResult;
use crate::data::{support_cost, Dataset, FitConfig, SelectionConstraint};
use crate::error::{Error, Result};
use crate::logistic::{fit_support, softplus, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConeKind {
    /// Unrestricted (`F`).
    Free,
    /// Nonnegative orthant (`L+`).
    NonNeg,
    /// Nonpositive orthant (`L-`).
    NonPos,
    /// Zero cone (`L=`).
    Zero,
    /// Quadratic cone `x1 >= |x2..|` (`Q`).
    Quad,
    /// Rotated quadratic cone `2 x1 x2 >= |x3..|^2` (`QR`).
    RotatedQuad,
    /// Exponential cone (`EXP`).
    Exp,
}

impl ConeKind {
    fn tag(self) -> &'static str {
        match self {
            ConeKind::Free => "F",
            ConeKind::NonNeg => "L+",
            ConeKind::NonPos => "L-",
            ConeKind::Zero => "L=",
            ConeKind::Quad => "Q",
            ConeKind::RotatedQuad => "QR",
            ConeKind::Exp => "EXP",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "F" => ConeKind::Free,
            "L+" => ConeKind::NonNeg,
            "L-" => ConeKind::NonPos,
            "L=" => ConeKind::Zero,
            "Q" => ConeKind::Quad,
            "QR" => ConeKind::RotatedQuad,
            "EXP" => ConeKind::Exp,
            _ => return None,
        })
    }

    fn valid_dim(self, dim: usize) -> bool {
        match self {
            ConeKind::Exp => dim == 3,
            ConeKind::Quad => dim >= 1,
            ConeKind::RotatedQuad => dim >= 2,
            _ => dim >= 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

/// A conic program `min c^T x + c0` subject to `x in K_var`,
/// `A x + b in K_con` and integrality of selected variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub sense: Sense,
    pub var_cones: Vec<ConeBlock>,
    pub integers: Vec<usize>,
    pub con_cones: Vec<ConeBlock>,
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    /// `(row, column, value)` entries of `A`.
    pub a: Vec<(usize, usize, f64)>,
    /// `(row, value)` entries of `b`.
    pub b: Vec<(usize, f64)>,
}

/// Positions of the model variables inside a program built for an `N`-feature,
/// `M`-example dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
}

impl Layout {
    pub fn theta(&self, j: usize) -> usize {
        j
    }
    pub fn theta0(&self) -> usize {
        self.n
    }
    pub fn t(&self, i: usize) -> usize {
        self.n + 1 + i
    }
    pub fn u(&self, i: usize) -> usize {
        self.n + 1 + self.m + i
    }
    pub fn v(&self, i: usize) -> usize {
        self.n + 1 + 2 * self.m + i
    }
    pub fn r(&self, j: usize) -> usize {
        self.n + 1 + 3 * self.m + j
    }
    pub fn z(&self, j: usize) -> usize {
        2 * self.n + 1 + 3 * self.m + j
    }
    pub fn n_vars(&self) -> usize {
        3 * self.n + 1 + 3 * self.m
    }
}

/// Structural counts of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramSummary {
    pub continuous: usize,
    pub integer: usize,
    pub exp_cones: usize,
    pub rotated_cones: usize,
    /// Linear rows other than single-variable bounds on integer variables.
    pub linear_rows: usize,
    /// Rows with one nonzero on an integer variable (the `z <= 1` bounds).
    pub bound_rows: usize,
}

/// Builds the program for `d` under `constraint` with ridge weight `lambda`.
pub fn build_program(d: &Dataset, constraint: SelectionConstraint, lambda: f64) -> Result<ConicProgram> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let (costs, budget) = constraint.resolve(d)?;
    let n = d.n_features();
    let m = d.n_examples();
    let lay = Layout { n, m };
    let y = d.y();

    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut con_cones = Vec::new();
    let mut row = 0;
    for i in 0..m {
        // [u_i, 1, -y_i (x_i theta + theta0) - t_i]
        a.push((row, lay.u(i), 1.0));
        b.push((row + 1, 1.0));
        for j in 0..n {
            let x = d.x()[(i, j)];
            if x != 0.0 {
                a.push((row + 2, lay.theta(j), -y[i] * x));
            }
        }
        a.push((row + 2, lay.theta0(), -y[i]));
        a.push((row + 2, lay.t(i), -1.0));
        con_cones.push(ConeBlock { kind: ConeKind::Exp, dim: 3 });
        row += 3;
        // [v_i, 1, -t_i]
        a.push((row, lay.v(i), 1.0));
        b.push((row + 1, 1.0));
        a.push((row + 2, lay.t(i), -1.0));
        con_cones.push(ConeBlock { kind: ConeKind::Exp, dim: 3 });
        row += 3;
    }
    for j in 0..n {
        // [z_j, r_j, theta_j]
        a.push((row, lay.z(j), 1.0));
        a.push((row + 1, lay.r(j), 1.0));
        a.push((row + 2, lay.theta(j), 1.0));
        con_cones.push(ConeBlock { kind: ConeKind::RotatedQuad, dim: 3 });
        row += 3;
    }
    // 1 - u_i - v_i >= 0
    for i in 0..m {
        a.push((row, lay.u(i), -1.0));
        a.push((row, lay.v(i), -1.0));
        b.push((row, 1.0));
        row += 1;
    }
    con_cones.push(ConeBlock { kind: ConeKind::NonNeg, dim: m });
    // b - sum c_j z_j >= 0
    for (j, &c) in costs.iter().enumerate() {
        a.push((row, lay.z(j), -c));
    }
    if budget != 0.0 {
        b.push((row, budget));
    }
    row += 1;
    con_cones.push(ConeBlock { kind: ConeKind::NonNeg, dim: 1 });
    // 1 - z_j >= 0
    for j in 0..n {
        a.push((row, lay.z(j), -1.0));
        b.push((row, 1.0));
        row += 1;
    }
    con_cones.push(ConeBlock { kind: ConeKind::NonNeg, dim: n });

    let mut objective: Vec<(usize, f64)> = (0..m).map(|i| (lay.t(i), 1.0)).collect();
    if lambda != 0.0 {
        objective.extend((0..n).map(|j| (lay.r(j), lambda)));
    }
    let var_cones = vec![
        ConeBlock { kind: ConeKind::Free, dim: n + 1 + 3 * m },
        ConeBlock { kind: ConeKind::NonNeg, dim: n },
        ConeBlock { kind: ConeKind::NonNeg, dim: n },
    ];
    let p = ConicProgram {
        sense: Sense::Min,
        var_cones,
        integers: (0..n).map(|j| lay.z(j)).collect(),
        con_cones,
        objective,
        objective_constant: 0.0,
        a,
        b,
    };
    debug_assert_eq!(p.n_rows(), row);
    Ok(p)
}

impl ConicProgram {
    pub fn n_vars(&self) -> usize {
        self.var_cones.iter().map(|c| c.dim).sum()
    }

    pub fn n_rows(&self) -> usize {
        self.con_cones.iter().map(|c| c.dim).sum()
    }

    pub fn summary(&self) -> ProgramSummary {
        let count = |kind| self.con_cones.iter().filter(|c| c.kind == kind).count();
        let n_rows = self.n_rows();
        let mut is_integer = vec![false; self.n_vars()];
        for &j in &self.integers {
            is_integer[j] = true;
        }
        let mut nnz = vec![0usize; n_rows];
        let mut last_col = vec![usize::MAX; n_rows];
        for &(r, c, _) in &self.a {
            nnz[r] += 1;
            last_col[r] = c;
        }
        let (mut linear_rows, mut bound_rows) = (0, 0);
        let mut start = 0;
        for cone in &self.con_cones {
            if matches!(cone.kind, ConeKind::NonNeg | ConeKind::NonPos | ConeKind::Zero) {
                for r in start..start + cone.dim {
                    if nnz[r] == 1 && is_integer[last_col[r]] {
                        bound_rows += 1;
                    } else {
                        linear_rows += 1;
                    }
                }
            }
            start += cone.dim;
        }
        ProgramSummary {
            continuous: self.n_vars() - self.integers.len(),
            integer: self.integers.len(),
            exp_cones: count(ConeKind::Exp),
            rotated_cones: count(ConeKind::RotatedQuad),
            linear_rows,
            bound_rows,
        }
    }

    /// Coefficients of one constraint row as `(column, value)`, in file order.
    pub fn row(&self, r: usize) -> Vec<(usize, f64)> {
        self.a.iter().filter(|e| e.0 == r).map(|e| (e.1, e.2)).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    /// Worst violation of any cone membership or integrality at `x`
    /// (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                found: x.len(),
            });
        }
        let mut worst: f64 = 0.0;
        let mut start = 0;
        for cone in &self.var_cones {
            worst = worst.max(cone_violation(cone.kind, &x[start..start + cone.dim]));
            start += cone.dim;
        }
        let mut ax = vec![0.0; self.n_rows()];
        for &(r, c, v) in &self.a {
            ax[r] += v * x[c];
        }
        for &(r, v) in &self.b {
            ax[r] += v;
        }
        let mut start = 0;
        for cone in &self.con_cones {
            worst = worst.max(cone_violation(cone.kind, &ax[start..start + cone.dim]));
            start += cone.dim;
        }
        for &j in &self.integers {
            worst = worst.max((x[j] - x[j].round()).abs());
        }
        Ok(worst)
    }

    /// Writes the program as CBF text. Output depends only on the program.
    pub fn to_cbf(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "VER\n3\n");
        let sense = match self.sense {
            Sense::Min => "MIN",
            Sense::Max => "MAX",
        };
        let _ = writeln!(s, "OBJSENSE\n{sense}\n");
        let _ = writeln!(s, "VAR\n{} {}", self.n_vars(), self.var_cones.len());
        for c in &self.var_cones {
            let _ = writeln!(s, "{} {}", c.kind.tag(), c.dim);
        }
        s.push('\n');
        if !self.integers.is_empty() {
            let _ = writeln!(s, "INT\n{}", self.integers.len());
            for j in &self.integers {
                let _ = writeln!(s, "{j}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CON\n{} {}", self.n_rows(), self.con_cones.len());
        for c in &self.con_cones {
            let _ = writeln!(s, "{} {}", c.kind.tag(), c.dim);
        }
        s.push('\n');
        if !self.objective.is_empty() {
            let _ = writeln!(s, "OBJACOORD\n{}", self.objective.len());
            for (j, v) in &self.objective {
                let _ = writeln!(s, "{j} {v}");
            }
            s.push('\n');
        }
        if self.objective_constant != 0.0 {
            let _ = writeln!(s, "OBJBCOORD\n{}\n", self.objective_constant);
        }
        if !self.a.is_empty() {
            let _ = writeln!(s, "ACOORD\n{}", self.a.len());
            for (r, c, v) in &self.a {
                let _ = writeln!(s, "{r} {c} {v}");
            }
            s.push('\n');
        }
        if !self.b.is_empty() {
            let _ = writeln!(s, "BCOORD\n{}", self.b.len());
            for (r, v) in &self.b {
                let _ = writeln!(s, "{r} {v}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses CBF text in the subset written by [`ConicProgram::to_cbf`]
    /// (plus `Q`, `L-` and `L=` cones).
    pub fn from_cbf(text: &str) -> Result<Self> {
        CbfReader::new(text).read()
    }
}

fn cone_violation(kind: ConeKind, x: &[f64]) -> f64 {
    match kind {
        ConeKind::Free => 0.0,
        ConeKind::NonNeg => x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max),
        ConeKind::NonPos => x.iter().map(|&v| v.max(0.0)).fold(0.0, f64::max),
        ConeKind::Zero => x.iter().map(|v| v.abs()).fold(0.0, f64::max),
        ConeKind::Quad => {
            let tail = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            (tail - x[0]).max(0.0)
        }
        ConeKind::RotatedQuad => {
            let tail: f64 = x[2..].iter().map(|v| v * v).sum();
            (-x[0]).max(0.0).max((-x[1]).max(0.0)).max((tail - 2.0 * x[0] * x[1]).max(0.0))
        }
        ConeKind::Exp => {
            let (x1, x2, x3) = (x[0], x[1], x[2]);
            if x2 > 0.0 {
                (x2 * (x3 / x2).exp() - x1).max(0.0)
            } else {
                // closure: x2 = 0, x1 >= 0, x3 <= 0
                (-x2).max(0.0).max((-x1).max(0.0)).max(x3.max(0.0))
            }
        }
    }
}

/// Writes `p` to `path` in CBF.
pub fn export_cbf(p: &ConicProgram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, p.to_cbf()).map_err(|e| Error::io(path, e))
}

/// Reads a CBF file.
pub fn parse_cbf(path: impl AsRef<Path>) -> Result<ConicProgram> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConicProgram::from_cbf(&text)
}

struct CbfReader<'t> {
    lines: Vec<(usize, &'t str)>,
    pos: usize,
}

impl<'t> CbfReader<'t> {
    fn new(text: &'t str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let line = self
            .lines
            .get(self.pos.saturating_sub(1))
            .map_or(0, |l| l.0);
        Error::Cbf { line, msg: msg.into() }
    }

    fn next_line(&mut self) -> Result<&'t str> {
        let l = self
            .lines
            .get(self.pos)
            .map(|l| l.1)
            .ok_or_else(|| Error::Cbf {
                line: self.lines.last().map_or(0, |l| l.0),
                msg: "unexpected end of file".into(),
            })?;
        self.pos += 1;
        Ok(l)
    }

    fn fields(&mut self, count: usize) -> Result<Vec<&'t str>> {
        let l = self.next_line()?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != count {
            return Err(self.err(format!("expected {count} fields, found {}", f.len())));
        }
        Ok(f)
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse '{s}'")))
    }

    fn cones(&mut self) -> Result<(usize, Vec<ConeBlock>)> {
        let head = self.fields(2)?;
        let total: usize = self.parse(head[0])?;
        let count: usize = self.parse(head[1])?;
        let mut cones = Vec::with_capacity(count);
        for _ in 0..count {
            let f = self.fields(2)?;
            let kind = ConeKind::from_tag(f[0]).ok_or_else(|| self.err(format!("unsupported cone type '{}'", f[0])))?;
            let dim: usize = self.parse(f[1])?;
            if !kind.valid_dim(dim) {
                return Err(self.err(format!("invalid dimension {dim} for cone {}", f[0])));
            }
            cones.push(ConeBlock { kind, dim });
        }
        let sum: usize = cones.iter().map(|c| c.dim).sum();
        if sum != total {
            return Err(self.err(format!("cone dimensions sum to {sum}, header says {total}")));
        }
        Ok((total, cones))
    }

    fn read(mut self) -> Result<ConicProgram> {
        let mut version = None;
        let mut sense = None;
        let mut vars: Option<(usize, Vec<ConeBlock>)> = None;
        let mut cons: Option<(usize, Vec<ConeBlock>)> = None;
        let mut integers = Vec::new();
        let mut objective = Vec::new();
        let mut objective_constant = 0.0;
        let mut a = Vec::new();
        let mut b = Vec::new();

        while self.pos < self.lines.len() {
            let key = self.next_line()?;
            match key {
                "VER" => {
                    let v: u32 = self.next_parsed()?;
                    if v != 3 {
                        return Err(self.err(format!("unsupported version {v}")));
                    }
                    version = Some(v);
                }
                "OBJSENSE" => {
                    sense = Some(match self.next_line()? {
                        "MIN" => Sense::Min,
                        "MAX" => Sense::Max,
                        other => return Err(self.err(format!("unknown objective sense '{other}'"))),
                    });
                }
                "VAR" => vars = Some(self.cones()?),
                "CON" => cons = Some(self.cones()?),
                "INT" => {
                    let n_vars = vars.as_ref().ok_or_else(|| self.err("INT before VAR"))?.0;
                    let count: usize = self.next_parsed()?;
                    for _ in 0..count {
                        let j: usize = self.next_parsed()?;
                        if j >= n_vars {
                            return Err(self.err(format!("integer index {j} out of range")));
                        }
                        integers.push(j);
                    }
                }
                "OBJACOORD" => {
                    let n_vars = vars.as_ref().ok_or_else(|| self.err("OBJACOORD before VAR"))?.0;
                    let count: usize = self.next_parsed()?;
                    for _ in 0..count {
                        let f = self.fields(2)?;
                        let j: usize = self.parse(f[0])?;
                        if j >= n_vars {
                            return Err(self.err(format!("variable index {j} out of range")));
                        }
                        objective.push((j, self.parse_value(f[1])?));
                    }
                }
                "OBJBCOORD" => objective_constant = self.next_value()?,
                "ACOORD" => {
                    let n_vars = vars.as_ref().ok_or_else(|| self.err("ACOORD before VAR"))?.0;
                    let n_rows = cons.as_ref().ok_or_else(|| self.err("ACOORD before CON"))?.0;
                    let count: usize = self.next_parsed()?;
                    for _ in 0..count {
                        let f = self.fields(3)?;
                        let r: usize = self.parse(f[0])?;
                        let c: usize = self.parse(f[1])?;
                        if r >= n_rows || c >= n_vars {
                            return Err(self.err(format!("entry ({r}, {c}) out of range")));
                        }
                        a.push((r, c, self.parse_value(f[2])?));
                    }
                }
                "BCOORD" => {
                    let n_rows = cons.as_ref().ok_or_else(|| self.err("BCOORD before CON"))?.0;
                    let count: usize = self.next_parsed()?;
                    for _ in 0..count {
                        let f = self.fields(2)?;
                        let r: usize = self.parse(f[0])?;
                        if r >= n_rows {
                            return Err(self.err(format!("row {r} out of range")));
                        }
                        b.push((r, self.parse_value(f[1])?));
                    }
                }
                "PSDVAR" | "PSDCON" | "OBJFCOORD" | "FCOORD" | "HCOORD" | "DCOORD" | "POWCONES" | "POW*CONES" => {
                    return Err(self.err(format!("unsupported section {key}")));
                }
                other => return Err(self.err(format!("unknown section '{other}'"))),
            }
        }
        if version.is_none() {
            return Err(Error::Cbf { line: 0, msg: "missing VER section".into() });
        }
        let (_, var_cones) = vars.ok_or(Error::Cbf { line: 0, msg: "missing VAR section".into() })?;
        let con_cones = cons.map(|c| c.1).unwrap_or_default();
        Ok(ConicProgram {
            sense: sense.unwrap_or(Sense::Min),
            var_cones,
            integers,
            con_cones,
            objective,
            objective_constant,
            a,
            b,
        })
    }

    fn next_parsed<T: std::str::FromStr>(&mut self) -> Result<T> {
        let l = self.next_line()?;
        self.parse(l)
    }

    fn next_value(&mut self) -> Result<f64> {
        let l = self.next_line()?;
        self.parse_value(l)
    }

    fn parse_value(&self, s: &str) -> Result<f64> {
        let v: f64 = self.parse(s)?;
        if !v.is_finite() {
            return Err(self.err(format!("non-finite value '{s}'")));
        }
        Ok(v)
    }
}

/// Assignment of every program variable built from a fitted model: `t` is the
/// softplus of the margin, `u = exp(-margin - t)`, `v = exp(-t)`,
/// `r = theta^2 / 2` on the support and `z` its indicator.
pub fn witness(d: &Dataset, params: &ModelParams, support: &[usize]) -> Result<Vec<f64>> {
    let n = d.n_features();
    let m = d.n_examples();
    if params.theta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: params.theta.len(),
        });
    }
    let lay = Layout { n, m };
    let mut x = vec![0.0; lay.n_vars()];
    let mut on = vec![false; n];
    for &j in support {
        if j >= n {
            return Err(Error::DimensionMismatch { expected: n, found: j + 1 });
        }
        on[j] = true;
    }
    for j in 0..n {
        if !on[j] && params.theta[j] != 0.0 {
            return Err(Error::InvalidData(format!("feature {j} has a coefficient but is not selected")));
        }
        x[lay.theta(j)] = params.theta[j];
        x[lay.r(j)] = 0.5 * params.theta[j] * params.theta[j];
        x[lay.z(j)] = if on[j] { 1.0 } else { 0.0 };
    }
    x[lay.theta0()] = params.theta0;
    let y = d.y();
    for i in 0..m {
        let mut margin = params.theta0;
        for j in 0..n {
            if params.theta[j] != 0.0 {
                margin += params.theta[j] * d.x()[(i, j)];
            }
        }
        margin *= y[i];
        let t = softplus(margin);
        x[lay.t(i)] = t;
        x[lay.u(i)] = (-margin - t).exp();
        x[lay.v(i)] = (-t).exp();
    }
    Ok(x)
}

/// Solution of the exported program reported by an external solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSolution {
    pub z: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCheck {
    /// Support decoded from `z`.
    pub support: Vec<usize>,
    pub feasible: bool,
    /// Objective of the ridge refit on the decoded support.
    pub refit_objective: f64,
    /// The two optima agree within the allowed gap.
    pub agrees: bool,
}

/// Compares an external solution with the certified interval
/// `[lower_bound, objective]` of `ours`, allowing `tol` relative slack.
pub fn check_external(
    d: &Dataset,
    constraint: SelectionConstraint,
    lambda: f64,
    sol: &ExternalSolution,
    ours: &SolveResult,
    tol: f64,
    cfg: &FitConfig,
) -> Result<ExternalCheck> {
    let n = d.n_features();
    if sol.z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: sol.z.len() });
    }
    if sol.z.iter().any(|&v| (v - v.round()).abs() > 1e-6 || !(-1e-6..=1.0 + 1e-6).contains(&v)) {
        return Err(Error::InvalidData("external z is not binary".into()));
    }
    let support: Vec<usize> = (0..n).filter(|&j| sol.z[j] > 0.5).collect();
    let (costs, budget) = constraint.resolve(d)?;
    let feasible = support_cost(&costs, &support) <= budget + 1e-9;
    let refit = fit_support(d, &support, lambda, cfg)?;
    let slack = tol * ours.objective.abs().max(1.0);
    let agrees = feasible
        && sol.objective >= ours.lower_bound - slack
        && ours.objective <= sol.objective + slack
        && refit.objective.total <= sol.objective + slack;
    Ok(ExternalCheck {
        support,
        feasible,
        refit_objective: refit.objective.total,
        agrees,
    })
}
