use std::fmt;
use std::io::{self, Write};

use crate::error::ModelError;

/// Handle to a variable inside a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate this row (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Maximize,
    Minimize,
}

/// A linear (or mixed-binary) program held in a plain row-wise form.
///
/// Models are built once and then handed to [`crate::solve_lp`] or
/// [`crate::solve_milp`]; solvers never mutate them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    name: String,
    sense: Sense,
    variables: Vec<Variable>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn set_sense(&mut self, sense: Sense) {
        self.sense = sense;
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.push_var(Variable {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
        })
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.push_var(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
        })
    }

    fn push_var(&mut self, var: Variable) -> VarId {
        self.variables.push(var);
        self.objective.push(0.0);
        VarId(self.variables.len() - 1)
    }

    /// Tighten the bounds of an existing variable.
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn set_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var.0] = coef;
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var.0] += coef;
    }

    /// Adds a row; repeated variables in `terms` are merged.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in terms {
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(slot) => slot.1 += a,
                None => merged.push((v, a)),
            }
        }
        self.constraints.push(Constraint {
            name: name.into(),
            terms: merged,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.variables.len()).map(VarId)
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn has_binaries(&self) -> bool {
        self.binaries().next().is_some()
    }

    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest row or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::InvalidBounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(ModelError::InvalidBounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BinaryBounds(v.name.clone()));
            }
            if !self.objective[i].is_finite() {
                return Err(ModelError::NonFinite(format!("objective coefficient of {}", v.name)));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite(format!("right-hand side of {}", c.name)));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(ModelError::UnknownVariable {
                        constraint: c.name.clone(),
                        index: v.0,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(format!(
                        "coefficient of {} in {}",
                        self.variables[v.0].name, c.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes the model in a CPLEX-LP-like text form for cross-checking with
    /// external solvers.
    pub fn write_lp<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "\\ Model {}", self.name)?;
        writeln!(
            out,
            "{}",
            match self.sense {
                Sense::Maximize => "Maximize",
                Sense::Minimize => "Minimize",
            }
        )?;
        write!(out, " obj:")?;
        let obj_terms: Vec<(VarId, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (VarId(i), *c))
            .collect();
        self.write_terms(&mut out, &obj_terms)?;
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        for c in &self.constraints {
            write!(out, " {}:", lp_name(&c.name))?;
            self.write_terms(&mut out, &c.terms)?;
            writeln!(out, " {} {}", c.relation, fmt_num(c.rhs))?;
        }
        writeln!(out, "Bounds")?;
        for v in self.variables.iter().filter(|v| v.kind == VarKind::Continuous) {
            let name = lp_name(&v.name);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), name, fmt_num(v.upper))?,
                (true, false) => writeln!(out, " {} >= {}", name, fmt_num(v.lower))?,
                (false, true) => writeln!(out, " -inf <= {} <= {}", name, fmt_num(v.upper))?,
                (false, false) => writeln!(out, " {} free", name)?,
            }
        }
        let bins: Vec<_> = self.binaries().collect();
        if !bins.is_empty() {
            writeln!(out, "Binaries")?;
            for b in bins {
                writeln!(out, " {}", lp_name(&self.variables[b.0].name))?;
            }
        }
        writeln!(out, "End")
    }

    fn write_terms<W: Write>(&self, out: &mut W, terms: &[(VarId, f64)]) -> io::Result<()> {
        if terms.is_empty() {
            return write!(out, " 0");
        }
        for (k, &(v, a)) in terms.iter().enumerate() {
            let sign = if a < 0.0 { "-" } else if k == 0 { "" } else { "+" };
            write!(out, " {} {} {}", sign, fmt_num(a.abs()), lp_name(&self.variables[v.0].name))?;
        }
        Ok(())
    }
}

fn lp_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect()
}

fn fmt_num(x: f64) -> String {
    format!("{x:.12e}")
}
