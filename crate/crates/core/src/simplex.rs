//! Dense two-phase simplex over a generic field.
//!
//! The same code runs on `f64` (with tolerances) and on arbitrary-precision
//! rationals, which makes the rational run a drop-in exact cross-check.
//! Entering columns follow Dantzig's rule until a run of degenerate pivots is
//! seen, after which the phase finishes under Bland's rule.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::LpError;

/// Feasibility tolerance on constraint residuals for the floating-point path.
pub const EPS_FEAS: f64 = 1e-7;
const EPS_PIVOT: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;
const DEGENERATE_RUN: usize = 50;

pub trait Field: Clone + fmt::Debug {
    const EXACT: bool;
    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    /// Exactly zero in storage (used to skip work, not for decisions).
    fn is_stored_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    /// `self < o` up to the field's tolerance.
    fn less(&self, o: &Self) -> bool {
        o.sub(self).is_pos()
    }
    fn tidy(&mut self) {}
    /// Residual that still counts as satisfied.
    fn feasibility_slack() -> Self;
}

impl Field for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_pos(&self) -> bool {
        *self > EPS_PIVOT
    }
    fn is_neg(&self) -> bool {
        *self < -EPS_PIVOT
    }
    fn is_stored_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn less(&self, o: &Self) -> bool {
        *self < *o - 1e-12
    }
    fn tidy(&mut self) {
        if self.abs() < 1e-13 {
            *self = 0.0;
        }
    }
    fn feasibility_slack() -> Self {
        EPS_FEAS
    }
}

impl Field for BigRational {
    const EXACT: bool = true;
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn is_stored_zero(&self) -> bool {
        self.is_zero()
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn feasibility_slack() -> Self {
        Zero::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub terms: Vec<(usize, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

/// A linear program with integer data over nonnegative variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpModel {
    pub vars: Vec<String>,
    /// Optional upper bound per variable.
    pub upper: Vec<Option<i64>>,
    pub constraints: Vec<Constraint>,
    /// Maximized; empty means a pure feasibility problem.
    pub objective: Vec<(usize, i64)>,
}

impl LpModel {
    pub fn add_var(&mut self, name: String, upper: Option<i64>) -> usize {
        self.vars.push(name);
        self.upper.push(upper);
        self.vars.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        label: String,
        terms: Vec<(usize, i64)>,
        sense: Sense,
        rhs: i64,
    ) {
        debug_assert!(terms.iter().all(|&(v, _)| v < self.vars.len()));
        self.constraints.push(Constraint {
            label,
            terms,
            sense,
            rhs,
        });
    }

    /// Largest violation of any constraint or bound at `values`, with its label.
    pub fn max_violation(&self, values: &[f64]) -> (f64, String) {
        let mut worst = (0.0, String::new());
        let mut note = |v: f64, label: &str| {
            if v > worst.0 {
                worst = (v, label.to_owned());
            }
        };
        for (j, &x) in values.iter().enumerate() {
            note(-x, &self.vars[j]);
            if let Some(u) = self.upper[j] {
                note(x - u as f64, &self.vars[j]);
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a as f64 * values[v]).sum();
            let rhs = c.rhs as f64;
            let viol = match c.sense {
                Sense::Le => lhs - rhs,
                Sense::Ge => rhs - lhs,
                Sense::Eq => (lhs - rhs).abs(),
            };
            note(viol, &c.label);
        }
        worst
    }
}

impl fmt::Display for LpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |(v, a): &(usize, i64)| -> String {
            match a {
                1 => self.vars[*v].clone(),
                -1 => format!("-{}", self.vars[*v]),
                _ => format!("{a}*{}", self.vars[*v]),
            }
        };
        if !self.objective.is_empty() {
            let t: Vec<_> = self.objective.iter().map(term).collect();
            writeln!(f, "maximize: {}", t.join(" + "))?;
        }
        for c in &self.constraints {
            let t: Vec<_> = c.terms.iter().map(term).collect();
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(f, "{}: {} {op} {}", c.label, t.join(" + "), c.rhs)?;
        }
        for (v, u) in self.vars.iter().zip(&self.upper) {
            match u {
                Some(u) => writeln!(f, "bound: 0 <= {v} <= {u}")?,
                None => writeln!(f, "bound: 0 <= {v}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { values: Vec<T>, objective: T },
    Infeasible,
}

impl<T> LpOutcome<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }
}

struct Tableau<T> {
    rows: usize,
    cols: usize,
    /// rows x (cols + 1); last column is the right-hand side.
    a: Vec<T>,
    /// Reduced costs, last entry is minus the objective value.
    obj: Vec<T>,
    basis: Vec<usize>,
    pivots: usize,
}

impl<T: Field> Tableau<T> {
    fn at(&self, r: usize, c: usize) -> &T {
        &self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> &T {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.cols + 1;
        let piv = self.at(r, q).clone();
        let row_start = r * w;
        let mut nz = Vec::new();
        for c in 0..w {
            let v = &mut self.a[row_start + c];
            if !v.is_stored_zero() {
                *v = v.div(&piv);
                nz.push(c);
            }
        }
        let prow: Vec<(usize, T)> = nz
            .iter()
            .map(|&c| (c, self.a[row_start + c].clone()))
            .collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * w + q].clone();
            if f.is_stored_zero() {
                continue;
            }
            for (c, pv) in &prow {
                let cell = &mut self.a[i * w + c];
                *cell = cell.sub(&f.mul(pv));
                cell.tidy();
            }
            self.a[i * w + q] = T::zero();
        }
        let f = self.obj[q].clone();
        if !f.is_stored_zero() {
            for (c, pv) in &prow {
                let cell = &mut self.obj[*c];
                *cell = cell.sub(&f.mul(pv));
                cell.tidy();
            }
            self.obj[q] = T::zero();
        }
        self.basis[r] = q;
        self.pivots += 1;
    }

    /// Sets the objective row for costs `c` (minimization) against the current basis.
    fn set_costs(&mut self, costs: &[T]) {
        let w = self.cols + 1;
        let mut obj: Vec<T> = costs
            .iter()
            .cloned()
            .chain(std::iter::once(T::zero()))
            .collect();
        for r in 0..self.rows {
            let cb = &costs[self.basis[r]];
            if cb.is_stored_zero() {
                continue;
            }
            for (c, o) in obj.iter_mut().enumerate() {
                let v = &self.a[r * w + c];
                if !v.is_stored_zero() {
                    *o = o.sub(&cb.mul(v));
                }
            }
        }
        self.obj = obj;
    }

    /// Runs simplex iterations on the current objective. Returns false on unboundedness.
    fn optimize(&mut self, allowed: &[bool]) -> Result<bool, LpError> {
        let mut degenerate_run = 0;
        let mut bland = false;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::IterationLimit(MAX_PIVOTS));
            }
            let entering = if bland {
                (0..self.cols).find(|&c| allowed[c] && self.obj[c].is_neg())
            } else {
                let mut best: Option<usize> = None;
                for (c, _) in allowed.iter().enumerate().filter(|(_, &a)| a) {
                    if self.obj[c].is_neg() && best.is_none_or(|b| self.obj[c].less(&self.obj[b])) {
                        best = Some(c);
                    }
                }
                best
            };
            let Some(q) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows {
                let arq = self.at(r, q);
                if !arq.is_pos() {
                    continue;
                }
                let ratio = self.rhs(r).div(arq);
                let better = match &leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio.less(lratio)
                            || (!lratio.less(&ratio) && self.basis[r] < self.basis[*lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if ratio.is_pos() {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN {
                    bland = true;
                }
            }
            self.pivot(r, q);
        }
    }
}

type Row = (Vec<(usize, i64)>, Sense, i64);

/// Solves `model` exactly as stated; see [`LpOutcome`].
pub fn solve<T: Field>(model: &LpModel) -> Result<LpOutcome<T>, LpError> {
    let n = model.vars.len();
    // (terms, sense, rhs) with rhs >= 0 after flipping.
    let mut rows: Vec<Row> = Vec::new();
    for c in &model.constraints {
        if c.rhs < 0 {
            let flipped = match c.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            rows.push((
                c.terms.iter().map(|&(v, a)| (v, -a)).collect(),
                flipped,
                -c.rhs,
            ));
        } else {
            rows.push((c.terms.clone(), c.sense, c.rhs));
        }
    }
    for (j, u) in model.upper.iter().enumerate() {
        if let Some(u) = *u {
            if u < 0 {
                return Ok(LpOutcome::Infeasible);
            }
            rows.push((vec![(j, 1)], Sense::Le, u));
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut a = vec![T::zero(); m * w];
    let mut basis = vec![0; m];
    let mut slack = n;
    let mut art = n + n_slack;
    for (r, (terms, sense, rhs)) in rows.iter().enumerate() {
        for &(v, coef) in terms {
            let cell = &mut a[r * w + v];
            *cell = cell.add(&T::from_i64(coef));
        }
        a[r * w + cols] = T::from_i64(*rhs);
        match sense {
            Sense::Le => {
                a[r * w + slack] = T::from_i64(1);
                basis[r] = slack;
                slack += 1;
            }
            Sense::Ge => {
                a[r * w + slack] = T::from_i64(-1);
                slack += 1;
                a[r * w + art] = T::from_i64(1);
                basis[r] = art;
                art += 1;
            }
            Sense::Eq => {
                a[r * w + art] = T::from_i64(1);
                basis[r] = art;
                art += 1;
            }
        }
    }
    let first_art = n + n_slack;
    let mut t = Tableau {
        rows: m,
        cols,
        a,
        obj: Vec::new(),
        basis,
        pivots: 0,
    };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        let costs: Vec<T> = (0..cols)
            .map(|c| T::from_i64(i64::from(c >= first_art)))
            .collect();
        t.set_costs(&costs);
        let all = vec![true; cols];
        t.optimize(&all)?;
        let infeas = T::zero().sub(&t.obj[cols]);
        if T::feasibility_slack().less(&infeas) || (T::EXACT && infeas.is_pos()) {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if t.basis[r] >= first_art {
                if let Some(q) = (0..first_art).find(|&c| {
                    let v = t.at(r, c);
                    v.is_pos() || v.is_neg()
                }) {
                    t.pivot(r, q);
                }
            }
        }
    }

    // Phase 2.
    let allowed: Vec<bool> = (0..cols).map(|c| c < first_art).collect();
    let mut costs = vec![T::zero(); cols];
    for &(v, coef) in &model.objective {
        costs[v] = costs[v].sub(&T::from_i64(coef));
    }
    t.set_costs(&costs);
    if !model.objective.is_empty() && !t.optimize(&allowed)? {
        return Err(LpError::Unbounded);
    }
    let mut values = vec![T::zero(); n];
    for r in 0..m {
        if t.basis[r] < n {
            values[t.basis[r]] = t.rhs(r).clone();
        }
    }
    let objective = model.objective.iter().fold(T::zero(), |acc, &(v, coef)| {
        acc.add(&values[v].mul(&T::from_i64(coef)))
    });
    Ok(LpOutcome::Optimal { values, objective })
}

/// Floating-point solve whose answer is re-checked against the constraints.
///
/// A point violating any row by more than [`EPS_FEAS`] is reported as a
/// numerical failure rather than silently accepted or declared infeasible.
pub fn solve_checked(model: &LpModel) -> Result<LpOutcome<f64>, LpError> {
    let out = solve::<f64>(model)?;
    if let LpOutcome::Optimal { values, objective } = out {
        let values: Vec<f64> = values
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                let v = v.max(0.0);
                match model.upper[j] {
                    Some(u) => v.min(u as f64),
                    None => v,
                }
            })
            .collect();
        let (violation, row) = model.max_violation(&values);
        if violation > EPS_FEAS {
            return Err(LpError::Numerical { row, violation });
        }
        return Ok(LpOutcome::Optimal { values, objective });
    }
    Ok(out)
}
