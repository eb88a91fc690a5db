use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::problem::{AffineExpr, ConicFunction, Layout, ProblemDefinition, SetConstraint};

use super::SubproblemError;

/// What a second-order-cone block encodes; used for reporting and dumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// `t ≥ ‖·‖` epigraph of a cost norm (fuel, penalty or distance).
    Epigraph,
    /// State norm bound, e.g. `‖v_i‖ ≤ V_max`.
    StateNorm,
    /// Control norm bound, e.g. `‖u_i‖ ≤ u_max`.
    ControlNorm,
    /// Pointing cone `n̂ᵀu ≥ ‖u‖ cos θ` on a state.
    StateCone,
    /// Pointing cone on a control, e.g. the thrust cone.
    ControlCone,
}

impl ConeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Epigraph => "epigraph",
            Self::StateNorm => "state_norm",
            Self::ControlNorm => "control_norm",
            Self::StateCone => "state_cone",
            Self::ControlCone => "control_cone",
        }
    }
}

/// `‖tail‖₂ ≤ head`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocBlock {
    pub kind: ConeKind,
    pub head: AffineExpr,
    pub tail: Vec<AffineExpr>,
}

impl SocBlock {
    pub fn dim(&self) -> usize {
        self.tail.len() + 1
    }

    /// `‖tail(x)‖ − head(x)`; nonpositive when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let tail = self.tail.iter().map(|e| e.evaluate(x).powi(2)).sum::<f64>().sqrt();
        tail - self.head.evaluate(x)
    }
}

/// `min cᵀx + c₀` subject to `e(x) = 0`, `e(x) ≥ 0` and second-order cones,
/// over `x = (y, auxiliaries)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub layout: Layout,
    pub num_vars: usize,
    pub linear_cost: Vec<f64>,
    pub cost_constant: f64,
    pub equalities: Vec<AffineExpr>,
    pub inequalities: Vec<AffineExpr>,
    pub soc_blocks: Vec<SocBlock>,
}

impl ConicProgram {
    /// Program over `y` alone with no cost and no constraints.
    pub fn empty(layout: Layout) -> Self {
        Self {
            layout,
            num_vars: layout.len(),
            linear_cost: vec![0.0; layout.len()],
            cost_constant: 0.0,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            soc_blocks: Vec::new(),
        }
    }

    pub fn stacked_len(&self) -> usize {
        self.layout.len()
    }

    pub fn add_variable(&mut self, cost: f64) -> usize {
        self.linear_cost.push(cost);
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_cost(&mut self, expr: &AffineExpr, weight: f64) {
        for &(i, c) in &expr.terms {
            self.linear_cost[i] += weight * c;
        }
        self.cost_constant += weight * expr.constant;
    }

    /// Adds `weight · f(x)` to the cost, one epigraph cone per norm term.
    pub fn add_conic_cost(&mut self, f: &ConicFunction, weight: f64) {
        self.add_cost(&f.affine, weight);
        for norm in &f.norms {
            let t = self.add_variable(weight * norm.weight);
            self.soc_blocks.push(SocBlock {
                kind: ConeKind::Epigraph,
                head: AffineExpr::var(t),
                tail: norm.components.clone(),
            });
        }
    }

    /// `x_1` and `x_T` fixed to the boundary conditions.
    pub fn add_boundary_pins(&mut self, problem: &ProblemDefinition) {
        let layout = problem.layout();
        let last = layout.horizon - 1;
        for (step, target) in [(0, &problem.boundary().initial), (last, &problem.boundary().terminal)] {
            for k in 0..layout.state_dim {
                self.equalities.push(AffineExpr::var(layout.state_index(step, k)).plus_constant(-target[k]));
            }
        }
    }

    /// `g(y) = 0` for affine dynamics.
    pub fn add_dynamics_equalities(&mut self, problem: &ProblemDefinition) -> Result<(), SubproblemError> {
        let layout = problem.layout();
        for step in 0..layout.num_controls() {
            let rows = problem.dynamics().defect_rows(layout, step).ok_or(SubproblemError::UnsupportedDynamics)?;
            for row in rows {
                if !row.is_affine() {
                    return Err(SubproblemError::UnsupportedDynamics);
                }
                self.equalities.push(row.affine.canonical());
            }
        }
        Ok(())
    }

    /// The admissible sets `X_i`, `U_i`.
    pub fn add_domain(&mut self, problem: &ProblemDefinition) {
        let layout = *problem.layout();
        for (step, set) in problem.state_sets().iter().enumerate() {
            for c in &set.constraints {
                self.add_set_constraint(c, |k| layout.state_index(step, k), true);
            }
        }
        for (step, set) in problem.control_sets().iter().enumerate() {
            for c in &set.constraints {
                self.add_set_constraint(c, |k| layout.control_index(step, k), false);
            }
        }
    }

    fn add_set_constraint(&mut self, c: &SetConstraint, index: impl Fn(usize) -> usize, state: bool) {
        match c {
            SetConstraint::NormBall { components, radius } => self.soc_blocks.push(SocBlock {
                kind: if state { ConeKind::StateNorm } else { ConeKind::ControlNorm },
                head: AffineExpr::constant(*radius),
                tail: components.iter().map(|&k| AffineExpr::var(index(k))).collect(),
            }),
            SetConstraint::Cone { components, axis, half_angle } => {
                // ‖v‖ ≤ n̂ᵀv / cos θ
                let scale = 1.0 / half_angle.cos();
                let head = components
                    .iter()
                    .zip(axis)
                    .fold(AffineExpr::default(), |e, (&k, a)| e.term(index(k), a * scale))
                    .canonical();
                self.soc_blocks.push(SocBlock {
                    kind: if state { ConeKind::StateCone } else { ConeKind::ControlCone },
                    head,
                    tail: components.iter().map(|&k| AffineExpr::var(index(k))).collect(),
                });
            }
            SetConstraint::Bounds { component, lower, upper } => {
                let i = index(*component);
                if lower.is_finite() {
                    self.inequalities.push(AffineExpr::var(i).plus_constant(-lower));
                }
                if upper.is_finite() {
                    self.inequalities.push(AffineExpr::default().term(i, -1.0).plus_constant(*upper));
                }
            }
        }
    }

    pub fn count_cones(&self, kind: ConeKind) -> usize {
        self.soc_blocks.iter().filter(|b| b.kind == kind).count()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.linear_cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.cost_constant
    }

    /// Largest violation of any constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|e| e.evaluate(x).abs());
        let ineq = self.inequalities.iter().map(|e| (-e.evaluate(x)).max(0.0));
        let soc = self.soc_blocks.iter().map(|b| b.violation(x).max(0.0));
        eq.chain(ineq).chain(soc).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), SubproblemError> {
        if self.linear_cost.len() != self.num_vars || self.num_vars < self.layout.len() {
            return Err(SubproblemError::Malformed("cost vector does not match variable count".into()));
        }
        let check = |e: &AffineExpr| e.max_index().is_none_or(|i| i < self.num_vars);
        let all_rows = self.equalities.iter().chain(&self.inequalities);
        let all_soc = self.soc_blocks.iter().flat_map(|b| std::iter::once(&b.head).chain(&b.tail));
        if !all_rows.chain(all_soc).all(check) {
            return Err(SubproblemError::Malformed("expression references an unknown variable".into()));
        }
        if self.soc_blocks.iter().any(|b| b.dim() < 2) {
            return Err(SubproblemError::Malformed("second-order cones need dimension at least 2".into()));
        }
        Ok(())
    }

    /// Plain-text form for cross-checking with external solvers.
    ///
    /// ```text
    /// conic_program 1
    /// variables <n> stacked <N>
    /// cost <c₀> <nnz> (<index> <value>)*
    /// eq <count>            then one row per line: <constant> <nnz> (<index> <value>)*
    /// ineq <count>          rows meaning row(x) ≥ 0
    /// soc <count>           per block: "cone <kind> <dim>" then <dim> rows, head first
    /// ```
    ///
    /// Numbers use 17 significant digits, so identical programs produce
    /// identical text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic_program 1");
        let _ = writeln!(out, "variables {} stacked {}", self.num_vars, self.layout.len());
        let cost: Vec<(usize, f64)> =
            self.linear_cost.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, c)| (i, *c)).collect();
        let _ = write!(out, "cost {:.16e} {}", self.cost_constant, cost.len());
        for (i, c) in cost {
            let _ = write!(out, " {i} {c:.16e}");
        }
        out.push('\n');
        let row = |out: &mut String, e: &AffineExpr| {
            let e = e.canonical();
            let _ = write!(out, "{:.16e} {}", e.constant, e.terms.len());
            for (i, c) in e.terms {
                let _ = write!(out, " {i} {c:.16e}");
            }
            out.push('\n');
        };
        let _ = writeln!(out, "eq {}", self.equalities.len());
        for e in &self.equalities {
            row(&mut out, e);
        }
        let _ = writeln!(out, "ineq {}", self.inequalities.len());
        for e in &self.inequalities {
            row(&mut out, e);
        }
        let _ = writeln!(out, "soc {}", self.soc_blocks.len());
        for b in &self.soc_blocks {
            let _ = writeln!(out, "cone {} {}", b.kind.name(), b.dim());
            row(&mut out, &b.head);
            for e in &b.tail {
                row(&mut out, e);
            }
        }
        out
    }
}
