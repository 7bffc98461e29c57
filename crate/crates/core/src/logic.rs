//! The property language: epistemic and probabilistic formulas over points.

use std::fmt;

use num::rational::BigRational;
use num::traits::{One, Zero};

use crate::error::EvalError;
use crate::prob::{self, RunMeasure};
use crate::ratio::render_rational;
use crate::system::{AgentId, InterpretedSystem, Point, RunId};

/// Comparison operator in probability formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Cmp {
    pub fn holds(&self, left: &BigRational, right: &BigRational) -> bool {
        match self {
            Cmp::Lt => left < right,
            Cmp::Le => left <= right,
            Cmp::Eq => left == right,
            Cmp::Ge => left >= right,
            Cmp::Gt => left > right,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

/// Right-hand side of a probability comparison: a constant in [0, 1], or a
/// second probability term so that posterior equalities are expressible.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbBound {
    Const(BigRational),
    Pr {
        agent: AgentId,
        target: Box<Formula>,
        condition: Option<Box<Formula>>,
    },
}

/// AST of the property language.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    /// Constant truth; prints as `true`.
    Top,
    /// Primitive proposition; unlisted propositions are false everywhere.
    Prop(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    /// K_j phi: phi holds at every point j considers possible.
    Knows(AgentId, Box<Formula>),
    /// P_j phi = !K_j !phi: j considers phi possible.
    Poss(AgentId, Box<Formula>),
    /// theta(i, a): i performs a somewhere in the run (past or future).
    Theta(AgentId, String),
    /// delta(i, a): i has performed a by the current time.
    Delta(AgentId, String),
    /// thetaOther(j, a): some roster agent other than j performs a.
    ThetaOther(AgentId, String),
    /// Pr_j(target | condition) cmp bound.
    ProbCmp {
        agent: AgentId,
        target: Box<Formula>,
        condition: Option<Box<Formula>>,
        cmp: Cmp,
        bound: ProbBound,
    },
}

impl Formula {
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn implies(l: Formula, r: Formula) -> Formula {
        Formula::Implies(Box::new(l), Box::new(r))
    }

    pub fn knows(agent: AgentId, f: Formula) -> Formula {
        Formula::Knows(agent, Box::new(f))
    }

    pub fn poss(agent: AgentId, f: Formula) -> Formula {
        Formula::Poss(agent, Box::new(f))
    }

    /// Conjunction of `parts`; `true` when empty.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut iter = parts.into_iter();
        match iter.next() {
            None => Formula::Top,
            Some(first) => iter.fold(first, Formula::and),
        }
    }

    /// Disjunction of `parts`; `!true` when empty.
    pub fn disjunction(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut iter = parts.into_iter();
        match iter.next() {
            None => Formula::not(Formula::Top),
            Some(first) => iter.fold(first, Formula::or),
        }
    }

    /// Pr_j(target) cmp constant. The bound must lie in [0, 1].
    pub fn prob_cmp(agent: AgentId, target: Formula, cmp: Cmp, bound: BigRational) -> Formula {
        debug_assert!(bound_in_range(&bound), "bound {bound} outside [0, 1]");
        Formula::ProbCmp {
            agent,
            target: Box::new(target),
            condition: None,
            cmp,
            bound: ProbBound::Const(bound),
        }
    }

    /// Pr_j(left) cmp Pr_j(right).
    pub fn prob_pair(agent: AgentId, left: Formula, cmp: Cmp, right: Formula) -> Formula {
        Formula::ProbCmp {
            agent: agent.clone(),
            target: Box::new(left),
            condition: None,
            cmp,
            bound: ProbBound::Pr {
                agent,
                target: Box::new(right),
                condition: None,
            },
        }
    }

    pub fn contains_prob(&self) -> bool {
        match self {
            Formula::Top
            | Formula::Prop(_)
            | Formula::Theta(..)
            | Formula::Delta(..)
            | Formula::ThetaOther(..) => false,
            Formula::Not(f) | Formula::Knows(_, f) | Formula::Poss(_, f) => f.contains_prob(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                l.contains_prob() || r.contains_prob()
            }
            Formula::ProbCmp { .. } => true,
        }
    }

    /// True iff truth is a property of the run alone, independent of time.
    ///
    /// Such formulas are automatically measurable: their satisfying set within
    /// any knowledge set is a union of complete run fibers.
    pub fn is_run_stable(&self) -> bool {
        match self {
            Formula::Top | Formula::Theta(..) | Formula::ThetaOther(..) => true,
            Formula::Not(f) => f.is_run_stable(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                l.is_run_stable() && r.is_run_stable()
            }
            _ => false,
        }
    }
}

// Precedence levels for printing: higher binds tighter.
const PREC_IMPLIES: u8 = 0;
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_UNARY: u8 = 3;

impl Formula {
    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => PREC_IMPLIES,
            Formula::Or(..) => PREC_OR,
            Formula::And(..) => PREC_AND,
            _ => PREC_UNARY,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let prec = self.precedence();
        if prec < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Formula::Top => f.write_str("true"),
            Formula::Prop(p) => f.write_str(p),
            Formula::Not(inner) => {
                f.write_str("!")?;
                inner.fmt_prec(f, PREC_UNARY)
            }
            Formula::And(l, r) => {
                l.fmt_prec(f, PREC_AND)?;
                f.write_str(" & ")?;
                // right operand one level tighter: `&` prints left-associated
                r.fmt_prec(f, PREC_AND + 1)?;
                Ok(())
            }
            Formula::Or(l, r) => {
                l.fmt_prec(f, PREC_OR)?;
                f.write_str(" | ")?;
                r.fmt_prec(f, PREC_OR + 1)?;
                Ok(())
            }
            Formula::Implies(l, r) => {
                l.fmt_prec(f, PREC_IMPLIES + 1)?;
                f.write_str(" => ")?;
                // right-associative
                r.fmt_prec(f, PREC_IMPLIES)
            }
            Formula::Knows(agent, inner) => {
                write!(f, "K_{agent} ")?;
                inner.fmt_prec(f, PREC_UNARY)
            }
            Formula::Poss(agent, inner) => {
                write!(f, "P_{agent} ")?;
                inner.fmt_prec(f, PREC_UNARY)
            }
            Formula::Theta(agent, action) => write!(f, "theta({agent}, {action})"),
            Formula::Delta(agent, action) => write!(f, "delta({agent}, {action})"),
            Formula::ThetaOther(agent, action) => write!(f, "thetaOther({agent}, {action})"),
            Formula::ProbCmp {
                agent,
                target,
                condition,
                cmp,
                bound,
            } => {
                fmt_prob_term(f, agent, target, condition.as_deref())?;
                write!(f, " {} ", cmp.symbol())?;
                match bound {
                    ProbBound::Const(r) => f.write_str(&render_rational(r)),
                    ProbBound::Pr {
                        agent,
                        target,
                        condition,
                    } => fmt_prob_term(f, agent, target, condition.as_deref()),
                }
            }
        }
    }
}

/// Whether a formula printed as a `Pr` target would expose a bare `|` that
/// the parser would take for the conditioning bar.
fn exposes_bar(f: &Formula) -> bool {
    match f {
        Formula::Or(..) => true,
        Formula::Implies(l, r) => exposes_bar(l) || exposes_bar(r),
        _ => false,
    }
}

fn fmt_prob_term(
    f: &mut fmt::Formatter<'_>,
    agent: &AgentId,
    target: &Formula,
    condition: Option<&Formula>,
) -> fmt::Result {
    write!(f, "Pr_{agent}(")?;
    if exposes_bar(target) {
        write!(f, "({target})")?;
    } else {
        write!(f, "{target}")?;
    }
    if let Some(cond) = condition {
        write!(f, " | {cond}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Everything needed to evaluate a formula: the system, and a run measure
/// when probability operators occur.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub system: &'a InterpretedSystem,
    pub measure: Option<&'a RunMeasure>,
}

impl<'a> EvalContext<'a> {
    pub fn new(system: &'a InterpretedSystem) -> Self {
        EvalContext {
            system,
            measure: None,
        }
    }

    pub fn with_measure(system: &'a InterpretedSystem, measure: &'a RunMeasure) -> Self {
        EvalContext {
            system,
            measure: Some(measure),
        }
    }

    fn require_agent(&self, agent: &AgentId) -> Result<(), EvalError> {
        if self.system.system().has_agent(agent) {
            Ok(())
        } else {
            Err(EvalError::UnknownAgent(agent.clone()))
        }
    }
}

/// Truth of `formula` at the point `p`.
pub fn evaluate(ctx: &EvalContext, p: &Point, formula: &Formula) -> Result<bool, EvalError> {
    if !ctx.system.system().contains_point(p) {
        return Err(EvalError::UnknownPoint(p.run.to_string(), p.time));
    }
    eval_at(ctx, p, formula)
}

fn eval_at(ctx: &EvalContext, p: &Point, formula: &Formula) -> Result<bool, EvalError> {
    match formula {
        Formula::Top => Ok(true),
        Formula::Prop(name) => Ok(ctx.system.prop_holds(name, p)),
        Formula::Not(inner) => Ok(!eval_at(ctx, p, inner)?),
        Formula::And(l, r) => Ok(eval_at(ctx, p, l)? && eval_at(ctx, p, r)?),
        Formula::Or(l, r) => Ok(eval_at(ctx, p, l)? || eval_at(ctx, p, r)?),
        Formula::Implies(l, r) => Ok(!eval_at(ctx, p, l)? || eval_at(ctx, p, r)?),
        Formula::Knows(agent, inner) => {
            ctx.require_agent(agent)?;
            let class = ctx
                .system
                .knowledge_set(agent, p)
                .expect("agent checked against roster");
            for q in class {
                if !eval_at(ctx, q, inner)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Poss(agent, inner) => {
            ctx.require_agent(agent)?;
            let class = ctx
                .system
                .knowledge_set(agent, p)
                .expect("agent checked against roster");
            for q in class {
                if eval_at(ctx, q, inner)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Theta(agent, action) => {
            ctx.require_agent(agent)?;
            let run = ctx
                .system
                .system()
                .run(&p.run)
                .ok_or_else(|| EvalError::UnknownRun(p.run.to_string()))?;
            Ok(run.performs(agent, action))
        }
        Formula::Delta(agent, action) => {
            ctx.require_agent(agent)?;
            let run = ctx
                .system
                .system()
                .run(&p.run)
                .ok_or_else(|| EvalError::UnknownRun(p.run.to_string()))?;
            Ok(run.performed_by(agent, action, p.time))
        }
        Formula::ThetaOther(agent, action) => {
            ctx.require_agent(agent)?;
            let run = ctx
                .system
                .system()
                .run(&p.run)
                .ok_or_else(|| EvalError::UnknownRun(p.run.to_string()))?;
            Ok(ctx
                .system
                .roster()
                .iter()
                .filter(|other| *other != agent)
                .any(|other| run.performs(other, action)))
        }
        Formula::ProbCmp {
            agent,
            target,
            condition,
            cmp,
            bound,
        } => {
            ctx.require_agent(agent)?;
            let measure = ctx.measure.ok_or(EvalError::MeasureRequired)?;
            let left = prob::point_probability(
                measure,
                ctx.system,
                agent,
                p,
                target,
                condition.as_deref(),
            )?;
            let right = match bound {
                ProbBound::Const(r) => r.clone(),
                ProbBound::Pr {
                    agent: rhs_agent,
                    target: rhs_target,
                    condition: rhs_condition,
                } => {
                    ctx.require_agent(rhs_agent)?;
                    prob::point_probability(
                        measure,
                        ctx.system,
                        rhs_agent,
                        p,
                        rhs_target,
                        rhs_condition.as_deref(),
                    )?
                }
            };
            Ok(cmp.holds(&left, &right))
        }
    }
}

/// Outcome of a validity check, with the least counterexample on failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validity {
    pub holds: bool,
    pub witness: Option<Point>,
}

/// Whether `formula` holds at every point of the system.
///
/// Points are visited in canonical order (run id, then time), so the reported
/// counterexample is the lexicographically least failing point.
pub fn valid_in(ctx: &EvalContext, formula: &Formula) -> Result<Validity, EvalError> {
    for p in ctx.system.system().points() {
        if !eval_at(ctx, &p, formula)? {
            return Ok(Validity {
                holds: false,
                witness: Some(p),
            });
        }
    }
    Ok(Validity {
        holds: true,
        witness: None,
    })
}

/// e_p(phi): the points where `formula` holds.
pub fn satisfying_points(ctx: &EvalContext, formula: &Formula) -> Result<Vec<Point>, EvalError> {
    let mut out = Vec::new();
    for p in ctx.system.system().points() {
        if eval_at(ctx, &p, formula)? {
            out.push(p);
        }
    }
    Ok(out)
}

/// e_r(phi): the runs on which `formula` holds at some point.
pub fn satisfying_runs(ctx: &EvalContext, formula: &Formula) -> Result<Vec<RunId>, EvalError> {
    let mut out = Vec::new();
    for run in ctx.system.system().runs() {
        for time in 0..=ctx.system.horizon() {
            if eval_at(ctx, &Point::new(run.id.clone(), time), formula)? {
                out.push(run.id.clone());
                break;
            }
        }
    }
    Ok(out)
}

/// Checks that a probability bound lies in [0, 1].
pub fn bound_in_range(bound: &BigRational) -> bool {
    !bound.is_negative() && *bound <= BigRational::one()
}

trait IsNegative {
    fn is_negative(&self) -> bool;
}

impl IsNegative for BigRational {
    fn is_negative(&self) -> bool {
        *self < BigRational::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{GlobalState, LocalState, Run, RunEvent, System};
    use std::collections::{BTreeMap, BTreeSet};

    fn agent(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    /// One run, horizon 2: agent `i` performs `a` at time 1; observer `j`
    /// sees a constant.
    fn single_run_system() -> InterpretedSystem {
        let states = (0..3)
            .map(|t| GlobalState {
                env: LocalState::Int(t),
                locals: [
                    (agent("i"), LocalState::Int(t)),
                    (agent("j"), LocalState::Int(0)),
                ]
                .into_iter()
                .collect(),
            })
            .collect();
        let run = Run {
            id: RunId::new("r").unwrap(),
            states,
            events: BTreeSet::from([RunEvent {
                agent: agent("i"),
                action: "a".to_string(),
                time: 1,
            }]),
        };
        let system = System::new(vec![agent("i"), agent("j")], vec![run]).unwrap();
        InterpretedSystem::new(system, BTreeMap::new()).unwrap()
    }

    #[test]
    fn theta_holds_before_the_event_delta_does_not() {
        let sys = single_run_system();
        let ctx = EvalContext::new(&sys);
        let p0 = Point::new(RunId::new("r").unwrap(), 0);
        let theta = Formula::Theta(agent("i"), "a".into());
        let delta = Formula::Delta(agent("i"), "a".into());
        assert!(evaluate(&ctx, &p0, &theta).unwrap());
        assert!(!evaluate(&ctx, &p0, &delta).unwrap());
        let p1 = Point::new(RunId::new("r").unwrap(), 1);
        assert!(evaluate(&ctx, &p1, &delta).unwrap());
    }

    #[test]
    fn delta_is_monotone_in_time() {
        let sys = single_run_system();
        let ctx = EvalContext::new(&sys);
        let delta = Formula::Delta(agent("i"), "a".into());
        let mut seen_true = false;
        for t in 0..3 {
            let holds = evaluate(&ctx, &Point::new(RunId::new("r").unwrap(), t), &delta).unwrap();
            assert!(!seen_true || holds);
            seen_true |= holds;
        }
    }

    #[test]
    fn unknown_proposition_is_false() {
        let sys = single_run_system();
        let ctx = EvalContext::new(&sys);
        let p0 = Point::new(RunId::new("r").unwrap(), 0);
        assert!(!evaluate(&ctx, &p0, &Formula::Prop("nope".into())).unwrap());
    }

    #[test]
    fn unknown_agent_is_an_error() {
        let sys = single_run_system();
        let ctx = EvalContext::new(&sys);
        let p0 = Point::new(RunId::new("r").unwrap(), 0);
        let bad = Formula::Theta(agent("ghost"), "a".into());
        assert!(matches!(
            evaluate(&ctx, &p0, &bad),
            Err(EvalError::UnknownAgent(_))
        ));
    }

    #[test]
    fn valid_in_reports_least_witness() {
        let sys = single_run_system();
        let ctx = EvalContext::new(&sys);
        let delta = Formula::Delta(agent("i"), "a".into());
        let result = valid_in(&ctx, &delta).unwrap();
        assert!(!result.holds);
        assert_eq!(
            result.witness,
            Some(Point::new(RunId::new("r").unwrap(), 0))
        );
    }

    #[test]
    fn poss_is_dual_of_knows() {
        let sys = single_run_system();
        let ctx = EvalContext::new(&sys);
        let inner = Formula::Delta(agent("i"), "a".into());
        let poss = Formula::poss(agent("j"), inner.clone());
        let dual = Formula::not(Formula::knows(agent("j"), Formula::not(inner)));
        for p in sys.points() {
            assert_eq!(
                evaluate(&ctx, &p, &poss).unwrap(),
                evaluate(&ctx, &p, &dual).unwrap()
            );
        }
    }

    #[test]
    fn satisfying_runs_is_projection_of_points() {
        let sys = single_run_system();
        let ctx = EvalContext::new(&sys);
        let delta = Formula::Delta(agent("i"), "a".into());
        let points = satisfying_points(&ctx, &delta).unwrap();
        let runs = satisfying_runs(&ctx, &delta).unwrap();
        let projected: BTreeSet<_> = points.into_iter().map(|p| p.run).collect();
        assert_eq!(projected.into_iter().collect::<Vec<_>>(), runs);
    }

    #[test]
    fn missing_measure_is_an_error() {
        let sys = single_run_system();
        let ctx = EvalContext::new(&sys);
        let p0 = Point::new(RunId::new("r").unwrap(), 0);
        let f = Formula::prob_cmp(
            agent("j"),
            Formula::Theta(agent("i"), "a".into()),
            Cmp::Lt,
            BigRational::one(),
        );
        assert!(matches!(
            evaluate(&ctx, &p0, &f),
            Err(EvalError::MeasureRequired)
        ));
    }
}
