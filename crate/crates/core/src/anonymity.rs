//! One checker per anonymity definition. Each checker compiles the property
//! to a formula, decides validity over all points, and reports the least
//! counterexample together with a per-agent diagnostics table.

use std::collections::BTreeSet;

use num::rational::BigRational;
use num::traits::One;
use thiserror::Error;

use crate::error::EvalError;
use crate::logic::{evaluate, valid_in, Cmp, EvalContext, Formula};
use crate::prob::{point_probability, run_event_probability};
use crate::system::{AgentId, Point};

/// Whether a check reads `theta` (performs, now or later) or `delta`
/// (has performed) occurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Theta,
    Delta,
}

impl Mode {
    fn occurrence(&self, agent: AgentId, action: &str) -> Formula {
        match self {
            Mode::Theta => Formula::Theta(agent, action.to_string()),
            Mode::Delta => Formula::Delta(agent, action.to_string()),
        }
    }
}

/// The anonymity definition a query asks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Minimal,
    Total,
    UpToSet,
    KAnonymous,
    Alpha,
    StrongProbUpToSet,
    BeyondSuspicion,
    Conditional,
    ConditionalWrt,
    MinUnlinkable,
}

/// A fully described anonymity question: who acted, what is checked, who
/// observes, and the definition-specific parameters.
#[derive(Debug, Clone)]
pub struct AnonymityQuery {
    pub kind: QueryKind,
    pub actor: AgentId,
    pub action: String,
    /// Second action for unlinkability queries.
    pub second_action: Option<String>,
    pub observer: AgentId,
    pub anonymity_set: Option<BTreeSet<AgentId>>,
    pub k: Option<usize>,
    pub alpha: Option<BigRational>,
    pub phi: Option<Formula>,
    pub mode: Mode,
}

impl AnonymityQuery {
    pub fn new(
        kind: QueryKind,
        actor: AgentId,
        action: impl Into<String>,
        observer: AgentId,
    ) -> Self {
        AnonymityQuery {
            kind,
            actor,
            action: action.into(),
            second_action: None,
            observer,
            anonymity_set: None,
            k: None,
            alpha: None,
            phi: None,
            mode: Mode::Theta,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_set(mut self, set: impl IntoIterator<Item = AgentId>) -> Self {
        self.anonymity_set = Some(set.into_iter().collect());
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_alpha(mut self, alpha: BigRational) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_phi(mut self, phi: Formula) -> Self {
        self.phi = Some(phi);
        self
    }

    pub fn with_second_action(mut self, action: impl Into<String>) -> Self {
        self.second_action = Some(action.into());
        self
    }
}

/// One row of the diagnostics table: how plausible a candidate performer is
/// to the observer at the witness point.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentAssessment {
    pub agent: AgentId,
    /// P_j theta(agent, action) at the witness.
    pub possible: bool,
    /// Pr_j(theta(agent, action)) at the witness, when a measure is present
    /// and the event is measurable there.
    pub posterior: Option<BigRational>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub flags: Vec<String>,
    pub table: Vec<AgentAssessment>,
}

/// Verdict of a checker: the compiled formula, whether it is valid, and the
/// least counterexample when it is not.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub holds: bool,
    pub compiled: Formula,
    pub witness: Option<Point>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("query kind {0:?} requires parameter {1}")]
    MissingParameter(QueryKind, &'static str),
    #[error("k must satisfy 1 <= k <= |roster| (got {k}, roster size {roster})")]
    KOutOfRange { k: usize, roster: usize },
    #[error("alpha must lie in (0, 1] (got {0})")]
    AlphaOutOfRange(String),
    #[error("delta-mode probabilistic checks are only defined in synchronous systems")]
    DeltaModeAsynchronous,
    #[error("query kind {0:?} does not match checker {1}")]
    KindMismatch(QueryKind, &'static str),
}

fn expect_kind(q: &AnonymityQuery, kind: QueryKind, name: &'static str) -> Result<(), CheckError> {
    if q.kind != kind {
        return Err(CheckError::KindMismatch(q.kind, name));
    }
    Ok(())
}

/// Flags shared by most checkers: actions nobody ever performs and observers
/// sitting inside their own anonymity set.
fn common_flags(ctx: &EvalContext, q: &AnonymityQuery) -> Vec<String> {
    let mut flags = Vec::new();
    let performed = ctx
        .system
        .system()
        .runs()
        .iter()
        .any(|r| r.events.iter().any(|e| e.action == q.action));
    if !performed {
        flags.push(format!(
            "action {:?} does not occur in any event log; the check is trivial",
            q.action
        ));
    }
    if let Some(set) = &q.anonymity_set {
        if set.contains(&q.observer) {
            flags.push(format!(
                "anonymity set contains the observer {}",
                q.observer
            ));
        }
        if set.is_empty() {
            flags.push("empty anonymity set: vacuously true".to_string());
        }
    }
    flags
}

/// Builds the per-agent possibility/posterior table at a witness point.
fn assessment_table(
    ctx: &EvalContext,
    q: &AnonymityQuery,
    witness: &Point,
) -> Result<Vec<AgentAssessment>, CheckError> {
    let mut table = Vec::new();
    for candidate in ctx.system.roster() {
        let occurrence = q.mode.occurrence(candidate.clone(), &q.action);
        let possible = evaluate(
            ctx,
            witness,
            &Formula::poss(q.observer.clone(), occurrence.clone()),
        )?;
        let posterior = match ctx.measure {
            Some(measure) => {
                point_probability(measure, ctx.system, &q.observer, witness, &occurrence, None).ok()
            }
            None => None,
        };
        table.push(AgentAssessment {
            agent: candidate.clone(),
            possible,
            posterior,
        });
    }
    Ok(table)
}

/// Runs `valid_in` on a compiled formula and assembles the report.
fn report(
    ctx: &EvalContext,
    q: &AnonymityQuery,
    compiled: Formula,
    mut flags: Vec<String>,
) -> Result<CheckReport, CheckError> {
    let verdict = valid_in(ctx, &compiled)?;
    let mut table = Vec::new();
    if let Some(witness) = &verdict.witness {
        table = assessment_table(ctx, q, witness)?;
    }
    flags.extend(common_flags(ctx, q));
    Ok(CheckReport {
        holds: verdict.holds,
        compiled,
        witness: verdict.witness,
        diagnostics: Diagnostics { flags, table },
    })
}

/// Minimal anonymity: the observer never knows the actor performed the action.
pub fn check_minimal(ctx: &EvalContext, q: &AnonymityQuery) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::Minimal, "check_minimal")?;
    let occurrence = q.mode.occurrence(q.actor.clone(), &q.action);
    let compiled = Formula::not(Formula::knows(q.observer.clone(), occurrence));
    report(ctx, q, compiled, Vec::new())
}

/// Total anonymity: whenever the actor performs the action, the observer
/// considers every other agent a possible performer.
pub fn check_total(ctx: &EvalContext, q: &AnonymityQuery) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::Total, "check_total")?;
    let candidates: Vec<AgentId> = ctx
        .system
        .roster()
        .iter()
        .filter(|a| **a != q.observer)
        .cloned()
        .collect();
    let mut flags = Vec::new();
    if candidates.is_empty() {
        flags.push("no agents besides the observer: vacuously true".to_string());
    }
    let antecedent = q.mode.occurrence(q.actor.clone(), &q.action);
    let conjuncts = candidates
        .into_iter()
        .map(|other| Formula::poss(q.observer.clone(), q.mode.occurrence(other, &q.action)));
    let compiled = Formula::implies(antecedent, Formula::conjunction(conjuncts));
    report(ctx, q, compiled, flags)
}

/// Anonymity up to a set: every member of the set stays a possible performer.
pub fn check_up_to(ctx: &EvalContext, q: &AnonymityQuery) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::UpToSet, "check_up_to")?;
    let set = q
        .anonymity_set
        .as_ref()
        .ok_or(CheckError::MissingParameter(q.kind, "anonymity_set"))?;
    let antecedent = q.mode.occurrence(q.actor.clone(), &q.action);
    let conjuncts = set.iter().map(|other| {
        Formula::poss(
            q.observer.clone(),
            q.mode.occurrence(other.clone(), &q.action),
        )
    });
    let compiled = Formula::implies(antecedent, Formula::conjunction(conjuncts));
    report(ctx, q, compiled, Vec::new())
}

fn subsets_of_size(items: &[AgentId], k: usize) -> Vec<Vec<AgentId>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (idx, first) in items.iter().enumerate() {
        for mut rest in subsets_of_size(&items[idx + 1..], k - 1) {
            let mut subset = vec![first.clone()];
            subset.append(&mut rest);
            out.push(subset);
        }
    }
    out
}

/// k-anonymity: at every point where the actor performs the action, some set
/// of k agents are all possible performers.
///
/// The reported formula is the literal disjunction over k-subsets; the
/// decision procedure counts possible performers instead, which is
/// equivalent because possibility per candidate is independent.
pub fn check_k(ctx: &EvalContext, q: &AnonymityQuery) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::KAnonymous, "check_k")?;
    let k = q.k.ok_or(CheckError::MissingParameter(q.kind, "k"))?;
    let roster = ctx.system.roster();
    if k == 0 || k > roster.len() {
        return Err(CheckError::KOutOfRange {
            k,
            roster: roster.len(),
        });
    }
    let antecedent = q.mode.occurrence(q.actor.clone(), &q.action);
    let disjuncts =
        subsets_of_size(roster, k).into_iter().map(|subset| {
            Formula::conjunction(subset.into_iter().map(|other| {
                Formula::poss(q.observer.clone(), q.mode.occurrence(other, &q.action))
            }))
        });
    let compiled = Formula::implies(antecedent.clone(), Formula::disjunction(disjuncts));

    // Count-based decision, with the least failing point in canonical order.
    let mut witness = None;
    for p in ctx.system.system().points() {
        if !evaluate(ctx, &p, &antecedent)? {
            continue;
        }
        let mut possible = 0usize;
        for candidate in roster {
            let f = Formula::poss(
                q.observer.clone(),
                q.mode.occurrence(candidate.clone(), &q.action),
            );
            if evaluate(ctx, &p, &f)? {
                possible += 1;
            }
        }
        if possible < k {
            witness = Some(p);
            break;
        }
    }
    let mut flags = common_flags(ctx, q);
    let mut table = Vec::new();
    if let Some(w) = &witness {
        table = assessment_table(ctx, q, w)?;
    } else {
        flags.push(format!("every {}-subset requirement met by counting", k));
    }
    Ok(CheckReport {
        holds: witness.is_none(),
        compiled,
        witness,
        diagnostics: Diagnostics { flags, table },
    })
}

fn probabilistic_mode_guard(
    ctx: &EvalContext,
    q: &AnonymityQuery,
    flags: &mut Vec<String>,
) -> Result<(), CheckError> {
    if q.mode == Mode::Delta {
        if !ctx.system.is_synchronous() {
            return Err(CheckError::DeltaModeAsynchronous);
        }
        flags.push(
            "delta mode on a synchronous system: all delta events are measurable".to_string(),
        );
    }
    Ok(())
}

/// alpha-anonymity: whenever the actor performs the action, the observer's
/// posterior for it stays strictly below alpha.
pub fn check_alpha(ctx: &EvalContext, q: &AnonymityQuery) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::Alpha, "check_alpha")?;
    let alpha = q
        .alpha
        .as_ref()
        .ok_or(CheckError::MissingParameter(q.kind, "alpha"))?;
    if *alpha <= BigRational::from_integer(0.into()) || *alpha > BigRational::one() {
        return Err(CheckError::AlphaOutOfRange(alpha.to_string()));
    }
    if ctx.measure.is_none() {
        return Err(CheckError::Eval(EvalError::MeasureRequired));
    }
    let mut flags = Vec::new();
    probabilistic_mode_guard(ctx, q, &mut flags)?;
    let occurrence = q.mode.occurrence(q.actor.clone(), &q.action);
    let compiled = Formula::implies(
        occurrence.clone(),
        Formula::ProbCmp {
            agent: q.observer.clone(),
            target: Box::new(occurrence),
            condition: None,
            cmp: Cmp::Lt,
            bound: crate::logic::ProbBound::Const(alpha.clone()),
        },
    );
    report(ctx, q, compiled, flags)
}

fn posterior_comparison_formula(q: &AnonymityQuery, cmp: Cmp, set: &BTreeSet<AgentId>) -> Formula {
    let own = q.mode.occurrence(q.actor.clone(), &q.action);
    let conjuncts = set.iter().map(|other| Formula::ProbCmp {
        agent: q.observer.clone(),
        target: Box::new(own.clone()),
        condition: None,
        cmp,
        bound: crate::logic::ProbBound::Pr {
            agent: q.observer.clone(),
            target: Box::new(q.mode.occurrence(other.clone(), &q.action)),
            condition: None,
        },
    });
    Formula::implies(own.clone(), Formula::conjunction(conjuncts))
}

/// Strong probabilistic anonymity up to a set: the observer's posterior is
/// identical for the actor and every member of the set.
pub fn check_strong_prob_up_to(
    ctx: &EvalContext,
    q: &AnonymityQuery,
) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::StrongProbUpToSet, "check_strong_prob_up_to")?;
    let set = q
        .anonymity_set
        .as_ref()
        .ok_or(CheckError::MissingParameter(q.kind, "anonymity_set"))?;
    if ctx.measure.is_none() {
        return Err(CheckError::Eval(EvalError::MeasureRequired));
    }
    let mut flags = Vec::new();
    probabilistic_mode_guard(ctx, q, &mut flags)?;
    let compiled = posterior_comparison_formula(q, Cmp::Eq, set);
    report(ctx, q, compiled, flags)
}

/// Beyond suspicion: the actor never looks more likely than any member of
/// the set.
pub fn check_beyond_suspicion(
    ctx: &EvalContext,
    q: &AnonymityQuery,
) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::BeyondSuspicion, "check_beyond_suspicion")?;
    let set = q
        .anonymity_set
        .as_ref()
        .ok_or(CheckError::MissingParameter(q.kind, "anonymity_set"))?;
    if ctx.measure.is_none() {
        return Err(CheckError::Eval(EvalError::MeasureRequired));
    }
    let mut flags = Vec::new();
    probabilistic_mode_guard(ctx, q, &mut flags)?;
    let compiled = posterior_comparison_formula(q, Cmp::Le, set);
    report(ctx, q, compiled, flags)
}

/// The prior of `target` among runs satisfying `given`, both taken as
/// run events.
fn run_prior(
    ctx: &EvalContext,
    target: &Formula,
    given: &Formula,
) -> Result<BigRational, CheckError> {
    let measure = ctx.measure.ok_or(EvalError::MeasureRequired)?;
    let given_runs = crate::logic::satisfying_runs(ctx, given)?;
    let given_mass = run_event_probability(measure, given_runs.iter())?;
    if given_mass == BigRational::from_integer(0.into()) {
        return Err(CheckError::Eval(EvalError::ZeroConditioningEvent));
    }
    let joint = Formula::and(target.clone(), given.clone());
    let joint_runs = crate::logic::satisfying_runs(ctx, &joint)?;
    let joint_mass = run_event_probability(measure, joint_runs.iter())?;
    Ok(joint_mass / given_mass)
}

/// Conditional anonymity: once the observer knows somebody else performed the
/// action, her posterior for the actor equals the prior conditioned on that.
pub fn check_conditional(ctx: &EvalContext, q: &AnonymityQuery) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::Conditional, "check_conditional")?;
    let others = Formula::ThetaOther(q.observer.clone(), q.action.clone());
    let target = Formula::Theta(q.actor.clone(), q.action.clone());
    let prior = run_prior(ctx, &target, &others)?;
    let compiled = Formula::implies(
        Formula::knows(q.observer.clone(), others),
        Formula::prob_cmp(q.observer.clone(), target, Cmp::Eq, prior),
    );
    report(ctx, q, compiled, Vec::new())
}

/// Conditional anonymity with respect to an arbitrary learnable fact `phi`.
pub fn check_conditional_wrt(
    ctx: &EvalContext,
    q: &AnonymityQuery,
) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::ConditionalWrt, "check_conditional_wrt")?;
    let phi = q
        .phi
        .as_ref()
        .ok_or(CheckError::MissingParameter(q.kind, "phi"))?;
    let target = Formula::Theta(q.actor.clone(), q.action.clone());
    let prior = run_prior(ctx, &target, phi)?;
    let compiled = Formula::implies(
        Formula::knows(q.observer.clone(), phi.clone()),
        Formula::prob_cmp(q.observer.clone(), target, Cmp::Eq, prior),
    );
    report(ctx, q, compiled, Vec::new())
}

/// Minimal unlinkability of two actions: the observer never knows that one
/// agent performed both.
pub fn check_min_unlinkability(
    ctx: &EvalContext,
    q: &AnonymityQuery,
) -> Result<CheckReport, CheckError> {
    expect_kind(q, QueryKind::MinUnlinkable, "check_min_unlinkability")?;
    let second = q
        .second_action
        .as_ref()
        .ok_or(CheckError::MissingParameter(q.kind, "second_action"))?;
    let shared_performer = Formula::disjunction(ctx.system.roster().iter().map(|agent| {
        Formula::and(
            Formula::Theta(agent.clone(), q.action.clone()),
            Formula::Theta(agent.clone(), second.clone()),
        )
    }));
    let mut flags = Vec::new();
    let co_performed = ctx.system.system().runs().iter().any(|run| {
        ctx.system
            .roster()
            .iter()
            .any(|agent| run.performs(agent, &q.action) && run.performs(agent, second))
    });
    if !co_performed {
        flags.push(format!(
            "no agent ever performs both {:?} and {:?}; the check is trivial",
            q.action, second
        ));
    }
    let compiled = Formula::not(Formula::knows(q.observer.clone(), shared_performer));
    report(ctx, q, compiled, flags)
}

/// True iff no run's event log records `action` performed by two distinct
/// agents. The observer argument does not affect the result; it mirrors the
/// shape of the compiled hypothesis.
pub fn exclusivity_holds(ctx: &EvalContext, action: &str, _observer: &AgentId) -> bool {
    ctx.system
        .system()
        .runs()
        .iter()
        .all(|run| run.performers(action).len() <= 1)
}

/// Dispatches a query to its checker.
pub fn check(ctx: &EvalContext, q: &AnonymityQuery) -> Result<CheckReport, CheckError> {
    match q.kind {
        QueryKind::Minimal => check_minimal(ctx, q),
        QueryKind::Total => check_total(ctx, q),
        QueryKind::UpToSet => check_up_to(ctx, q),
        QueryKind::KAnonymous => check_k(ctx, q),
        QueryKind::Alpha => check_alpha(ctx, q),
        QueryKind::StrongProbUpToSet => check_strong_prob_up_to(ctx, q),
        QueryKind::BeyondSuspicion => check_beyond_suspicion(ctx, q),
        QueryKind::Conditional => check_conditional(ctx, q),
        QueryKind::ConditionalWrt => check_conditional_wrt(ctx, q),
        QueryKind::MinUnlinkable => check_min_unlinkability(ctx, q),
    }
}
