//! Exact-rational measures on runs and their conditioning to points.

use std::collections::{BTreeMap, BTreeSet};

use num::rational::BigRational;
use num::traits::{One, Zero};

use crate::error::{EvalError, ModelError};
use crate::logic::{evaluate, EvalContext, Formula};
use crate::ratio::render_rational;
use crate::system::{AgentId, InterpretedSystem, Point, RunId, System};

/// A probability measure on the runs of a system.
///
/// Weights are exact rationals that sum to exactly 1; every subset of the
/// (finite) run set is measurable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMeasure {
    weights: BTreeMap<RunId, BigRational>,
}

impl RunMeasure {
    pub fn new(system: &System, weights: BTreeMap<RunId, BigRational>) -> Result<Self, ModelError> {
        for (run, weight) in &weights {
            if system.run(run).is_none() {
                return Err(ModelError::MeasureDomainMismatch(run.to_string()));
            }
            if *weight < BigRational::zero() {
                return Err(ModelError::NegativeWeight(run.to_string()));
            }
        }
        for run in system.runs() {
            if !weights.contains_key(&run.id) {
                return Err(ModelError::MeasureDomainMismatch(run.id.to_string()));
            }
        }
        let total: BigRational = weights.values().sum();
        if !total.is_one() {
            return Err(ModelError::MeasureNotNormalized(render_rational(&total)));
        }
        Ok(RunMeasure { weights })
    }

    /// Uniform measure over the runs of `system`.
    pub fn uniform(system: &System) -> Self {
        let n = BigRational::from_integer(system.runs().len().into());
        RunMeasure {
            weights: system
                .runs()
                .iter()
                .map(|r| (r.id.clone(), BigRational::one() / n.clone()))
                .collect(),
        }
    }

    pub fn weight(&self, run: &RunId) -> Option<&BigRational> {
        self.weights.get(run)
    }

    pub fn weights(&self) -> &BTreeMap<RunId, BigRational> {
        &self.weights
    }
}

/// The measure mu_{r,m,i}: the run measure conditioned on the runs passing
/// through agent `i`'s knowledge set at a point, lifted to run fibers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointMeasure {
    pub base: Point,
    pub agent: AgentId,
    pub class: Vec<Point>,
    pub fiber_weights: BTreeMap<RunId, BigRational>,
}

/// Conditions `measure` on the runs through `agent`'s knowledge set at `p`.
pub fn condition_at(
    measure: &RunMeasure,
    system: &InterpretedSystem,
    agent: &AgentId,
    p: &Point,
) -> Result<PointMeasure, EvalError> {
    if !system.system().has_agent(agent) {
        return Err(EvalError::UnknownAgent(agent.clone()));
    }
    if !system.system().contains_point(p) {
        return Err(EvalError::UnknownPoint(p.run.to_string(), p.time));
    }
    let class: Vec<Point> = system
        .knowledge_set(agent, p)
        .expect("agent checked against roster")
        .to_vec();
    let runs_through: BTreeSet<RunId> = class.iter().map(|q| q.run.clone()).collect();
    let denom: BigRational = runs_through
        .iter()
        .map(|r| measure.weight(r).cloned().unwrap_or_else(BigRational::zero))
        .sum();
    if denom.is_zero() {
        return Err(EvalError::ZeroProbabilityClass {
            agent: agent.clone(),
            point: p.clone(),
        });
    }
    let fiber_weights = runs_through
        .into_iter()
        .map(|r| {
            let w = measure
                .weight(&r)
                .cloned()
                .unwrap_or_else(BigRational::zero);
            (r, w / denom.clone())
        })
        .collect();
    Ok(PointMeasure {
        base: p.clone(),
        agent: agent.clone(),
        class,
        fiber_weights,
    })
}

/// Mass assigned by `point_measure` to the points of `class` satisfying
/// `formula`, provided that set is a union of complete run fibers.
fn measurable_mass(
    point_measure: &PointMeasure,
    ctx: &EvalContext,
    formula: &Formula,
) -> Result<BigRational, EvalError> {
    // Run-stable formulas cannot cut a fiber; evaluate once per run.
    if formula.is_run_stable() {
        let mut mass = BigRational::zero();
        let mut seen: BTreeSet<&RunId> = BTreeSet::new();
        for q in &point_measure.class {
            if seen.insert(&q.run) && evaluate(ctx, q, formula)? {
                mass += point_measure.fiber_weights[&q.run].clone();
            }
        }
        return Ok(mass);
    }
    let mut fiber_total: BTreeMap<&RunId, usize> = BTreeMap::new();
    let mut fiber_sat: BTreeMap<&RunId, usize> = BTreeMap::new();
    for q in &point_measure.class {
        *fiber_total.entry(&q.run).or_default() += 1;
        if evaluate(ctx, q, formula)? {
            *fiber_sat.entry(&q.run).or_default() += 1;
        }
    }
    let mut mass = BigRational::zero();
    for (run, total) in fiber_total {
        let sat = fiber_sat.get(run).copied().unwrap_or(0);
        if sat == 0 {
            continue;
        }
        if sat != total {
            return Err(EvalError::NonMeasurableEvent {
                agent: point_measure.agent.clone(),
                point: point_measure.base.clone(),
            });
        }
        mass += point_measure.fiber_weights[run].clone();
    }
    Ok(mass)
}

/// The probability agent `agent` assigns to `target` at point `p`, optionally
/// conditioned on `condition`.
pub fn point_probability(
    measure: &RunMeasure,
    system: &InterpretedSystem,
    agent: &AgentId,
    p: &Point,
    target: &Formula,
    condition: Option<&Formula>,
) -> Result<BigRational, EvalError> {
    let point_measure = condition_at(measure, system, agent, p)?;
    let ctx = EvalContext::with_measure(system, measure);
    match condition {
        None => measurable_mass(&point_measure, &ctx, target),
        Some(cond) => {
            let cond_mass = measurable_mass(&point_measure, &ctx, cond)?;
            if cond_mass.is_zero() {
                return Err(EvalError::ZeroConditioningEvent);
            }
            let joint = Formula::and(target.clone(), cond.clone());
            let joint_mass = measurable_mass(&point_measure, &ctx, &joint)?;
            Ok(joint_mass / cond_mass)
        }
    }
}

/// mu(S) for a set of runs.
pub fn run_event_probability<'a>(
    measure: &RunMeasure,
    runs: impl IntoIterator<Item = &'a RunId>,
) -> Result<BigRational, EvalError> {
    let mut total = BigRational::zero();
    for run in runs {
        let w = measure
            .weight(run)
            .ok_or_else(|| EvalError::UnknownRun(run.to_string()))?;
        total += w.clone();
    }
    Ok(total)
}

/// mu(e_r(!formula)): the probability that `formula` is violated somewhere
/// in the run.
pub fn violation_probability(
    ctx: &EvalContext,
    formula: &Formula,
) -> Result<BigRational, EvalError> {
    let measure = ctx.measure.ok_or(EvalError::MeasureRequired)?;
    let violated = crate::logic::satisfying_runs(ctx, &Formula::not(formula.clone()))?;
    run_event_probability(measure, violated.iter())
}
