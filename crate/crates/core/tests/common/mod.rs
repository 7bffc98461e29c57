//! Shared test support: seeded random generators for systems, measures,
//! formulas, and processes, plus brute-force oracles that recompute
//! knowledge and probability directly from definitions.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num::rational::BigRational;
use num::traits::Zero;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use veil_core::csp::{Event, Process, Trace};
use veil_core::logic::{evaluate, EvalContext, Formula};
use veil_core::prob::RunMeasure;
use veil_core::system::{
    AgentId, GlobalState, InterpretedSystem, LocalState, Point, Run, RunEvent, RunId, System,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn agent(name: &str) -> AgentId {
    AgentId::new(name).unwrap()
}

pub fn rid(id: &str) -> RunId {
    RunId::new(id).unwrap()
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// How much of the run an agent's local state reveals.
#[derive(Debug, Clone, Copy)]
enum Visibility {
    /// Constant local state: the agent learns nothing.
    Blind,
    /// A small random datum per (run, time): collisions are frequent.
    Coarse,
    /// The full observation history so far: perfect recall by construction.
    History,
}

#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub agents: usize,
    pub runs: usize,
    pub horizon: usize,
    /// Restrict the action `a` to at most one performer per run.
    pub exclusive_a: bool,
    /// Embed the time in every local state.
    pub synchronous: bool,
    /// Force the last agent (the conventional observer) to full-history view.
    pub observer_recall: bool,
    /// Add random interpretations for propositions `p` and `q`.
    pub with_props: bool,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            agents: 3,
            runs: 4,
            horizon: 2,
            exclusive_a: false,
            synchronous: false,
            observer_recall: false,
            with_props: true,
        }
    }
}

impl SystemSpec {
    pub fn sample(rng: &mut ChaCha8Rng) -> Self {
        SystemSpec {
            agents: rng.gen_range(2..=4),
            runs: rng.gen_range(1..=5),
            horizon: rng.gen_range(0..=3),
            exclusive_a: rng.gen_bool(0.5),
            synchronous: rng.gen_bool(0.5),
            observer_recall: rng.gen_bool(0.5),
            with_props: true,
        }
    }
}

pub const ACTIONS: [&str; 2] = ["a", "b"];

/// The conventional observer of a generated system: the last roster agent.
pub fn observer_of(system: &InterpretedSystem) -> AgentId {
    system.roster().last().unwrap().clone()
}

/// Generates a valid random interpreted system per `spec`.
pub fn random_system(rng: &mut ChaCha8Rng, spec: &SystemSpec) -> InterpretedSystem {
    let roster: Vec<AgentId> = (0..spec.agents).map(|i| agent(&format!("g{i}"))).collect();
    let visibility: Vec<Visibility> = roster
        .iter()
        .enumerate()
        .map(|(idx, _)| {
            if spec.observer_recall && idx == spec.agents - 1 {
                Visibility::History
            } else {
                match rng.gen_range(0..3) {
                    0 => Visibility::Blind,
                    1 => Visibility::Coarse,
                    _ => Visibility::History,
                }
            }
        })
        .collect();

    let mut runs = Vec::new();
    for run_idx in 0..spec.runs {
        // raw per-time observations, shared across agents before filtering
        let observations: Vec<i64> = (0..=spec.horizon).map(|_| rng.gen_range(0..3)).collect();
        let states: Vec<GlobalState> = (0..=spec.horizon)
            .map(|time| {
                let locals = roster
                    .iter()
                    .zip(&visibility)
                    .map(|(who, vis)| {
                        let state = match vis {
                            Visibility::Blind => LocalState::Int(0),
                            Visibility::Coarse => {
                                LocalState::Int(observations[time] + rng.gen_range(0..2))
                            }
                            Visibility::History => LocalState::list(
                                observations[..=time].iter().map(|&o| LocalState::Int(o)),
                            ),
                        };
                        (who.clone(), state)
                    })
                    .collect();
                GlobalState {
                    env: LocalState::Int(run_idx as i64),
                    locals,
                }
            })
            .collect();

        let mut events = BTreeSet::new();
        if spec.exclusive_a {
            if rng.gen_bool(0.75) {
                events.insert(RunEvent {
                    agent: roster[rng.gen_range(0..roster.len())].clone(),
                    action: "a".to_string(),
                    time: rng.gen_range(0..=spec.horizon),
                });
            }
        } else {
            for _ in 0..rng.gen_range(0..3) {
                events.insert(RunEvent {
                    agent: roster[rng.gen_range(0..roster.len())].clone(),
                    action: "a".to_string(),
                    time: rng.gen_range(0..=spec.horizon),
                });
            }
        }
        for _ in 0..rng.gen_range(0..3) {
            events.insert(RunEvent {
                agent: roster[rng.gen_range(0..roster.len())].clone(),
                action: "b".to_string(),
                time: rng.gen_range(0..=spec.horizon),
            });
        }
        runs.push(Run {
            id: rid(&format!("r{run_idx}")),
            states,
            events,
        });
    }

    // Blind agents produce time-crossing knowledge sets; synchronous specs
    // must give even them a clock.
    if spec.synchronous {
        for run in &mut runs {
            for (time, state) in run.states.iter_mut().enumerate() {
                for state_value in state.locals.values_mut() {
                    let clocked =
                        LocalState::list([LocalState::Int(time as i64), state_value.clone()]);
                    *state_value = clocked;
                }
            }
        }
    }

    let system = System::new(roster, runs).unwrap();
    let mut interpretation: BTreeMap<String, BTreeSet<Point>> = BTreeMap::new();
    if spec.with_props {
        for prop in ["p", "q"] {
            let points: BTreeSet<Point> = system.points().filter(|_| rng.gen_bool(0.4)).collect();
            interpretation.insert(prop.to_string(), points);
        }
    }
    InterpretedSystem::new(system, interpretation).unwrap()
}

/// A random measure over the runs; strictly positive unless `allow_zero`.
pub fn random_measure(rng: &mut ChaCha8Rng, system: &System, allow_zero: bool) -> RunMeasure {
    let lows = if allow_zero { 0 } else { 1 };
    let raw: Vec<i64> = system
        .runs()
        .iter()
        .map(|_| rng.gen_range(lows..=6))
        .collect();
    let mut total: i64 = raw.iter().sum();
    let mut raw = raw;
    if total == 0 {
        raw[0] = 1;
        total = 1;
    }
    let weights = system
        .runs()
        .iter()
        .zip(&raw)
        .map(|(run, &w)| (run.id.clone(), ratio(w, total)))
        .collect();
    RunMeasure::new(system, weights).unwrap()
}

/// Random propositional/epistemic formula (no probability operators).
pub fn random_formula(rng: &mut ChaCha8Rng, system: &InterpretedSystem, depth: usize) -> Formula {
    let roster = system.roster();
    let pick_agent = |rng: &mut ChaCha8Rng| roster[rng.gen_range(0..roster.len())].clone();
    if depth == 0 {
        return match rng.gen_range(0..5) {
            0 => Formula::Prop("p".to_string()),
            1 => Formula::Prop("q".to_string()),
            2 => Formula::Theta(pick_agent(rng), "a".to_string()),
            3 => Formula::Delta(pick_agent(rng), "a".to_string()),
            _ => Formula::ThetaOther(pick_agent(rng), "b".to_string()),
        };
    }
    match rng.gen_range(0..7) {
        0 => Formula::not(random_formula(rng, system, depth - 1)),
        1 => Formula::and(
            random_formula(rng, system, depth - 1),
            random_formula(rng, system, depth - 1),
        ),
        2 => Formula::or(
            random_formula(rng, system, depth - 1),
            random_formula(rng, system, depth - 1),
        ),
        3 => Formula::implies(
            random_formula(rng, system, depth - 1),
            random_formula(rng, system, depth - 1),
        ),
        4 => Formula::knows(pick_agent(rng), random_formula(rng, system, depth - 1)),
        5 => Formula::poss(pick_agent(rng), random_formula(rng, system, depth - 1)),
        _ => random_formula(rng, system, 0),
    }
}

/// Random formula that may also contain probability comparisons.
pub fn random_prob_formula(
    rng: &mut ChaCha8Rng,
    system: &InterpretedSystem,
    depth: usize,
) -> Formula {
    if depth > 0 && rng.gen_bool(0.3) {
        let roster = system.roster();
        let agent = roster[rng.gen_range(0..roster.len())].clone();
        let target = random_formula(rng, system, depth - 1);
        let condition = if rng.gen_bool(0.3) {
            Some(random_formula(rng, system, depth - 1))
        } else {
            None
        };
        let cmp = match rng.gen_range(0..5) {
            0 => veil_core::Cmp::Lt,
            1 => veil_core::Cmp::Le,
            2 => veil_core::Cmp::Eq,
            3 => veil_core::Cmp::Ge,
            _ => veil_core::Cmp::Gt,
        };
        let bound = ratio(rng.gen_range(0..=4), 4);
        return Formula::ProbCmp {
            agent,
            target: Box::new(target),
            condition: condition.map(Box::new),
            cmp,
            bound: veil_core::ProbBound::Const(bound),
        };
    }
    random_formula(rng, system, depth)
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

/// Knowledge set recomputed straight from the definition: all points whose
/// local state for `who` equals the one at `p`.
pub fn oracle_knowledge_set(system: &InterpretedSystem, who: &AgentId, p: &Point) -> Vec<Point> {
    let reference = system.system().local_state(who, p).unwrap();
    system
        .system()
        .points()
        .filter(|q| system.system().local_state(who, q).unwrap() == reference)
        .collect()
}

/// Fiber weights of mu_{r,m,i} recomputed by scanning runs.
pub fn oracle_condition(
    system: &InterpretedSystem,
    measure: &RunMeasure,
    who: &AgentId,
    p: &Point,
) -> Option<BTreeMap<RunId, BigRational>> {
    let class = oracle_knowledge_set(system, who, p);
    let runs: BTreeSet<RunId> = class.iter().map(|q| q.run.clone()).collect();
    let denom: BigRational = runs
        .iter()
        .map(|r| measure.weight(r).unwrap().clone())
        .sum();
    if denom.is_zero() {
        return None;
    }
    Some(
        runs.into_iter()
            .map(|r| {
                let w = measure.weight(&r).unwrap().clone();
                (r, w / denom.clone())
            })
            .collect(),
    )
}

#[derive(Debug, PartialEq, Eq)]
pub enum OracleProbability {
    Value(BigRational),
    ZeroClass,
    NonMeasurable,
    ZeroCondition,
}

/// Point probability recomputed by enumerating the class and its fibers.
/// Formula truth at single points comes from the evaluator; everything
/// measure-theoretic is recomputed here.
pub fn oracle_point_probability(
    system: &InterpretedSystem,
    measure: &RunMeasure,
    who: &AgentId,
    p: &Point,
    target: &Formula,
    condition: Option<&Formula>,
) -> OracleProbability {
    let Some(fibers) = oracle_condition(system, measure, who, p) else {
        return OracleProbability::ZeroClass;
    };
    let class = oracle_knowledge_set(system, who, p);
    let ctx = EvalContext::with_measure(system, measure);
    let mass_of = |formula: &Formula| -> Result<BigRational, OracleProbability> {
        let mut mass = BigRational::zero();
        for (run, weight) in &fibers {
            let fiber: Vec<&Point> = class.iter().filter(|q| &q.run == run).collect();
            let truths: Vec<bool> = fiber
                .iter()
                .map(|q| evaluate(&ctx, q, formula).expect("oracle formulas evaluate"))
                .collect();
            if truths.iter().all(|&t| t) {
                mass += weight.clone();
            } else if truths.iter().any(|&t| t) {
                return Err(OracleProbability::NonMeasurable);
            }
        }
        Ok(mass)
    };
    match condition {
        None => match mass_of(target) {
            Ok(v) => OracleProbability::Value(v),
            Err(e) => e,
        },
        Some(cond) => {
            let cond_mass = match mass_of(cond) {
                Ok(v) => v,
                Err(e) => return e,
            };
            if cond_mass.is_zero() {
                return OracleProbability::ZeroCondition;
            }
            let joint = Formula::and(target.clone(), cond.clone());
            match mass_of(&joint) {
                Ok(v) => OracleProbability::Value(v / cond_mass),
                Err(e) => e,
            }
        }
    }
}

/// Direct event-log reading of theta / delta, for cross-checking evaluate.
pub fn oracle_theta(system: &InterpretedSystem, who: &AgentId, action: &str, p: &Point) -> bool {
    system
        .system()
        .run(&p.run)
        .unwrap()
        .events
        .iter()
        .any(|e| &e.agent == who && e.action == action)
}

pub fn oracle_delta(system: &InterpretedSystem, who: &AgentId, action: &str, p: &Point) -> bool {
    system
        .system()
        .run(&p.run)
        .unwrap()
        .events
        .iter()
        .any(|e| &e.agent == who && e.action == action && e.time <= p.time)
}

// ---------------------------------------------------------------------------
// Random processes
// ---------------------------------------------------------------------------

/// A random prefix-closed process over a small alphabet containing dotted
/// `i.act` events, each trace using the dotted action at most once.
/// When `symmetric`, the process is closed under interchanging the dotted
/// events, making it strongly anonymous by construction.
pub fn random_process(rng: &mut ChaCha8Rng, symmetric: bool) -> (Process, BTreeSet<Event>) {
    let performers = rng.gen_range(2..=3);
    let renamed: BTreeSet<Event> = (0..performers)
        .map(|i| Event::new(format!("{i}.act")))
        .collect();
    let plain: Vec<Event> = ["x", "y", "z"]
        .iter()
        .take(rng.gen_range(1..=3))
        .map(|e| Event::new(*e))
        .collect();
    let alphabet: BTreeSet<Event> = renamed
        .iter()
        .cloned()
        .chain(plain.iter().cloned())
        .collect();

    let renamed_vec: Vec<Event> = renamed.iter().cloned().collect();
    let mut traces: Vec<Trace> = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let mut trace = Vec::new();
        let mut used_dotted = false;
        for _ in 0..rng.gen_range(0..=4) {
            if !used_dotted && rng.gen_bool(0.4) {
                trace.push(renamed_vec[rng.gen_range(0..renamed_vec.len())].clone());
                used_dotted = true;
            } else {
                trace.push(plain[rng.gen_range(0..plain.len())].clone());
            }
        }
        traces.push(trace);
    }
    let process = Process::closed(alphabet.clone(), traces).unwrap();
    if !symmetric {
        return (process, renamed);
    }
    // close under interchange of renamed events
    let mut symmetric_traces: BTreeSet<Trace> = BTreeSet::new();
    for trace in process.traces() {
        symmetric_traces.extend(expand_dotted(trace, &renamed_vec));
    }
    (Process::new(alphabet, symmetric_traces).unwrap(), renamed)
}

fn expand_dotted(trace: &[Event], renamed: &[Event]) -> Vec<Trace> {
    let mut expanded: Vec<Trace> = vec![Vec::new()];
    for event in trace {
        if renamed.contains(event) {
            expanded = expanded
                .into_iter()
                .flat_map(|prefix| {
                    renamed.iter().map(move |candidate| {
                        let mut next = prefix.clone();
                        next.push(candidate.clone());
                        next
                    })
                })
                .collect();
        } else {
            for prefix in &mut expanded {
                prefix.push(event.clone());
            }
        }
    }
    expanded
}
