//! Finite interpreted multiagent systems: runs, points, local states, and the
//! indistinguishability machinery behind the knowledge operator.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::ModelError;

fn valid_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.')
}

/// Name of an agent in the roster. `env` is reserved for the environment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Result<Self, ModelError> {
        let name = name.into();
        if !valid_token(&name) {
            return Err(ModelError::InvalidToken(name));
        }
        if name == "env" {
            return Err(ModelError::ReservedAgentName);
        }
        Ok(AgentId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifier of a run within a system.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunId(String);

impl RunId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if !valid_token(&id) {
            return Err(ModelError::InvalidToken(id));
        }
        Ok(RunId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An agent's local state: an opaque datum compared structurally.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocalState {
    Bool(bool),
    Int(i64),
    Text(String),
    List(Vec<LocalState>),
    Map(BTreeMap<String, LocalState>),
}

impl LocalState {
    pub fn text(s: impl Into<String>) -> Self {
        LocalState::Text(s.into())
    }

    pub fn list(items: impl IntoIterator<Item = LocalState>) -> Self {
        LocalState::List(items.into_iter().collect())
    }
}

impl fmt::Display for LocalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalState::Bool(b) => write!(f, "{b}"),
            LocalState::Int(i) => write!(f, "{i}"),
            LocalState::Text(s) => write!(f, "{s:?}"),
            LocalState::List(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            LocalState::Map(entries) => {
                f.write_str("{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Global state: the environment's state plus one local state per roster agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalState {
    pub env: LocalState,
    pub locals: BTreeMap<AgentId, LocalState>,
}

/// A recorded action occurrence: agent, action label, and the time it happens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RunEvent {
    pub agent: AgentId,
    pub action: String,
    pub time: usize,
}

/// One possible execution: a state per time 0..=H plus an event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub id: RunId,
    pub states: Vec<GlobalState>,
    pub events: BTreeSet<RunEvent>,
}

impl Run {
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// True iff `agent` performs `action` anywhere in this run.
    pub fn performs(&self, agent: &AgentId, action: &str) -> bool {
        self.events
            .iter()
            .any(|e| &e.agent == agent && e.action == action)
    }

    /// True iff `agent` performs `action` at some time `<= time`.
    pub fn performed_by(&self, agent: &AgentId, action: &str, time: usize) -> bool {
        self.events
            .iter()
            .any(|e| &e.agent == agent && e.action == action && e.time <= time)
    }

    /// Agents that perform `action` anywhere in this run, deduplicated.
    pub fn performers(&self, action: &str) -> BTreeSet<&AgentId> {
        self.events
            .iter()
            .filter(|e| e.action == action)
            .map(|e| &e.agent)
            .collect()
    }
}

/// A run paired with a time; the unit at which formulas are evaluated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub run: RunId,
    pub time: usize,
}

impl Point {
    pub fn new(run: RunId, time: usize) -> Self {
        Point { run, time }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.run, self.time)
    }
}

/// A finite set of runs over a fixed roster, all sharing one horizon.
///
/// Runs are stored sorted by id so that every derived enumeration (points,
/// knowledge sets, witnesses) has a canonical order.
#[derive(Debug, Clone)]
pub struct System {
    roster: Vec<AgentId>,
    runs: Vec<Run>,
    horizon: usize,
    run_index: BTreeMap<RunId, usize>,
}

impl PartialEq for System {
    fn eq(&self, other: &Self) -> bool {
        self.roster == other.roster && self.runs == other.runs
    }
}

impl Eq for System {}

impl System {
    pub fn new(roster: Vec<AgentId>, mut runs: Vec<Run>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for agent in &roster {
            if !seen.insert(agent.clone()) {
                return Err(ModelError::DuplicateAgent(agent.to_string()));
            }
        }
        if runs.is_empty() {
            return Err(ModelError::NoRuns);
        }
        runs.sort_by(|a, b| a.id.cmp(&b.id));
        let horizon = runs[0].horizon();
        let mut run_index = BTreeMap::new();
        for (idx, run) in runs.iter().enumerate() {
            if run_index.insert(run.id.clone(), idx).is_some() {
                return Err(ModelError::DuplicateRunId(run.id.to_string()));
            }
            if run.states.len() != horizon + 1 {
                return Err(ModelError::HorizonMismatch {
                    run: run.id.to_string(),
                    horizon,
                    expected: horizon + 1,
                    found: run.states.len(),
                });
            }
            for event in &run.events {
                if event.time > horizon {
                    return Err(ModelError::EventPastHorizon {
                        run: run.id.to_string(),
                        agent: event.agent.to_string(),
                        action: event.action.clone(),
                        time: event.time,
                        horizon,
                    });
                }
                if !roster.contains(&event.agent) {
                    return Err(ModelError::EventUnknownAgent {
                        run: run.id.to_string(),
                        agent: event.agent.to_string(),
                    });
                }
            }
            for (time, state) in run.states.iter().enumerate() {
                for agent in &roster {
                    if !state.locals.contains_key(agent) {
                        return Err(ModelError::MissingLocalState {
                            run: run.id.to_string(),
                            time,
                            agent: agent.to_string(),
                        });
                    }
                }
                for agent in state.locals.keys() {
                    if !roster.contains(agent) {
                        return Err(ModelError::LocalStateUnknownAgent {
                            run: run.id.to_string(),
                            time,
                            agent: agent.to_string(),
                        });
                    }
                }
            }
        }
        Ok(System {
            roster,
            runs,
            horizon,
            run_index,
        })
    }

    pub fn roster(&self) -> &[AgentId] {
        &self.roster
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn has_agent(&self, agent: &AgentId) -> bool {
        self.roster.contains(agent)
    }

    pub fn run(&self, id: &RunId) -> Option<&Run> {
        self.run_index.get(id).map(|&i| &self.runs[i])
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.run_index.contains_key(&p.run) && p.time <= self.horizon
    }

    /// All points (r, m) in canonical order: run id ascending, then time.
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.runs.iter().flat_map(move |run| {
            (0..=self.horizon).map(move |time| Point::new(run.id.clone(), time))
        })
    }

    pub fn local_state(&self, agent: &AgentId, p: &Point) -> Option<&LocalState> {
        self.run(&p.run)
            .and_then(|r| r.states.get(p.time))
            .and_then(|s| s.locals.get(agent))
    }
}

/// An interpreted system: a system plus a proposition interpretation.
///
/// Propositions not listed in the interpretation are false everywhere.
#[derive(Debug, Clone)]
pub struct InterpretedSystem {
    system: System,
    interpretation: BTreeMap<String, BTreeSet<Point>>,
    // agent -> local state -> indistinguishability class, precomputed once
    classes: BTreeMap<AgentId, BTreeMap<LocalState, Vec<Point>>>,
}

impl PartialEq for InterpretedSystem {
    fn eq(&self, other: &Self) -> bool {
        self.system == other.system && self.interpretation == other.interpretation
    }
}

impl Eq for InterpretedSystem {}

impl InterpretedSystem {
    pub fn new(
        system: System,
        interpretation: BTreeMap<String, BTreeSet<Point>>,
    ) -> Result<Self, ModelError> {
        for (prop, points) in &interpretation {
            if !valid_token(prop) {
                return Err(ModelError::InvalidToken(prop.clone()));
            }
            for p in points {
                if !system.contains_point(p) {
                    return Err(ModelError::UnknownInterpretationPoint {
                        prop: prop.clone(),
                        run: p.run.to_string(),
                        time: p.time,
                    });
                }
            }
        }
        let mut classes: BTreeMap<AgentId, BTreeMap<LocalState, Vec<Point>>> = BTreeMap::new();
        for agent in system.roster() {
            let mut by_state: BTreeMap<LocalState, Vec<Point>> = BTreeMap::new();
            for p in system.points() {
                let state = system
                    .local_state(agent, &p)
                    .expect("validated total local states")
                    .clone();
                by_state.entry(state).or_default().push(p);
            }
            classes.insert(agent.clone(), by_state);
        }
        Ok(InterpretedSystem {
            system,
            interpretation,
            classes,
        })
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn interpretation(&self) -> &BTreeMap<String, BTreeSet<Point>> {
        &self.interpretation
    }

    pub fn roster(&self) -> &[AgentId] {
        self.system.roster()
    }

    pub fn horizon(&self) -> usize {
        self.system.horizon()
    }

    /// Extends the interpretation with additional propositions.
    pub fn with_props(
        mut self,
        props: BTreeMap<String, BTreeSet<Point>>,
    ) -> Result<Self, ModelError> {
        for (prop, points) in props {
            if !valid_token(&prop) {
                return Err(ModelError::InvalidToken(prop));
            }
            for p in &points {
                if !self.system.contains_point(p) {
                    return Err(ModelError::UnknownInterpretationPoint {
                        prop,
                        run: p.run.to_string(),
                        time: p.time,
                    });
                }
            }
            self.interpretation.insert(prop, points);
        }
        Ok(self)
    }

    pub fn prop_holds(&self, prop: &str, p: &Point) -> bool {
        self.interpretation
            .get(prop)
            .map(|set| set.contains(p))
            .unwrap_or(false)
    }

    /// The set of points of the system, in canonical order.
    pub fn points(&self) -> Vec<Point> {
        self.system.points().collect()
    }

    /// K_i(r, m): every point agent `i` cannot distinguish from `p`.
    ///
    /// Membership is structural equality of `i`'s local state; the result
    /// always contains `p` itself.
    pub fn knowledge_set(&self, agent: &AgentId, p: &Point) -> Result<&[Point], ModelError> {
        let by_state = self
            .classes
            .get(agent)
            .ok_or_else(|| ModelError::UnknownAgent(agent.to_string()))?;
        let state = self.system.local_state(agent, p).ok_or_else(|| {
            ModelError::UnknownSystemPoint {
                run: p.run.to_string(),
                time: p.time,
            }
        })?;
        Ok(by_state
            .get(state)
            .map(|v| v.as_slice())
            .expect("every reachable state has a class"))
    }

    /// True iff every agent's knowledge sets are time-homogeneous, so each
    /// agent always knows the time.
    pub fn is_synchronous(&self) -> bool {
        self.classes.values().all(|by_state| {
            by_state
                .values()
                .all(|class| class.iter().all(|p| p.time == class[0].time))
        })
    }

    /// True iff `agent`'s local state determines their stutter-collapsed
    /// local-state history.
    pub fn has_perfect_recall(&self, agent: &AgentId) -> Result<bool, ModelError> {
        if !self.system.has_agent(agent) {
            return Err(ModelError::UnknownAgent(agent.to_string()));
        }
        let history = |p: &Point| -> Vec<&LocalState> {
            let run = self.system.run(&p.run).expect("point in system");
            let mut collapsed: Vec<&LocalState> = Vec::new();
            for time in 0..=p.time {
                let state = run.states[time].locals.get(agent).expect("total locals");
                if collapsed.last() != Some(&state) {
                    collapsed.push(state);
                }
            }
            collapsed
        };
        for class in self.classes[agent].values() {
            let reference = history(&class[0]);
            for p in &class[1..] {
                if history(p) != reference {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}
