//! Trace-set processes, renaming and hiding abstraction, strong anonymity on
//! an alphabet, and the construction of compatible interpreted systems.
//!
//! Processes are finite explicit prefix-closed trace sets; there is no
//! operational process-algebra semantics here.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::anonymity::{check_up_to, AnonymityQuery, CheckError, QueryKind};
use crate::error::ModelError;
use crate::logic::EvalContext;
use crate::system::{
    AgentId, GlobalState, InterpretedSystem, LocalState, Run, RunEvent, RunId, System,
};

/// The fixed abstraction event substituted for renamed events. It is outside
/// every process alphabet.
pub const ABSTRACTION_EVENT: &str = "\u{3b1}";

/// A CSP event label. Labels of the form `agent.action` (both parts valid
/// tokens) carry an agent attribution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event(String);

impl Event {
    pub fn new(label: impl Into<String>) -> Self {
        Event(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_abstraction(&self) -> bool {
        self.0 == ABSTRACTION_EVENT
    }

    /// Splits `agent.action` labels when both halves are valid tokens.
    pub fn agent_action(&self) -> Option<(AgentId, String)> {
        let (agent, action) = self.0.split_once('.')?;
        let agent = AgentId::new(agent).ok()?;
        if action.is_empty()
            || !action
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.')
        {
            return None;
        }
        Some((agent, action.to_string()))
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type Trace = Vec<Event>;

/// Renders a trace as whitespace-joined event labels.
pub fn render_trace(trace: &[Event]) -> String {
    if trace.is_empty() {
        return "<empty>".to_string();
    }
    trace
        .iter()
        .map(Event::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

/// A finite prefix-closed set of traces over a declared alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    alphabet: BTreeSet<Event>,
    traces: BTreeSet<Trace>,
}

impl Process {
    /// Validates prefix closure and the alphabet discipline.
    pub fn new(alphabet: BTreeSet<Event>, traces: BTreeSet<Trace>) -> Result<Self, ModelError> {
        if alphabet.iter().any(Event::is_abstraction) {
            return Err(ModelError::ReservedAbstractionEvent);
        }
        if traces.is_empty() {
            return Err(ModelError::EmptyProcess);
        }
        for trace in &traces {
            for event in trace {
                if event.is_abstraction() {
                    return Err(ModelError::ReservedAbstractionEvent);
                }
                if !alphabet.contains(event) {
                    return Err(ModelError::UndeclaredEvent(event.to_string()));
                }
            }
            if !trace.is_empty() {
                let prefix = trace[..trace.len() - 1].to_vec();
                if !traces.contains(&prefix) {
                    return Err(ModelError::NotPrefixClosed(render_trace(trace)));
                }
            }
        }
        Ok(Process { alphabet, traces })
    }

    /// Builds a process by closing `traces` under prefixes.
    pub fn closed(
        alphabet: BTreeSet<Event>,
        traces: impl IntoIterator<Item = Trace>,
    ) -> Result<Self, ModelError> {
        let mut closed: BTreeSet<Trace> = BTreeSet::new();
        closed.insert(Vec::new());
        for trace in traces {
            for len in 1..=trace.len() {
                closed.insert(trace[..len].to_vec());
            }
        }
        Process::new(alphabet, closed)
    }

    pub fn alphabet(&self) -> &BTreeSet<Event> {
        &self.alphabet
    }

    pub fn traces(&self) -> &BTreeSet<Trace> {
        &self.traces
    }

    /// Traces with no proper extension in the process.
    pub fn maximal_traces(&self) -> Vec<&Trace> {
        self.traces
            .iter()
            .filter(|candidate| {
                !self.traces.iter().any(|other| {
                    other.len() > candidate.len() && other[..candidate.len()] == candidate[..]
                })
            })
            .collect()
    }
}

fn rename_trace(trace: &[Event], renamed: &BTreeSet<Event>) -> Trace {
    trace
        .iter()
        .map(|e| {
            if renamed.contains(e) {
                Event::new(ABSTRACTION_EVENT)
            } else {
                e.clone()
            }
        })
        .collect()
}

fn check_subset(alphabet: &BTreeSet<Event>, events: &BTreeSet<Event>) -> Result<(), ModelError> {
    for event in events {
        if !alphabet.contains(event) {
            return Err(ModelError::EventNotInAlphabet(event.to_string()));
        }
    }
    Ok(())
}

/// f_A: replaces every event of `renamed` with the abstraction event.
pub fn apply_renaming(process: &Process, renamed: &BTreeSet<Event>) -> Result<Process, ModelError> {
    check_subset(&process.alphabet, renamed)?;
    let alphabet: BTreeSet<Event> = process
        .alphabet
        .iter()
        .filter(|e| !renamed.contains(e))
        .cloned()
        .chain(std::iter::once(Event::new(ABSTRACTION_EVENT)))
        .collect();
    let traces = process
        .traces
        .iter()
        .map(|t| rename_trace(t, renamed))
        .collect();
    // The image of a prefix-closed set under a length-preserving map stays
    // prefix-closed; bypass Process::new, whose alphabet check would reject
    // the abstraction event.
    Ok(Process { alphabet, traces })
}

/// Hides `hidden` events: deletes them from every trace.
pub fn apply_hiding(process: &Process, hidden: &BTreeSet<Event>) -> Result<Process, ModelError> {
    check_subset(&process.alphabet, hidden)?;
    let alphabet: BTreeSet<Event> = process
        .alphabet
        .iter()
        .filter(|e| !hidden.contains(e))
        .cloned()
        .collect();
    let traces: BTreeSet<Trace> = process
        .traces
        .iter()
        .map(|t| t.iter().filter(|e| !hidden.contains(*e)).cloned().collect())
        .collect();
    // Deleting events maps prefixes to prefixes, so closure survives. Built
    // directly: the input may legitimately carry the abstraction event when
    // hiding is applied after renaming.
    Ok(Process { alphabet, traces })
}

/// Expands every abstraction occurrence in `trace` to each event of `events`.
fn expand_abstractions(trace: &[Event], events: &BTreeSet<Event>) -> Vec<Trace> {
    let mut expansions: Vec<Trace> = vec![Vec::new()];
    for event in trace {
        if event.is_abstraction() {
            expansions = expansions
                .into_iter()
                .flat_map(|prefix| {
                    events.iter().map(move |candidate| {
                        let mut next = prefix.clone();
                        next.push(candidate.clone());
                        next
                    })
                })
                .collect();
        } else {
            for expansion in &mut expansions {
                expansion.push(event.clone());
            }
        }
    }
    expansions
}

/// Verdict of a strong-anonymity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrongAnonymity {
    pub holds: bool,
    /// Least trace in f_A^-1(f_A(P)) \ P when the check fails.
    pub counterexample: Option<Trace>,
}

/// Checks f_A^-1(f_A(P)) = P: every renamed event must be interchangeable
/// with every other.
pub fn strong_anonymity_on(
    process: &Process,
    renamed: &BTreeSet<Event>,
) -> Result<StrongAnonymity, ModelError> {
    check_subset(&process.alphabet, renamed)?;
    let image = apply_renaming(process, renamed)?;
    let mut inverse: BTreeSet<Trace> = BTreeSet::new();
    for trace in image.traces() {
        inverse.extend(expand_abstractions(trace, renamed));
    }
    let counterexample = inverse.difference(&process.traces).next().cloned();
    Ok(StrongAnonymity {
        holds: counterexample.is_none(),
        counterexample,
    })
}

fn trace_state(trace: &[Event]) -> LocalState {
    LocalState::list(trace.iter().map(|e| LocalState::text(e.as_str())))
}

fn state_trace(state: &LocalState) -> Option<Trace> {
    match state {
        LocalState::List(items) => items
            .iter()
            .map(|item| match item {
                LocalState::Text(s) => Some(Event::new(s.clone())),
                _ => None,
            })
            .collect(),
        _ => None,
    }
}

/// Builds the interpreted system compatible with `process`: one run per
/// maximal trace, the environment recording the trace so far and the observer
/// seeing its renaming.
pub fn compatible_system(
    process: &Process,
    renamed: &BTreeSet<Event>,
    observer: &AgentId,
) -> Result<InterpretedSystem, ModelError> {
    check_subset(&process.alphabet, renamed)?;
    // Roster: every agent named in a dotted event, whether or not it ever
    // acts in a trace. Agents of the renamed alphabet must exist even when
    // silent, since the anonymity formulas quantify over them.
    let mut performers: BTreeSet<AgentId> = BTreeSet::new();
    for trace in process.traces() {
        for event in trace {
            if let Some((agent, _)) = event.agent_action() {
                performers.insert(agent);
            }
        }
    }
    for event in renamed {
        if let Some((agent, _)) = event.agent_action() {
            performers.insert(agent);
        }
    }
    if performers.contains(observer) {
        return Err(ModelError::ObserverCollision(observer.to_string()));
    }
    let mut roster: Vec<AgentId> = performers.iter().cloned().collect();
    roster.push(observer.clone());

    let maximal = process.maximal_traces();
    let horizon = maximal.iter().map(|t| t.len()).max().unwrap_or(0);
    let width = maximal.len().to_string().len();
    let runs: Vec<Run> = maximal
        .iter()
        .enumerate()
        .map(|(index, trace)| {
            let states = (0..=horizon)
                .map(|time| {
                    let prefix = &trace[..time.min(trace.len())];
                    let mut locals: BTreeMap<AgentId, LocalState> = performers
                        .iter()
                        .map(|agent| (agent.clone(), LocalState::text("idle")))
                        .collect();
                    locals.insert(
                        observer.clone(),
                        trace_state(&rename_trace(prefix, renamed)),
                    );
                    GlobalState {
                        env: trace_state(prefix),
                        locals,
                    }
                })
                .collect();
            let events = trace
                .iter()
                .enumerate()
                .filter_map(|(position, event)| {
                    event.agent_action().map(|(agent, action)| RunEvent {
                        agent,
                        action,
                        // the t-th event of the trace happens at time t
                        time: position + 1,
                    })
                })
                .collect();
            Run {
                id: RunId::new(format!("tr{index:0width$}")).expect("valid token"),
                states,
                events,
            }
        })
        .collect();

    let system = System::new(roster, runs)?;
    let interpreted = InterpretedSystem::new(system, BTreeMap::new())?;
    debug_assert!(verify_compatibility(
        &interpreted,
        process,
        renamed,
        observer
    ));
    Ok(interpreted)
}

/// Re-checks both compatibility conditions by direct scan: every point's
/// environment record is a trace of the process observed through f_A, and
/// every trace is realized at a point.
pub fn verify_compatibility(
    system: &InterpretedSystem,
    process: &Process,
    renamed: &BTreeSet<Event>,
    observer: &AgentId,
) -> bool {
    let env_trace = |run: &Run, time: usize| -> Option<Trace> {
        match run.states.get(time) {
            Some(state) => state_trace(&state.env),
            None => None,
        }
    };
    // every (r, m) realizes some trace of P
    for run in system.system().runs() {
        for time in 0..=system.horizon() {
            let Some(trace) = env_trace(run, time) else {
                return false;
            };
            if !process.traces().contains(&trace) {
                return false;
            }
            let observed = run.states[time].locals.get(observer).cloned();
            if observed != Some(trace_state(&rename_trace(&trace, renamed))) {
                return false;
            }
        }
    }
    // every trace of P is realized at its own length
    for trace in process.traces() {
        if trace.len() > system.horizon() {
            return false;
        }
        let hit = system.system().runs().iter().any(|run| {
            env_trace(run, trace.len()).as_ref() == Some(trace)
                && run.states[trace.len()].locals.get(observer)
                    == Some(&trace_state(&rename_trace(trace, renamed)))
        });
        if !hit {
            return false;
        }
    }
    true
}

/// The single action shared by an `agent.action` alphabet, with its agents.
pub fn alphabet_action(
    renamed: &BTreeSet<Event>,
) -> Result<(String, BTreeSet<AgentId>), ModelError> {
    let mut action: Option<String> = None;
    let mut agents = BTreeSet::new();
    for event in renamed {
        let (agent, this_action) = event
            .agent_action()
            .ok_or_else(|| ModelError::NotAgentDotAction(event.to_string()))?;
        match &action {
            None => action = Some(this_action),
            Some(existing) if *existing != this_action => {
                return Err(ModelError::MixedAlphabetActions(
                    existing.clone(),
                    this_action,
                ));
            }
            _ => {}
        }
        agents.insert(agent);
    }
    let action = action.ok_or_else(|| ModelError::NotAgentDotAction("<empty>".to_string()))?;
    Ok((action, agents))
}

#[derive(Debug, Error)]
pub enum CspError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// Cross-checks strong anonymity against anonymity-up-to on the compatible
/// system. The two must agree whenever the renamed action happens at most
/// once per run; a `false` result indicates an implementation bug.
pub fn theorem51_check(
    process: &Process,
    renamed: &BTreeSet<Event>,
    observer: &AgentId,
) -> Result<bool, CspError> {
    let (action, performers) = alphabet_action(renamed)?;
    let system = compatible_system(process, renamed, observer)?;
    for run in system.system().runs() {
        let occurrences = run.events.iter().filter(|e| e.action == action).count();
        if occurrences > 1 {
            let mut agents = run.events.iter().filter(|e| e.action == action);
            let first = agents.next().expect("at least two").agent.to_string();
            let second = agents.next().expect("at least two").agent.to_string();
            return Err(if first == second {
                ModelError::RepeatedAction {
                    run: run.id.to_string(),
                    action,
                }
                .into()
            } else {
                ModelError::DoublePerformer {
                    run: run.id.to_string(),
                    action,
                    first,
                    second,
                }
                .into()
            });
        }
    }
    let lhs = strong_anonymity_on(process, renamed)?.holds;
    let ctx = EvalContext::new(&system);
    let mut rhs = true;
    for actor in &performers {
        let query = AnonymityQuery::new(
            QueryKind::UpToSet,
            actor.clone(),
            action.clone(),
            observer.clone(),
        )
        .with_set(performers.iter().cloned());
        if !check_up_to(&ctx, &query)?.holds {
            rhs = false;
            break;
        }
    }
    Ok(lhs == rhs)
}

/// Parses the trace file format: a header line `alphabet: e1 e2 ...`, one
/// trace per line, whitespace-separated events, `#` comments.
pub fn parse_trace_file(text: &str, close_prefixes: bool) -> Result<Process, ModelError> {
    let mut alphabet: Option<BTreeSet<Event>> = None;
    let mut traces: Vec<Trace> = Vec::new();
    for raw_line in text.lines() {
        let line = match raw_line.split_once('#') {
            Some((content, _)) => content,
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if alphabet.is_none() {
            let declared = line.strip_prefix("alphabet:").ok_or_else(|| {
                ModelError::UndeclaredEvent(format!("missing alphabet header, found {line:?}"))
            })?;
            alphabet = Some(declared.split_whitespace().map(Event::new).collect());
            continue;
        }
        traces.push(line.split_whitespace().map(Event::new).collect());
    }
    let alphabet = alphabet
        .ok_or_else(|| ModelError::UndeclaredEvent("missing alphabet header".to_string()))?;
    if close_prefixes {
        Process::closed(alphabet, traces)
    } else {
        let mut set: BTreeSet<Trace> = traces.into_iter().collect();
        set.insert(Vec::new());
        Process::new(alphabet, set)
    }
}
