use thiserror::Error;

use crate::system::{AgentId, Point};

/// Errors raised while constructing systems, measures, processes, or views.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid token {0:?}: tokens are nonempty strings over [A-Za-z0-9_.]")]
    InvalidToken(String),
    #[error("agent name \"env\" is reserved for the environment")]
    ReservedAgentName,
    #[error("duplicate agent {0} in roster")]
    DuplicateAgent(String),
    #[error("duplicate run id {0}")]
    DuplicateRunId(String),
    #[error("a system must contain at least one run")]
    NoRuns,
    #[error("run {run}: expected {expected} states for horizon {horizon}, found {found}")]
    HorizonMismatch {
        run: String,
        horizon: usize,
        expected: usize,
        found: usize,
    },
    #[error("run {run}: event ({agent}, {action}, {time}) is past the horizon {horizon}")]
    EventPastHorizon {
        run: String,
        agent: String,
        action: String,
        time: usize,
        horizon: usize,
    },
    #[error("run {run}: event agent {agent} is not in the roster")]
    EventUnknownAgent { run: String, agent: String },
    #[error("run {run}, time {time}: missing local state for agent {agent}")]
    MissingLocalState {
        run: String,
        time: usize,
        agent: String,
    },
    #[error("run {run}, time {time}: local state for {agent} not in the roster")]
    LocalStateUnknownAgent {
        run: String,
        time: usize,
        agent: String,
    },
    #[error("proposition {prop} interpreted at unknown point ({run}, {time})")]
    UnknownInterpretationPoint {
        prop: String,
        run: String,
        time: usize,
    },
    #[error("agent {0} is not in the roster")]
    UnknownAgent(String),
    #[error("point ({run}, {time}) is not in the system")]
    UnknownSystemPoint { run: String, time: usize },
    #[error("measure weight for run {0} is negative")]
    NegativeWeight(String),
    #[error("measure domain does not match the system's run set (offending run: {0})")]
    MeasureDomainMismatch(String),
    #[error("measure weights sum to {0}, expected exactly 1")]
    MeasureNotNormalized(String),
    #[error("priors must sum to exactly 1 (got {0})")]
    PriorsNotNormalized(String),
    #[error("prior for {0} is negative")]
    NegativePrior(String),
    #[error("dining cryptographers ring needs n >= 3 (got {0})")]
    RingTooSmall(usize),
    #[error("dining cryptographers ring size {0} is too large to enumerate")]
    RingTooLarge(usize),
    #[error("every payer has zero prior; the system would have no runs")]
    EmptySupport,
    #[error("no cryptographer has positive prior; conditioning on gamma is undefined")]
    NoPayingCryptographer,
    #[error("trace set is not prefix-closed: missing prefix of {0:?}")]
    NotPrefixClosed(String),
    #[error("a process must contain at least the empty trace")]
    EmptyProcess,
    #[error("the abstraction event \u{3b1} is reserved and may not occur in the alphabet")]
    ReservedAbstractionEvent,
    #[error("event {0:?} is not in the process alphabet")]
    EventNotInAlphabet(String),
    #[error("trace uses event {0:?} not declared in the alphabet")]
    UndeclaredEvent(String),
    #[error("observer {0} collides with an agent named in the traces")]
    ObserverCollision(String),
    #[error("alphabet events must all share one action (found {0:?} and {1:?})")]
    MixedAlphabetActions(String, String),
    #[error("alphabet event {0:?} is not of the form agent.action")]
    NotAgentDotAction(String),
    #[error("run {run}: action {action} is performed by both {first} and {second}")]
    DoublePerformer {
        run: String,
        action: String,
        first: String,
        second: String,
    },
    #[error("run {run}: action {action} is performed more than once")]
    RepeatedAction { run: String, action: String },
    #[error("function knowledge domain does not match the point function domain")]
    DomainMismatch,
}

/// Errors raised while evaluating formulas and probabilities.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("agent {0} is not in the roster")]
    UnknownAgent(AgentId),
    #[error("run {0} is not in the system")]
    UnknownRun(String),
    #[error("point ({0}, {1}) is not in the system")]
    UnknownPoint(String, usize),
    #[error("formula contains a probability operator but no run measure was supplied")]
    MeasureRequired,
    #[error("agent {agent}'s knowledge set at {point} has probability zero")]
    ZeroProbabilityClass { agent: AgentId, point: Point },
    #[error(
        "event is not measurable at {point} for agent {agent}: the satisfying set cuts a run fiber"
    )]
    NonMeasurableEvent { agent: AgentId, point: Point },
    #[error("conditioning event has probability zero")]
    ZeroConditioningEvent,
}
