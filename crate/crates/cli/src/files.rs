//! On-disk formats: the JSON system file (agents, runs, props, measure) and
//! the JSON spec file (formula and query entries), with exact-rational
//! round-tripping.

use std::collections::{BTreeMap, BTreeSet};

use num::rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use veil_core::anonymity::{AnonymityQuery, Mode, QueryKind};
use veil_core::logic::Formula;
use veil_core::parse::parse_formula;
use veil_core::prob::RunMeasure;
use veil_core::ratio::{parse_rational, render_rational};
use veil_core::system::{
    AgentId, GlobalState, InterpretedSystem, LocalState, Point, Run, RunEvent, RunId, System,
};

#[derive(Debug)]
pub enum LoadError {
    /// Malformed file: bad JSON, bad tokens, bad rationals. Exit code 2.
    Parse(String),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadError::Parse(m) => write!(f, "{m}"),
        }
    }
}

fn parse_err(context: &str, detail: impl std::fmt::Display) -> LoadError {
    LoadError::Parse(format!("{context}: {detail}"))
}

// ---------------------------------------------------------------------------
// System files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct SystemFile {
    pub agents: Vec<String>,
    pub horizon: usize,
    pub runs: Vec<RunRecord>,
    #[serde(default)]
    pub props: BTreeMap<String, Vec<(String, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub states: Vec<StateRecord>,
    #[serde(default)]
    pub events: Vec<(String, String, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StateRecord {
    pub env: Value,
    pub locals: BTreeMap<String, Value>,
}

fn value_to_state(value: &Value) -> Result<LocalState, LoadError> {
    match value {
        Value::Bool(b) => Ok(LocalState::Bool(*b)),
        Value::Number(n) => n
            .as_i64()
            .map(LocalState::Int)
            .ok_or_else(|| parse_err("state literal", format!("non-integer number {n}"))),
        Value::String(s) => Ok(LocalState::Text(s.clone())),
        Value::Array(items) => items
            .iter()
            .map(value_to_state)
            .collect::<Result<Vec<_>, _>>()
            .map(LocalState::List),
        Value::Object(entries) => entries
            .iter()
            .map(|(k, v)| Ok((k.clone(), value_to_state(v)?)))
            .collect::<Result<BTreeMap<_, _>, LoadError>>()
            .map(LocalState::Map),
        Value::Null => Err(parse_err("state literal", "null is not a state")),
    }
}

fn state_to_value(state: &LocalState) -> Value {
    match state {
        LocalState::Bool(b) => Value::Bool(*b),
        LocalState::Int(i) => Value::Number((*i).into()),
        LocalState::Text(s) => Value::String(s.clone()),
        LocalState::List(items) => Value::Array(items.iter().map(state_to_value).collect()),
        LocalState::Map(entries) => Value::Object(
            entries
                .iter()
                .map(|(k, v)| (k.clone(), state_to_value(v)))
                .collect(),
        ),
    }
}

/// A fully decoded system file.
pub struct LoadedSystem {
    pub system: InterpretedSystem,
    pub measure: Option<RunMeasure>,
}

pub fn decode_system(file: &SystemFile) -> Result<LoadedSystem, LoadError> {
    let roster: Vec<AgentId> = file
        .agents
        .iter()
        .map(|name| AgentId::new(name).map_err(|e| parse_err("agents", e)))
        .collect::<Result<_, _>>()?;
    let mut runs = Vec::new();
    for record in &file.runs {
        let id = RunId::new(&record.id).map_err(|e| parse_err("run id", e))?;
        if record.states.len() != file.horizon + 1 {
            return Err(parse_err(
                "runs",
                format!(
                    "run {} has {} states, expected horizon {} + 1",
                    record.id,
                    record.states.len(),
                    file.horizon
                ),
            ));
        }
        let states = record
            .states
            .iter()
            .map(|state| {
                let env = value_to_state(&state.env)?;
                let locals = state
                    .locals
                    .iter()
                    .map(|(agent, value)| {
                        let agent = AgentId::new(agent).map_err(|e| parse_err("locals", e))?;
                        Ok((agent, value_to_state(value)?))
                    })
                    .collect::<Result<BTreeMap<_, _>, LoadError>>()?;
                Ok(GlobalState { env, locals })
            })
            .collect::<Result<Vec<_>, LoadError>>()?;
        let events = record
            .events
            .iter()
            .map(|(agent, action, time)| {
                Ok(RunEvent {
                    agent: AgentId::new(agent).map_err(|e| parse_err("events", e))?,
                    action: action.clone(),
                    time: *time,
                })
            })
            .collect::<Result<BTreeSet<_>, LoadError>>()?;
        runs.push(Run { id, states, events });
    }
    let system = System::new(roster, runs).map_err(|e| parse_err("system", e))?;

    let mut interpretation: BTreeMap<String, BTreeSet<Point>> = BTreeMap::new();
    for (prop, points) in &file.props {
        let decoded = points
            .iter()
            .map(|(run, time)| {
                Ok(Point::new(
                    RunId::new(run).map_err(|e| parse_err("props", e))?,
                    *time,
                ))
            })
            .collect::<Result<BTreeSet<_>, LoadError>>()?;
        interpretation.insert(prop.clone(), decoded);
    }
    let interpreted = InterpretedSystem::new(system, interpretation)
        .map_err(|e| parse_err("interpretation", e))?;

    let measure = match &file.measure {
        None => None,
        Some(weights) => {
            let decoded = weights
                .iter()
                .map(|(run, text)| {
                    let id = RunId::new(run).map_err(|e| parse_err("measure", e))?;
                    let value = parse_rational(text).map_err(|e| parse_err("measure", e))?;
                    Ok((id, value))
                })
                .collect::<Result<BTreeMap<_, _>, LoadError>>()?;
            Some(
                RunMeasure::new(interpreted.system(), decoded)
                    .map_err(|e| parse_err("measure", e))?,
            )
        }
    };
    Ok(LoadedSystem {
        system: interpreted,
        measure,
    })
}

pub fn encode_system(system: &InterpretedSystem, measure: Option<&RunMeasure>) -> SystemFile {
    SystemFile {
        agents: system.roster().iter().map(|a| a.to_string()).collect(),
        horizon: system.horizon(),
        runs: system
            .system()
            .runs()
            .iter()
            .map(|run| RunRecord {
                id: run.id.to_string(),
                states: run
                    .states
                    .iter()
                    .map(|state| StateRecord {
                        env: state_to_value(&state.env),
                        locals: state
                            .locals
                            .iter()
                            .map(|(agent, value)| (agent.to_string(), state_to_value(value)))
                            .collect(),
                    })
                    .collect(),
                events: run
                    .events
                    .iter()
                    .map(|e| (e.agent.to_string(), e.action.clone(), e.time))
                    .collect(),
            })
            .collect(),
        props: system
            .interpretation()
            .iter()
            .map(|(prop, points)| {
                (
                    prop.clone(),
                    points.iter().map(|p| (p.run.to_string(), p.time)).collect(),
                )
            })
            .collect(),
        measure: measure.map(|m| {
            m.weights()
                .iter()
                .map(|(run, w)| (run.to_string(), render_rational(w)))
                .collect()
        }),
    }
}

pub fn read_system(path: &std::path::Path) -> Result<LoadedSystem, LoadError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| parse_err(&path.display().to_string(), e))?;
    let file: SystemFile =
        serde_json::from_str(&text).map_err(|e| parse_err(&path.display().to_string(), e))?;
    decode_system(&file)
}

pub fn write_system(
    path: &std::path::Path,
    system: &InterpretedSystem,
    measure: Option<&RunMeasure>,
) -> Result<(), LoadError> {
    let file = encode_system(system, measure);
    let text = serde_json::to_string_pretty(&file).map_err(|e| parse_err("serialize", e))?;
    std::fs::write(path, text + "\n").map_err(|e| parse_err(&path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Spec files
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecEntryRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    pub kind: String,
    pub i: String,
    pub a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<String>,
    pub j: String,
    #[serde(default, rename = "I_A", skip_serializing_if = "Option::is_none")]
    pub anonymity_set: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

/// A decoded spec entry, ready to run.
pub enum SpecEntry {
    Formula(Formula),
    Query(Box<AnonymityQuery>),
}

fn parse_kind(kind: &str) -> Result<QueryKind, LoadError> {
    Ok(match kind {
        "minimal" => QueryKind::Minimal,
        "total" => QueryKind::Total,
        "up-to" => QueryKind::UpToSet,
        "k-anonymous" => QueryKind::KAnonymous,
        "alpha" => QueryKind::Alpha,
        "strong-prob-up-to" => QueryKind::StrongProbUpToSet,
        "beyond-suspicion" => QueryKind::BeyondSuspicion,
        "conditional" => QueryKind::Conditional,
        "conditional-wrt" => QueryKind::ConditionalWrt,
        "min-unlinkable" => QueryKind::MinUnlinkable,
        other => return Err(parse_err("query kind", format!("unknown kind {other:?}"))),
    })
}

pub fn kind_name(kind: QueryKind) -> &'static str {
    match kind {
        QueryKind::Minimal => "minimal",
        QueryKind::Total => "total",
        QueryKind::UpToSet => "up-to",
        QueryKind::KAnonymous => "k-anonymous",
        QueryKind::Alpha => "alpha",
        QueryKind::StrongProbUpToSet => "strong-prob-up-to",
        QueryKind::BeyondSuspicion => "beyond-suspicion",
        QueryKind::Conditional => "conditional",
        QueryKind::ConditionalWrt => "conditional-wrt",
        QueryKind::MinUnlinkable => "min-unlinkable",
    }
}

fn parse_mode(mode: &str) -> Result<Mode, LoadError> {
    match mode {
        "theta" => Ok(Mode::Theta),
        "delta" => Ok(Mode::Delta),
        other => Err(parse_err(
            "mode",
            format!("expected theta or delta, got {other:?}"),
        )),
    }
}

fn decode_query(record: &QueryRecord, default_mode: Mode) -> Result<AnonymityQuery, LoadError> {
    let kind = parse_kind(&record.kind)?;
    let actor = AgentId::new(&record.i).map_err(|e| parse_err("query i", e))?;
    let observer = AgentId::new(&record.j).map_err(|e| parse_err("query j", e))?;
    let mut query = AnonymityQuery::new(kind, actor, record.a.clone(), observer);
    query.mode = match &record.mode {
        Some(mode) => parse_mode(mode)?,
        None => default_mode,
    };
    if let Some(second) = &record.a2 {
        query.second_action = Some(second.clone());
    }
    if let Some(set) = &record.anonymity_set {
        let set = set
            .iter()
            .map(|name| AgentId::new(name).map_err(|e| parse_err("query I_A", e)))
            .collect::<Result<BTreeSet<_>, _>>()?;
        query.anonymity_set = Some(set);
    }
    query.k = record.k;
    if let Some(alpha) = &record.alpha {
        let value = parse_rational(alpha).map_err(|e| parse_err("query alpha", e))?;
        query.alpha = Some(value);
    }
    if let Some(phi) = &record.phi {
        let formula = parse_formula(phi).map_err(|e| parse_err("query phi", e))?;
        query.phi = Some(formula);
    }
    Ok(query)
}

/// Checks structural requirements that do not need the system: which
/// parameters each kind requires.
fn check_required_params(query: &AnonymityQuery) -> Result<(), LoadError> {
    let missing = |what: &str| {
        Err(parse_err(
            "query",
            format!("kind {:?} requires {what}", kind_name(query.kind)),
        ))
    };
    match query.kind {
        QueryKind::UpToSet | QueryKind::StrongProbUpToSet | QueryKind::BeyondSuspicion
            if query.anonymity_set.is_none() =>
        {
            missing("I_A")
        }
        QueryKind::KAnonymous if query.k.is_none() => missing("k"),
        QueryKind::Alpha if query.alpha.is_none() => missing("alpha"),
        QueryKind::ConditionalWrt if query.phi.is_none() => missing("phi"),
        QueryKind::MinUnlinkable if query.second_action.is_none() => missing("a2"),
        _ => Ok(()),
    }
}

pub fn read_spec(path: &std::path::Path, default_mode: Mode) -> Result<Vec<SpecEntry>, LoadError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| parse_err(&path.display().to_string(), e))?;
    let records: Vec<SpecEntryRecord> =
        serde_json::from_str(&text).map_err(|e| parse_err(&path.display().to_string(), e))?;
    let mut entries = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let entry = match (&record.formula, &record.query) {
            (Some(text), None) => SpecEntry::Formula(
                parse_formula(text).map_err(|e| parse_err(&format!("entry {}", index + 1), e))?,
            ),
            (None, Some(query)) => {
                let decoded = decode_query(query, default_mode)
                    .map_err(|e| parse_err(&format!("entry {}", index + 1), e))?;
                check_required_params(&decoded)
                    .map_err(|e| parse_err(&format!("entry {}", index + 1), e))?;
                SpecEntry::Query(Box::new(decoded))
            }
            _ => {
                return Err(parse_err(
                    &format!("entry {}", index + 1),
                    "each entry needs exactly one of \"formula\" or \"query\"",
                ))
            }
        };
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_formula_spec(path: &std::path::Path, formulas: &[Formula]) -> Result<(), LoadError> {
    let records: Vec<SpecEntryRecord> = formulas
        .iter()
        .map(|f| SpecEntryRecord {
            formula: Some(f.to_string()),
            query: None,
        })
        .collect();
    let text = serde_json::to_string_pretty(&records).map_err(|e| parse_err("serialize", e))?;
    std::fs::write(path, text + "\n").map_err(|e| parse_err(&path.display().to_string(), e))
}

/// Parses a comma-separated list of rationals.
pub fn parse_rational_list(text: &str) -> Result<Vec<BigRational>, LoadError> {
    text.split(',')
        .map(|part| parse_rational(part.trim()).map_err(|e| parse_err("priors", e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use veil_core::dc::{build_dc_system, DcConfig};

    #[test]
    fn system_files_round_trip_structurally() {
        let dc = build_dc_system(&DcConfig::uniform_priors(3, true)).unwrap();
        let encoded = encode_system(&dc.interpreted, dc.measure.as_ref());
        let json = serde_json::to_string(&encoded).unwrap();
        let reparsed: SystemFile = serde_json::from_str(&json).unwrap();
        let decoded = decode_system(&reparsed).unwrap();
        assert_eq!(decoded.system, dc.interpreted);
        assert_eq!(decoded.measure.as_ref(), dc.measure.as_ref());
    }

    #[test]
    fn decimal_measures_parse_exactly() {
        let dc = build_dc_system(&DcConfig::uniform(3, false)).unwrap();
        let mut encoded = encode_system(&dc.interpreted, None);
        // 32 runs: 0.03125 each
        encoded.measure = Some(
            dc.interpreted
                .system()
                .runs()
                .iter()
                .map(|r| (r.id.to_string(), "0.03125".to_string()))
                .collect(),
        );
        let decoded = decode_system(&encoded).unwrap();
        let measure = decoded.measure.unwrap();
        let expected = parse_rational("1/32").unwrap();
        assert!(measure.weights().values().all(|w| *w == expected));
    }

    #[test]
    fn unnormalized_measures_are_rejected() {
        let dc = build_dc_system(&DcConfig::uniform(3, false)).unwrap();
        let mut encoded = encode_system(&dc.interpreted, None);
        encoded.measure = Some(
            dc.interpreted
                .system()
                .runs()
                .iter()
                .map(|r| (r.id.to_string(), "1/7".to_string()))
                .collect(),
        );
        assert!(decode_system(&encoded).is_err());
    }

    #[test]
    fn query_kinds_parse_and_require_their_parameters() {
        let record: SpecEntryRecord = serde_json::from_str(
            r#"{"query": {"kind": "up-to", "i": "0", "a": "paid", "j": "o", "I_A": ["0","1"]}}"#,
        )
        .unwrap();
        let query = decode_query(record.query.as_ref().unwrap(), Mode::Theta).unwrap();
        assert_eq!(query.kind, QueryKind::UpToSet);
        assert!(check_required_params(&query).is_ok());

        let record: SpecEntryRecord = serde_json::from_str(
            r#"{"query": {"kind": "k-anonymous", "i": "0", "a": "paid", "j": "o"}}"#,
        )
        .unwrap();
        let query = decode_query(record.query.as_ref().unwrap(), Mode::Theta).unwrap();
        assert!(check_required_params(&query).is_err());
    }
}
