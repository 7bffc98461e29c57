//! Function views: an observer's partial knowledge of the action-to-performer
//! map, opaqueness predicates over it, and their equivalence with the
//! epistemic anonymity checkers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::anonymity::{check_up_to, AnonymityQuery, CheckError, QueryKind};
use crate::error::ModelError;
use crate::logic::{evaluate, EvalContext, Formula};
use crate::system::{AgentId, InterpretedSystem, Point};

/// Codomain element of the performer function: an agent, or nobody.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Performer {
    Agent(AgentId),
    Nobody,
}

impl fmt::Display for Performer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Performer::Agent(a) => write!(f, "{a}"),
            Performer::Nobody => f.write_str("N"),
        }
    }
}

/// The per-point performer function over a domain of actions.
///
/// The value at a point depends only on the run: it is the agent whose event
/// log contains the action, or nobody. Well-definedness requires that no two
/// agents perform the same action in one run.
#[derive(Debug, Clone)]
pub struct PointFunction {
    domain: BTreeSet<String>,
    by_run: BTreeMap<crate::system::RunId, BTreeMap<String, Performer>>,
}

impl PointFunction {
    pub fn domain(&self) -> &BTreeSet<String> {
        &self.domain
    }

    /// f_{(r,m)}(action); None if the point or action is unknown.
    pub fn value(&self, p: &Point, action: &str) -> Option<&Performer> {
        self.by_run.get(&p.run).and_then(|m| m.get(action))
    }

    /// The whole map at one point.
    pub fn at(&self, p: &Point) -> Option<&BTreeMap<String, Performer>> {
        self.by_run.get(&p.run)
    }
}

/// Builds the performer function for the actions in `domain`.
pub fn point_function(
    system: &InterpretedSystem,
    domain: &BTreeSet<String>,
) -> Result<PointFunction, ModelError> {
    let mut by_run = BTreeMap::new();
    for run in system.system().runs() {
        let mut values = BTreeMap::new();
        for action in domain {
            let performers = run.performers(action);
            let mut iter = performers.iter();
            let value = match (iter.next(), iter.next()) {
                (None, _) => Performer::Nobody,
                (Some(only), None) => Performer::Agent((*only).clone()),
                (Some(first), Some(second)) => {
                    return Err(ModelError::DoublePerformer {
                        run: run.id.to_string(),
                        action: action.clone(),
                        first: first.to_string(),
                        second: second.to_string(),
                    })
                }
            };
            values.insert(action.clone(), value);
        }
        by_run.insert(run.id.clone(), values);
    }
    Ok(PointFunction {
        domain: domain.clone(),
        by_run,
    })
}

/// Function knowledge (F, I, K): a graph superset, an image subset, and a
/// kernel subset of the true performer function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionKnowledge {
    pub domain: BTreeSet<String>,
    pub codomain: BTreeSet<Performer>,
    /// F(x): candidate values for each action.
    pub graph: BTreeMap<String, BTreeSet<Performer>>,
    /// I: values known to be taken.
    pub image: BTreeSet<Performer>,
    /// K: pairs known to share a value (an equivalence relation, stored as
    /// its full pair set).
    pub kernel: BTreeSet<(String, String)>,
}

fn image_of(values: &BTreeMap<String, Performer>) -> BTreeSet<Performer> {
    values.values().cloned().collect()
}

fn kernel_of(values: &BTreeMap<String, Performer>) -> BTreeSet<(String, String)> {
    let mut pairs = BTreeSet::new();
    for (x, fx) in values {
        for (y, fy) in values {
            if fx == fy {
                pairs.insert((x.clone(), y.clone()));
            }
        }
    }
    pairs
}

/// The largest function knowledge consistent with everything the observer
/// considers possible at `p`: the graph collects every candidate value, the
/// image and kernel keep only what holds at all indistinguishable points.
pub fn observer_knowledge(
    system: &InterpretedSystem,
    observer: &AgentId,
    p: &Point,
    domain: &BTreeSet<String>,
) -> Result<FunctionKnowledge, ModelError> {
    let function = point_function(system, domain)?;
    let class = system.knowledge_set(observer, p)?;
    let mut graph: BTreeMap<String, BTreeSet<Performer>> = domain
        .iter()
        .map(|x| (x.clone(), BTreeSet::new()))
        .collect();
    let mut image: Option<BTreeSet<Performer>> = None;
    let mut kernel: Option<BTreeSet<(String, String)>> = None;
    for q in class {
        let values = function.at(q).expect("every run has a value map");
        for (x, value) in values {
            graph
                .get_mut(x)
                .expect("domain is fixed")
                .insert(value.clone());
        }
        let point_image = image_of(values);
        image = Some(match image {
            None => point_image,
            Some(acc) => acc.intersection(&point_image).cloned().collect(),
        });
        let point_kernel = kernel_of(values);
        kernel = Some(match kernel {
            None => point_kernel,
            Some(acc) => acc.intersection(&point_kernel).cloned().collect(),
        });
    }
    let mut codomain: BTreeSet<Performer> = system
        .roster()
        .iter()
        .cloned()
        .map(Performer::Agent)
        .collect();
    codomain.insert(Performer::Nobody);
    Ok(FunctionKnowledge {
        domain: domain.clone(),
        codomain,
        graph,
        image: image.unwrap_or_default(),
        kernel: kernel.unwrap_or_default(),
    })
}

/// Whether knowledge `N` is consistent with the concrete function `values`:
/// f is inside the graph, the claimed image inside im f, and the claimed
/// kernel inside ker f.
pub fn is_consistent_with(
    knowledge: &FunctionKnowledge,
    values: &BTreeMap<String, Performer>,
) -> Result<bool, ModelError> {
    if knowledge.domain != values.keys().cloned().collect::<BTreeSet<_>>() {
        return Err(ModelError::DomainMismatch);
    }
    let graph_ok = values
        .iter()
        .all(|(x, fx)| knowledge.graph.get(x).is_some_and(|fs| fs.contains(fx)));
    let image_ok = knowledge.image.is_subset(&image_of(values));
    let kernel_ok = knowledge.kernel.is_subset(&kernel_of(values));
    Ok(graph_ok && image_ok && kernel_ok)
}

/// Opaqueness predicates over one function view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Opaqueness {
    /// |F(x)| >= k for all x.
    KValue(usize),
    /// Z is contained in F(x) for all x.
    ZValue(BTreeSet<Performer>),
    /// Z-value opaqueness with Z the whole codomain.
    Absolute,
}

pub fn check_opaqueness(knowledge: &FunctionKnowledge, variant: &Opaqueness) -> bool {
    match variant {
        Opaqueness::KValue(k) => knowledge
            .domain
            .iter()
            .all(|x| knowledge.graph.get(x).map(BTreeSet::len).unwrap_or(0) >= *k),
        Opaqueness::ZValue(z) => knowledge
            .domain
            .iter()
            .all(|x| knowledge.graph.get(x).is_some_and(|fs| z.is_subset(fs))),
        Opaqueness::Absolute => {
            check_opaqueness(knowledge, &Opaqueness::ZValue(knowledge.codomain.clone()))
        }
    }
}

/// Canonical proposition token asserting `f(action) = performer`.
pub fn value_prop(action: &str, performer: &Performer) -> String {
    format!("f.{action}.{performer}")
}

/// Installs the `f(x) = y` propositions for `domain` into a copy of the
/// system, so that formula-level reasoning about the performer function has
/// the interpretation the equivalences assume.
pub fn with_value_props(
    system: &InterpretedSystem,
    domain: &BTreeSet<String>,
) -> Result<InterpretedSystem, ModelError> {
    let function = point_function(system, domain)?;
    let mut props: BTreeMap<String, BTreeSet<Point>> = BTreeMap::new();
    let mut performers: BTreeSet<Performer> = system
        .roster()
        .iter()
        .cloned()
        .map(Performer::Agent)
        .collect();
    performers.insert(Performer::Nobody);
    for action in domain {
        for performer in &performers {
            props.insert(value_prop(action, performer), BTreeSet::new());
        }
    }
    for p in system.points() {
        for action in domain {
            let value = function.value(&p, action).expect("total function");
            props
                .get_mut(&value_prop(action, value))
                .expect("initialized above")
                .insert(p.clone());
        }
    }
    system.clone().with_props(props)
}

#[derive(Debug, thiserror::Error)]
pub enum ViewError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Eval(#[from] crate::error::EvalError),
}

/// Z-value opaqueness of the performer function at one point, computed
/// directly from the observer's view.
pub fn z_value_opaque_at(
    system: &InterpretedSystem,
    observer: &AgentId,
    p: &Point,
    z: &BTreeSet<Performer>,
    domain: &BTreeSet<String>,
) -> Result<bool, ModelError> {
    let knowledge = observer_knowledge(system, observer, p, domain)?;
    Ok(check_opaqueness(&knowledge, &Opaqueness::ZValue(z.clone())))
}

/// Verifies, at every point, that Z-value opaqueness coincides with the
/// conjunction of possibility formulas over the installed value
/// propositions. Returns false only on an implementation bug.
pub fn prop52_check(
    system: &InterpretedSystem,
    observer: &AgentId,
    z: &BTreeSet<Performer>,
    domain: &BTreeSet<String>,
) -> Result<bool, ViewError> {
    let enriched = with_value_props(system, domain)?;
    let ctx = EvalContext::new(&enriched);
    let formula = Formula::conjunction(domain.iter().flat_map(|x| {
        z.iter()
            .map(move |value| Formula::poss(observer.clone(), Formula::Prop(value_prop(x, value))))
    }));
    for p in enriched.points() {
        let direct = z_value_opaque_at(&enriched, observer, &p, z, domain)?;
        let via_formula = evaluate(&ctx, &p, &formula)?;
        if direct != via_formula {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Verifies the equivalence between anonymity up to `anonymity_set` (for each
/// of its members) and `anonymity_set`-value opaqueness at the points where
/// one of its members performed the action. Returns false only on an
/// implementation bug.
pub fn theorem53_check(
    system: &InterpretedSystem,
    observer: &AgentId,
    anonymity_set: &BTreeSet<AgentId>,
    action: &str,
) -> Result<bool, ViewError> {
    let domain: BTreeSet<String> = [action.to_string()].into();
    let function = point_function(system, &domain)?;
    let ctx = EvalContext::new(system);
    let mut anonymous = true;
    for actor in anonymity_set {
        let query =
            AnonymityQuery::new(QueryKind::UpToSet, actor.clone(), action, observer.clone())
                .with_set(anonymity_set.iter().cloned());
        if !check_up_to(&ctx, &query)?.holds {
            anonymous = false;
            break;
        }
    }
    let z: BTreeSet<Performer> = anonymity_set
        .iter()
        .cloned()
        .map(Performer::Agent)
        .collect();
    let mut opaque = true;
    for p in system.points() {
        let value = function.value(&p, action).expect("total function");
        let performed_by_member = matches!(value, Performer::Agent(a) if anonymity_set.contains(a));
        if !performed_by_member {
            continue;
        }
        if !z_value_opaque_at(system, observer, &p, &z, &domain)? {
            opaque = false;
            break;
        }
    }
    Ok(anonymous == opaque)
}
