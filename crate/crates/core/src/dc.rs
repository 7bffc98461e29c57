//! Generator for dining-cryptographers systems and their anonymity
//! specifications, in both uniform and biased-prior variants.
//!
//! The model is one protocol instance over a ring of `n` cryptographers.
//! Coin `c_k` is shared between cryptographers `k` and `k+1 (mod n)`. At
//! time 0 the payer is fixed and the coins are dealt; each cryptographer
//! sees her two adjacent coins and her own paid bit. At time 1 everyone
//! (including the optional outsider) sees the announcement vector, where
//! announcement `k` is the XOR of cryptographer `k`'s adjacent coins,
//! flipped iff she paid.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::rational::BigRational;
use num::traits::{One, Zero};

use crate::error::ModelError;
use crate::logic::{Cmp, Formula};
use crate::prob::RunMeasure;
use crate::system::{
    AgentId, GlobalState, InterpretedSystem, LocalState, Run, RunEvent, RunId, System,
};

pub const PAID: &str = "paid";

/// Who paid for dinner in a given run.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Payer {
    Cryptographer(usize),
    Nsa,
}

impl fmt::Display for Payer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payer::Cryptographer(i) => write!(f, "{i}"),
            Payer::Nsa => f.write_str("nsa"),
        }
    }
}

/// Configuration of one dining-cryptographers instance.
#[derive(Debug, Clone)]
pub struct DcConfig {
    pub n: usize,
    pub include_outsider: bool,
    /// Unconditional payer prior, including the NSA share. `None` builds the
    /// purely possibilistic system.
    pub priors: Option<BTreeMap<Payer, BigRational>>,
}

impl DcConfig {
    pub fn uniform(n: usize, include_outsider: bool) -> Self {
        DcConfig {
            n,
            include_outsider,
            priors: None,
        }
    }

    /// Uniform prior over all n+1 payer cases (each cryptographer and the NSA).
    pub fn uniform_priors(n: usize, include_outsider: bool) -> Self {
        let share = BigRational::new(1.into(), ((n + 1) as i64).into());
        let mut priors: BTreeMap<Payer, BigRational> = (0..n)
            .map(|i| (Payer::Cryptographer(i), share.clone()))
            .collect();
        priors.insert(Payer::Nsa, share);
        DcConfig {
            n,
            include_outsider,
            priors: Some(priors),
        }
    }

    /// Priors given conditional on a cryptographer paying, plus the NSA's
    /// unconditional share; the cryptographer priors are scaled by
    /// `1 - nsa_share`.
    pub fn from_conditional_priors(
        n: usize,
        include_outsider: bool,
        conditional: &[BigRational],
        nsa_share: BigRational,
    ) -> Result<Self, ModelError> {
        if conditional.len() != n {
            return Err(ModelError::PriorsNotNormalized(format!(
                "expected {n} cryptographer priors, got {}",
                conditional.len()
            )));
        }
        let total: BigRational = conditional.iter().sum();
        if !total.is_one() {
            return Err(ModelError::PriorsNotNormalized(total.to_string()));
        }
        if nsa_share < BigRational::zero() || nsa_share > BigRational::one() {
            return Err(ModelError::NegativePrior("nsa".to_string()));
        }
        let scale = BigRational::one() - nsa_share.clone();
        let mut priors: BTreeMap<Payer, BigRational> = conditional
            .iter()
            .enumerate()
            .map(|(i, p)| (Payer::Cryptographer(i), p.clone() * scale.clone()))
            .collect();
        priors.insert(Payer::Nsa, nsa_share);
        let cfg = DcConfig {
            n,
            include_outsider,
            priors: Some(priors),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 3 {
            return Err(ModelError::RingTooSmall(self.n));
        }
        if self.n > 16 {
            return Err(ModelError::RingTooLarge(self.n));
        }
        if let Some(priors) = &self.priors {
            let mut total = BigRational::zero();
            for (payer, p) in priors {
                if let Payer::Cryptographer(i) = payer {
                    if *i >= self.n {
                        return Err(ModelError::NegativePrior(payer.to_string()));
                    }
                }
                if *p < BigRational::zero() {
                    return Err(ModelError::NegativePrior(payer.to_string()));
                }
                total += p.clone();
            }
            if !total.is_one() {
                return Err(ModelError::PriorsNotNormalized(total.to_string()));
            }
        }
        Ok(())
    }

    pub fn cryptographer(&self, i: usize) -> AgentId {
        AgentId::new((i % self.n).to_string()).expect("digits are a valid token")
    }

    pub fn outsider(&self) -> AgentId {
        AgentId::new("o").expect("valid token")
    }

    /// gamma: one of the cryptographers paid.
    pub fn gamma(&self) -> Formula {
        Formula::disjunction(
            (0..self.n).map(|i| Formula::Theta(self.cryptographer(i), PAID.to_string())),
        )
    }
}

/// Per-run protocol metadata kept alongside the interpreted system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcRunInfo {
    pub payer: Payer,
    pub coins: Vec<bool>,
    pub announcements: Vec<bool>,
}

/// A generated dining-cryptographers instance.
#[derive(Debug, Clone)]
pub struct DcSystem {
    pub config: DcConfig,
    pub interpreted: InterpretedSystem,
    pub measure: Option<RunMeasure>,
    pub runs: BTreeMap<RunId, DcRunInfo>,
}

fn coin_bits(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|k| (index >> k) & 1 == 1).collect()
}

fn run_id(payer: &Payer, coins: &[bool]) -> RunId {
    let bits: String = coins.iter().map(|&c| if c { '1' } else { '0' }).collect();
    let label = match payer {
        Payer::Cryptographer(i) => format!("p{i}"),
        Payer::Nsa => "pnsa".to_string(),
    };
    RunId::new(format!("{label}_c{bits}")).expect("valid token")
}

/// Builds the system of all (payer, coin vector) runs with horizon 1.
///
/// When priors are supplied, payers with zero prior are dropped: the run set
/// is the support of the measure, so possibilistic and probabilistic checks
/// see the same system.
pub fn build_dc_system(config: &DcConfig) -> Result<DcSystem, ModelError> {
    config.validate()?;
    let n = config.n;
    let mut payers: Vec<Payer> = (0..n).map(Payer::Cryptographer).collect();
    payers.push(Payer::Nsa);
    if let Some(priors) = &config.priors {
        payers.retain(|p| {
            priors
                .get(p)
                .map(|w| *w > BigRational::zero())
                .unwrap_or(false)
        });
        if payers.is_empty() {
            return Err(ModelError::EmptySupport);
        }
    }

    let mut roster: Vec<AgentId> = (0..n).map(|i| config.cryptographer(i)).collect();
    if config.include_outsider {
        roster.push(config.outsider());
    }

    let mut runs = Vec::new();
    let mut infos = BTreeMap::new();
    for payer in &payers {
        for coin_index in 0..(1usize << n) {
            let coins = coin_bits(coin_index, n);
            let announcements: Vec<bool> = (0..n)
                .map(|k| {
                    let left = coins[(k + n - 1) % n];
                    let right = coins[k];
                    let paid = *payer == Payer::Cryptographer(k);
                    left ^ right ^ paid
                })
                .collect();
            let ann_state =
                LocalState::list(announcements.iter().map(|&a| LocalState::Int(a as i64)));
            let mut locals_t0 = BTreeMap::new();
            let mut locals_t1 = BTreeMap::new();
            for k in 0..n {
                let left = coins[(k + n - 1) % n];
                let right = coins[k];
                let paid = *payer == Payer::Cryptographer(k);
                let view = vec![
                    LocalState::Int(left as i64),
                    LocalState::Int(right as i64),
                    LocalState::Int(paid as i64),
                ];
                locals_t0.insert(config.cryptographer(k), LocalState::List(view.clone()));
                let mut with_anns = view;
                with_anns.push(ann_state.clone());
                locals_t1.insert(config.cryptographer(k), LocalState::List(with_anns));
            }
            if config.include_outsider {
                locals_t0.insert(config.outsider(), LocalState::text("init"));
                locals_t1.insert(config.outsider(), ann_state.clone());
            }
            let env = LocalState::list([
                LocalState::text(payer.to_string()),
                LocalState::list(coins.iter().map(|&c| LocalState::Int(c as i64))),
            ]);
            let id = run_id(payer, &coins);
            let events = match payer {
                Payer::Cryptographer(k) => BTreeSet::from([RunEvent {
                    agent: config.cryptographer(*k),
                    action: PAID.to_string(),
                    time: 0,
                }]),
                Payer::Nsa => BTreeSet::new(),
            };
            infos.insert(
                id.clone(),
                DcRunInfo {
                    payer: payer.clone(),
                    coins: coins.clone(),
                    announcements,
                },
            );
            runs.push(Run {
                id,
                states: vec![
                    GlobalState {
                        env: env.clone(),
                        locals: locals_t0,
                    },
                    GlobalState {
                        env,
                        locals: locals_t1,
                    },
                ],
                events,
            });
        }
    }

    let system = System::new(roster, runs)?;
    let measure = match &config.priors {
        None => None,
        Some(priors) => {
            let coin_count = BigRational::from_integer((1i64 << n).into());
            let weights = infos
                .iter()
                .map(|(id, info)| {
                    let prior = priors
                        .get(&info.payer)
                        .cloned()
                        .unwrap_or_else(BigRational::zero);
                    (id.clone(), prior / coin_count.clone())
                })
                .collect();
            Some(RunMeasure::new(&system, weights)?)
        }
    };
    let interpreted = InterpretedSystem::new(system, BTreeMap::new())?;
    Ok(DcSystem {
        config: config.clone(),
        interpreted,
        measure,
        runs: infos,
    })
}

/// The possibilistic anonymity specification: for each payer, the two ring
/// neighbours (and the outsider, when present) must consider each other
/// cryptographer a possible payer.
pub fn dc_spec_formulas(config: &DcConfig) -> Vec<Formula> {
    let n = config.n;
    (0..n)
        .map(|i| {
            let theta = |agent: AgentId| Formula::Theta(agent, PAID.to_string());
            let mut conjuncts = vec![
                Formula::poss(
                    config.cryptographer(i + 1),
                    theta(config.cryptographer(i + 2)),
                ),
                Formula::poss(
                    config.cryptographer(i + 2),
                    theta(config.cryptographer(i + 1)),
                ),
            ];
            if config.include_outsider {
                conjuncts.push(Formula::poss(
                    config.outsider(),
                    theta(config.cryptographer(i + 1)),
                ));
                conjuncts.push(Formula::poss(
                    config.outsider(),
                    theta(config.cryptographer(i + 2)),
                ));
            }
            Formula::implies(
                theta(config.cryptographer(i)),
                Formula::conjunction(conjuncts),
            )
        })
        .collect()
}

/// The conditional-anonymity specification with its probability tables.
#[derive(Debug, Clone)]
pub struct DcConditionalSpec {
    /// alpha(i): prior that cryptographer i paid, given that one of them did.
    pub alpha: Vec<BigRational>,
    /// alpha(i, j): prior that i paid given someone other than j did, for
    /// every observer j (cryptographers and the outsider).
    pub pairwise: BTreeMap<(usize, AgentId), BigRational>,
    /// Pairs whose conditioning event has probability zero.
    pub undefined: Vec<(usize, AgentId)>,
    pub formulas: Vec<Formula>,
}

/// Computes the alpha tables and the compiled conditional-anonymity formulas.
pub fn dc_conditional_spec(config: &DcConfig) -> Result<DcConditionalSpec, ModelError> {
    config.validate()?;
    let priors = config
        .priors
        .as_ref()
        .ok_or(ModelError::NoPayingCryptographer)?;
    let n = config.n;
    let prior = |i: usize| {
        priors
            .get(&Payer::Cryptographer(i))
            .cloned()
            .unwrap_or_else(BigRational::zero)
    };
    let crypto_total: BigRational = (0..n).map(prior).sum();
    if crypto_total.is_zero() {
        return Err(ModelError::NoPayingCryptographer);
    }
    let alpha: Vec<BigRational> = (0..n).map(|i| prior(i) / crypto_total.clone()).collect();

    let mut pairwise = BTreeMap::new();
    let mut undefined = Vec::new();
    let mut formulas = Vec::new();
    for i in 0..n {
        let mut observers: Vec<AgentId> = (0..n)
            .filter(|j| *j != i)
            .map(|j| config.cryptographer(j))
            .collect();
        if config.include_outsider {
            observers.push(config.outsider());
        }
        for observer in observers {
            let value = if observer == config.outsider() {
                Some(alpha[i].clone())
            } else {
                let j: usize = observer.as_str().parse().expect("cryptographer index");
                let denom: BigRational = (0..n)
                    .filter(|other| *other != j)
                    .map(|other| alpha[other].clone())
                    .sum();
                if denom.is_zero() {
                    None
                } else {
                    Some(alpha[i].clone() / denom)
                }
            };
            match value {
                None => undefined.push((i, observer)),
                Some(bound) => {
                    let others = Formula::ThetaOther(observer.clone(), PAID.to_string());
                    formulas.push(Formula::implies(
                        Formula::knows(observer.clone(), others),
                        Formula::prob_cmp(
                            observer.clone(),
                            Formula::Theta(config.cryptographer(i), PAID.to_string()),
                            Cmp::Eq,
                            bound.clone(),
                        ),
                    ));
                    pairwise.insert((i, observer), bound);
                }
            }
        }
    }
    Ok(DcConditionalSpec {
        alpha,
        pairwise,
        undefined,
        formulas,
    })
}
