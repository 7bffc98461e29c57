//! Model checking of epistemic and probabilistic anonymity properties over
//! finite multiagent systems in the runs-and-systems semantics.
//!
//! A system is a finite set of finite-horizon runs with per-agent local
//! states and an event log. Knowledge is indistinguishability of local
//! states; probabilities come from an exact-rational measure on runs,
//! conditioned to points. On top of that sit one checker per anonymity
//! definition, a dining-cryptographers generator, a bridge to CSP-style
//! trace processes, and function-view opaqueness checks.
//!
//! ```
//! use veil_core::anonymity::{check_up_to, AnonymityQuery, QueryKind};
//! use veil_core::dc::{build_dc_system, DcConfig, PAID};
//! use veil_core::{parse_formula, valid_in, EvalContext};
//!
//! // one round of the dining cryptographers, with an outside observer
//! let dc = build_dc_system(&DcConfig::uniform(3, true)).unwrap();
//! let ctx = EvalContext::new(&dc.interpreted);
//!
//! // whoever paid, the outsider still considers every cryptographer possible
//! let query = AnonymityQuery::new(
//!     QueryKind::UpToSet,
//!     dc.config.cryptographer(0),
//!     PAID,
//!     dc.config.outsider(),
//! )
//! .with_set((0..3).map(|i| dc.config.cryptographer(i)));
//! assert!(check_up_to(&ctx, &query).unwrap().holds);
//!
//! // the same property written in the formula language
//! let formula = parse_formula("theta(0, paid) => P_o theta(1, paid) & P_o theta(2, paid)")
//!     .unwrap();
//! assert!(valid_in(&ctx, &formula).unwrap().holds);
//! ```

pub mod anonymity;
pub mod csp;
pub mod dc;
pub mod error;
pub mod logic;
pub mod parse;
pub mod prob;
pub mod ratio;
pub mod system;
pub mod views;

pub use anonymity::{AnonymityQuery, CheckError, CheckReport, Mode, QueryKind};
pub use error::{EvalError, ModelError};
pub use logic::{evaluate, valid_in, Cmp, EvalContext, Formula, ProbBound, Validity};
pub use parse::{parse_formula, ParseError};
pub use prob::{PointMeasure, RunMeasure};
pub use system::{
    AgentId, GlobalState, InterpretedSystem, LocalState, Point, Run, RunEvent, RunId, System,
};
