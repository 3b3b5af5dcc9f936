//! Price scheduling of on-road mobile energy storage between charging
//! stations.
//!
//! An operator posts one per-kWh service price; each mobile storage unit
//! (an EV routed past a surplus station and a deficit station) responds
//! with the service amount that maximizes its own utility. The crate
//! computes the operator's optimal price in closed form together with the
//! induced fleet response, provides two baseline pricing schemes for
//! comparison, and ships brute-force grid verifiers for every closed-form
//! path.
//!
//! Typical use:
//!
//! ```no_run
//! let scenario = mesched_core::load_scenario("scenario.toml").unwrap();
//! let result = mesched_core::solve_equilibrium(&scenario).unwrap();
//! println!("price {} utility {}", result.price, result.pso_utility);
//! ```

pub mod baselines;
pub mod document;
pub mod error;
pub mod fleet;
pub mod follower;
pub mod leader;
pub mod model;
pub mod oracle;

pub use baselines::{solve_price_minimized, solve_random, BaselineResult, SchemeKind};
pub use document::{load_scenario, parse_scenario, save_scenario, scenario_to_toml, ScenarioDocument};
pub use error::ScenarioError;
pub use fleet::{generate_fleet, FleetSpec, RoutePlan};
pub use follower::{best_response, best_response_profile, fleet_profiles, BestResponseProfile};
pub use leader::{
    solve_equilibrium, ConstraintViolation, EquilibriumResult, InfeasibilityReport, SolveError,
};
pub use model::{DegradationCurve, Lcs, MesAgent, PowerDegradation, Rcs, Scenario, StationGroup};
pub use oracle::{brute_best_response, brute_equilibrium, GridSpec};
