//! Comparison pricing schemes: the price-minimized scheme picks the
//! cheapest feasible price, the random scheme rejection-samples prices
//! until the station constraints hold.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::follower::fleet_profiles;
use crate::leader::{
    build_breakpoints, build_interval_program, loads_within_bounds, materialize, pso_utility,
    InfeasibilityReport, IntervalProgram, SolveError, CONSTRAINT_TOLERANCE, RANDOM_ATTEMPT_CAP,
};
use crate::model::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Proposed,
    PriceMinimized,
    Random,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Proposed => "proposed",
            SchemeKind::PriceMinimized => "price-minimized",
            SchemeKind::Random => "random",
        }
    }
}

/// Outcome of a baseline scheme at its chosen price.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub scheme: SchemeKind,
    pub price: f64,
    pub services: Vec<f64>,
    pub pso_utility: f64,
    pub lcs_loads: Vec<f64>,
    pub rcs_draws: Vec<f64>,
    /// Rejection-sampling bookkeeping, random scheme only.
    pub seed: Option<u64>,
    pub attempts: Option<u32>,
}

fn finish(
    scenario: &Scenario,
    scheme: SchemeKind,
    price: f64,
    seed: Option<u64>,
    attempts: Option<u32>,
) -> BaselineResult {
    let profiles = fleet_profiles(scenario);
    let (services, lcs_loads, rcs_draws) = materialize(scenario, &profiles, price);
    let utility = pso_utility(scenario, price, &services);
    BaselineResult {
        scheme,
        price,
        services,
        pso_utility: utility,
        lcs_loads,
        rcs_draws,
        seed,
        attempts,
    }
}

/// Smallest price at which every station constraint holds. Aggregate loads
/// are piecewise linear and nondecreasing in price, so scanning the
/// breakpoint intervals in ascending order and taking the first nonempty
/// feasible sub-interval lands exactly on the infimum.
pub fn solve_price_minimized(scenario: &Scenario) -> Result<BaselineResult, SolveError> {
    let profiles = fleet_profiles(scenario);
    let breakpoints = build_breakpoints(scenario, &profiles);
    let programs: Vec<IntervalProgram> = breakpoints
        .intervals()
        .into_iter()
        .map(|interval| build_interval_program(scenario, &profiles, interval))
        .collect();
    for program in &programs {
        if let Some((lo, _)) = program.feasible {
            return Ok(finish(scenario, SchemeKind::PriceMinimized, lo, None, None));
        }
    }
    Err(SolveError::Infeasible(diagnose_via_solver(scenario)))
}

/// Uniformly rejection-samples prices from the threshold range under a
/// seeded generator until the constraints hold.
pub fn solve_random(scenario: &Scenario, seed: u64) -> Result<BaselineResult, SolveError> {
    let profiles = fleet_profiles(scenario);
    let breakpoints = build_breakpoints(scenario, &profiles);
    let lo = breakpoints.min_price();
    let hi = breakpoints.max_price();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=RANDOM_ATTEMPT_CAP {
        let price = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let (_, lcs_loads, rcs_draws) = materialize(scenario, &profiles, price);
        if loads_within_bounds(scenario, &lcs_loads, &rcs_draws, CONSTRAINT_TOLERANCE) {
            return Ok(finish(
                scenario,
                SchemeKind::Random,
                price,
                Some(seed),
                Some(attempt),
            ));
        }
    }
    Err(SolveError::RandomSearchExhausted {
        attempts: RANDOM_ATTEMPT_CAP,
    })
}

fn diagnose_via_solver(scenario: &Scenario) -> InfeasibilityReport {
    match crate::leader::solve_equilibrium(scenario) {
        Err(SolveError::Infeasible(report)) => report,
        _ => InfeasibilityReport { violations: vec![] },
    }
}
