//! Follower side of the game: the utility each mobile storage unit earns
//! from serving energy at a posted price, and its best response.
//!
//! For service amount `e` at price `p` a unit collects the service reward
//! `p*e` plus a motivation reward `p*(e - mean_target)` that pays extra
//! above (and penalizes below) the fleet-average target. Against that it
//! weighs the in-station time `e/P_charge + e/P_discharge` and a battery
//! degradation cost quadratic in depth of discharge. The utility is
//! strictly concave in `e`, so the maximizer over the spare-capacity box
//! is unique and piecewise linear in `p`: zero up to a rejection price,
//! then a linear ramp, then full spare capacity from a saturation price on.

use crate::model::{MesAgent, Scenario};

/// Closed-form best response of one fleet member.
///
/// On the interior branch the service amount is `slope * p - offset`; the
/// ramp starts at `rejection_price` (where it crosses zero) and ends at
/// `saturation_price` (where it reaches `capacity`). Units with no spare
/// capacity carry `rejection_price == saturation_price` and never serve.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseProfile {
    pub mes_id: String,
    pub rejection_price: f64,
    pub saturation_price: f64,
    pub slope: f64,
    pub offset: f64,
    pub capacity: f64,
}

/// In-station time spent to move `e` kWh: charging at the RCS plus
/// discharging at the LCS.
pub fn service_time(e: f64, charge_power: f64, discharge_power: f64) -> f64 {
    debug_assert!(e >= 0.0);
    e / charge_power + e / discharge_power
}

/// Battery degradation cost of discharging `e` kWh, per the agent's
/// depth-of-discharge curve scaled by the power-degradation factor of the
/// destination station.
pub fn degradation_cost(agent: &MesAgent, e: f64, discharge_power: f64) -> f64 {
    debug_assert!(e >= 0.0 && e <= agent.battery_capacity + 1e-9);
    let d = agent
        .power_degradation
        .factor(discharge_power)
        .expect("agent power degradation must be positive");
    let dod = e / agent.battery_capacity;
    d * (agent.dod_quadratic * dod * dod + agent.dod_linear * dod)
}

/// Utility of serving `e` kWh at price `p`.
pub fn mes_utility(
    agent: &MesAgent,
    e: f64,
    price: f64,
    mean_target: f64,
    charge_power: f64,
    discharge_power: f64,
) -> f64 {
    price * e + price * (e - mean_target)
        - agent.time_weight * service_time(e, charge_power, discharge_power)
        - agent.degradation_weight * degradation_cost(agent, e, discharge_power)
}

/// Derives the rejection/saturation prices and the interior linear form of
/// the agent's best response.
pub fn best_response_profile(
    agent: &MesAgent,
    charge_power: f64,
    discharge_power: f64,
) -> BestResponseProfile {
    let d = agent
        .power_degradation
        .factor(discharge_power)
        .expect("agent power degradation must be positive");
    let b = agent.battery_capacity;
    let capacity = agent.spare_capacity();
    let time_rate = agent.time_weight * (charge_power + discharge_power) / (charge_power * discharge_power);
    let rejection_price = 0.5 * (time_rate + agent.degradation_weight * agent.dod_linear * d / b);
    let saturation_price =
        rejection_price + agent.dod_quadratic * agent.degradation_weight * d * capacity / (b * b);
    let slope = b * b / (agent.dod_quadratic * agent.degradation_weight * d);
    BestResponseProfile {
        mes_id: agent.id.clone(),
        rejection_price,
        saturation_price,
        slope,
        offset: slope * rejection_price,
        capacity,
    }
}

/// The unique best response at price `p`: zero at or below the rejection
/// price, the linear ramp strictly between the thresholds, full spare
/// capacity at or above the saturation price.
pub fn best_response(profile: &BestResponseProfile, price: f64) -> f64 {
    debug_assert!(price >= 0.0);
    if price <= profile.rejection_price {
        0.0
    } else if price >= profile.saturation_price {
        profile.capacity
    } else {
        profile.slope * price - profile.offset
    }
}

/// Whether serving the best response at `p` earns strictly positive
/// utility. Reported as a per-unit diagnostic; the equilibrium machinery
/// does not feed it back.
pub fn participates(
    agent: &MesAgent,
    profile: &BestResponseProfile,
    price: f64,
    mean_target: f64,
    charge_power: f64,
    discharge_power: f64,
) -> bool {
    let e = best_response(profile, price);
    mes_utility(agent, e, price, mean_target, charge_power, discharge_power) > 0.0
}

/// Best-response profiles for the whole fleet, each built with its route's
/// station powers. Indexed like `scenario.fleet()`.
pub fn fleet_profiles(scenario: &Scenario) -> Vec<BestResponseProfile> {
    scenario
        .fleet()
        .iter()
        .enumerate()
        .map(|(k, agent)| {
            let (charge, discharge) = scenario.route_powers(k);
            best_response_profile(agent, charge, discharge)
        })
        .collect()
}
