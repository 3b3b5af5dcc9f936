//! Brute-force verifiers. Deliberately simple and slow: they enumerate
//! grids instead of using any closed form, so the solver can be checked
//! against an independent route.

use crate::follower::{best_response, mes_utility,BestResponseProfile};
use crate::model::{MesAgent, Scenario};

/// Grid resolutions and the constraint slack used by the verifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Service-grid step as a fraction of the agent's spare capacity.
    pub service_step_fraction: f64,
    /// Absolute price-grid step.
    pub price_step: f64,
    /// Absolute constraint slack, kWh.
    pub tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            service_step_fraction: 1e-3,
            price_step: 1e-4,
            tolerance: 1e-6,
        }
    }
}

/// Feasible maximizer found by the price-grid scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub price: f64,
    pub utility: f64,
}

/// Maximizes the agent utility over a uniform service grid on
/// [0, spare capacity]. Ties keep the smallest service amount.
pub fn brute_best_response(
    agent: &MesAgent,
    price: f64,
    mean_target: f64,
    charge_power: f64,
    discharge_power: f64,
    grid: &GridSpec,
) -> f64 {
    assert!(grid.service_step_fraction > 0.0);
    let cap = agent.spare_capacity();
    if cap <= 0.0 {
        return 0.0;
    }
    let steps = (1.0 / grid.service_step_fraction).round().max(1.0) as usize;
    let mut best_e = 0.0;
    let mut best_u = f64::NEG_INFINITY;
    for s in 0..=steps {
        let e = cap * s as f64 / steps as f64;
        let u = mes_utility(agent, e, price, mean_target, charge_power, discharge_power);
        if u > best_u {
            best_u = u;
            best_e = e;
        }
    }
    best_e
}

/// Exhaustive price-grid scan over [0, max threshold price]: at each grid
/// price the fleet plays its best responses, the station constraints are
/// checked directly, and the operator utility is evaluated term by term.
/// Returns the feasible maximizer (ties keep the lowest price) or `None`
/// when no grid point is feasible.
pub fn brute_equilibrium(scenario: &Scenario, grid: &GridSpec) -> Option<GridOptimum> {
    assert!(grid.price_step > 0.0);
    let profiles = crate::follower::fleet_profiles(scenario);
    let p_max = profiles
        .iter()
        .flat_map(|p| [p.rejection_price.max(0.0), p.saturation_price.max(0.0)])
        .fold(0.0, f64::max);
    let steps = ((p_max / grid.price_step).ceil() as usize).max(1);

    let mut best: Option<GridOptimum> = None;
    for s in 0..=steps {
        let price = p_max * s as f64 / steps as f64;
        if let Some(utility) = feasible_utility(scenario, &profiles, price, grid.tolerance) {
            if best.map_or(true, |b| utility > b.utility) {
                best = Some(GridOptimum { price, utility });
            }
        }
    }
    best
}

/// Direct evaluation of one grid price: loads summed station by station,
/// bounds checked, utility accumulated from its definition.
fn feasible_utility(
    scenario: &Scenario,
    profiles: &[BestResponseProfile],
    price: f64,
    tol: f64,
) -> Option<f64> {
    let stations = scenario.stations();
    let mut lcs_loads = vec![0.0; stations.lcs.len()];
    let mut rcs_draws = vec![0.0; stations.rcs.len()];
    let mut payments = 0.0;
    let target = scenario.mean_service_target();
    for (k, profile) in profiles.iter().enumerate() {
        let e = best_response(profile, price);
        let (i, j) = scenario.route(k);
        lcs_loads[j] += e;
        rcs_draws[i] += e;
        payments += price * e + price * (e - target);
    }
    for (lcs, &load) in stations.lcs.iter().zip(&lcs_loads) {
        if load < lcs.demand_min - tol || load > lcs.demand_max + tol {
            return None;
        }
    }
    for (rcs, &draw) in stations.rcs.iter().zip(&rcs_draws) {
        if draw > rcs.surplus_energy + tol {
            return None;
        }
    }
    let revenue: f64 = stations
        .lcs
        .iter()
        .zip(&lcs_loads)
        .map(|(lcs, &load)| {
            let scale = 5.0e-4 * lcs.demand_max;
            let offset = scale * lcs.demand_max;
            let d = scale * load - offset;
            offset * offset - d * d
        })
        .sum();
    Some(scenario.loading_weight() * revenue - payments)
}
