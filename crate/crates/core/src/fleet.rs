//! Seeded fleet generation from distribution parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::model::{DegradationCurve, MesAgent, PowerDegradation};

const RESAMPLE_CAP: u32 = 10_000;

/// Vehicles planned along one station pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub rcs: String,
    pub lcs: String,
    pub count: u32,
}

/// Distribution parameters for a generated fleet. Battery capacities are
/// drawn from `Normal(battery_mean, battery_std)` truncated to positive
/// values; spare service capacities from
/// `Normal(capacity_mean, capacity_std)` truncated to [0, battery]; the
/// initial state of charge is whatever the service capacity leaves free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSpec {
    pub routes: Vec<RoutePlan>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_battery_mean")]
    pub battery_mean: f64,
    #[serde(default = "default_battery_std")]
    pub battery_std: f64,
    #[serde(default = "default_capacity_mean")]
    pub capacity_mean: f64,
    #[serde(default = "default_capacity_std")]
    pub capacity_std: f64,
    #[serde(default = "default_time_weight")]
    pub time_weight: f64,
    #[serde(default = "default_degradation_weight")]
    pub degradation_weight: f64,
    #[serde(default = "default_dod_quadratic")]
    pub dod_quadratic: f64,
    #[serde(default = "default_dod_linear")]
    pub dod_linear: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_degradation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation_curve: Option<[f64; 4]>,
}

fn default_battery_mean() -> f64 {
    80.0
}
fn default_battery_std() -> f64 {
    10.0
}
fn default_capacity_mean() -> f64 {
    14.0
}
fn default_capacity_std() -> f64 {
    5.0
}
fn default_time_weight() -> f64 {
    30.0
}
fn default_degradation_weight() -> f64 {
    1.0e5
}
fn default_dod_quadratic() -> f64 {
    1.0
}
fn default_dod_linear() -> f64 {
    -0.222
}
pub(crate) fn default_power_degradation() -> f64 {
    5.08e-4
}

impl FleetSpec {
    pub fn new(routes: Vec<RoutePlan>) -> Self {
        FleetSpec {
            routes,
            seed: 0,
            battery_mean: default_battery_mean(),
            battery_std: default_battery_std(),
            capacity_mean: default_capacity_mean(),
            capacity_std: default_capacity_std(),
            time_weight: default_time_weight(),
            degradation_weight: default_degradation_weight(),
            dod_quadratic: default_dod_quadratic(),
            dod_linear: default_dod_linear(),
            power_degradation: None,
            degradation_curve: None,
        }
    }

    fn resolved_degradation(&self) -> Result<PowerDegradation, ScenarioError> {
        match (self.power_degradation, self.degradation_curve) {
            (Some(_), Some(_)) => Err(ScenarioError::invariant(
                "fleet_spec.power_degradation",
                "give either power_degradation or degradation_curve, not both",
            )),
            (Some(d), None) => Ok(PowerDegradation::Direct(d)),
            (None, Some([c3, c2, c1, c0])) => Ok(PowerDegradation::Curve(DegradationCurve {
                cubic: c3,
                quadratic: c2,
                linear: c1,
                constant: c0,
            })),
            (None, None) => Ok(PowerDegradation::Direct(default_power_degradation())),
        }
    }
}

/// Draws a deterministic fleet from the distribution parameters. A pure
/// function of `(spec, seed)`: the same inputs always produce the same
/// fleet.
pub fn generate_fleet(spec: &FleetSpec, seed: u64) -> Result<Vec<MesAgent>, ScenarioError> {
    for (value, field) in [
        (spec.battery_mean, "battery_mean"),
        (spec.battery_std, "battery_std"),
        (spec.capacity_mean, "capacity_mean"),
        (spec.capacity_std, "capacity_std"),
    ] {
        if !value.is_finite() || value < 0.0 {
            return Err(ScenarioError::invariant(
                format!("fleet_spec.{field}"),
                "distribution parameters must be finite and nonnegative",
            ));
        }
    }
    let degradation = spec.resolved_degradation()?;
    let battery_dist = normal(spec.battery_mean, spec.battery_std, "battery")?;
    let capacity_dist = normal(spec.capacity_mean, spec.capacity_std, "capacity")?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fleet = Vec::new();
    for route in &spec.routes {
        for _ in 0..route.count {
            let battery = sample_truncated(&mut rng, &battery_dist, |b| b > 0.0, "battery")?;
            let capacity =
                sample_truncated(&mut rng, &capacity_dist, |c| (0.0..=battery).contains(&c), "capacity")?;
            fleet.push(MesAgent {
                id: format!("mes-{}", fleet.len() + 1),
                rcs: route.rcs.clone(),
                lcs: route.lcs.clone(),
                battery_capacity: battery,
                initial_soc: battery - capacity,
                time_weight: spec.time_weight,
                degradation_weight: spec.degradation_weight,
                dod_quadratic: spec.dod_quadratic,
                dod_linear: spec.dod_linear,
                power_degradation: degradation,
            });
        }
    }
    Ok(fleet)
}

fn normal(mean: f64, std: f64, field: &str) -> Result<Normal<f64>, ScenarioError> {
    Normal::new(mean, std).map_err(|e| {
        ScenarioError::invariant(format!("fleet_spec.{field}"), format!("invalid distribution: {e}"))
    })
}

fn sample_truncated(
    rng: &mut ChaCha8Rng,
    dist: &Normal<f64>,
    accept: impl Fn(f64) -> bool,
    field: &str,
) -> Result<f64, ScenarioError> {
    for _ in 0..RESAMPLE_CAP {
        let value = dist.sample(rng);
        if accept(value) {
            return Ok(value);
        }
        // Degenerate distribution that can never satisfy the bounds.
        if dist.std_dev() == 0.0 {
            break;
        }
    }
    Err(ScenarioError::invariant(
        format!("fleet_spec.{field}"),
        "distribution cannot satisfy the truncation bounds",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> FleetSpec {
        FleetSpec::new(vec![
            RoutePlan { rcs: "R1".into(), lcs: "L1".into(), count: 6 },
            RoutePlan { rcs: "R1".into(), lcs: "L2".into(), count: 8 },
            RoutePlan { rcs: "R2".into(), lcs: "L1".into(), count: 7 },
            RoutePlan { rcs: "R2".into(), lcs: "L2".into(), count: 4 },
        ])
    }

    #[test]
    fn same_seed_same_fleet() {
        let a = generate_fleet(&spec(), 42).unwrap();
        let b = generate_fleet(&spec(), 42).unwrap();
        assert_eq!(a, b);
        let c = generate_fleet(&spec(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_deviation_yields_constant_fleet() {
        let mut s = spec();
        s.battery_std = 0.0;
        s.capacity_std = 0.0;
        let fleet = generate_fleet(&s, 1).unwrap();
        assert_eq!(fleet.len(), 25);
        for agent in &fleet {
            assert_eq!(agent.battery_capacity, 80.0);
            assert_eq!(agent.spare_capacity(), 14.0);
            assert_eq!(agent.initial_soc, 66.0);
        }
    }

    #[test]
    fn truncation_bounds_always_hold() {
        for seed in 0..20 {
            let fleet = generate_fleet(&spec(), seed).unwrap();
            for agent in &fleet {
                assert!(agent.battery_capacity > 0.0);
                assert!(agent.initial_soc >= 0.0);
                assert!(agent.initial_soc <= agent.battery_capacity);
            }
        }
    }

    #[test]
    fn impossible_truncation_is_rejected() {
        let mut s = spec();
        s.battery_std = 0.0;
        s.battery_mean = 0.0;
        assert!(generate_fleet(&s, 1).is_err());
    }

    #[test]
    fn negative_deviation_is_rejected() {
        let mut s = spec();
        s.capacity_std = -1.0;
        assert!(generate_fleet(&s, 1).is_err());
    }
}
