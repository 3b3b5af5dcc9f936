//! Domain model: charging stations, the mobile-storage fleet, and the
//! validated scenario that ties them together.
//!
//! A scenario describes one scheduling slot. A group of resourceful
//! charging stations (RCS) holds surplus energy; limited-capacity charging
//! stations (LCS) need energy delivered within a demand window. Each mobile
//! energy storage (MES) unit is an electric vehicle whose planned route
//! passes exactly one RCS and one LCS, so it can pick energy up at the
//! former and discharge it at the latter in exchange for a posted per-kWh
//! service price.

use crate::error::ScenarioError;

/// Resourceful charging station: the energy source of the service.
#[derive(Debug, Clone, PartialEq)]
pub struct Rcs {
    pub id: String,
    /// Surplus energy available for pickup, kWh.
    pub surplus_energy: f64,
    /// Average charging power seen by a visiting vehicle, kW.
    pub charge_power: f64,
}

impl Rcs {
    pub fn new(id: impl Into<String>, surplus_energy: f64, charge_power: f64) -> Result<Self, ScenarioError> {
        let rcs = Rcs {
            id: id.into(),
            surplus_energy,
            charge_power,
        };
        rcs.validate(&format!("rcs[{}]", rcs.id))?;
        Ok(rcs)
    }

    pub(crate) fn validate(&self, ctx: &str) -> Result<(), ScenarioError> {
        require_finite(self.surplus_energy, &format!("{ctx}.surplus_energy"))?;
        require_finite(self.charge_power, &format!("{ctx}.charge_power"))?;
        if self.surplus_energy < 0.0 {
            return Err(ScenarioError::invariant(
                format!("{ctx}.surplus_energy"),
                "surplus energy must be nonnegative",
            ));
        }
        if self.charge_power <= 0.0 {
            return Err(ScenarioError::invariant(
                format!("{ctx}.charge_power"),
                "charge power must be positive",
            ));
        }
        Ok(())
    }
}

/// Limited-capacity charging station: the energy sink of the service.
#[derive(Debug, Clone, PartialEq)]
pub struct Lcs {
    pub id: String,
    /// Minimal energy that must be delivered this slot, kWh.
    pub demand_min: f64,
    /// Maximal energy the station can absorb this slot, kWh.
    pub demand_max: f64,
    /// Average discharging power seen by a visiting vehicle, kW.
    pub discharge_power: f64,
}

impl Lcs {
    pub fn new(
        id: impl Into<String>,
        demand_min: f64,
        demand_max: f64,
        discharge_power: f64,
    ) -> Result<Self, ScenarioError> {
        let lcs = Lcs {
            id: id.into(),
            demand_min,
            demand_max,
            discharge_power,
        };
        lcs.validate(&format!("lcs[{}]", lcs.id))?;
        Ok(lcs)
    }

    pub(crate) fn validate(&self, ctx: &str) -> Result<(), ScenarioError> {
        require_finite(self.demand_min, &format!("{ctx}.demand_min"))?;
        require_finite(self.demand_max, &format!("{ctx}.demand_max"))?;
        require_finite(self.discharge_power, &format!("{ctx}.discharge_power"))?;
        if self.demand_min < 0.0 {
            return Err(ScenarioError::invariant(
                format!("{ctx}.demand_min"),
                "minimal demand must be nonnegative",
            ));
        }
        if self.demand_min > self.demand_max {
            return Err(ScenarioError::invariant(
                format!("{ctx}.demand_min"),
                "minimal demand must not exceed maximal demand",
            ));
        }
        if self.discharge_power <= 0.0 {
            return Err(ScenarioError::invariant(
                format!("{ctx}.discharge_power"),
                "discharge power must be positive",
            ));
        }
        Ok(())
    }

    /// Revenue curve for load delivered to this station. The curve peaks
    /// exactly at `demand_max`: `revenue(load) = peak - (scale*load - offset)^2`
    /// with `offset = scale * demand_max` and `peak = offset^2`, so
    /// `revenue(0) = 0` and `revenue(demand_max) = peak`.
    pub fn loading(&self) -> LoadingRevenue {
        let scale = 5.0e-4 * self.demand_max;
        let offset = scale * self.demand_max;
        LoadingRevenue {
            scale,
            offset,
            peak: offset * offset,
        }
    }
}

/// Quadratic loading-revenue curve of one LCS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadingRevenue {
    pub scale: f64,
    pub offset: f64,
    pub peak: f64,
}

impl LoadingRevenue {
    pub fn revenue(&self, load: f64) -> f64 {
        let d = self.scale * load - self.offset;
        self.peak - d * d
    }
}

/// Cubic curve mapping a discharging power to a battery-degradation factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationCurve {
    pub cubic: f64,
    pub quadratic: f64,
    pub linear: f64,
    pub constant: f64,
}

impl DegradationCurve {
    pub fn evaluate(&self, power: f64) -> f64 {
        ((self.cubic * power + self.quadratic) * power + self.linear) * power + self.constant
    }
}

/// Evaluates the degradation curve at a station discharging power. The
/// factor must come out positive for the battery cost model to make sense.
pub fn power_degradation_factor(curve: &DegradationCurve, power: f64) -> Result<f64, ScenarioError> {
    let factor = curve.evaluate(power);
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(ScenarioError::invariant(
            "degradation_curve",
            format!("degradation factor at discharge power {power} kW must be positive, got {factor}"),
        ));
    }
    Ok(factor)
}

/// Per-power battery degradation, either a fixed factor or a curve
/// evaluated at the destination station's discharging power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerDegradation {
    Direct(f64),
    Curve(DegradationCurve),
}

impl PowerDegradation {
    /// Resolves the factor for a concrete discharging power.
    pub fn factor(&self, discharge_power: f64) -> Result<f64, ScenarioError> {
        match self {
            PowerDegradation::Direct(d) => {
                if !(*d > 0.0) || !d.is_finite() {
                    return Err(ScenarioError::invariant(
                        "power_degradation",
                        format!("power degradation must be positive, got {d}"),
                    ));
                }
                Ok(*d)
            }
            PowerDegradation::Curve(curve) => power_degradation_factor(curve, discharge_power),
        }
    }
}

/// One mobile energy storage unit: a vehicle with a planned route from an
/// RCS to an LCS, spare battery room, and driver preferences.
#[derive(Debug, Clone, PartialEq)]
pub struct MesAgent {
    pub id: String,
    /// RCS passed on the planned route (energy pickup).
    pub rcs: String,
    /// LCS the route is destined to (energy delivery).
    pub lcs: String,
    /// Battery capacity, kWh.
    pub battery_capacity: f64,
    /// State of charge at the start of the slot, kWh.
    pub initial_soc: f64,
    /// Driver preference weight on in-station service time.
    pub time_weight: f64,
    /// Driver preference weight on battery degradation.
    pub degradation_weight: f64,
    /// Quadratic depth-of-discharge degradation coefficient.
    pub dod_quadratic: f64,
    /// Linear depth-of-discharge degradation coefficient.
    pub dod_linear: f64,
    /// Discharging-power degradation factor or curve.
    pub power_degradation: PowerDegradation,
}

impl MesAgent {
    /// Spare battery room available for the service, kWh.
    pub fn spare_capacity(&self) -> f64 {
        self.battery_capacity - self.initial_soc
    }

    pub(crate) fn validate(&self, ctx: &str) -> Result<(), ScenarioError> {
        for (value, field) in [
            (self.battery_capacity, "battery_capacity"),
            (self.initial_soc, "initial_soc"),
            (self.time_weight, "time_weight"),
            (self.degradation_weight, "degradation_weight"),
            (self.dod_quadratic, "dod_quadratic"),
            (self.dod_linear, "dod_linear"),
        ] {
            require_finite(value, &format!("{ctx}.{field}"))?;
        }
        if self.initial_soc < 0.0 || self.initial_soc > self.battery_capacity {
            return Err(ScenarioError::invariant(
                format!("{ctx}.initial_soc"),
                "initial state of charge must lie in [0, battery_capacity]",
            ));
        }
        if self.time_weight <= 0.0 {
            return Err(ScenarioError::invariant(
                format!("{ctx}.time_weight"),
                "time weight must be positive",
            ));
        }
        if self.degradation_weight <= 0.0 {
            return Err(ScenarioError::invariant(
                format!("{ctx}.degradation_weight"),
                "degradation weight must be positive",
            ));
        }
        if self.dod_quadratic <= 0.0 {
            return Err(ScenarioError::invariant(
                format!("{ctx}.dod_quadratic"),
                "quadratic depth-of-discharge coefficient must be positive",
            ));
        }
        Ok(())
    }
}

/// The group of charging stations operated together.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StationGroup {
    pub rcs: Vec<Rcs>,
    pub lcs: Vec<Lcs>,
}

/// A validated scheduling scenario for one slot.
///
/// Construction resolves every route to station indices, checks all model
/// invariants, counts vehicles per station pair and derives the mean
/// service target (total minimal demand averaged over the fleet).
/// Instances are immutable afterwards and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    stations: StationGroup,
    fleet: Vec<MesAgent>,
    loading_weight: f64,
    routes: Vec<(usize, usize)>,
    pair_counts: Vec<Vec<usize>>,
    mean_service_target: f64,
}

impl Scenario {
    pub fn new(
        stations: StationGroup,
        fleet: Vec<MesAgent>,
        loading_weight: f64,
    ) -> Result<Self, ScenarioError> {
        require_finite(loading_weight, "weights.loading_weight")?;
        if loading_weight < 0.0 {
            return Err(ScenarioError::invariant(
                "weights.loading_weight",
                "loading weight must be nonnegative",
            ));
        }
        for (n, rcs) in stations.rcs.iter().enumerate() {
            rcs.validate(&format!("rcs[{n}]"))?;
        }
        for (n, lcs) in stations.lcs.iter().enumerate() {
            lcs.validate(&format!("lcs[{n}]"))?;
        }
        check_unique_ids(stations.rcs.iter().map(|s| s.id.as_str()), "rcs")?;
        check_unique_ids(stations.lcs.iter().map(|s| s.id.as_str()), "lcs")?;
        if fleet.is_empty() {
            return Err(ScenarioError::EmptyFleet);
        }

        let mut routes = Vec::with_capacity(fleet.len());
        let mut pair_counts = vec![vec![0usize; stations.lcs.len()]; stations.rcs.len()];
        for (k, agent) in fleet.iter().enumerate() {
            let ctx = format!("fleet[{k}]");
            agent.validate(&ctx)?;
            let i = stations
                .rcs
                .iter()
                .position(|s| s.id == agent.rcs)
                .ok_or_else(|| {
                    ScenarioError::invariant(
                        format!("{ctx}.rcs"),
                        format!("route references unknown RCS '{}'", agent.rcs),
                    )
                })?;
            let j = stations
                .lcs
                .iter()
                .position(|s| s.id == agent.lcs)
                .ok_or_else(|| {
                    ScenarioError::invariant(
                        format!("{ctx}.lcs"),
                        format!("route references unknown LCS '{}'", agent.lcs),
                    )
                })?;
            // A curve must stay positive at every station power it may see.
            if let PowerDegradation::Curve(curve) = &agent.power_degradation {
                for lcs in &stations.lcs {
                    power_degradation_factor(curve, lcs.discharge_power).map_err(|_| {
                        ScenarioError::invariant(
                            format!("{ctx}.degradation_curve"),
                            format!(
                                "degradation factor must be positive at LCS '{}' power {} kW",
                                lcs.id, lcs.discharge_power
                            ),
                        )
                    })?;
                }
            }
            agent
                .power_degradation
                .factor(stations.lcs[j].discharge_power)
                .map_err(|_| {
                    ScenarioError::invariant(
                        format!("{ctx}.power_degradation"),
                        "power degradation factor must be positive",
                    )
                })?;
            routes.push((i, j));
            pair_counts[i][j] += 1;
        }

        let total_demand: f64 = stations.lcs.iter().map(|l| l.demand_min).sum();
        let mean_service_target = total_demand / fleet.len() as f64;

        Ok(Scenario {
            stations,
            fleet,
            loading_weight,
            routes,
            pair_counts,
            mean_service_target,
        })
    }

    pub fn stations(&self) -> &StationGroup {
        &self.stations
    }

    pub fn fleet(&self) -> &[MesAgent] {
        &self.fleet
    }

    pub fn loading_weight(&self) -> f64 {
        self.loading_weight
    }

    /// (RCS index, LCS index) of the k-th fleet member's route.
    pub fn route(&self, k: usize) -> (usize, usize) {
        self.routes[k]
    }

    /// Number of fleet members routed from RCS `i` to LCS `j`.
    pub fn pair_count(&self, i: usize, j: usize) -> usize {
        self.pair_counts[i][j]
    }

    pub fn pair_counts(&self) -> &[Vec<usize>] {
        &self.pair_counts
    }

    /// Total minimal LCS demand averaged over the fleet, kWh.
    pub fn mean_service_target(&self) -> f64 {
        self.mean_service_target
    }

    /// (charging power at the passed RCS, discharging power at the destined
    /// LCS) for the k-th fleet member.
    pub fn route_powers(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.routes[k];
        (
            self.stations.rcs[i].charge_power,
            self.stations.lcs[j].discharge_power,
        )
    }

    /// Resolved power-degradation factor of the k-th fleet member at its
    /// destination station. Positive for any validated scenario.
    pub fn power_degradation(&self, k: usize) -> f64 {
        let (_, j) = self.routes[k];
        self.fleet[k]
            .power_degradation
            .factor(self.stations.lcs[j].discharge_power)
            .expect("validated at construction")
    }
}

fn require_finite(value: f64, field: &str) -> Result<(), ScenarioError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invariant(field, "value must be finite"))
    }
}

fn check_unique_ids<'a>(ids: impl Iterator<Item = &'a str>, section: &str) -> Result<(), ScenarioError> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ScenarioError::invariant(
                format!("{section}.id"),
                format!("duplicate station id '{id}'"),
            ));
        }
    }
    Ok(())
}
