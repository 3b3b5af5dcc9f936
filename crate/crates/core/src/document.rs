//! Scenario documents: the on-disk TOML format and its mapping onto the
//! validated model.
//!
//! A document has four sections. `[[rcs]]` and `[[lcs]]` list the
//! stations, `[weights]` holds the loading weight, and the fleet comes
//! either as explicit `[[fleet]]` entries or as a generative
//! `[fleet_spec]` with `[[fleet_spec.routes]]` pair counts. Energy fields
//! are kWh, power fields kW. Floats are written in shortest round-trip
//! form, so any decimal literal of up to nine significant digits survives
//! a save/load cycle bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::fleet::{generate_fleet, FleetSpec};
use crate::model::{DegradationCurve, Lcs, MesAgent, PowerDegradation, Rcs, Scenario, StationGroup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub weights: WeightsSection,
    pub rcs: Vec<RcsSection>,
    pub lcs: Vec<LcsSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fleet: Vec<FleetEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleet_spec: Option<FleetSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsSection {
    pub loading_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcsSection {
    pub id: String,
    pub surplus_energy: f64,
    pub charge_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcsSection {
    pub id: String,
    pub demand_min: f64,
    pub demand_max: f64,
    pub discharge_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetEntry {
    pub id: String,
    pub rcs: String,
    pub lcs: String,
    pub battery_capacity: f64,
    pub initial_soc: f64,
    pub time_weight: f64,
    pub degradation_weight: f64,
    pub dod_quadratic: f64,
    pub dod_linear: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_degradation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation_curve: Option<[f64; 4]>,
}

impl ScenarioDocument {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }

    /// Validates the document and materializes the scenario. A generative
    /// fleet section is expanded with its own seed.
    pub fn into_scenario(&self) -> Result<Scenario, ScenarioError> {
        let stations = StationGroup {
            rcs: self
                .rcs
                .iter()
                .map(|s| Rcs::new(s.id.clone(), s.surplus_energy, s.charge_power))
                .collect::<Result<_, _>>()?,
            lcs: self
                .lcs
                .iter()
                .map(|s| Lcs::new(s.id.clone(), s.demand_min, s.demand_max, s.discharge_power))
                .collect::<Result<_, _>>()?,
        };
        let fleet = match (&self.fleet_spec, self.fleet.is_empty()) {
            (Some(_), false) => {
                return Err(ScenarioError::invariant(
                    "fleet",
                    "give either [[fleet]] entries or a [fleet_spec], not both",
                ))
            }
            (Some(spec), true) => generate_fleet(spec, spec.seed)?,
            (None, false) => self
                .fleet
                .iter()
                .enumerate()
                .map(|(k, e)| e.to_agent(k))
                .collect::<Result<_, _>>()?,
            (None, true) => return Err(ScenarioError::EmptyFleet),
        };
        Scenario::new(stations, fleet, self.weights.loading_weight)
    }
}

impl FleetEntry {
    fn to_agent(&self, index: usize) -> Result<MesAgent, ScenarioError> {
        let power_degradation = match (self.power_degradation, self.degradation_curve) {
            (Some(_), Some(_)) => {
                return Err(ScenarioError::invariant(
                    format!("fleet[{index}].power_degradation"),
                    "give either power_degradation or degradation_curve, not both",
                ))
            }
            (Some(d), None) => PowerDegradation::Direct(d),
            (None, Some([c3, c2, c1, c0])) => PowerDegradation::Curve(DegradationCurve {
                cubic: c3,
                quadratic: c2,
                linear: c1,
                constant: c0,
            }),
            (None, None) => {
                return Err(ScenarioError::invariant(
                    format!("fleet[{index}].power_degradation"),
                    "power_degradation or degradation_curve is required",
                ))
            }
        };
        Ok(MesAgent {
            id: self.id.clone(),
            rcs: self.rcs.clone(),
            lcs: self.lcs.clone(),
            battery_capacity: self.battery_capacity,
            initial_soc: self.initial_soc,
            time_weight: self.time_weight,
            degradation_weight: self.degradation_weight,
            dod_quadratic: self.dod_quadratic,
            dod_linear: self.dod_linear,
            power_degradation,
        })
    }

    fn from_agent(agent: &MesAgent) -> FleetEntry {
        let (power_degradation, degradation_curve) = match agent.power_degradation {
            PowerDegradation::Direct(d) => (Some(d), None),
            PowerDegradation::Curve(c) => (None, Some([c.cubic, c.quadratic, c.linear, c.constant])),
        };
        FleetEntry {
            id: agent.id.clone(),
            rcs: agent.rcs.clone(),
            lcs: agent.lcs.clone(),
            battery_capacity: agent.battery_capacity,
            initial_soc: agent.initial_soc,
            time_weight: agent.time_weight,
            degradation_weight: agent.degradation_weight,
            dod_quadratic: agent.dod_quadratic,
            dod_linear: agent.dod_linear,
            power_degradation,
            degradation_curve,
        }
    }
}

/// Serializes a validated scenario back into document form. The fleet is
/// always written explicitly, so a generated fleet stays pinned.
pub fn scenario_to_document(scenario: &Scenario) -> ScenarioDocument {
    ScenarioDocument {
        weights: WeightsSection {
            loading_weight: scenario.loading_weight(),
        },
        rcs: scenario
            .stations()
            .rcs
            .iter()
            .map(|s| RcsSection {
                id: s.id.clone(),
                surplus_energy: s.surplus_energy,
                charge_power: s.charge_power,
            })
            .collect(),
        lcs: scenario
            .stations()
            .lcs
            .iter()
            .map(|s| LcsSection {
                id: s.id.clone(),
                demand_min: s.demand_min,
                demand_max: s.demand_max,
                discharge_power: s.discharge_power,
            })
            .collect(),
        fleet: scenario.fleet().iter().map(FleetEntry::from_agent).collect(),
        fleet_spec: None,
    }
}

/// Parses a scenario from document text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    ScenarioDocument::from_toml(text)?.into_scenario()
}

/// Loads a scenario from a document file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

/// Serializes a scenario to document text.
pub fn scenario_to_toml(scenario: &Scenario) -> Result<String, ScenarioError> {
    scenario_to_document(scenario).to_toml()
}

/// Writes a scenario to a document file.
pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    Ok(std::fs::write(path, scenario_to_toml(scenario)?)?)
}
