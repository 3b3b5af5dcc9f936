//! Leader side of the game: the operator's utility, its constraints, and
//! the closed-form equilibrium search.
//!
//! With every fleet member playing its best response, each aggregate
//! station load is piecewise linear and nondecreasing in the posted price.
//! Sorting all rejection and saturation prices therefore cuts the price
//! axis into intervals on which the active sets are fixed, the operator
//! utility is a concave quadratic, and the demand/surplus constraints are
//! half-spaces. Each interval is maximized exactly at its (clamped) vertex
//! and the global optimum is the best feasible interval candidate; ties go
//! to the lowest price.

use std::fmt;

use thiserror::Error;

use crate::follower::{best_response, mes_utility, participates, BestResponseProfile};
use crate::model::Scenario;

/// Absolute slack, in kWh, allowed when testing the station constraints.
/// Closed-form arithmetic leaves only rounding error, so this is tight.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-6;

/// Cap on rejection sampling attempts used by the random pricing scheme.
pub const RANDOM_ATTEMPT_CAP: u32 = 10_000;

/// A solve that cannot produce a feasible price.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no feasible price exists: {0}")]
    Infeasible(InfeasibilityReport),
    #[error("random price search found no feasible draw in {attempts} attempts")]
    RandomSearchExhausted { attempts: u32 },
}

/// Names the constraints that rule out every price.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityReport {
    pub violations: Vec<ConstraintViolation>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintViolation {
    /// The minimal demand of an LCS exceeds what the fleet can deliver at
    /// any price.
    LcsDemandUnreachable {
        lcs: String,
        demand_min: f64,
        max_load: f64,
    },
    /// An LCS receives more than its maximal demand even at the lowest
    /// price.
    LcsOverloaded {
        lcs: String,
        demand_max: f64,
        min_load: f64,
    },
    /// An RCS is drawn beyond its surplus even at the lowest price.
    RcsOverdrawn {
        rcs: String,
        surplus: f64,
        min_draw: f64,
    },
    /// Every constraint can hold on its own but no single price satisfies
    /// all of them: one bound needs at least `needs_at_least` while another
    /// allows at most `allows_at_most`.
    BoundConflict {
        lower_constraint: String,
        upper_constraint: String,
        needs_at_least: f64,
        allows_at_most: f64,
    },
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintViolation::LcsDemandUnreachable {
                lcs,
                demand_min,
                max_load,
            } => write!(
                f,
                "LCS '{lcs}' minimal demand {demand_min} kWh is unreachable (max deliverable load {max_load} kWh)"
            ),
            ConstraintViolation::LcsOverloaded {
                lcs,
                demand_max,
                min_load,
            } => write!(
                f,
                "LCS '{lcs}' maximal demand {demand_max} kWh is exceeded at every price (min load {min_load} kWh)"
            ),
            ConstraintViolation::RcsOverdrawn { rcs, surplus, min_draw } => write!(
                f,
                "RCS '{rcs}' surplus {surplus} kWh is exceeded at every price (min draw {min_draw} kWh)"
            ),
            ConstraintViolation::BoundConflict {
                lower_constraint,
                upper_constraint,
                needs_at_least,
                allows_at_most,
            } => write!(
                f,
                "{lower_constraint} requires price >= {needs_at_least} but {upper_constraint} requires price <= {allows_at_most}"
            ),
        }
    }
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.violations {
            if !first {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

/// Sorted rejection/saturation prices of the fleet and the price intervals
/// between consecutive distinct values.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBreakpoints {
    gamma: Vec<f64>,
    distinct: Vec<f64>,
}

/// One segment of the price axis on which the active sets are fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceInterval {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl PriceInterval {
    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

impl PriceBreakpoints {
    /// All threshold prices, clamped at zero and sorted ascending
    /// (duplicates kept; two entries per fleet member).
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Deduplicated threshold prices.
    pub fn distinct(&self) -> &[f64] {
        &self.distinct
    }

    /// Upper end of the price domain; above it every unit is saturated.
    pub fn max_price(&self) -> f64 {
        *self.distinct.last().expect("nonempty fleet")
    }

    /// Lower end of the sampling range used by the random scheme.
    pub fn min_price(&self) -> f64 {
        self.gamma[0]
    }

    /// The scan intervals, in ascending price order. A leading segment from
    /// zero is included when the smallest threshold is positive, so the
    /// all-inactive region (and the zero-price candidate) is covered. If
    /// all thresholds collapse onto zero the single candidate point [0, 0]
    /// is returned.
    pub fn intervals(&self) -> Vec<PriceInterval> {
        let mut out = Vec::with_capacity(self.distinct.len() + 1);
        if self.distinct[0] > 0.0 {
            out.push((0.0, self.distinct[0]));
        }
        for w in self.distinct.windows(2) {
            out.push((w[0], w[1]));
        }
        if out.is_empty() {
            let v = self.distinct[0];
            out.push((v, v));
        }
        out.into_iter()
            .enumerate()
            .map(|(index, (lo, hi))| PriceInterval { index, lo, hi })
            .collect()
    }
}

/// Aggregate load as a function of price on one interval:
/// `load(p) = slope * p + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearLoad {
    pub slope: f64,
    pub offset: f64,
}

impl LinearLoad {
    pub fn at(&self, price: f64) -> f64 {
        self.slope * price + self.offset
    }
}

/// Operator utility on one interval: `curvature*p^2 + slope*p + constant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub curvature: f64,
    pub slope: f64,
    pub constant: f64,
}

impl Quadratic {
    pub fn eval(&self, price: f64) -> f64 {
        (self.curvature * price + self.slope) * price + self.constant
    }
}

/// The operator's subproblem restricted to one price interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalProgram {
    pub interval: PriceInterval,
    /// Fleet indices on the interior (linear-ramp) branch.
    pub interior: Vec<usize>,
    /// Fleet indices serving their full spare capacity.
    pub saturated: Vec<usize>,
    /// Expanded operator utility on the interval.
    pub quadratic: Quadratic,
    /// Aggregate delivered load per LCS, linear in price.
    pub lcs_loads: Vec<LinearLoad>,
    /// Aggregate drawn energy per RCS, linear in price.
    pub rcs_draws: Vec<LinearLoad>,
    /// Price range inside the interval on which every station constraint
    /// holds, or `None` when the intersection is empty.
    pub feasible: Option<(f64, f64)>,
}

/// Feasible maximizer of one interval program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalOptimum {
    pub interval: usize,
    pub price: f64,
    pub utility: f64,
}

/// The computed equilibrium: the optimal posted price and everything that
/// follows from the fleet playing its best responses at that price.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub price: f64,
    /// Service amount per fleet member, kWh.
    pub services: Vec<f64>,
    pub pso_utility: f64,
    pub mes_utilities: Vec<f64>,
    /// Whether each member earns strictly positive utility (diagnostic).
    pub participation: Vec<bool>,
    /// Delivered load per LCS, kWh.
    pub lcs_loads: Vec<f64>,
    /// Drawn energy per RCS, kWh.
    pub rcs_draws: Vec<f64>,
    /// Index of the price interval the optimum was found in.
    pub interval: usize,
}

/// Operator utility for an explicit service vector: weighted loading
/// revenue minus all service and motivation payments.
pub fn pso_utility(scenario: &Scenario, price: f64, services: &[f64]) -> f64 {
    assert_eq!(services.len(), scenario.fleet().len());
    let target = scenario.mean_service_target();
    let lcs_count = scenario.stations().lcs.len();
    let mut loads = vec![0.0; lcs_count];
    let mut payments = 0.0;
    for (k, &e) in services.iter().enumerate() {
        let (_, j) = scenario.route(k);
        loads[j] += e;
        payments += price * e + price * (e - target);
    }
    let revenue: f64 = scenario
        .stations()
        .lcs
        .iter()
        .zip(&loads)
        .map(|(lcs, &load)| lcs.loading().revenue(load))
        .sum();
    scenario.loading_weight() * revenue - payments
}

/// Sorts all rejection and saturation prices (clamped at zero) into the
/// breakpoint vector that cuts the price axis.
pub fn build_breakpoints(scenario: &Scenario, profiles: &[BestResponseProfile]) -> PriceBreakpoints {
    assert!(!scenario.fleet().is_empty());
    assert_eq!(profiles.len(), scenario.fleet().len());
    let mut gamma = Vec::with_capacity(2 * profiles.len());
    for p in profiles {
        gamma.push(p.rejection_price.max(0.0));
        gamma.push(p.saturation_price.max(0.0));
    }
    gamma.sort_by(f64::total_cmp);
    let mut distinct = gamma.clone();
    distinct.dedup();
    PriceBreakpoints { gamma, distinct }
}

/// Builds the subproblem for one interval: classifies every fleet member
/// at the interval midpoint, expands the utility into a quadratic in `p`,
/// and intersects the interval with the station constraints. Each
/// aggregate load is nondecreasing in price, so every constraint
/// contributes at most one lower and one upper price bound.
pub fn build_interval_program(
    scenario: &Scenario,
    profiles: &[BestResponseProfile],
    interval: PriceInterval,
) -> IntervalProgram {
    let mid = 0.5 * (interval.lo + interval.hi);
    let lcs_count = scenario.stations().lcs.len();
    let rcs_count = scenario.stations().rcs.len();

    let mut interior = Vec::new();
    let mut saturated = Vec::new();
    let mut lcs_loads = vec![LinearLoad { slope: 0.0, offset: 0.0 }; lcs_count];
    let mut rcs_draws = vec![LinearLoad { slope: 0.0, offset: 0.0 }; rcs_count];
    let mut total = LinearLoad { slope: 0.0, offset: 0.0 };

    for (k, profile) in profiles.iter().enumerate() {
        let (i, j) = scenario.route(k);
        let (slope, offset) = if mid <= profile.rejection_price {
            continue; // inactive on this interval
        } else if mid >= profile.saturation_price {
            saturated.push(k);
            (0.0, profile.capacity)
        } else {
            interior.push(k);
            (profile.slope, -profile.offset)
        };
        lcs_loads[j].slope += slope;
        lcs_loads[j].offset += offset;
        rcs_draws[i].slope += slope;
        rcs_draws[i].offset += offset;
        total.slope += slope;
        total.offset += offset;
    }

    // Expand weighted loading revenue minus payments into A p^2 + B p + C.
    let alpha = scenario.loading_weight();
    let fleet_size = scenario.fleet().len() as f64;
    let target = scenario.mean_service_target();
    let mut curvature = -2.0 * total.slope;
    let mut slope = -2.0 * total.offset + fleet_size * target;
    let mut constant = 0.0;
    for (lcs, load) in scenario.stations().lcs.iter().zip(&lcs_loads) {
        let lr = lcs.loading();
        let g = lr.scale * load.slope;
        let h = lr.scale * load.offset - lr.offset;
        curvature += alpha * (-g * g);
        slope += alpha * (-2.0 * g * h);
        constant += alpha * (lr.peak - h * h);
    }
    let quadratic = Quadratic { curvature, slope, constant };

    // Intersect the interval with every station constraint.
    let tol = CONSTRAINT_TOLERANCE;
    let mut lo = interval.lo;
    let mut hi = interval.hi;
    let mut feasible = true;
    for (lcs, load) in scenario.stations().lcs.iter().zip(&lcs_loads) {
        if load.slope > 0.0 {
            lo = lo.max((lcs.demand_min - tol - load.offset) / load.slope);
            hi = hi.min((lcs.demand_max + tol - load.offset) / load.slope);
        } else {
            feasible &= load.offset >= lcs.demand_min - tol && load.offset <= lcs.demand_max + tol;
        }
    }
    for (rcs, draw) in scenario.stations().rcs.iter().zip(&rcs_draws) {
        if draw.slope > 0.0 {
            hi = hi.min((rcs.surplus_energy + tol - draw.offset) / draw.slope);
        } else {
            feasible &= draw.offset <= rcs.surplus_energy + tol;
        }
    }

    IntervalProgram {
        interval,
        interior,
        saturated,
        quadratic,
        lcs_loads,
        rcs_draws,
        feasible: (feasible && lo <= hi).then_some((lo, hi)),
    }
}

/// Maximizes one interval program in closed form: the clamped vertex when
/// the quadratic is strictly concave, otherwise the better endpoint of the
/// feasible sub-interval. Ties go to the lower price.
pub fn solve_interval(program: &IntervalProgram) -> Option<IntervalOptimum> {
    let (lo, hi) = program.feasible?;
    let q = &program.quadratic;
    let mut candidates = [lo, hi, lo];
    if q.curvature < 0.0 {
        candidates[2] = (-q.slope / (2.0 * q.curvature)).clamp(lo, hi);
    }
    let mut best_price = lo;
    let mut best_utility = q.eval(lo);
    for &p in &candidates[1..] {
        let u = q.eval(p);
        if u > best_utility || (u == best_utility && p < best_price) {
            best_price = p;
            best_utility = u;
        }
    }
    Some(IntervalOptimum {
        interval: program.interval.index,
        price: best_price,
        utility: best_utility,
    })
}

/// Fleet best responses and the resulting station aggregates at a price.
pub(crate) fn materialize(
    scenario: &Scenario,
    profiles: &[BestResponseProfile],
    price: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut services = Vec::with_capacity(profiles.len());
    let mut lcs_loads = vec![0.0; scenario.stations().lcs.len()];
    let mut rcs_draws = vec![0.0; scenario.stations().rcs.len()];
    for (k, profile) in profiles.iter().enumerate() {
        let e = best_response(profile, price);
        let (i, j) = scenario.route(k);
        lcs_loads[j] += e;
        rcs_draws[i] += e;
        services.push(e);
    }
    (services, lcs_loads, rcs_draws)
}

/// Checks the station constraints for explicit aggregates.
pub(crate) fn loads_within_bounds(
    scenario: &Scenario,
    lcs_loads: &[f64],
    rcs_draws: &[f64],
    tol: f64,
) -> bool {
    scenario
        .stations()
        .lcs
        .iter()
        .zip(lcs_loads)
        .all(|(lcs, &load)| load >= lcs.demand_min - tol && load <= lcs.demand_max + tol)
        && scenario
            .stations()
            .rcs
            .iter()
            .zip(rcs_draws)
            .all(|(rcs, &draw)| draw <= rcs.surplus_energy + tol)
}

pub(crate) fn assemble_result(
    scenario: &Scenario,
    profiles: &[BestResponseProfile],
    price: f64,
    interval: usize,
) -> EquilibriumResult {
    let (services, lcs_loads, rcs_draws) = materialize(scenario, profiles, price);
    let target = scenario.mean_service_target();
    let mut mes_utilities = Vec::with_capacity(services.len());
    let mut participation = Vec::with_capacity(services.len());
    for (k, agent) in scenario.fleet().iter().enumerate() {
        let (charge, discharge) = scenario.route_powers(k);
        mes_utilities.push(mes_utility(agent, services[k], price, target, charge, discharge));
        participation.push(participates(agent, &profiles[k], price, target, charge, discharge));
    }
    let utility = pso_utility(scenario, price, &services);
    EquilibriumResult {
        price,
        services,
        pso_utility: utility,
        mes_utilities,
        participation,
        lcs_loads,
        rcs_draws,
        interval,
    }
}

/// Runs the full equilibrium search: breakpoints, one closed-form solve
/// per interval, and the best feasible candidate (ties resolved towards
/// the lower price). Returns a named diagnosis when no interval admits a
/// feasible price.
pub fn solve_equilibrium(scenario: &Scenario) -> Result<EquilibriumResult, SolveError> {
    let profiles = crate::follower::fleet_profiles(scenario);
    let breakpoints = build_breakpoints(scenario, &profiles);
    let programs: Vec<IntervalProgram> = breakpoints
        .intervals()
        .into_iter()
        .map(|interval| build_interval_program(scenario, &profiles, interval))
        .collect();

    let mut best: Option<IntervalOptimum> = None;
    for program in &programs {
        if let Some(opt) = solve_interval(program) {
            let better = match &best {
                None => true,
                Some(b) => opt.utility > b.utility || (opt.utility == b.utility && opt.price < b.price),
            };
            if better {
                best = Some(opt);
            }
        }
    }

    match best {
        Some(opt) => Ok(assemble_result(scenario, &profiles, opt.price, opt.interval)),
        None => Err(SolveError::Infeasible(diagnose(scenario, &programs))),
    }
}

/// Explains why no price is feasible. Constraints that fail on the whole
/// price domain are named individually; otherwise the tightest pair of
/// conflicting bounds is reported. Relies on every aggregate load being
/// nondecreasing in price.
fn diagnose(scenario: &Scenario, programs: &[IntervalProgram]) -> InfeasibilityReport {
    let first = programs.first().expect("at least one interval");
    let last = programs.last().expect("at least one interval");
    let tol = CONSTRAINT_TOLERANCE;
    let p_lo = first.interval.lo;
    let p_hi = last.interval.hi;

    let mut violations = Vec::new();
    for (j, lcs) in scenario.stations().lcs.iter().enumerate() {
        let max_load = last.lcs_loads[j].at(p_hi);
        if max_load < lcs.demand_min - tol {
            violations.push(ConstraintViolation::LcsDemandUnreachable {
                lcs: lcs.id.clone(),
                demand_min: lcs.demand_min,
                max_load,
            });
        }
        let min_load = first.lcs_loads[j].at(p_lo);
        if min_load > lcs.demand_max + tol {
            violations.push(ConstraintViolation::LcsOverloaded {
                lcs: lcs.id.clone(),
                demand_max: lcs.demand_max,
                min_load,
            });
        }
    }
    for (i, rcs) in scenario.stations().rcs.iter().enumerate() {
        let min_draw = first.rcs_draws[i].at(p_lo);
        if min_draw > rcs.surplus_energy + tol {
            violations.push(ConstraintViolation::RcsOverdrawn {
                rcs: rcs.id.clone(),
                surplus: rcs.surplus_energy,
                min_draw,
            });
        }
    }
    if !violations.is_empty() {
        return InfeasibilityReport { violations };
    }

    // Each bound holds somewhere; find the price from which each lower
    // bound holds and until which each upper bound holds, then report the
    // tightest conflicting pair.
    let mut needs_at_least = p_lo;
    let mut lower_constraint = String::from("the price floor");
    for (j, lcs) in scenario.stations().lcs.iter().enumerate() {
        if let Some(p) = first_price_reaching(programs, |prog| prog.lcs_loads[j], lcs.demand_min - tol) {
            if p > needs_at_least {
                needs_at_least = p;
                lower_constraint = format!("LCS '{}' minimal demand", lcs.id);
            }
        }
    }
    let mut allows_at_most = p_hi;
    let mut upper_constraint = String::from("the price ceiling");
    for (j, lcs) in scenario.stations().lcs.iter().enumerate() {
        if let Some(p) = last_price_within(programs, |prog| prog.lcs_loads[j], lcs.demand_max + tol) {
            if p < allows_at_most {
                allows_at_most = p;
                upper_constraint = format!("LCS '{}' maximal demand", lcs.id);
            }
        }
    }
    for (i, rcs) in scenario.stations().rcs.iter().enumerate() {
        if let Some(p) = last_price_within(programs, |prog| prog.rcs_draws[i], rcs.surplus_energy + tol) {
            if p < allows_at_most {
                allows_at_most = p;
                upper_constraint = format!("RCS '{}' surplus", rcs.id);
            }
        }
    }
    violations.push(ConstraintViolation::BoundConflict {
        lower_constraint,
        upper_constraint,
        needs_at_least,
        allows_at_most,
    });
    InfeasibilityReport { violations }
}

/// Smallest price at which a nondecreasing piecewise-linear load reaches
/// `bound`, or `None` if it never does.
fn first_price_reaching(
    programs: &[IntervalProgram],
    load: impl Fn(&IntervalProgram) -> LinearLoad,
    bound: f64,
) -> Option<f64> {
    for prog in programs {
        let l = load(prog);
        if l.at(prog.interval.lo) >= bound {
            return Some(prog.interval.lo);
        }
        if l.at(prog.interval.hi) >= bound {
            if l.slope > 0.0 {
                return Some((bound - l.offset) / l.slope);
            }
            return Some(prog.interval.hi);
        }
    }
    None
}

/// Largest price up to which a nondecreasing piecewise-linear load stays
/// at or below `bound`, or `None` if it exceeds the bound from the start.
fn last_price_within(
    programs: &[IntervalProgram],
    load: impl Fn(&IntervalProgram) -> LinearLoad,
    bound: f64,
) -> Option<f64> {
    let first = programs.first()?;
    if load(first).at(first.interval.lo) > bound {
        return None;
    }
    for prog in programs {
        let l = load(prog);
        if l.at(prog.interval.hi) > bound {
            if l.slope > 0.0 {
                return Some(((bound - l.offset) / l.slope).max(prog.interval.lo));
            }
            return Some(prog.interval.lo);
        }
    }
    Some(programs.last().expect("nonempty").interval.hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::follower::fleet_profiles;
    use crate::testutil::{single_mes_scenario, table1_agent, table1_scenario};

    #[test]
    fn pso_utility_zero_services_zero_price() {
        let scenario = table1_scenario(7);
        let services = vec![0.0; scenario.fleet().len()];
        assert_eq!(pso_utility(&scenario, 0.0, &services), 0.0);
    }

    #[test]
    fn pso_utility_peaks_at_max_demand_loads() {
        // Two stations, one agent each; services hit demand_max exactly.
        let scenario = crate::testutil::two_pair_scenario();
        let mut services = vec![0.0; scenario.fleet().len()];
        for (k, _) in scenario.fleet().iter().enumerate() {
            let (_, j) = scenario.route(k);
            services[k] = scenario.stations().lcs[j].demand_max;
        }
        let expected: f64 = scenario
            .stations()
            .lcs
            .iter()
            .map(|l| l.loading().peak)
            .sum::<f64>()
            * scenario.loading_weight();
        let got = pso_utility(&scenario, 0.0, &services);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn pso_utility_matches_term_by_term_recomputation() {
        let scenario = table1_scenario(7);
        let profiles = fleet_profiles(&scenario);
        let (services, lcs_loads, _) = materialize(&scenario, &profiles, 0.4);
        // Independent evaluation: loading revenue and the two payment sums
        // computed separately.
        let revenue: f64 = scenario
            .stations()
            .lcs
            .iter()
            .zip(&lcs_loads)
            .map(|(lcs, &load)| {
                let a = 5.0e-4 * lcs.demand_max;
                let b = a * lcs.demand_max;
                -(a * load - b) * (a * load - b) + b * b
            })
            .sum();
        let service_pay: f64 = services.iter().map(|e| 0.4 * e).sum();
        let motivation_pay: f64 = services
            .iter()
            .map(|e| 0.4 * (e - scenario.mean_service_target()))
            .sum();
        let expected = scenario.loading_weight() * revenue - service_pay - motivation_pay;
        let got = pso_utility(&scenario, 0.4, &services);
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn breakpoints_for_identical_agents_collapse() {
        let scenario = crate::testutil::uniform_fleet_scenario(4);
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        assert_eq!(bp.gamma().len(), 8);
        assert_eq!(bp.distinct().len(), 2);
        let intervals = bp.intervals();
        // Leading segment from zero plus the single ramp interval.
        assert_eq!(intervals.len(), 2);
        assert!(intervals.iter().all(|iv| !iv.is_point()));
    }

    #[test]
    fn breakpoints_single_follower() {
        let scenario = single_mes_scenario(0.0, 1000.0);
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        assert_eq!(bp.gamma().len(), 2);
        assert_eq!(bp.gamma()[0], profiles[0].rejection_price);
        assert_eq!(bp.gamma()[1], profiles[0].saturation_price);
    }

    #[test]
    fn breakpoints_table1_counts_and_minimum() {
        let scenario = table1_scenario(7);
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        assert_eq!(bp.gamma().len(), 50);
        // Independent threshold recomputation for every agent.
        let min_rejection = scenario
            .fleet()
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let (pi, pj) = scenario.route_powers(k);
                let d = scenario.power_degradation(k);
                0.5 * (a.time_weight * (pi + pj) / (pi * pj)
                    + a.degradation_weight * a.dod_linear * d / a.battery_capacity)
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(bp.gamma()[0], min_rejection.max(0.0));
    }

    #[test]
    fn leading_interval_has_no_active_agents() {
        let scenario = table1_scenario(7);
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        let program = build_interval_program(&scenario, &profiles, bp.intervals()[0]);
        assert!(program.interior.is_empty());
        assert!(program.saturated.is_empty());
        assert!(program.lcs_loads.iter().all(|l| l.slope == 0.0 && l.offset == 0.0));
        // Nonzero minimal demands make the all-inactive region infeasible.
        assert!(program.feasible.is_none());
    }

    #[test]
    fn interval_above_all_saturation_prices_is_all_saturated() {
        let scenario = table1_scenario(7);
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        let max = bp.max_price();
        let program = build_interval_program(
            &scenario,
            &profiles,
            PriceInterval { index: 99, lo: max, hi: max + 1.0 },
        );
        assert_eq!(program.saturated.len(), scenario.fleet().len());
        assert!(program.interior.is_empty());
        assert_eq!(program.quadratic.curvature, 0.0);
    }

    #[test]
    fn interior_intervals_are_strictly_concave() {
        let scenario = table1_scenario(7);
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        for interval in bp.intervals() {
            let program = build_interval_program(&scenario, &profiles, interval);
            assert!(program.quadratic.curvature <= 0.0);
            if !program.interior.is_empty() {
                assert!(program.quadratic.curvature < 0.0);
            }
        }
    }

    #[test]
    fn solve_interval_picks_clamped_vertex() {
        let base = IntervalProgram {
            interval: PriceInterval { index: 0, lo: 0.0, hi: 1.0 },
            interior: vec![],
            saturated: vec![],
            quadratic: Quadratic { curvature: -1.0, slope: 1.0, constant: 0.0 },
            lcs_loads: vec![],
            rcs_draws: vec![],
            feasible: Some((0.0, 1.0)),
        };
        // Vertex at 0.5 sits inside the feasible range.
        let opt = solve_interval(&base).unwrap();
        assert_eq!(opt.price, 0.5);
        // Vertex left of the range clamps to the lower endpoint.
        let mut left = base.clone();
        left.quadratic = Quadratic { curvature: -1.0, slope: -1.0, constant: 0.0 };
        assert_eq!(solve_interval(&left).unwrap().price, 0.0);
        // Infeasible program yields no candidate.
        let mut infeasible = base;
        infeasible.feasible = None;
        assert!(solve_interval(&infeasible).is_none());
    }

    #[test]
    fn solve_equilibrium_unconstrained_single_mes_matches_grid() {
        // No minimal demand and huge surplus: the optimum is the
        // unconstrained maximizer over the whole price range.
        let scenario = single_mes_scenario(0.0, 1000.0);
        let result = solve_equilibrium(&scenario).unwrap();
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        let mut best = (0.0, f64::NEG_INFINITY);
        let steps = 200_000;
        for s in 0..=steps {
            let p = bp.max_price() * s as f64 / steps as f64;
            let (services, _, _) = materialize(&scenario, &profiles, p);
            let u = pso_utility(&scenario, p, &services);
            if u > best.1 {
                best = (p, u);
            }
        }
        assert!(
            (result.price - best.0).abs() <= 2.0 * bp.max_price() / steps as f64,
            "{} vs {}",
            result.price,
            best.0
        );
        assert!(result.pso_utility >= best.1 - 1e-9);
    }

    #[test]
    fn solve_equilibrium_reports_unreachable_demand() {
        // One 14-kWh unit cannot meet a 100-kWh minimal demand.
        let scenario = single_mes_scenario(100.0, 1000.0);
        let err = solve_equilibrium(&scenario).unwrap_err();
        match err {
            SolveError::Infeasible(report) => {
                assert!(matches!(
                    report.violations[0],
                    ConstraintViolation::LcsDemandUnreachable { .. }
                ));
                assert!(report.to_string().contains("minimal demand"));
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn table1_equilibrium_is_feasible_and_self_consistent() {
        let scenario = table1_scenario(7);
        let result = solve_equilibrium(&scenario).unwrap();
        assert!(loads_within_bounds(
            &scenario,
            &result.lcs_loads,
            &result.rcs_draws,
            2.0 * CONSTRAINT_TOLERANCE
        ));
        // Services are exactly the best responses at the optimum price.
        let profiles = fleet_profiles(&scenario);
        for (k, profile) in profiles.iter().enumerate() {
            assert_eq!(result.services[k], best_response(profile, result.price));
        }
    }

    #[test]
    fn expanded_quadratic_matches_direct_utility_inside_each_interval() {
        let scenario = table1_scenario(7);
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        for interval in bp.intervals() {
            let program = build_interval_program(&scenario, &profiles, interval);
            for t in [0.1, 0.35, 0.5, 0.71, 0.93] {
                let p = interval.lo + t * (interval.hi - interval.lo);
                let (services, _, _) = materialize(&scenario, &profiles, p);
                let direct = pso_utility(&scenario, p, &services);
                let expanded = program.quadratic.eval(p);
                let scale = direct.abs().max(1.0);
                assert!(
                    (direct - expanded).abs() <= 1e-9 * scale,
                    "interval {} at p={p}: {direct} vs {expanded}",
                    interval.index
                );
            }
        }
    }

    #[test]
    fn aggregate_loads_are_nondecreasing_in_price() {
        let scenario = table1_scenario(7);
        let profiles = fleet_profiles(&scenario);
        let bp = build_breakpoints(&scenario, &profiles);
        let steps = 500;
        let mut prev_lcs = vec![f64::NEG_INFINITY; scenario.stations().lcs.len()];
        let mut prev_rcs = vec![f64::NEG_INFINITY; scenario.stations().rcs.len()];
        for s in 0..=steps {
            let p = bp.max_price() * s as f64 / steps as f64;
            let (_, lcs_loads, rcs_draws) = materialize(&scenario, &profiles, p);
            for (j, &load) in lcs_loads.iter().enumerate() {
                assert!(load >= prev_lcs[j] - 1e-12);
                prev_lcs[j] = load;
            }
            for (i, &draw) in rcs_draws.iter().enumerate() {
                assert!(draw >= prev_rcs[i] - 1e-12);
                prev_rcs[i] = draw;
            }
        }
    }

    #[test]
    fn no_unilateral_follower_deviation_improves_utility() {
        use rand::Rng;
        use rand::SeedableRng;
        let scenario = table1_scenario(7);
        let result = solve_equilibrium(&scenario).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for (k, agent) in scenario.fleet().iter().enumerate() {
            let (charge, discharge) = scenario.route_powers(k);
            let cap = agent.spare_capacity();
            let base = result.mes_utilities[k];
            for _ in 0..100 {
                let e: f64 = rng.random_range(0.0..=cap);
                let u = mes_utility(
                    agent,
                    e,
                    result.price,
                    scenario.mean_service_target(),
                    charge,
                    discharge,
                );
                assert!(u <= base + 1e-9, "agent {k} improves from {base} to {u} at e={e}");
            }
        }
    }

    #[test]
    fn tie_break_prefers_lower_price() {
        // Zero loading weight and zero mean target make the utility
        // -2p*e(p): exactly 0 on the whole inactive region and at the
        // rejection price, negative beyond. The solver must keep the
        // lowest price of the tie, which is 0.
        use crate::model::{Lcs, Rcs, Scenario, StationGroup};
        let stations = StationGroup {
            rcs: vec![Rcs::new("R1", 1000.0, 90.0).unwrap()],
            lcs: vec![Lcs::new("L1", 0.0, 200.0, 60.0).unwrap()],
        };
        let scenario = Scenario::new(stations, vec![table1_agent()], 0.0).unwrap();
        let result = solve_equilibrium(&scenario).unwrap();
        assert_eq!(result.price, 0.0);
        assert_eq!(result.pso_utility, 0.0);
    }
}
