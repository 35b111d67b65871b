//! Screening under single-line outages and the intersection of the
//! resulting certificates.

use serde::{Deserialize, Serialize};

use super::{fit_bound, method_config, training_points, HarnessError, PipelineSettings, Stage};
use crate::demandset::{self, DemandHistory};
use crate::grid::{build_ptdf, Grid, PtdfMatrix};
use crate::screening::{
    intersect, screen_all_with, BoundStatus, Method, MethodConfig, ScreeningBound, ScreeningResult,
};
use crate::solver::SolverOptions;
use crate::uc::Side;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub outage: String,
    /// Over the in-service line sides of the variant.
    pub removable_fraction: f64,
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub base: ScreeningResult,
    pub variants: Vec<VariantSummary>,
    pub intersection: ScreeningResult,
    pub base_removable_fraction: f64,
    pub intersection_removable_fraction: f64,
}

/// Re-express a variant's certificate over the base line set; the outaged
/// line imposes nothing, so both of its sides count as removable.
fn expand(base: &Grid, variant: ScreeningResult, outage: &str) -> ScreeningResult {
    let mut by_line = variant.bounds.into_iter();
    let mut bounds = Vec::with_capacity(2 * base.num_lines());
    for line in base.lines() {
        if line.id == outage {
            for side in Side::BOTH {
                bounds.push(ScreeningBound {
                    line: line.id.clone(),
                    side,
                    capacity: line.capacity,
                    extreme_flow: None,
                    removable: true,
                    status: BoundStatus::OutOfService,
                    message: None,
                });
            }
        } else {
            bounds.extend(by_line.by_ref().take(2));
        }
    }
    ScreeningResult { bounds, ..variant }
}

/// Every variant is screened with the same configuration.
pub fn topology_experiment(
    grid: &Grid,
    outage_line_ids: &[String],
    base_config: &MethodConfig,
    opts: &SolverOptions,
) -> Result<TopologyReport, HarnessError> {
    run(grid, outage_line_ids, opts, |_, _| Ok(base_config.clone()))
}

/// Repeats the training step on every variant: historical costs are
/// re-solved on the variant and the cost bound refitted before screening.
/// Demand sets come from `train` and do not depend on the topology.
pub fn topology_experiment_refit(
    grid: &Grid,
    outage_line_ids: &[String],
    method: Method,
    train: &DemandHistory,
    settings: &PipelineSettings,
) -> Result<TopologyReport, HarnessError> {
    let box_set = demandset::box_from_history(train).map_err(|e| HarnessError::stage(Stage::Fit, e))?;
    let hull = demandset::hull_from_history(train, settings.kappa).map_err(|e| HarnessError::stage(Stage::Fit, e))?;
    run(grid, outage_line_ids, &settings.solver, |g, ptdf| {
        if !method.uses_bound() {
            return method_config(method, &box_set, &hull, None, settings);
        }
        let (points, _) = training_points(g, ptdf, train, &settings.solver)?;
        match fit_bound(&points, settings.cost_bound) {
            Ok((bound, _)) => method_config(method, &box_set, &hull, Some(&bound), settings),
            // Too few feasible training periods on this topology: screen
            // without the budget, which can only retain more.
            Err(_) if points.len() < 2 => {
                let fallback = if method.uses_hull() { Method::Cc } else { Method::Bn };
                method_config(fallback, &box_set, &hull, None, settings)
            }
            Err(e) => Err(e),
        }
    })
}

fn run(
    grid: &Grid,
    outage_line_ids: &[String],
    opts: &SolverOptions,
    config_for: impl Fn(&Grid, &PtdfMatrix) -> Result<MethodConfig, HarnessError>,
) -> Result<TopologyReport, HarnessError> {
    let mut variants = Vec::with_capacity(outage_line_ids.len());
    for id in outage_line_ids {
        let g = grid
            .without_line(id)
            .map_err(|e| HarnessError::stage(Stage::Topology, e))?;
        if !g.is_connected() {
            return Err(HarnessError::IslandingOutage(id.clone()));
        }
        variants.push(g);
    }
    let ptdf = build_ptdf(grid).map_err(|e| HarnessError::stage(Stage::Topology, e))?;
    let cfg = config_for(grid, &ptdf)?;
    let base = screen_all_with(grid, &ptdf, &cfg, opts).map_err(|e| HarnessError::stage(Stage::Screening, e))?;

    let mut results = vec![base.clone()];
    let mut summaries = Vec::with_capacity(variants.len());
    for (g, id) in variants.iter().zip(outage_line_ids) {
        let p = build_ptdf(g).map_err(|e| HarnessError::stage(Stage::Topology, e))?;
        let cfg = config_for(g, &p)?;
        let r = screen_all_with(g, &p, &cfg, opts).map_err(|e| HarnessError::stage(Stage::Screening, e))?;
        summaries.push(VariantSummary {
            outage: id.clone(),
            removable_fraction: r.removable_fraction(),
            retained: r.num_retained(),
        });
        results.push(expand(grid, r, id));
    }
    let intersection = intersect(&results).map_err(|e| HarnessError::stage(Stage::Topology, e))?;
    Ok(TopologyReport {
        base_removable_fraction: base.removable_fraction(),
        intersection_removable_fraction: intersection.removable_fraction(),
        base,
        variants: summaries,
        intersection,
    })
}
