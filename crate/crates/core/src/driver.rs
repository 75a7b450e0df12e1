//! The refinement loop.
//!
//! Each iteration takes the fine gradient at the current optimum, asks the
//! strategy for cuttings, ranks them by refinement indicator, trial-optimizes
//! the `select_top` best, and commits the one with the lowest objective.
//! Indicator evaluation and trial optimizations are parallel maps; all
//! reductions walk candidates in their enumeration order, so the history does
//! not depend on the execution mode.

use std::collections::HashSet;
use std::time::Instant;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exec::{self, Execution};
use crate::indicators::{indicator, IndicatorReport};
use crate::models::Model;
use crate::strategies::{self, StrategyConfig};
use crate::zonation::{
    apply_param, coarsen, init_after_refine, refine, CoarseParam, Cutting, FineParam, Mesh, Zonation,
};

/// Symmetry tolerance for `‖Σ_SUB1 g + Σ_SUB2 g‖ / (1 + ‖g‖₁)`.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub strategy: StrategyConfig,
    /// Number of top-indicator cuttings that get a trial optimization.
    pub select_top: usize,
    pub max_zones: usize,
    /// Stop once `J ≤ j_tol_rel · J_init`.
    pub j_tol_rel: f64,
    /// Stop once the largest indicator is `≤ ind_tol_rel ·` the first one.
    pub ind_tol_rel: f64,
    /// Merge zones whose values are this close after every commit.
    pub coarsen_tol: Option<f64>,
    pub execution: Execution,
    /// Reuse indicators of untouched zones when the model is diagonal.
    pub cache_indicators: bool,
    /// Fail the run when an indicator symmetry residual exceeds
    /// [`SYMMETRY_TOL`].
    pub check_symmetry: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyConfig::default(),
            select_top: 5,
            max_zones: 10,
            j_tol_rel: 0.0,
            ind_tol_rel: 0.0,
            coarsen_tol: None,
            execution: Execution::default(),
            cache_indicators: true,
            check_symmetry: cfg!(debug_assertions),
        }
    }
}

impl RunConfig {
    /// Defaults for `model`: a single trial per iteration for diagonal
    /// models, where the indicator already predicts the decrease well.
    pub fn for_model(model: &dyn Model) -> Self {
        Self { select_top: if model.is_diagonal() { 1 } else { 5 }, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ObjectiveFit,
    IndicatorFloor,
    MaxZones,
    NoCutting,
    /// The best trial did not decrease the objective.
    Stalled,
    /// Coarsening led back to a zonation visited earlier.
    Cycled,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::ObjectiveFit => "objective-fit",
            StopReason::IndicatorFloor => "indicator-floor",
            StopReason::MaxZones => "max-zones",
            StopReason::NoCutting => "no-cutting",
            StopReason::Stalled => "stalled",
            StopReason::Cycled => "cycled",
        }
    }
}

/// The cutting committed to reach a record's zonation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutSummary {
    pub zone: usize,
    pub strategy_tag: String,
    pub indicator: f64,
    pub predicted_decrease: Option<f64>,
}

/// State of the run after `iteration` commits.
///
/// `tind`, `topt` and `ttot` are cumulative seconds since the start of the
/// run: indicator phases, optimizations, and wall time including observer
/// callbacks (rendering).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub zones: usize,
    pub j_opt: f64,
    /// Largest indicator among this state's candidates, 0 when there are none.
    pub i_max: f64,
    pub percent_explained: f64,
    pub cutting: Option<CutSummary>,
    pub candidates: usize,
    /// Largest `‖Σ_SUB1 g + Σ_SUB2 g‖ / (1 + ‖g‖₁)` over the candidates.
    pub symmetry_residual: f64,
    /// `‖P_nᵀ g‖` at this optimum.
    pub coarse_gradient_norm: f64,
    /// `‖g‖₁` at this optimum.
    pub gradient_l1: f64,
    pub tind: f64,
    pub topt: f64,
    pub ttot: f64,
}

impl IterationRecord {
    /// Copy with the timing counters zeroed, for run comparisons.
    pub fn without_timings(&self) -> Self {
        Self { tind: 0.0, topt: 0.0, ttot: 0.0, ..self.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    /// Objective at the initial coarse parameter, before any optimization.
    pub j_init: f64,
    pub zonation: Zonation,
    pub coarse: CoarseParam,
    pub fine: FineParam,
    pub gradient: FineParam,
}

impl RunHistory {
    /// Equal outcome, ignoring timings.
    pub fn same_outcome(&self, other: &RunHistory) -> bool {
        self.stop_reason == other.stop_reason
            && self.j_init.to_bits() == other.j_init.to_bits()
            && self.zonation == other.zonation
            && self.coarse == other.coarse
            && self.gradient == other.gradient
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.without_timings() == b.without_timings())
    }
}

/// View of the current optimum handed to observers.
pub struct RunState<'a> {
    pub zonation: &'a Zonation,
    pub coarse: &'a CoarseParam,
    pub fine: &'a FineParam,
    pub gradient: &'a FineParam,
    pub reports: &'a [IndicatorReport],
}

/// `100 (1 − √(J_n / J_init))`; 100 when `J_init` is zero.
pub fn percent_explained(j_n: f64, j_init: f64) -> f64 {
    if j_init == 0.0 {
        return 100.0;
    }
    100.0 * (1.0 - (j_n / j_init).sqrt())
}

/// First satisfied stopping criterion for the last record, checked in the
/// order objective fit, indicator floor, zone budget, no candidates.
pub fn check_convergence(records: &[IterationRecord], j_init: f64, cfg: &RunConfig) -> Option<StopReason> {
    let last = records.last()?;
    let first = &records[0];
    if last.j_opt <= cfg.j_tol_rel * j_init {
        Some(StopReason::ObjectiveFit)
    } else if last.candidates > 0 && last.i_max <= cfg.ind_tol_rel * first.i_max {
        Some(StopReason::IndicatorFloor)
    } else if last.zones >= cfg.max_zones {
        Some(StopReason::MaxZones)
    } else if last.candidates == 0 {
        Some(StopReason::NoCutting)
    } else {
        None
    }
}

pub fn run(model: &dyn Model, mesh: &Mesh, z0: &Zonation, m0: &CoarseParam, cfg: &RunConfig) -> Result<RunHistory> {
    run_observed(model, mesh, z0, m0, cfg, &mut |_, _| Ok(()))
}

/// [`run`] with a callback after every record (e.g. to render images).
/// Callback time is included in `ttot`.
pub fn run_observed(
    model: &dyn Model,
    mesh: &Mesh,
    z0: &Zonation,
    m0: &CoarseParam,
    cfg: &RunConfig,
    observer: &mut dyn FnMut(&IterationRecord, &RunState<'_>) -> Result<()>,
) -> Result<RunHistory> {
    let start = Instant::now();
    if mesh.n_cells() != model.n_cells() || z0.n_cells() != model.n_cells() {
        return Err(invalid("mesh, zonation and model sizes differ"));
    }
    if m0.n_zones() != z0.n_zones() || m0.n_p() != model.n_p() {
        return Err(invalid("initial coarse parameter does not match the zonation"));
    }
    if cfg.max_zones < z0.n_zones() {
        return Err(invalid("max_zones is below the initial zone count"));
    }
    if cfg.select_top == 0 {
        return Err(invalid("select_top must be positive"));
    }
    if !(cfg.j_tol_rel >= 0.0 && cfg.ind_tol_rel >= 0.0 && cfg.coarsen_tol.is_none_or(|t| t >= 0.0)) {
        return Err(invalid("tolerances must be nonnegative"));
    }
    cfg.strategy.validate(mesh)?;

    let j_init = model.cost(&apply_param(z0, m0)?)?;
    let t = Instant::now();
    let (mut m, mut j) = model.optim(z0, m0)?;
    let mut topt = t.elapsed().as_secs_f64();
    let mut tind = 0.0;
    let mut z = z0.clone();

    let caching = cfg.cache_indicators && model.is_diagonal();
    let mut cache: Vec<Option<Vec<IndicatorReport>>> = vec![None; z.n_zones()];
    let mut committed: Option<CutSummary> = None;
    let mut records = Vec::new();
    let mut visited = HashSet::from([canonical(&z)]);
    let mut revisited = false;

    loop {
        let t = Instant::now();
        let fine = apply_param(&z, &m)?;
        let g = model.grad(&fine)?;
        if !caching {
            cache.iter_mut().for_each(|c| *c = None);
        }
        let reports = evaluate(model, &g, &z, mesh, cfg, &mut cache)?;
        tind += t.elapsed().as_secs_f64();

        let g_l1 = g.norm_l1();
        let i_max = reports.iter().map(|r| r.indicator).fold(0.0, f64::max);
        let symmetry = reports.iter().map(|r| r.symmetry_residual).fold(0.0, f64::max) / (1.0 + g_l1);
        let mut record = IterationRecord {
            iteration: records.len(),
            zones: z.n_zones(),
            j_opt: j,
            i_max,
            percent_explained: percent_explained(j, j_init),
            cutting: committed.take(),
            candidates: reports.len(),
            symmetry_residual: symmetry,
            coarse_gradient_norm: coarse_gradient_norm(&g, &z),
            gradient_l1: g_l1,
            tind,
            topt,
            ttot: 0.0,
        };
        let state = RunState { zonation: &z, coarse: &m, fine: &fine, gradient: &g, reports: &reports };
        observer(&record, &state)?;
        record.ttot = start.elapsed().as_secs_f64();
        records.push(record);

        if cfg.check_symmetry && symmetry > SYMMETRY_TOL {
            return Err(Error::SymmetryViolation { residual: symmetry, bound: SYMMETRY_TOL });
        }

        let stop = check_convergence(&records, j_init, cfg).or(revisited.then_some(StopReason::Cycled));
        let stop = match stop {
            Some(reason) => Some(reason),
            None => {
                let t = Instant::now();
                let outcome = step(model, &z, &m, j, &reports, cfg)?;
                topt += t.elapsed().as_secs_f64();
                match outcome {
                    None => Some(StopReason::Stalled),
                    Some((report, z_next, m_next, j_next)) => {
                        let split = report.cutting.zone();
                        committed = Some(CutSummary {
                            zone: split,
                            strategy_tag: report.cutting.label().tag(),
                            indicator: report.indicator,
                            predicted_decrease: report.predicted_decrease,
                        });
                        z = z_next;
                        m = m_next;
                        j = j_next;
                        cache[split] = None;
                        cache.push(None);

                        if let Some(tol) = cfg.coarsen_tol {
                            let (zc, mc) = coarsen(&z, &m, mesh, tol)?;
                            if zc.n_zones() < z.n_zones() {
                                let t = Instant::now();
                                let (mo, jo) = model.optim(&zc, &mc)?;
                                topt += t.elapsed().as_secs_f64();
                                cache = vec![None; zc.n_zones()];
                                z = zc;
                                m = mo;
                                j = jo;
                            }
                            revisited = !visited.insert(canonical(&z));
                        }
                        None
                    }
                }
            }
        };

        if let Some(stop_reason) = stop {
            return Ok(RunHistory { records, stop_reason, j_init, zonation: z, coarse: m, fine, gradient: g });
        }
    }
}

/// Indicators for every candidate, zones ascending. Zones with a cached
/// entry are not regenerated.
fn evaluate(
    model: &dyn Model,
    g: &FineParam,
    z: &Zonation,
    mesh: &Mesh,
    cfg: &RunConfig,
    cache: &mut [Option<Vec<IndicatorReport>>],
) -> Result<Vec<IndicatorReport>> {
    let dirty: Vec<usize> = (0..z.n_zones()).filter(|&j| cache[j].is_none()).collect();
    let generated = exec::map(cfg.execution, &dirty, |&j| strategies::zone_cuttings(g, z, mesh, &cfg.strategy, j));
    let mut cuts: Vec<Cutting> = Vec::new();
    let mut bounds = Vec::with_capacity(dirty.len());
    for zone in generated {
        let zone = zone?;
        bounds.push((cuts.len(), cuts.len() + zone.len()));
        cuts.extend(zone);
    }

    let scored = exec::map(cfg.execution, &cuts, |cut| {
        indicator(g, cut).map(|mut rep| {
            rep.predicted_decrease = model.predicted_decrease(cut, &rep.lambda);
            rep
        })
    });
    let scored: Vec<IndicatorReport> = scored.into_iter().collect::<Result<_>>()?;
    for (&j, &(lo, hi)) in dirty.iter().zip(&bounds) {
        cache[j] = Some(scored[lo..hi].to_vec());
    }
    Ok(cache.iter().flat_map(|c| c.as_deref().unwrap_or_default().iter().cloned()).collect())
}

/// Steps 5 to 7: selection, trial optimizations, choice of the best trial.
/// `None` when no trial improves on `j_current`.
fn step(
    model: &dyn Model,
    z: &Zonation,
    m: &CoarseParam,
    j_current: f64,
    reports: &[IndicatorReport],
    cfg: &RunConfig,
) -> Result<Option<(IndicatorReport, Zonation, CoarseParam, f64)>> {
    // stable sort keeps enumeration order among equal indicators
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&a, &b| reports[b].indicator.total_cmp(&reports[a].indicator));
    order.truncate(cfg.select_top);

    let trials = exec::map(cfg.execution, &order, |&k| -> Result<_> {
        let cut = &reports[k].cutting;
        let refined = refine(z, cut)?;
        let init = init_after_refine(m, cut)?;
        let (m_opt, j_opt) = model.optim(&refined, &init)?;
        Ok((refined, m_opt, j_opt))
    });

    let mut best: Option<(usize, Zonation, CoarseParam, f64)> = None;
    for (&k, trial) in order.iter().zip(trials) {
        let (refined, m_opt, j_opt) = trial?;
        if best.as_ref().is_none_or(|b| j_opt < b.3) {
            best = Some((k, refined, m_opt, j_opt));
        }
    }
    Ok(best.filter(|b| b.3 <= j_current).map(|(k, refined, m_opt, j_opt)| (reports[k].clone(), refined, m_opt, j_opt)))
}

/// Zone labels renumbered by first appearance, so relabelings compare equal.
fn canonical(z: &Zonation) -> Vec<usize> {
    let mut label = vec![usize::MAX; z.n_zones()];
    let mut next = 0;
    z.assignment()
        .iter()
        .map(|&j| {
            if label[j] == usize::MAX {
                label[j] = next;
                next += 1;
            }
            label[j]
        })
        .collect()
}

fn coarse_gradient_norm(g: &FineParam, z: &Zonation) -> f64 {
    let mut sq = 0.0;
    let mut acc = vec![0.0; g.n_p()];
    for j in 0..z.n_zones() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for &c in z.cells(j) {
            for (a, v) in acc.iter_mut().zip(g.row(c)) {
                *a += v;
            }
        }
        sq += acc.iter().map(|a| a * a).sum::<f64>();
    }
    sq.sqrt()
}
