//! The two-step break estimator: group LASSO candidates, then IC pruning.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::design::SuffixCache;
use crate::error::Result;
use crate::glasso::{group_lars_path_cached, FirstStepResult, PathConfig};
use crate::model::{BreakSet, SegmentedFit, SelectionMask, TimeSeriesPanel};
use crate::model::build_scaled_regressors;
use crate::selection::{
    backward_eliminate_masked, exhaustive_select_masked, refined_backward, segment_ssr,
    IcConfig, Selection, SsrEvaluator,
};


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    /// Backward elimination.
    Backward,
    /// Exhaustive search over all candidate subsets.
    Exhaustive,
    /// Exhaustive when the candidate count allows it, backward otherwise.
    Auto,
}

#[derive(Debug, Clone)]
pub struct TwoStepConfig {
    pub max_breaks: usize,
    /// Lower bound on the minimum distance; the effective value is at least
    /// `d + 1`.
    pub min_distance: Option<usize>,
    pub ic: IcConfig,
    pub method: SelectionMethod,
    pub mask: Option<SelectionMask>,
    /// Penalize the baseline group in the first step.
    pub penalize_baseline: bool,
    /// Re-optimize the selected breaks within their exclusion neighborhoods,
    /// with a second backward pass that refines after every removal.
    pub refine: bool,
}

impl TwoStepConfig {
    pub fn new(max_breaks: usize) -> Self {
        Self {
            max_breaks,
            min_distance: None,
            ic: IcConfig::default(),
            method: SelectionMethod::Backward,
            mask: None,
            penalize_baseline: false,
            refine: true,
        }
    }

    pub fn effective_min_distance(&self, panel: &TimeSeriesPanel) -> usize {
        let floor = panel.group_dim() + 1;
        self.min_distance.map_or(floor, |h| h.max(floor))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub first_step: Duration,
    pub second_step: Duration,
    pub refit: Duration,
}

#[derive(Debug, Clone)]
pub struct TwoStepResult {
    pub first_step: FirstStepResult,
    pub selection: Selection,
    /// Per-regime least squares at the selected breaks (normalized regressors).
    pub fit: SegmentedFit,
    pub min_distance: usize,
    pub timings: StageTimings,
}

impl TwoStepResult {
    pub fn breaks(&self) -> &BreakSet {
        &self.selection.breaks
    }
}

/// Runs both steps on `panel`.
pub fn two_step(panel: &TimeSeriesPanel, config: &TwoStepConfig) -> Result<TwoStepResult> {
    let h = config.effective_min_distance(panel);
    let path_config = PathConfig {
        max_breaks: config.max_breaks,
        min_distance: h,
        mask: config.mask.clone(),
        penalize_baseline: config.penalize_baseline,
    };
    let start = Instant::now();
    let cache = SuffixCache::new(panel, true);
    let first_step = group_lars_path_cached(&cache, panel.y(), &path_config)?;
    let first_time = start.elapsed();

    let start = Instant::now();
    let mask = config.mask.as_ref();
    let candidates = &first_step.candidates;
    let exhaustive = match config.method {
        SelectionMethod::Exhaustive => true,
        SelectionMethod::Backward => false,
        SelectionMethod::Auto => candidates.len() <= config.ic.exhaustive_threshold,
    };
    let mut selection = if exhaustive {
        exhaustive_select_masked(panel, candidates, &config.ic, mask)?
    } else {
        backward_eliminate_masked(panel, candidates, &config.ic, mask)?
    };
    if config.refine {
        let z = build_scaled_regressors(panel, true).z;
        let mut eval = SsrEvaluator::new(&z, panel.y(), mask);
        let start = selection.breaks.indices().to_vec();
        let refined = refined_backward(&mut eval, start, selection.omega, h, panel.t_len())?;
        let mut trace = std::mem::take(&mut selection.trace);
        trace.extend(refined.trace.iter().cloned());
        selection = Selection { trace, ..refined };
    }
    let second_time = start.elapsed();

    let start = Instant::now();
    let mut fit = segment_ssr(panel, &selection.breaks, mask)?;
    fit.ic = Some(selection.ic);
    selection.ic = fit.ssr + selection.breaks.len() as f64 * selection.omega;
    let refit_time = start.elapsed();

    Ok(TwoStepResult {
        first_step,
        selection,
        fit,
        min_distance: h,
        timings: StageTimings {
            first_step: first_time,
            second_step: second_time,
            refit: refit_time,
        },
    })
}
