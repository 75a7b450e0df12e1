//! Options of the `segment` command and their config-file form.
//!
//! The file is flat `key = value` text. `#` starts a comment, keys accept
//! `-` or `_`, and `cutting.family` may repeat, each occurrence naming a
//! family with an optional `row_min col_min row_max col_max` region:
//!
//! ```text
//! strategy = elementary
//! max-zones = 12
//! cutting.family = horizontal
//! cutting.family = checkerboard 0 0 15 15
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use crate::driver::RunConfig;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::models::Model;
use crate::strategies::{CellRect, Family, FamilySpec, SignMode, StrategyConfig, StrategyKind};

/// Every field is optional so a file and the command line can be layered.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentOptions {
    pub input: Option<PathBuf>,
    pub strategy: Option<StrategyKind>,
    pub sign_mode: Option<SignMode>,
    pub select_top: Option<usize>,
    pub max_zones: Option<usize>,
    pub j_tol: Option<f64>,
    pub ind_tol: Option<f64>,
    pub coarsen_tol: Option<f64>,
    pub execution: Option<Execution>,
    pub out_seg: Option<PathBuf>,
    pub out_zones: Option<PathBuf>,
    pub out_sign: Option<PathBuf>,
    pub out_zonefile: Option<PathBuf>,
    pub out_report: Option<PathBuf>,
    pub out_every: Option<usize>,
    pub families: Vec<FamilySpec>,
}

pub const DEFAULT_MAX_ZONES: usize = 10;

impl SegmentOptions {
    pub fn parse(text: &str) -> Result<Self> {
        let mut opts = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line, message };
            let (key, value) =
                content.split_once('=').ok_or_else(|| err(format!("expected key = value, found {content:?}")))?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            if value.is_empty() {
                return Err(err(format!("empty value for {key}")));
            }
            match key.as_str() {
                "input" => opts.input = Some(value.into()),
                "strategy" => opts.strategy = Some(value.parse().map_err(err)?),
                "sign-mode" => opts.sign_mode = Some(value.parse().map_err(err)?),
                "select-top" => opts.select_top = Some(number(value).map_err(err)?),
                "max-zones" => opts.max_zones = Some(number(value).map_err(err)?),
                "j-tol" => opts.j_tol = Some(number(value).map_err(err)?),
                "ind-tol" => opts.ind_tol = Some(number(value).map_err(err)?),
                "coarsen-tol" => opts.coarsen_tol = Some(number(value).map_err(err)?),
                "execution" => opts.execution = Some(value.parse().map_err(err)?),
                "out-seg" => opts.out_seg = Some(value.into()),
                "out-zones" => opts.out_zones = Some(value.into()),
                "out-sign" => opts.out_sign = Some(value.into()),
                "out-zonefile" => opts.out_zonefile = Some(value.into()),
                "out-report" => opts.out_report = Some(value.into()),
                "out-every" => opts.out_every = Some(number(value).map_err(err)?),
                "cutting.family" => opts.families.push(family_spec(value).map_err(err)?),
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        Ok(opts)
    }

    /// `self` with every field set in `over` replaced. Families are replaced
    /// as a whole when `over` names any.
    pub fn overridden_by(self, over: SegmentOptions) -> Self {
        Self {
            input: over.input.or(self.input),
            strategy: over.strategy.or(self.strategy),
            sign_mode: over.sign_mode.or(self.sign_mode),
            select_top: over.select_top.or(self.select_top),
            max_zones: over.max_zones.or(self.max_zones),
            j_tol: over.j_tol.or(self.j_tol),
            ind_tol: over.ind_tol.or(self.ind_tol),
            coarsen_tol: over.coarsen_tol.or(self.coarsen_tol),
            execution: over.execution.or(self.execution),
            out_seg: over.out_seg.or(self.out_seg),
            out_zones: over.out_zones.or(self.out_zones),
            out_sign: over.out_sign.or(self.out_sign),
            out_zonefile: over.out_zonefile.or(self.out_zonefile),
            out_report: over.out_report.or(self.out_report),
            out_every: over.out_every.or(self.out_every),
            families: if over.families.is_empty() { self.families } else { over.families },
        }
    }

    pub fn run_config(&self, model: &dyn Model) -> RunConfig {
        let defaults = RunConfig::for_model(model);
        let mut strategy = StrategyConfig {
            kind: self.strategy.unwrap_or(StrategyKind::Best),
            sign_mode: self.sign_mode.unwrap_or(SignMode::Majority),
            ..StrategyConfig::default()
        };
        if !self.families.is_empty() {
            strategy.families = self.families.clone();
        }
        RunConfig {
            strategy,
            select_top: self.select_top.unwrap_or(defaults.select_top),
            max_zones: self.max_zones.unwrap_or(DEFAULT_MAX_ZONES),
            j_tol_rel: self.j_tol.unwrap_or(defaults.j_tol_rel),
            ind_tol_rel: self.ind_tol.unwrap_or(defaults.ind_tol_rel),
            coarsen_tol: self.coarsen_tol,
            execution: self.execution.unwrap_or_default(),
            ..defaults
        }
    }
}

fn number<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid number {value:?}"))
}

/// `name [row_min col_min row_max col_max]`.
pub fn family_spec(value: &str) -> std::result::Result<FamilySpec, String> {
    let mut parts = value.split_whitespace();
    let family: Family = parts.next().unwrap_or("").parse()?;
    let bounds = parts.map(number).collect::<std::result::Result<Vec<usize>, _>>()?;
    let region = match bounds[..] {
        [] => None,
        [row_min, col_min, row_max, col_max] if row_min <= row_max && col_min <= col_max => {
            Some(CellRect { row_min, col_min, row_max, col_max })
        }
        _ => return Err(format!("region must be row_min col_min row_max col_max, found {value:?}")),
    };
    Ok(FamilySpec { family, region })
}
