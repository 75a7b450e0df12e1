//! Cutting generators.
//!
//! Every generator works zone by zone and only looks at the cells of that
//! zone, so the candidates of a zone depend on nothing else. Output order is
//! fixed: zones ascending, then the per-kind enumeration order documented on
//! each generator.

use std::collections::HashSet;

use crate::error::{invalid, Error, Result};
use crate::exec::{self, Execution};
use crate::indicators::{per_component_best, pseudo_sign, SignVote};
use crate::zonation::{CutLabel, Cutting, FineParam, Mesh, Side, Zonation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    /// One sign-following cutting per zone.
    Best,
    /// Vertical and horizontal bisection of each zone's bounding box.
    Dichotomy,
    /// Horizontal, vertical, oblique and checkerboard families.
    Elementary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignMode {
    Majority,
    Sum,
    /// Best of the per-component sign cuttings, by global indicator.
    PerComponent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Horizontal,
    Vertical,
    Oblique,
    Checkerboard,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Horizontal, Family::Vertical, Family::Oblique, Family::Checkerboard];
}

macro_rules! named_variants {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl std::str::FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(format!(concat!("unknown ", stringify!($ty), " {:?}, expected one of: ", $($name, " "),+), s)),
                }
            }
        }
    };
}

named_variants!(StrategyKind { "best" => Best, "dichotomy" => Dichotomy, "elementary" => Elementary });
named_variants!(SignMode { "majority" => Majority, "sum" => Sum, "per-component" => PerComponent });
named_variants!(Family {
    "horizontal" => Horizontal,
    "vertical" => Vertical,
    "oblique" => Oblique,
    "checkerboard" => Checkerboard,
});

/// Inclusive rectangle of grid cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellRect {
    pub row_min: usize,
    pub col_min: usize,
    pub row_max: usize,
    pub col_max: usize,
}

impl CellRect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }

    /// Bounding box of `(row, col)` pairs.
    fn bounding<I: IntoIterator<Item = (usize, usize)>>(cells: I) -> Option<Self> {
        cells.into_iter().fold(None, |acc, (r, c)| {
            Some(match acc {
                None => CellRect { row_min: r, col_min: c, row_max: r, col_max: c },
                Some(b) => CellRect {
                    row_min: b.row_min.min(r),
                    col_min: b.col_min.min(c),
                    row_max: b.row_max.max(r),
                    col_max: b.col_max.max(c),
                },
            })
        })
    }
}

/// One elementary family, optionally confined to a region. Cells of the
/// zone outside the region always stay in SUB2, and line positions and
/// centers are taken from the part of the zone inside the region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FamilySpec {
    pub family: Family,
    pub region: Option<CellRect>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub sign_mode: SignMode,
    pub families: Vec<FamilySpec>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::Best,
            sign_mode: SignMode::Majority,
            families: Family::ALL.iter().map(|&family| FamilySpec { family, region: None }).collect(),
        }
    }
}

impl StrategyConfig {
    pub fn best(sign_mode: SignMode) -> Self {
        Self { kind: StrategyKind::Best, sign_mode, ..Self::default() }
    }

    pub fn dichotomy() -> Self {
        Self { kind: StrategyKind::Dichotomy, ..Self::default() }
    }

    pub fn elementary(families: Vec<FamilySpec>) -> Self {
        Self { kind: StrategyKind::Elementary, families, ..Self::default() }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        match self.kind {
            StrategyKind::Best => Ok(()),
            StrategyKind::Dichotomy | StrategyKind::Elementary if mesh.grid_dims().is_none() => {
                Err(Error::UnsupportedStrategy(format!("{:?} needs a grid mesh", self.kind)))
            }
            StrategyKind::Elementary if self.families.is_empty() => {
                Err(invalid("elementary strategy needs at least one family"))
            }
            _ => Ok(()),
        }
    }

    /// Whether candidates depend on the fine gradient.
    pub fn uses_gradient(&self) -> bool {
        self.kind == StrategyKind::Best
    }
}

/// Candidates for every zone, zones ascending.
pub fn cuttings(
    g: &FineParam,
    z: &Zonation,
    mesh: &Mesh,
    cfg: &StrategyConfig,
    exec: Execution,
) -> Result<Vec<Cutting>> {
    cfg.validate(mesh)?;
    let per_zone = exec::map_range(exec, z.n_zones(), |j| zone_cuttings(g, z, mesh, cfg, j));
    let mut out = Vec::new();
    for zone in per_zone {
        out.extend(zone?);
    }
    Ok(out)
}

/// Candidates for a single zone.
pub fn zone_cuttings(
    g: &FineParam,
    z: &Zonation,
    mesh: &Mesh,
    cfg: &StrategyConfig,
    zone: usize,
) -> Result<Vec<Cutting>> {
    let raw = match cfg.kind {
        StrategyKind::Best => best_zone(g, z, cfg.sign_mode, zone).into_iter().collect(),
        StrategyKind::Dichotomy => dichotomy_zone(z, mesh, zone)?,
        StrategyKind::Elementary => elementary_zone(z, mesh, &cfg.families, zone)?,
    };
    Ok(dedup(z, raw))
}

/// Sign-following cuttings, at most one per zone.
pub fn best_cuttings(g: &FineParam, z: &Zonation, cfg: &StrategyConfig) -> Vec<Cutting> {
    (0..z.n_zones()).filter_map(|j| best_zone(g, z, cfg.sign_mode, j)).collect()
}

fn best_zone(g: &FineParam, z: &Zonation, mode: SignMode, zone: usize) -> Option<Cutting> {
    let vote = match mode {
        SignMode::Majority => SignVote::Majority,
        SignMode::Sum => SignVote::Sum,
        SignMode::PerComponent => return per_component_best(g, z, zone),
    };
    Cutting::from_predicate(z, zone, CutLabel::Sign, |c| pseudo_sign(g.row(c), vote) > 0)
}

fn grid_of(mesh: &Mesh) -> Result<usize> {
    mesh.grid_dims().map(|(nx, _)| nx).ok_or_else(|| Error::UnsupportedStrategy("grid mesh required".into()))
}

/// Midline bisections of every zone, vertical then horizontal per zone.
pub fn dichotomy_cuttings(z: &Zonation, mesh: &Mesh) -> Result<Vec<Cutting>> {
    let mut out = Vec::new();
    for j in 0..z.n_zones() {
        out.extend(dichotomy_zone(z, mesh, j)?);
    }
    Ok(out)
}

fn dichotomy_zone(z: &Zonation, mesh: &Mesh, zone: usize) -> Result<Vec<Cutting>> {
    let nx = grid_of(mesh)?;
    let rc = |c: usize| (c / nx, c % nx);
    let Some(b) = CellRect::bounding(z.cells(zone).iter().map(|&c| rc(c))) else {
        return Ok(Vec::new());
    };
    // ceil((min + max + 1) / 2): the left/top part gets the extra line
    let mid_col = (b.col_min + b.col_max + 2) / 2;
    let mid_row = (b.row_min + b.row_max + 2) / 2;
    let vertical = Cutting::from_predicate(z, zone, CutLabel::DichotomyVertical, |c| rc(c).1 < mid_col);
    let horizontal = Cutting::from_predicate(z, zone, CutLabel::DichotomyHorizontal, |c| rc(c).0 < mid_row);
    Ok(vertical.into_iter().chain(horizontal).collect())
}

/// Elementary family cuttings for every zone.
pub fn elementary_cuttings(z: &Zonation, mesh: &Mesh, cfg: &StrategyConfig) -> Result<Vec<Cutting>> {
    let mut out = Vec::new();
    for j in 0..z.n_zones() {
        out.extend(dedup(z, elementary_zone(z, mesh, &cfg.families, j)?));
    }
    Ok(out)
}

fn elementary_zone(z: &Zonation, mesh: &Mesh, families: &[FamilySpec], zone: usize) -> Result<Vec<Cutting>> {
    let nx = grid_of(mesh)?;
    let rc = |c: usize| (c / nx, c % nx);
    let mut specs = families.to_vec();
    specs.sort_by_key(|s| s.family);

    let mut out = Vec::new();
    for spec in specs {
        let inside = |c: usize| {
            let (r, col) = rc(c);
            spec.region.is_none_or(|reg| reg.contains(r, col))
        };
        let Some(b) = CellRect::bounding(z.cells(zone).iter().filter(|&&c| inside(c)).map(|&c| rc(c))) else {
            continue;
        };
        let mut push = |label: CutLabel, pred: &dyn Fn(usize, usize) -> bool| {
            let cut = Cutting::from_predicate(z, zone, label, |c| {
                let (r, col) = rc(c);
                inside(c) && pred(r, col)
            });
            out.extend(cut);
        };
        match spec.family {
            Family::Horizontal => {
                for line in b.row_min + 1..=b.row_max {
                    push(CutLabel::Horizontal(line), &|r, _| r < line);
                }
            }
            Family::Vertical => {
                for line in b.col_min + 1..=b.col_max {
                    push(CutLabel::Vertical(line), &|_, c| c < line);
                }
            }
            Family::Oblique => {
                // twice the offsets from the box center, to stay in integers
                let cx2 = (b.col_min + b.col_max) as i64;
                let cy2 = (b.row_min + b.row_max) as i64;
                push(CutLabel::ObliquePlus, &|r, c| (2 * c as i64 - cx2) + (2 * r as i64 - cy2) > 0);
                push(CutLabel::ObliqueMinus, &|r, c| (2 * c as i64 - cx2) - (2 * r as i64 - cy2) > 0);
            }
            Family::Checkerboard => {
                push(CutLabel::Checkerboard, &|r, c| (r + c) % 2 == 0);
            }
        }
    }
    Ok(out)
}

/// Drops cuttings that repeat an earlier bipartition of the same zone (sides
/// swapped or not). First occurrence wins.
fn dedup(z: &Zonation, cuts: Vec<Cutting>) -> Vec<Cutting> {
    if cuts.len() < 2 {
        return cuts;
    }
    let mut seen = HashSet::new();
    cuts.into_iter()
        .filter(|cut| {
            let cells = z.cells(cut.zone());
            let sub1 = cut.cells(Side::Sub1);
            let mut key = vec![0u64; cells.len().div_ceil(64)];
            let mut s = 0;
            for (pos, &c) in cells.iter().enumerate() {
                if s < sub1.len() && sub1[s] == c {
                    key[pos / 64] |= 1 << (pos % 64);
                    s += 1;
                }
            }
            if key[0] & 1 == 0 {
                for (w, word) in key.iter_mut().enumerate() {
                    let bits = (cells.len() - 64 * w).min(64);
                    let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
                    *word = !*word & mask;
                }
            }
            seen.insert(key)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_single(nx: usize, ny: usize) -> (Zonation, Mesh) {
        (Zonation::single(nx * ny), Mesh::grid(nx, ny).unwrap())
    }

    #[test]
    fn best_examples() {
        let z = Zonation::single(4);
        let g = FineParam::new(1, vec![5.0, 5.0, -5.0, -5.0]).unwrap();
        let cuts = best_cuttings(&g, &z, &StrategyConfig::best(SignMode::Majority));
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].cells(Side::Sub1), &[0, 1]);

        let pos = FineParam::new(1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(best_cuttings(&pos, &z, &StrategyConfig::best(SignMode::Majority)).is_empty());

        let z2 = Zonation::single(2);
        let g = FineParam::from_rows(&[[-127.5, 0.0, 127.5], [127.5, 0.0, -127.5]]).unwrap();
        assert!(best_cuttings(&g, &z2, &StrategyConfig::best(SignMode::Majority)).is_empty());
        assert!(best_cuttings(&g, &z2, &StrategyConfig::best(SignMode::Sum)).is_empty());
        let per = best_cuttings(&g, &z2, &StrategyConfig::best(SignMode::PerComponent));
        assert_eq!(per.len(), 1);
        assert!(per[0].same_split(&Cutting::new(&z2, 0, &[0], CutLabel::Custom).unwrap()));
    }

    #[test]
    fn dichotomy_examples() {
        let (z, mesh) = grid_single(4, 4);
        let cuts = dichotomy_cuttings(&z, &mesh).unwrap();
        assert_eq!(cuts.len(), 2);
        let cols: Vec<usize> = cuts[0].cells(Side::Sub1).iter().map(|c| c % 4).collect();
        assert!(cols.iter().all(|&c| c < 2) && cuts[0].cells(Side::Sub1).len() == 8);
        let rows: Vec<usize> = cuts[1].cells(Side::Sub1).iter().map(|c| c / 4).collect();
        assert!(rows.iter().all(|&r| r < 2) && rows.len() == 8);

        let (z, mesh) = grid_single(5, 1);
        let cuts = dichotomy_cuttings(&z, &mesh).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].cells(Side::Sub1), &[0, 1, 2]);
        assert_eq!(cuts[0].cells(Side::Sub2), &[3, 4]);

        let (z, mesh) = grid_single(1, 1);
        assert!(dichotomy_cuttings(&z, &mesh).unwrap().is_empty());

        let flat = Mesh::uniform(4).unwrap();
        assert!(matches!(dichotomy_cuttings(&Zonation::single(4), &flat), Err(Error::UnsupportedStrategy(_))));
    }

    #[test]
    fn elementary_examples() {
        let all =
            StrategyConfig::elementary(Family::ALL.iter().map(|&family| FamilySpec { family, region: None }).collect());
        let (z, mesh) = grid_single(4, 4);
        let cuts = elementary_cuttings(&z, &mesh, &all).unwrap();
        assert_eq!(cuts.len(), 9);
        let labels: Vec<CutLabel> = cuts.iter().map(Cutting::label).collect();
        assert_eq!(
            labels,
            vec![
                CutLabel::Horizontal(1),
                CutLabel::Horizontal(2),
                CutLabel::Horizontal(3),
                CutLabel::Vertical(1),
                CutLabel::Vertical(2),
                CutLabel::Vertical(3),
                CutLabel::ObliquePlus,
                CutLabel::ObliqueMinus,
                CutLabel::Checkerboard,
            ]
        );

        // one row of four cells
        let (z, mesh) = grid_single(4, 1);
        let cuts = elementary_cuttings(&z, &mesh, &all).unwrap();
        let n_vertical = cuts.iter().filter(|c| matches!(c.label(), CutLabel::Vertical(_))).count();
        let n_horizontal = cuts.iter().filter(|c| matches!(c.label(), CutLabel::Horizontal(_))).count();
        assert_eq!((n_vertical, n_horizontal), (3, 0));
        let checker = cuts.iter().find(|c| c.label() == CutLabel::Checkerboard).unwrap();
        assert_eq!(checker.cells(Side::Sub1), &[0, 2]);

        let (z, mesh) = grid_single(2, 2);
        let cfg = StrategyConfig::elementary(vec![FamilySpec { family: Family::Checkerboard, region: None }]);
        let cuts = elementary_cuttings(&z, &mesh, &cfg).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].cells(Side::Sub1), &[0, 3]);
        assert_eq!(cuts[0].cells(Side::Sub2), &[1, 2]);
    }

    #[test]
    fn region_filter_confines_family() {
        let (z, mesh) = grid_single(4, 4);
        let region = CellRect { row_min: 0, col_min: 0, row_max: 1, col_max: 3 };
        let cfg = StrategyConfig::elementary(vec![FamilySpec { family: Family::Horizontal, region: Some(region) }]);
        let cuts = elementary_cuttings(&z, &mesh, &cfg).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].cells(Side::Sub1), &[0, 1, 2, 3]);

        let outside = CellRect { row_min: 9, col_min: 9, row_max: 9, col_max: 9 };
        let cfg = StrategyConfig::elementary(vec![FamilySpec { family: Family::Vertical, region: Some(outside) }]);
        assert!(elementary_cuttings(&z, &mesh, &cfg).unwrap().is_empty());
    }

    #[test]
    fn elementary_needs_a_family_and_a_grid() {
        let (z, mesh) = grid_single(2, 2);
        let g = FineParam::zeros(4, 1);
        let empty = StrategyConfig::elementary(vec![]);
        assert!(cuttings(&g, &z, &mesh, &empty, Execution::Sequential).is_err());
        let flat = Mesh::uniform(4).unwrap();
        let cfg = StrategyConfig::elementary(vec![FamilySpec { family: Family::Vertical, region: None }]);
        assert!(matches!(cuttings(&g, &z, &flat, &cfg, Execution::Sequential), Err(Error::UnsupportedStrategy(_))));
    }

    #[test]
    fn duplicate_bipartitions_are_dropped() {
        // on a single row the oblique cut repeats a vertical line cut
        let (z, mesh) = grid_single(4, 1);
        let cfg = StrategyConfig::elementary(vec![
            FamilySpec { family: Family::Vertical, region: None },
            FamilySpec { family: Family::Oblique, region: None },
        ]);
        let cuts = elementary_cuttings(&z, &mesh, &cfg).unwrap();
        assert_eq!(cuts.len(), 3);
        for (i, a) in cuts.iter().enumerate() {
            for b in &cuts[i + 1..] {
                assert!(!a.same_split(b));
            }
        }
    }

    #[test]
    fn emitted_cuttings_are_valid_and_deterministic() {
        let mesh = Mesh::grid(7, 5).unwrap();
        let zone_of: Vec<usize> = (0..35).map(|c| usize::from(c % 7 > 2) + 2 * usize::from(c / 7 > 3)).collect();
        let z = Zonation::from_assignment(zone_of).unwrap();
        let g = FineParam::new(1, (0..35).map(|i| ((i * 37) % 11) as f64 - 5.0).collect()).unwrap();
        for cfg in [
            StrategyConfig::best(SignMode::Majority),
            StrategyConfig::dichotomy(),
            StrategyConfig::elementary(Family::ALL.iter().map(|&family| FamilySpec { family, region: None }).collect()),
        ] {
            let a = cuttings(&g, &z, &mesh, &cfg, Execution::Sequential).unwrap();
            let b = cuttings(&g, &z, &mesh, &cfg, Execution::Parallel).unwrap();
            assert_eq!(a, b);
            assert!(a.windows(2).all(|w| w[0].zone() <= w[1].zone()));
            for cut in &a {
                cut.validate(&z).unwrap();
            }
        }
    }
}
