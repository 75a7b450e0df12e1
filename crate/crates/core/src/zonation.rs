//! Meshes, zonations and the piecewise-constant parameterization map.
//!
//! Parameters are stored flat, cell-major and component-minor: value `k` of
//! cell `i` lives at `i * n_p + k`. This is the only flattening used in the
//! crate (linear models, wire protocol and files all follow it).

use crate::error::{invalid, Error, Result};

/// Discretization of the domain: one positive measure per cell, plus an
/// optional row-major grid layout for images.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    measures: Vec<f64>,
    grid: Option<(usize, usize)>,
}

impl Mesh {
    pub fn new(measures: Vec<f64>) -> Result<Self> {
        if measures.is_empty() {
            return Err(invalid("mesh must have at least one cell"));
        }
        if let Some(i) = measures.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(invalid(format!("cell {i} has non-positive measure {}", measures[i])));
        }
        Ok(Self { measures, grid: None })
    }

    /// Unstructured mesh of `n_cells` unit cells.
    pub fn uniform(n_cells: usize) -> Result<Self> {
        Self::new(vec![1.0; n_cells])
    }

    /// `nx` columns by `ny` rows of unit pixels.
    pub fn grid(nx: usize, ny: usize) -> Result<Self> {
        Self::grid_with_measures(nx, ny, vec![1.0; nx * ny])
    }

    pub fn grid_with_measures(nx: usize, ny: usize, measures: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("grid dimensions must be positive"));
        }
        if nx * ny != measures.len() {
            return Err(invalid(format!("grid {nx}x{ny} does not match {} measures", measures.len())));
        }
        let mut mesh = Self::new(measures)?;
        mesh.grid = Some((nx, ny));
        Ok(mesh)
    }

    pub fn n_cells(&self) -> usize {
        self.measures.len()
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn measure(&self, cell: usize) -> f64 {
        self.measures[cell]
    }

    /// `(nx, ny)` = (columns, rows) when the mesh is a grid.
    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// `(row, col)` of a cell on a grid mesh.
    pub fn row_col(&self, cell: usize) -> Option<(usize, usize)> {
        self.grid.map(|(nx, _)| (cell / nx, cell % nx))
    }

    pub fn has_unit_measures(&self) -> bool {
        self.measures.iter().all(|&w| w == 1.0)
    }
}

macro_rules! param_rows {
    ($name:ident, $rows:literal) => {
        impl $name {
            pub fn new(n_p: usize, values: Vec<f64>) -> Result<Self> {
                if n_p == 0 {
                    return Err(invalid("parameter dimension must be positive"));
                }
                if values.len() % n_p != 0 {
                    return Err(invalid(format!("{} values do not split into rows of {n_p}", values.len())));
                }
                Ok(Self { n_p, values })
            }

            pub fn zeros(rows: usize, n_p: usize) -> Self {
                assert!(n_p > 0, "parameter dimension must be positive");
                Self { n_p, values: vec![0.0; rows * n_p] }
            }

            pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
                let n_p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
                if rows.iter().any(|r| r.as_ref().len() != n_p) {
                    return Err(invalid("rows have different lengths"));
                }
                let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
                Self::new(n_p, values)
            }

            #[doc = concat!("Number of ", $rows, ".")]
            pub fn n_rows(&self) -> usize {
                self.values.len() / self.n_p
            }

            pub fn n_p(&self) -> usize {
                self.n_p
            }

            pub fn row(&self, i: usize) -> &[f64] {
                &self.values[i * self.n_p..(i + 1) * self.n_p]
            }

            pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
                let n_p = self.n_p;
                &mut self.values[i * n_p..(i + 1) * n_p]
            }

            pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
                self.values.chunks_exact(self.n_p)
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.values
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.values
            }
        }
    };
}

/// Per-cell parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct FineParam {
    n_p: usize,
    values: Vec<f64>,
}
param_rows!(FineParam, "cells");

impl FineParam {
    pub fn n_cells(&self) -> usize {
        self.n_rows()
    }

    /// Euclidean norm over all entries.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sum of absolute values of all entries.
    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

/// Per-zone parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseParam {
    n_p: usize,
    values: Vec<f64>,
}
param_rows!(CoarseParam, "zones");

impl CoarseParam {
    pub fn n_zones(&self) -> usize {
        self.n_rows()
    }
}

/// Partition of the cells into nonempty zones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Zonation {
    zone_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Zonation {
    pub fn new(zone_of: Vec<usize>, n_zones: usize) -> Result<Self> {
        if zone_of.is_empty() {
            return Err(invalid("zonation must cover at least one cell"));
        }
        let mut members = vec![Vec::new(); n_zones];
        for (cell, &j) in zone_of.iter().enumerate() {
            if j >= n_zones {
                return Err(invalid(format!("cell {cell} has zone {j} >= {n_zones}")));
            }
            members[j].push(cell);
        }
        if let Some(j) = members.iter().position(Vec::is_empty) {
            return Err(invalid(format!("zone {j} is empty")));
        }
        Ok(Self { zone_of, members })
    }

    /// Infers `n_zones` as one past the largest index.
    pub fn from_assignment(zone_of: Vec<usize>) -> Result<Self> {
        let n = zone_of.iter().max().map_or(0, |&m| m + 1);
        Self::new(zone_of, n)
    }

    /// Single zone covering every cell.
    pub fn single(n_cells: usize) -> Self {
        assert!(n_cells > 0, "zonation must cover at least one cell");
        Self { zone_of: vec![0; n_cells], members: vec![(0..n_cells).collect()] }
    }

    pub fn n_zones(&self) -> usize {
        self.members.len()
    }

    pub fn n_cells(&self) -> usize {
        self.zone_of.len()
    }

    pub fn zone_of(&self, cell: usize) -> usize {
        self.zone_of[cell]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.zone_of
    }

    /// Cells of zone `j`, ascending.
    pub fn cells(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    pub fn zone_measure(&self, j: usize, mesh: &Mesh) -> f64 {
        self.members[j].iter().map(|&i| mesh.measure(i)).sum()
    }

    /// True when both zonations group the cells identically, whatever the
    /// zone numbering.
    pub fn same_partition(&self, other: &Zonation) -> bool {
        if self.n_cells() != other.n_cells() || self.n_zones() != other.n_zones() {
            return false;
        }
        let mut map = vec![usize::MAX; self.n_zones()];
        for (&a, &b) in self.zone_of.iter().zip(&other.zone_of) {
            if map[a] == usize::MAX {
                map[a] = b;
            } else if map[a] != b {
                return false;
            }
        }
        let mut seen = vec![false; other.n_zones()];
        map.iter().all(|&b| !std::mem::replace(&mut seen[b], true))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Sub1,
    Sub2,
}

/// Where a cutting came from; used for reports and tie-breaking diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CutLabel {
    /// Follows the pseudo-sign of the fine gradient.
    Sign,
    /// Follows the sign of one gradient component.
    Component(usize),
    DichotomyVertical,
    DichotomyHorizontal,
    /// Cells strictly above the given row line.
    Horizontal(usize),
    /// Cells strictly left of the given column line.
    Vertical(usize),
    ObliquePlus,
    ObliqueMinus,
    Checkerboard,
    Custom,
}

impl CutLabel {
    pub fn tag(&self) -> String {
        match self {
            CutLabel::Sign => "best:sign".into(),
            CutLabel::Component(k) => format!("best:component{k}"),
            CutLabel::DichotomyVertical => "dichotomy:vertical".into(),
            CutLabel::DichotomyHorizontal => "dichotomy:horizontal".into(),
            CutLabel::Horizontal(r) => format!("elementary:horizontal@{r}"),
            CutLabel::Vertical(c) => format!("elementary:vertical@{c}"),
            CutLabel::ObliquePlus => "elementary:oblique+".into(),
            CutLabel::ObliqueMinus => "elementary:oblique-".into(),
            CutLabel::Checkerboard => "elementary:checkerboard".into(),
            CutLabel::Custom => "custom".into(),
        }
    }
}

/// Split of one zone into two nonempty subzones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cutting {
    zone: usize,
    sub1: Vec<usize>,
    sub2: Vec<usize>,
    label: CutLabel,
}

impl Cutting {
    /// Builds a cutting from the cells that go to SUB1; the rest of the zone
    /// goes to SUB2.
    pub fn new(z: &Zonation, zone: usize, sub1: &[usize], label: CutLabel) -> Result<Self> {
        if zone >= z.n_zones() {
            return Err(Error::InvalidCutting(format!("zone {zone} out of range")));
        }
        let mut in_sub1 = vec![false; z.n_cells()];
        for &c in sub1 {
            if c >= z.n_cells() || z.zone_of(c) != zone {
                return Err(Error::InvalidCutting(format!("cell {c} is not in zone {zone}")));
            }
            in_sub1[c] = true;
        }
        Self::from_predicate(z, zone, label, |c| in_sub1[c])
            .ok_or_else(|| Error::InvalidCutting(format!("cutting of zone {zone} leaves an empty subzone")))
    }

    /// SUB1 = cells of `zone` for which `in_sub1` holds. `None` when either
    /// side would be empty.
    pub fn from_predicate(
        z: &Zonation,
        zone: usize,
        label: CutLabel,
        mut in_sub1: impl FnMut(usize) -> bool,
    ) -> Option<Self> {
        let (sub1, sub2): (Vec<usize>, Vec<usize>) = z.cells(zone).iter().partition(|&&c| in_sub1(c));
        if sub1.is_empty() || sub2.is_empty() {
            return None;
        }
        Some(Self { zone, sub1, sub2, label })
    }

    pub fn zone(&self) -> usize {
        self.zone
    }

    pub fn label(&self) -> CutLabel {
        self.label
    }

    pub fn cells(&self, side: Side) -> &[usize] {
        match side {
            Side::Sub1 => &self.sub1,
            Side::Sub2 => &self.sub2,
        }
    }

    pub fn swapped(&self) -> Self {
        Self { zone: self.zone, sub1: self.sub2.clone(), sub2: self.sub1.clone(), label: self.label }
    }

    /// Same bipartition, ignoring which side is which and the label.
    pub fn same_split(&self, other: &Cutting) -> bool {
        self.zone == other.zone
            && ((self.sub1 == other.sub1 && self.sub2 == other.sub2)
                || (self.sub1 == other.sub2 && self.sub2 == other.sub1))
    }

    pub fn validate(&self, z: &Zonation) -> Result<()> {
        if self.zone >= z.n_zones() {
            return Err(Error::InvalidCutting(format!("zone {} out of range", self.zone)));
        }
        if self.sub1.is_empty() || self.sub2.is_empty() {
            return Err(Error::InvalidCutting("empty subzone".into()));
        }
        let cells = z.cells(self.zone);
        if self.sub1.len() + self.sub2.len() != cells.len() {
            return Err(Error::InvalidCutting("subzones do not cover the zone".into()));
        }
        let mut seen = vec![false; z.n_cells()];
        for &c in self.sub1.iter().chain(&self.sub2) {
            if c >= z.n_cells() || z.zone_of(c) != self.zone || seen[c] {
                return Err(Error::InvalidCutting(format!("cell {c} misplaced in cutting")));
            }
            seen[c] = true;
        }
        Ok(())
    }
}

/// Piecewise-constant map: cell `i` takes the value of its zone.
pub fn apply_param(z: &Zonation, m: &CoarseParam) -> Result<FineParam> {
    if m.n_zones() != z.n_zones() {
        return Err(invalid(format!("coarse parameter has {} zones, zonation has {}", m.n_zones(), z.n_zones())));
    }
    let n_p = m.n_p();
    let mut values = Vec::with_capacity(z.n_cells() * n_p);
    for &j in z.assignment() {
        values.extend_from_slice(m.row(j));
    }
    Ok(FineParam { n_p, values })
}

/// Measure-weighted mean of `rows` over `cells`, written to `out`.
///
/// Accumulates deviations from the first cell so that a constant field is
/// reproduced exactly.
pub(crate) fn weighted_mean<'a>(
    cells: &[usize],
    weight: impl Fn(usize) -> f64,
    row: impl Fn(usize) -> &'a [f64],
    out: &mut [f64],
) {
    let base = row(cells[0]).to_vec();
    let mut acc = vec![0.0; out.len()];
    let mut total = 0.0;
    for &c in cells {
        let w = weight(c);
        total += w;
        for ((a, v), b) in acc.iter_mut().zip(row(c)).zip(&base) {
            *a += w * (v - b);
        }
    }
    for ((o, a), b) in out.iter_mut().zip(&acc).zip(&base) {
        *o = b + a / total;
    }
}

/// Least-squares pseudoinverse of [`apply_param`] for the measure-weighted
/// scalar product: the weighted mean on each zone.
pub fn project(z: &Zonation, p: &FineParam, mesh: &Mesh) -> Result<CoarseParam> {
    if p.n_cells() != z.n_cells() || mesh.n_cells() != z.n_cells() {
        return Err(invalid("fine parameter, zonation and mesh sizes differ"));
    }
    let mut m = CoarseParam::zeros(z.n_zones(), p.n_p());
    for j in 0..z.n_zones() {
        weighted_mean(z.cells(j), |c| mesh.measure(c), |c| p.row(c), m.row_mut(j));
    }
    Ok(m)
}

/// Applies a cutting: SUB1 keeps the zone index, SUB2 becomes the new last
/// zone.
pub fn refine(z: &Zonation, cut: &Cutting) -> Result<Zonation> {
    cut.validate(z)?;
    let new_zone = z.n_zones();
    let mut zone_of = z.zone_of.clone();
    for &c in &cut.sub2 {
        zone_of[c] = new_zone;
    }
    let mut members = z.members.clone();
    members[cut.zone] = cut.sub1.clone();
    members.push(cut.sub2.clone());
    Ok(Zonation { zone_of, members })
}

/// Initial coarse parameter on the refined zonation: the split zone's value
/// is duplicated into the new zone.
pub fn init_after_refine(m_opt: &CoarseParam, cut: &Cutting) -> Result<CoarseParam> {
    if cut.zone >= m_opt.n_zones() {
        return Err(Error::InvalidCutting(format!("zone {} out of range", cut.zone)));
    }
    let mut values = m_opt.values.clone();
    values.extend_from_slice(m_opt.row(cut.zone));
    Ok(CoarseParam { n_p: m_opt.n_p, values })
}

/// Greedily merges zones whose values differ by at most `tol` in max-norm.
///
/// Pairs are scanned in ascending `(a, b)` order; after each merge the scan
/// restarts. The merged value is the measure-weighted mean of the two zone
/// values and the higher-numbered zone disappears, shifting later indices
/// down by one.
pub fn coarsen(z: &Zonation, m: &CoarseParam, mesh: &Mesh, tol: f64) -> Result<(Zonation, CoarseParam)> {
    if m.n_zones() != z.n_zones() || mesh.n_cells() != z.n_cells() {
        return Err(invalid("coarsen: inputs are not paired"));
    }
    let n_p = m.n_p();
    let mut values: Vec<Vec<f64>> = m.rows().map(<[f64]>::to_vec).collect();
    let mut weights: Vec<f64> = (0..z.n_zones()).map(|j| z.zone_measure(j, mesh)).collect();
    let mut zone_of = z.zone_of.clone();

    'scan: loop {
        let n = values.len();
        for a in 0..n {
            for b in a + 1..n {
                let gap = values[a].iter().zip(&values[b]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                if gap > tol {
                    continue;
                }
                let (wa, wb) = (weights[a], weights[b]);
                let vb = values.remove(b);
                for (x, y) in values[a].iter_mut().zip(&vb) {
                    *x = if x == y { *x } else { (wa * *x + wb * y) / (wa + wb) };
                }
                weights[a] = wa + wb;
                weights.remove(b);
                for j in zone_of.iter_mut() {
                    if *j == b {
                        *j = a;
                    } else if *j > b {
                        *j -= 1;
                    }
                }
                continue 'scan;
            }
        }
        break;
    }

    let n_zones = values.len();
    let zonation = Zonation::new(zone_of, n_zones)?;
    let coarse = CoarseParam { n_p, values: values.into_iter().flatten().collect() };
    Ok((zonation, coarse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar(v: &[f64]) -> CoarseParam {
        CoarseParam::new(1, v.to_vec()).unwrap()
    }

    #[test]
    fn apply_param_examples() {
        let z = Zonation::single(4);
        assert_eq!(apply_param(&z, &scalar(&[7.0])).unwrap().as_slice(), &[7.0; 4]);

        let z = Zonation::new(vec![0, 0, 1, 1], 2).unwrap();
        let p = apply_param(&z, &scalar(&[0.0, 10.0])).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0, 10.0, 10.0]);

        let z = Zonation::new(vec![0, 1], 2).unwrap();
        let m = CoarseParam::from_rows(&[[255.0, 0.0, 0.0], [0.0, 0.0, 255.0]]).unwrap();
        let p = apply_param(&z, &m).unwrap();
        assert_eq!(p.row(0), &[255.0, 0.0, 0.0]);
        assert_eq!(p.row(1), &[0.0, 0.0, 255.0]);

        assert!(apply_param(&z, &scalar(&[1.0])).is_err());
    }

    #[test]
    fn project_examples() {
        let mesh = Mesh::uniform(4).unwrap();
        let p = FineParam::new(1, vec![0.0, 0.0, 10.0, 10.0]).unwrap();
        let m = project(&Zonation::single(4), &p, &mesh).unwrap();
        assert_eq!(m.as_slice(), &[5.0]);

        let mesh = Mesh::new(vec![1.0, 3.0]).unwrap();
        let p = FineParam::new(1, vec![0.0, 4.0]).unwrap();
        let m = project(&Zonation::single(2), &p, &mesh).unwrap();
        assert_eq!(m.as_slice(), &[3.0]);
    }

    #[test]
    fn mesh_rejects_bad_measures() {
        assert!(Mesh::new(vec![1.0, 0.0]).is_err());
        assert!(Mesh::new(vec![1.0, -2.0]).is_err());
        assert!(Mesh::grid_with_measures(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(Mesh::grid(3, 2).unwrap().row_col(4), Some((1, 1)));
    }

    #[test]
    fn zonation_rejects_empty_zone() {
        assert!(Zonation::new(vec![0, 0, 2], 3).is_err());
        assert!(Zonation::new(vec![0, 3], 2).is_err());
    }

    #[test]
    fn refine_examples() {
        let z = Zonation::single(4);
        let cut = Cutting::new(&z, 0, &[0, 1], CutLabel::Custom).unwrap();
        let r = refine(&z, &cut).unwrap();
        assert_eq!(r.assignment(), &[0, 0, 1, 1]);

        let cut = Cutting::new(&r, 1, &[2], CutLabel::Custom).unwrap();
        let r2 = refine(&r, &cut).unwrap();
        assert_eq!(r2.assignment(), &[0, 0, 1, 2]);
        assert_eq!(r2.cells(2), &[3]);

        // merging the two subzones back gives the original partition
        let m = scalar(&[0.0, 1.0, 1.0]);
        let mesh = Mesh::uniform(4).unwrap();
        let (merged, _) = coarsen(&r2, &m, &mesh, 0.0).unwrap();
        assert!(merged.same_partition(&r));
    }

    #[test]
    fn cutting_rejects_empty_side() {
        let z = Zonation::single(3);
        assert!(matches!(Cutting::new(&z, 0, &[0, 1, 2], CutLabel::Custom), Err(Error::InvalidCutting(_))));
        assert!(matches!(Cutting::new(&z, 0, &[], CutLabel::Custom), Err(Error::InvalidCutting(_))));
        assert!(Cutting::new(&z, 1, &[0], CutLabel::Custom).is_err());
    }

    #[test]
    fn init_after_refine_examples() {
        let z = Zonation::single(2);
        let cut = Cutting::new(&z, 0, &[0], CutLabel::Custom).unwrap();
        assert_eq!(init_after_refine(&scalar(&[5.0]), &cut).unwrap().as_slice(), &[5.0, 5.0]);

        let z = Zonation::new(vec![0, 1, 1], 2).unwrap();
        let m = CoarseParam::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let cut = Cutting::new(&z, 1, &[1], CutLabel::Custom).unwrap();
        let init = init_after_refine(&m, &cut).unwrap();
        assert_eq!(init.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 4.0, 5.0, 6.0]);

        let mesh = Mesh::uniform(3).unwrap();
        let refined = refine(&z, &cut).unwrap();
        let via_projection = project(&refined, &apply_param(&z, &m).unwrap(), &mesh).unwrap();
        assert_eq!(via_projection, init);
    }

    #[test]
    fn coarsen_examples() {
        let mesh = Mesh::uniform(2).unwrap();
        let z = Zonation::new(vec![0, 1], 2).unwrap();
        let (z2, m2) = coarsen(&z, &scalar(&[5.0, 5.0]), &mesh, 0.0).unwrap();
        assert_eq!(z2.n_zones(), 1);
        assert_eq!(m2.as_slice(), &[5.0]);

        let (z2, m2) = coarsen(&z, &scalar(&[0.0, 10.0]), &mesh, 1.0).unwrap();
        assert_eq!(z2, z);
        assert_eq!(m2.as_slice(), &[0.0, 10.0]);

        let mesh = Mesh::uniform(6).unwrap();
        let z = Zonation::new(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
        let (z2, m2) = coarsen(&z, &scalar(&[0.0, 0.5, 10.0]), &mesh, 1.0).unwrap();
        assert_eq!(z2.assignment(), &[0, 0, 0, 0, 1, 1]);
        assert_eq!(m2.as_slice(), &[0.25, 10.0]);
    }

    fn zonation_and_param() -> impl Strategy<Value = (Zonation, CoarseParam, Mesh)> {
        (1usize..5, 1usize..4).prop_flat_map(|(n_zones, n_p)| {
            let cells = proptest::collection::vec(0..n_zones, 0..12);
            let vals = proptest::collection::vec(-1e3f64..1e3, n_zones * n_p);
            let meas = proptest::collection::vec(0.1f64..5.0, 12 + n_zones);
            (cells, vals, meas).prop_map(move |(extra, vals, meas)| {
                let mut zone_of: Vec<usize> = (0..n_zones).collect();
                zone_of.extend(extra);
                let mesh = Mesh::new(meas[..zone_of.len()].to_vec()).unwrap();
                let z = Zonation::new(zone_of, n_zones).unwrap();
                (z, CoarseParam::new(n_p, vals).unwrap(), mesh)
            })
        })
    }

    proptest! {
        #[test]
        fn project_inverts_apply((z, m, mesh) in zonation_and_param()) {
            let p = apply_param(&z, &m).unwrap();
            prop_assert_eq!(project(&z, &p, &mesh).unwrap(), m);
        }

        #[test]
        fn apply_is_injective((z, m, _mesh) in zonation_and_param(), k in 0usize..64, bump in 0.5f64..2.0) {
            let mut other = m.clone();
            let k = k % other.as_slice().len();
            let mut vals = other.clone().into_vec();
            vals[k] += bump;
            other = CoarseParam::new(m.n_p(), vals).unwrap();
            prop_assert_ne!(apply_param(&z, &m).unwrap(), apply_param(&z, &other).unwrap());
        }

        #[test]
        fn refine_and_coarsen_keep_partition((z, m, mesh) in zonation_and_param(), tol in 0.0f64..500.0) {
            let (cz, cm) = coarsen(&z, &m, &mesh, tol).unwrap();
            prop_assert!(cz.n_zones() <= z.n_zones());
            prop_assert_eq!(cm.n_zones(), cz.n_zones());
            if let Some(j) = (0..z.n_zones()).find(|&j| z.cells(j).len() > 1) {
                let first = z.cells(j)[0];
                let cut = Cutting::new(&z, j, &[first], CutLabel::Custom).unwrap();
                let r = refine(&z, &cut).unwrap();
                prop_assert_eq!(r.n_zones(), z.n_zones() + 1);
                // Zonation::new re-validates the partition invariant
                prop_assert!(Zonation::new(r.assignment().to_vec(), r.n_zones()).is_ok());
            }
        }
    }
}
