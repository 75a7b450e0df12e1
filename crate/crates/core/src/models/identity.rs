use super::{check_fine, Model, ObservationMask};
use crate::error::{invalid, Error, Result};
use crate::zonation::{apply_param, weighted_mean, CoarseParam, Cutting, FineParam, Mesh, Side, Zonation};

/// Identity forward operator: the data are direct (possibly partial)
/// observations of the parameter.
///
/// The objective is `½ Σ_{i observed} meas_i ‖d_i − p_i‖²`, whose fine
/// gradient is `meas_i (p_i − d_i)` and whose optimum on a zone is the
/// measure-weighted mean of the observed data. On unit-measure meshes
/// (images) this is the plain sum of squares with gradient `p − d`.
#[derive(Clone, Debug)]
pub struct IdentityModel {
    mesh: Mesh,
    data: FineParam,
    mask: ObservationMask,
}

impl IdentityModel {
    pub fn new(mesh: Mesh, data: FineParam, mask: ObservationMask) -> Result<Self> {
        if data.n_cells() != mesh.n_cells() || mask.n_cells() != mesh.n_cells() {
            return Err(invalid("mesh, data and mask sizes differ"));
        }
        Ok(Self { mesh, data, mask })
    }

    /// Fully observed data on `mesh`.
    pub fn observed(mesh: Mesh, data: FineParam) -> Result<Self> {
        let mask = ObservationMask::all(mesh.n_cells());
        Self::new(mesh, data, mask)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn data(&self) -> &FineParam {
        &self.data
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    fn observed_measure(&self, cells: &[usize]) -> f64 {
        cells.iter().filter(|&&c| self.mask.is_observed(c)).map(|&c| self.mesh.measure(c)).sum()
    }

    /// Per-zone weighted mean of the observed data.
    pub fn optimize(&self, z: &Zonation) -> Result<(CoarseParam, f64)> {
        if z.n_cells() != self.mesh.n_cells() {
            return Err(invalid("zonation does not match the mesh"));
        }
        let mut m = CoarseParam::zeros(z.n_zones(), self.data.n_p());
        let mut observed = Vec::new();
        for j in 0..z.n_zones() {
            observed.clear();
            observed.extend(z.cells(j).iter().copied().filter(|&c| self.mask.is_observed(c)));
            if observed.is_empty() {
                return Err(Error::UnidentifiableZone(j));
            }
            weighted_mean(&observed, |c| self.mesh.measure(c), |c| self.data.row(c), m.row_mut(j));
        }
        let j_opt = self.cost(&apply_param(z, &m)?)?;
        Ok((m, j_opt))
    }
}

impl Model for IdentityModel {
    fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    fn n_p(&self) -> usize {
        self.data.n_p()
    }

    fn n_data(&self) -> usize {
        self.mask.count() * self.data.n_p()
    }

    fn cost(&self, p: &FineParam) -> Result<f64> {
        check_fine(p, self.n_cells(), self.n_p())?;
        let mut total = 0.0;
        for (i, (pi, di)) in p.rows().zip(self.data.rows()).enumerate() {
            if self.mask.is_observed(i) {
                let sq: f64 = pi.iter().zip(di).map(|(a, b)| (b - a) * (b - a)).sum();
                total += self.mesh.measure(i) * sq;
            }
        }
        Ok(0.5 * total)
    }

    fn grad(&self, p: &FineParam) -> Result<FineParam> {
        check_fine(p, self.n_cells(), self.n_p())?;
        let mut g = FineParam::zeros(self.n_cells(), self.n_p());
        for i in 0..self.n_cells() {
            if !self.mask.is_observed(i) {
                continue;
            }
            let w = self.mesh.measure(i);
            for ((gk, pk), dk) in g.row_mut(i).iter_mut().zip(p.row(i)).zip(self.data.row(i)) {
                *gk = w * (pk - dk);
            }
        }
        Ok(g)
    }

    fn optim(&self, z: &Zonation, _m_init: &CoarseParam) -> Result<(CoarseParam, f64)> {
        self.optimize(z)
    }

    fn is_diagonal(&self) -> bool {
        true
    }

    /// `½ (W₁ + W₂) / (W₁ W₂) ‖λ‖²` with `W` the observed measure of each
    /// subzone; with unit measures `W` is the pixel count.
    fn predicted_decrease(&self, cut: &Cutting, lambda: &[f64]) -> Option<f64> {
        let w1 = self.observed_measure(cut.cells(Side::Sub1));
        let w2 = self.observed_measure(cut.cells(Side::Sub2));
        if w1 <= 0.0 || w2 <= 0.0 {
            return None;
        }
        let sq: f64 = lambda.iter().map(|l| l * l).sum();
        Some(0.5 * (w1 + w2) / (w1 * w2) * sq)
    }
}
