//! Forward models: cost, fine gradient and coarse optimization.

mod identity;
mod linear;

pub use identity::IdentityModel;
pub use linear::LinearModel;

use crate::error::{invalid, Result};
use crate::zonation::{CoarseParam, Cutting, FineParam, Zonation};

/// The three capabilities the driver needs from a model.
///
/// `grad` must be the exact gradient of `cost` with respect to the fine
/// parameter, and `optim` must return a point where the coarse gradient
/// (fine gradient summed per zone) vanishes.
pub trait Model: Send + Sync {
    fn n_cells(&self) -> usize;

    /// Parameter dimension per cell.
    fn n_p(&self) -> usize;

    /// Number of scalar observations.
    fn n_data(&self) -> usize;

    fn cost(&self, p: &FineParam) -> Result<f64>;

    fn grad(&self, p: &FineParam) -> Result<FineParam>;

    /// Minimizes the objective over coarse parameters on `z`, starting from
    /// `m_init`. Returns the minimizer and the optimal objective value.
    fn optim(&self, z: &Zonation, m_init: &CoarseParam) -> Result<(CoarseParam, f64)>;

    /// True when cells do not interact, so the optimum on one zone does not
    /// depend on the others. Lets the driver reuse indicators of untouched
    /// zones between iterations.
    fn is_diagonal(&self) -> bool {
        false
    }

    /// Exact decrease of the optimal objective obtained by opening `cut`,
    /// given its Lagrange multiplier, when the model has a closed form.
    fn predicted_decrease(&self, _cut: &Cutting, _lambda: &[f64]) -> Option<f64> {
        None
    }
}

/// Cells carrying a measurement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    observed: Vec<bool>,
    count: usize,
}

impl ObservationMask {
    pub fn all(n_cells: usize) -> Self {
        Self { observed: vec![true; n_cells], count: n_cells }
    }

    pub fn from_indices(n_cells: usize, indices: &[usize]) -> Result<Self> {
        let mut observed = vec![false; n_cells];
        for &i in indices {
            if i >= n_cells {
                return Err(invalid(format!("observed cell {i} out of range")));
            }
            observed[i] = true;
        }
        let count = observed.iter().filter(|&&o| o).count();
        if count == 0 {
            return Err(invalid("observation mask is empty"));
        }
        Ok(Self { observed, count })
    }

    pub fn is_observed(&self, cell: usize) -> bool {
        self.observed[cell]
    }

    pub fn n_cells(&self) -> usize {
        self.observed.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

fn check_fine(p: &FineParam, n_cells: usize, n_p: usize) -> Result<()> {
    if p.n_cells() != n_cells || p.n_p() != n_p {
        return Err(invalid(format!("expected {n_cells}x{n_p} fine parameter, got {}x{}", p.n_cells(), p.n_p())));
    }
    Ok(())
}
