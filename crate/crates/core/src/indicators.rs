//! Refinement indicators.
//!
//! At an optimum of the current zonation, opening a cutting with a zero
//! jump does not move the optimum, and the Lagrange multiplier of that
//! zero-jump constraint equals the coarse gradient of the SUB2 subzone:
//! the sum of the fine gradient over its cells. Its Euclidean norm is the
//! refinement indicator, the first-order gain of letting the two subzones
//! take different values.

use crate::error::{invalid, Error, Result};
use crate::models::LinearModel;
use crate::zonation::{refine, CutLabel, Cutting, FineParam, Side, Zonation};

/// Indicator of one cutting.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorReport {
    pub cutting: Cutting,
    /// Lagrange multiplier of the zero-jump constraint (SUB2 gradient sum).
    pub lambda: Vec<f64>,
    /// `‖lambda‖₂`.
    pub indicator: f64,
    /// `‖Σ_SUB1 g + Σ_SUB2 g‖₂`, zero at an exact zone optimum.
    pub symmetry_residual: f64,
    pub predicted_decrease: Option<f64>,
}

pub fn subzone_gradient_sum(g: &FineParam, cut: &Cutting, side: Side) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; g.n_p()];
    for &c in cut.cells(side) {
        if c >= g.n_cells() {
            return Err(Error::InvalidCutting(format!("cell {c} outside the gradient")));
        }
        for (s, v) in sum.iter_mut().zip(g.row(c)) {
            *s += v;
        }
    }
    Ok(sum)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Indicator of `cut` from the fine gradient `g` taken at the current
/// optimum.
pub fn indicator(g: &FineParam, cut: &Cutting) -> Result<IndicatorReport> {
    let s1 = subzone_gradient_sum(g, cut, Side::Sub1)?;
    let lambda = subzone_gradient_sum(g, cut, Side::Sub2)?;
    let both: Vec<f64> = s1.iter().zip(&lambda).map(|(a, b)| a + b).collect();
    Ok(IndicatorReport {
        cutting: cut.clone(),
        indicator: norm(&lambda),
        symmetry_residual: norm(&both),
        lambda,
        predicted_decrease: None,
    })
}

/// Exact decrease of the identity objective on unit cells when a zone of
/// `n_j` cells is split into `n_j1` and `n_j2` cells.
pub fn predicted_decrease_identity(ind: f64, n_j: usize, n_j1: usize, n_j2: usize) -> Result<f64> {
    if n_j1 == 0 || n_j2 == 0 {
        return Err(invalid("subzone sizes must be positive"));
    }
    if n_j1 + n_j2 != n_j {
        return Err(invalid(format!("{n_j1} + {n_j2} != {n_j}")));
    }
    Ok(0.5 * n_j as f64 / (n_j1 as f64 * n_j2 as f64) * ind * ind)
}

/// Exact decrease `J(z) − J(refine(z, cut))` of a linear model, computed as
/// `½ ⟨Aᵀλ, H⁻¹ Aᵀλ⟩` with `λ` from the zero-jump KKT solve and `H` the
/// normal matrix of the refined coarse operator.
pub fn exact_decrease_linear(model: &LinearModel, z: &Zonation, cut: &Cutting) -> Result<f64> {
    let n_p = model.operator().ncols() / z.n_cells();
    let (_, lambda) = model.constrained_optimize(z, cut, &vec![0.0; n_p])?;
    let refined = refine(z, cut)?;
    let fz = model.coarse_operator(&refined)?;
    let h = fz.tr_mul(&fz);
    let mut force = nalgebra::DVector::zeros(h.nrows());
    let (j1, j2) = (cut.zone(), z.n_zones());
    for k in 0..n_p {
        force[j1 * n_p + k] = lambda[k];
        force[j2 * n_p + k] = -lambda[k];
    }
    let chol = h.cholesky().ok_or_else(|| Error::OverParameterized("refined normal matrix is not definite".into()))?;
    let x = chol.solve(&force);
    Ok(0.5 * force.dot(&x))
}

/// How a vector is reduced to a single sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignVote {
    /// `sgn(Σ sgn(v_k))`.
    Majority,
    /// `sgn(Σ v_k)`.
    Sum,
}

fn sgn(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn pseudo_sign(v: &[f64], vote: SignVote) -> i32 {
    match vote {
        SignVote::Majority => sgn(v.iter().map(|&x| sgn(x)).sum::<i32>() as f64),
        SignVote::Sum => sgn(v.iter().sum()),
    }
}

/// For each component `k`, the cutting that follows the sign of `g[·, k]`
/// inside `zone` (strictly positive cells in SUB1). Returns the candidate
/// with the largest global indicator, lowest component on ties, or `None`
/// when no component splits the zone.
pub fn per_component_best(g: &FineParam, z: &Zonation, zone: usize) -> Option<Cutting> {
    let mut best: Option<(f64, Cutting)> = None;
    for k in 0..g.n_p() {
        let Some(cut) = Cutting::from_predicate(z, zone, CutLabel::Component(k), |c| g.row(c)[k] > 0.0) else {
            continue;
        };
        let lambda = subzone_gradient_sum(g, &cut, Side::Sub2).ok()?;
        let ind = norm(&lambda);
        if best.as_ref().is_none_or(|(b, _)| ind > *b) {
            best = Some((ind, cut));
        }
    }
    best.map(|(_, c)| c)
}
