use nalgebra::{DMatrix, DVector};

use super::{check_fine, Model};
use crate::error::{invalid, Error, Result};
use crate::zonation::{apply_param, refine, CoarseParam, Cutting, FineParam, Zonation};

/// Dense linear forward operator `F` with data `d`:
/// `J(p) = ½ ‖d − F vec(p)‖²`, `∇J(p) = Fᵀ(F vec(p) − d)`.
///
/// Meant for desk-scale problems where the whole operator fits in memory;
/// coarse problems are solved exactly by a QR factorization.
#[derive(Clone, Debug)]
pub struct LinearModel {
    op: DMatrix<f64>,
    data: DVector<f64>,
    n_cells: usize,
    n_p: usize,
}

/// Relative threshold on the diagonal of `R` below which the coarse operator
/// is declared rank deficient.
const RANK_TOL: f64 = 1e-10;

impl LinearModel {
    pub fn new(op: DMatrix<f64>, data: DVector<f64>, n_cells: usize, n_p: usize) -> Result<Self> {
        if n_cells == 0 || n_p == 0 {
            return Err(invalid("linear model needs at least one cell and component"));
        }
        if op.ncols() != n_cells * n_p {
            return Err(invalid(format!("operator has {} columns, expected {}", op.ncols(), n_cells * n_p)));
        }
        if op.nrows() != data.len() || data.is_empty() {
            return Err(invalid(format!("operator has {} rows but data has {} entries", op.nrows(), data.len())));
        }
        if op.iter().chain(data.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("operator and data must be finite"));
        }
        Ok(Self { op, data, n_cells, n_p })
    }

    /// `F = I`, `d = vec(data)`: the identity model in matrix form.
    pub fn identity(data: &FineParam) -> Self {
        let n = data.as_slice().len();
        Self {
            op: DMatrix::identity(n, n),
            data: DVector::from_column_slice(data.as_slice()),
            n_cells: data.n_cells(),
            n_p: data.n_p(),
        }
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.op
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    /// `F ∘ P_z`: column `(j, k)` sums the operator columns of component `k`
    /// over the cells of zone `j`.
    pub fn coarse_operator(&self, z: &Zonation) -> Result<DMatrix<f64>> {
        if z.n_cells() != self.n_cells {
            return Err(invalid("zonation does not match the model"));
        }
        let n_p = self.n_p;
        let mut fz = DMatrix::zeros(self.op.nrows(), z.n_zones() * n_p);
        for j in 0..z.n_zones() {
            for &c in z.cells(j) {
                for k in 0..n_p {
                    let mut col = fz.column_mut(j * n_p + k);
                    col += self.op.column(c * n_p + k);
                }
            }
        }
        Ok(fz)
    }

    fn residual(&self, p: &FineParam) -> DVector<f64> {
        let x = DVector::from_column_slice(p.as_slice());
        &self.op * x - &self.data
    }

    /// Unconstrained coarse least squares on `z`.
    pub fn optimize(&self, z: &Zonation) -> Result<(CoarseParam, f64)> {
        let fz = self.coarse_operator(z)?;
        let x = least_squares(fz, &self.data)?;
        let m = CoarseParam::new(self.n_p, x.as_slice().to_vec())?;
        let j_opt = self.cost(&apply_param(z, &m)?)?;
        Ok((m, j_opt))
    }

    /// Minimizes the objective on `refine(z, cut)` under the jump constraint
    /// `m_{j1} − m_{j2} = c`, where `j1 = cut.zone()` keeps SUB1 and `j2` is
    /// the new zone holding SUB2.
    ///
    /// Solves the KKT system `[H Aᵀ; A 0] [m; λ] = [Fᵀd; c]` with
    /// `H = (F∘P)ᵀ(F∘P)`. With this sign convention `λ` equals the coarse
    /// gradient component of SUB2 at the constrained optimum.
    pub fn constrained_optimize(&self, z: &Zonation, cut: &Cutting, jump: &[f64]) -> Result<(CoarseParam, Vec<f64>)> {
        let n_p = self.n_p;
        if jump.len() != n_p {
            return Err(invalid(format!("jump has {} components, expected {n_p}", jump.len())));
        }
        let refined = refine(z, cut)?;
        let fz = self.coarse_operator(&refined)?;
        check_rank(&fz)?;

        let n = fz.ncols();
        let h = fz.transpose() * &fz;
        let b = fz.transpose() * &self.data;
        let (j1, j2) = (cut.zone(), z.n_zones());

        let mut kkt = DMatrix::zeros(n + n_p, n + n_p);
        kkt.view_mut((0, 0), (n, n)).copy_from(&h);
        let mut rhs = DVector::zeros(n + n_p);
        rhs.rows_mut(0, n).copy_from(&b);
        for k in 0..n_p {
            let row = n + k;
            kkt[(row, j1 * n_p + k)] = 1.0;
            kkt[(row, j2 * n_p + k)] = -1.0;
            kkt[(j1 * n_p + k, row)] = 1.0;
            kkt[(j2 * n_p + k, row)] = -1.0;
            rhs[row] = jump[k];
        }

        let sol = kkt.full_piv_lu().solve(&rhs).ok_or_else(|| Error::Degenerate("singular KKT matrix".into()))?;
        let m = CoarseParam::new(n_p, sol.rows(0, n).iter().copied().collect())?;
        let lambda = sol.rows(n, n_p).iter().copied().collect();
        Ok((m, lambda))
    }
}

fn check_rank(fz: &DMatrix<f64>) -> Result<()> {
    let (rows, cols) = fz.shape();
    if rows < cols {
        return Err(Error::OverParameterized(format!("{cols} coarse unknowns but only {rows} observations")));
    }
    let r = fz.clone().qr().unpack_r();
    rank_from_r(&r, fz)
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN counts as deficient
fn rank_from_r(r: &DMatrix<f64>, fz: &DMatrix<f64>) -> Result<()> {
    let scale = fz.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for i in 0..r.ncols() {
        if !(r[(i, i)].abs() > RANK_TOL * scale) {
            return Err(Error::OverParameterized(format!("coarse operator is rank deficient at unknown {i}")));
        }
    }
    Ok(())
}

/// Full-rank least squares `min ‖A x − b‖` via Householder QR.
fn least_squares(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::OverParameterized(format!("{cols} coarse unknowns but only {rows} observations")));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    rank_from_r(&r, &a)?;
    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let top = qtb.rows(0, cols).into_owned();
    r.solve_upper_triangular(&top).ok_or_else(|| Error::OverParameterized("singular triangular factor".into()))
}

impl Model for LinearModel {
    fn n_cells(&self) -> usize {
        self.n_cells
    }

    fn n_p(&self) -> usize {
        self.n_p
    }

    fn n_data(&self) -> usize {
        self.data.len()
    }

    fn cost(&self, p: &FineParam) -> Result<f64> {
        check_fine(p, self.n_cells, self.n_p)?;
        Ok(0.5 * self.residual(p).norm_squared())
    }

    fn grad(&self, p: &FineParam) -> Result<FineParam> {
        check_fine(p, self.n_cells, self.n_p)?;
        let g = self.op.tr_mul(&self.residual(p));
        FineParam::new(self.n_p, g.as_slice().to_vec())
    }

    fn optim(&self, z: &Zonation, _m_init: &CoarseParam) -> Result<(CoarseParam, f64)> {
        self.optimize(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::IdentityModel;
    use crate::zonation::{CutLabel, Mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, n_d: usize, n_cells: usize, n_p: usize) -> LinearModel {
        let op = DMatrix::from_fn(n_d, n_cells * n_p, |_, _| rng.random_range(-1.0..1.0));
        let d = DVector::from_fn(n_d, |_, _| rng.random_range(-1.0..1.0));
        LinearModel::new(op, d, n_cells, n_p).unwrap()
    }

    #[test]
    fn identity_operator_matches_identity_model() {
        let d = FineParam::new(1, vec![0.0, 0.0, 10.0, 10.0]).unwrap();
        let lin = LinearModel::identity(&d);
        let id = IdentityModel::observed(Mesh::uniform(4).unwrap(), d).unwrap();
        let p = FineParam::new(1, vec![5.0; 4]).unwrap();
        assert_eq!(lin.cost(&p).unwrap(), id.cost(&p).unwrap());
        assert_eq!(lin.grad(&p).unwrap(), id.grad(&p).unwrap());
        let (m, j) = lin.optimize(&Zonation::single(4)).unwrap();
        assert!((m.as_slice()[0] - 5.0).abs() < 1e-12 && (j - 50.0).abs() < 1e-10);
    }

    #[test]
    fn zero_operator() {
        let op = DMatrix::zeros(3, 2);
        let d = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let lin = LinearModel::new(op, d, 2, 1).unwrap();
        let p = FineParam::new(1, vec![3.0, -4.0]).unwrap();
        assert_eq!(lin.cost(&p).unwrap(), 4.5);
        assert_eq!(lin.grad(&p).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(matches!(lin.optimize(&Zonation::single(2)), Err(Error::OverParameterized(_))));
    }

    #[test]
    fn diagonal_one_zone_closed_form() {
        // normal equation (1 + 4) m = 2 + 4 gives m = 6/5
        let op = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let lin = LinearModel::new(op, DVector::from_vec(vec![2.0, 2.0]), 2, 1).unwrap();
        let (m, j) = lin.optimize(&Zonation::single(2)).unwrap();
        assert!((m.as_slice()[0] - 1.2).abs() < 1e-14);
        assert!((j - 0.4).abs() < 1e-14);
    }

    #[test]
    fn square_invertible_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lin = random_model(&mut rng, 4, 4, 1);
        let (_, j) = lin.optimize(&Zonation::new(vec![0, 1, 2, 3], 4).unwrap()).unwrap();
        assert!(j < 1e-20, "{j}");
    }

    #[test]
    fn optimum_has_vanishing_coarse_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let lin = random_model(&mut rng, 12, 5, 2);
            let z = Zonation::new(vec![0, 1, 1, 2, 0], 3).unwrap();
            let (m, _) = lin.optimize(&z).unwrap();
            let g = lin.grad(&apply_param(&z, &m).unwrap()).unwrap();
            let fz = lin.coarse_operator(&z).unwrap();
            let coarse = fz.transpose() * (&fz * DVector::from_column_slice(m.as_slice()) - lin.data());
            let bound = 1e-10 * (1.0 + lin.operator().tr_mul(lin.data()).norm());
            assert!(coarse.norm() <= bound);
            // summing the fine gradient per zone gives the same coarse gradient
            for j in 0..3 {
                for k in 0..2 {
                    let s: f64 = z.cells(j).iter().map(|&c| g.row(c)[k]).sum();
                    assert!((s - coarse[j * 2 + k]).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn kkt_with_zero_jump_reproduces_unrefined_optimum() {
        let d = FineParam::new(1, vec![0.0, 0.0, 10.0, 10.0]).unwrap();
        let lin = LinearModel::identity(&d);
        let z = Zonation::single(4);
        let cut = Cutting::new(&z, 0, &[0, 1], CutLabel::Custom).unwrap();
        let (m, lambda) = lin.constrained_optimize(&z, &cut, &[0.0]).unwrap();
        assert!((m.as_slice()[0] - 5.0).abs() < 1e-12 && (m.as_slice()[1] - 5.0).abs() < 1e-12);
        assert!((lambda[0] + 10.0).abs() < 1e-12);

        let refined = refine(&z, &cut).unwrap();
        let j = lin.cost(&apply_param(&refined, &m).unwrap()).unwrap();
        assert!((j - 50.0).abs() < 1e-10);
    }

    #[test]
    fn inactive_constraint_gives_zero_multiplier() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lin = random_model(&mut rng, 10, 4, 2);
        let z = Zonation::new(vec![0, 0, 0, 1], 2).unwrap();
        let cut = Cutting::new(&z, 0, &[1], CutLabel::Custom).unwrap();
        let refined = refine(&z, &cut).unwrap();
        let (free, _) = lin.optimize(&refined).unwrap();
        let jump: Vec<f64> = (0..2).map(|k| free.row(0)[k] - free.row(2)[k]).collect();
        let (m, lambda) = lin.constrained_optimize(&z, &cut, &jump).unwrap();
        for (a, b) in m.as_slice().iter().zip(free.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(lambda.iter().all(|l| l.abs() < 1e-9), "{lambda:?}");
    }

    #[test]
    fn rank_deficient_refinement_is_rejected() {
        // observations only see cell 0, so a zone made of cell 1 is invisible
        let op = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let lin = LinearModel::new(op, DVector::from_vec(vec![1.0, 1.0]), 2, 1).unwrap();
        let z = Zonation::single(2);
        let cut = Cutting::new(&z, 0, &[0], CutLabel::Custom).unwrap();
        assert!(matches!(lin.constrained_optimize(&z, &cut, &[0.0]), Err(Error::OverParameterized(_))));
    }
}
