//! Reference computations that share no code with the library: dense
//! Gaussian elimination, normal equations, plain per-zone means and
//! exhaustive enumeration.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refind::{FineParam, LinearModel, Mesh, Model};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col] != 0.0, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Dense linear problem in row-vector form.
pub struct Dense {
    pub f: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub n_p: usize,
}

impl Dense {
    pub fn from_model(model: &LinearModel) -> Self {
        let op = model.operator();
        let f = (0..op.nrows()).map(|r| (0..op.ncols()).map(|c| op[(r, c)]).collect()).collect();
        Self { f, d: model.data().iter().copied().collect(), n_p: model.n_p() }
    }

    /// Columns of `F·P` for the zonation given as a cell → zone map.
    pub fn coarse(&self, zone_of: &[usize], n_zones: usize) -> Vec<Vec<f64>> {
        self.f
            .iter()
            .map(|row| {
                let mut out = vec![0.0; n_zones * self.n_p];
                for (cell, &j) in zone_of.iter().enumerate() {
                    for k in 0..self.n_p {
                        out[j * self.n_p + k] += row[cell * self.n_p + k];
                    }
                }
                out
            })
            .collect()
    }

    /// `(H, Fᵀd)` with `H = (FP)ᵀ(FP)`.
    fn normal(&self, zone_of: &[usize], n_zones: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let a = self.coarse(zone_of, n_zones);
        let n = n_zones * self.n_p;
        let mut h = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for (row, &dv) in a.iter().zip(&self.d) {
            for i in 0..n {
                b[i] += row[i] * dv;
                for j in 0..n {
                    h[i][j] += row[i] * row[j];
                }
            }
        }
        (h, b)
    }

    pub fn cost(&self, zone_of: &[usize], n_zones: usize, m: &[f64]) -> f64 {
        let a = self.coarse(zone_of, n_zones);
        0.5 * a
            .iter()
            .zip(&self.d)
            .map(|(row, dv)| {
                let r = dv - row.iter().zip(m).map(|(x, y)| x * y).sum::<f64>();
                r * r
            })
            .sum::<f64>()
    }

    /// Least-squares optimum on the zonation, by the normal equations.
    pub fn optimum(&self, zone_of: &[usize], n_zones: usize) -> (Vec<f64>, f64) {
        let (h, b) = self.normal(zone_of, n_zones);
        let m = solve(h, b);
        let j = self.cost(zone_of, n_zones, &m);
        (m, j)
    }

    /// Multiplier of `m_{j1} − m_{j2} = 0` on the refined zonation.
    pub fn kkt_multiplier(&self, refined: &[usize], n_zones: usize, j1: usize, j2: usize) -> Vec<f64> {
        let (h, b) = self.normal(refined, n_zones);
        let n = h.len();
        let size = n + self.n_p;
        let mut a = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        for i in 0..n {
            a[i][..n].copy_from_slice(&h[i]);
            rhs[i] = b[i];
        }
        for k in 0..self.n_p {
            let row = n + k;
            a[row][j1 * self.n_p + k] = 1.0;
            a[row][j2 * self.n_p + k] = -1.0;
            a[j1 * self.n_p + k][row] = 1.0;
            a[j2 * self.n_p + k][row] = -1.0;
        }
        solve(a, rhs)[n..].to_vec()
    }
}

/// Identity objective at the per-zone means with unit cells.
pub fn identity_optimum(data: &FineParam, zone_of: &[usize], n_zones: usize) -> f64 {
    let n_p = data.n_p();
    let mut sums = vec![0.0; n_zones * n_p];
    let mut counts = vec![0usize; n_zones];
    for (cell, &j) in zone_of.iter().enumerate() {
        counts[j] += 1;
        for k in 0..n_p {
            sums[j * n_p + k] += data.row(cell)[k];
        }
    }
    let mut j_opt = 0.0;
    for (cell, &j) in zone_of.iter().enumerate() {
        for k in 0..n_p {
            let r = data.row(cell)[k] - sums[j * n_p + k] / counts[j] as f64;
            j_opt += 0.5 * r * r;
        }
    }
    j_opt
}

/// Largest `‖Σ_{S} g‖` over nonempty proper subsets `S` of `cells`,
/// enumerating the `2^(n−1) − 1` bipartitions once each.
pub fn exhaustive_best_indicator(g: &FineParam, cells: &[usize]) -> f64 {
    let n = cells.len();
    assert!((2..=20).contains(&n));
    let mut best = 0.0f64;
    // the last cell always stays on the complement side
    for mask in 1u32..(1 << (n - 1)) {
        let mut s = vec![0.0; g.n_p()];
        for (bit, &c) in cells[..n - 1].iter().enumerate() {
            if mask >> bit & 1 == 1 {
                for (a, v) in s.iter_mut().zip(g.row(c)) {
                    *a += v;
                }
            }
        }
        best = best.max(s.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    best
}

/// Piecewise-constant image with `regions` random rectangles plus uniform
/// noise of amplitude `noise`.
pub fn random_image(
    rng: &mut impl Rng,
    nx: usize,
    ny: usize,
    n_p: usize,
    regions: usize,
    noise: f64,
) -> (Mesh, FineParam) {
    let mut values = vec![0.0; nx * ny * n_p];
    let base: Vec<f64> = (0..n_p).map(|_| rng.random_range(0.0..255.0)).collect();
    for cell in 0..nx * ny {
        values[cell * n_p..(cell + 1) * n_p].copy_from_slice(&base);
    }
    for _ in 0..regions {
        let (r0, c0) = (rng.random_range(0..ny), rng.random_range(0..nx));
        let (r1, c1) = (rng.random_range(r0..ny), rng.random_range(c0..nx));
        let color: Vec<f64> = (0..n_p).map(|_| rng.random_range(0.0..255.0)).collect();
        for r in r0..=r1 {
            for c in c0..=c1 {
                let cell = r * nx + c;
                values[cell * n_p..(cell + 1) * n_p].copy_from_slice(&color);
            }
        }
    }
    if noise > 0.0 {
        for v in &mut values {
            *v += rng.random_range(-noise..noise);
        }
    }
    (Mesh::grid(nx, ny).unwrap(), FineParam::new(n_p, values).unwrap())
}
