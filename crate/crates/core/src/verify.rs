//! Randomized self-checks behind `refind verify`.
//!
//! Each suite draws instances from a seeded generator and compares two
//! independent routes to the same quantity. `perturb` scales the constant of
//! the identity decrease formula so that the suite must fail, which checks
//! that the harness is able to fail at all.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::indicators::{exact_decrease_linear, indicator, predicted_decrease_identity};
use crate::models::{IdentityModel, LinearModel, Model};
use crate::zonation::{apply_param, refine, CutLabel, Cutting, FineParam, Mesh, Side, Zonation};

pub const DECREASE_ID_TOL: f64 = 1e-9;
pub const LINEAR_TOL: f64 = 1e-8;
pub const IDENTITY_KKT_TOL: f64 = 1e-10;
pub const GRADIENT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub cases: usize,
    pub perturb: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest error relative to the check's tolerance scale.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Random instance generators shared by the self-checks, benches and tests.
pub mod gen {
    use super::*;

    /// `k` nonempty zones over `n` cells, `1 ≤ k ≤ max_zones.min(n)`.
    pub fn zonation(rng: &mut impl Rng, n: usize, max_zones: usize) -> Zonation {
        let k = rng.random_range(1..=max_zones.min(n).max(1));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut zone_of = vec![0; n];
        for (i, &cell) in order.iter().enumerate() {
            zone_of[cell] = if i < k { i } else { rng.random_range(0..k) };
        }
        Zonation::new(zone_of, k).expect("every zone received a cell")
    }

    /// Random proper split of a zone with at least two cells.
    pub fn cutting(rng: &mut impl Rng, z: &Zonation) -> Option<Cutting> {
        let zones: Vec<usize> = (0..z.n_zones()).filter(|&j| z.cells(j).len() >= 2).collect();
        let &zone = zones.get(rng.random_range(0..zones.len().max(1)))?;
        let mut cells = z.cells(zone).to_vec();
        cells.shuffle(rng);
        let take = rng.random_range(1..cells.len());
        Cutting::new(z, zone, &cells[..take], CutLabel::Custom).ok()
    }

    pub fn values(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-scale..scale)).collect()
    }

    /// Dense operator with `n_d ≥ n_cells·n_p` rows; injective with
    /// probability one.
    pub fn linear_model(rng: &mut impl Rng, n_cells: usize, n_p: usize, n_d: usize) -> LinearModel {
        let n = n_cells * n_p;
        let op = DMatrix::from_fn(n_d, n, |_, _| rng.random_range(-1.0..1.0));
        let data = DVector::from_fn(n_d, |_, _| rng.random_range(-10.0..10.0));
        LinearModel::new(op, data, n_cells, n_p).expect("shapes are consistent")
    }
}

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

struct Tally {
    outcome: CheckOutcome,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { outcome: CheckOutcome { name, cases: 0, failures: 0, worst: 0.0, tolerance } }
    }

    /// Records `err` measured against the tolerance; NaN is a failure.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn record(&mut self, err: f64) {
        self.outcome.cases += 1;
        if !(err <= self.outcome.tolerance) {
            self.outcome.failures += 1;
        }
        self.outcome.worst = self.outcome.worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
}

/// Identity model at a zone optimum: realized decrease versus
/// `½ n_j/(n_j1 n_j2) I²`, scaled by `1 + J_before`.
fn decrease_identity(rng: &mut ChaCha8Rng, tally: &mut Tally, perturb: bool) -> Result<()> {
    let nx = rng.random_range(2..=16);
    let ny = rng.random_range(1..=16);
    let n_p = if rng.random() { 1 } else { 3 };
    let mesh = Mesh::grid(nx, ny)?;
    let data = FineParam::new(n_p, gen::values(rng, nx * ny * n_p, 255.0))?;
    let model = IdentityModel::observed(mesh, data)?;
    let (z, cut) = loop {
        let z = gen::zonation(rng, nx * ny, 8);
        if let Some(cut) = gen::cutting(rng, &z) {
            break (z, cut);
        }
    };
    let (m, before) = model.optimize(&z)?;
    let g = model.grad(&apply_param(&z, &m)?)?;
    let ind = indicator(&g, &cut)?.indicator;
    let (n1, n2) = (cut.cells(Side::Sub1).len(), cut.cells(Side::Sub2).len());
    let mut predicted = predicted_decrease_identity(ind, n1 + n2, n1, n2)?;
    if perturb {
        predicted *= 2.0;
    }
    let (_, after) = model.optimize(&refine(&z, &cut)?)?;
    tally.record(((before - after) - predicted).abs() / (1.0 + before));
    Ok(())
}

fn linear_instance(rng: &mut ChaCha8Rng) -> Result<(LinearModel, Zonation, Cutting)> {
    loop {
        let n_p = rng.random_range(1..=3);
        let n_cells = rng.random_range(2..=32 / n_p);
        let n_d = rng.random_range(n_cells * n_p..=64);
        let model = gen::linear_model(rng, n_cells, n_p, n_d);
        let z = gen::zonation(rng, n_cells, n_cells - 1);
        if let Some(cut) = gen::cutting(rng, &z) {
            return Ok((model, z, cut));
        }
    }
}

/// Closed-form decrease versus the difference of two least-squares solves.
fn decrease_linear(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let (model, z, cut) = linear_instance(rng)?;
    let exact = exact_decrease_linear(&model, &z, &cut)?;
    let (_, before) = model.optimize(&z)?;
    let (_, after) = model.optimize(&refine(&z, &cut)?)?;
    tally.record(rel(exact, before - after, 1e-12 * (1.0 + before)));
    Ok(())
}

/// Indicator from gradient sums versus the multiplier of the KKT solve.
fn indicator_kkt(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let (model, z, cut) = linear_instance(rng)?;
    let (m, _) = model.optimize(&z)?;
    let g = model.grad(&apply_param(&z, &m)?)?;
    let ind = indicator(&g, &cut)?.indicator;
    let (_, lambda) = model.constrained_optimize(&z, &cut, &vec![0.0; model.n_p()])?;
    let kkt = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    tally.record(rel(ind, kkt, 1e-12 * (1.0 + g.norm_l1())));
    Ok(())
}

/// Same comparison for the identity model in matrix form.
fn identity_indicator_kkt(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let n_p = rng.random_range(1..=3);
    let n_cells = rng.random_range(2..=12);
    let data = FineParam::new(n_p, gen::values(rng, n_cells * n_p, 255.0))?;
    let identity = IdentityModel::observed(Mesh::uniform(n_cells)?, data.clone())?;
    let matrix = LinearModel::identity(&data);
    let (z, cut) = loop {
        let z = gen::zonation(rng, n_cells, n_cells - 1);
        if let Some(cut) = gen::cutting(rng, &z) {
            break (z, cut);
        }
    };
    let (m, _) = identity.optimize(&z)?;
    let g = identity.grad(&apply_param(&z, &m)?)?;
    let ind = indicator(&g, &cut)?.indicator;
    let (_, lambda) = matrix.constrained_optimize(&z, &cut, &vec![0.0; n_p])?;
    let kkt = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    tally.record(rel(ind, kkt, 1e-12 * (1.0 + g.norm_l1())));
    Ok(())
}

/// Central difference of `cost` along a random direction versus `grad`.
pub fn gradient_error(model: &dyn Model, p: &FineParam, dir: &FineParam) -> Result<f64> {
    let scale = p.as_slice().iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let h = 1e-3 * scale;
    let step = |s: f64| {
        let v = p.as_slice().iter().zip(dir.as_slice()).map(|(a, d)| a + s * d).collect();
        FineParam::new(p.n_p(), v)
    };
    let fd = (model.cost(&step(h)?)? - model.cost(&step(-h)?)?) / (2.0 * h);
    let g = model.grad(p)?;
    let ad: f64 = g.as_slice().iter().zip(dir.as_slice()).map(|(a, b)| a * b).sum();
    Ok(rel(fd, ad, 1e-12))
}

fn gradients(rng: &mut ChaCha8Rng, tally: &mut Tally) -> Result<()> {
    let nx = rng.random_range(1..=8);
    let n_p = rng.random_range(1..=3);
    let mesh = Mesh::grid(nx, 2)?;
    let n = 2 * nx * n_p;
    let identity = IdentityModel::observed(mesh, FineParam::new(n_p, gen::values(rng, n, 255.0))?)?;
    let extra = rng.random_range(0..8);
    let linear = gen::linear_model(rng, 2 * nx, n_p, n + extra);
    for model in [&identity as &dyn Model, &linear] {
        let p = FineParam::new(n_p, gen::values(rng, n, 100.0))?;
        let dir = FineParam::new(n_p, gen::values(rng, n, 1.0))?;
        tally.record(gradient_error(model, &p, &dir)?);
    }
    Ok(())
}

pub fn run_checks(opts: VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut tallies = [
        Tally::new("identity-decrease", DECREASE_ID_TOL),
        Tally::new("linear-decrease", LINEAR_TOL),
        Tally::new("indicator-vs-kkt", LINEAR_TOL),
        Tally::new("identity-indicator-vs-kkt", IDENTITY_KKT_TOL),
        Tally::new("finite-difference-gradient", GRADIENT_TOL),
    ];
    for _ in 0..opts.cases {
        decrease_identity(&mut rng, &mut tallies[0], opts.perturb)?;
        decrease_linear(&mut rng, &mut tallies[1])?;
        indicator_kkt(&mut rng, &mut tallies[2])?;
        identity_indicator_kkt(&mut rng, &mut tallies[3])?;
        gradients(&mut rng, &mut tallies[4])?;
    }
    Ok(tallies.into_iter().map(|t| t.outcome).collect())
}
