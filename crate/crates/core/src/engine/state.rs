use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GradientTable;
use crate::error::{Error, Result};
use crate::problem::{check_dim, FiniteSumProblem};

/// Seeded i.i.d. uniform component sampler.
///
/// It is the only randomness consumed by a run, so two runs with the same
/// seed see the same index sequence whatever their `lambda`.
#[derive(Debug, Clone)]
pub struct SamplingStream {
    rng: ChaCha8Rng,
    n: usize,
}

impl SamplingStream {
    pub fn new(seed: u64, n: usize) -> Self {
        SamplingStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            n,
        }
    }

    #[inline]
    pub fn next_index(&mut self) -> usize {
        self.rng.random_range(0..self.n)
    }
}

/// Iterate `X_n`, gradient table and step counter `n` (starting at 1).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    iterate: Vec<f64>,
    table: GradientTable,
    n: u64,
    sampler: SamplingStream,
    scratch: Vec<f64>,
}

/// Table rows are `grad f_k(x0)`, the iterate is `x1` and `n = 1`.
pub fn init_state<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    x1: &[f64],
    seed: u64,
) -> Result<OptimizerState> {
    let d = problem.dim();
    check_dim("x0", d, x0.len())?;
    check_dim("x1", d, x1.len())?;
    Ok(OptimizerState {
        iterate: x1.to_vec(),
        table: GradientTable::at_point(problem, x0),
        n: 1,
        sampler: SamplingStream::new(seed, problem.num_components()),
        scratch: vec![0.0; d],
    })
}

impl OptimizerState {
    pub fn iterate(&self) -> &[f64] {
        &self.iterate
    }

    pub fn table(&self) -> &GradientTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut GradientTable {
        &mut self.table
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Draws the next component index from the state's sampling stream.
    #[inline]
    pub fn sample_index(&mut self) -> usize {
        self.sampler.next_index()
    }

    /// One update with component `k` and step `gamma`.
    ///
    /// The direction uses the table row and mean *before* the refresh, then
    /// row `k` is replaced by `grad f_k(X_n)` at the old iterate.
    #[inline]
    pub fn step<P: FiniteSumProblem + ?Sized>(&mut self, problem: &P, lambda: f64, gamma: f64, k: usize) -> Result<()> {
        let count = self.table.num_rows();
        if k >= count {
            return Err(Error::IndexOutOfRange { index: k, count });
        }
        problem.component_gradient_into(k, &self.iterate, &mut self.scratch);
        let row = self.table.row(k);
        let mean = self.table.mean();
        // g - lambda*row + lambda*mean: at lambda = 0 this is exactly g, at
        // lambda = 1 exactly the SAGA direction (g - row) + mean.
        for i in 0..self.iterate.len() {
            let dir = self.scratch[i] - lambda * row[i] + lambda * mean[i];
            self.iterate[i] -= gamma * dir;
        }
        self.table.replace_row(k, &self.scratch);
        self.n += 1;
        Ok(())
    }

    /// Samples an index from the stream and steps with it.
    #[inline]
    pub fn sampled_step<P: FiniteSumProblem + ?Sized>(&mut self, problem: &P, lambda: f64, gamma: f64) -> Result<usize> {
        let k = self.sample_index();
        self.step(problem, lambda, gamma, k)?;
        Ok(k)
    }
}

/// Checked single step; `lambda` must lie in `[0, 1]`.
pub fn lambda_saga_step<P: FiniteSumProblem + ?Sized>(
    state: &mut OptimizerState,
    problem: &P,
    lambda: f64,
    gamma: f64,
    k: usize,
) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, received {gamma}")));
    }
    state.step(problem, lambda, gamma, k)
}
