use crate::problem::FiniteSumProblem;

/// The SAGA memory: one stored gradient per component plus their mean.
///
/// The mean is updated incrementally in O(d) per replacement and recomputed
/// from the rows every `resync_period` replacements (default `N`), which keeps
/// floating-point drift bounded.
#[derive(Debug, Clone)]
pub struct GradientTable {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    mean: Vec<f64>,
    resync_period: Option<usize>,
    since_resync: usize,
}

impl GradientTable {
    /// Row `k` = `grad f_k(x0)` for every component.
    pub fn at_point<P: FiniteSumProblem + ?Sized>(problem: &P, x0: &[f64]) -> Self {
        let n = problem.num_components();
        let d = problem.dim();
        let mut rows = vec![0.0; n * d];
        for (k, row) in rows.chunks_exact_mut(d).enumerate() {
            problem.component_gradient_into(k, x0, row);
        }
        let mut table = GradientTable {
            n,
            d,
            rows,
            mean: vec![0.0; d],
            resync_period: Some(n),
            since_resync: 0,
        };
        table.resync();
        table
    }

    /// `None` disables periodic recomputation of the mean.
    pub fn with_resync_period(mut self, period: Option<usize>) -> Self {
        self.resync_period = period.filter(|&p| p > 0);
        self
    }

    pub fn num_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k * self.d..(k + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.d)
    }

    /// Incrementally maintained mean of the rows.
    #[inline]
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Mean of the rows by full summation.
    pub fn recomputed_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for row in self.rows.chunks_exact(self.d) {
            m.iter_mut().zip(row).for_each(|(s, v)| *s += v);
        }
        let inv = self.n as f64;
        m.iter_mut().for_each(|s| *s /= inv);
        m
    }

    pub fn resync(&mut self) {
        self.mean = self.recomputed_mean();
        self.since_resync = 0;
    }

    /// Overwrites row `k` and shifts the mean by `(new - old) / N`.
    #[inline]
    pub fn replace_row(&mut self, k: usize, new_row: &[f64]) {
        let n = self.n as f64;
        let row = &mut self.rows[k * self.d..(k + 1) * self.d];
        for ((r, m), &v) in row.iter_mut().zip(self.mean.iter_mut()).zip(new_row) {
            *m += (v - *r) / n;
            *r = v;
        }
        self.since_resync += 1;
        if let Some(period) = self.resync_period {
            if self.since_resync >= period {
                self.resync();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist_sq;
    use crate::problem::QuadraticProblem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_at_initial_point() {
        let q = QuadraticProblem::new(vec![vec![1.0], vec![-1.0]]).unwrap();
        let t = GradientTable::at_point(&q, &[2.0]);
        assert_eq!(t.row(0), &[1.0]);
        assert_eq!(t.row(1), &[3.0]);
        assert_eq!(t.mean(), &[2.0]);
    }

    #[test]
    fn replace_only_touches_one_row() {
        let q = QuadraticProblem::seeded(5, 3, 1.0, 1).unwrap();
        let mut t = GradientTable::at_point(&q, &[0.0; 3]);
        let before: Vec<Vec<f64>> = t.rows().map(<[f64]>::to_vec).collect();
        t.replace_row(2, &[9.0, 8.0, 7.0]);
        for k in 0..5 {
            if k == 2 {
                assert_eq!(t.row(k), &[9.0, 8.0, 7.0]);
            } else {
                assert_eq!(t.row(k), before[k].as_slice());
            }
        }
        assert!(dist_sq(t.mean(), &t.recomputed_mean()).sqrt() < 1e-12);
    }

    #[test]
    fn incremental_mean_drift_is_bounded() {
        let (n, d) = (50, 4);
        let q = QuadraticProblem::seeded(n, d, 1.0, 2).unwrap();
        let mut t = GradientTable::at_point(&q, &[0.0; 4]).with_resync_period(None);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut new_row = vec![0.0; d];
        for _ in 0..1_000_000 {
            let k = rng.random_range(0..n);
            new_row.iter_mut().for_each(|v| *v = rng.random_range(-5.0..5.0));
            t.replace_row(k, &new_row);
        }
        let drift = dist_sq(t.mean(), &t.recomputed_mean()).sqrt();
        assert!(drift <= 1e-8, "drift {drift}");
        t.resync();
        assert!(dist_sq(t.mean(), &t.recomputed_mean()).sqrt() <= 1e-15);
    }
}
