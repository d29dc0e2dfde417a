use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::TabularMdp;

/// Simulator answering next-state queries `y ~ P(· | x, a)` and counting them.
pub struct GenerativeModel<'a> {
    mdp: &'a TabularMdp,
    rng: ChaCha8Rng,
    samples_used: u64,
}

impl<'a> GenerativeModel<'a> {
    pub fn new(mdp: &'a TabularMdp, seed: u64) -> Self {
        Self {
            mdp,
            rng: ChaCha8Rng::seed_from_u64(seed),
            samples_used: 0,
        }
    }

    pub fn mdp(&self) -> &'a TabularMdp {
        self.mdp
    }

    pub fn samples_used(&self) -> u64 {
        self.samples_used
    }

    /// One next-state draw by inverse CDF.
    pub fn sample(&mut self, x: usize, a: usize) -> usize {
        self.samples_used += 1;
        let u: f64 = self.rng.random();
        inverse_cdf(self.mdp.transition_row(x, a), u)
    }
}

/// Smallest `y` with `u < Σ_{z ≤ y} row[z]`. Rounding that leaves `u` above
/// the final cumulative sum falls back to the last state with positive mass.
pub fn inverse_cdf(row: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (y, &p) in row.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return y;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_cdf_boundaries() {
        let row = [0.0, 0.25, 0.0, 0.75];
        assert_eq!(inverse_cdf(&row, 0.0), 1);
        assert_eq!(inverse_cdf(&row, 0.2499), 1);
        assert_eq!(inverse_cdf(&row, 0.25), 3);
        assert_eq!(inverse_cdf(&row, 1.0), 3);
        assert_eq!(inverse_cdf(&[0.5, 0.5, 0.0], 1.0), 1);
    }

    #[test]
    fn one_hot_row_always_returns_support_and_counts() {
        let mdp = TabularMdp::new(3, 1, 0.5, vec![0.0; 3], vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let mut model = GenerativeModel::new(&mdp, 7);
        for _ in 0..100 {
            assert_eq!(model.sample(0, 0), 2);
        }
        assert_eq!(model.samples_used(), 100);
    }

    #[test]
    fn fair_coin_frequencies() {
        let mdp = TabularMdp::new(2, 1, 0.5, vec![0.0; 2], vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        let mut model = GenerativeModel::new(&mdp, 2024);
        let n = 100_000;
        let ones = (0..n).filter(|_| model.sample(0, 0) == 1).count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.01, "frequency {freq}");
    }
}
