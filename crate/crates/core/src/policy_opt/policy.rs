use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A `positions x vocab` matrix in row-major order. Used both for policy
/// logits and for gradients with respect to them.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    positions: usize,
    vocab: usize,
    data: Vec<f64>,
}

impl Logits {
    pub fn zeros(positions: usize, vocab: usize) -> Self {
        Logits { positions, vocab, data: vec![0.0; positions * vocab] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let positions = rows.len();
        let vocab = rows.first().map_or(0, Vec::len);
        if positions == 0 || vocab == 0 {
            return Err(Error::EmptyInput);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != vocab) {
            return Err(Error::LengthMismatch(bad.len(), vocab));
        }
        Ok(Logits { positions, vocab, data: rows.into_iter().flatten().collect() })
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.vocab..(t + 1) * self.vocab]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.vocab..(t + 1) * self.vocab]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.vocab).map(<[f64]>::to_vec).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Per-position categorical policy; positions are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    logits: Logits,
}

impl ToyPolicy {
    pub fn new(logits: Logits) -> Result<Self> {
        if logits.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("policy logits must be finite".into()));
        }
        Ok(ToyPolicy { logits })
    }

    pub fn uniform(positions: usize, vocab: usize) -> Self {
        ToyPolicy { logits: Logits::zeros(positions, vocab) }
    }

    /// Logits drawn i.i.d. from `N(0, scale^2)`.
    pub fn random<R: Rng + ?Sized>(positions: usize, vocab: usize, scale: f64, rng: &mut R) -> Self {
        let mut logits = Logits::zeros(positions, vocab);
        for x in logits.as_mut_slice() {
            let z: f64 = StandardNormal.sample(rng);
            *x = scale * z;
        }
        ToyPolicy { logits }
    }

    pub fn logits(&self) -> &Logits {
        &self.logits
    }

    pub fn positions(&self) -> usize {
        self.logits.positions
    }

    pub fn vocab(&self) -> usize {
        self.logits.vocab
    }

    /// Log-softmax of position `t`.
    pub fn log_probs(&self, t: usize) -> Vec<f64> {
        let row = self.logits.row(t);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        row.iter().map(|x| x - log_z).collect()
    }

    pub fn probs(&self, t: usize) -> Vec<f64> {
        self.log_probs(t).into_iter().map(f64::exp).collect()
    }

    /// Log-probability of each token of `tokens` at its position.
    pub fn sequence_logprobs(&self, tokens: &[usize]) -> Vec<f64> {
        tokens.iter().enumerate().map(|(t, &y)| self.log_probs(t)[y]).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.positions())
            .map(|t| {
                let probs = self.probs(t);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (v, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                probs.len() - 1
            })
            .collect()
    }

    /// Most likely token per position (lowest index on ties).
    pub fn greedy(&self) -> Vec<usize> {
        (0..self.positions())
            .map(|t| {
                let row = self.logits.row(t);
                let mut best = 0;
                for (v, &x) in row.iter().enumerate() {
                    if x > row[best] {
                        best = v;
                    }
                }
                best
            })
            .collect()
    }

    /// `logits += step * direction`.
    pub fn step(&mut self, direction: &Logits, step: f64) {
        for (x, d) in self.logits.as_mut_slice().iter_mut().zip(direction.as_slice()) {
            *x += step * d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ToyPolicy::random(4, 8, 5.0, &mut rng);
        for t in 0..4 {
            let s: f64 = p.probs(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn log_softmax_is_stable_for_large_logits() {
        let p = ToyPolicy::new(Logits::from_rows(vec![vec![1000.0, 0.0, -1000.0]]).unwrap()).unwrap();
        let lp = p.log_probs(0);
        assert!(lp.iter().all(|x| x.is_finite() || *x == f64::NEG_INFINITY));
        assert!(lp[0].abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite_logits() {
        assert!(ToyPolicy::new(Logits::from_rows(vec![vec![f64::NAN, 0.0]]).unwrap()).is_err());
    }

    #[test]
    fn sampling_follows_probabilities() {
        let p = ToyPolicy::new(Logits::from_rows(vec![vec![0.0, (3.0f64).ln()]]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40_000;
        let ones = (0..n).filter(|_| p.sample(&mut rng)[0] == 1).count();
        assert!((ones as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn greedy_picks_argmax() {
        let p = ToyPolicy::new(Logits::from_rows(vec![vec![0.0, 2.0, 1.0], vec![3.0, 3.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(p.greedy(), vec![1, 0]);
    }
}
