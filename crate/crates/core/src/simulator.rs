//! Monte-Carlo checks of the revenue model and of the cross-entropy law.
//!
//! Randomness comes from ChaCha8 seeded once per run; work is cut into
//! fixed-size blocks and block `b` draws from stream `b`, so results are
//! bit-identical for a given seed irrespective of thread count.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{LogBase, Pmf, ProbVector};
use crate::revenue::{revenue_matrix, RevenueParams};

/// Recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3), one stream per block";
/// Trials per random stream in [`simulate_revenue`].
pub const TRIAL_BLOCK: u64 = 8192;
/// Draws per random stream in [`sample_sequence`].
pub const SAMPLE_BLOCK: u64 = 65536;

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn block_ranges(total: u64, block: u64) -> Vec<(u64, u64)> {
    (0..total.div_ceil(block))
        .map(|b| (b, block.min(total - b * block)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub trials: u64,
    pub sequence_length: u64,
    pub seed: u64,
    pub params: RevenueParams,
    pub u: ProbVector,
    /// Recommendation distribution; zeros allowed.
    pub p: Pmf,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.sequence_length == 0 {
            return Err(Error::InvalidArgument("sequence length must be at least 1".into()));
        }
        if self.p.len() != self.u.len() {
            return Err(Error::LengthMismatch(self.p.len(), self.u.len()));
        }
        Ok(())
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    /// `|mean − reference| ≤ k·stderr`.
    pub fn within_sigmas(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.stderr
    }
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        let (a, b) = (self.n as f64, o.n as f64);
        Moments {
            n,
            mean: self.mean + delta * b / n as f64,
            m2: self.m2 + o.m2 + delta * delta * a * b / n as f64,
        }
    }
}

/// Monte-Carlo estimate of `R̄(P)`: each trial draws, for every class,
/// an independent recommend ~ Bern(p_i) and desired ~ Bern(u_i) pair and
/// sums the payoffs.
pub fn simulate_revenue(cfg: &SimConfig) -> Result<Estimate> {
    cfg.validate()?;
    let pay = revenue_matrix(&cfg.params);
    let classes: Vec<(f64, f64)> = cfg.p.iter().copied().zip(cfg.u.iter().copied()).collect();
    let partials: Vec<Moments> = block_ranges(cfg.trials, TRIAL_BLOCK)
        .into_par_iter()
        .map(|(b, count)| {
            let mut rng = block_rng(cfg.seed, b);
            let mut m = Moments::default();
            for _ in 0..count {
                let mut total = 0.0;
                for &(pi, ui) in &classes {
                    let recommend = rng.gen::<f64>() < pi;
                    let desired = rng.gen::<f64>() < ui;
                    total += pay[usize::from(!desired)][usize::from(!recommend)];
                }
                m.push(total);
            }
            m
        })
        .collect();
    let m = partials.into_iter().fold(Moments::default(), Moments::merge);
    let stderr = if m.n > 1 {
        (m.m2 / (m.n - 1) as f64 / m.n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        mean: m.mean,
        stderr,
        samples: m.n,
    })
}

/// `n` i.i.d. class indices drawn from `p`.
pub fn sample_sequence(p: &Pmf, n: u64, seed: u64) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(p.as_slice())
        .map_err(|e| Error::InvalidArgument(format!("cannot sample from distribution: {e}")))?;
    let blocks: Vec<Vec<usize>> = block_ranges(n, SAMPLE_BLOCK)
        .into_par_iter()
        .map(|(b, count)| {
            let mut rng = block_rng(seed, b);
            (0..count).map(|_| dist.sample(&mut rng)).collect()
        })
        .collect();
    Ok(blocks.concat())
}

/// Empirical class frequencies of a sequence.
pub fn empirical_type(seq: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("sequence is empty".into()));
    }
    let mut counts = vec![0u64; n_classes];
    for &x in seq {
        *counts
            .get_mut(x)
            .ok_or(Error::IndexOutOfRange { index: x, len: n_classes })? += 1;
    }
    let n = seq.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossEntropyReport {
    pub length: u64,
    /// `−(1/n) Σ_t log u_{x_t}`.
    pub cross_entropy: f64,
    /// Entropy of the sequence's type.
    pub empirical_entropy: f64,
    /// `cross_entropy − empirical_entropy = D(type‖u)`.
    pub plugin_kl: f64,
    /// `plugin_kl` minus the first-order bias `(K−1)/(2n)`, `K` the number
    /// of observed classes.
    pub kl_estimate: f64,
    /// Standard error of `kl_estimate`.
    pub kl_stderr: f64,
    pub base: LogBase,
}

/// Cross-entropy rate of `seq` against `u` and the plug-in divergence of its
/// type.
pub fn cross_entropy_rate(seq: &[usize], u: &ProbVector, base: LogBase) -> Result<CrossEntropyReport> {
    let q = empirical_type(seq, u.len())?;
    let n = seq.len() as f64;
    let mut ce = 0.0;
    let mut h = 0.0;
    let mut observed = 0usize;
    let (mut s1, mut s2) = (0.0, 0.0);
    for (&qi, &ui) in q.iter().zip(u.iter()) {
        if qi > 0.0 {
            observed += 1;
            ce -= qi * ui.ln();
            h -= qi * qi.ln();
            let l = (qi / ui).ln();
            s1 += qi * l;
            s2 += qi * l * l;
        }
    }
    let plugin = (ce - h).max(0.0);
    let bias = (observed.saturating_sub(1)) as f64 / (2.0 * n);
    let var = (s2 - s1 * s1).max(0.0) / n + bias / n;
    Ok(CrossEntropyReport {
        length: seq.len() as u64,
        cross_entropy: base.from_nats(ce),
        empirical_entropy: base.from_nats(h),
        plugin_kl: base.from_nats(plugin),
        kl_estimate: base.from_nats(plugin - bias),
        kl_stderr: base.from_nats(var.sqrt()),
        base,
    })
}
