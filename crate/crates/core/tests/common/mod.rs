#![allow(dead_code)]

use geolab::convexity::ChainSpec;
use geolab::graphs::FiniteMetric;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn agrees(&self, exact: f64, ses: f64) -> bool {
        (self.mean - exact).abs() <= ses * self.se + 1e-12 * exact.abs()
    }
}

fn next_state(chain: &ChainSpec, w: usize, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let row = chain.row(w);
    for &(j, pr) in row {
        acc += pr;
        if u < acc {
            return j;
        }
    }
    row.last().unwrap().0
}

fn draw_initial(chain: &ChainSpec, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pr) in chain.initial().iter().enumerate() {
        acc += pr;
        if u < acc {
            return i;
        }
    }
    chain.n_states() - 1
}

/// Monte Carlo estimates of the truncated convexity numerator and of the
/// denominator, simulated directly: one trajectory per sample and a fresh
/// independent fork for every `(scale, time)` term.
pub fn monte_carlo_ratio(
    chain: &ChainSpec,
    metric: &FiniteMetric,
    cap: usize,
    samples: usize,
    seed: u64,
) -> (Estimate, Estimate) {
    let big_t = chain.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sq = |u: usize, v: usize| metric.get(u, v).powi(2);
    let (mut s1, mut s2, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0);
    let mut path = vec![0usize; big_t + 1];
    for _ in 0..samples {
        path[0] = draw_initial(chain, &mut rng);
        for t in 1..=big_t {
            path[t] = next_state(chain, path[t - 1], &mut rng);
        }
        let at = |t: i64| path[t.clamp(0, big_t as i64) as usize];
        let mut x = 0.0;
        for kp in 1..=cap {
            let h = 1i64 << kp;
            let mut term = 0.0;
            for t in 1..(big_t as i64 + h) {
                let s = (t - h).clamp(0, big_t as i64);
                let end = t.min(big_t as i64);
                let mut w = at(s);
                for _ in s..end {
                    w = next_state(chain, w, &mut rng);
                }
                term += sq(w, at(t));
            }
            x += term / 4f64.powi(kp as i32);
        }
        let mut y = 0.0;
        for t in 1..=big_t {
            y += sq(path[t], path[t - 1]);
        }
        s1 += x;
        s2 += x * x;
        r1 += y;
        r2 += y * y;
    }
    let n = samples as f64;
    let est = |a: f64, b: f64| {
        let mean = a / n;
        let var = (b / n - mean * mean).max(0.0) * n / (n - 1.0);
        Estimate {
            mean,
            se: (var / n).sqrt(),
        }
    };
    (est(s1, s2), est(r1, r2))
}
