//! Two-step inverse-transform sampling of pixel positions from a
//! [`ProbabilityGrid`]: a column is drawn from the marginal over `u`, then a
//! row from the conditional `p(v | u)`.

use rand_core::Rng;
use rand_pcg::Pcg64;

use crate::distribution::ProbabilityGrid;
use crate::error::{Error, Result};
use crate::geometry::PixelCoord;

/// Multiplier folded into the PCG state so that nearby seeds start far apart.
const STATE_MIX: u128 = 0xcafe_f00d_d15e_a5e5_a02b_dbf7_bb3c_0a7a;

/// Deterministic random source: PCG-XSL-RR 128/64 (`rand_pcg::Pcg64`) with
/// an explicit stream selector. The same `(seed, stream)` yields the same
/// sequence on every platform.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: Pcg64,
}

impl SeededRng {
    pub const ALGORITHM: &'static str = "pcg64-xsl-rr-128/64";

    pub fn new(seed: u64, stream: u64) -> Self {
        let state = STATE_MIX ^ ((seed as u128) << 64 | seed as u128);
        Self {
            seed,
            stream,
            inner: Pcg64::new(state, stream as u128),
        }
    }

    /// Independent per-frame stream `seed XOR frame_index`, so frames can be
    /// processed in any order or in parallel.
    pub fn for_frame(seed: u64, frame_index: u64) -> Self {
        Self::new(seed, seed ^ frame_index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` by rejection, free of modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Standard normal deviate (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Rebuilds a distribution from nonnegative cell intensities by dividing by
/// their sum; works for 8-bit levels and full-precision values alike.
pub fn grid_from_grayscale<I>(width: usize, height: usize, cells: I) -> Result<ProbabilityGrid>
where
    I: IntoIterator,
    I::Item: Into<f64>,
{
    let weights: Vec<f64> = cells.into_iter().map(Into::into).collect();
    ProbabilityGrid::from_weights(width, height, weights)
}

/// Inverse-CDF sampler over one grid. Column CDFs are built on demand the
/// first time a column is drawn.
pub struct GridSampler<'a> {
    grid: &'a ProbabilityGrid,
    marginal_cdf: Vec<f64>,
    conditional_cdf: Vec<Option<Vec<f64>>>,
}

impl<'a> GridSampler<'a> {
    pub fn new(grid: &'a ProbabilityGrid) -> Result<Self> {
        let (w, h) = (grid.width(), grid.height());
        let mass = grid.mass();
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidGrid("negative or non-finite cell".into()));
        }
        let mut column = vec![0.0; w];
        for v in 0..h {
            for (u, c) in column.iter_mut().enumerate() {
                *c += mass[v * w + u];
            }
        }
        let mut acc = 0.0;
        let marginal_cdf: Vec<f64> = column
            .iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect();
        if acc <= 0.0 {
            return Err(Error::InvalidGrid("grid has no mass".into()));
        }
        Ok(Self {
            grid,
            marginal_cdf,
            conditional_cdf: vec![None; w],
        })
    }

    fn column_cdf(&mut self, u: usize) -> &[f64] {
        let (w, h) = (self.grid.width(), self.grid.height());
        let mass = self.grid.mass();
        self.conditional_cdf[u].get_or_insert_with(|| {
            let mut acc = 0.0;
            (0..h)
                .map(|v| {
                    acc += mass[v * w + u];
                    acc
                })
                .collect()
        })
    }

    /// Draws one `(u, v)` pixel index.
    pub fn sample_index(&mut self, rng: &mut SeededRng) -> (usize, usize) {
        let u = invert_cdf(&self.marginal_cdf, rng.next_f64());
        let v = invert_cdf(self.column_cdf(u), rng.next_f64());
        (u, v)
    }
}

/// First index whose cumulative value exceeds `x * total`; zero-mass bins
/// are never returned.
fn invert_cdf(cdf: &[f64], x: f64) -> usize {
    let total = *cdf.last().expect("non-empty cdf");
    let target = x * total;
    let i = cdf.partition_point(|c| *c <= target);
    if i < cdf.len() {
        return i;
    }
    // target reached the total through rounding: take the last bin with mass
    let mut j = cdf.len() - 1;
    while j > 0 && cdf[j - 1] == cdf[j] {
        j -= 1;
    }
    j
}

/// Draws `n` pixel positions. Without jitter the samples sit on pixel
/// centers; with jitter a uniform offset from `[0, 1)²` is shifted by `-0.5`
/// so that it spans the sampled pixel's footprint.
pub fn sample_signals(
    grid: &ProbabilityGrid,
    n: usize,
    rng: &mut SeededRng,
    jitter: bool,
) -> Result<Vec<PixelCoord>> {
    if n == 0 {
        return Err(Error::OutOfRange("sample count must be at least 1".into()));
    }
    let mut sampler = GridSampler::new(grid)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (u, v) = sampler.sample_index(rng);
        let (mut pu, mut pv) = (u as f64, v as f64);
        if jitter {
            pu += rng.next_f64() - 0.5;
            pv += rng.next_f64() - 0.5;
        }
        out.push(PixelCoord::new(pu, pv));
    }
    Ok(out)
}

/// Maps a sigmoid-bounded count prediction back to a signal count:
/// `max(1, round(s * n_max))`.
pub fn denormalize_count(sigmoid_out: f64, n_max: usize) -> Result<usize> {
    if !(sigmoid_out > 0.0 && sigmoid_out < 1.0) {
        return Err(Error::OutOfRange(format!("sigmoid output {sigmoid_out} not in (0, 1)")));
    }
    if n_max == 0 {
        return Err(Error::OutOfRange("n_max must be positive".into()));
    }
    Ok(((sigmoid_out * n_max as f64).round() as usize).max(1))
}
