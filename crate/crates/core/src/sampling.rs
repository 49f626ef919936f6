//! Hit-and-run sampling from `p_θ(x) ∝ e^{⟨θ,x⟩}` on a convex body.
//!
//! Each step draws a uniformly random direction `d`, intersects the line through
//! the current point with the body and samples the step length exactly from the
//! one-dimensional density `∝ e^{t⟨θ,d⟩}` on the chord by inverse CDF.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::special::truncated_exp_quantile;

/// Chain parameters; `None` picks `burn_in = 100 n²` and `thinning = n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChainParams {
    pub burn_in: Option<usize>,
    pub thinning: Option<usize>,
    pub seed: u64,
}

impl ChainParams {
    pub fn seeded(seed: u64) -> Self {
        ChainParams { burn_in: None, thinning: None, seed }
    }

    pub fn burn_in_for(&self, n: usize) -> usize {
        self.burn_in.unwrap_or(100 * n * n)
    }

    pub fn thinning_for(&self, n: usize) -> usize {
        self.thinning.unwrap_or(n).max(1)
    }
}

/// Seed for the `index`-th derived stream (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform random unit vector.
pub fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let d = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = d.norm();
        if norm > 1e-12 {
            return d / norm;
        }
    }
}

/// Draw from the density `∝ e^{rate t}` on `[lo, hi]`.
pub fn chord_draw<R: Rng + ?Sized>(lo: f64, hi: f64, rate: f64, rng: &mut R) -> f64 {
    truncated_exp_quantile(lo, hi, rate, rng.random::<f64>())
}

/// A hit-and-run chain targeting `p_θ`.
#[derive(Debug, Clone)]
pub struct SamplerChain<'a> {
    body: &'a ConvexBody,
    theta: DVector<f64>,
    current: DVector<f64>,
    rng: ChaCha8Rng,
    steps: u64,
    rejected: u64,
}

impl<'a> SamplerChain<'a> {
    /// Starts at `start`, or at the body's interior point.
    pub fn new(
        body: &'a ConvexBody,
        theta: DVector<f64>,
        start: Option<DVector<f64>>,
        seed: u64,
    ) -> Result<Self> {
        body.check_dim(&theta)?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("theta has non-finite entries".into()));
        }
        let current = match start {
            Some(x) => {
                body.check_dim(&x)?;
                let m = body.margin_unchecked(&x);
                if m <= 0.0 {
                    return Err(Error::NotInterior { distance: m });
                }
                x
            }
            None => body.interior_point(),
        };
        Ok(SamplerChain {
            body,
            theta,
            current,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            rejected: 0,
        })
    }

    pub fn current(&self) -> &DVector<f64> {
        &self.current
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Retargets the chain to a new tilt, keeping its position.
    pub fn set_theta(&mut self, theta: DVector<f64>) {
        self.theta = theta;
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Moves that would have left the strict interior through rounding.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn step(&mut self) -> Result<()> {
        let n = self.current.len();
        let d = random_direction(n, &mut self.rng);
        let (lo, hi) = match self.body.line_intersection(&self.current, &d) {
            Some((lo, hi)) if lo <= 0.0 && hi >= 0.0 && lo < hi => (lo, hi),
            other => {
                return Err(Error::Numerical(format!(
                    "chord failure at step {}: point {:?}, direction {:?}, chord {:?}",
                    self.steps,
                    self.current.as_slice(),
                    d.as_slice(),
                    other
                )))
            }
        };
        let t = chord_draw(lo, hi, self.theta.dot(&d), &mut self.rng);
        let next = &self.current + t * d;
        self.steps += 1;
        if self.body.margin_unchecked(&next) > 0.0 {
            self.current = next;
        } else {
            self.rejected += 1;
        }
        Ok(())
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Points from a single chain together with its counters.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<DVector<f64>>,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub steps: u64,
    pub rejected: u64,
}

/// `count` points after `burn_in` steps, keeping every `thinning`-th.
pub fn sample(
    body: &ConvexBody,
    theta: &DVector<f64>,
    count: usize,
    params: ChainParams,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be positive".into()));
    }
    if params.thinning == Some(0) {
        return Err(Error::InvalidArgument("thinning must be positive".into()));
    }
    let n = body.dim();
    let burn_in = params.burn_in_for(n);
    let thinning = params.thinning_for(n);
    let mut chain = SamplerChain::new(body, theta.clone(), None, params.seed)?;
    chain.advance(burn_in)?;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        chain.advance(thinning)?;
        points.push(chain.current().clone());
    }
    Ok(SampleSet { points, burn_in, thinning, seed: params.seed, steps: chain.steps(), rejected: chain.rejected() })
}

/// As [`sample`] but split over `shards` independent chains seeded with
/// [`derive_seed`]; the output concatenates shards in index order and so does
/// not depend on scheduling.
pub fn sample_sharded(
    body: &ConvexBody,
    theta: &DVector<f64>,
    count: usize,
    params: ChainParams,
    shards: usize,
) -> Result<SampleSet> {
    let shards = shards.clamp(1, count.max(1));
    if shards == 1 {
        return sample(body, theta, count, params);
    }
    let parts: Vec<Result<SampleSet>> = (0..shards)
        .into_par_iter()
        .map(|i| {
            let share = count / shards + usize::from(i < count % shards);
            let p = ChainParams { seed: derive_seed(params.seed, i as u64), ..params };
            sample(body, theta, share, p)
        })
        .collect();
    let n = body.dim();
    let mut out = SampleSet {
        points: Vec::with_capacity(count),
        burn_in: params.burn_in_for(n),
        thinning: params.thinning_for(n),
        seed: params.seed,
        steps: 0,
        rejected: 0,
    };
    for part in parts {
        let part = part?;
        out.points.extend(part.points);
        out.steps += part.steps;
        out.rejected += part.rejected;
    }
    Ok(out)
}

/// Sample mean, covariance and third central moment along `h` with
/// batch-means standard errors.
#[derive(Debug, Clone)]
pub struct SampleMoments {
    pub mean: DVector<f64>,
    pub covariance: nalgebra::DMatrix<f64>,
    pub third: Option<f64>,
    pub mean_se: DVector<f64>,
    pub covariance_se: nalgebra::DMatrix<f64>,
    pub third_se: Option<f64>,
}

fn plain_moments(
    points: &[DVector<f64>],
    h: Option<&DVector<f64>>,
) -> (DVector<f64>, nalgebra::DMatrix<f64>, Option<f64>) {
    let n = points[0].len();
    let k = points.len() as f64;
    let mut mean = DVector::zeros(n);
    for p in points {
        mean += p;
    }
    mean /= k;
    let mut cov = nalgebra::DMatrix::zeros(n, n);
    let mut third = 0.0;
    for p in points {
        let d = p - &mean;
        cov.ger(1.0, &d, &d, 1.0);
        if let Some(h) = h {
            third += h.dot(&d).powi(3);
        }
    }
    (mean, cov / k, h.map(|_| third / k))
}

/// Number of batches used for standard errors.
pub const BATCHES: usize = 20;

pub fn sample_moments(points: &[DVector<f64>], h: Option<&DVector<f64>>) -> Result<SampleMoments> {
    if points.len() < 2 * BATCHES {
        return Err(Error::InvalidArgument(format!(
            "need at least {} points for batch-means errors",
            2 * BATCHES
        )));
    }
    let (mean, covariance, third) = plain_moments(points, h);
    let n = mean.len();
    let size = points.len() / BATCHES;
    let batches: Vec<_> = (0..BATCHES)
        .map(|b| plain_moments(&points[b * size..(b + 1) * size], h))
        .collect();
    let bf = BATCHES as f64;
    let scale = 1.0 / (bf * (bf - 1.0));
    let mut mean_se = DVector::zeros(n);
    let mut covariance_se = nalgebra::DMatrix::zeros(n, n);
    let mut third_se = 0.0;
    let bmean: DVector<f64> = batches.iter().fold(DVector::zeros(n), |a, b| a + &b.0) / bf;
    let bcov: nalgebra::DMatrix<f64> =
        batches.iter().fold(nalgebra::DMatrix::zeros(n, n), |a, b| a + &b.1) / bf;
    let bthird = batches.iter().filter_map(|b| b.2).sum::<f64>() / bf;
    for b in &batches {
        mean_se += (&b.0 - &bmean).map(|v| v * v);
        covariance_se += (&b.1 - &bcov).map(|v| v * v);
        if let Some(t) = b.2 {
            third_se += (t - bthird).powi(2);
        }
    }
    Ok(SampleMoments {
        mean,
        covariance,
        third,
        mean_se: (mean_se * scale).map(f64::sqrt),
        covariance_se: (covariance_se * scale).map(f64::sqrt),
        third_se: h.map(|_| (third_se * scale).sqrt()),
    })
}
