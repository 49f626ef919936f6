//! Bandit linear optimization by mirror descent with the entropic barrier.
//!
//! With mirror map `f*`, the update `∇f*(x_{t+1}) = ∇f*(x_t) - η ĉ_t` reads
//! `θ_{t+1} = θ_t - η ĉ_t` in the dual, and playing `x_t ~ p_{θ_t}` is
//! continuous exponential weights with density `∝ exp⟨θ_0 - η Σ_{s<t} ĉ_s, x⟩`.
//! The loss `⟨c_t, x_t⟩` is the only feedback; `ĉ_t = y_t S_t⁻¹ (x_t - m_t)` is
//! unbiased for `c_t` when `m_t, S_t` are the mean and covariance of the law
//! `x_t` was drawn from.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::ipm::{solve_lp, SolveStatus};
use crate::linalg::{condition_number, spd_inverse};
use crate::logpartition::{base_body, moments_with, Backend};
use crate::sampling::{derive_seed, SamplerChain};
use crate::special::truncated_exp_quantile;

/// Covariances with a larger condition number flag the round.
pub const MAX_CONDITION: f64 = 1e12;
/// Exploration weight used in flagged rounds when `μ` is smaller.
pub const FLAGGED_MIXING: f64 = 0.1;
/// Polar-membership slack on `max_K |⟨c, x⟩| <= 1`.
const POLAR_SLACK: f64 = 1e-12;

/// Oblivious cost sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Adversary {
    Zero,
    Fixed { cost: Vec<f64> },
    /// One cost vector per round.
    Sequence { costs: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// Only `y_t = ⟨c_t, x_t⟩` is observed.
    #[default]
    Bandit,
    /// `ĉ_t = c_t`; a reference for the bandit runs.
    FullInformation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditConfig {
    pub body: ConvexBody,
    pub horizon: usize,
    /// Learning rate; `eta_scale · √(n log T / T)` when absent.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "one")]
    pub eta_scale: f64,
    pub adversary: Adversary,
    /// Exploration weight in `[0, 1)`.
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub mixing: Mixing,
    #[serde(default)]
    pub feedback: Feedback,
    /// Moment backend; the applicability-table default when absent.
    #[serde(default)]
    pub backend: Option<Backend>,
    #[serde(default)]
    pub seed: u64,
    /// Hit-and-run steps per round for bodies without exact sampling; `10 n` when absent.
    #[serde(default)]
    pub chain_steps: Option<usize>,
    /// Keep per-round records.
    #[serde(default = "yes")]
    pub record_rounds: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl BanditConfig {
    pub fn new(body: ConvexBody, horizon: usize, adversary: Adversary, seed: u64) -> Self {
        BanditConfig {
            body,
            horizon,
            eta: None,
            eta_scale: 1.0,
            adversary,
            mu: 0.0,
            mixing: Mixing::Uniform,
            feedback: Feedback::Bandit,
            backend: None,
            seed,
            chain_steps: None,
            record_rounds: true,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.eta.unwrap_or_else(|| {
            let n = self.body.dim() as f64;
            let t = self.horizon as f64;
            self.eta_scale * (n * t.ln().max(1.0) / t).sqrt()
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend.clone().unwrap_or_else(|| Backend::default_for(&self.body))
    }

    /// Checks parameters and that every cost lies in the polar body.
    pub fn validate(&self) -> Result<()> {
        let n = self.body.dim();
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let eta = self.learning_rate();
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {eta}")));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::InvalidArgument(format!("mu must lie in [0, 1), got {}", self.mu)));
        }
        if self.chain_steps == Some(0) {
            return Err(Error::InvalidArgument("chain_steps must be positive".into()));
        }
        self.backend().check_applicable(&self.body)?;
        let costs: Vec<&Vec<f64>> = match &self.adversary {
            Adversary::Zero => vec![],
            Adversary::Fixed { cost } => vec![cost],
            Adversary::Sequence { costs } => {
                if costs.len() != self.horizon {
                    return Err(Error::InvalidArgument(format!(
                        "adversary lists {} costs for horizon {}",
                        costs.len(),
                        self.horizon
                    )));
                }
                costs.iter().collect()
            }
        };
        for (i, c) in costs.into_iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.len() });
            }
            let c = DVector::from_column_slice(c);
            let reach = self.body.support(&c).max(self.body.support(&-&c));
            if !(reach <= 1.0 + POLAR_SLACK) {
                return Err(Error::InvalidArgument(format!(
                    "cost {i} is outside the polar body: max |<c, x>| = {reach}"
                )));
            }
        }
        Ok(())
    }

    fn cost(&self, round: usize) -> DVector<f64> {
        let n = self.body.dim();
        match &self.adversary {
            Adversary::Zero => DVector::zeros(n),
            Adversary::Fixed { cost } => DVector::from_column_slice(cost),
            Adversary::Sequence { costs } => DVector::from_column_slice(&costs[round]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub theta: Vec<f64>,
    pub mean: Vec<f64>,
    pub action: Vec<f64>,
    pub loss: f64,
    pub estimate: Vec<f64>,
    pub cumulative_loss: f64,
    /// Near-singular covariance; exploration was raised for this round.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BanditTrace {
    pub records: Vec<RoundRecord>,
    pub horizon: usize,
    pub eta: f64,
    pub seed: u64,
    pub final_theta: Vec<f64>,
    pub cumulative_loss: f64,
    /// `min_K ⟨Σ_t c_t, x⟩` from the interior-point solver.
    pub best_fixed_loss: f64,
    /// `R_T = Σ_t ⟨c_t, x_t⟩ - min_K ⟨Σ_t c_t, x⟩`.
    pub regret: f64,
    /// `R_T / √(T log T)`.
    pub normalized_regret: f64,
    pub flagged_rounds: usize,
}

/// How actions are drawn.
enum Sampler<'a> {
    /// Independent coordinates of a box (possibly under an affine map).
    ExactBox { lower: DVector<f64>, upper: DVector<f64>, map: Option<(DMatrix<f64>, DVector<f64>)> },
    Chain { tilted: SamplerChain<'a>, uniform: SamplerChain<'a>, steps: usize },
}

/// `θ`, the sampler and the per-run constants.
pub struct Learner<'a> {
    config: &'a BanditConfig,
    backend: Backend,
    eta: f64,
    theta: DVector<f64>,
    sampler: Sampler<'a>,
    rng: ChaCha8Rng,
    uniform_mean: DVector<f64>,
    uniform_second: DMatrix<f64>,
    cumulative_loss: f64,
    round: usize,
}

impl<'a> Learner<'a> {
    pub fn new(config: &'a BanditConfig) -> Result<Self> {
        config.validate()?;
        let body = &config.body;
        let n = body.dim();
        let backend = config.backend();
        let sampler = match (body, base_body(body)) {
            (ConvexBody::AxisBox(b), _) => {
                Sampler::ExactBox { lower: b.lower().clone(), upper: b.upper().clone(), map: None }
            }
            (ConvexBody::AffineImage(img), ConvexBody::AxisBox(b)) if matches!(img.inner(), ConvexBody::AxisBox(_)) => {
                Sampler::ExactBox {
                    lower: b.lower().clone(),
                    upper: b.upper().clone(),
                    map: Some((img.matrix().clone(), img.shift().clone())),
                }
            }
            _ => Sampler::Chain {
                tilted: SamplerChain::new(body, DVector::zeros(n), None, derive_seed(config.seed, 1))?,
                uniform: SamplerChain::new(body, DVector::zeros(n), None, derive_seed(config.seed, 2))?,
                steps: config.chain_steps.unwrap_or(10 * n),
            },
        };
        let uniform = moments_with(body, &DVector::zeros(n), None, &backend, false)?;
        let uniform_second = &uniform.covariance + &uniform.mean * uniform.mean.transpose();
        Ok(Learner {
            config,
            eta: config.learning_rate(),
            backend,
            theta: DVector::zeros(n),
            sampler,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0)),
            uniform_mean: uniform.mean,
            uniform_second,
            cumulative_loss: 0.0,
            round: 0,
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Draws from `p_θ` (`uniform = false`) or the uniform law on the body.
    fn draw(&mut self, uniform: bool) -> Result<DVector<f64>> {
        match &mut self.sampler {
            Sampler::ExactBox { lower, upper, map } => {
                let tilt = match map {
                    Some((m, _)) => m.transpose() * &self.theta,
                    None => self.theta.clone(),
                };
                let inner = DVector::from_fn(lower.len(), |i, _| {
                    let rate = if uniform { 0.0 } else { tilt[i] };
                    truncated_exp_quantile(lower[i], upper[i], rate, self.rng.random::<f64>())
                });
                Ok(match map {
                    Some((m, s)) => &*m * inner + &*s,
                    None => inner,
                })
            }
            Sampler::Chain { tilted, uniform: flat, steps } => {
                let chain = if uniform { flat } else { tilted };
                if !uniform {
                    chain.set_theta(self.theta.clone());
                }
                chain.advance(*steps)?;
                Ok(chain.current().clone())
            }
        }
    }

    /// Overrides the current dual iterate.
    pub fn set_theta(&mut self, theta: DVector<f64>) {
        self.theta = theta;
    }

    /// Draws an action at the current `θ` and forms the loss estimate for
    /// `cost` without updating `θ`.
    pub fn observe(&mut self, cost: &DVector<f64>) -> Result<Observation> {
        let report = moments_with(&self.config.body, &self.theta, None, &self.backend, false)?;
        let flagged = condition_number(&report.covariance) > MAX_CONDITION;
        let mu = if flagged { self.config.mu.max(FLAGGED_MIXING) } else { self.config.mu };
        let explore = mu > 0.0 && self.rng.random::<f64>() < mu;
        let action = self.draw(explore)?;
        let loss = cost.dot(&action);
        let estimate = match self.config.feedback {
            Feedback::FullInformation => cost.clone(),
            Feedback::Bandit => {
                // mean and covariance of the mixture actually sampled
                let second = &report.covariance + &report.mean * report.mean.transpose();
                let mean = &report.mean * (1.0 - mu) + &self.uniform_mean * mu;
                let second = second * (1.0 - mu) + &self.uniform_second * mu;
                let cov = second - &mean * mean.transpose();
                spd_inverse(&cov)? * (&action - &mean) * loss
            }
        };
        Ok(Observation { mean: report.mean, action, loss, estimate, flagged })
    }

    /// Plays one round against the hidden cost `cost`.
    pub fn play_round(&mut self, cost: &DVector<f64>) -> Result<RoundRecord> {
        let obs = self.observe(cost)?;
        let record = RoundRecord {
            round: self.round,
            theta: self.theta.iter().copied().collect(),
            mean: obs.mean.iter().copied().collect(),
            action: obs.action.iter().copied().collect(),
            loss: obs.loss,
            estimate: obs.estimate.iter().copied().collect(),
            cumulative_loss: self.cumulative_loss + obs.loss,
            flagged: obs.flagged,
        };
        self.cumulative_loss += obs.loss;
        self.theta -= &obs.estimate * self.eta;
        self.round += 1;
        Ok(record)
    }
}

/// One draw and its loss estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub mean: DVector<f64>,
    pub action: DVector<f64>,
    pub loss: f64,
    pub estimate: DVector<f64>,
    pub flagged: bool,
}

/// Runs `T` rounds from `θ_0 = 0` and scores them against the best fixed action.
pub fn run_experiment(config: &BanditConfig) -> Result<BanditTrace> {
    let mut learner = Learner::new(config)?;
    let n = config.body.dim();
    let mut records = Vec::new();
    let mut total_cost = DVector::zeros(n);
    let mut flagged = 0;
    for t in 0..config.horizon {
        let cost = config.cost(t);
        let record = learner.play_round(&cost)?;
        flagged += usize::from(record.flagged);
        total_cost += &cost;
        if config.record_rounds {
            records.push(record);
        }
    }
    let best = best_fixed_loss(&config.body, &total_cost, &learner.backend)?;
    let regret = learner.cumulative_loss - best;
    let t = config.horizon as f64;
    Ok(BanditTrace {
        records,
        horizon: config.horizon,
        eta: learner.eta,
        seed: config.seed,
        final_theta: learner.theta.iter().copied().collect(),
        cumulative_loss: learner.cumulative_loss,
        best_fixed_loss: best,
        regret,
        normalized_regret: regret / (t * t.ln().max(f64::MIN_POSITIVE)).sqrt(),
        flagged_rounds: flagged,
    })
}

/// `min_K ⟨C, x⟩` by path following to relative accuracy `1e-8`.
fn best_fixed_loss(body: &ConvexBody, total: &DVector<f64>, backend: &Backend) -> Result<f64> {
    if total.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let epsilon = 1e-8 * (total.norm() * body.diameter()).max(1.0);
    let (x, trace) = solve_lp(body, total, epsilon, backend)?;
    if trace.status != SolveStatus::Converged {
        return Err(Error::Numerical(format!(
            "regret comparator did not converge: {}",
            trace.message.unwrap_or_default()
        )));
    }
    Ok(total.dot(&x))
}
