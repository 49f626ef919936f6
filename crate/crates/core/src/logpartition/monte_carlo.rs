use nalgebra::DVector;

use super::{Backend, Raw};
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::sampling::{derive_seed, sample, sample_moments, ChainParams};

fn params(backend: &Backend) -> (usize, ChainParams) {
    match backend {
        Backend::MonteCarlo { samples, burn_in, thinning, seed } => {
            (*samples, ChainParams { burn_in: *burn_in, thinning: *thinning, seed: *seed })
        }
        _ => unreachable!("monte carlo parameters requested for {}", backend.name()),
    }
}

/// `f(θ) = log vol(K) + log E_{U ~ unif(K)} e^{⟨θ,U⟩}` with a delta-method
/// standard error; needs a closed-form volume.
pub(super) fn log_partition(
    body: &ConvexBody,
    theta: &DVector<f64>,
    backend: &Backend,
) -> Result<(f64, f64)> {
    let log_vol = body.log_volume().ok_or_else(|| Error::BackendMismatch {
        backend: backend.name().into(),
        reason: format!("{} has no closed-form volume", body.kind_name()),
    })?;
    let (count, p) = params(backend);
    let uniform = sample(
        body,
        &DVector::zeros(body.dim()),
        count,
        ChainParams { seed: derive_seed(p.seed, 1), ..p },
    )?;
    let exps: Vec<f64> = uniform.points.iter().map(|x| theta.dot(x)).collect();
    let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = exps.len() as f64;
    let w: Vec<f64> = exps.iter().map(|e| (e - top).exp()).collect();
    let mean = w.iter().sum::<f64>() / k;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let se = (var / k).sqrt() / mean;
    Ok((log_vol + top + mean.ln(), se))
}

pub(super) fn moments(
    body: &ConvexBody,
    theta: &DVector<f64>,
    h: Option<&DVector<f64>>,
    backend: &Backend,
) -> Result<(Raw, f64)> {
    let (count, p) = params(backend);
    let set = sample(body, theta, count, p)?;
    let m = sample_moments(&set.points, h)?;
    let (f, f_se) = if body.log_volume().is_some() {
        log_partition(body, theta, backend)?
    } else {
        (f64::NAN, 0.0)
    };
    let err = m
        .mean_se
        .amax()
        .max(m.covariance_se.amax())
        .max(m.third_se.unwrap_or(0.0))
        .max(f_se);
    Ok((Raw { f, mean: m.mean, cov: m.covariance, third: m.third }, err))
}
