use crate::error::{Error, Result};
use crate::models::GaussianLinearModel;
use crate::numutil::mvn_sample;
use crate::rng::SmcRng;

/// One draw from the tempered target of a linear-Gaussian model,
/// independent of the particle's current position.
pub fn perfect_gaussian_kernel(rng: &mut SmcRng, m: &GaussianLinearModel, phi: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::usage(format!("phi = {phi} outside [0, 1]")));
    }
    let target = m.perfect_mixing_params(phi)?;
    Ok(mvn_sample(rng, &target)?.as_slice().to_vec())
}
