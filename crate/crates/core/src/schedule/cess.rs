use crate::error::Result;
use crate::smc::{cess, incremental_logweights, ParticleCloud};

/// Next temperature at which the conditional ESS of the move from `cloud`
/// equals `target` (an absolute particle count), by bisection to 1e-10.
/// Returns 1 when even the jump to 1 keeps the CESS at or above `target`.
pub fn cess_next_phi(cloud: &ParticleCloud, target: f64) -> Result<f64> {
    let at = |phi: f64| cess(&cloud.log_weights, &incremental_logweights(cloud, phi));
    if at(1.0)? >= target {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (cloud.phi, 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
