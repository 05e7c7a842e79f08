use libm::lgamma as ln_gamma;

use crate::error::{MfError, Result};
use crate::geometry::GeometricBounds;

/// Volume of the unit ball in R^d.
pub fn omega_d(d: i64) -> Result<f64> {
    if d < 0 {
        return Err(MfError::invalid(format!("omega_d needs d >= 0, got {d}")));
    }
    let h = d as f64 / 2.0;
    Ok((h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)).exp())
}

/// Scale parameters of the PCA reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionScale {
    pub beta: f64,
    pub big_d: usize,
    pub eps_max: f64,
}

/// beta(alpha), the dimension D and the largest admissible accuracy.
#[allow(non_snake_case)]
pub fn beta_and_D(alpha: f64, bounds: &GeometricBounds) -> Result<ReductionScale> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MfError::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    bounds.validate()?;
    let d = bounds.d as i32;
    let w = omega_d(bounds.d as i64)?;
    let a2t = alpha * alpha * bounds.tau;
    let beta = (0.1 * (a2t / 2.0).powi(2) * (a2t / 4.0).powi(d) * w / bounds.volume).sqrt();
    Ok(ReductionScale {
        beta,
        big_d: dimension_for(beta, bounds.d, bounds.volume)?,
        eps_max: beta * beta / 2.0,
    })
}

/// floor(V / (omega_d beta^d)) + 1
pub fn dimension_for(beta: f64, d: usize, volume: f64) -> Result<usize> {
    let ratio = volume / (omega_d(d as i64)? * beta.powi(d as i32));
    if !ratio.is_finite() || ratio > 1e15 {
        return Err(MfError::numerical(format!("V/(omega_d beta^d) = {ratio} is out of range")));
    }
    Ok(ratio.floor() as usize + 1)
}
