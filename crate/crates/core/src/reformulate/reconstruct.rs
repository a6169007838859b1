//! Reconstruction of the uncertainty set around an incumbent solution.

use crate::calibrate::calibrate_size;
use crate::error::{invalid, Error, Result};
use crate::model::{CcpSpec, Dataset};
use crate::shapes::{transform_values, PredictionSet, Shape};

/// The set `{xi : g_j(x_hat; xi) <= b_j + s k_j for all j}` with `s` calibrated on the
/// Phase-2 values of `max_j (g_j(x_hat; xi) - b_j) / k_j`. The calibrated `s` is the
/// reported `rho`; `rho <= 0` means `x_hat` itself satisfies the reconstructed constraint.
pub fn build_reconstruction_set(
    x_hat: &[f64],
    spec: &CcpSpec,
    scales: &[f64],
    phase2: &Dataset,
    epsilon: f64,
    delta: f64,
) -> Result<PredictionSet> {
    spec.validate()?;
    if !spec.family.is_linear() {
        return Err(Error::UnsupportedCombination {
            family: spec.family.name().into(),
            shape: "scaled_halfspaces".into(),
            supported: "reconstruction supports the single and joint linear families".into(),
        });
    }
    let d = spec.d();
    let l = spec.family.linear_rows();
    if x_hat.len() != d {
        return invalid("incumbent has the wrong dimension");
    }
    if scales.len() != l {
        return invalid(format!("expected {l} scales, got {}", scales.len()));
    }
    if let Some(k) = scales.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidScale(format!("scale {k} is not positive")));
    }
    let m = spec.data_dim();
    let normals = (0..l)
        .map(|j| {
            let mut a = vec![0.0; m];
            a[j * d..(j + 1) * d].copy_from_slice(x_hat);
            a
        })
        .collect();
    let shape = Shape::ScaledHalfspaces {
        normals,
        offsets: spec.rhs.clone(),
        scales: scales.to_vec(),
    };
    let values = transform_values(&shape, phase2)?;
    let calib = calibrate_size(&values, epsilon, delta)?;
    Ok(PredictionSet {
        shape,
        size: calib.s,
        calib: Some(calib),
    })
}

/// Size covering `ceil(n (1 - epsilon))` of the given points: that order statistic of
/// their transform values.
pub fn covering_size(shape: &Shape, data: &Dataset, epsilon: f64) -> Result<f64> {
    crate::model::check_probability("epsilon", epsilon)?;
    let mut values = transform_values(shape, data)?;
    if values.is_empty() {
        return invalid("covering size needs at least one point");
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = ((n as f64) * (1.0 - epsilon) - 1e-9)
        .ceil()
        .clamp(1.0, n as f64) as usize;
    Ok(values[rank - 1])
}
