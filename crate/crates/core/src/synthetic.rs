//! Gaussian blob datasets for smoke tests and demos.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Standard normal draw (Box-Muller).
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

/// `per_class` unit-variance samples around each of `classes` centres. Centre
/// `k` is `separation` on every feature `j` with `j % classes == k` and 0
/// elsewhere, so distinct centres are at least `separation * sqrt(2)` apart.
/// Labels are `blob0`, `blob1`, ...; rows are grouped by class.
pub fn gaussian_blobs(
    per_class: usize,
    classes: usize,
    features: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes == 0 || features < classes {
        return Err(Error::Config(format!(
            "need 1 <= classes <= features, got {classes} classes and {features} features"
        )));
    }
    let mut rng = crate::seeded_rng(seed);
    let mut data = Vec::with_capacity(per_class * classes * features);
    let mut labels = Vec::with_capacity(per_class * classes);
    for k in 0..classes {
        for _ in 0..per_class {
            for j in 0..features {
                let centre = if j % classes == k { separation } else { 0.0 };
                data.push(centre + standard_normal(&mut rng));
            }
            labels.push(format!("blob{k}"));
        }
    }
    Dataset::new(
        Tensor::new(vec![labels.len(), features], data)?,
        labels,
        format!("gaussian_blobs(seed={seed})"),
        (0..features)
            .map(|j| format!("f{j}"))
            .collect::<Vec<String>>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_labels() {
        let ds = gaussian_blobs(4, 3, 5, 5.0, 1).unwrap();
        assert_eq!(ds.features.shape(), &[12, 5]);
        assert_eq!(ds.raw_labels[4], "blob1");
        assert!(gaussian_blobs(4, 6, 5, 5.0, 1).is_err());
    }

    #[test]
    fn normal_draws_have_unit_scale() {
        let mut rng = crate::seeded_rng(4);
        let xs: Vec<f64> = (0..20_000).map(|_| standard_normal(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(
            mean.abs() < 0.03 && (var - 1.0).abs() < 0.05,
            "{mean} {var}"
        );
    }
}
