//! Camera simulation: dark offset, PSF blur, shot noise, read noise.

use ndarray::{Array2, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::gaussian_blur;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionParams {
    /// Constant added before blurring, normalized units.
    pub dark_offset: f64,
    /// PSF approximation width in pixels.
    pub psf_sigma: f64,
    /// Photons collected at unit intensity.
    pub photon_scale: f64,
    /// Read-noise standard deviation, normalized units.
    pub gaussian_sigma: f64,
    pub enable_dark: bool,
    pub enable_blur: bool,
    pub enable_poisson: bool,
    pub enable_gaussian: bool,
}

impl Default for AcquisitionParams {
    fn default() -> Self {
        AcquisitionParams {
            dark_offset: 0.02,
            psf_sigma: 1.0,
            photon_scale: 1000.0,
            gaussian_sigma: 0.001,
            enable_dark: true,
            enable_blur: true,
            enable_poisson: true,
            enable_gaussian: true,
        }
    }
}

impl AcquisitionParams {
    /// Every step switched off.
    pub fn disabled() -> Self {
        AcquisitionParams {
            enable_dark: false,
            enable_blur: false,
            enable_poisson: false,
            enable_gaussian: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("dark_offset", self.dark_offset),
            ("psf_sigma", self.psf_sigma),
            ("photon_scale", self.photon_scale),
            ("gaussian_sigma", self.gaussian_sigma),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "acquisition.{name} must be finite and nonnegative"
                )));
            }
        }
        if self.dark_offset > 1.0 {
            return Err(Error::InvalidConfig(
                "acquisition.dark_offset must be ≤ 1".into(),
            ));
        }
        if self.enable_poisson && self.photon_scale <= 0.0 {
            return Err(Error::InvalidConfig(
                "acquisition.photon_scale must be positive when shot noise is enabled".into(),
            ));
        }
        Ok(())
    }
}

/// Runs the enabled steps in order: dark offset, blur (reflective
/// borders), Poisson shot noise, Gaussian read noise, clamp to [0, 1].
pub fn apply_acquisition<R: Rng + ?Sized>(
    image: &Array2<f64>,
    params: &AcquisitionParams,
    rng: &mut R,
) -> Array2<f64> {
    let mut out = image.clone();
    if params.enable_dark {
        out.mapv_inplace(|v| v + params.dark_offset);
    }
    if params.enable_blur && params.psf_sigma > 0.0 {
        out = gaussian_blur(&out, params.psf_sigma);
    }
    if params.enable_poisson {
        let scale = params.photon_scale;
        out.mapv_inplace(|v| {
            let lambda = v * scale;
            if lambda > 0.0 {
                let count: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
                count / scale
            } else {
                0.0
            }
        });
    }
    if params.enable_gaussian && params.gaussian_sigma > 0.0 {
        let noise = Normal::new(0.0, params.gaussian_sigma).expect("finite sigma");
        out.mapv_inplace(|v| v + noise.sample(rng));
    }
    out.mapv_inplace(|v| v.clamp(0.0, 1.0));
    out
}

/// Peak signal-to-noise ratio in dB for signals in [0, 1].
pub fn psnr(clean: &Array2<f64>, noisy: &Array2<f64>) -> f64 {
    let mse = Zip::from(clean)
        .and(noisy)
        .fold(0.0, |acc, a, b| acc + (a - b).powi(2))
        / clean.len() as f64;
    10.0 * (1.0 / mse).log10()
}
