//! Deterministic DDIM sampling driven by closed-form denoisers.
//!
//! Each step predicts the noise, forms the clean estimate
//! `x0_hat = (x_t - sqrt(1 - a_t) eps) / sqrt(a_t)` and moves to
//! `x_prev = sqrt(a_prev) x0_hat + sqrt(1 - a_prev) eps` with no fresh noise.
//! Guidance is not modelled: the denoisers here are unconditional.

mod denoiser;
mod experiment;
mod schedule;

pub use denoiser::{
    gaussian_oracle_denoiser, mixture_oracle_denoiser, Denoiser, GaussianOracle, MixtureComponent,
    MixtureModel, MixtureOracle, PixelDenoiser, Timestep,
};
pub use experiment::{
    run_chroma_experiment, ChromaExperiment, ExperimentOutcome, ExperimentReport,
};
pub use schedule::{BetaSchedule, NoiseSchedule, SamplerConfig, Transition};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::NoiseTensor;

pub fn ddim_sample<T: Scalar, D: Denoiser<T> + ?Sized>(
    denoiser: &D,
    z_t: &NoiseTensor<T>,
    cfg: &SamplerConfig,
) -> Result<NoiseTensor<T>> {
    let schedule = NoiseSchedule::new(cfg)?;
    ddim_sample_with(denoiser, z_t, &schedule)
}

pub fn ddim_sample_with<T: Scalar, D: Denoiser<T> + ?Sized>(
    denoiser: &D,
    z_t: &NoiseTensor<T>,
    schedule: &NoiseSchedule,
) -> Result<NoiseTensor<T>> {
    let mut x = z_t.values().to_vec();
    for (step, tr) in schedule.transitions().enumerate() {
        let eps = denoiser.predict_noise(
            &x,
            Timestep {
                index: tr.t,
                alpha_bar: tr.alpha_bar,
            },
        );
        if eps.len() != x.len() {
            return Err(Error::ShapeMismatch(format!(
                "denoiser returned {} values for a field of {}",
                eps.len(),
                x.len()
            )));
        }
        let sqrt_a = T::from_f64_lossy(tr.alpha_bar.sqrt());
        let sqrt_1ma = T::from_f64_lossy((1.0 - tr.alpha_bar).sqrt());
        let sqrt_ap = T::from_f64_lossy(tr.alpha_bar_prev.sqrt());
        let sqrt_1map = T::from_f64_lossy((1.0 - tr.alpha_bar_prev).sqrt());
        for (xi, &e) in x.iter_mut().zip(&eps) {
            let x0_hat = (*xi - sqrt_1ma * e) / sqrt_a;
            *xi = sqrt_ap * x0_hat + sqrt_1map * e;
            if !xi.is_finite() {
                return Err(Error::NumericalFailure { step });
            }
        }
    }
    Ok(NoiseTensor::derived_unchecked(
        z_t.height(),
        z_t.width(),
        z_t.channels(),
        x,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::sample_standard_noise;

    struct Exploding;

    impl PixelDenoiser<f64> for Exploding {
        fn epsilon(&self, _x: f64, alpha_bar: f64) -> f64 {
            if alpha_bar < 0.5 {
                1e308
            } else {
                0.0
            }
        }
    }

    struct Truncating;

    impl Denoiser<f32> for Truncating {
        fn predict_noise(&self, sample: &[f32], _t: Timestep) -> Vec<f32> {
            vec![0.0; sample.len() - 1]
        }
    }

    #[test]
    fn non_finite_reports_step() {
        let z = sample_standard_noise::<f64>(1, 4, 4, 1).unwrap();
        match ddim_sample(&Exploding, &z, &SamplerConfig::default()) {
            Err(Error::NumericalFailure { step }) => assert_eq!(step, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_output_length_rejected() {
        let z = sample_standard_noise::<f32>(1, 4, 4, 1).unwrap();
        assert!(matches!(
            ddim_sample(&Truncating, &z, &SamplerConfig::default()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn deterministic_bitwise() {
        let z = sample_standard_noise::<f32>(3, 8, 8, 4).unwrap();
        let d = mixture_oracle_denoiser(MixtureModel::symmetric_bimodal(3.0, 0.5).unwrap());
        let a = ddim_sample(&d, &z, &SamplerConfig::default()).unwrap();
        let b = ddim_sample(&d, &z, &SamplerConfig::default()).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.shape(), z.shape());
    }

    #[test]
    fn identity_gain_increases_with_steps() {
        // Step counts dividing the training horizon, so every schedule starts
        // at the same relative depth.
        let mut last = 0.0;
        for s in [
            2, 4, 5, 8, 10, 20, 25, 40, 50, 100, 125, 200, 250, 500, 1000,
        ] {
            let g = NoiseSchedule::new(&SamplerConfig::default().with_sample_steps(s))
                .unwrap()
                .identity_gain();
            assert!(g > last && g < 1.0, "S={s}: {g}");
            last = g;
        }
    }
}
