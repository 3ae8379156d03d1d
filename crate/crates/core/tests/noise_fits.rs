use ultrasynth_core::noise::{
    fit_ascan_model, fit_invgauss, invgauss_cdf, sample_invgauss, synth_ascan_noise_volume, AScanNoiseModel,
    InvGaussParams,
};
use ultrasynth_core::Rng;

fn ks(samples: &mut [f64], p: &InvGaussParams) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = invgauss_cdf(x, p);
            (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

fn measured() -> InvGaussParams {
    InvGaussParams::new(0.410, -0.003, 0.066).unwrap()
}

#[test]
fn invgauss_round_trip() {
    let truth = measured();
    let mut rng = Rng::new(21);
    let mut xs: Vec<f64> = (0..100_000).map(|_| sample_invgauss(&truth, &mut rng)).collect();
    let fit = fit_invgauss(&xs).unwrap();
    assert!((fit.mu / truth.mu - 1.0).abs() < 0.05, "{fit:?}");
    assert!((fit.scale / truth.scale - 1.0).abs() < 0.05, "{fit:?}");
    assert!((fit.loc - truth.loc).abs() < 0.005, "{fit:?}");
    let d = ks(&mut xs, &truth);
    assert!(d < 0.01, "KS {d}");
}

#[test]
fn invgauss_error_shrinks_with_sample_size() {
    let truth = measured();
    let mut errors = Vec::new();
    for n in [1_000, 10_000, 100_000] {
        // Average over a few seeds so one lucky small sample cannot win.
        let mut total = 0.0;
        for seed in 0..4 {
            let mut rng = Rng::stream(seed, n as u64);
            let xs: Vec<f64> = (0..n).map(|_| sample_invgauss(&truth, &mut rng)).collect();
            let fit = fit_invgauss(&xs).unwrap();
            total += (fit.mu / truth.mu - 1.0).abs() + (fit.scale / truth.scale - 1.0).abs();
        }
        errors.push(total / 4.0);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn ascan_round_trip() {
    // Offset the profile away from zero so the clamp does not bias the fit.
    let mut truth = AScanNoiseModel::reference(256);
    for m in &mut truth.mean_structural {
        *m += 0.05;
    }
    let mut rng = Rng::new(8);
    let volumes: Vec<_> = (0..4)
        .map(|_| synth_ascan_noise_volume(&truth, 64, &mut rng).unwrap())
        .collect();
    let fit = fit_ascan_model(&volumes, None).unwrap();
    let rel = |a: f64, b: f64| (a / b - 1.0).abs();
    assert!(rel(fit.random_sigma, truth.random_sigma) < 0.05, "{fit:?}");
    assert!(rel(fit.structural_dev_sigma, truth.structural_dev_sigma) < 0.05, "{}", fit.structural_dev_sigma);
}
