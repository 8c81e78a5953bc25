mod common;

use common::{max_rel_error, mc_bin_power, moments, oracle_density};
use freqdiff::spectral::{
    radial_power_spectrum, sample_complex_field, shape_noise, two_band_noise, FrequencyGrid, NoiseShaper, SpectralWeight,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn per_bin_power_follows_squared_weight() {
    let grid = FrequencyGrid::new(16, 16).unwrap();
    for (i, w) in [
        SpectralWeight::PowerLaw { alpha: -1.0 },
        SpectralWeight::PowerLaw { alpha: 1.0 },
        SpectralWeight::ExpDecay { beta: 1.0 },
        SpectralWeight::ExpDecay { beta: 10.0 },
        SpectralWeight::BandPass { a: 0.2, b: 0.6 },
    ]
    .into_iter()
    .enumerate()
    {
        let measured = mc_bin_power(w, &grid, 20_000, i as u64);
        // w > 0.1 max(w) is w^2 > 0.01 max(w^2).
        let err = max_rel_error(&measured, &oracle_density(&w, &grid), 0.01);
        assert!(err < 0.05, "{w:?}: {err}");
    }
}

#[test]
fn two_band_density_adds_band_variances() {
    let grid = FrequencyGrid::new(16, 16).unwrap();
    for (i, w) in [
        SpectralWeight::two_band(0.7, 0.3, 0.0, 0.5, 0.5, 1.0),
        // Overlapping bands: the overlap carries gl^2 + gh^2.
        SpectralWeight::two_band(0.6, 0.8, 0.0, 0.6, 0.4, 1.0),
    ]
    .into_iter()
    .enumerate()
    {
        let measured = mc_bin_power(w, &grid, 20_000, 10 + i as u64);
        let err = max_rel_error(&measured, &oracle_density(&w, &grid), 0.0);
        assert!(err < 0.05, "{w:?}: {err}");
    }
}

#[test]
fn complex_base_field_is_standard_normal() {
    let grid = FrequencyGrid::new(4, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws: Vec<_> = (0..100_000).map(|_| sample_complex_field(&grid, &mut rng)[5]).collect();
    let (mre, vre, _, _) = moments(&draws.iter().map(|c| c.re).collect::<Vec<_>>());
    let (mim, vim, _, _) = moments(&draws.iter().map(|c| c.im).collect::<Vec<_>>());
    assert!(mre.abs() < 0.01 && mim.abs() < 0.01);
    assert!((vre - 1.0).abs() < 0.02 && (vim - 1.0).abs() < 0.02);
}

#[test]
fn flat_noise_is_white_with_unit_variance() {
    let grid = FrequencyGrid::new(16, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100_000;
    let fields: Vec<Vec<f64>> = (0..n)
        .map(|_| shape_noise(&SpectralWeight::Flat, &grid, &mut rng, true).unwrap().values)
        .collect();
    for p in [0, 17, 255] {
        let (_, var, _, _) = moments(&fields.iter().map(|f| f[p]).collect::<Vec<_>>());
        assert!((var - 1.0).abs() < 0.05, "pixel {p}: {var}");
    }
    for (a, b) in [(0, 1), (17, 33), (100, 200)] {
        let cov = fields.iter().map(|f| f[a] * f[b]).sum::<f64>() / n as f64;
        assert!(cov.abs() < 0.02, "({a},{b}): {cov}");
    }
}

#[test]
fn band_pass_noise_has_no_power_outside_band() {
    let grid = FrequencyGrid::new(32, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = SpectralWeight::BandPass { a: 0.6, b: 0.8 };
    let (mut inside, mut outside) = (0.0, 0.0);
    for _ in 0..200 {
        let f = shape_noise(&w, &grid, &mut rng, true).unwrap().values;
        for (p, &r) in grid.power(&f).unwrap().iter().zip(grid.radial()) {
            if (0.6..=0.8).contains(&r) {
                inside += p;
            } else {
                outside += p;
            }
        }
    }
    assert!(outside < 1e-10 * (inside + outside));
}

#[test]
fn band_pass_spectrum_concentrates_in_overlapping_annuli() {
    let grid = FrequencyGrid::new(32, 32).unwrap();
    let shaper = NoiseShaper::new(SpectralWeight::BandPass { a: 0.2, b: 0.4 }, &grid, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let fields: Vec<Vec<f64>> = (0..500).map(|_| shaper.draw(&mut rng)).collect();
    let bins = radial_power_spectrum(fields.iter().map(Vec::as_slice), &grid, 10).unwrap();
    let total: f64 = bins.iter().map(|b| b.power * b.count as f64).sum();
    // Annuli of width 0.1 overlapping [0.2, 0.4] are bins 2, 3 and 4.
    let inside: f64 = bins[2..=4].iter().map(|b| b.power * b.count as f64).sum();
    assert!(inside > 0.999 * total);
}

#[test]
fn white_special_case_is_flat() {
    let grid = FrequencyGrid::new(16, 16).unwrap();
    let w = SpectralWeight::two_band(0.5, 0.5, 0.0, 0.5, 0.5, 1.0);
    let shaper = NoiseShaper::new(w, &grid, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fields: Vec<Vec<f64>> = (0..10_000).map(|_| shaper.draw(&mut rng)).collect();
    let bins = radial_power_spectrum(fields.iter().map(Vec::as_slice), &grid, 8).unwrap();
    for b in bins.iter().filter(|b| !b.empty) {
        assert!((b.power - 1.0).abs() < 0.05, "{b:?}");
    }
}

#[test]
fn single_active_band_matches_band_pass() {
    let grid = FrequencyGrid::new(16, 16).unwrap();
    let two = SpectralWeight::two_band(1.0, 0.0, 0.0, 0.4, 0.5, 1.0);
    let one = SpectralWeight::BandPass { a: 0.0, b: 0.4 };
    let a = NoiseShaper::new(two, &grid, true).unwrap().density();
    let b = NoiseShaper::new(one, &grid, true).unwrap().density();
    assert_eq!(a, b);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let field = two_band_noise(&two, &grid, &mut rng, true).unwrap();
    assert!(field.values.iter().all(|v| v.is_finite()));
}

#[test]
fn split_power_ratio_follows_gains_and_bin_counts() {
    let grid = FrequencyGrid::new(16, 16).unwrap();
    let w = SpectralWeight::two_band(0.9, 0.1, 0.0, 0.5, 0.5, 1.0);
    let n_low = grid.radial().iter().filter(|&&r| r <= 0.5).count() as f64;
    let n_high = grid.len() as f64 - n_low;
    let expected = (0.81 * n_low) / (0.01 * n_high);
    let power = mc_bin_power(w, &grid, 10_000, 9);
    let (mut low, mut high) = (0.0, 0.0);
    for (p, &r) in power.iter().zip(grid.radial()) {
        if r <= 0.5 {
            low += p;
        } else {
            high += p;
        }
    }
    assert!((low / high / expected - 1.0).abs() < 0.1, "{} vs {expected}", low / high);
}

#[test]
fn shaped_pixels_are_gaussian() {
    let grid = FrequencyGrid::new(8, 8).unwrap();
    for (i, w) in [SpectralWeight::PowerLaw { alpha: -1.0 }, SpectralWeight::BandPass { a: 0.3, b: 0.7 }]
        .into_iter()
        .enumerate()
    {
        let shaper = NoiseShaper::new(w, &grid, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20 + i as u64);
        let xs: Vec<f64> = (0..100_000).map(|_| shaper.draw(&mut rng)[9]).collect();
        let (_, _, skew, kurt) = moments(&xs);
        assert!(skew.abs() < 0.05 && kurt.abs() < 0.1, "{w:?}: skew {skew} kurt {kurt}");
    }
}
