use freqdiff::corruption::{corrupt, CorruptionSpec};
use freqdiff::data::{read_fdds, write_fdds, Dataset, DatasetMeta};
use freqdiff::denoiser::epoch_order;
use freqdiff::metrics::fid;
use freqdiff::spectral::{FrequencyGrid, NoiseShaper, SpectralWeight, TwoBand};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn weight_strategy() -> impl Strategy<Value = SpectralWeight> {
    prop_oneof![
        Just(SpectralWeight::Flat),
        (-2.0f64..2.0).prop_map(|alpha| SpectralWeight::PowerLaw { alpha }),
        (0.1f64..20.0).prop_map(|beta| SpectralWeight::ExpDecay { beta }),
        (0.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y)| SpectralWeight::BandPass { a: x.min(y), b: x.max(y) }),
        (0.05f64..0.95).prop_map(|g| SpectralWeight::TwoBand(TwoBand::standard_split(g))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn radial_grid_is_bounded_and_conjugate_symmetric(h in 2usize..24, w in 2usize..24) {
        let grid = FrequencyGrid::new(h, w).unwrap();
        let r = grid.radial();
        prop_assert_eq!(r[0], 0.0);
        prop_assert!(r.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(r.iter().any(|&v| (v - 1.0).abs() < 1e-12));
        for i in 0..grid.len() {
            prop_assert_eq!(r[i], r[grid.conjugate_index(i)]);
        }
    }

    #[test]
    fn fft_round_trip(h in 2usize..12, w in 2usize..12, seed in any::<u64>()) {
        let grid = FrequencyGrid::new(h, w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img: Vec<f64> = (0..h * w).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let back = grid.fft().inverse_real(grid.fft().forward_real(&img));
        for (a, b) in img.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // Parseval under the orthonormal convention.
        let e: f64 = img.iter().map(|v| v * v).sum();
        let p: f64 = grid.power(&img).unwrap().iter().sum();
        prop_assert!((e - p).abs() < 1e-9 * e.max(1.0));
    }

    #[test]
    fn shaped_noise_is_finite_and_seed_deterministic(weight in weight_strategy(), seed in any::<u64>()) {
        let grid = FrequencyGrid::new(12, 10).unwrap();
        let shaper = NoiseShaper::new(weight, &grid, true).unwrap();
        let a = shaper.draw_seeded(seed);
        let b = shaper.draw_seeded(seed);
        prop_assert!(a.values.iter().all(|v| v.is_finite()));
        prop_assert_eq!(&a.values, &b.values);
        if !shaper.is_zero() {
            let mean = shaper.density().iter().sum::<f64>() / grid.len() as f64;
            prop_assert!((mean - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gain_corruption_is_identity(a in 0.0f64..1.0, len in 0.0f64..0.5, seed in any::<u64>()) {
        let grid = FrequencyGrid::new(8, 8).unwrap();
        let spec = CorruptionSpec::new(0.0, a, (a + len).min(1.0)).unwrap();
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = corrupt(&x, &spec, &grid, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn fdds_round_trip_is_bit_exact(n in 1usize..6, h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px: Vec<f32> = (0..n * h * w).map(|_| rand::Rng::random_range(&mut rng, -1.0f32..1.0)).collect();
        let labels: Vec<u8> = (0..n as u8).collect();
        let data = Dataset::new(DatasetMeta::new("p", "proptest").with_seed(seed), h, w, px, Some(labels)).unwrap();
        let mut buf = Vec::new();
        write_fdds(&mut buf, &data).unwrap();
        let back = read_fdds(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.raw(), data.raw());
        prop_assert_eq!(back.labels(), data.labels());
        prop_assert_eq!(back.meta(), data.meta());
    }

    #[test]
    fn standard_split_partitions_every_bin(g in 0.0f64..1.0, h in 2usize..20) {
        let grid = FrequencyGrid::new(h, h).unwrap();
        let tb = TwoBand::standard_split(g);
        let (lo, hi) = (tb.low_band(), tb.high_band());
        for &r in grid.radial() {
            prop_assert!(lo.contains(r) != hi.contains(r));
        }
    }

    #[test]
    fn fid_is_symmetric_and_non_negative(seed in any::<u64>(), n in 4usize..20, m in 4usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |k: usize, s: f64| -> Vec<Vec<f64>> {
            (0..k).map(|_| (0..3).map(|_| s * rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).collect()
        };
        let a = draw(n, 1.0);
        let b = draw(m, 2.0);
        let ab = fid(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - fid(&b, &a).unwrap()).abs() < 1e-8 * ab.max(1.0));
    }

    #[test]
    fn epoch_order_is_a_permutation(n in 1usize..40, seed in any::<u64>(), epoch in 0usize..5) {
        let data: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let mut order = epoch_order(&data, seed, epoch);
        order.sort_unstable();
        prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
    }
}
