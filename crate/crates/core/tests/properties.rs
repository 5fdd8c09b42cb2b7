//! Property tests for the DSP stages, normalization, metrics and the
//! optimizer constraints.

use std::f64::consts::PI;

use modfront_core::filterbank::{mel_edges, mel_init_with};
use modfront_core::learn::{adam_step, ModParams, ParamVector, TrainState};
use modfront_core::metrics::{pr_auc, roc_auc};
use modfront_core::modulation::ModFilterMeta;
use modfront_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn band() -> impl Strategy<Value = (f64, f64)> {
    (0.0..0.5f64, 0.0..0.5f64).prop_filter_map("distinct", |(a, b)| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        (hi - lo > 1e-6).then_some((lo, hi))
    })
}

fn window() -> impl Strategy<Value = Window> {
    prop_oneof![Just(Window::None), Just(Window::Hamming)]
}

fn random_bank(rng: &mut ChaCha8Rng, k: usize, len: usize, stride: usize) -> SincFilterBank {
    let cutoffs = (0..k)
        .map(|_| {
            let a = rng.gen_range(0.0..0.5);
            let b = rng.gen_range(0.0..0.5);
            if a < b {
                (a, b)
            } else {
                (b, a + 1e-3_f64.min(0.5 - a))
            }
        })
        .collect();
    SincFilterBank::new(cutoffs, len, stride, Window::Hamming, 16_000).unwrap()
}

fn map_from(values: Vec<f64>, n_bands: usize, frame_rate: f64) -> TimeFrequencyMap {
    let n_frames = values.len() / n_bands;
    TimeFrequencyMap {
        values,
        n_bands,
        n_frames,
        frame_rate,
        band_edges_hz: vec![(0.0, 1.0); n_bands],
    }
}

/// Magnitude of the `n`-point zero-padded DFT at bin `j`.
fn dft_mag(x: &[f64], n: usize, j: usize) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let ph = -2.0 * PI * (j * i % n) as f64 / n as f64;
        re += v * ph.cos();
        im += v * ph.sin();
    }
    re.hypot(im)
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_symmetric((f1, f2) in band(), len in 2usize..400, w in window()) {
        let g = sinc_kernel(f1, f2, len, w).unwrap();
        for n in 0..len {
            prop_assert!((g[n] - g[len - 1 - n]).abs() <= 1e-12);
        }
    }

    #[test]
    fn tf_decompose_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = random_bank(&mut rng, 4, 32, 3);
        let x1: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(u, v)| a * u + b * v).collect();
        let y1 = tf_decompose(&Waveform::new(x1, 16_000).unwrap(), &bank).unwrap();
        let y2 = tf_decompose(&Waveform::new(x2, 16_000).unwrap(), &bank).unwrap();
        let y = tf_decompose(&Waveform::new(mix, 16_000).unwrap(), &bank).unwrap();
        let scale = y1.values.iter().chain(&y2.values).fold(0.0f64, |m, v| m.max(v.abs())) * (a.abs() + b.abs());
        for i in 0..y.values.len() {
            let expect = a * y1.values[i] + b * y2.values[i];
            prop_assert!((y.values[i] - expect).abs() <= 1e-9 * scale.max(1e-300));
        }
    }

    #[test]
    fn tf_stride_matches_subsampling(seed in any::<u64>(), stride in 1usize..12, n in 64usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = random_bank(&mut rng, 3, 40, stride);
        let dense = SincFilterBank::new(bank.cutoffs().to_vec(), 40, 1, Window::Hamming, 16_000).unwrap();
        let x = Waveform::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), 16_000).unwrap();
        let coarse = tf_decompose(&x, &bank).unwrap();
        let fine = tf_decompose(&x, &dense).unwrap();
        prop_assert_eq!(coarse.n_frames, (n - 40) / stride + 1);
        for k in 0..3 {
            let sub: Vec<f64> = fine.row(k).iter().step_by(stride).copied().collect();
            prop_assert_eq!(coarse.row(k), &sub[..]);
        }
    }

    #[test]
    fn mod_stride_matches_subsampling(seed in any::<u64>(), stride in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = map_from((0..5 * 120).map(|_| rng.gen_range(-1.0..1.0)).collect(), 5, 1600.0);
        let taps: Vec<Vec<f64>> = (0..3).map(|_| (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let coarse = mod_filter(&map, &ModulationLayer::fir(taps.clone(), stride, 1600.0).unwrap()).unwrap();
        let fine = mod_filter(&map, &ModulationLayer::fir(taps, 1, 1600.0).unwrap()).unwrap();
        for m in 0..3 {
            for k in 0..5 {
                let sub: Vec<f64> = fine.row(m, k).iter().step_by(stride).copied().collect();
                prop_assert_eq!(coarse.row(m, k), &sub[..]);
            }
        }
    }

    #[test]
    fn band_permutation_is_equivariant(seed in any::<u64>(), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = map_from((0..6 * 90).map(|_| rng.gen_range(-1.0..1.0)).collect(), 6, 1600.0);
        let mut permuted = map.clone();
        for (dst, &src) in perm.iter().enumerate() {
            permuted.values[dst * 90..(dst + 1) * 90].copy_from_slice(map.row(src));
        }
        let layer = ModulationLayer::sinc(vec![(0.01, 0.1), (0.2, 0.3)], 20, 7, Window::Hamming, 1600.0).unwrap();
        let a = mod_filter(&map, &layer).unwrap();
        let b = mod_filter(&permuted, &layer).unwrap();
        for m in 0..2 {
            for (dst, &src) in perm.iter().enumerate() {
                prop_assert_eq!(b.row(m, dst), a.row(m, src));
            }
        }
    }

    #[test]
    fn sinc_layer_equals_fir_on_materialized_taps(
        cutoffs in proptest::collection::vec(band(), 1..5),
        w in window(),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = map_from((0..3 * 80).map(|_| rng.gen_range(-1.0..1.0)).collect(), 3, 1600.0);
        let sinc = ModulationLayer::sinc(cutoffs, 24, 5, w, 1600.0).unwrap();
        let fir = ModulationLayer::fir(sinc.kernels(), 5, 1600.0).unwrap();
        prop_assert_eq!(
            mod_filter(&map, &sinc).unwrap().values,
            mod_filter(&map, &fir).unwrap().values
        );
    }

    #[test]
    fn weight_norm_is_idempotent(taps in proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, 8), 1..6)) {
        let once = weight_norm(&taps);
        let twice = weight_norm(&once.taps);
        for (a, b) in once.taps.iter().flatten().zip(twice.taps.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn max_pool_commutes_with_relu(
        values in proptest::collection::vec(-2.0..2.0f64, 4 * 50),
        kernel in 1usize..20,
        stride in 1usize..20,
    ) {
        let map = map_from(values, 4, 1600.0);
        let mut relu_map = map.clone();
        rectify_values(&mut relu_map.values, Nonlinearity::Relu);
        let pooled_then = max_pool_baseline(&map, kernel, stride).unwrap().rectify(Nonlinearity::Relu);
        let then_pooled = max_pool_baseline(&relu_map, kernel, stride).unwrap();
        prop_assert_eq!(pooled_then.values, then_pooled.values);
    }

    #[test]
    fn adam_keeps_cutoffs_feasible(seed in any::<u64>(), lr in 1e-4..0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ParamVector {
            tf_cutoffs: vec![0.0, 0.01, 0.2, 0.2002, 0.49, 0.5],
            mod_params: ModParams::Sinc(vec![0.0, 0.1, 0.3, 0.5]),
            norm_affine: vec![],
            head_weights: vec![0.0; 2],
            head_bias: vec![0.0],
        };
        let mut state = TrainState::new(params, lr);
        for _ in 0..20 {
            let mut g = state.params.zeros_like();
            let flat: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-10.0..10.0)).collect();
            g.set_flat(&flat).unwrap();
            adam_step(&mut state, &g).unwrap();
            let p = &state.params;
            for pair in p.tf_cutoffs.chunks(2).chain(p.mod_params.as_slice().chunks(2)) {
                prop_assert!(0.0 <= pair[0] && pair[0] < pair[1] && pair[1] <= 0.5, "{pair:?}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // A tone at a band's mel center dominates that row, and rows whose
    // passband lies more than one transition width away are at least 10 dB
    // below it. Bands narrower than the kernel's resolution still resolve
    // through the argmax because neighbours only see the tone at their edge.
    #[test]
    fn mel_bank_is_selective(k_n in 4usize..60, f_min in 0.0..300.0f64, f_max in 5000.0..8000.0f64, pick in 0.0..1.0f64) {
        let bank = mel_init_with(k_n, 16_000, f_min, f_max, 256, 10, Window::Hamming).unwrap();
        let edges = mel_edges(k_n, f_min, f_max);
        let k = ((k_n - 1) as f64 * pick) as usize;
        let fc = edges[k + 1];
        let x: Vec<f64> = (0..6000).map(|i| (2.0 * PI * fc * i as f64 / 16_000.0).cos()).collect();
        let map = tf_decompose(&Waveform::new(x, 16_000).unwrap(), &bank).unwrap();
        let r: Vec<f64> = (0..k_n).map(|j| rms(map.row(j))).collect();
        let best = (0..k_n).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
        prop_assert_eq!(best, k);
        let transition = 3.3 * 16_000.0 / 256.0;
        for (j, &(lo, hi)) in bank.cutoffs_hz().iter().enumerate() {
            if fc < lo - transition || fc > hi + transition {
                prop_assert!(20.0 * (r[k] / r[j]).log10() >= 10.0, "row {j} vs {k}");
            }
        }
    }
}

#[test]
fn random_bands_meet_stopband_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    const N: usize = 4096;
    // transition margin of the 256-tap Hamming design, as in the 0.05-0.15 example
    let margin = 0.02;
    for _ in 0..20 {
        let f1 = rng.gen_range(0.0..0.4);
        let f2 = rng.gen_range(f1 + 0.04..0.5f64);
        let g = sinc_kernel(f1, f2, 256, Window::Hamming).unwrap();
        let mags: Vec<f64> = (0..=N / 2).map(|j| dft_mag(&g, N, j)).collect();
        let (peak_bin, peak) = mags
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let fp = peak_bin as f64 / N as f64;
        assert!(fp >= f1 && fp <= f2, "peak {fp} outside ({f1}, {f2})");
        for (j, &m) in mags.iter().enumerate() {
            let f = j as f64 / N as f64;
            if f < f1 - margin || f > f2 + margin {
                assert!(20.0 * (m / peak).log10() <= -20.0, "({f1}, {f2}) bin {f}");
            }
        }
    }
}

#[test]
fn instance_norm_standardizes_random_tensors() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let (m, k, t) = (rng.gen_range(1..6), rng.gen_range(1..10), rng.gen_range(2..40));
        let scale = rng.gen_range(0.5..50.0);
        let offset = rng.gen_range(-20.0..20.0);
        let tensor = ModulationTensor {
            values: (0..m * k * t).map(|_| offset + scale * rng.gen_range(-1.0..1.0)).collect(),
            n_filters: m,
            n_bands: k,
            n_frames: t,
            frame_rate_out: 10.0,
            mod_meta: vec![ModFilterMeta::Fir { index: 0 }; m],
        };
        let out = instance_norm(&tensor, 1e-5).unwrap();
        for c in 0..m {
            let ch = out.channel(c);
            let n = ch.len() as f64;
            let mean = ch.iter().sum::<f64>() / n;
            let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let raw = tensor.channel(c);
            let raw_mean = raw.iter().sum::<f64>() / n;
            let raw_var = raw.iter().map(|v| (v - raw_mean) * (v - raw_mean)).sum::<f64>() / n;
            if raw_var < 1e-2 {
                continue;
            }
            assert!(mean.abs() <= 1e-9, "mean {mean}");
            assert!((var - 1.0).abs() <= 1e-4, "var {var}");
        }
    }
}

// The TF stage decimates before rectifying, so the noise band sits below
// half the frame rate to keep carrier harmonics from folding into the
// modulation range.
#[test]
fn am_noise_lands_in_matching_modulation_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let sr = 16_000.0;
    let white: Vec<f64> = (0..49_024).map(|_| normal.sample(&mut rng)).collect();
    let shaping = sinc_kernel(450.0 / sr, 550.0 / sr, 1025, Window::Hamming).unwrap();
    let x: Vec<f64> = (0..48_000)
        .map(|i| {
            let v: f64 = shaping.iter().zip(&white[i..]).map(|(h, w)| h * w).sum();
            v * (1.0 + 0.9 * (2.0 * PI * 40.0 * i as f64 / sr).cos())
        })
        .collect();
    let bank = mel_init(80, 16_000, 30.0, 8000.0).unwrap();
    let map = tf_decompose(&Waveform::new(x, 16_000).unwrap(), &bank)
        .unwrap()
        .rectify(Nonlinearity::Relu);
    let rate = map.frame_rate;
    let layer = ModulationLayer::sinc(
        vec![(30.0 / rate, 50.0 / rate), (300.0 / rate, 400.0 / rate)],
        128,
        160,
        Window::Hamming,
        rate,
    )
    .unwrap();
    let out = mod_filter(&map, &layer).unwrap();
    let energy = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let k = (0..80).max_by(|&a, &b| energy(map.row(a)).total_cmp(&energy(map.row(b)))).unwrap();
    let band_db = 10.0 * (energy(out.row(0, k)) / energy(out.row(1, k))).log10();
    assert!(band_db >= 10.0, "band {k}: {band_db} dB");
    let total_db = 10.0 * (energy(out.channel(0)) / energy(out.channel(1))).log10();
    assert!(total_db >= 10.0, "all bands: {total_db} dB");
}

fn brute_roc(s: &[f64], l: &[bool]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if l[i] && !l[j] {
                pairs += 1;
                twice += match s[i].partial_cmp(&s[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

fn brute_ap(s: &[f64], l: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let n_pos = l.iter().filter(|&&v| v).count() as f64;
    let (mut ap, mut prev) = (0.0, 0.0);
    for tau in thresholds {
        let tp = s.iter().zip(l).filter(|(&v, &y)| v >= tau && y).count() as f64;
        let fp = s.iter().zip(l).filter(|(&v, &y)| v >= tau && !y).count() as f64;
        let recall = tp / n_pos;
        if recall > prev {
            ap += tp / (tp + fp) * (recall - prev);
            prev = recall;
        }
    }
    ap
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=20).prop_flat_map(|n| {
        (
            // coarse grid so ties are common
            proptest::collection::vec((0u8..8).prop_map(|v| v as f64 / 7.0), n),
            proptest::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, l)| l.iter().any(|&v| v) && l.iter().any(|&v| !v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_match_exhaustive_oracles((s, l) in instance()) {
        prop_assert_eq!(roc_auc(&s, &l).unwrap(), brute_roc(&s, &l));
        prop_assert_eq!(pr_auc(&s, &l).unwrap(), brute_ap(&s, &l));
    }

    #[test]
    fn roc_is_rank_invariant((s, l) in instance(), a in 0.1..5.0f64, b in -3.0..3.0f64) {
        let t: Vec<f64> = s.iter().map(|v| (a * v + b).exp()).collect();
        prop_assert_eq!(roc_auc(&s, &l).unwrap(), roc_auc(&t, &l).unwrap());
    }

    #[test]
    fn roc_complement_sums_to_one(l in proptest::collection::vec(any::<bool>(), 2..20), seed in any::<u64>()) {
        prop_assume!(l.iter().any(|&v| v) && l.iter().any(|&v| !v));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..l.len()).map(|_| rng.gen::<f64>()).collect();
        let flipped: Vec<bool> = l.iter().map(|v| !v).collect();
        let sum = roc_auc(&s, &l).unwrap() + roc_auc(&s, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }
}
