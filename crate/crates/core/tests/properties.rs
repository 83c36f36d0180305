use proptest::prelude::*;

use whitespike::classify::sum_pool;
use whitespike::coding::{decode_latency, encode_latency_slice, split_channels, EncoderConfig, SpikeList};
use whitespike::numerics::{correlate2d, covariance, sym_eigen, Matrix};
use whitespike::snn::{
    stdp_update, HomeostasisConfig, LearningRates, NeuronConfig, Receptive, SnnLayer, StdpConfig,
};
use whitespike::whitening::{fit_zca, retained_count};
use whitespike::Tensor3;

fn tensor(max_side: usize, max_c: usize) -> impl Strategy<Value = Tensor3> {
    (1..=max_side, 1..=max_side, 1..=max_c).prop_flat_map(|(h, w, c)| {
        prop::collection::vec(-2.0f32..2.0, h * w * c)
            .prop_map(move |d| Tensor3::from_vec(h, w, c, d).unwrap())
    })
}

fn symmetric(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |d| {
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    m.set(i, j, d[i * n + j]);
                    m.set(j, i, d[i * n + j]);
                }
            }
            m
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlate_matches_brute_force(
        img in tensor(16, 3),
        kh in 1usize..6,
        kw in 1usize..6,
        stride in 1usize..4,
        padding in 0usize..3,
        seed in any::<u64>(),
    ) {
        let (h, w, c) = img.dims();
        prop_assume!(kh <= h + 2 * padding && kw <= w + 2 * padding);
        let kdata: Vec<f32> = (0..kh * kw * c)
            .map(|i| (((i as u64).wrapping_mul(2654435761) ^ seed) % 1000) as f32 / 500.0 - 1.0)
            .collect();
        let kernel = Tensor3::from_vec(kh, kw, c, kdata).unwrap();
        let out = correlate2d(&img, &kernel, stride, padding).unwrap();
        let (oh, ow) = ((h + 2 * padding - kh) / stride + 1, (w + 2 * padding - kw) / stride + 1);
        prop_assert_eq!(out.dims(), (oh, ow, 1));
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f64;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let y = (oy * stride + ky) as isize - padding as isize;
                        let x = (ox * stride + kx) as isize - padding as isize;
                        if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                            continue;
                        }
                        for ch in 0..c {
                            acc += f64::from(img.get(y as usize, x as usize, ch))
                                * f64::from(kernel.get(ky, kx, ch));
                        }
                    }
                }
                prop_assert!((f64::from(out.get(oy, ox, 0)) - acc).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn eigen_reconstructs_and_is_orthonormal(m in symmetric(12)) {
        let e = sym_eigen(&m).unwrap();
        let norm = m.frobenius_norm().max(1e-300);
        prop_assert!(e.reconstruct().sub(&m).unwrap().frobenius_norm() / norm < 1e-6);
        let vtv = e.eigenvectors.transpose().matmul(&e.eigenvectors).unwrap();
        prop_assert!(vtv.sub(&Matrix::identity(m.rows())).unwrap().max_abs() < 1e-8);
        prop_assert!(e.eigenvalues.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn covariance_symmetric_psd(rows in 2usize..30, cols in 1usize..6, seed in any::<u32>()) {
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| (((i as u64 * 7919) ^ u64::from(seed)) % 997) as f64 / 97.0)
            .collect();
        let (_, cov) = covariance(&Matrix::from_vec(rows, cols, data).unwrap()).unwrap();
        prop_assert_eq!(cov.asymmetry(), 0.0);
        let e = sym_eigen(&cov).unwrap();
        prop_assert!(e.eigenvalues.iter().all(|&l| l >= -1e-10 * cov.max_abs().max(1.0)));
    }

    #[test]
    fn zca_is_symmetric(rows in 8usize..40, cols in 1usize..6, seed in any::<u32>()) {
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| (((i as u64 * 104729) ^ u64::from(seed)) % 1009) as f64 / 101.0)
            .collect();
        let t = fit_zca(&Matrix::from_vec(rows, cols, data).unwrap(), 1e-2, 1.0).unwrap();
        prop_assert!(t.w.asymmetry() < 1e-8);
    }

    #[test]
    fn truncation_is_monotone(d in 1usize..400, a in 0.001f64..1.0, b in 0.001f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(retained_count(lo, d) <= retained_count(hi, d));
        prop_assert!(retained_count(lo, d) >= 1);
    }

    #[test]
    fn split_properties(t in tensor(6, 3)) {
        let s = split_channels(&t);
        let c = t.channels();
        let mut max = 0.0f32;
        for px in s.data().chunks_exact(2 * c) {
            for k in 0..c {
                prop_assert_eq!(px[k] * px[c + k], 0.0);
                max = max.max(px[k]).max(px[c + k]);
            }
        }
        if t.data().iter().any(|&v| v != 0.0) {
            prop_assert!((max - 1.0).abs() < 1e-6);
        }
        let neg = Tensor3::from_vec(t.height(), t.width(), c, t.data().iter().map(|v| -v).collect()).unwrap();
        let sn = split_channels(&neg);
        for (a, b) in s.data().chunks_exact(2 * c).zip(sn.data().chunks_exact(2 * c)) {
            prop_assert_eq!(&a[..c], &b[c..]);
            prop_assert_eq!(&a[c..], &b[..c]);
        }
    }

    #[test]
    fn latency_is_monotone(x1 in 0.001f32..=1.0, x2 in 0.001f32..=1.0) {
        prop_assume!(x1 > x2);
        let s = encode_latency_slice(&[x1, x2], &EncoderConfig::default()).unwrap();
        prop_assert!(s.time(0).unwrap() < s.time(1).unwrap());
    }

    #[test]
    fn decode_bounded_and_non_increasing(t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0, t_exp in 0.01f64..0.99) {
        let cfg = EncoderConfig::default();
        let (a, b) = (decode_latency(Some(t1), t_exp, &cfg), decode_latency(Some(t2), t_exp, &cfg));
        prop_assert!((0.0..=1.0).contains(&a));
        if t1 <= t2 {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn stdp_stays_in_bounds(w in 0.0f64..=1.0, lr in 0.0f64..2.0, beta in -3.0f64..3.0,
                            pre in prop::option::of(0.0f64..=1.0), post in 0.0f64..=1.0) {
        let cfg = StdpConfig { beta, ..StdpConfig::default() };
        let nw = stdp_update(&cfg, lr, w, pre, post);
        prop_assert!((cfg.w_min..=cfg.w_max).contains(&nw));
    }

    #[test]
    fn neurons_fire_at_most_once_and_only_on_input_times(
        weights in prop::collection::vec(0.0f64..1.0, 3 * 8),
        thresholds in prop::collection::vec(0.05f64..3.0, 3),
        times in prop::collection::vec(prop::option::of(0.0f64..=1.0), 8),
    ) {
        let rows: Vec<Vec<f64>> = weights.chunks(8).map(|r| r.to_vec()).collect();
        let layer = SnnLayer::from_parts(
            Receptive { patch_w: 8, patch_h: 1, channels: 1, stride: 1, padding: 0 },
            Matrix::from_rows(&rows).unwrap(),
            thresholds.clone(),
            NeuronConfig::default(),
            StdpConfig::default(),
            HomeostasisConfig::default(),
            EncoderConfig::default(),
        ).unwrap();
        let input = SpikeList::from_times(times.clone(), &EncoderConfig::default()).unwrap();
        let fire = layer.simulate(&input).unwrap();
        prop_assert_eq!(fire.len(), 3);
        for (n, t) in fire.iter().enumerate() {
            // brute force: potential just after each distinct input time
            let mut distinct: Vec<f64> = times.iter().flatten().copied().collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let expected = distinct.into_iter().find(|&s| {
                let v: f64 = times
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.is_some_and(|t| t <= s))
                    .map(|(u, _)| rows[n][u])
                    .sum();
                v >= thresholds[n]
            });
            prop_assert_eq!(*t, expected);
        }
    }

    #[test]
    fn training_keeps_weights_in_bounds(seed in any::<u64>()) {
        let mut layer = SnnLayer::new(
            3,
            Receptive { patch_w: 4, patch_h: 1, channels: 1, stride: 1, padding: 0 },
            NeuronConfig { threshold_init_mean: 1.0, ..NeuronConfig::default() },
            StdpConfig { lr_init: 0.5, ..StdpConfig::default() },
            HomeostasisConfig::default(),
            EncoderConfig::default(),
            seed,
        ).unwrap();
        let input = encode_latency_slice(&[0.9, 0.1, 0.0, 0.5], &EncoderConfig::default()).unwrap();
        for _ in 0..50 {
            layer.wta_train_step(&input, LearningRates { weights: 0.5, thresholds: 1.0 }).unwrap();
        }
        prop_assert!(layer.weights().data().iter().all(|w| (0.0..=1.0).contains(w)));
        let floor = layer.neuron.threshold_floor();
        prop_assert!(layer.thresholds().iter().all(|&t| t >= floor));
    }

    #[test]
    fn sum_pool_is_linear(h in 2usize..9, w in 2usize..9, n in 1usize..4, a in -3.0f32..3.0, b in -3.0f32..3.0) {
        let m1 = Tensor3::from_vec(h, w, n, (0..h * w * n).map(|i| (i % 7) as f32 * 0.25).collect()).unwrap();
        let m2 = Tensor3::from_vec(h, w, n, (0..h * w * n).map(|i| (i % 5) as f32 - 2.0).collect()).unwrap();
        let mix = Tensor3::from_vec(
            h, w, n,
            m1.data().iter().zip(m2.data()).map(|(x, y)| a * x + b * y).collect(),
        ).unwrap();
        let (p1, p2, pm) = (sum_pool(&m1).unwrap(), sum_pool(&m2).unwrap(), sum_pool(&mix).unwrap());
        for i in 0..pm.len() {
            let lin = f64::from(a) * p1[i] + f64::from(b) * p2[i];
            prop_assert!((pm[i] - lin).abs() < 1e-3 * (1.0 + lin.abs()));
        }
    }
}

#[test]
fn sum_pool_matches_naive_quadrants() {
    let map = Tensor3::from_vec(6, 6, 2, (0..72).map(|i| ((i * 37) % 11) as f32).collect()).unwrap();
    let pooled = sum_pool(&map).unwrap();
    for (r, (ys, xs)) in [(0..3, 0..3), (0..3, 3..6), (3..6, 0..3), (3..6, 3..6)].into_iter().enumerate() {
        for f in 0..2 {
            let mut s = 0.0;
            for y in ys.clone() {
                for x in xs.clone() {
                    s += f64::from(map.get(y, x, f));
                }
            }
            assert_eq!(pooled[r * 2 + f], s);
        }
    }
}
