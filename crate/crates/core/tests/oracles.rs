mod common;

use common::{brute_force_silhouette, gaussian, random_labelled, random_tensor, sorted_quartile};
use fssei::baseline::instantaneous_features;
use fssei::complex_nn::{cvbn_forward, cvconv1d_forward_counted, inv_sqrt_2x2, ConvLayerParams, CvbnParams, Mode, Padding};
use fssei::fewshot::MonteCarloStats;
use fssei::metrics::{silhouette, Pca2};
use fssei::rng::substream;
use fssei::signal_sim::ComplexSignal;
use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex32;
use rand::Rng;

#[test]
fn inverse_sqrt_matches_eigendecomposition() {
    let mut rng = substream(1, 0);
    for _ in 0..500 {
        let a = gaussian(&mut rng, (2, 2), 1.0);
        let m = a.dot(&a.t()) + ndarray::Array2::<f64>::eye(2) * 1e-3;
        let eig = SymmetricEigen::new(Matrix2::new(m[[0, 0]], m[[0, 1]], m[[1, 0]], m[[1, 1]]));
        let d = Matrix2::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let oracle = eig.eigenvectors * d * eig.eigenvectors.transpose();
        let w = inv_sqrt_2x2(m[[0, 0]], m[[0, 1]], m[[1, 1]]);
        for (got, want) in w.iter().zip([oracle[(0, 0)], oracle[(0, 1)], oracle[(1, 0)], oracle[(1, 1)]]) {
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
}

#[test]
fn whitened_output_has_identity_covariance() {
    let mut rng = substream(2, 0);
    let mut x = random_tensor(&mut rng, 8, 16, 3);
    // Correlate the planes so whitening has work to do.
    x.im = &x.im * 0.3 + &x.re * 0.9;
    let p = CvbnParams::identity(3, 1e-12, 0.9);
    let (_, cache, _) = cvbn_forward(&x, &p, Mode::Train).unwrap();
    let (re, im) = cache.whitened();
    let n = re.nrows() as f64;
    for c in 0..3 {
        let (r, i) = (re.column(c), im.column(c));
        let (mr, mi) = (r.sum() / n, i.sum() / n);
        let vrr = r.iter().map(|v| (v - mr).powi(2)).sum::<f64>() / n;
        let vii = i.iter().map(|v| (v - mi).powi(2)).sum::<f64>() / n;
        let vri = r.iter().zip(i.iter()).map(|(a, b)| (a - mr) * (b - mi)).sum::<f64>() / n;
        assert!(mr.abs() < 1e-12 && mi.abs() < 1e-12);
        assert!((vrr - 1.0).abs() < 1e-9 && (vii - 1.0).abs() < 1e-9 && vri.abs() < 1e-9);
    }
}

#[test]
fn conv_mac_count_formula() {
    let mut rng = substream(3, 0);
    for (n_ne, n_in, k, len, batch) in [(1, 1, 1, 4, 1), (4, 3, 3, 9, 2), (16, 16, 5, 32, 3), (2, 7, 7, 7, 1)] {
        for padding in [Padding::Same, Padding::Valid] {
            let x = random_tensor(&mut rng, batch, len, n_in);
            let p = ConvLayerParams::init(n_ne, n_in, k, padding, &mut rng);
            let mut macs = 0u64;
            let (y, _) = cvconv1d_forward_counted(&x, &p, &mut macs).unwrap();
            assert_eq!(macs, (4 * k * y.len() * n_in * n_ne * batch) as u64);
        }
    }
}

#[test]
fn silhouette_matches_brute_force() {
    let mut rng = substream(4, 0);
    for _ in 0..200 {
        let classes = rng.random_range(2..=5);
        let n = rng.random_range(2 * classes..=50);
        let d = rng.random_range(1..=6);
        let (x, labels) = random_labelled(&mut rng, n, d, classes);
        let got = silhouette(&x, &labels).unwrap();
        let want = brute_force_silhouette(&x, &labels);
        for (g, w) in got.per_sample_s.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9);
        }
        assert!((got.sc - want.iter().sum::<f64>() / n as f64).abs() <= 1e-9);
    }
}

#[test]
fn pca_matches_dense_eigensolver() {
    let mut rng = substream(5, 0);
    for d in 2..=8 {
        let n = 40;
        let mut x = gaussian(&mut rng, (n, d), 1.0);
        for j in 0..d {
            x.column_mut(j).mapv_inplace(|v| v * (d - j) as f64);
        }
        let pca = Pca2::fit(&x).unwrap();
        let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
        let c = &x - &mean;
        let cov = c.t().dot(&c) / n as f64;
        let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for k in 0..2 {
            assert!((pca.eigenvalues[k] - ev[k]).abs() <= 1e-6 * ev[0], "d={d} k={k}: {} vs {}", pca.eigenvalues[k], ev[k]);
        }
        let proj = pca.project(&x);
        let var = |k: usize| proj.column(k).mapv(|v| v * v).sum() / n as f64;
        assert!(var(0) >= var(1));
        assert!(var(0) + var(1) <= pca.total_variance * (1.0 + 1e-12));
    }
}

#[test]
fn monte_carlo_stats_match_sort_oracle() {
    let mut rng = substream(6, 0);
    for n in 1..60 {
        let acc: Vec<f64> = (0..n).map(|_| (rng.random_range(0..=200) as f64) / 200.0).collect();
        let s = MonteCarloStats::from_accuracies(acc.clone());
        assert_eq!(s.lower_quartile, sorted_quartile(&acc, 1));
        assert_eq!(s.median, sorted_quartile(&acc, 2));
        assert_eq!(s.upper_quartile, sorted_quartile(&acc, 3));
        assert_eq!(s.min, sorted_quartile(&acc, 0));
        assert_eq!(s.max, sorted_quartile(&acc, 4));
        assert_eq!(s.mean, acc.iter().sum::<f64>() / n as f64);
    }
}

/// Raw power sums and an explicit unwrap loop, as an independent route to
/// the baseline moments.
fn moment_oracle(x: &[f64]) -> [f64; 4] {
    let n = x.len() as f64;
    let p = |k: i32| x.iter().map(|v| v.powi(k)).sum::<f64>() / n;
    let (m1, m2r, m3r, m4r) = (p(1), p(2), p(3), p(4));
    let var = m2r - m1 * m1;
    let m3 = m3r - 3.0 * m1 * m2r + 2.0 * m1.powi(3);
    let m4 = m4r - 4.0 * m1 * m3r + 6.0 * m1 * m1 * m2r - 3.0 * m1.powi(4);
    [m1, var, m3 / var.powf(1.5), m4 / (var * var)]
}

#[test]
fn baseline_matches_moment_oracle() {
    let mut rng = substream(7, 0);
    for _ in 0..20 {
        let samples: Vec<Complex32> =
            (0..256).map(|_| Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let sig = ComplexSignal::new(samples.clone(), 4e6);
        let f = instantaneous_features(&sig).unwrap();
        let amp: Vec<f64> = samples.iter().map(|v| (v.re as f64).hypot(v.im as f64)).collect();
        let raw: Vec<f64> = samples.iter().map(|v| (v.im as f64).atan2(v.re as f64)).collect();
        let mut phase = vec![raw[0]];
        for w in raw.windows(2) {
            let mut d = w[1] - w[0];
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            while d <= -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            phase.push(phase.last().unwrap() + d);
        }
        let freq: Vec<f64> = phase.windows(2).map(|w| w[1] - w[0]).collect();
        for (k, comp) in [amp, phase, freq].iter().enumerate() {
            let want = moment_oracle(comp);
            for (j, w) in want.iter().enumerate() {
                let got = f.values[4 * k + j];
                assert!((got - w).abs() <= 1e-9 * w.abs().max(1.0), "component {k} moment {j}: {got} vs {w}");
            }
        }
    }
}
