//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its runtime. Run with `cargo test --test acceptance -- --nocapture` to see
//! every line.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use morphnet::constructor::{build_two_layer, certify, CompactBox, GeneralHinge};
use morphnet::dataset::{gen_hinge_grid, gen_two_circles, Dataset};
use morphnet::hinge::{decompose, enumerate_regions, eval_hinge_sum, hyperplane_bounds};
use morphnet::matrix::Matrix;
use morphnet::morph2d::{
    dehaze_reconstruct, dilate2d, erode2d, ImageGrid, MorphBlock2D, Padding, StructuringElement2D,
};
use morphnet::network::{
    classification_accuracy, forward_block, loss_dssim, train, BetaAnneal, DilationErosionLayer,
    InitScheme, Layer, LinearLayer, LossKind, Mode, Network, Optimizer, TrainConfig,
};
use morphnet::rewrite::{inequivalence_witness, simplify, ArchPair, D1e1Params, WitnessQuery};
use morphnet::tropical::{dilate, erode, soft_dilate, soft_erode, Hardness, Vector};

fn report(criterion: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    println!("criterion {criterion}: PASS ({elapsed:.2?})");
    assert!(
        elapsed <= budget,
        "criterion {criterion} exceeded its {budget:?} budget: {elapsed:?}"
    );
}

fn uniform_vec(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vector<f64> {
    Vector::new((0..len).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()).unwrap()
}

/// Multiples of 2^-10: additions of a few stay exact in f64.
fn dyadic(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-4096i32..4096) as f64 / 1024.0
}

#[test]
fn criterion_01_soft_hard_convergence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..1000 {
        let d = 2 + trial % 63; // spans 2..=64
        let x = uniform_vec(&mut rng, d, -5.0, 5.0);
        let s = uniform_vec(&mut rng, d, -5.0, 5.0);
        let hard_d = dilate(&x, &s).unwrap();
        let hard_e = erode(&x, &s).unwrap();
        for beta in [1.0, 10.0, 100.0] {
            let h = Hardness::new(beta).unwrap();
            let soft_d = soft_dilate(&x, &s, h).unwrap();
            let soft_e = soft_erode(&x, &s, h).unwrap();
            let bound = (d as f64).ln() / beta;
            assert!(soft_d >= hard_d - 1e-12, "soft dilation below hard");
            assert!(soft_d - hard_d <= bound + 1e-12, "sandwich violated (dilation)");
            assert!(soft_e <= hard_e + 1e-12, "soft erosion above hard");
            assert!(hard_e - soft_e <= bound + 1e-12, "sandwich violated (erosion)");
        }
        let h = Hardness::new(1e4).unwrap();
        assert!((soft_dilate(&x, &s, h).unwrap() - hard_d).abs() <= 1e-3);
        assert!((soft_erode(&x, &s, h).unwrap() - hard_e).abs() <= 1e-3);
    }
    report("01 (soft-hard convergence)", started, Duration::from_secs(1));
}

/// Central finite differences of `objective` with respect to `params`.
fn finite_diff<F>(params: &[f64], objective: F, step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    (0..params.len())
        .map(|p| {
            let mut plus = params.to_vec();
            plus[p] += step;
            let mut minus = params.to_vec();
            minus[p] -= step;
            (objective(&plus) - objective(&minus)) / (2.0 * step)
        })
        .collect()
}

fn assert_grad_close(analytic: &[f64], fd: &[f64], what: &str) {
    assert_eq!(analytic.len(), fd.len());
    for (idx, (&a, &f)) in analytic.iter().zip(fd).enumerate() {
        assert!(
            (a - f).abs() <= 1e-5 * f.abs().max(1.0),
            "{what} param {idx}: analytic {a} vs finite difference {f}"
        );
    }
}

#[test]
fn criterion_02_gradient_suite() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    // scalar soft dilation / erosion
    for trial in 0..120 {
        let d = 2 + trial % 8;
        let beta = [1.0, 5.0, 20.0][trial % 3];
        let h = Hardness::new(beta).unwrap();
        let x = uniform_vec(&mut rng, d, -2.0, 2.0);
        let s = uniform_vec(&mut rng, d, -2.0, 2.0);

        let (dx, ds) = morphnet::tropical::soft_dilate_grad(&x, &s, h).unwrap();
        let sx = s.clone();
        let full: Vec<f64> = x.iter().chain(s.iter()).copied().collect();
        let fd = finite_diff(&full, |p| {
            let xs = Vector::new(p[..d].to_vec()).unwrap();
            let ss = Vector::new(p[d..].to_vec()).unwrap();
            soft_dilate(&xs, &ss, h).unwrap()
        }, 1e-5);
        let analytic: Vec<f64> = dx.iter().chain(ds.iter()).copied().collect();
        assert_grad_close(&analytic, &fd, "soft_dilate");

        let (ex, es) = morphnet::tropical::soft_erode_grad(&x, &sx, h).unwrap();
        let fd = finite_diff(&full, |p| {
            let xs = Vector::new(p[..d].to_vec()).unwrap();
            let ss = Vector::new(p[d..].to_vec()).unwrap();
            soft_erode(&xs, &ss, h).unwrap()
        }, 1e-5);
        let analytic: Vec<f64> = ex.iter().chain(es.iter()).copied().collect();
        assert_grad_close(&analytic, &fd, "soft_erode");
    }

    // morphological block through the network reverse pass
    for trial in 0..110 {
        let d = 2 + trial % 4;
        let n = 1 + trial % 3;
        let m = 1 + (trial / 3) % 2;
        let bias = trial % 2 == 0;
        let cols = d + usize::from(bias);
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
        };
        let de = DilationErosionLayer::new(
            Matrix::new(n, cols, draw(n * cols)).unwrap(),
            Matrix::new(m, cols, draw(m * cols)).unwrap(),
            bias,
            Mode::soft(5.0).unwrap(),
        )
        .unwrap();
        let lin = LinearLayer::new(Matrix::new(2, n + m, draw(2 * (n + m))).unwrap(), Some(draw(2)))
            .unwrap();
        let net = Network::new(d, vec![Layer::DilationErosion(de), Layer::Linear(lin)]).unwrap();
        let x: Vec<f64> = draw(d);
        let upstream: Vec<f64> = draw(2);
        let (grads, _) = net.backward(&x, &upstream).unwrap();
        let theta = net.params_to_vec();
        let fd = finite_diff(&theta, |p| {
            let mut probe = net.clone();
            probe.set_params_from(p).unwrap();
            probe
                .forward(&x)
                .unwrap()
                .iter()
                .zip(&upstream)
                .map(|(&y, &u)| y * u)
                .sum()
        }, 1e-6);
        assert_grad_close(&grads.to_vec(), &fd, "forward_block");
    }

    // 2D block
    for trial in 0..100 {
        let beta = [4.0, 8.0][trial % 2];
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
        };
        let img = ImageGrid::new(6, 6, 1, draw(36).iter().map(|v| v * 0.5 + 0.5).collect()).unwrap();
        let block = MorphBlock2D::new(
            1,
            vec![StructuringElement2D::new(3, 3, draw(9)).unwrap()],
            vec![StructuringElement2D::new(3, 3, draw(9)).unwrap()],
            Matrix::new(1, 2, draw(2)).unwrap(),
            Some(draw(1)),
            Mode::soft(beta).unwrap(),
            Padding::Replicate,
        )
        .unwrap();
        let upstream = ImageGrid::new(6, 6, 1, draw(36)).unwrap();
        let (grads, _) = block.backward(&img, &upstream).unwrap();
        let theta = block.params_to_vec();
        let fd = finite_diff(&theta, |p| {
            let mut probe = block.clone();
            probe.set_params_from(p).unwrap();
            probe
                .forward(&img)
                .unwrap()
                .data()
                .iter()
                .zip(upstream.data())
                .map(|(&a, &b)| a * b)
                .sum()
        }, 1e-6);
        assert_grad_close(&grads.to_vec(), &fd, "forward_block2d");
    }

    report("02 (gradient suite)", started, Duration::from_secs(30));
}

#[test]
fn criterion_03_hinge_decomposition_exactness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..100 {
        let d = 1 + rng.random_range(0..5usize);
        let l = 1 + rng.random_range(0..6usize);
        let n = rng.random_range(0..=l);
        let m = l - n;
        let bias = rng.random::<bool>();
        let cols = d + usize::from(bias);
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()
        };
        let de = DilationErosionLayer::new(
            Matrix::new(n, cols, draw(n * cols)).unwrap(),
            Matrix::new(m, cols, draw(m * cols)).unwrap(),
            bias,
            Mode::Hard,
        );
        let de = match de {
            Ok(de) => de,
            Err(_) => continue, // n + m == 0 cannot happen (l >= 1)
        };
        let lin = LinearLayer::new(Matrix::new(1, l, draw(l)).unwrap(), None).unwrap();
        let dec = decompose(&de, &lin).unwrap();
        assert_eq!(dec.terms().len(), l);
        for _ in 0..10_000 {
            let x = uniform_vec(&mut rng, d, -5.0, 5.0);
            let want = forward_block(&de, &lin, &x).unwrap()[0];
            let got = eval_hinge_sum(&dec, &x).unwrap();
            assert!(
                (got - want).abs() <= 1e-12,
                "block {want} vs hinge sum {got}"
            );
        }
    }
    report("03 (hinge decomposition exactness)", started, Duration::from_secs(10));
}

#[test]
fn criterion_04_hyperplane_counts() {
    let started = Instant::now();
    let bounds = hyperplane_bounds(2, 2, true).unwrap();
    assert_eq!(bounds.total, 8, "biased 2-neuron block: 8 distinct lines");
    assert_eq!(bounds.non_axis_parallel, 2, "two arbitrary-orientation boundaries");
    assert_eq!(hyperplane_bounds(2, 2, false).unwrap().total, 3);

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let bx = CompactBox::cube(2, 4.0).unwrap();
    for run in 0..100 {
        let n = rng.random_range(0..=2usize);
        let m = 2 - n;
        let mut draw = |k: usize| -> Vec<f64> {
            (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
        };
        let de = DilationErosionLayer::new(
            Matrix::new(n, 3, draw(n * 3)).unwrap(),
            Matrix::new(m, 3, draw(m * 3)).unwrap(),
            true,
            Mode::Hard,
        )
        .unwrap();
        let lin = LinearLayer::new(Matrix::new(1, 2, draw(2)).unwrap(), None).unwrap();
        let resolution = if run == 0 { 512 } else { 128 };
        let regions = enumerate_regions(&de, &lin, &bx, resolution).unwrap();
        assert!(
            regions.region_count() as u64 <= bounds.total + 1,
            "{} regions exceed bound {}",
            regions.region_count(),
            bounds.total + 1
        );
        assert!(regions.signature_count() as u64 <= bounds.total + 1);
    }
    report("04 (hyperplane count check)", started, Duration::from_secs(10));
}

#[test]
fn criterion_05_constructor_exactness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for trial in 0..50 {
        let d = 1 + trial % 3;
        let bx = CompactBox::cube(d, 5.0).unwrap();
        let n_hinges = 1 + rng.random_range(0..4usize);
        let hinges: Vec<GeneralHinge<f64>> = (0..n_hinges)
            .map(|_| {
                let planes = (0..1 + rng.random_range(0..3usize))
                    .map(|_| {
                        let w = uniform_vec(&mut rng, d, -3.0, 3.0);
                        let b = rng.random::<f64>() * 6.0 - 3.0;
                        (w, b)
                    })
                    .collect();
                GeneralHinge::new(if rng.random::<bool>() { 1 } else { -1 }, planes).unwrap()
            })
            .collect();
        let built = build_two_layer(&hinges, &bx).unwrap();
        let report_ = certify(&built.network, &hinges, &bx, 10_000, 1e-9, trial as u64).unwrap();
        assert!(
            report_.passed,
            "trial {trial}: max_abs_err {} at {:?}",
            report_.max_abs_err, report_.argmax_point
        );
    }
    report("05 (constructor exactness)", started, Duration::from_secs(30));
}

#[test]
fn criterion_06_collapse_soundness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for erosion in [false, true] {
        for _ in 0..100 {
            let depth = 2 + rng.random_range(0..3usize); // 2..=4 layers
            let mut widths = vec![1 + rng.random_range(0..8usize)];
            for _ in 0..depth {
                widths.push(1 + rng.random_range(0..8usize));
            }
            let mut layers = Vec::new();
            for l in 0..depth {
                let bias = rng.random_range(0..4u8) == 0;
                let cols = widths[l] + usize::from(bias);
                let data: Vec<f64> = (0..widths[l + 1] * cols).map(|_| dyadic(&mut rng)).collect();
                let matrix = Matrix::new(widths[l + 1], cols, data).unwrap();
                let de = if erosion {
                    DilationErosionLayer::new(Matrix::zeros(0, cols), matrix, bias, Mode::Hard)
                } else {
                    DilationErosionLayer::new(matrix, Matrix::zeros(0, cols), bias, Mode::Hard)
                }
                .unwrap();
                layers.push(Layer::DilationErosion(de));
            }
            let net = Network::new(widths[0], layers).unwrap();
            let outcome = simplify(&net).unwrap();
            assert_eq!(outcome.network.layers().len(), 1);
            assert_eq!(outcome.log.len(), 1);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..widths[0]).map(|_| dyadic(&mut rng)).collect();
                assert_eq!(
                    net.forward(&x).unwrap(),
                    outcome.network.forward(&x).unwrap(),
                    "collapsed net diverged ({})",
                    if erosion { "erosion" } else { "dilation" }
                );
            }
        }
    }
    report("06 (collapse soundness)", started, Duration::from_secs(10));
}

#[test]
fn criterion_07_inequivalence_witness() {
    let started = Instant::now();
    let query = WitnessQuery::new(ArchPair::D1e1D1VsD1);
    let witness = inequivalence_witness(&query)
        .unwrap()
        .expect("counterexample parameters must yield a witness");
    // independent soundness re-check of the returned cells
    let p = D1e1Params::counterexample();
    assert!(p.separating_strictly());
    assert!(p.eval(witness.in_cell_a.0, witness.in_cell_a.1) <= witness.level);
    assert!(p.eval(witness.in_cell_b.0, witness.in_cell_b.1) <= witness.level);
    assert!(p.eval(witness.out_cell.0, witness.out_cell.1) > witness.level);
    assert_eq!(witness.out_cell.0, witness.in_cell_a.0);
    assert_eq!(witness.out_cell.1, witness.in_cell_b.1);

    let mut reversed = WitnessQuery::new(ArchPair::D1e1D1VsD1);
    reversed.params = Some(D1e1Params::product_shaped());
    assert!(!D1e1Params::product_shaped().separating_strictly());
    assert!(
        inequivalence_witness(&reversed).unwrap().is_none(),
        "reversed inequalities realize a product sublevel set"
    );
    report("07 (inequivalence witness)", started, Duration::from_secs(5));
}

#[test]
fn criterion_08_two_circles_toy() {
    let started = Instant::now();
    let data: Dataset<f64> = gen_two_circles(500, 1.0, 2.0, 0.1, 42).unwrap();

    // Morph-Net: 2 biased dilation-erosion neurons -> 1 linear output -> sigmoid
    let de = DilationErosionLayer::zeros(1, 1, 2, true, Mode::soft(10.0).unwrap()).unwrap();
    let lin = LinearLayer::zeros(1, 2, false);
    let net = Network::new(
        2,
        vec![Layer::DilationErosion(de), Layer::Linear(lin), Layer::Sigmoid],
    )
    .unwrap();
    let cfg = TrainConfig {
        loss: LossKind::Bce,
        optimizer: Optimizer::adam(0.01),
        epochs: 2000,
        batch_size: 64,
        seed: 7,
        init: Some(InitScheme::Default),
        beta_anneal: Some(BetaAnneal::default()),
    };
    let trained = train(&net, &data, &cfg).unwrap();
    let acc = classification_accuracy(&trained.network, &data, 0.5).unwrap();
    assert!(acc >= 0.95, "Morph-Net training accuracy {acc} below 0.95");

    // matched-size ReLU baseline (2 hidden neurons), built in this harness
    let baseline_acc = train_relu_baseline(&data, 2000, 0.01, 7);
    assert!(
        baseline_acc <= 0.80,
        "ReLU baseline reached {baseline_acc}, expected <= 0.80"
    );
    println!("  morph accuracy {acc:.4}, relu baseline {baseline_acc:.4}");
    report("08 (two-circles toy)", started, Duration::from_secs(120));
}

#[test]
fn criterion_09_bias_study() {
    let started = Instant::now();
    let data: Dataset<f64> = gen_hinge_grid(-5.0, 5.0, 21).unwrap();
    let run = |with_bias: bool| -> f64 {
        let de = DilationErosionLayer::zeros(8, 8, 2, with_bias, Mode::soft(10.0).unwrap()).unwrap();
        let lin = LinearLayer::zeros(1, 16, false);
        let net = Network::new(2, vec![Layer::DilationErosion(de), Layer::Linear(lin)]).unwrap();
        let cfg = TrainConfig {
            loss: LossKind::Mse,
            optimizer: Optimizer::adam(0.02),
            epochs: 500,
            batch_size: 64,
            seed: 11,
            init: Some(InitScheme::Default),
            beta_anneal: Some(BetaAnneal::default()),
        };
        let trained = train(&net, &data, &cfg).unwrap();
        *trained.loss_trace.last().unwrap()
    };
    let mse_bias = run(true);
    let mse_nobias = run(false);
    println!("  final MSE with bias {mse_bias:.6}, without {mse_nobias:.6}");
    assert!(
        mse_bias <= 0.5 * mse_nobias,
        "bias run ({mse_bias}) not at most half the no-bias run ({mse_nobias})"
    );
    report("09 (single-block bias study)", started, Duration::from_secs(120));
}

#[test]
fn criterion_10_2d_consistency() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for _ in 0..50 {
        let img = ImageGrid::new(16, 16, 1, (0..256).map(|_| rng.random::<f64>()).collect()).unwrap();
        let se = StructuringElement2D::new(
            3,
            3,
            (0..9).map(|_| rng.random::<f64>() - 0.5).collect(),
        )
        .unwrap();
        let d2 = dilate2d(&img, &se, Padding::Infinite).unwrap();
        let e2 = erode2d(&img, &se, Padding::Infinite).unwrap();
        let flat_se = Vector::new(se.data().to_vec()).unwrap();
        for i in 1..15 {
            for j in 1..15 {
                // dilation reads the window mirrored, erosion reads it straight
                let mut window_d = Vec::with_capacity(9);
                let mut window_e = Vec::with_capacity(9);
                for u in 0..3usize {
                    for v in 0..3usize {
                        let (du, dv) = (u as isize - 1, v as isize - 1);
                        window_d.push(img.get(0, (i as isize - du) as usize, (j as isize - dv) as usize));
                        window_e.push(img.get(0, (i as isize + du) as usize, (j as isize + dv) as usize));
                    }
                }
                let wd = Vector::new(window_d).unwrap();
                let we = Vector::new(window_e).unwrap();
                assert_eq!(dilate(&wd, &flat_se).unwrap(), d2.get(0, i, j));
                assert_eq!(erode(&we, &flat_se).unwrap(), e2.get(0, i, j));
                assert_eq!(
                    morphnet::morph2d::flatten_window_equiv(&img, &se, i, j).unwrap(),
                    d2.get(0, i, j)
                );
            }
        }
        // duality and monotonicity
        let neg = img.map(|v| -v);
        let dual = dilate2d(&neg, &se.reflect(), Padding::Infinite).unwrap().map(|v| -v);
        assert_eq!(dual.data(), e2.data());
        let brighter = img.map(|v| v + 0.25);
        let d_brighter = dilate2d(&brighter, &se, Padding::Infinite).unwrap();
        for (a, b) in d2.data().iter().zip(d_brighter.data()) {
            assert!(a <= b);
        }
    }
    report("10 (2D consistency)", started, Duration::from_secs(5));
}

#[test]
fn criterion_11_dehazing_round_trip() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);

    // general synthesized haze: recovery within 1e-12
    let j = ImageGrid::new(16, 16, 1, (0..256).map(|_| rng.random::<f64>()).collect()).unwrap();
    let t = ImageGrid::new(16, 16, 1, (0..256).map(|_| 0.2 + 0.8 * rng.random::<f64>()).collect())
        .unwrap();
    let a = ImageGrid::new(16, 16, 1, (0..256).map(|_| rng.random::<f64>()).collect()).unwrap();
    let k_data: Vec<f64> = t.data().iter().zip(a.data()).map(|(&tv, &av)| (1.0 - tv) * av).collect();
    let k = ImageGrid::new(16, 16, 1, k_data).unwrap();
    let i_data: Vec<f64> = j
        .data()
        .iter()
        .zip(t.data())
        .zip(k.data())
        .map(|((&jv, &tv), &kv)| tv * jv + kv)
        .collect();
    let i = ImageGrid::new(16, 16, 1, i_data).unwrap();
    let recovered = dehaze_reconstruct(&i, &t, &k).unwrap();
    for (got, want) in recovered.data().iter().zip(j.data()) {
        assert!((got - want).abs() <= 1e-12);
    }

    // power-of-two transmittance and zero airlight recover bit-for-bit,
    // which pins DSSIM at exactly zero
    let t_half = ImageGrid::new(16, 16, 1, vec![0.5; 256]).unwrap();
    let k_zero = ImageGrid::new(16, 16, 1, vec![0.0; 256]).unwrap();
    let i_exact =
        ImageGrid::new(16, 16, 1, j.data().iter().map(|&v| 0.5 * v).collect()).unwrap();
    let recovered_exact = dehaze_reconstruct(&i_exact, &t_half, &k_zero).unwrap();
    assert_eq!(recovered_exact.data(), j.data());
    assert_eq!(loss_dssim(&j, &recovered_exact, 8, 4).unwrap(), 0.0);

    report("11 (dehazing round trip)", started, Duration::from_secs(1));
}

/// Minimal 2-hidden-ReLU + sigmoid classifier with Adam, written directly in
/// the harness so the baseline shares nothing with the library under test.
fn train_relu_baseline(data: &Dataset<f64>, epochs: usize, lr: f64, seed: u64) -> f64 {
    const H: usize = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // params: w1 (H x 2), b1 (H), w2 (H), b2
    let mut theta: Vec<f64> = (0..(2 * H + H + H + 1))
        .map(|_| rng.random::<f64>() - 0.5)
        .collect();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let (b1c, b2c, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut step = 0u32;

    let forward = |theta: &[f64], x: &[f64]| -> (f64, [f64; H], [f64; H]) {
        let mut hidden = [0.0; H];
        let mut pre = [0.0; H];
        for h in 0..H {
            let z = theta[2 * h] * x[0] + theta[2 * h + 1] * x[1] + theta[2 * H + h];
            pre[h] = z;
            hidden[h] = z.max(0.0);
        }
        let mut out = theta[2 * H + H + H];
        for h in 0..H {
            out += theta[2 * H + H + h] * hidden[h];
        }
        (1.0 / (1.0 + (-out).exp()), pre, hidden)
    };

    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        // Fisher-Yates on the same seeded stream
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(64) {
            let mut grad = vec![0.0; theta.len()];
            for &idx in batch {
                let (x, y) = data.row(idx);
                let x = [x[0], x[1]];
                let target = y[0];
                let (p, pre, hidden) = forward(&theta, &x);
                let dout = p - target; // BCE + sigmoid
                for h in 0..H {
                    grad[2 * H + H + h] += dout * hidden[h];
                    let dh = if pre[h] > 0.0 { dout * theta[2 * H + H + h] } else { 0.0 };
                    grad[2 * h] += dh * x[0];
                    grad[2 * h + 1] += dh * x[1];
                    grad[2 * H + h] += dh;
                }
                grad[2 * H + H + H] += dout;
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let (c1, c2) = (1.0 - b1c.powi(step as i32), 1.0 - b2c.powi(step as i32));
            for p in 0..theta.len() {
                let g = grad[p] * scale;
                m[p] = b1c * m[p] + (1.0 - b1c) * g;
                v[p] = b2c * v[p] + (1.0 - b2c) * g * g;
                theta[p] -= lr * (m[p] / c1) / ((v[p] / c2).sqrt() + eps);
            }
        }
    }

    let correct = data
        .rows()
        .iter()
        .filter(|(x, y)| {
            let (p, _, _) = forward(&theta, &[x[0], x[1]]);
            (p > 0.5) == (y[0] == 1.0)
        })
        .count();
    correct as f64 / n as f64
}
