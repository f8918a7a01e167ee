use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::gradcheck::{central_difference, relative_error};
use crate::model::{init_params, ModelConfig, Strategy};

fn rand_tensor(dims: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(dims, |_| rng.gen_range(lo..hi))
}

fn full(dims: &[usize], v: f64) -> Tensor<f64> {
    Tensor::full(dims, v)
}

const D: [usize; 4] = [1, 3, 8, 8];

#[test]
fn smooth_l1_examples() {
    let a = rand_tensor(&D, 1, -1.0, 1.0);
    assert_eq!(smooth_l1(&a, &a).unwrap(), 0.0);
    assert!((smooth_l1(&full(&D, 0.5), &full(&D, 0.0)).unwrap() - 0.125).abs() < 1e-15);
    assert!((smooth_l1(&full(&D, -1.0), &full(&D, 1.0)).unwrap() - 1.5).abs() < 1e-15);
    assert!(matches!(smooth_l1(&a, &full(&[1, 3, 8, 7], 0.0)), Err(Error::Shape(_))));
}

#[test]
fn reg_examples() {
    let cfg = RegConfig::default();
    assert!((reg_loss(&full(&D, 0.0), &cfg).unwrap() - 1.0).abs() < 1e-15);
    assert!((reg_loss(&full(&D, 0.5), &cfg).unwrap() - 2.0).abs() < 1e-12);
    assert!((reg_loss(&full(&D, 1.0), &cfg).unwrap() - 100.0).abs() < 1e-9);
    assert!((reg_loss(&full(&D, -1.0), &cfg).unwrap() - 100.0).abs() < 1e-9);
    assert!(RegConfig { denom_floor: 1.5, ..cfg.clone() }.validate().is_err());
    assert!(RegConfig { c: 0.5, ..cfg }.validate().is_err());
}

#[test]
fn rec_examples() {
    let x = rand_tensor(&D, 2, -1.0, 1.0);
    let y = rand_tensor(&D, 3, -1.0, 1.0);
    let ones = full(&D, 1.0);
    let i1 = full(&[1, 1, 8, 8], 0.5);
    let r_half = full(&D, 0.6);
    let y_equiv = crate::model::compose(&r_half, &i1).unwrap();
    let reg = RegConfig::default();
    let flags = LossFlags::default();

    let (rx, ry, rg) = rec_loss(
        &x,
        &y_equiv,
        Factors { r: &ones, i: &x },
        Factors { r: &r_half, i: &i1 },
        Strategy::S3,
        &reg,
        flags,
    )
    .unwrap();
    assert_eq!(rx, 0.0);
    assert!(ry.abs() < 1e-15);
    // R_x = 1 is the degenerate solution: its half of the averaged penalty sits at the floor.
    let expected = 0.5 * (100.0 + 1.0 / 0.4);
    assert!((rg - expected).abs() < 1e-9, "{rg}");

    for s in [Strategy::S1, Strategy::S2] {
        let (_, _, rg) =
            rec_loss(&x, &y, Factors { r: &ones, i: &x }, Factors { r: &ones, i: &y }, s, &reg, flags).unwrap();
        assert_eq!(rg, 0.0);
    }
    let p = LossParts { rec_x: 1.0, reg: 5.0, ..Default::default() };
    assert_eq!(total_loss(&p, &LossWeights::default(), Strategy::S2, flags).unwrap().total, 1.0 + 10.0 * 0.0);
}

#[test]
fn dec_and_enh_examples() {
    let f = LossFlags::default();
    let a = rand_tensor(&D, 4, -1.0, 1.0);
    assert_eq!(dec_loss(&a, &a, f).unwrap(), 0.0);
    assert!((dec_loss(&full(&D, 0.25), &full(&D, -0.25), f).unwrap() - 0.125).abs() < 1e-15);

    // Same permutation applied to both inputs leaves the loss unchanged.
    let b = rand_tensor(&D, 5, -1.0, 1.0);
    let n = a.len();
    let perm: Vec<usize> = (0..n).map(|k| (k * 37 + 11) % n).collect();
    let pa = Tensor::from_fn(&D, |k| a.data()[perm[k]]);
    let pb = Tensor::from_fn(&D, |k| b.data()[perm[k]]);
    assert!((dec_loss(&a, &b, f).unwrap() - dec_loss(&pa, &pb, f).unwrap()).abs() < 1e-14);

    let y = rand_tensor(&D, 6, -1.0, 1.0);
    let ones = full(&D, 1.0);
    assert_eq!(enh_loss(&y, &ones, &y, f).unwrap(), 0.0);
    let r = full(&D, 0.5);
    let i = full(&D, 0.8);
    assert_eq!(enh_loss(&full(&D, 0.4), &r, &i, f).unwrap(), 0.0);
    assert!((enh_loss(&full(&D, -1.0), &ones, &ones, f).unwrap() - 1.5).abs() < 1e-15);
    assert!(enh_loss(&y, &r, &full(&[1, 3, 4, 8], 0.0), f).is_err());
}

#[test]
fn plain_l1_when_smooth_disabled() {
    let f = LossFlags::none();
    assert!((dec_loss(&full(&D, 2.0), &full(&D, 0.0), f).unwrap() - 2.0).abs() < 1e-15);
    assert!((dec_loss(&full(&D, 0.5), &full(&D, 0.0), f).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn ssim_examples() {
    let cfg = SsimConfig::default();
    let dims = [1, 3, 16, 20];
    let a = rand_tensor(&dims, 7, 0.0, 1.0);
    let b = rand_tensor(&dims, 8, 0.0, 1.0);
    assert!(ssim_map(&a, &a, &cfg).unwrap().data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    let c1 = cfg.c1();
    let closed = c1 / (1.0 + c1);
    let m = ssim_map(&full(&dims, 0.0), &full(&dims, 1.0), &cfg).unwrap();
    assert!(m.data().iter().all(|&v| (v - closed).abs() < 1e-12));
    assert!((closed - 1.0e-4).abs() < 1e-7);
    assert_eq!(ssim_map(&a, &b, &cfg).unwrap(), ssim_map(&b, &a, &cfg).unwrap());

    assert!(ssim_loss(&a, &a, &cfg).unwrap().abs() < 1e-12);
    let l = ssim_loss(&full(&dims, 0.0), &full(&dims, 1.0), &cfg).unwrap();
    assert!((l - 0.9999).abs() < 1e-4 && (l - (1.0 - closed)).abs() < 1e-12);
    let l = ssim_loss(&a, &b, &cfg).unwrap();
    assert!((0.0..=2.0).contains(&l));
    assert!(matches!(ssim_map(&full(&[1, 1, 10, 40], 0.0), &full(&[1, 1, 10, 40], 0.0), &cfg), Err(Error::Shape(_))));
}

#[test]
fn ms_ssim_examples() {
    let cfg = SsimConfig::default();
    let dims = [1, 3, 64, 96];
    let a = rand_tensor(&dims, 9, 0.0, 1.0);
    assert!(ms_ssim_loss(&a, &a, &cfg).unwrap().abs() < 1e-12);
    let b = rand_tensor(&dims, 10, 0.0, 1.0);
    let one = SsimConfig { levels: 1, ..cfg.clone() };
    assert_eq!(ms_ssim_loss(&a, &b, &one).unwrap(), ssim_loss(&a, &b, &one).unwrap());
    assert!(matches!(ms_ssim_loss(&full(&[1, 3, 40, 96], 0.0), &full(&[1, 3, 40, 96], 0.0), &cfg), Err(Error::Shape(_))));
    let w = cfg.weights().unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((w[0] - 0.0448 / 0.6305).abs() < 1e-12);
    assert!(SsimConfig { levels: 6, ..cfg.clone() }.validate().is_err());
    assert!(SsimConfig { level_weights: Some(vec![0.5, 0.4, 0.2]), ..cfg }.validate().is_err());
}

/// Direct-formula multiscale SSIM: explicit 2-D window sums with mirrored indices.
fn oracle_ms_ssim(a: &Tensor<f64>, b: &Tensor<f64>, levels: usize) -> f64 {
    let (n, c, h0, w0) = a.nchw();
    let sigma: f64 = 1.5;
    let raw: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    let win: Vec<Vec<f64>> = (0..11).map(|i| (0..11).map(|j| raw[i] * raw[j] / (s * s)).collect()).collect();
    let mirror = |i: isize, n: usize| -> usize {
        let n = n as isize;
        (if i < 0 { -i } else if i >= n { 2 * n - 2 - i } else { i }) as usize
    };
    let canon = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let total: f64 = canon[..levels].iter().sum();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));

    let mut pa: Vec<Vec<f64>> = (0..n * c).map(|p| a.data()[p * h0 * w0..(p + 1) * h0 * w0].to_vec()).collect();
    let mut pb: Vec<Vec<f64>> = (0..n * c).map(|p| b.data()[p * h0 * w0..(p + 1) * h0 * w0].to_vec()).collect();
    let (mut h, mut w) = (h0, w0);
    let mut result = 1.0;
    for lvl in 0..levels {
        if lvl > 0 {
            let (nh, nw) = (h / 2, w / 2);
            let pool = |p: &Vec<f64>| -> Vec<f64> {
                let mut o = vec![0.0; nh * nw];
                for i in 0..nh {
                    for j in 0..nw {
                        o[i * nw + j] = (p[2 * i * w + 2 * j]
                            + p[2 * i * w + 2 * j + 1]
                            + p[(2 * i + 1) * w + 2 * j]
                            + p[(2 * i + 1) * w + 2 * j + 1])
                            / 4.0;
                    }
                }
                o
            };
            pa = pa.iter().map(pool).collect();
            pb = pb.iter().map(pool).collect();
            h = nh;
            w = nw;
        }
        let (mut sum_ssim, mut sum_cs) = (0.0, 0.0);
        for (x, y) in pa.iter().zip(&pb) {
            for i in 0..h {
                for j in 0..w {
                    let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for (di, row) in win.iter().enumerate() {
                        for (dj, &k) in row.iter().enumerate() {
                            let ii = mirror(i as isize + di as isize - 5, h);
                            let jj = mirror(j as isize + dj as isize - 5, w);
                            let (p, q) = (x[ii * w + jj], y[ii * w + jj]);
                            ma += k * p;
                            mb += k * q;
                            saa += k * p * p;
                            sbb += k * q * q;
                            sab += k * p * q;
                        }
                    }
                    let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                    let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                    let cs = (2.0 * cov + c2) / (va + vb + c2);
                    sum_ssim += l * cs;
                    sum_cs += cs;
                }
            }
        }
        let count = (pa.len() * h * w) as f64;
        let beta = canon[lvl] / total;
        let m = if lvl + 1 == levels { sum_ssim / count } else { sum_cs / count };
        result *= m.max(1e-6).powf(beta);
    }
    1.0 - result
}

#[test]
fn ms_ssim_matches_direct_oracle() {
    let dims = [1, 3, 64, 96];
    let a = rand_tensor(&dims, 11, 0.0, 1.0);
    // Correlated pair so every level has a positive contrast-structure term.
    let noise = rand_tensor(&dims, 12, -0.2, 0.2);
    let b = a.zip_map(&noise, |p, q| (p + q).clamp(0.0, 1.0));
    let got = ms_ssim_loss(&a, &b, &SsimConfig::default()).unwrap();
    let want = oracle_ms_ssim(&a, &b, 3);
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    assert!(want > 0.01 && want < 0.99);
}

#[test]
fn com_examples() {
    assert!((com_loss(1.0, 0.5, 0.84) - 0.92).abs() < 1e-15);
    assert_eq!(com_loss(0.3, 0.7, 1.0), 0.3);
    assert_eq!(com_loss(0.3, 0.7, 0.0), 0.7);
}

#[test]
fn cgan_examples() {
    let dims = [2, 1, 5, 7];
    let (d, g) = cgan_losses(&full(&dims, 0.5), &full(&dims, 0.5));
    assert!((d - 2.0 * 2f64.ln()).abs() < 1e-12 && (d - 1.3863).abs() < 1e-4);
    assert!((g - 2f64.ln()).abs() < 1e-12 && (g - 0.6931).abs() < 1e-4);
    let (d, _) = cgan_losses(&full(&dims, 0.9), &full(&dims, 0.1));
    assert!((d + 2.0 * 0.9f64.ln()).abs() < 1e-12 && (d - 0.2107).abs() < 1e-4);
    let (d, g) = cgan_losses(&full(&dims, 0.0), &full(&dims, 1.0));
    assert!(d.is_finite() && g.is_finite());
    assert!((d + 2.0 * LOG_EPS.ln()).abs() < 1e-9);
    assert_eq!(g, 0.0);
}

#[test]
fn total_examples() {
    let w = LossWeights::default();
    let p = LossParts { rec_x: 1.0, dec: 2.0, enh: 0.5, ssim_ms: 0.5, cgan_g: 0.7, ..Default::default() };
    let b = total_loss(&p, &w, Strategy::S3, LossFlags::default()).unwrap();
    assert!((b.com - 0.5).abs() < 1e-15);
    assert!((b.total - 8.7).abs() < 1e-12);

    let p = LossParts { rec_x: 0.3, rec_y: 0.2, reg: 9.0, dec: 0.1, enh: 0.4, ssim_ms: 0.9, cgan_g: 0.7, cgan_d: 1.1 };
    let b = total_loss(&p, &w, Strategy::S1, LossFlags::none()).unwrap();
    assert!((b.total - (0.3 + 0.2 + 0.1 + 10.0 * 0.4)).abs() < 1e-12);
    assert_eq!((b.reg, b.ssim_ms, b.cgan_g, b.cgan_d), (0.0, 0.0, 0.0, 0.0));

    let z = total_loss(&LossParts::default(), &w, Strategy::S3, LossFlags::default()).unwrap();
    assert_eq!(z.total, 0.0);

    let bad = LossParts { dec: f64::NAN, ..Default::default() };
    assert!(matches!(total_loss(&bad, &w, Strategy::S3, LossFlags::default()), Err(Error::NonFinite { term: "dec", .. })));
}

fn grad_check(dims: &[usize], seeds: (u64, u64), lo: f64, hi: f64, f: impl Fn(&mut Graph<f64>, Var, Var) -> Var) -> f64 {
    let a0 = rand_tensor(dims, seeds.0, lo, hi);
    let b0 = rand_tensor(dims, seeds.1, lo, hi);
    let eval = |a: &Tensor<f64>| {
        let mut g = Graph::new();
        let av = g.param(a.clone());
        let bv = g.constant(b0.clone());
        let out = f(&mut g, av, bv);
        (g.scalar(out), g.backward(out).get(av).cloned())
    };
    let analytic = eval(&a0).1.expect("gradient reaches input");
    let numeric = central_difference(|a| eval(a).0, &a0, 1e-4);
    relative_error(&analytic, &numeric, 1e-12)
}

const SMALL: [usize; 3] = [3, 4, 6];

#[test]
fn gradients_match_finite_differences() {
    let flags = LossFlags::default();
    let tol = 1e-4;
    // Differences spread over both Huber branches.
    let e = grad_check(&SMALL, (1, 2), -1.5, 1.5, |g, a, b| distance(g, a, b, flags));
    assert!(e < tol, "smooth_l1 {e}");
    let e = grad_check(&SMALL, (3, 4), -1.0, 1.0, |g, a, b| distance(g, a, b, LossFlags::none()));
    assert!(e < tol, "l1 {e}");
    let e = grad_check(&SMALL, (5, 6), -0.95, 0.95, |g, a, _| reg_var(g, a, &RegConfig::default()));
    assert!(e < tol, "reg {e}");
    let small_window = SsimConfig { window_size: 3, levels: 1, ..SsimConfig::default() };
    let e = grad_check(&SMALL, (7, 8), 0.0, 1.0, |g, a, b| ssim_loss_var(g, a, b, &small_window).unwrap());
    assert!(e < tol, "ssim {e}");
    let e = grad_check(&SMALL, (9, 10), 0.0, 1.0, |g, a, b| ms_ssim_loss_var(g, a, b, &small_window).unwrap());
    assert!(e < tol, "ms-ssim M=1 {e}");
    let e = grad_check(&SMALL, (11, 12), 0.05, 0.95, |g, a, b| cgan_d_var(g, b, a));
    assert!(e < tol, "cgan_d fake {e}");
    let e = grad_check(&SMALL, (13, 14), 0.05, 0.95, |g, a, b| cgan_d_var(g, a, b));
    assert!(e < tol, "cgan_d real {e}");
    let e = grad_check(&SMALL, (15, 16), 0.05, 0.95, |g, a, _| cgan_g_var(g, a));
    assert!(e < tol, "cgan_g {e}");
    let e = grad_check(&[1, 3, 4, 6], (17, 18), -1.0, 1.0, |g, a, b| {
        let i = g.slice_channels(b, 0, 1);
        let x_hat = compose_vars(g, a, i).unwrap();
        let y = g.affine(b, 0.5, 0.1);
        distance(g, y, x_hat, flags)
    });
    assert!(e < tol, "enh {e}");
}

#[test]
fn multiscale_gradients_match_finite_differences() {
    let three = SsimConfig { window_size: 3, levels: 3, ..SsimConfig::default() };
    let e = grad_check(&[1, 2, 12, 16], (21, 22), 0.0, 1.0, |g, a, b| {
        let b = g.affine(b, 0.3, 0.0);
        let a2 = g.affine(a, 0.7, 0.0);
        let mix = g.add(a2, b);
        ms_ssim_loss_var(g, a, mix, &three).unwrap()
    });
    assert!(e < 1e-4, "ms-ssim M=3 {e}");
    let full_window = SsimConfig { levels: 2, ..SsimConfig::default() };
    let e = grad_check(&[1, 1, 22, 24], (23, 24), 0.0, 1.0, |g, a, b| {
        let b = g.affine(b, 0.3, 0.0);
        let a2 = g.affine(a, 0.7, 0.0);
        let mix = g.add(a2, b);
        ms_ssim_loss_var(g, a, mix, &full_window).unwrap()
    });
    assert!(e < 1e-4, "ms-ssim 11-tap M=2 {e}");
}

#[test]
fn generator_loss_total_matches_breakdown() {
    let mcfg = ModelConfig { depth: 2, base_width: 4, max_width: 8, disc_base_width: 4, ..ModelConfig::default() };
    let (gen, disc) = init_params::<f64>(4, &mcfg).unwrap();
    let x = rand_tensor(&[2, 3, 44, 48], 30, -1.0, 1.0);
    let y = rand_tensor(&[2, 3, 44, 48], 31, -1.0, 1.0);
    for cfg in [LossConfig::default(), LossConfig::analysis_consistent()] {
        let mut g = Graph::new();
        let gp = gen.store.bind(&mut g, true);
        let dp = disc.store.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let yv = g.constant(y.clone());
        let out = gen.forward_vars(&mut g, &gp, xv, Some(yv)).unwrap();
        let fake = disc.forward(&mut g, &dp, xv, out.x_hat).unwrap();
        let vars = generator_loss(&mut g, &cfg, Strategy::S3, xv, yv, &out, Some(fake)).unwrap();
        let b = vars.breakdown(&g, None, &cfg, Strategy::S3).unwrap();
        assert!((b.total - g.scalar(vars.total)).abs() < 1e-10);
        assert!(b.reg >= 1.0 && b.cgan_g > 0.0 && b.ssim_ms > 0.0);
        assert!(generator_loss(&mut g, &cfg, Strategy::S3, xv, yv, &out, None).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_nonnegative_and_zero_on_equal(seed in 0u64..10_000, scale in 0.0f64..3.0) {
        let a = rand_tensor(&[1, 3, 12, 12], seed, -1.0, 1.0);
        let b = rand_tensor(&[1, 3, 12, 12], seed + 1, -1.0, 1.0).map(|v| v * scale);
        let cfg = SsimConfig { levels: 1, ..SsimConfig::default() };
        prop_assert!(smooth_l1(&a, &b).unwrap() >= 0.0);
        prop_assert!(mean_abs_diff(&a, &b).unwrap() >= 0.0);
        prop_assert!(reg_loss(&a, &RegConfig::default()).unwrap() >= 0.0);
        prop_assert!(ssim_loss(&a, &b, &cfg).unwrap() >= 0.0);
        prop_assert!(smooth_l1(&a, &a).unwrap().abs() <= 1e-9);
        prop_assert!(ssim_loss(&a, &a, &cfg).unwrap().abs() <= 1e-9);
        if a != b {
            prop_assert!(smooth_l1(&a, &b).unwrap() > 1e-9);
        }
        let (d, g) = cgan_losses(&a.map(|v| 0.5 + 0.49 * v), &b.map(|v| (0.5 + 0.16 * v).clamp(0.01, 0.99)));
        prop_assert!(d >= 0.0 && g >= 0.0);
    }

    #[test]
    fn ms_ssim_zero_on_equal(seed in 0u64..10_000) {
        let a = rand_tensor(&[1, 1, 44, 44], seed, 0.0, 1.0);
        prop_assert!(ms_ssim_loss(&a, &a, &SsimConfig::default()).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn reg_monotone_in_magnitude(u in 0.0f64..1.2, v in 0.0f64..1.2, sign in prop::bool::ANY) {
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let s = if sign { 1.0 } else { -1.0 };
        let cfg = RegConfig::default();
        let f = |x: f64| reg_loss(&Tensor::scalar(s * x), &cfg).unwrap();
        prop_assert!(f(lo) <= f(hi));
    }

    #[test]
    fn total_linear_in_each_component(seed in 0u64..10_000, k in 0usize..7, delta in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vals: [f64; 7] = std::array::from_fn(|_| rng.gen_range(0.0..2.0));
        let w = LossWeights { lambda_rec: 0.7, lambda_dec: 1.3, lambda_com: 4.0, lambda_cgan: 0.5, alpha: 0.84 };
        let coef = [0.7, 0.7, 0.7, 1.3, 4.0 * 0.84, 4.0 * 0.16, 0.5];
        let parts = |v: &[f64; 7]| LossParts {
            rec_x: v[0], rec_y: v[1], reg: v[2], dec: v[3], enh: v[4], ssim_ms: v[5], cgan_g: v[6], cgan_d: 0.0,
        };
        let t0 = total_loss(&parts(&vals), &w, Strategy::S3, LossFlags::default()).unwrap().total;
        vals[k] += delta;
        let t1 = total_loss(&parts(&vals), &w, Strategy::S3, LossFlags::default()).unwrap().total;
        prop_assert!((t1 - t0 - coef[k] * delta).abs() < 1e-9);
    }

    #[test]
    fn smooth_l1_c1_at_unit_difference(eps in 1e-9f64..1e-4) {
        let f = |d: f64| smooth_l1(&Tensor::scalar(d), &Tensor::scalar(0.0)).unwrap();
        prop_assert!((f(1.0 + eps) - f(1.0 - eps)).abs() <= 2.0 * eps + 1e-12);
        let slope_above = (f(1.0 + 2.0 * eps) - f(1.0 + eps)) / eps;
        let slope_below = (f(1.0 - eps) - f(1.0 - 2.0 * eps)) / eps;
        prop_assert!((slope_above - 1.0).abs() < 1e-6);
        prop_assert!((slope_below - 1.0).abs() < 4.0 * eps + 1e-6);
    }

    #[test]
    fn ms_ssim_single_level_equals_ssim(seed in 0u64..10_000) {
        let cfg = SsimConfig { levels: 1, ..SsimConfig::default() };
        let a = rand_tensor(&[1, 3, 11, 13], seed, 0.0, 1.0);
        let b = rand_tensor(&[1, 3, 11, 13], seed + 7, 0.0, 1.0);
        prop_assert_eq!(ms_ssim_loss(&a, &b, &cfg).unwrap(), ssim_loss(&a, &b, &cfg).unwrap());
    }
}
