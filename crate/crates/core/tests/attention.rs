use lungnet::attention::{se_backward, se_excite, se_forward, se_scale, se_squeeze, SeConfig, SeParams, SqueezeExcite};
use lungnet::gradcheck::{gradient_check, GradCheckOptions};
use lungnet::layers::Layer;
use lungnet::{Error, Rng, Tensor};
use proptest::prelude::*;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

struct Weights {
    w1: Tensor,
    b1: Tensor,
    w2: Tensor,
    b2: Tensor,
}

impl Weights {
    fn random(c: usize, d: usize, rng: &mut Rng) -> Self {
        Self {
            w1: Tensor::uniform(&[d, c], -1.0, 1.0, rng),
            b1: Tensor::uniform(&[d], -0.5, 0.5, rng),
            w2: Tensor::uniform(&[c, d], -1.0, 1.0, rng),
            b2: Tensor::uniform(&[c], -0.5, 0.5, rng),
        }
    }

    fn params(&self) -> SeParams<'_> {
        SeParams { w1: &self.w1, b1: Some(&self.b1), w2: &self.w2, b2: Some(&self.b2) }
    }
}

#[test]
fn squeeze_of_one_to_four_is_two_and_a_half() {
    let u = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(se_squeeze(&u).unwrap().data(), [2.5]);
}

#[test]
fn squeeze_is_linear() {
    let u = Tensor::uniform(&[2, 3, 5, 5], -2.0, 2.0, &mut Rng::new(1));
    let z = se_squeeze(&u).unwrap();
    let z2 = se_squeeze(&u.scale(2.0)).unwrap();
    for (a, b) in z.data().iter().zip(z2.data()) {
        assert!((2.0 * a - b).abs() < 1e-6);
    }
}

#[test]
fn squeeze_matches_double_loop_mean() {
    let u = Tensor::uniform(&[3, 5, 4, 4], -3.0, 3.0, &mut Rng::new(2));
    let z = se_squeeze(&u).unwrap();
    assert_eq!(z.shape(), [3, 5]);
    for n in 0..3 {
        for c in 0..5 {
            let mut sum = 0.0f64;
            for i in 0..4 {
                for j in 0..4 {
                    sum += u.data()[((n * 5 + c) * 4 + i) * 4 + j] as f64;
                }
            }
            assert!((z.data()[n * 5 + c] as f64 - sum / 16.0).abs() < 1e-6);
        }
    }
}

#[test]
fn squeeze_of_single_pixel_is_identity() {
    let u = Tensor::uniform(&[2, 6, 1, 1], -1.0, 1.0, &mut Rng::new(3));
    assert_eq!(se_squeeze(&u).unwrap().data(), u.data());
}

#[test]
fn excite_at_zero_input_is_one_half() {
    let c = 8;
    let mut w = Weights::random(c, 2, &mut Rng::new(4));
    w.b1.fill(0.0);
    w.b2.fill(0.0);
    let s = se_excite(&Tensor::zeros(&[3, c]), &w.params()).unwrap();
    assert!(s.data().iter().all(|&v| v == 0.5));
    w.w1.fill(0.0);
    let z = Tensor::uniform(&[3, c], -1.0, 1.0, &mut Rng::new(5));
    let s = se_excite(&z, &w.params()).unwrap();
    assert!(s.data().iter().all(|&v| v == 0.5));
}

#[test]
fn excite_matches_scalar_oracle() {
    let (n, c, d) = (4, 6, 3);
    let mut rng = Rng::new(6);
    let w = Weights::random(c, d, &mut rng);
    let z = Tensor::uniform(&[n, c], -2.0, 2.0, &mut rng);
    let s = se_excite(&z, &w.params()).unwrap();
    for ni in 0..n {
        let hidden: Vec<f64> = (0..d)
            .map(|k| {
                let pre = w.b1.data()[k] as f64
                    + (0..c).map(|j| w.w1.data()[k * c + j] as f64 * z.data()[ni * c + j] as f64).sum::<f64>();
                pre.max(0.0)
            })
            .collect();
        for ci in 0..c {
            let logit =
                w.b2.data()[ci] as f64 + (0..d).map(|k| w.w2.data()[ci * d + k] as f64 * hidden[k]).sum::<f64>();
            assert!((s.data()[ni * c + ci] as f64 - sigmoid(logit)).abs() < 1e-6);
        }
    }
}

#[test]
fn scale_matches_broadcast_oracle() {
    let mut rng = Rng::new(7);
    let u = Tensor::uniform(&[2, 3, 4, 5], -2.0, 2.0, &mut rng);
    let s = Tensor::uniform(&[2, 3], 0.0, 1.0, &mut rng);
    let x = se_scale(&u, &s).unwrap();
    for n in 0..2 {
        for c in 0..3 {
            for p in 0..20 {
                let i = (n * 3 + c) * 20 + p;
                assert!((x.data()[i] - u.data()[i] * s.data()[n * 3 + c]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn shape_errors() {
    let w = Weights::random(4, 2, &mut Rng::new(8));
    let u = Tensor::zeros(&[1, 5, 2, 2]);
    assert!(matches!(se_forward(&u, &w.params()), Err(Error::Shape(_))));
    assert!(matches!(se_squeeze(&Tensor::zeros(&[2, 3])), Err(Error::Shape(_))));
    assert!(matches!(se_scale(&Tensor::zeros(&[1, 4, 2, 2]), &Tensor::zeros(&[1, 3])), Err(Error::Shape(_))));
}

#[test]
fn forward_is_bit_exact_composition() {
    let mut rng = Rng::new(9);
    let w = Weights::random(8, 2, &mut rng);
    let u = Tensor::uniform(&[3, 8, 5, 5], -2.0, 2.0, &mut rng);
    let (x, _) = se_forward(&u, &w.params()).unwrap();
    let staged = se_scale(&u, &se_excite(&se_squeeze(&u).unwrap(), &w.params()).unwrap()).unwrap();
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&x), bits(&staged));
}

#[test]
fn zero_upstream_gradient_gives_zero_gradients() {
    let mut rng = Rng::new(10);
    let w = Weights::random(4, 2, &mut rng);
    let u = Tensor::uniform(&[2, 4, 3, 3], -1.0, 1.0, &mut rng);
    let (_, ctx) = se_forward(&u, &w.params()).unwrap();
    let g = se_backward(&ctx, &w.params(), &Tensor::zeros(u.shape())).unwrap();
    for t in [&g.input, &g.w1, &g.b1, &g.w2, &g.b2] {
        assert_eq!(t.max_abs(), 0.0);
    }
}

/// Random weights with a positive hidden bias, so no hidden unit is dead for
/// every sample. Kink-straddling coordinates are skipped and only gradients
/// at least 100× the f32 resolution floor are sampled; every tensor must
/// keep such coordinates, across many seeds.
#[test]
fn block_gradient_check() {
    for seed in 0..20u64 {
        let mut rng = Rng::new(11 + seed);
        let cfg = SeConfig::new(8, 2).unwrap();
        let mut se = SqueezeExcite::new("se", cfg, &mut rng).unwrap();
        for s in se.states_mut() {
            for p in &mut s.params {
                let (lo, hi) = if p.name.ends_with("fc1.bias") { (0.5, 1.5) } else { (-1.0, 1.0) };
                p.value = Tensor::uniform(p.value.shape(), lo, hi, &mut rng);
            }
        }
        let u = Tensor::uniform(&[2, 8, 3, 3], -2.0, 2.0, &mut rng);
        let opts = GradCheckOptions {
            samples_per_tensor: 40,
            seed,
            skip_kink_crossings: true,
            min_resolution_multiple: 100.0,
            ..Default::default()
        };
        let rep = gradient_check(&mut se, &u, &opts).unwrap();
        assert!(rep.max_relative_error < 1e-2, "seed {seed}: {rep:?}");
        assert!(rep.unresolved.is_empty(), "seed {seed}: {rep:?}");
        // Input plus all four parameter tensors contribute coordinates.
        assert!(rep.checked >= 40, "seed {seed}: {rep:?}");
    }
}

#[test]
fn squeeze_path_contributes_to_input_gradient() {
    let mut rng = Rng::new(12);
    let w = Weights::random(4, 2, &mut rng);
    let u = Tensor::uniform(&[1, 4, 3, 3], -1.0, 1.0, &mut rng);
    let g = Tensor::uniform(u.shape(), -1.0, 1.0, &mut rng);
    let (_, ctx) = se_forward(&u, &w.params()).unwrap();
    let s = se_excite(&se_squeeze(&u).unwrap(), &w.params()).unwrap();
    let direct = se_scale(&g, &s).unwrap();
    let grads = se_backward(&ctx, &w.params(), &g).unwrap();
    assert!(grads.input.max_abs_diff(&direct).unwrap() > 1e-4);
}

fn arb_shape() -> impl Strategy<Value = (usize, usize, usize, usize, usize)> {
    (1usize..4, 1usize..40, 1usize..7, 1usize..7, 1usize..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn output_shape_equals_input_shape((n, c, h, w, r) in arb_shape(), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut se = SqueezeExcite::new("se", SeConfig::new(c, r).unwrap(), &mut rng).unwrap();
        let u = Tensor::uniform(&[n, c, h, w], -3.0, 3.0, &mut rng);
        let x = se.forward(&u, false).unwrap();
        prop_assert_eq!(x.shape(), u.shape());
    }

    #[test]
    fn gates_are_open_interval_and_shrink_magnitude((n, c, h, w, r) in arb_shape(), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let d = SeConfig::new(c, r).unwrap().reduced();
        let wts = Weights::random(c, d, &mut rng);
        let u = Tensor::uniform(&[n, c, h, w], -3.0, 3.0, &mut rng);
        let s = se_excite(&se_squeeze(&u).unwrap(), &wts.params()).unwrap();
        prop_assert!(s.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let (x, _) = se_forward(&u, &wts.params()).unwrap();
        for (a, b) in x.data().iter().zip(u.data()) {
            prop_assert!(a.abs() <= b.abs());
        }
    }
}
