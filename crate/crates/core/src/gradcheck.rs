//! Central finite-difference gradient checking for any [`Layer`].
//!
//! The scalar objective is a fixed random projection of the layer output,
//! `L(y) = Σ r_j y_j`, so the analytic input gradient is `backward(r)`.
//! Numerical derivatives are formed from per-element output differences
//! accumulated in `f64`, which keeps f32 cancellation out of the sum.
//!
//! Inputs should sit at least `3·epsilon` away from activation kinks
//! (0 and 6 for ReLU6), or [`GradCheckOptions::skip_kink_crossings`] should
//! be set so that coordinates whose finite difference straddles a kink are
//! left out.
//!
//! Through a deep f32 network the finite difference carries an absolute
//! rounding floor of a few output ulps divided by `2·epsilon`
//! ([`resolution_floor`]). [`GradCheckOptions::min_resolution_multiple`]
//! restricts sampling to coordinates whose gradient clears that floor.

use crate::error::{Error, Result};
use crate::layers::{Layer, LayerState};
use crate::tensor::{Rng, Tensor};

/// How coordinates are chosen within each checked tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// Uniformly random coordinates.
    Random,
    /// The coordinates with the largest analytic gradient magnitude.
    Largest,
    /// Random coordinates among those whose analytic gradient is at least a
    /// tenth of the tensor's RMS gradient. Near-zero gradients carry no
    /// resolvable signal at f32 precision and only measure rounding noise.
    Significant,
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub epsilon: f32,
    /// Coordinates checked per tensor (input and each parameter).
    pub samples_per_tensor: usize,
    pub selection: Selection,
    pub seed: u64,
    /// Forward mode used for every evaluation.
    pub training: bool,
    pub check_params: bool,
    /// Skip coordinates whose ±epsilon evaluations change the network's
    /// activation pattern (see [`Layer::activation_pattern`]), i.e. whose
    /// finite difference straddles a ReLU/ReLU6 kink. Off by default: for
    /// single layers, callers keep inputs away from kinks instead.
    pub skip_kink_crossings: bool,
    /// Only sample coordinates whose analytic gradient magnitude is at least
    /// this multiple of [`resolution_floor`]. Tensors with no such coordinate
    /// are listed in [`GradCheckReport::unresolved`]. Zero disables it.
    pub min_resolution_multiple: f32,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            samples_per_tensor: 24,
            selection: Selection::Significant,
            seed: 0,
            training: true,
            check_params: true,
            skip_kink_crossings: false,
            min_resolution_multiple: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: String,
    pub checked: usize,
    /// Coordinates left out because their finite difference crossed a kink.
    pub skipped: usize,
    /// Tensors whose gradients all fall below the resolution floor.
    pub unresolved: Vec<String>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

fn pick(grad: &[f32], k: usize, selection: Selection, floor: f32, rng: &mut Rng) -> Vec<usize> {
    if floor > 0.0 {
        let kept: Vec<usize> = (0..grad.len()).filter(|&i| grad[i].abs() >= floor).collect();
        let sub: Vec<f32> = kept.iter().map(|&i| grad[i]).collect();
        return pick(&sub, k, selection, 0.0, rng).into_iter().map(|j| kept[j]).collect();
    }
    let n = grad.len();
    let sample = |mut idx: Vec<usize>, rng: &mut Rng| {
        if idx.len() > k {
            rng.shuffle(&mut idx);
            idx.truncate(k);
            idx.sort_unstable();
        }
        idx
    };
    match selection {
        Selection::Random => sample((0..n).collect(), rng),
        Selection::Significant => {
            let rms = (grad.iter().map(|&g| g as f64 * g as f64).sum::<f64>() / n as f64).sqrt();
            let idx: Vec<usize> = (0..n).filter(|&i| grad[i].abs() as f64 >= 0.1 * rms).collect();
            if idx.is_empty() {
                sample((0..n).collect(), rng)
            } else {
                sample(idx, rng)
            }
        }
        Selection::Largest => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()).then(a.cmp(&b)));
            idx.truncate(k);
            idx
        }
    }
}

/// Spacing between `v` and the next f32 of larger magnitude.
fn ulp(v: f32) -> f64 {
    let a = v.abs();
    if a.is_finite() {
        (a.next_up() - a) as f64
    } else {
        0.0
    }
}

/// Absolute finite-difference error caused by rounding each output once:
/// `Σ_j |r_j| · ulp(y_j) / (2·epsilon)`. Rounding inside a deep network adds
/// a few such ulps, so only gradients well above this are resolvable.
pub fn resolution_floor(r: &Tensor, y: &Tensor, epsilon: f32) -> f64 {
    r.data().iter().zip(y.data()).map(|(&rj, &yj)| rj.abs() as f64 * ulp(yj)).sum::<f64>() / (2.0 * epsilon as f64)
}

/// Directional derivative of the projected loss from two perturbed outputs.
fn projected_difference(r: &Tensor, plus: &Tensor, minus: &Tensor, h: f64) -> f64 {
    r.data()
        .iter()
        .zip(plus.data().iter().zip(minus.data()))
        .map(|(&rj, (&p, &m))| {
            let d = p as f64 - m as f64;
            if d == 0.0 {
                0.0
            } else {
                rj as f64 * (d / h)
            }
        })
        .sum()
}

/// Moves every BatchNorm (any state carrying running statistics) to a
/// generic point: gamma in [0.5, 1.5], |beta| in [0.1, 0.5] with random sign,
/// running mean in [-0.1, 0.1], running variance in [0.5, 1.5].
///
/// Freshly initialised networks put many ReLU6 inputs at exactly zero (zero
/// beta after an all-zero receptive field), sitting on a kink for every
/// epsilon; a nonzero beta moves those sites off it.
pub fn randomize_batchnorm<'a>(states: impl IntoIterator<Item = &'a mut LayerState>, rng: &mut Rng) {
    for s in states {
        if s.running_stats.len() != 2 || s.params.len() != 2 {
            continue;
        }
        for g in s.params[0].value.data_mut() {
            *g = rng.uniform(0.5, 1.5);
        }
        for b in s.params[1].value.data_mut() {
            let mag = rng.uniform(0.1, 0.5);
            *b = if rng.bernoulli(0.5) { mag } else { -mag };
        }
        for m in s.running_stats[0].value.data_mut() {
            *m = rng.uniform(-0.1, 0.1);
        }
        for v in s.running_stats[1].value.data_mut() {
            *v = rng.uniform(0.5, 1.5);
        }
    }
}

/// Re-centres every BatchNorm's running mean on the activations `batch`
/// produces, keeping running variances, gammas and betas. Runs `passes`
/// training-mode forwards (each moves the means by the BatchNorm momentum),
/// then restores the variances. Combined with [`randomize_batchnorm`] this
/// keeps eval-mode activations near the ReLU6 linear region without the large
/// gains that variances estimated from a small batch can produce.
pub fn center_batchnorm_means(layer: &mut dyn Layer, batch: &Tensor, passes: usize) -> Result<()> {
    let saved: Vec<Tensor> = layer
        .states()
        .iter()
        .filter(|s| s.running_stats.len() == 2)
        .map(|s| s.running_stats[1].value.clone())
        .collect();
    for _ in 0..passes {
        layer.forward(batch, true)?;
    }
    let bn_states = layer.states_mut().into_iter().filter(|s| s.running_stats.len() == 2);
    for (s, var) in bn_states.zip(saved) {
        s.running_stats[1].value = var;
    }
    Ok(())
}

/// Compares analytic input and parameter gradients of `layer` with central
/// finite differences and returns the largest relative error
/// `|a - n| / max(|a|, |n|, 1e-8)` over the sampled coordinates.
pub fn gradient_check(layer: &mut dyn Layer, input: &Tensor, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    if !(opts.epsilon > 0.0) {
        return Err(Error::Config(format!("gradient check epsilon must be > 0, got {}", opts.epsilon)));
    }
    let mut rng = Rng::new(opts.seed);
    layer.zero_grad();
    let y = layer.forward(input, opts.training)?;
    let mut base_pattern = Vec::new();
    if opts.skip_kink_crossings {
        layer.activation_pattern(&mut base_pattern);
    }
    let r = Tensor::uniform(y.shape(), -1.0, 1.0, &mut rng);
    let grad_input = layer.backward(&r)?;
    let param_grads: Vec<Vec<(String, Tensor)>> = layer
        .states()
        .iter()
        .map(|s| {
            if s.trainable && opts.check_params {
                s.params.iter().map(|p| (p.name.clone(), p.grad.clone())).collect()
            } else {
                Vec::new()
            }
        })
        .collect();

    let eps = opts.epsilon;
    let floor = (opts.min_resolution_multiple as f64 * resolution_floor(&r, &y, eps)) as f32;
    let mut report =
        GradCheckReport { max_relative_error: 0.0, worst: String::new(), checked: 0, skipped: 0, unresolved: Vec::new() };
    let mut pick_in = |name: &str, grad: &Tensor, rng: &mut Rng| {
        let idx = pick(grad.data(), opts.samples_per_tensor, opts.selection, floor, rng);
        if idx.is_empty() && !grad.is_empty() {
            report.unresolved.push(name.to_string());
        }
        idx
    };
    let input_idx = pick_in("input", &grad_input, &mut rng);
    let param_idx: Vec<Vec<Vec<usize>>> = param_grads
        .iter()
        .map(|grads| grads.iter().map(|(name, g)| pick_in(name, g, &mut rng)).collect())
        .collect();
    let mut pattern = Vec::with_capacity(base_pattern.len());
    // Forward at the current point; reports whether the activation pattern
    // left the base region.
    let mut probe = |layer: &mut dyn Layer, x: &Tensor| -> Result<(Tensor, bool)> {
        let out = layer.forward(x, opts.training)?;
        if !opts.skip_kink_crossings {
            return Ok((out, false));
        }
        pattern.clear();
        layer.activation_pattern(&mut pattern);
        Ok((out, pattern != base_pattern))
    };
    let mut record = |name: &str, idx: usize, analytic: f64, numeric: Option<f64>| {
        let Some(numeric) = numeric else {
            report.skipped += 1;
            return;
        };
        let err = relative_error(analytic, numeric);
        report.checked += 1;
        if report.worst.is_empty() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = format!("{name}[{idx}]");
        }
    };

    let mut x = input.clone();
    for i in input_idx {
        let orig = x.data()[i];
        let (xp, xm) = (orig + eps, orig - eps);
        x.data_mut()[i] = xp;
        let (plus, crossed_p) = probe(layer, &x)?;
        x.data_mut()[i] = xm;
        let (minus, crossed_m) = probe(layer, &x)?;
        x.data_mut()[i] = orig;
        let numeric = (!(crossed_p || crossed_m)).then(|| projected_difference(&r, &plus, &minus, xp as f64 - xm as f64));
        record("input", i, grad_input.data()[i] as f64, numeric);
    }

    for (si, grads) in param_grads.iter().enumerate() {
        for (pi, (name, grad)) in grads.iter().enumerate() {
            for &k in &param_idx[si][pi] {
                let orig = layer.states()[si].params[pi].value.data()[k];
                let (vp, vm) = (orig + eps, orig - eps);
                layer.states_mut()[si].params[pi].value.data_mut()[k] = vp;
                let (plus, crossed_p) = probe(layer, input)?;
                layer.states_mut()[si].params[pi].value.data_mut()[k] = vm;
                let (minus, crossed_m) = probe(layer, input)?;
                layer.states_mut()[si].params[pi].value.data_mut()[k] = orig;
                let numeric =
                    (!(crossed_p || crossed_m)).then(|| projected_difference(&r, &plus, &minus, vp as f64 - vm as f64));
                record(name, k, grad.data()[k] as f64, numeric);
            }
        }
    }
    Ok(report)
}
