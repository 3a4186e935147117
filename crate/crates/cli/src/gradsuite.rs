//! The finite-difference suite behind `lungnet gradcheck`: every layer type,
//! the SE block, inverted residual blocks and a reduced end-to-end model.

use lungnet::attention::{SeConfig, SqueezeExcite};
use lungnet::gradcheck::{
    center_batchnorm_means, gradient_check, randomize_batchnorm, GradCheckOptions, GradCheckReport,
};
use lungnet::layers::{
    BatchNorm2d, BnConfig, Conv2d, Conv2dOptions, Dropout, GlobalAvgPool, Layer, Linear, Relu6, Sigmoid,
};
use lungnet::models::{build_model, Arch, InvertedResidual, ModelConfig};
use lungnet::{Result, Rng, Tensor};

/// Threshold for single layers and blocks.
pub const LAYER_THRESHOLD: f64 = 1e-2;
/// Threshold for the end-to-end model.
pub const MODEL_THRESHOLD: f64 = 2e-2;

/// One named check: a layer, the input it is probed at, and the options.
pub struct GradCase {
    pub name: String,
    pub threshold: f64,
    pub layer: Box<dyn Layer>,
    pub input: Tensor,
    pub options: GradCheckOptions,
    /// Tensors allowed to have every gradient below the resolution floor.
    pub max_unresolved: usize,
}

impl GradCase {
    pub fn new(name: &str, threshold: f64, layer: Box<dyn Layer>, input: Tensor, options: GradCheckOptions) -> Self {
        Self { name: name.to_string(), threshold, layer, input, options, max_unresolved: 0 }
    }

    pub fn run(mut self) -> Result<CaseResult> {
        let report = gradient_check(self.layer.as_mut(), &self.input, &self.options)?;
        Ok(CaseResult { name: self.name, threshold: self.threshold, max_unresolved: self.max_unresolved, report })
    }
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub name: String,
    pub threshold: f64,
    pub max_unresolved: usize,
    pub report: GradCheckReport,
}

impl CaseResult {
    /// At least one coordinate compared, every error under the threshold,
    /// and no more unresolved tensors than allowed.
    pub fn passed(&self) -> bool {
        self.report.checked > 0
            && self.report.max_relative_error < self.threshold
            && self.report.unresolved.len() <= self.max_unresolved
    }

    pub fn line(&self) -> String {
        let r = &self.report;
        let mut s = format!(
            "{} {:<28} max_rel_err {:.3e} (< {:.0e})  checked {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            r.max_relative_error,
            self.threshold,
            r.checked
        );
        if r.skipped > 0 {
            s.push_str(&format!("  kink-skipped {}", r.skipped));
        }
        if !r.unresolved.is_empty() {
            s.push_str(&format!("  unresolved {} (≤ {})", r.unresolved.len(), self.max_unresolved));
        }
        if !self.passed() && !r.worst.is_empty() {
            s.push_str(&format!("  worst {}", r.worst));
        }
        s
    }
}

/// Values in [lo, hi] kept at least `gap` away from each kink.
fn avoid_kinks(shape: &[usize], lo: f32, hi: f32, kinks: &[f32], gap: f32, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v = rng.uniform(lo, hi);
            if kinks.iter().all(|k| (v - k).abs() >= gap) {
                break v;
            }
        })
        .collect();
    Tensor::new(shape, data).expect("shape matches data length")
}

/// Every check of `lungnet gradcheck`, deterministic in `seed`.
pub fn standard_suite(seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = Rng::derive(seed, 0x6C, 0);
    let opts = GradCheckOptions { seed, ..Default::default() };
    let eval = GradCheckOptions { training: false, ..opts.clone() };
    let mut cases = Vec::new();

    let x = Tensor::uniform(&[2, 3, 6, 6], -1.0, 1.0, &mut rng);
    let conv = Conv2d::new("conv3x3", 3, 4, 3, Conv2dOptions { stride: 1, padding: 1, groups: 1 }, true, &mut rng)?;
    cases.push(GradCase::new("conv 3x3 stride 1", LAYER_THRESHOLD, Box::new(conv), x.clone(), opts.clone()));
    let conv = Conv2d::new("conv3x3s2", 3, 4, 3, Conv2dOptions { stride: 2, padding: 1, groups: 1 }, false, &mut rng)?;
    cases.push(GradCase::new("conv 3x3 stride 2", LAYER_THRESHOLD, Box::new(conv), x.clone(), opts.clone()));
    let pw = Conv2d::new("pointwise", 3, 5, 1, Conv2dOptions::default(), false, &mut rng)?;
    cases.push(GradCase::new("conv 1x1 pointwise", LAYER_THRESHOLD, Box::new(pw), x, opts.clone()));
    let x = Tensor::uniform(&[2, 4, 6, 6], -1.0, 1.0, &mut rng);
    let dw = Conv2d::new("depthwise", 4, 4, 3, Conv2dOptions { stride: 2, padding: 1, groups: 4 }, false, &mut rng)?;
    cases.push(GradCase::new("conv 3x3 depthwise", LAYER_THRESHOLD, Box::new(dw), x, opts.clone()));

    let x = Tensor::uniform(&[4, 3, 4, 4], -2.0, 2.0, &mut rng);
    for (name, o) in [("batchnorm (training)", &opts), ("batchnorm (eval)", &eval)] {
        let mut bn = BatchNorm2d::new("bn", 3, BnConfig::default());
        randomize_batchnorm(bn.states_mut(), &mut rng);
        cases.push(GradCase::new(name, LAYER_THRESHOLD, Box::new(bn), x.clone(), o.clone()));
    }

    let x = avoid_kinks(&[2, 3, 4, 4], -2.0, 8.0, &[0.0, 6.0], 3e-3, &mut rng);
    cases.push(GradCase::new("relu6", LAYER_THRESHOLD, Box::new(Relu6::default()), x.clone(), opts.clone()));
    cases.push(GradCase::new("global average pool", LAYER_THRESHOLD, Box::new(GlobalAvgPool::default()), x, opts.clone()));
    let x = Tensor::uniform(&[2, 3, 4, 4], -4.0, 4.0, &mut rng);
    cases.push(GradCase::new("sigmoid", LAYER_THRESHOLD, Box::new(Sigmoid::default()), x, opts.clone()));
    // Training-mode dropout redraws its mask on every forward, so only the
    // deterministic eval path is a differentiable function.
    let x = Tensor::uniform(&[4, 8], -1.0, 1.0, &mut rng);
    let drop = Dropout::new(0.2, Rng::derive(seed, 0x6C, 1))?;
    cases.push(GradCase::new("dropout (eval)", LAYER_THRESHOLD, Box::new(drop), x.clone(), eval.clone()));
    let fc = Linear::new("fc", 8, 5, &mut rng)?;
    cases.push(GradCase::new("linear", LAYER_THRESHOLD, Box::new(fc), x, opts.clone()));

    // Blocks are probed at generic points: random SE weights with a positive
    // hidden bias so no hidden unit is dead for every sample, BatchNorm moved
    // off its initial values. Coordinates whose finite difference straddles
    // a ReLU/ReLU6 kink are skipped, and only gradients at least 100× the
    // f32 resolution floor are sampled; every tensor must have such a
    // coordinate.
    let block_opts =
        GradCheckOptions { skip_kink_crossings: true, min_resolution_multiple: 100.0, ..opts.clone() };
    let mut se = SqueezeExcite::new("se", SeConfig::new(8, 2)?, &mut rng)?;
    for s in se.states_mut() {
        for p in &mut s.params {
            let (lo, hi) = if p.name.ends_with("fc1.bias") { (0.5, 1.5) } else { (-1.0, 1.0) };
            p.value = Tensor::uniform(p.value.shape(), lo, hi, &mut rng);
        }
    }
    let x = Tensor::uniform(&[2, 8, 3, 3], -2.0, 2.0, &mut rng);
    let se_opts = GradCheckOptions { samples_per_tensor: 40, ..block_opts.clone() };
    cases.push(GradCase::new("squeeze-excitation block", LAYER_THRESHOLD, Box::new(se), x, se_opts));

    let ir_opts = GradCheckOptions { training: false, ..block_opts };
    for (name, out_ch, stride) in [("inverted residual (skip)", 4, 1), ("inverted residual (stride 2)", 6, 2)] {
        let mut ir = InvertedResidual::new("block", 4, out_ch, stride, 6, &mut rng)?;
        randomize_batchnorm(ir.states_mut(), &mut rng);
        let x = Tensor::uniform(&[2, 4, 5, 5], -1.0, 1.0, &mut rng);
        cases.push(GradCase::new(name, LAYER_THRESHOLD, Box::new(ir), x, ir_opts.clone()));
    }

    // The whole reduced model at 16×16 input, at a generic BatchNorm point
    // whose running means are centred on a separate calibration batch.
    // Rounding through ~50 layers needs a higher resolution multiple; at most
    // 5% of tensors may fall entirely below it.
    let cfg = ModelConfig { input_size: 16, ..ModelConfig::mini(Arch::MobileNetLung) };
    let mut model = build_model(&cfg, &mut Rng::derive(seed, 0x6C, 2))?;
    randomize_batchnorm(model.states_mut(), &mut rng);
    let calibration = Tensor::uniform(&[16, 3, 16, 16], -1.0, 1.0, &mut rng);
    center_batchnorm_means(&mut model, &calibration, 60)?;
    let tensors = 1 + model.states().iter().map(|s| s.params.len()).sum::<usize>();
    let x = Tensor::uniform(&[2, 3, 16, 16], -1.0, 1.0, &mut rng);
    let model_opts = GradCheckOptions {
        samples_per_tensor: 8,
        training: false,
        skip_kink_crossings: true,
        min_resolution_multiple: 500.0,
        ..opts
    };
    let mut case = GradCase::new("mini mobilenet_lung (end-to-end)", MODEL_THRESHOLD, Box::new(model), x, model_opts);
    case.max_unresolved = tensors / 20;
    cases.push(case);
    Ok(cases)
}

/// Runs every case in order.
pub fn run_suite(cases: Vec<GradCase>) -> Result<Vec<CaseResult>> {
    cases.into_iter().map(GradCase::run).collect()
}
