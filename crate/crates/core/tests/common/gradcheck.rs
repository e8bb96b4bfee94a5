//! Central finite-difference gradient checks for both model losses.

use pawfuse::autodiff::{Graph, Matrix, NodeId, ParamSet};
use pawfuse::meta::{MetaNet, MetaNetConfig};
use pawfuse::vision::{ImageHeadConfig, ImageModel, ImageTensor, ReferenceBackbone};
use pawfuse::SeededRng;
use rand::Rng;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-5;
/// Denominator floor of the relative error, so gradients that are zero up
/// to rounding compare on an absolute scale.
pub const REL_FLOOR: f64 = 1e-6;
/// Instances whose smallest ReLU input is closer to the kink than this are
/// redrawn: central differences straddling a kink are not derivatives.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug)]
pub struct CheckResult {
    pub seed: u64,
    pub max_rel_error: f64,
    pub checked: usize,
    pub redraws: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares backprop against central differences on every scalar of `params`.
fn check_all(build: &dyn Fn() -> (Graph, NodeId), params: &ParamSet) -> f64 {
    let (mut g, root) = build();
    g.forward(root, params).unwrap();
    let grads = g.backward(root).unwrap();
    let eval = |p: &ParamSet| {
        let (mut g, root) = build();
        g.forward(root, p).unwrap().item().unwrap()
    };
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for (name, value) in params.iter() {
        let analytic = grads.get(name).cloned().unwrap_or_else(|| Matrix::zeros(value.rows(), value.cols()));
        for k in 0..value.len() {
            let orig = value.data()[k];
            probe.get_mut(name).unwrap().data_mut()[k] = orig + STEP;
            let up = eval(&probe);
            probe.get_mut(name).unwrap().data_mut()[k] = orig - STEP;
            let down = eval(&probe);
            probe.get_mut(name).unwrap().data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(relative_error(analytic.data()[k], numeric));
        }
    }
    worst
}

fn margin_ok(build: &dyn Fn() -> (Graph, NodeId), params: &ParamSet) -> bool {
    let (mut g, root) = build();
    g.forward(root, params).unwrap();
    let stats = g.stats();
    stats.relu_margin > KINK_MARGIN && stats.degenerate_rows == 0
}

fn random_params(params: &mut ParamSet, rng: &mut SeededRng) {
    for (_, m) in params.iter_mut() {
        for v in m.data_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
}

/// Meta-net with M = 4 features reduced to D = 3, RMSE loss on a batch of 3.
pub fn meta_instance(seed: u64) -> CheckResult {
    let mut rng = SeededRng::new(seed);
    let config = MetaNetConfig {
        features: 4,
        reduced_dim: 3,
        interaction_hidden: vec![5],
        head_hidden: vec![4],
        seed,
        ..Default::default()
    };
    let mut redraws = 0;
    loop {
        let phrases: Vec<f64> = (0..4 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phrase_vectors = Matrix::new(4, 5, phrases).unwrap();
        let names = (0..4).map(|i| format!("f{i}")).collect();
        let mut net = MetaNet::with_phrase_vectors(config.clone(), names, phrase_vectors).unwrap();
        random_params(&mut net.params, &mut rng);
        let batch: Vec<Vec<u8>> = (0..3).map(|_| (0..4).map(|_| rng.random_range(0..=1)).collect()).collect();
        let targets: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let build = || {
            let refs: Vec<&[u8]> = batch.iter().map(|b| &b[..]).collect();
            net.loss_graph(&refs, &targets).unwrap()
        };
        if !margin_ok(&build, &net.params) {
            redraws += 1;
            continue;
        }
        return CheckResult {
            seed,
            max_rel_error: check_all(&build, &net.params),
            checked: net.params.scalar_count(),
            redraws,
        };
    }
}

/// Image head on 8×8 inputs (4×4 patches, 3 features, hidden 4), BCE loss on 2 images.
pub fn image_instance(seed: u64) -> CheckResult {
    let mut rng = SeededRng::new(seed);
    let config = ImageHeadConfig { hidden: vec![4], seed, ..Default::default() };
    let mut redraws = 0;
    loop {
        let mut model = ImageModel::new(ReferenceBackbone::new(8, 4, 3).unwrap(), config.clone()).unwrap();
        random_params(&mut model.params, &mut rng);
        let images: Vec<ImageTensor> = (0..2)
            .map(|_| {
                let data = (0..8 * 8 * 3).map(|_| rng.random_range(0.0..=1.0)).collect();
                ImageTensor::new(8, 8, data).unwrap()
            })
            .collect();
        let targets: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..1.0)).collect();
        let build = || {
            let refs: Vec<&ImageTensor> = images.iter().collect();
            model.loss_graph(&refs, &targets).unwrap()
        };
        if !margin_ok(&build, &model.params) {
            redraws += 1;
            continue;
        }
        return CheckResult {
            seed,
            max_rel_error: check_all(&build, &model.params),
            checked: model.params.scalar_count(),
            redraws,
        };
    }
}
