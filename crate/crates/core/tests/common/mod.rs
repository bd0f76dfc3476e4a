#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use celebbasis::backends::{BackendConfig, Backends};
use celebbasis::basis::CelebBasis;
use celebbasis::dictionary::{build_sets, compose_names, load_names};
use celebbasis::image::{load_image, Image};

pub fn fixture(name: &str) -> PathBuf {
    // Resolves from any crate in the workspace.
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

pub fn face(name: &str) -> Image {
    load_image(fixture(&format!("faces/{name}.png"))).unwrap()
}

/// Synthetic backends plus a basis fitted on the 691-name fixture.
pub fn toy_setup(cfg: &BackendConfig, p: usize) -> (Backends, CelebBasis) {
    let backends = Backends::synthetic(cfg).unwrap();
    let names = load_names(fixture("celeb_names_691.txt")).unwrap();
    let composed = compose_names(&names, backends.text.as_ref()).unwrap();
    let (first, second) = build_sets(&composed).unwrap();
    let basis = CelebBasis::build(&first, &second, p, cfg.seed).unwrap();
    (backends, basis)
}

use celebbasis::backends::LatentShape;
use celebbasis::mapper::{map_to_coefficients, FaceFeature, MappingNetwork};
use celebbasis::trainer::{evaluate_sample, sample_loss, training_prompts, TrainingSample};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Analytic vs central-difference gradient of the denoising loss with respect
/// to every mapping-network parameter. Returns the worst relative error,
/// measured per parameter against the largest gradient magnitude.
pub fn mapper_gradient_error(seed: u64) -> f64 {
    let cfg = BackendConfig {
        seed,
        embed_dim: 16,
        latent: LatentShape { channels: 4, height: 8, width: 8 },
        ..BackendConfig::default()
    };
    let (backends, basis) = toy_setup(&cfg, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = backends.codec.latent_len();
    let feature = FaceFeature::new(
        DVector::from_fn(512, |_, _| rng.sample::<f64, _>(StandardNormal)),
        "gradcheck",
    )
    .unwrap();
    let mut net = MappingNetwork::init(8, seed).unwrap();
    net.bias = DVector::from_fn(16, |_, _| rng.random_range(-0.1..0.1));
    let sample = TrainingSample {
        template: training_prompts()[rng.random_range(0..6)].clone(),
        z0: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
        t: rng.random_range(50..900),
        eps: DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)),
    };
    let loss = |net: &MappingNetwork| {
        let c = map_to_coefficients(&feature, net).unwrap();
        sample_loss(&c, &sample, &basis, &backends).unwrap()
    };
    let coeffs = map_to_coefficients(&feature, &net).unwrap();
    let eval = evaluate_sample(&coeffs, &sample, &basis, &backends).unwrap();
    let analytic = net.backward(&feature, &eval.coefficient_grad);

    let h = 1e-5;
    let mut numeric_w = analytic.weight.clone();
    for idx in 0..net.weight.len() {
        let orig = net.weight[idx];
        net.weight[idx] = orig + h;
        let up = loss(&net);
        net.weight[idx] = orig - h;
        let down = loss(&net);
        net.weight[idx] = orig;
        numeric_w[idx] = (up - down) / (2.0 * h);
    }
    let mut numeric_b = analytic.bias.clone();
    for idx in 0..net.bias.len() {
        let orig = net.bias[idx];
        net.bias[idx] = orig + h;
        let up = loss(&net);
        net.bias[idx] = orig - h;
        let down = loss(&net);
        net.bias[idx] = orig;
        numeric_b[idx] = (up - down) / (2.0 * h);
    }
    let scale = numeric_w.amax().max(numeric_b.amax());
    assert!(scale > 0.0, "gradient vanished");
    let err = (&analytic.weight - &numeric_w)
        .amax()
        .max((&analytic.bias - &numeric_b).amax());
    err / scale
}
