mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use celebbasis::backends::{SyntheticTextEncoder, TextEncoder};
use celebbasis::basis::{interpolate, CelebBasis, IdentityCoefficients};
use celebbasis::dictionary::{build_sets, compose_names, EmbeddingPair, NameList};
use celebbasis::mapper::{
    map_to_coefficients, normalize_groups, FaceFeature, IdentityCheckpoint, MappingNetwork,
    HALF_QUANTIZATION_BOUND,
};
use celebbasis::trainer::{denoising_loss, substitute_identity, PromptTemplate};
use nalgebra::DVector;
use proptest::prelude::*;

const D: usize = 16;
const P: usize = 8;

struct Setup {
    text: SyntheticTextEncoder,
    basis: CelebBasis,
    names: String,
}

fn setup() -> &'static Setup {
    static SETUP: OnceLock<Setup> = OnceLock::new();
    SETUP.get_or_init(|| {
        let text = SyntheticTextEncoder::new(11, D, 77).unwrap();
        let names = std::fs::read_to_string(common::fixture("celeb_names_691.txt")).unwrap();
        let basis = basis_from(&names, &text);
        Setup { text, basis, names }
    })
}

fn basis_from(names: &str, text: &SyntheticTextEncoder) -> CelebBasis {
    let list = NameList::parse(names, "fixture").unwrap();
    let composed = compose_names(&list, text).unwrap();
    let (first, second) = build_sets(&composed).unwrap();
    CelebBasis::build(&first, &second, P, 11).unwrap()
}

fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn unit_coeffs(raw1: &[f64], raw2: &[f64]) -> IdentityCoefficients {
    let mut raw = raw1.to_vec();
    raw.extend_from_slice(raw2);
    normalize_groups(&DVector::from_vec(raw)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mapped_groups_have_unit_norm(seed in any::<u64>(), values in vec_strategy(512)) {
        prop_assume!(values.iter().any(|v| v.abs() > 1e-3));
        let feature = FaceFeature::new(DVector::from_vec(values), "prop").unwrap();
        let net = MappingNetwork::init(P, seed).unwrap();
        let c = map_to_coefficients(&feature, &net).unwrap();
        prop_assert!((c.a1.norm() - 1.0).abs() < 1e-6);
        prop_assert!((c.a2.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn checkpoint_round_trip_within_half_precision(
        r1 in vec_strategy(P),
        r2 in vec_strategy(P),
        fp in any::<u64>(),
    ) {
        prop_assume!(r1.iter().any(|v| v.abs() > 1e-2) && r2.iter().any(|v| v.abs() > 1e-2));
        let c = unit_coeffs(&r1, &r2);
        let ck = IdentityCheckpoint::new(&c, fp, "x").unwrap();
        let back = IdentityCheckpoint::from_bytes(&ck.to_bytes()).unwrap();
        prop_assert_eq!(&back, &ck);
        for (a, b) in c.to_vec().iter().zip(back.coefficients.to_vec()) {
            prop_assert!((a - b).abs() <= HALF_QUANTIZATION_BOUND);
        }
    }

    #[test]
    fn interpolation_is_affine(
        a in vec_strategy(D),
        b in vec_strategy(D),
        lambda in 0.0f64..=1.0,
    ) {
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        prop_assert_eq!(interpolate(&a, &b, 1.0).unwrap(), a.clone());
        prop_assert_eq!(interpolate(&a, &b, 0.0).unwrap(), b.clone());
        let sum = interpolate(&a, &b, lambda).unwrap() + interpolate(&a, &b, 1.0 - lambda).unwrap();
        prop_assert!((sum - (&a + &b)).amax() < 1e-12);
    }

    #[test]
    fn synthesize_inverts_project_in_span(r1 in vec_strategy(P), r2 in vec_strategy(P)) {
        let basis = &setup().basis;
        let coeffs = IdentityCoefficients::new(DVector::from_vec(r1), DVector::from_vec(r2)).unwrap();
        let v = basis.synthesize(&coeffs).unwrap();
        let back = basis.synthesize(&basis.project(&v).unwrap()).unwrap();
        for (x, y) in [(&v.first, &back.first), (&v.second, &back.second)] {
            let rel = (x - y).norm() / x.norm();
            prop_assert!(rel < 1e-5, "relative error {rel:e}");
        }
    }

    #[test]
    fn substitution_keeps_dictionary_rows(words in "[a-z]{1,6}( [a-z]{1,6}){0,4}", r1 in vec_strategy(P), r2 in vec_strategy(P)) {
        let s = setup();
        let template = PromptTemplate::new(format!("{words} {{ID}} and {{ID2}} {words}"));
        let pair_a = s.basis.synthesize(&unit_coeffs(&r1, &r2)).unwrap();
        let pair_b = s.basis.synthesize(&unit_coeffs(&r2, &r1)).unwrap();
        let ids: BTreeMap<String, EmbeddingPair> =
            [("ID".to_string(), pair_a.clone()), ("ID2".to_string(), pair_b.clone())].into();
        let seq = substitute_identity(&template, &ids, &s.text).unwrap();
        prop_assert_eq!(seq.placeholder_spans.len(), 2);
        for (span, pair) in seq.placeholder_spans.iter().zip([&pair_a, &pair_b]) {
            prop_assert_eq!(span.len, 2);
            prop_assert!(seq.token_ids[span.start].is_none() && seq.token_ids[span.start + 1].is_none());
            prop_assert_eq!(seq.embeddings.row(span.start).transpose(), pair.first.clone());
            prop_assert_eq!(seq.embeddings.row(span.start + 1).transpose(), pair.second.clone());
        }
        for (pos, id) in seq.token_ids.iter().enumerate() {
            if let Some(id) = id {
                let expected = s.text.dictionary_embed(&[*id]).unwrap();
                prop_assert_eq!(seq.embeddings.row(pos), expected.row(0));
            }
        }
        let cond = s.text.transform(&seq.embeddings).unwrap();
        prop_assert_eq!(cond.nrows(), seq.len());
    }

    #[test]
    fn loss_nonnegative_zero_iff_equal(a in vec_strategy(12), b in vec_strategy(12)) {
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        let l = denoising_loss(&a, &b).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert_eq!(l == 0.0, a == b);
        prop_assert_eq!(denoising_loss(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn zero_coefficients_give_mean() {
    let basis = &setup().basis;
    let pair = basis.synthesize(&IdentityCoefficients::zeros(P)).unwrap();
    assert_eq!(pair.first, basis.first().mean);
    assert_eq!(pair.second, basis.second().mean);
}

#[test]
fn duplicated_name_rows_give_identical_basis() {
    let s = setup();
    let doubled: String = s
        .names
        .lines()
        .flat_map(|l| [l, "\n", l, "\n"])
        .collect();
    let again = basis_from(&doubled, &s.text);
    assert_eq!(again.to_bytes(), s.basis.to_bytes());
}

#[test]
fn basis_bytes_round_trip() {
    let basis = &setup().basis;
    let bytes = basis.to_bytes();
    let back = CelebBasis::from_bytes(&bytes).unwrap();
    assert_eq!(&back, basis);
    assert_eq!(back.to_bytes(), bytes);
}
