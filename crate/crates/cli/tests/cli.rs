mod support;

use std::fs;

use celebbasis::basis::load_basis;
use celebbasis::image::load_image;
use celebbasis::mapper::{load_identity, map_to_coefficients, FingerprintPolicy, MappingNetwork};
use celebbasis::backends::{BackendConfig, Backends};
use celebbasis_cli::RunManifest;
use support::{face, names_691, ok, path_str, run};

fn small_basis(dir: &std::path::Path) {
    ok(dir, &["build-basis", "--names", path_str(&names_691()), "--p", "16", "--dim", "48", "--out", "basis.bin"]);
}

#[test]
fn build_basis_is_reproducible_and_rank_checked() {
    let dir = tempfile::tempdir().unwrap();
    small_basis(dir.path());
    let first = fs::read(dir.path().join("basis.bin")).unwrap();
    small_basis(dir.path());
    assert_eq!(fs::read(dir.path().join("basis.bin")).unwrap(), first);
    let basis = load_basis(dir.path().join("basis.bin")).unwrap();
    assert_eq!((basis.dim(), basis.p()), (48, 16));
    assert!(dir.path().join("basis.bin.manifest.json").exists());

    let o = run(dir.path(), &["build-basis", "--names", path_str(&names_691()), "--p", "10000", "--out", "big.bin"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.starts_with("error[usage]:") && o.stderr.contains("rank"), "{}", o.stderr);
    assert_eq!(o.stderr.trim_end().lines().count(), 1);
    assert!(!dir.path().join("big.bin").exists());
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    small_basis(dir.path());
    assert_eq!(run(dir.path(), &["no-such-command"]).code, 2);
    let unknown = run(dir.path(), &["--backend", "nope", "build-basis", "--names", path_str(&names_691()), "--out", "x.bin"]);
    assert_eq!(unknown.code, 4, "{}", unknown.stderr);
    assert!(unknown.stderr.starts_with("error[adapter]:"));
    fs::write(dir.path().join("bad.bin"), b"CELBBAS1 truncated").unwrap();
    let bad = run(dir.path(), &["generate", "--prompt", "{ID}", "--basis", "bad.bin", "--out", "g"]);
    assert_eq!(bad.code, 3, "{}", bad.stderr);
    assert!(bad.stderr.starts_with("error[data]:"));
    assert_eq!(run(dir.path(), &["--help"]).code, 0);
}

#[test]
fn zero_step_fit_equals_seeded_init() {
    let dir = tempfile::tempdir().unwrap();
    small_basis(dir.path());
    let img = face("bram");
    ok(dir.path(), &["fit", "--image", path_str(&img), "--basis", "basis.bin", "--out", "b.celbid", "--steps", "0", "--seed", "9"]);
    let basis = load_basis(dir.path().join("basis.bin")).unwrap();
    let ck = load_identity(dir.path().join("b.celbid"), Some(basis.fingerprint()), FingerprintPolicy::Error).unwrap();
    assert_eq!(ck.label, "bram");
    let cfg = BackendConfig { seed: basis.provenance().build_seed, embed_dim: 48, ..BackendConfig::default() };
    let backends = Backends::synthetic(&cfg).unwrap();
    let feature = backends.face.extract(&load_image(&img).unwrap()).unwrap();
    let expected = map_to_coefficients(&feature, &MappingNetwork::init(16, 9).unwrap()).unwrap();
    let expected = celebbasis::mapper::IdentityCheckpoint::new(&expected, basis.fingerprint(), "bram").unwrap();
    assert_eq!(ck, expected);
    let log = fs::read_to_string(dir.path().join("b.celbid.log")).unwrap();
    assert_eq!(log.lines().count(), 1);
}

#[test]
fn fit_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    small_basis(dir.path());
    ok(dir.path(), &["fit", "--image", path_str(&face("ada")), "--basis", "basis.bin", "--out", "a.celbid", "--steps", "20"]);
    let before = fs::read(dir.path().join("a.celbid")).unwrap();
    ok(dir.path(), &["replay", path_str(&dir.path().join("a.celbid.manifest.json"))]);
    assert_eq!(fs::read(dir.path().join("a.celbid")).unwrap(), before);

    // A tampered record no longer matches.
    let path = dir.path().join("a.celbid.manifest.json");
    let mut m = RunManifest::load(&path).unwrap();
    m.outputs.insert("a.celbid".into(), "0".repeat(64));
    m.save(&path).unwrap();
    let o = run(dir.path(), &["replay", path_str(&path)]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("replay mismatch"));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    small_basis(dir.path());
    fs::write(dir.path().join("cfg.json"), r#"{"train": {"steps": 3, "seed": 5}}"#).unwrap();
    ok(dir.path(), &["--config", "cfg.json", "fit", "--image", path_str(&face("ada")), "--basis", "basis.bin", "--out", "a.celbid", "--seed", "6"]);
    let m = RunManifest::load(&dir.path().join("a.celbid.manifest.json")).unwrap();
    assert_eq!(m.config["train"]["steps"], 3);
    assert_eq!(m.config["train"]["seed"], 6);
    assert_eq!(m.config["train"]["learning_rate"], 0.005);
    fs::write(dir.path().join("bad.json"), r#"{"trian": {}}"#).unwrap();
    let o = run(dir.path(), &["--config", "bad.json", "fit", "--image", path_str(&face("ada")), "--basis", "basis.bin", "--out", "x"]);
    assert_eq!(o.code, 2);
}

#[test]
fn joint_fit_and_two_identity_generation() {
    let dir = tempfile::tempdir().unwrap();
    small_basis(dir.path());
    let imgs = dir.path().join("faces");
    fs::create_dir(&imgs).unwrap();
    for n in ["ada", "celia"] {
        fs::copy(face(n), imgs.join(format!("{n}.png"))).unwrap();
    }
    ok(dir.path(), &["fit-joint", "--images", "faces", "--basis", "basis.bin", "--out", "joint", "--steps", "10"]);
    assert!(dir.path().join("joint/ada.celbid").exists());
    assert!(dir.path().join("joint/celia.celbid").exists());
    ok(dir.path(), &[
        "generate", "--prompt", "{ID1} talks with {ID2}", "--identity", "ID1=joint/ada.celbid",
        "--identity", "ID2=joint/celia.celbid", "--basis", "basis.bin", "--out", "gen", "--count", "2", "--grid", "--steps", "8",
    ]);
    assert!(dir.path().join("gen/grid.png").exists());
    let missing = run(dir.path(), &["generate", "--prompt", "{ID1} talks with {ID2}", "--identity", "ID1=joint/ada.celbid", "--basis", "basis.bin", "--out", "gen2"]);
    assert_eq!(missing.code, 2);
    assert!(!dir.path().join("gen2").exists());
}

#[test]
fn eval_rejects_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("list.json"), r#"{"entries": []}"#).unwrap();
    let o = run(dir.path(), &["eval", "--manifest", "list.json", "--out", "report.json"]);
    assert_ne!(o.code, 0);
    assert!(!dir.path().join("report.json").exists());
}
