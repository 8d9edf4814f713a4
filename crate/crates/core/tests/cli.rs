use std::fs;
use std::path::Path;

use sardiff::cli::{run_command, Checkpoint, RunConfig, RESOLVED_CONFIG_FILE};
use sardiff::diffusion::ScheduleParams;
use sardiff::predictor::{Predictor, PredictorConfig};
use sardiff::Image;

fn run(args: &[&str]) -> i32 {
    run_command(std::iter::once("sardiff").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_pairs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert_eq!(run(&["simulate", "--looks", "1", "--patch", "32", "--count", "100", "--out", p(&out)]), 0);
    assert_eq!(fs::read_dir(out.join("clean")).unwrap().count(), 100);
    assert_eq!(fs::read_dir(out.join("speckled")).unwrap().count(), 100);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pairs"].as_array().unwrap().len(), 100);
    let resolved = RunConfig::from_file(out.join(RESOLVED_CONFIG_FILE)).unwrap();
    assert_eq!((resolved.count, resolved.patch, resolved.seed), (100, 32, 0));
}

#[test]
fn simulate_is_reproducible_from_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["simulate", "--patch", "16", "--count", "5", "--seed", "4", "--out", p(&a)]), 0);
    let cfg = a.join(RESOLVED_CONFIG_FILE);
    assert_eq!(run(&["simulate", "--config", p(&cfg), "--out", p(&b)]), 0);
    for name in ["manifest.json", "clean/00003.png", "speckled/00004.png"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn despeckle_requires_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("x.png");
    sardiff::cli::save_image(&img, &Image::filled(8, 8, 0.5)).unwrap();
    assert_eq!(run(&["despeckle", "--input", p(&img), "--out", p(dir.path())]), 2);
}

#[test]
fn usage_errors_exit_nonzero() {
    assert_ne!(run(&["frobnicate"]), 0);
    assert_ne!(run(&["simulate", "--no-such-flag"]), 0);
    assert_ne!(run(&["train", "--preset", "huge", "--out", "/tmp/unused"]), 0);
    assert_ne!(run(&["eval", "--input", "/definitely/missing.png", "--reference", "/definitely/missing.png"]), 0);
}

#[test]
fn eval_self_comparison_reports_infinity() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("x.png");
    sardiff::cli::save_image(&img, &Image::from_fn(16, 16, |r, c| ((r * c) % 7) as f32 / 7.0)).unwrap();
    let out = dir.path().join("report");
    assert_eq!(run(&["eval", "--input", p(&img), "--reference", p(&img), "--region", "all:0,0,16,16", "--out", p(&out)]), 0);
    let text = fs::read_to_string(out.join("report.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(record["psnr_db"], "inf");
    assert_eq!(record["ssim"], 1.0);
    assert!(record["enl"]["all"].as_f64().unwrap() > 0.0);
}

#[test]
fn checkpoint_bytes_are_little_endian_f32() {
    let mut predictor = Predictor::init(PredictorConfig::tiny(), 0).unwrap();
    predictor.params_mut().as_map_mut().get_mut("out.conv.bias").unwrap().data_mut()[0] = 1.0;
    let ck = Checkpoint::new(predictor, ScheduleParams::scaled_linear(100), 0);
    let bytes = ck.to_bytes();
    let manifest = ck.manifest();
    let entry = manifest.tensors.iter().find(|e| e.name == "out.conv.bias").unwrap();
    let header = 8 + u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    assert_eq!(&bytes[header + entry.offset..header + entry.offset + 4], &[0x00, 0x00, 0x80, 0x3F]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sdck");
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(sardiff::Error::Corrupt(_))));
}

#[test]
fn train_despeckle_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let sim = root.join("sim");
    assert_eq!(run(&["simulate", "--patch", "8", "--count", "12", "--scenes", "3", "--out", p(&sim)]), 0);
    let train_args = |out: &Path| {
        vec![
            "train".to_string(),
            "--data-dir".into(),
            p(&sim).into(),
            "--preset".into(),
            "tiny".into(),
            "--steps".into(),
            "4".into(),
            "--batch".into(),
            "2".into(),
            "--T".into(),
            "8".into(),
            "--checkpoint-every".into(),
            "2".into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let (t1, t2) = (root.join("t1"), root.join("t2"));
    assert_eq!(run_command(std::iter::once("sardiff".to_string()).chain(train_args(&t1))), 0);
    assert_eq!(run_command(std::iter::once("sardiff".to_string()).chain(train_args(&t2))), 0);
    assert!(t1.join("checkpoint_000002.sdck").exists());
    assert_eq!(fs::read(t1.join("model.sdck")).unwrap(), fs::read(t2.join("model.sdck")).unwrap());
    let losses = |d: &Path| -> Vec<f64> {
        fs::read_to_string(d.join("loss.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["loss"].as_f64().unwrap())
            .collect()
    };
    assert_eq!(losses(&t1).len(), 4);
    assert_eq!(losses(&t1), losses(&t2));
    let ck = Checkpoint::load(t1.join("model.sdck")).unwrap();
    assert_eq!((ck.iteration, ck.schedule.steps, ck.predictor.config().input_size), (4, 8, 8));

    let model = t1.join("model.sdck");
    let speckled = sim.join("speckled");
    let (d1, d2) = (root.join("d1"), root.join("d2"));
    for d in [&d1, &d2] {
        assert_eq!(run(&["despeckle", "--checkpoint", p(&model), "--input", p(&speckled), "--shifts", "0,0;3,5", "--out", p(d)]), 0);
    }
    assert_eq!(fs::read(d1.join("00000.png")).unwrap(), fs::read(d2.join("00000.png")).unwrap());
    let rerun = root.join("d3");
    assert_eq!(run(&["despeckle", "--config", p(&d1.join(RESOLVED_CONFIG_FILE)), "--out", p(&rerun)]), 0);
    assert_eq!(fs::read(d1.join("00011.png")).unwrap(), fs::read(rerun.join("00011.png")).unwrap());

    let big = root.join("big.png");
    sardiff::cli::save_image(&big, &Image::filled(12, 10, 0.4)).unwrap();
    assert_ne!(run(&["despeckle", "--checkpoint", p(&model), "--input", p(&big), "--out", p(&root.join("d4"))]), 0);
    assert_eq!(run(&["despeckle", "--checkpoint", p(&model), "--input", p(&big), "--resize", "--out", p(&root.join("d4"))]), 0);
    assert_eq!(sardiff::cli::load_image(root.join("d4/big.png")).unwrap().dims(), (12, 10));

    let report = root.join("eval");
    // SSIM needs at least 11×11 images; 8×8 patches are rejected.
    assert_ne!(run(&["eval", "--input", p(&d1), "--reference", p(&sim.join("clean")), "--out", p(&report)]), 0);
}
