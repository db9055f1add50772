//! Checkpoints, resume and image-folder loading.

use std::path::Path;

use hyperstar::data::{generate_synthetic_dataset, load_checkpoint, load_checkpoint_into, load_image_folder, save_checkpoint};
use hyperstar::nets::{ModelBundle, TrainConfig};
use hyperstar::Error;

fn snapshot(b: &ModelBundle) -> Vec<(String, Vec<f64>)> {
    b.networks()
        .iter()
        .flat_map(|(net, p)| p.params().into_iter().map(move |q| (format!("{net}.{}", q.name), q.tensor.to_vec())))
        .collect()
}

#[test]
fn round_trip_preserves_everything() {
    let cfg = TrainConfig { n: 3, ..TrainConfig::micro() };
    let data = generate_synthetic_dataset(cfg.num_domains, cfg.image_size, cfg.synthetic_count, 1).unwrap();
    let mut b = ModelBundle::new(&cfg).unwrap();
    for _ in 0..2 {
        b.train_step(&data).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.hsg2");
    let bytes = save_checkpoint(&b, &path).unwrap();
    assert_eq!(bytes, std::fs::metadata(&path).unwrap().len());

    let mut back = load_checkpoint(&path).unwrap();
    assert_eq!(back.cfg, b.cfg);
    assert_eq!(back.iter, 2);
    assert_eq!(snapshot(&back), snapshot(&b));
    // the next step is the same in both
    let r1 = b.train_step(&data).unwrap();
    let r2 = back.train_step(&data).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(snapshot(&back), snapshot(&b));
}

fn expect_checkpoint_error(path: &Path) {
    match load_checkpoint(path) {
        Err(Error::Checkpoint(_)) => {}
        other => panic!("expected a checkpoint error, got {:?}", other.map(|b| b.iter)),
    }
}

#[test]
fn corrupted_files_are_rejected() {
    let cfg = TrainConfig::micro();
    let b = ModelBundle::new(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.hsg2");
    save_checkpoint(&b, &good).unwrap();
    let bytes = std::fs::read(&good).unwrap();

    let bad_magic = dir.path().join("magic.hsg2");
    let mut v = bytes.clone();
    v[0] = b'X';
    std::fs::write(&bad_magic, v).unwrap();
    expect_checkpoint_error(&bad_magic);

    let truncated = dir.path().join("short.hsg2");
    std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    expect_checkpoint_error(&truncated);

    // a different topology is refused and leaves the target untouched
    let mut other = ModelBundle::new(&TrainConfig { n: 2, ..cfg }).unwrap();
    let before = snapshot(&other);
    assert!(load_checkpoint_into(&mut other, &good).is_err());
    assert_eq!(snapshot(&other), before);
}

fn write_png(path: &Path, rgb: [u8; 3]) {
    image::RgbImage::from_pixel(12, 10, image::Rgb(rgb)).save(path).unwrap();
}

#[test]
fn image_folder_loading() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for (d, color) in [("cat", [255, 0, 0]), ("dog", [0, 0, 255])] {
        std::fs::create_dir(root.join(d)).unwrap();
        write_png(&root.join(d).join("a.png"), color);
        write_png(&root.join(d).join("b.PNG"), color);
    }
    std::fs::write(root.join("cat").join("notes.txt"), "ignored").unwrap();
    std::fs::write(root.join("dog").join("broken.png"), "not a png").unwrap();

    let ds = load_image_folder(root, 8).unwrap();
    assert_eq!(ds.domain_names, vec!["cat", "dog"]);
    assert_eq!(ds.labels, vec![0, 0, 1, 1]);
    assert_eq!(ds.size, 8);
    let plane = 64;
    assert!(ds.images[0][..plane].iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(ds.images[0][plane..].iter().all(|v| (v + 1.0).abs() < 1e-12));
    assert!(ds.images[3][2 * plane..].iter().all(|v| (v - 1.0).abs() < 1e-12));

    std::fs::create_dir(root.join("empty")).unwrap();
    assert!(matches!(load_image_folder(root, 8), Err(Error::Data(_))));
    assert!(matches!(load_image_folder(&root.join("missing"), 8), Err(Error::Io { .. })));
}
