use std::path::{Path, PathBuf};

use visolve::ingest::fetch::{audit_dataset, dataset_info, verify_checksum, DATASETS};
use visolve::ingest::{load_libsvm, read_pgm, write_pgm, LibsvmOptions};
use visolve::Error;
use visolve_core::image::synthetic_shapes;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn error_line(name: &str) -> usize {
    match load_libsvm(&fixture(name), &LibsvmOptions::default()) {
        Err(Error::Libsvm { line, .. }) => line,
        other => panic!("{name}: expected a parse error, got {other:?}"),
    }
}

#[test]
fn single_row_fixture() {
    let ds = load_libsvm(&fixture("single.libsvm"), &LibsvmOptions::default()).unwrap();
    assert_eq!(ds.len(), 1);
    assert_eq!(ds.dim(), 7);
    assert_eq!(ds.labels(), &[1.0]);
    assert_eq!(ds.rows()[0].entries, vec![(2, 0.5), (6, 1.0)]);
}

#[test]
fn mushrooms_head_matches_the_dataset_layout() {
    let info = dataset_info("mushrooms").unwrap();
    let opts = LibsvmOptions {
        dim: Some(info.features),
        binary_labels: false,
    };
    let ds = load_libsvm(&fixture("mushrooms_head.libsvm"), &opts).unwrap();
    assert_eq!(ds.len(), 5);
    assert_eq!(ds.dim(), 112);
    for (row, label) in ds.rows().iter().zip(ds.labels()) {
        assert!(*label == 1.0 || *label == 2.0);
        assert!(row.max_index().unwrap() < 112);
        assert!(row.entries.iter().all(|&(_, v)| v == 1.0));
    }
}

#[test]
fn malformed_fixtures_report_their_line() {
    for (name, line) in [
        ("bad_index.libsvm", 3),
        ("bad_label.libsvm", 2),
        ("bad_order.libsvm", 2),
        ("bad_repeat.libsvm", 2),
        ("bad_token.libsvm", 1),
        ("bad_value.libsvm", 1),
        ("bad_zero.libsvm", 1),
        ("empty.libsvm", 2),
    ] {
        assert_eq!(error_line(name), line, "{name}");
    }
}

#[test]
fn missing_file_names_the_path() {
    let err = load_libsvm(&fixture("absent.libsvm"), &LibsvmOptions::default()).unwrap_err();
    assert!(err.to_string().contains("absent.libsvm"), "{err}");
}

#[test]
fn pgm_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shapes.pgm");
    let img = synthetic_shapes(12, 20).unwrap();
    write_pgm(&path, &img).unwrap();
    let back = read_pgm(&path).unwrap();
    assert_eq!((back.height(), back.width()), (12, 20));
    for (a, b) in img.pixels().iter().zip(back.pixels()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

#[test]
fn local_dataset_copies_have_the_documented_shape() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    for info in &DATASETS {
        let Some(shape) = audit_dataset(&data, info.name).unwrap() else {
            eprintln!("skipping {}: no local copy", info.name);
            continue;
        };
        assert_eq!(shape, (info.samples, info.features), "{}", info.name);
        verify_checksum(&data, info.name).unwrap();
    }
}
