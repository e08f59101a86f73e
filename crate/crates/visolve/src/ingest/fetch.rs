//! Downloads the public LIBSVM binary-classification datasets into
//! `<data_dir>/<name>.libsvm` with a sibling `<name>.sha256` in `sha256sum` format.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{io_err, Error, Result};
use crate::ingest::libsvm::{load_libsvm, LibsvmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetInfo {
    pub name: &'static str,
    pub samples: usize,
    pub features: usize,
}

pub const DATASETS: [DatasetInfo; 3] = [
    DatasetInfo {
        name: "mushrooms",
        samples: 8124,
        features: 112,
    },
    DatasetInfo {
        name: "a9a",
        samples: 32561,
        features: 123,
    },
    DatasetInfo {
        name: "w8a",
        samples: 49749,
        features: 300,
    },
];

const BASE_URL: &str = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary";
const MAX_BYTES: u64 = 256 << 20;

pub fn dataset_info(name: &str) -> Option<&'static DatasetInfo> {
    DATASETS.iter().find(|d| d.name == name)
}

pub fn dataset_path(data_dir: &Path, name: &str) -> PathBuf {
    data_dir.join(format!("{name}.libsvm"))
}

pub fn checksum_path(data_dir: &Path, name: &str) -> PathBuf {
    data_dir.join(format!("{name}.sha256"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(io_err(path))?))
}

fn recorded_checksum(path: &Path) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let digest = text.split_whitespace().next().unwrap_or("");
    if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(Error::Fetch(format!(
            "{} does not hold a sha256 digest",
            path.display()
        )));
    }
    Ok(Some(digest.to_ascii_lowercase()))
}

/// Checks `<name>.libsvm` against `<name>.sha256`. `Ok(false)` when no
/// checksum has been recorded yet.
pub fn verify_checksum(data_dir: &Path, name: &str) -> Result<bool> {
    let path = dataset_path(data_dir, name);
    let Some(expected) = recorded_checksum(&checksum_path(data_dir, name))? else {
        return Ok(false);
    };
    let got = sha256_file(&path)?;
    if got != expected {
        return Err(Error::Checksum {
            path,
            expected,
            got,
        });
    }
    Ok(true)
}

fn write_checksum(data_dir: &Path, name: &str, digest: &str) -> Result<()> {
    let path = checksum_path(data_dir, name);
    fs::write(&path, format!("{digest}  {name}.libsvm\n")).map_err(io_err(path))
}

fn download(url: &str) -> Result<Vec<u8>> {
    let mut resp = ureq::get(url)
        .call()
        .map_err(|e| Error::Fetch(format!("{url}: {e}")))?;
    resp.body_mut()
        .with_config()
        .limit(MAX_BYTES)
        .read_to_vec()
        .map_err(|e| Error::Fetch(format!("{url}: {e}")))
}

/// Parses a local copy with the documented feature count and returns `(N, d)`;
/// `None` when the file is absent.
pub fn audit_dataset(data_dir: &Path, name: &str) -> Result<Option<(usize, usize)>> {
    let info =
        dataset_info(name).ok_or_else(|| Error::Fetch(format!("unknown dataset `{name}`")))?;
    let path = dataset_path(data_dir, name);
    if !path.exists() {
        return Ok(None);
    }
    let opts = LibsvmOptions {
        dim: Some(info.features),
        binary_labels: false,
    };
    let ds = load_libsvm(&path, &opts)?;
    Ok(Some((ds.len(), ds.dim())))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchOutcome {
    pub path: PathBuf,
    pub sha256: String,
    pub downloaded: bool,
}

/// Downloads `name` unless a copy is present, verifies or records its
/// checksum, and checks its shape against [`DATASETS`].
pub fn fetch_dataset(name: &str, data_dir: &Path) -> Result<FetchOutcome> {
    let info = dataset_info(name).ok_or_else(|| {
        let known: Vec<_> = DATASETS.iter().map(|d| d.name).collect();
        Error::Fetch(format!(
            "unknown dataset `{name}` (known: {})",
            known.join(", ")
        ))
    })?;
    fs::create_dir_all(data_dir).map_err(io_err(data_dir))?;
    let path = dataset_path(data_dir, name);
    let downloaded = !path.exists();
    if downloaded {
        let url = format!("{BASE_URL}/{name}");
        log::info!("downloading {url}");
        let bytes = download(&url)?;
        let tmp = path.with_extension("part");
        fs::write(&tmp, &bytes).map_err(io_err(&tmp))?;
        if let Some(expected) = recorded_checksum(&checksum_path(data_dir, name))? {
            let got = sha256_hex(&bytes);
            if got != expected {
                let _ = fs::remove_file(&tmp);
                return Err(Error::Checksum {
                    path,
                    expected,
                    got,
                });
            }
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
    }
    if !verify_checksum(data_dir, name)? {
        write_checksum(data_dir, name, &sha256_file(&path)?)?;
    }
    let (samples, features) = audit_dataset(data_dir, name)?.unwrap_or_default();
    if (samples, features) != (info.samples, info.features) {
        return Err(Error::Fetch(format!(
            "{name}: parsed {samples} samples × {features} features, expected {} × {}",
            info.samples, info.features
        )));
    }
    Ok(FetchOutcome {
        sha256: sha256_file(&path)?,
        path,
        downloaded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dataset_path(dir.path(), "mushrooms");
        fs::write(&path, "1 1:1\n").unwrap();
        assert!(!verify_checksum(dir.path(), "mushrooms").unwrap());
        write_checksum(dir.path(), "mushrooms", &sha256_file(&path).unwrap()).unwrap();
        assert!(verify_checksum(dir.path(), "mushrooms").unwrap());
        fs::write(&path, "1 1:2\n").unwrap();
        assert!(matches!(
            verify_checksum(dir.path(), "mushrooms"),
            Err(Error::Checksum { .. })
        ));
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn unknown_and_absent() {
        let dir = tempfile::tempdir().unwrap();
        assert!(fetch_dataset("iris", dir.path()).is_err());
        assert_eq!(audit_dataset(dir.path(), "a9a").unwrap(), None);
    }

    #[test]
    fn local_copy_with_wrong_shape_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dataset_path(dir.path(), "mushrooms"), "1 3:1\n-1 112:1\n").unwrap();
        let err = fetch_dataset("mushrooms", dir.path()).unwrap_err();
        assert!(err.to_string().contains("expected 8124"), "{err}");
        assert!(checksum_path(dir.path(), "mushrooms").exists());
    }
}
