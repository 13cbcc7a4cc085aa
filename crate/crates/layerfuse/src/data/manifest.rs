//! Dataset manifests: one JSON record per line with a feature path and
//! exactly one label form (an utterance class or per-frame classes).

use super::lif::read_lif_header;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    Utterance(usize),
    Frames(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct ManifestRecord {
    /// Absolute path after resolution against the manifest's directory.
    pub feature_path: PathBuf,
    pub labels: Labels,
    pub num_frames: usize,
}

/// Validated collection of feature records sharing (L, D).
#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    /// None only for an empty manifest.
    pub dims: Option<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    feature_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    utt_label: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frame_labels: Option<Vec<usize>>,
}

/// Parse and validate a manifest file. Relative feature paths resolve
/// against the manifest's directory; every referenced file's header is
/// checked so all records share (L, D) and frame label lengths match T.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let labels = match (raw.utt_label, raw.frame_labels) {
            (Some(u), None) => Labels::Utterance(u),
            (None, Some(f)) => Labels::Frames(f),
            (Some(_), Some(_)) => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "record carries both utt_label and frame_labels".to_string(),
                })
            }
            (None, None) => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "record carries neither utt_label nor frame_labels".to_string(),
                })
            }
        };
        let feature_path = {
            let p = PathBuf::from(&raw.feature_path);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let header = read_lif_header(&feature_path)?;
        match dims {
            None => dims = Some((header.num_layers, header.dim)),
            Some((l, d)) => {
                if (header.num_layers, header.dim) != (l, d) {
                    return Err(Error::Data(format!(
                        "{}: dims ({}, {}) differ from the manifest's ({l}, {d})",
                        feature_path.display(),
                        header.num_layers,
                        header.dim
                    )));
                }
            }
        }
        if let Labels::Frames(ref f) = labels {
            if f.len() != header.num_frames {
                return Err(Error::Data(format!(
                    "{}: {} frame labels for {} frames",
                    feature_path.display(),
                    f.len(),
                    header.num_frames
                )));
            }
        }
        records.push(ManifestRecord {
            feature_path,
            labels,
            num_frames: header.num_frames,
        });
    }
    Ok(DatasetManifest { records, dims })
}

/// Write records as JSON lines. Paths are written as given (the generators
/// pass paths relative to the manifest's own directory).
pub fn write_manifest(path: &Path, entries: &[(String, Labels)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (feature_path, labels) in entries {
        let raw = match labels {
            Labels::Utterance(u) => RawRecord {
                feature_path: feature_path.clone(),
                utt_label: Some(*u),
                frame_labels: None,
            },
            Labels::Frames(f) => RawRecord {
                feature_path: feature_path.clone(),
                utt_label: None,
                frame_labels: Some(f.clone()),
            },
        };
        serde_json::to_writer(&mut w, &raw).map_err(|e| Error::Data(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::lif::write_lif;
    use crate::interface::LayerStack;
    use crate::numerics::Prng;

    #[test]
    fn empty_manifest_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        let m = load_manifest(&path).unwrap();
        assert!(m.records.is_empty());
        assert!(m.dims.is_none());
    }

    #[test]
    fn both_label_forms_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"feature_path\":\"x.lif\",\"utt_label\":1,\"frame_labels\":[0]}\n",
        )
        .unwrap();
        match load_manifest(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Prng::new(0);
        let stack = LayerStack::random_normal(&mut rng, 2, 3, 4);
        write_lif(&stack, &dir.path().join("ok.lif")).unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::write(
            &path,
            "{\"feature_path\":\"ok.lif\",\"utt_label\":0}\nnot json\n",
        )
        .unwrap();
        match load_manifest(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_dims_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Prng::new(0);
        write_lif(
            &LayerStack::random_normal(&mut rng, 2, 3, 4),
            &dir.path().join("a.lif"),
        )
        .unwrap();
        write_lif(
            &LayerStack::random_normal(&mut rng, 3, 3, 4),
            &dir.path().join("b.lif"),
        )
        .unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::write(
            &path,
            "{\"feature_path\":\"a.lif\",\"utt_label\":0}\n{\"feature_path\":\"b.lif\",\"utt_label\":1}\n",
        )
        .unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::Data(_))));
    }

    #[test]
    fn frame_label_length_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Prng::new(0);
        write_lif(
            &LayerStack::random_normal(&mut rng, 2, 3, 4),
            &dir.path().join("a.lif"),
        )
        .unwrap();
        let path = dir.path().join("m.jsonl");
        std::fs::write(&path, "{\"feature_path\":\"a.lif\",\"frame_labels\":[0,1]}\n").unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::Data(_))));
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Prng::new(0);
        write_lif(
            &LayerStack::random_normal(&mut rng, 2, 3, 4),
            &dir.path().join("a.lif"),
        )
        .unwrap();
        write_lif(
            &LayerStack::random_normal(&mut rng, 2, 5, 4),
            &dir.path().join("b.lif"),
        )
        .unwrap();
        let entries = vec![
            ("a.lif".to_string(), Labels::Utterance(1)),
            ("b.lif".to_string(), Labels::Frames(vec![0, 1, 2, 1, 0])),
        ];
        let path = dir.path().join("m.jsonl");
        write_manifest(&path, &entries).unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.dims, Some((2, 4)));
        assert_eq!(m.records[0].labels, Labels::Utterance(1));
        assert_eq!(m.records[1].labels, Labels::Frames(vec![0, 1, 2, 1, 0]));
        assert_eq!(m.records[1].num_frames, 5);
    }
}
