//! Box files, attribute tags and whole-dataset reports.
//!
//! A dataset is a directory of `<sequence>.txt` ground-truth files and an
//! optional `attributes.json` mapping sequence names to tag lists. Results
//! live in a second directory under the same file names.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{precision_curve, success_curve, Curve, EvalError, Trajectory};
use crate::bbox::BBox;

/// One box per non-empty line: `x,y,w,h` with optional trailing fields
/// (e.g. a score). Comma, tab or space separated. Boxes with non-finite
/// values or non-positive size are absent.
pub fn parse_box_file(text: &str) -> Result<Trajectory, EvalError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split([',', '\t', ' ']).filter(|f| !f.is_empty()).collect();
        if fields.len() < 4 {
            return Err(EvalError::Parse { line: i + 1, msg: format!("expected at least 4 fields, got {}", fields.len()) });
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .map_err(|_| EvalError::Parse { line: i + 1, msg: format!("not a number: {f:?}") })?;
        }
        let b = BBox::new(v[0], v[1], v[2], v[3]);
        out.push(b.is_valid().then_some(b));
    }
    Ok(out)
}

/// `{"sequence": ["tag", ...], ...}`
pub fn parse_attributes(text: &str) -> Result<BTreeMap<String, Vec<String>>, EvalError> {
    serde_json::from_str(text).map_err(|e| EvalError::Parse { line: e.line(), msg: e.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub p20: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub p20: f64,
    pub auc: f64,
    /// frames with ground truth
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeScore {
    pub p20: f64,
    pub auc: f64,
    pub sequences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub aggregate: AggregateScore,
    pub sequences: BTreeMap<String, SequenceScore>,
    pub attributes: BTreeMap<String, AttributeScore>,
    pub errors: Vec<String>,
    /// mean precision and success curves over scored sequences
    #[serde(skip)]
    pub curves: Option<(Curve, Curve)>,
}

fn read(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Scores every annotated sequence. Missing or malformed results are listed
/// under `errors` and skipped. `tags` overrides `attributes.json`.
pub fn evaluate_dataset(
    results_dir: &Path,
    annotations_dir: &Path,
    tags: Option<&BTreeMap<String, Vec<String>>>,
) -> Result<Report, EvalError> {
    let entries = std::fs::read_dir(annotations_dir)
        .map_err(|e| EvalError::Io(format!("{}: {e}", annotations_dir.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();

    let loaded;
    let tags = match tags {
        Some(t) => t,
        None => {
            let path = annotations_dir.join("attributes.json");
            loaded = if path.is_file() { parse_attributes(&read(&path)?)? } else { BTreeMap::new() };
            &loaded
        }
    };

    let mut sequences = BTreeMap::new();
    let mut curves = Vec::new();
    let mut errors = Vec::new();
    for name in &names {
        let gt = parse_box_file(&read(&annotations_dir.join(format!("{name}.txt")))?)
            .map_err(|e| EvalError::Io(format!("annotation {name}: {e}")))?;
        let res_path = results_dir.join(format!("{name}.txt"));
        if !res_path.is_file() {
            errors.push(format!("{name}: missing results file"));
            continue;
        }
        let scored = read(&res_path)
            .and_then(|t| parse_box_file(&t))
            .and_then(|pred| Ok((precision_curve(&pred, &gt)?, success_curve(&pred, &gt)?)));
        match scored {
            Ok(((pc, p20), (sc, auc))) => {
                let frames = gt.iter().filter(|g| g.is_some()).count();
                sequences.insert(name.clone(), SequenceScore { p20, auc, frames });
                curves.push((pc, sc));
            }
            Err(e) => errors.push(format!("{name}: {e}")),
        }
    }

    let mut attributes = BTreeMap::new();
    let mut by_tag: BTreeMap<&str, Vec<&SequenceScore>> = BTreeMap::new();
    for (seq, seq_tags) in tags {
        if let Some(s) = sequences.get(seq) {
            for t in seq_tags {
                by_tag.entry(t.as_str()).or_default().push(s);
            }
        }
    }
    for (tag, members) in by_tag {
        attributes.insert(
            tag.to_string(),
            AttributeScore {
                p20: mean(members.iter().map(|s| s.p20)),
                auc: mean(members.iter().map(|s| s.auc)),
                sequences: members.len(),
            },
        );
    }

    let aggregate = AggregateScore {
        p20: mean(sequences.values().map(|s| s.p20)),
        auc: mean(sequences.values().map(|s| s.auc)),
    };
    let mean_curves = Curve::average(&curves.iter().map(|c| &c.0).collect::<Vec<_>>())
        .zip(Curve::average(&curves.iter().map(|c| &c.1).collect::<Vec<_>>()));
    Ok(Report { aggregate, sequences, attributes, errors, curves: mean_curves })
}

/// `threshold,value` rows.
pub fn write_curve_csv(curve: &Curve) -> String {
    let mut s = String::from("threshold,value\n");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        s.push_str(&format!("{t},{v}\n"));
    }
    s
}

/// Report JSON plus `_precision.csv` / `_success.csv` next to it, as
/// `(path suffix, contents)` pairs relative to the report stem.
pub fn write_report_files(report: &Report) -> Vec<(&'static str, String)> {
    let mut out = vec![("json", serde_json::to_string_pretty(report).expect("report serialises") + "\n")];
    if let Some((p, s)) = &report.curves {
        out.push(("precision.csv", write_curve_csv(p)));
        out.push(("success.csv", write_curve_csv(s)));
    }
    out
}
