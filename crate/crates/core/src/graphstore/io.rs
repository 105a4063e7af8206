//! Dataset directory format.
//!
//! ```text
//! manifest.json   DatasetManifest
//! features.csv    no header; line i = node i, `num_features` comma-separated decimals
//! edges.csv       header `src,dst,rel`; one directed edge per line, rel in [0, num_relations)
//! labels.csv      header `node,label`; one line per node
//! splits.json     {"train": [...], "val": [...], "test": [...]}
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

use super::graph::{MultiRelationGraph, Splits};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_relations: usize,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    #[serde(default = "default_features")]
    pub features: String,
    #[serde(default = "default_edges")]
    pub edges: String,
    #[serde(default = "default_labels")]
    pub labels: String,
    #[serde(default = "default_splits")]
    pub splits: String,
}

fn default_features() -> String {
    "features.csv".into()
}
fn default_edges() -> String {
    "edges.csv".into()
}
fn default_labels() -> String {
    "labels.csv".into()
}
fn default_splits() -> String {
    "splits.json".into()
}

impl DatasetManifest {
    pub fn describe(g: &MultiRelationGraph) -> Self {
        Self {
            num_nodes: g.n(),
            num_features: g.m(),
            num_relations: g.k(),
            num_classes: g.num_classes(),
            class_names: g.class_names().to_vec(),
            features: default_features(),
            edges: default_edges(),
            labels: default_labels(),
            splits: default_splits(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn count_mismatch(path: &Path, line: usize, what: &str, expected: usize, found: usize) -> Error {
    Error::load(
        path,
        line,
        format!("count mismatch: manifest declares {expected} {what}, file has {found}"),
    )
}

/// Data lines of a CSV file as `(1-based line number, text)`, skipping blank lines.
fn data_lines(text: &str, skip_header: bool) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(usize::from(skip_header))
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_usize(path: &Path, line: usize, field: &str, name: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::load(path, line, format!("`{name}` is not a non-negative integer: {field:?}")))
}

fn check_header(path: &Path, text: &str, expected: &str) -> Result<()> {
    let header = text.lines().next().unwrap_or("").trim();
    let normalized: String = header.split(',').map(str::trim).collect::<Vec<_>>().join(",");
    if normalized != expected {
        return Err(Error::load(path, 1, format!("expected header `{expected}`, found `{header}`")));
    }
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<MultiRelationGraph> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: DatasetManifest = serde_json::from_str(&read(&manifest_path)?)
        .map_err(|e| Error::load(&manifest_path, e.line(), e.to_string()))?;
    let m = &manifest;
    if m.num_relations == 0 || m.num_classes == 0 {
        return Err(Error::load(&manifest_path, 0, "num_relations and num_classes must be positive"));
    }
    if m.class_names.len() != m.num_classes {
        return Err(count_mismatch(&manifest_path, 0, "classes", m.num_classes, m.class_names.len()));
    }

    // features
    let path = dir.join(&m.features);
    let text = read(&path)?;
    let mut data = Vec::with_capacity(m.num_nodes * m.num_features);
    let mut rows = 0;
    for (line, l) in data_lines(&text, false) {
        rows += 1;
        if rows > m.num_nodes {
            return Err(count_mismatch(&path, line, "nodes", m.num_nodes, rows));
        }
        let before = data.len();
        for field in l.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::load(&path, line, format!("non-numeric feature {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::load(&path, line, format!("non-finite feature {field:?}")));
            }
            data.push(v);
        }
        if data.len() - before != m.num_features {
            return Err(count_mismatch(&path, line, "features", m.num_features, data.len() - before));
        }
    }
    if rows != m.num_nodes {
        return Err(count_mismatch(&path, rows, "nodes", m.num_nodes, rows));
    }
    let features = DenseMatrix::from_vec(m.num_nodes, m.num_features, data)?;

    // edges
    let path = dir.join(&m.edges);
    let text = read(&path)?;
    check_header(&path, &text, "src,dst,rel")?;
    let mut edges = vec![Vec::new(); m.num_relations];
    for (line, l) in data_lines(&text, true) {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::load(&path, line, format!("expected 3 fields, found {}", fields.len())));
        }
        let src = parse_usize(&path, line, fields[0], "src")?;
        let dst = parse_usize(&path, line, fields[1], "dst")?;
        let rel = parse_usize(&path, line, fields[2], "rel")?;
        if src >= m.num_nodes || dst >= m.num_nodes {
            return Err(Error::load(
                &path,
                line,
                format!("edge ({src}, {dst}) has an endpoint outside [0, {})", m.num_nodes),
            ));
        }
        if rel >= m.num_relations {
            return Err(Error::load(
                &path,
                line,
                format!("relation {rel} outside [0, {})", m.num_relations),
            ));
        }
        edges[rel].push((src, dst));
    }

    // labels
    let path = dir.join(&m.labels);
    let text = read(&path)?;
    check_header(&path, &text, "node,label")?;
    let mut labels = vec![None; m.num_nodes];
    let mut rows = 0;
    for (line, l) in data_lines(&text, true) {
        rows += 1;
        if rows > m.num_nodes {
            return Err(count_mismatch(&path, line, "labelled nodes", m.num_nodes, rows));
        }
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::load(&path, line, format!("expected 2 fields, found {}", fields.len())));
        }
        let node = parse_usize(&path, line, fields[0], "node")?;
        let label = parse_usize(&path, line, fields[1], "label")?;
        if node >= m.num_nodes {
            return Err(Error::load(&path, line, format!("node {node} outside [0, {})", m.num_nodes)));
        }
        if label >= m.num_classes {
            return Err(Error::load(&path, line, format!("label {label} outside [0, {})", m.num_classes)));
        }
        if labels[node].replace(label).is_some() {
            return Err(Error::load(&path, line, format!("node {node} labelled twice")));
        }
    }
    if rows != m.num_nodes {
        return Err(count_mismatch(&path, rows, "labelled nodes", m.num_nodes, rows));
    }
    let labels: Vec<usize> = labels.into_iter().map(|l| l.expect("every node labelled")).collect();

    // splits
    let path = dir.join(&m.splits);
    let splits: Splits =
        serde_json::from_str(&read(&path)?).map_err(|e| Error::load(&path, e.line(), e.to_string()))?;

    MultiRelationGraph::new(features, edges, labels, m.num_classes, splits)
        .and_then(|g| g.with_class_names(m.class_names.clone()))
        .map_err(|e| Error::load(dir, 0, e.to_string()))
}

/// Writes `g` in the dataset directory format. Output bytes depend only on `g`.
pub fn save_dataset(g: &MultiRelationGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| -> Result<()> {
        let p: PathBuf = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(p, e))
    };
    let manifest = DatasetManifest::describe(g);
    write(MANIFEST_FILE, to_json_pretty(&manifest) + "\n")?;

    let mut s = String::new();
    for row in g.features().iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{v}").expect("write to string");
        }
        s.push('\n');
    }
    write(&manifest.features, s)?;

    let mut s = String::from("src,dst,rel\n");
    for (r, rel) in g.all_edges().iter().enumerate() {
        for (a, b) in rel {
            writeln!(s, "{a},{b},{r}").expect("write to string");
        }
    }
    write(&manifest.edges, s)?;

    let mut s = String::from("node,label\n");
    for (i, l) in g.labels().iter().enumerate() {
        writeln!(s, "{i},{l}").expect("write to string");
    }
    write(&manifest.labels, s)?;

    write(&manifest.splits, serde_json::to_string(g.splits()).expect("serializable splits") + "\n")
}

fn to_json_pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable value")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data/example12")
    }

    fn copy_fixture() -> tempfile::TempDir {
        let tmp = tempfile::tempdir().unwrap();
        for entry in fs::read_dir(fixture_dir()).unwrap() {
            let entry = entry.unwrap();
            fs::copy(entry.path(), tmp.path().join(entry.file_name())).unwrap();
        }
        tmp
    }

    #[test]
    fn loads_shipped_example() {
        let g = load_dataset(fixture_dir()).unwrap();
        assert_eq!((g.n(), g.k()), (12, 2));
        assert_eq!(g.class_names(), &["human".to_string(), "bot".to_string()]);
    }

    #[test]
    fn round_trips_through_directory() {
        let g = load_dataset(fixture_dir()).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        save_dataset(&g, tmp.path()).unwrap();
        assert_eq!(load_dataset(tmp.path()).unwrap(), g);
    }

    #[test]
    fn extra_label_row_is_a_count_mismatch() {
        let tmp = copy_fixture();
        let p = tmp.path().join("labels.csv");
        let mut text = fs::read_to_string(&p).unwrap();
        text.push_str("12,0\n");
        fs::write(&p, text).unwrap();
        let msg = load_dataset(tmp.path()).unwrap_err().to_string();
        assert!(msg.contains("count mismatch") && msg.contains("labels.csv"), "{msg}");
    }

    #[test]
    fn out_of_range_endpoint_names_the_line() {
        let tmp = copy_fixture();
        let p = tmp.path().join("edges.csv");
        let mut text = fs::read_to_string(&p).unwrap();
        let line = text.lines().count() + 1;
        text.push_str("5,99,0\n");
        fs::write(&p, text).unwrap();
        let msg = load_dataset(tmp.path()).unwrap_err().to_string();
        assert!(msg.contains(&format!("edges.csv:{line}:")) && msg.contains("99"), "{msg}");
    }

    #[test]
    fn non_numeric_feature_reports_line() {
        let tmp = copy_fixture();
        let p = tmp.path().join("features.csv");
        let text = fs::read_to_string(&p).unwrap().replacen(',', ",abc,", 1);
        fs::write(&p, text).unwrap();
        let msg = load_dataset(tmp.path()).unwrap_err().to_string();
        assert!(msg.contains("features.csv:1:") && msg.contains("non-numeric"), "{msg}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let tmp = copy_fixture();
        fs::remove_file(tmp.path().join("splits.json")).unwrap();
        assert!(matches!(load_dataset(tmp.path()), Err(Error::Io { .. })));
    }
}
