//! Text formats: edge lists, real-valued CSV, dataset directories,
//! trajectory CSV and auxiliary-matrix dumps.
//!
//! Reals are written with 17 significant digits (`{:.16e}`), which round-trips
//! every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use gnnlab_core::model::{Aggregation, AggregationMode};
use gnnlab_core::xi::{XiOperator, XiSource};
use gnnlab_core::{Activation, GgnnDataset, Graph, GraphSample, Matrix, NgnnDataset, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] gnnlab_core::Error),
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { path: path.to_string(), line, msg: msg.into() }
}

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), FormatError> {
    let io_err = |source| FormatError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn edge_list(g: &Graph) -> String {
    let mut out = format!("{}\n", g.n());
    for (i, j) in g.edges() {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}

/// Parses `n` followed by one `i j` pair per line. Self-loops are implied.
pub fn parse_edge_list(text: &str, name: &str) -> Result<Graph, FormatError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| parse_err(name, 1, "missing node count"))?;
    let n: usize = first.trim().parse().map_err(|_| parse_err(name, 1, format!("bad node count {first:?}")))?;
    let mut edges = Vec::new();
    for (idx, line) in lines {
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(i)), Some(Ok(j)), None) => edges.push((i, j)),
            _ => return Err(parse_err(name, idx + 1, format!("expected `i j`, got {line:?}"))),
        }
    }
    Ok(Graph::from_edges(n, edges)?)
}

pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| real(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str, name: &str) -> Result<Matrix, FormatError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|_| parse_err(name, idx + 1, format!("bad number {f:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(name, idx + 1, format!("expected {} columns, got {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(Matrix::from_vec(rows.len(), cols, rows.concat())?)
}

pub fn vector_csv(v: &[f64]) -> String {
    v.iter().map(|&x| real(x) + "\n").collect()
}

pub fn parse_vector_csv(text: &str, name: &str) -> Result<Vec<f64>, FormatError> {
    let m = parse_matrix_csv(text, name)?;
    if m.cols() > 1 {
        return Err(parse_err(name, 1, "expected one value per line"));
    }
    Ok(m.into_vec())
}

/// `key=value` lines.
fn meta(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn parse_meta(text: &str, name: &str) -> Result<Vec<(String, String, usize)>, FormatError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| parse_err(name, idx + 1, "expected key=value"))?;
        out.push((k.trim().to_string(), v.trim().to_string(), idx + 1));
    }
    Ok(out)
}

pub fn aggregation_name(mode: &AggregationMode) -> String {
    match mode {
        AggregationMode::Particular(i) => format!("particular:{i}"),
        AggregationMode::Uniform => "uniform".into(),
        AggregationMode::Attention(w) => {
            let ws: Vec<String> = w.iter().map(|x| x.to_string()).collect();
            format!("attention:{}", ws.join(";"))
        }
    }
}

pub fn parse_aggregation(s: &str) -> Result<AggregationMode, String> {
    let s = s.trim().to_ascii_lowercase();
    let (head, arg) = s.split_once(':').map_or((s.as_str(), None), |(h, a)| (h, Some(a)));
    match (head, arg) {
        ("uniform", None) => Ok(AggregationMode::Uniform),
        ("particular", Some(i)) => i.parse().map(AggregationMode::Particular).map_err(|_| format!("bad node index {i:?}")),
        ("attention", Some(ws)) => ws
            .split(';')
            .map(|w| w.trim().parse::<f64>().map_err(|_| format!("bad attention weight {w:?}")))
            .collect::<Result<Vec<_>, _>>()
            .map(AggregationMode::Attention),
        _ => Err(format!("unknown aggregation {s:?} (uniform, particular:<i>, attention:<w;w;...>)")),
    }
}

pub fn write_ngnn_dataset(dir: &Path, ds: &NgnnDataset) -> Result<(), FormatError> {
    write_atomic(&dir.join("graph.txt"), edge_list(&ds.graph).as_bytes())?;
    write_atomic(&dir.join("features.csv"), matrix_csv(&ds.features).as_bytes())?;
    write_atomic(&dir.join("labels.csv"), vector_csv(&ds.labels).as_bytes())?;
    let m = meta(&[
        ("mode", "ngnn".into()),
        ("seed", ds.seed.to_string()),
        ("noise_var", real(ds.noise_var)),
        ("activation", ds.activation.to_string()),
        ("aggregation", "none".into()),
    ]);
    write_atomic(&dir.join("meta.txt"), m.as_bytes())
}

pub fn write_ggnn_dataset(dir: &Path, ds: &GgnnDataset) -> Result<(), FormatError> {
    for (j, g) in ds.graphs.iter().enumerate() {
        write_atomic(&dir.join(format!("graphs/{j}.txt")), edge_list(&g.graph).as_bytes())?;
        write_atomic(&dir.join(format!("graphs/{j}.features.csv")), matrix_csv(&g.features).as_bytes())?;
    }
    let weights: String = ds
        .graphs
        .iter()
        .map(|g| g.aggregation.weights().iter().map(|&w| real(w)).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    write_atomic(&dir.join("aggregation.csv"), weights.as_bytes())?;
    write_atomic(&dir.join("labels.csv"), vector_csv(&ds.labels).as_bytes())?;
    let m = meta(&[
        ("mode", "ggnn".into()),
        ("seed", ds.seed.to_string()),
        ("noise_var", real(ds.noise_var)),
        ("activation", ds.activation.to_string()),
        ("aggregation", aggregation_name(&ds.aggregation)),
        ("graphs", ds.graphs.len().to_string()),
    ]);
    write_atomic(&dir.join("meta.txt"), m.as_bytes())
}

struct Meta {
    mode: String,
    seed: u64,
    noise_var: f64,
    activation: Activation,
    aggregation: String,
    graphs: usize,
}

fn read_meta(dir: &Path) -> Result<Meta, FormatError> {
    let path = dir.join("meta.txt");
    let name = path.display().to_string();
    let mut m = Meta { mode: String::new(), seed: 0, noise_var: 0.0, activation: Activation::Relu, aggregation: String::new(), graphs: 0 };
    for (k, v, line) in parse_meta(&read_file(&path)?, &name)? {
        let bad = |what: &str| parse_err(&name, line, format!("bad {what} {v:?}"));
        match k.as_str() {
            "mode" => m.mode = v.clone(),
            "seed" => m.seed = v.parse().map_err(|_| bad("seed"))?,
            "noise_var" => m.noise_var = v.parse().map_err(|_| bad("noise_var"))?,
            "activation" => m.activation = v.parse().map_err(|_| bad("activation"))?,
            "aggregation" => m.aggregation = v.clone(),
            "graphs" => m.graphs = v.parse().map_err(|_| bad("graph count"))?,
            _ => return Err(parse_err(&name, line, format!("unknown key {k:?}"))),
        }
    }
    Ok(m)
}

pub enum Dataset {
    Ngnn(NgnnDataset),
    Ggnn(GgnnDataset),
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, FormatError> {
    let meta = read_meta(dir)?;
    let load = |rel: &str| {
        let path = dir.join(rel);
        read_file(&path).map(|text| (text, path.display().to_string()))
    };
    let (labels_text, labels_name) = load("labels.csv")?;
    let labels = parse_vector_csv(&labels_text, &labels_name)?;
    match meta.mode.as_str() {
        "ngnn" => {
            let (g, gname) = load("graph.txt")?;
            let (f, fname) = load("features.csv")?;
            Ok(Dataset::Ngnn(NgnnDataset {
                graph: parse_edge_list(&g, &gname)?,
                features: parse_matrix_csv(&f, &fname)?,
                labels,
                noise_var: meta.noise_var,
                activation: meta.activation,
                seed: meta.seed,
            }))
        }
        "ggnn" => {
            let (w, wname) = load("aggregation.csv")?;
            let mut weights = w.lines().filter(|l| !l.trim().is_empty());
            let mut graphs = Vec::with_capacity(meta.graphs);
            for j in 0..meta.graphs {
                let (g, gname) = load(&format!("graphs/{j}.txt"))?;
                let (f, fname) = load(&format!("graphs/{j}.features.csv"))?;
                let row = weights.next().ok_or_else(|| parse_err(&wname, j + 1, "missing aggregation row"))?;
                let aggregation = Aggregation::new(parse_matrix_csv(row, &wname)?.into_vec())?;
                graphs.push(GraphSample { graph: parse_edge_list(&g, &gname)?, features: parse_matrix_csv(&f, &fname)?, aggregation });
            }
            let aggregation = parse_aggregation(&meta.aggregation).map_err(|e| parse_err("meta.txt", 0, e))?;
            Ok(Dataset::Ggnn(GgnnDataset { graphs, labels, noise_var: meta.noise_var, activation: meta.activation, aggregation, seed: meta.seed }))
        }
        other => Err(parse_err("meta.txt", 0, format!("unknown mode {other:?}"))),
    }
}

pub const TRAJECTORY_HEADER: &str = "epoch,dist_w,dist_v,loss,confined_w,confined_v";

pub fn trajectory_csv(t: &Trajectory) -> String {
    let opt_real = |x: Option<f64>| x.map(real).unwrap_or_default();
    let opt_bool = |x: Option<bool>| x.map(|b| if b { "1" } else { "0" }.to_string()).unwrap_or_default();
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in &t.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            opt_real(r.dist_w),
            opt_real(r.dist_v),
            real(r.loss),
            opt_bool(r.confined_w),
            opt_bool(r.confined_v)
        );
    }
    out
}

/// Metadata line followed by the d×d values.
pub fn xi_csv(op: &XiOperator) -> String {
    let source = match op.source() {
        XiSource::MonteCarlo { samples } => format!("monte_carlo samples={samples}"),
        XiSource::Empirical => "empirical".into(),
    };
    format!("# source={source} cond={}\n{}", real(op.cond()), matrix_csv(op.matrix()))
}
