//! Static input graphs: SNAP edge lists and distance-threshold graphs built
//! from point clouds.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("point {index} has dimension {found}, expected {expected}")]
    Dimension { index: usize, found: usize, expected: usize },
    #[error("divisor must be positive, got {0}")]
    Divisor(f64),
    #[error("bad column selection {0:?}")]
    Columns(String),
}

/// Undirected simple graph on dense ids `0..n`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StaticGraph {
    pub adj: Vec<Vec<u32>>,
    /// Original label of each dense id.
    pub labels: Vec<String>,
    pub edge_count: usize,
}

impl StaticGraph {
    pub fn with_nodes(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
            labels: (0..n).map(|i| i.to_string()).collect(),
            edge_count: 0,
        }
    }

    /// Builds from an edge list; duplicates and self-loops are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut g = Self::with_nodes(n);
        for (a, b) in edges {
            if a != b {
                g.adj[a as usize].push(b);
                g.adj[b as usize].push(a);
            }
        }
        g.normalize();
        g
    }

    fn normalize(&mut self) {
        let mut twice = 0;
        for list in &mut self.adj {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
        }
        self.edge_count = twice / 2;
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, u: u32) -> &[u32] {
        &self.adj[u as usize]
    }

    /// `|E| / |V|`.
    pub fn density(&self) -> f64 {
        if self.adj.is_empty() {
            0.0
        } else {
            self.edge_count as f64 / self.adj.len() as f64
        }
    }
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_snap_edgelist(path: &Path) -> Result<StaticGraph, DatasetError> {
    parse_snap_edgelist(&read(path)?)
}

/// Whitespace-separated endpoint pairs, `#` comment lines, blank lines
/// ignored. Extra columns (weights, timestamps) are ignored. Labels get dense
/// ids in order of first appearance.
pub fn parse_snap_edgelist<'a>(text: &'a str) -> Result<StaticGraph, DatasetError> {
    let mut ids: HashMap<&'a str, u32> = HashMap::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(a), Some(b)) = (tokens.next(), tokens.next()) else {
            return Err(DatasetError::Malformed {
                line: i + 1,
                msg: format!("expected two endpoints, got {line:?}"),
            });
        };
        let mut id = |s: &'a str| -> u32 {
            *ids.entry(s).or_insert_with(|| {
                labels.push(s.to_string());
                (labels.len() - 1) as u32
            })
        };
        let (x, y) = (id(a), id(b));
        edges.push((x, y));
    }
    let mut g = StaticGraph::from_edges(labels.len(), edges);
    g.labels = labels;
    Ok(g)
}

/// Which columns of a numeric row form the point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ColumnSelect {
    #[default]
    All,
    /// Half-open `start..end`, 0-based; `end = None` means to the end of row.
    Range(usize, Option<usize>),
}

impl std::str::FromStr for ColumnSelect {
    type Err = DatasetError;

    /// `all`, `3`, `1..`, `1..130`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DatasetError::Columns(s.to_string());
        if s == "all" {
            return Ok(Self::All);
        }
        if let Some((a, b)) = s.split_once("..") {
            let start = if a.is_empty() { 0 } else { a.parse().map_err(|_| bad())? };
            let end = if b.is_empty() { None } else { Some(b.parse().map_err(|_| bad())?) };
            if end.is_some_and(|e| e <= start) {
                return Err(bad());
            }
            return Ok(Self::Range(start, end));
        }
        let i: usize = s.parse().map_err(|_| bad())?;
        Ok(Self::Range(i, Some(i + 1)))
    }
}

/// Delimiter-separated numeric rows (`;`, `,` or whitespace). A `key:value`
/// token contributes its value, which covers sparse `index:value` formats
/// written densely. Non-numeric rows (headers) are skipped only before the
/// first data row.
pub fn parse_points(text: &str, columns: &ColumnSelect) -> Result<Vec<Vec<f64>>, DatasetError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line
            .split(|c: char| c == ';' || c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        let parsed: Result<Vec<f64>, _> = tokens
            .iter()
            .map(|t| t.rsplit_once(':').map_or(*t, |(_, v)| v).parse::<f64>())
            .collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if points.is_empty() => continue,
            Err(e) => {
                return Err(DatasetError::Malformed {
                    line: i + 1,
                    msg: e.to_string(),
                })
            }
        };
        let row = match *columns {
            ColumnSelect::All => row,
            ColumnSelect::Range(s, e) => {
                let e = e.unwrap_or(row.len());
                if e > row.len() || s > e {
                    return Err(DatasetError::Malformed {
                        line: i + 1,
                        msg: format!("row has {} columns, selection needs {e}", row.len()),
                    });
                }
                row[s..e].to_vec()
            }
        };
        points.push(row);
    }
    Ok(points)
}

/// Loads points from a file, or from every regular file of a directory in
/// name order (the drift data ships as one file per batch).
pub fn load_points(path: &Path, columns: &ColumnSelect) -> Result<Vec<Vec<f64>>, DatasetError> {
    let meta = fs::metadata(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return parse_points(&read(path)?, columns);
    }
    let io = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut points = Vec::new();
    for f in files {
        points.extend(parse_points(&read(&f)?, columns)?);
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    #[default]
    Exact,
    /// Mean over this many uniformly drawn pairs.
    Sampled(usize),
}

#[derive(Debug, Clone)]
pub struct DriftConfig {
    pub points: Vec<Vec<f64>>,
    pub divisor: f64,
    pub distance: DistanceMode,
}

/// Table 1 density for each divisor, assuming the order-preserving mapping.
pub const DIVISOR_DENSITY: [(f64, f64); 5] =
    [(10.0, 235.36), (15.0, 114.87), (20.0, 69.74), (25.0, 52.17), (30.0, 42.25)];

pub fn reported_density(divisor: f64) -> Option<f64> {
    DIVISOR_DENSITY
        .iter()
        .find(|&&(c, _)| c == divisor)
        .map(|&(_, d)| d)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dimensions(points: &[Vec<f64>]) -> Result<(), DatasetError> {
    if let Some(first) = points.first() {
        if let Some((index, p)) = points.iter().enumerate().find(|(_, p)| p.len() != first.len()) {
            return Err(DatasetError::Dimension {
                index,
                found: p.len(),
                expected: first.len(),
            });
        }
    }
    Ok(())
}

/// Mean Euclidean distance over unordered pairs of distinct points.
pub fn mean_pairwise_distance<R: Rng + ?Sized>(points: &[Vec<f64>], mode: DistanceMode, rng: &mut R) -> f64 {
    let m = points.len();
    if m < 2 {
        return 0.0;
    }
    match mode {
        DistanceMode::Exact => {
            let mut sum = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    sum += dist2(&points[i], &points[j]).sqrt();
                }
            }
            sum / (m * (m - 1) / 2) as f64
        }
        DistanceMode::Sampled(k) => {
            let k = k.max(1);
            let mut sum = 0.0;
            for _ in 0..k {
                let i = rng.gen_range(0..m);
                let mut j = rng.gen_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                sum += dist2(&points[i], &points[j]).sqrt();
            }
            sum / k as f64
        }
    }
}

/// Edge `{i,j}` iff `‖x_i − x_j‖ < mean/c`.
pub fn build_drift_graph<R: Rng + ?Sized>(config: &DriftConfig, rng: &mut R) -> Result<StaticGraph, DatasetError> {
    if !(config.divisor > 0.0) {
        return Err(DatasetError::Divisor(config.divisor));
    }
    check_dimensions(&config.points)?;
    let mean = mean_pairwise_distance(&config.points, config.distance, rng);
    Ok(threshold_graph(&config.points, mean / config.divisor))
}

pub fn threshold_graph(points: &[Vec<f64>], radius: f64) -> StaticGraph {
    let m = points.len();
    let mut edges = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if dist2(&points[i], &points[j]).sqrt() < radius {
                edges.push((i as u32, j as u32));
            }
        }
    }
    StaticGraph::from_edges(m, edges)
}
