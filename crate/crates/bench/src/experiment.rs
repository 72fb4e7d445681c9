//! Drives a clusterer through an update stream and records the objective.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparse_pivot::eval::normalized_objective;
use sparse_pivot::{
    AdjacencyStore, Clusterer, Engine, EvalScope, NodeId, ReferenceClustering, Singletons, SparsePivot,
    SparsePivotParams, TriggerMode,
};

use crate::dataset::StaticGraph;
use crate::stream::{generate_stream, UpdateEvent};

pub const CSV_HEADER: [&str; 6] = ["step", "n", "raw_cost", "normalized", "ops", "ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Sparse,
    Reference,
    Singletons,
}

impl std::str::FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sparse" => Ok(Self::Sparse),
            "reference" => Ok(Self::Reference),
            "singletons" => Ok(Self::Singletons),
            _ => Err(format!("unknown algorithm {s:?}")),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sparse => "sparse",
            Self::Reference => "reference",
            Self::Singletons => "singletons",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub algo: Algo,
    /// Sparse-Pivot parameters; `params.eps` also drives the recompute
    /// trigger for every algorithm.
    pub params: SparsePivotParams,
    pub insert_prob: f64,
    pub measure_every: usize,
    pub seed: u64,
    pub recompute: TriggerMode,
    pub scope: EvalScope,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Sparse,
            params: SparsePivotParams::default(),
            insert_prob: 0.8,
            measure_every: 50,
            seed: 0,
            recompute: TriggerMode::DeletionsOnly,
            scope: EvalScope::AlgorithmView,
        }
    }
}

/// One measurement, taken after `step` events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub step: u64,
    /// Nodes in the evaluated graph.
    pub n: usize,
    pub raw_cost: u64,
    /// Absent when the evaluated graph has no edges.
    pub normalized: Option<f64>,
    /// Database operations since the start of the run.
    pub ops: u64,
    /// Milliseconds spent inside the algorithm since the start of the run.
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub records: Vec<MetricsRecord>,
    /// Events applied without error.
    pub steps: u64,
    /// Mean of the defined normalized values.
    pub mean_normalized: Option<f64>,
    pub total_ops: u64,
    pub ms: f64,
    pub recomputes: u64,
    pub error: Option<String>,
}

fn seeds(seed: u64) -> (ChaCha8Rng, u64) {
    // The stream depends on the seed only, so every algorithm run with the
    // same seed sees the same events.
    (ChaCha8Rng::seed_from_u64(seed), seed ^ 0x9e37_79b9_7f4a_7c15)
}

pub fn stream_for(graph: &StaticGraph, config: &RunConfig) -> Vec<UpdateEvent> {
    let (mut rng, _) = seeds(config.seed);
    generate_stream(graph.node_count(), config.insert_prob, &mut rng)
}

/// Runs `config.algo` on the stream derived from `graph` and `config.seed`,
/// writing CSV to `out` when given.
pub fn run_experiment<W: Write>(
    graph: &StaticGraph,
    config: &RunConfig,
    out: Option<W>,
) -> Result<RunSummary, csv::Error> {
    let events = stream_for(graph, config);
    run_events(graph, &events, config, out)
}

pub fn run_events<W: Write>(
    graph: &StaticGraph,
    events: &[UpdateEvent],
    config: &RunConfig,
    out: Option<W>,
) -> Result<RunSummary, csv::Error> {
    let (_, engine_seed) = seeds(config.seed);
    let eps = config.params.eps;
    let store = AdjacencyStore::with_capacity(graph.node_count());
    match config.algo {
        Algo::Sparse => {
            let e = Engine::with_store(store, SparsePivot::new(config.params), eps, config.recompute, engine_seed);
            drive(e, graph, events, config, out)
        }
        Algo::Reference => {
            let e = Engine::with_store(store, ReferenceClustering::new(), eps, config.recompute, engine_seed);
            drive(e, graph, events, config, out)
        }
        Algo::Singletons => {
            let e = Engine::with_store(store, Singletons::new(), eps, config.recompute, engine_seed);
            drive(e, graph, events, config, out)
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn write_record<W: Write>(w: &mut csv::Writer<W>, r: &MetricsRecord) -> csv::Result<()> {
    w.write_record([
        r.step.to_string(),
        r.n.to_string(),
        r.raw_cost.to_string(),
        fmt_opt(r.normalized),
        r.ops.to_string(),
        r.ms.to_string(),
    ])
}

fn measure<C: Clusterer>(engine: &Engine<C>, step: u64, scope: EvalScope, ms: f64) -> Result<MetricsRecord, String> {
    let store = engine.store();
    let rep = normalized_objective(store, &engine.export(), scope).map_err(|e| e.to_string())?;
    Ok(MetricsRecord {
        step,
        n: match scope {
            EvalScope::AlgorithmView => store.node_count(),
            EvalScope::TrueGraph => store.active_count(),
        },
        raw_cost: rep.raw_cost,
        normalized: rep.normalized,
        ops: store.ops().total(),
        ms,
    })
}

fn drive<C: Clusterer, W: Write>(
    mut engine: Engine<C>,
    graph: &StaticGraph,
    events: &[UpdateEvent],
    config: &RunConfig,
    out: Option<W>,
) -> Result<RunSummary, csv::Error> {
    let every = config.measure_every.max(1) as u64;
    let mut writer = out.map(|w| csv::Writer::from_writer(w));
    if let Some(w) = writer.as_mut() {
        w.write_record(CSV_HEADER)?;
    }
    let mut records = Vec::new();
    let mut ms = 0.0;
    let mut error = None;
    let mut done = 0u64;
    let mut incident: Vec<NodeId> = Vec::new();
    for (i, &event) in events.iter().enumerate() {
        let step = i as u64 + 1;
        let started = Instant::now();
        let result = match event {
            UpdateEvent::Insert(u) => {
                incident.clear();
                incident.extend(graph.neighbors(u).iter().map(|&v| NodeId(v)));
                engine.insert(NodeId(u), &incident)
            }
            UpdateEvent::Delete(u) => engine.delete(NodeId(u)),
        };
        ms += started.elapsed().as_secs_f64() * 1e3;
        let result = result
            .map_err(|e| format!("step {step}: {event:?} failed: {e}"))
            .and_then(|()| {
                done = step;
                if step % every == 0 {
                    records.push(measure(&engine, step, config.scope, ms)?);
                    if let Some(w) = writer.as_mut() {
                        write_record(w, records.last().unwrap()).map_err(|e| e.to_string())?;
                    }
                }
                Ok(())
            });
        if let Err(msg) = result {
            error = Some(msg);
            break;
        }
    }
    let defined: Vec<f64> = records.iter().filter_map(|r| r.normalized).collect();
    let summary = RunSummary {
        steps: done,
        mean_normalized: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        total_ops: engine.store().ops().total(),
        ms,
        recomputes: engine.recomputes(),
        records,
        error,
    };
    if let Some(w) = writer.as_mut() {
        if let Some(msg) = &summary.error {
            eprintln!("error: {msg}");
            w.write_record([
                "error".to_string(),
                engine.store().node_count().to_string(),
                String::new(),
                String::new(),
                summary.total_ops.to_string(),
                ms.to_string(),
            ])?;
        } else {
            w.write_record([
                "summary".to_string(),
                summary.steps.to_string(),
                summary.records.iter().map(|r| r.raw_cost).sum::<u64>().to_string(),
                fmt_opt(summary.mean_normalized),
                summary.total_ops.to_string(),
                ms.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(summary)
}

/// A data row of a metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvRow {
    Measure(MetricsRecord),
    /// `steps`, summed raw cost, mean normalized, total ops, total ms.
    Summary { steps: u64, raw_cost: u64, mean_normalized: Option<f64>, ops: u64, ms: f64 },
    Error { n: usize, ops: u64, ms: f64 },
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, String> {
    rec.get(i)
        .ok_or_else(|| format!("missing column {i}"))?
        .parse()
        .map_err(|_| format!("bad value in column {}: {:?}", CSV_HEADER[i], rec.get(i)))
}

fn opt_field(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>, String> {
    match rec.get(i) {
        Some("") => Ok(None),
        _ => field(rec, i).map(Some),
    }
}

/// Parses a metrics CSV written by [`run_experiment`].
pub fn read_metrics<R: std::io::Read>(input: R) -> Result<Vec<CsvRow>, String> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = match rec.get(0) {
            Some("summary") => CsvRow::Summary {
                steps: field(&rec, 1)?,
                raw_cost: field(&rec, 2)?,
                mean_normalized: opt_field(&rec, 3)?,
                ops: field(&rec, 4)?,
                ms: field(&rec, 5)?,
            },
            Some("error") => CsvRow::Error {
                n: field(&rec, 1)?,
                ops: field(&rec, 4)?,
                ms: field(&rec, 5)?,
            },
            _ => CsvRow::Measure(MetricsRecord {
                step: field(&rec, 0)?,
                n: field(&rec, 1)?,
                raw_cost: field(&rec, 2)?,
                normalized: opt_field(&rec, 3)?,
                ops: field(&rec, 4)?,
                ms: field(&rec, 5)?,
            }),
        };
        rows.push(row);
    }
    Ok(rows)
}
