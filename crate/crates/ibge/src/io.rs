//! Stable on-disk formats: data CSV, design/DAG/truth/sample JSON and the
//! CSV result tables. All writers are deterministic and all formats
//! round-trip byte-identically through write→read→write.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{InterventionDesign, ObservedDataset};
use crate::effects::EffectSummary;
use crate::error::{Error, Result};
use crate::evaluate::SweepRow;
use crate::graph::Dag;
use crate::score::ScoreMode;
use crate::search::{DagSample, DagSampleSet, EdgePosterior};
use crate::simulate::{GroundTruth, InterventionSpec, Regime};

/// 17 significant digits: enough to reproduce any f64 exactly on re-parse.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, context: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::parse(context, format!("bad float {s:?}: {e}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path.display().to_string(), e))?;
    body.push('\n');
    fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&body).map_err(|e| Error::parse(path.display().to_string(), e))
}

/// Writes the observation matrix as CSV with a variable-name header and one
/// observation per row at full precision.
pub fn write_data_csv(path: &Path, data: &ObservedDataset) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&data.var_names)
        .map_err(|e| Error::parse(path.display().to_string(), e))?;
    for r in 0..data.n_rows() {
        let record: Vec<String> = data.row(r).iter().map(|&v| fmt_f64(v)).collect();
        w.write_record(&record)
            .map_err(|e| Error::parse(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_data_csv(path: &Path) -> Result<ObservedDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r
        .headers()
        .map_err(|e| Error::parse(path.display().to_string(), e))?
        .clone();
    let var_names: Vec<String> = headers.iter().map(str::to_string).collect();
    let mut values = Vec::new();
    let mut n_rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::parse(path.display().to_string(), e))?;
        if rec.len() != var_names.len() {
            return Err(Error::parse(
                path.display().to_string(),
                format!("row {} has {} fields, expected {}", n_rows + 1, rec.len(), var_names.len()),
            ));
        }
        for field in rec.iter() {
            values.push(parse_f64(field, &path.display().to_string())?);
        }
        n_rows += 1;
    }
    ObservedDataset::new(values, n_rows, var_names)
}

/// Design file: intervention labels, 0/1 row states and optional known
/// targets keyed by label.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DesignFile {
    pub m: usize,
    pub labels: Vec<String>,
    pub row_states: Vec<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub known_targets: Option<BTreeMap<String, Vec<String>>>,
}

impl DesignFile {
    pub fn from_design(design: &InterventionDesign, var_names: &[String]) -> Self {
        let row_states = (0..design.n_rows())
            .map(|r| (0..design.m).map(|j| design.state(r, j)).collect())
            .collect();
        let known_targets = design.known_targets.as_ref().map(|t| {
            t.iter()
                .map(|(&j, nodes)| {
                    (
                        design.labels[j].clone(),
                        nodes.iter().map(|&v| var_names[v].clone()).collect(),
                    )
                })
                .collect()
        });
        DesignFile {
            m: design.m,
            labels: design.labels.clone(),
            row_states,
            known_targets,
        }
    }

    pub fn to_design(&self, var_names: &[String]) -> Result<InterventionDesign> {
        if self.labels.len() != self.m {
            return Err(Error::parse(
                "design",
                format!("m = {} but {} labels", self.m, self.labels.len()),
            ));
        }
        let n_rows = self.row_states.len();
        let mut states = Vec::with_capacity(n_rows * self.m);
        for (i, row) in self.row_states.iter().enumerate() {
            if row.len() != self.m {
                return Err(Error::parse(
                    "design",
                    format!("row {i} has {} states, expected {}", row.len(), self.m),
                ));
            }
            states.extend_from_slice(row);
        }
        let known_targets = match &self.known_targets {
            None => None,
            Some(map) => {
                let mut out = BTreeMap::new();
                for (label, nodes) in map {
                    let j = self
                        .labels
                        .iter()
                        .position(|l| l == label)
                        .ok_or_else(|| Error::parse("design", format!("unknown label {label}")))?;
                    let mut idx = Vec::with_capacity(nodes.len());
                    for name in nodes {
                        idx.push(name_index(var_names, name)?);
                    }
                    out.insert(j, idx);
                }
                Some(out)
            }
        };
        InterventionDesign::new(self.labels.clone(), states, n_rows, known_targets)
    }
}

fn name_index(names: &[String], name: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::parse("names", format!("unknown variable {name}")))
}

/// DAG file: node and intervention names plus edge lists by name.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DagFile {
    pub nodes: Vec<String>,
    pub interventions: Vec<String>,
    pub obs_edges: Vec<(String, String)>,
    pub int_edges: Vec<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_score: Option<f64>,
}

impl DagFile {
    pub fn from_dag(
        dag: &Dag,
        nodes: &[String],
        interventions: &[String],
        log_score: Option<f64>,
    ) -> Self {
        DagFile {
            nodes: nodes.to_vec(),
            interventions: interventions.to_vec(),
            obs_edges: dag
                .obs_edges()
                .into_iter()
                .map(|(u, v)| (nodes[u].clone(), nodes[v].clone()))
                .collect(),
            int_edges: dag
                .int_edges()
                .into_iter()
                .map(|(j, v)| (interventions[j].clone(), nodes[v].clone()))
                .collect(),
            log_score,
        }
    }

    pub fn to_dag(&self) -> Result<Dag> {
        let mut obs = Vec::with_capacity(self.obs_edges.len());
        for (a, b) in &self.obs_edges {
            obs.push((name_index(&self.nodes, a)?, name_index(&self.nodes, b)?));
        }
        let mut ints = Vec::with_capacity(self.int_edges.len());
        for (l, b) in &self.int_edges {
            ints.push((
                name_index(&self.interventions, l)?,
                name_index(&self.nodes, b)?,
            ));
        }
        Dag::from_edges(self.nodes.len(), self.interventions.len(), &obs, &ints)
    }
}

/// Ground-truth file: weighted DAG plus intervention specifications.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TruthFile {
    pub nodes: Vec<String>,
    pub regime: Regime,
    pub weights: Vec<(String, String, f64)>,
    pub intervention_specs: Vec<InterventionSpecFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InterventionSpecFile {
    pub label: String,
    pub targets: Vec<String>,
    pub shifts: Vec<f64>,
    pub dampings: Vec<f64>,
}

impl TruthFile {
    pub fn from_truth(truth: &GroundTruth, nodes: &[String]) -> Self {
        TruthFile {
            nodes: nodes.to_vec(),
            regime: truth.regime,
            weights: truth
                .weights
                .iter()
                .map(|&(u, v, w)| (nodes[u].clone(), nodes[v].clone(), w))
                .collect(),
            intervention_specs: truth
                .interventions
                .iter()
                .map(|s| InterventionSpecFile {
                    label: s.label.clone(),
                    targets: s.targets.iter().map(|&t| nodes[t].clone()).collect(),
                    shifts: s.shifts.clone(),
                    dampings: s.dampings.clone(),
                })
                .collect(),
        }
    }

    pub fn to_truth(&self) -> Result<GroundTruth> {
        let n = self.nodes.len();
        let mut edges = Vec::with_capacity(self.weights.len());
        let mut weights = Vec::with_capacity(self.weights.len());
        for (a, b, w) in &self.weights {
            let (u, v) = (name_index(&self.nodes, a)?, name_index(&self.nodes, b)?);
            edges.push((u, v));
            weights.push((u, v, *w));
        }
        weights.sort_by_key(|&(u, v, _)| (u, v));
        let dag = Dag::from_edges(n, 0, &edges, &[])?;
        let mut interventions = Vec::with_capacity(self.intervention_specs.len());
        for s in &self.intervention_specs {
            let mut targets = Vec::with_capacity(s.targets.len());
            for t in &s.targets {
                targets.push(name_index(&self.nodes, t)?);
            }
            interventions.push(InterventionSpec {
                label: s.label.clone(),
                targets,
                shifts: s.shifts.clone(),
                dampings: s.dampings.clone(),
            });
        }
        let truth = GroundTruth {
            dag,
            weights,
            interventions,
            regime: self.regime,
        };
        truth.validate()?;
        Ok(truth)
    }
}

/// Scoring setup recorded next to DAG samples so downstream commands reuse
/// the exact posterior.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScorerSettings {
    pub alpha_mu: f64,
    pub edge_penalty: f64,
    pub mode: ScoreMode,
    pub targets_known: bool,
}

/// Sample file: scorer settings plus one entry per recorded DAG.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SamplesFile {
    pub scorer: ScorerSettings,
    pub nodes: Vec<String>,
    pub interventions: Vec<String>,
    pub samples: Vec<SampleEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SampleEntry {
    pub chain: usize,
    pub log_score: f64,
    pub obs_edges: Vec<(String, String)>,
    pub int_edges: Vec<(String, String)>,
}

impl SamplesFile {
    pub fn from_samples(
        set: &DagSampleSet,
        scorer: ScorerSettings,
        nodes: &[String],
        interventions: &[String],
    ) -> Self {
        SamplesFile {
            scorer,
            nodes: nodes.to_vec(),
            interventions: interventions.to_vec(),
            samples: set
                .samples
                .iter()
                .map(|s| SampleEntry {
                    chain: s.chain,
                    log_score: s.log_score,
                    obs_edges: s
                        .dag
                        .obs_edges()
                        .into_iter()
                        .map(|(u, v)| (nodes[u].clone(), nodes[v].clone()))
                        .collect(),
                    int_edges: s
                        .dag
                        .int_edges()
                        .into_iter()
                        .map(|(j, v)| (interventions[j].clone(), nodes[v].clone()))
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_samples(&self) -> Result<DagSampleSet> {
        let n = self.nodes.len();
        let m = self.interventions.len();
        let mut samples = Vec::with_capacity(self.samples.len());
        for entry in &self.samples {
            let mut obs = Vec::with_capacity(entry.obs_edges.len());
            for (a, b) in &entry.obs_edges {
                obs.push((name_index(&self.nodes, a)?, name_index(&self.nodes, b)?));
            }
            let mut ints = Vec::with_capacity(entry.int_edges.len());
            for (l, b) in &entry.int_edges {
                ints.push((
                    name_index(&self.interventions, l)?,
                    name_index(&self.nodes, b)?,
                ));
            }
            samples.push(DagSample {
                dag: Dag::from_edges(n, m, &obs, &ints)?,
                log_score: entry.log_score,
                chain: entry.chain,
            });
        }
        Ok(DagSampleSet {
            n_obs: n,
            n_int: m,
            samples,
        })
    }
}

/// Long-format edge posterior: one row per (from, to) pair with frequency.
pub fn write_edge_posterior_csv(
    path: &Path,
    posterior: &EdgePosterior,
    nodes: &[String],
    interventions: &[String],
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["from", "to", "frequency"])
        .map_err(|e| Error::parse(path.display().to_string(), e))?;
    for u in 0..posterior.n_obs {
        for v in 0..posterior.n_obs {
            if u != v {
                w.write_record([
                    nodes[u].as_str(),
                    nodes[v].as_str(),
                    &fmt_f64(posterior.obs_freq(u, v)),
                ])
                .map_err(|e| Error::parse(path.display().to_string(), e))?;
            }
        }
    }
    for j in 0..posterior.n_int {
        for v in 0..posterior.n_obs {
            w.write_record([
                interventions[j].as_str(),
                nodes[v].as_str(),
                &fmt_f64(posterior.int_freq(j, v)),
            ])
            .map_err(|e| Error::parse(path.display().to_string(), e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Per-pair effect summaries.
pub fn write_effect_summaries_csv(
    path: &Path,
    summaries: &[EffectSummary],
    nodes: &[String],
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "source",
        "target",
        "mean",
        "lower95",
        "upper95",
        "excludes_zero",
        "is_self",
    ])
    .map_err(|e| Error::parse(path.display().to_string(), e))?;
    for s in summaries {
        w.write_record([
            nodes[s.source].as_str(),
            nodes[s.target].as_str(),
            &fmt_f64(s.mean),
            &fmt_f64(s.lower),
            &fmt_f64(s.upper),
            if s.excludes_zero { "true" } else { "false" },
            if s.is_self { "true" } else { "false" },
        ])
        .map_err(|e| Error::parse(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

/// Raw pooled effect draws, one row per (source, target, draw).
pub fn write_effect_draws_csv(
    path: &Path,
    draws: &[crate::effects::EffectMatrix],
    nodes: &[String],
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["source", "target", "draw", "effect"])
        .map_err(|e| Error::parse(path.display().to_string(), e))?;
    for (k, m) in draws.iter().enumerate() {
        for u in 0..m.n() {
            for v in 0..m.n() {
                if u != v {
                    w.write_record([
                        nodes[u].as_str(),
                        nodes[v].as_str(),
                        &k.to_string(),
                        &fmt_f64(m.effect(u, v)),
                    ])
                    .map_err(|e| Error::parse(path.display().to_string(), e))?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))
}

pub const SWEEP_CSV_HEADER: [&str; 11] = [
    "dataset_id", "seed", "alpha_mu", "regime", "TP", "FP", "FN", "P", "SHD", "TPR", "FPRp",
];

/// Streaming writer for long-format sweep results; rows flush as they are
/// written so partial results survive interruption.
pub struct SweepCsvWriter {
    inner: csv::Writer<fs::File>,
    path: String,
}

impl SweepCsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut inner = csv::Writer::from_writer(file);
        inner
            .write_record(SWEEP_CSV_HEADER)
            .map_err(|e| Error::parse(path.display().to_string(), e))?;
        let mut w = SweepCsvWriter {
            inner,
            path: path.display().to_string(),
        };
        w.flush()?;
        Ok(w)
    }

    pub fn write_row(&mut self, row: &SweepRow) -> Result<()> {
        let m = &row.metrics;
        self.inner
            .write_record([
                row.dataset_id.as_str(),
                &row.seed.to_string(),
                &format_plain(row.alpha_mu),
                row.regime.as_str(),
                &format_plain(m.tp),
                &format_plain(m.fp),
                &format_plain(m.fn_count),
                &m.p.to_string(),
                &format_plain(m.shd),
                &format_plain(m.tpr),
                &format_plain(m.fprp),
            ])
            .map_err(|e| Error::parse(self.path.clone(), e))?;
        self.flush()
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner
            .flush()
            .map_err(|e| Error::io(self.path.clone(), e))
    }
}

/// Shortest exact decimal form; metric values are halves and small rates.
fn format_plain(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate_data, GroundTruth, Regime};
    use tempfile::TempDir;

    fn sample_truth() -> GroundTruth {
        GroundTruth::sample(6, 2, 1.2, Regime::Soft, 41).unwrap()
    }

    #[test]
    fn data_csv_round_trips_byte_identically() {
        let dir = TempDir::new().unwrap();
        let truth = sample_truth();
        let (data, _) = generate_data(&truth, 20, 5, 3, true).unwrap();
        let p1 = dir.path().join("data.csv");
        let p2 = dir.path().join("data2.csv");
        write_data_csv(&p1, &data).unwrap();
        let read = read_data_csv(&p1).unwrap();
        assert_eq!(read.n_rows(), data.n_rows());
        for (a, b) in read.values().iter().zip(data.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        write_data_csv(&p2, &read).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn design_and_truth_json_round_trip() {
        let dir = TempDir::new().unwrap();
        let truth = sample_truth();
        let (data, design) = generate_data(&truth, 20, 5, 3, true).unwrap();
        let names = data.var_names.clone();

        let dpath = dir.path().join("design.json");
        write_json(&dpath, &DesignFile::from_design(&design, &names)).unwrap();
        let dfile: DesignFile = read_json(&dpath).unwrap();
        let design2 = dfile.to_design(&names).unwrap();
        assert_eq!(design, design2);
        let dpath2 = dir.path().join("design2.json");
        write_json(&dpath2, &DesignFile::from_design(&design2, &names)).unwrap();
        assert_eq!(fs::read(&dpath).unwrap(), fs::read(&dpath2).unwrap());

        let tpath = dir.path().join("truth.json");
        write_json(&tpath, &TruthFile::from_truth(&truth, &names)).unwrap();
        let tfile: TruthFile = read_json(&tpath).unwrap();
        let truth2 = tfile.to_truth().unwrap();
        assert_eq!(truth, truth2);
        let tpath2 = dir.path().join("truth2.json");
        write_json(&tpath2, &TruthFile::from_truth(&truth2, &names)).unwrap();
        assert_eq!(fs::read(&tpath).unwrap(), fs::read(&tpath2).unwrap());
    }

    #[test]
    fn dag_json_round_trips() {
        let dir = TempDir::new().unwrap();
        let nodes: Vec<String> = (0..4).map(|i| format!("x{i}")).collect();
        let ints = vec!["I0".to_string()];
        let dag = Dag::from_edges(4, 1, &[(0, 1), (2, 3)], &[(0, 3)]).unwrap();
        let path = dir.path().join("dag.json");
        write_json(&path, &DagFile::from_dag(&dag, &nodes, &ints, Some(-12.5))).unwrap();
        let file: DagFile = read_json(&path).unwrap();
        assert_eq!(file.to_dag().unwrap(), dag);
        assert_eq!(file.log_score, Some(-12.5));
        let path2 = dir.path().join("dag2.json");
        write_json(
            &path2,
            &DagFile::from_dag(&file.to_dag().unwrap(), &nodes, &ints, file.log_score),
        )
        .unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn samples_file_round_trips() {
        let dir = TempDir::new().unwrap();
        let nodes: Vec<String> = (0..3).map(|i| format!("x{i}")).collect();
        let ints = vec!["I0".to_string()];
        let set = DagSampleSet {
            n_obs: 3,
            n_int: 1,
            samples: vec![
                DagSample {
                    dag: Dag::from_edges(3, 1, &[(0, 1)], &[(0, 2)]).unwrap(),
                    log_score: -4.25,
                    chain: 0,
                },
                DagSample {
                    dag: Dag::from_edges(3, 1, &[(1, 0)], &[]).unwrap(),
                    log_score: -5.5,
                    chain: 1,
                },
            ],
        };
        let settings = ScorerSettings {
            alpha_mu: 0.1,
            edge_penalty: 0.0,
            mode: ScoreMode::Soft,
            targets_known: false,
        };
        let path = dir.path().join("samples.json");
        write_json(&path, &SamplesFile::from_samples(&set, settings, &nodes, &ints)).unwrap();
        let file: SamplesFile = read_json(&path).unwrap();
        let set2 = file.to_samples().unwrap();
        assert_eq!(set2.samples.len(), 2);
        assert_eq!(set2.samples[0].dag, set.samples[0].dag);
        assert_eq!(set2.samples[1].chain, 1);
    }
}
