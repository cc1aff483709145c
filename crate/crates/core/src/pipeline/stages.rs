use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::config::{EvalSource, InputSource, PipelineConfig};
use super::manifest::{ArtifactRecord, Manifest, StageRecord, StageStatus, TOOL_VERSION};
use crate::ehr::{
    generate_synthetic_cohort, parse_cohort, read_cohort, segment_admission, split_cohort, write_durations,
    write_journeys, Cohort, CohortSplit, VocabMode,
};
use crate::embed::{parse_embeddings, train_sgns, write_embeddings, EmbeddingMatrix, EntityKind};
use crate::error::{Error, Result};
use crate::eval::{run_task_suite, LabeledSet};
use crate::gat::{parse_checkpoint, write_checkpoint};
use crate::graph::{build_cooccurrence, build_transitions, generate_walks, parse_edge_list, CooccurrenceGraph};
use crate::linalg::Matrix;
use crate::visit::{
    init_segment_embeddings, pool_visit, refine_segments, train_segment_refiner, train_visit_refiner,
    SegmentEmbeddingSet, VisitEmbedding, VisitSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Cooccurrence,
    Walks,
    Sgns,
    SegmentInit,
    SegmentRefine,
    VisitPool,
    VisitRefine,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Cooccurrence,
        Stage::Walks,
        Stage::Sgns,
        Stage::SegmentInit,
        Stage::SegmentRefine,
        Stage::VisitPool,
        Stage::VisitRefine,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Cooccurrence => "cooccurrence",
            Stage::Walks => "walks",
            Stage::Sgns => "sgns",
            Stage::SegmentInit => "segment_init",
            Stage::SegmentRefine => "segment_refine",
            Stage::VisitPool => "visit_pool",
            Stage::VisitRefine => "visit_refine",
            Stage::Eval => "eval",
        }
    }

    pub fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["cohort.journeys", "cohort.durations", "split.txt"],
            Stage::Cooccurrence => &["graph.txt"],
            Stage::Walks => &["walks.txt"],
            Stage::Sgns => &["services.emb"],
            Stage::SegmentInit => &["segments_init.emb"],
            Stage::SegmentRefine => &["segment_gat.ckpt", "segments.emb"],
            Stage::VisitPool => &["visits_pooled.emb"],
            Stage::VisitRefine => &["visit_gat.ckpt", "visits.emb"],
            Stage::Eval => &["report.csv"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Nothing was run or written.
    #[error("{0}")]
    Validation(Error),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

/// Everything later stages read, rebuilt from artifact text.
#[derive(Default)]
struct State {
    cohort: Option<Cohort>,
    split: Option<CohortSplit>,
    graph: Option<CooccurrenceGraph>,
    walks: Option<Vec<Vec<usize>>>,
    services: Option<EmbeddingMatrix>,
    segments_init: Option<Vec<SegmentEmbeddingSet>>,
    segments: Option<Vec<SegmentEmbeddingSet>>,
    pooled: Option<Vec<VisitEmbedding>>,
    visits: Option<Vec<VisitEmbedding>>,
}

fn missing(what: &str) -> Error {
    Error::invalid(format!("{what} is not available"))
}

impl State {
    fn cohort(&self) -> Result<&Cohort> {
        self.cohort.as_ref().ok_or_else(|| missing("cohort"))
    }

    fn split(&self) -> Result<&CohortSplit> {
        self.split.as_ref().ok_or_else(|| missing("split"))
    }
}

type Files = Vec<(&'static str, String)>;

fn write_split(split: &CohortSplit, fraction: f64) -> String {
    let mut out = format!("# seed={} train_fraction={fraction}\n", split.seed);
    for id in &split.train {
        out.push_str(&format!("train,{id}\n"));
    }
    for id in &split.test {
        out.push_str(&format!("test,{id}\n"));
    }
    out
}

fn parse_split(text: &str, cohort: &Cohort) -> Result<CohortSplit> {
    let known: HashMap<&str, ()> = cohort.admissions.iter().map(|a| (a.admission_id.as_str(), ())).collect();
    let mut split = CohortSplit {
        train: Vec::new(),
        test: Vec::new(),
        seed: 0,
    };
    for (i, line) in text.lines().enumerate() {
        let bad = |m: String| Error::Parse {
            path: "split.txt".into(),
            line: i + 1,
            message: m,
        };
        if let Some(meta) = line.strip_prefix('#') {
            for tok in meta.split_whitespace() {
                if let Some(v) = tok.strip_prefix("seed=") {
                    split.seed = v.parse().map_err(|_| bad("bad seed".into()))?;
                }
            }
            continue;
        }
        let (side, id) = line.split_once(',').ok_or_else(|| bad(format!("bad split line `{line}`")))?;
        if !known.contains_key(id) {
            return Err(bad(format!("unknown admission `{id}`")));
        }
        match side {
            "train" => split.train.push(id.to_string()),
            "test" => split.test.push(id.to_string()),
            _ => return Err(bad(format!("bad split side `{side}`"))),
        }
    }
    if split.train.len() + split.test.len() != cohort.admissions.len() {
        return Err(Error::invalid("split does not cover every admission exactly once"));
    }
    Ok(split)
}

fn write_walks(walks: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for w in walks {
        let line: Vec<String> = w.iter().map(usize::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn parse_walks(text: &str) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| Error::Parse {
                        path: "walks.txt".into(),
                        line: i + 1,
                        message: format!("bad node `{t}`"),
                    })
                })
                .collect()
        })
        .collect()
}

fn segment_name(admission: &str, k: usize) -> String {
    format!("{admission}/{k}")
}

fn write_segment_sets(sets: &[SegmentEmbeddingSet]) -> Result<String> {
    let dim = sets.first().map_or(0, |s| s.dim());
    let mut rows = Vec::new();
    let mut names = Vec::new();
    for s in sets {
        for (k, row) in s.vectors.iter_rows().enumerate() {
            rows.push(row.to_vec());
            names.push(segment_name(&s.admission_id, k));
        }
    }
    let values = if rows.is_empty() { Matrix::zeros(0, dim) } else { Matrix::from_rows(&rows)? };
    write_embeddings(&EmbeddingMatrix::new(EntityKind::Segment, values)?, &names)
}

/// Vectors come from the file; code targets are recomputed from the cohort.
fn parse_segment_sets(text: &str, source: &str, cohort: &Cohort) -> Result<Vec<SegmentEmbeddingSet>> {
    let (emb, names) = parse_embeddings(text, source)?;
    let mut offset = 0;
    let mut sets = Vec::with_capacity(cohort.admissions.len());
    for a in &cohort.admissions {
        let seg = segment_admission(a);
        let k = seg.segments.len();
        if offset + k > emb.rows() {
            return Err(Error::invalid(format!("{source}: too few rows for admission {}", a.admission_id)));
        }
        let mut vectors = Matrix::zeros(k, emb.dim());
        for s in 0..k {
            if names[offset + s] != segment_name(&a.admission_id, s) {
                return Err(Error::invalid(format!("{source}: row {} is `{}`", offset + s, names[offset + s])));
            }
            vectors.row_mut(s).copy_from_slice(emb.row(offset + s));
        }
        offset += k;
        let current_targets: Vec<Vec<usize>> =
            seg.segments.iter().map(|s| s.code_indices.iter().copied().collect()).collect();
        let next_targets = (0..k).map(|s| current_targets.get(s + 1).cloned()).collect();
        sets.push(SegmentEmbeddingSet {
            admission_id: a.admission_id.clone(),
            vectors,
            current_targets,
            next_targets,
        });
    }
    if offset != emb.rows() {
        return Err(Error::invalid(format!("{source}: {} extra rows", emb.rows() - offset)));
    }
    Ok(sets)
}

fn write_visits(visits: &[VisitEmbedding]) -> Result<String> {
    let rows: Vec<Vec<f64>> = visits.iter().map(|v| v.vector.clone()).collect();
    let names: Vec<String> = visits.iter().map(|v| v.admission_id.clone()).collect();
    write_embeddings(&EmbeddingMatrix::new(EntityKind::Visit, Matrix::from_rows(&rows)?)?, &names)
}

fn parse_visits(text: &str, source: &str, cohort: &Cohort, kind: VisitSource) -> Result<Vec<VisitEmbedding>> {
    let (emb, names) = parse_embeddings(text, source)?;
    if names.len() != cohort.admissions.len()
        || names.iter().zip(&cohort.admissions).any(|(n, a)| *n != a.admission_id)
    {
        return Err(Error::invalid(format!("{source}: rows do not match the cohort's admissions")));
    }
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(i, admission_id)| VisitEmbedding {
            admission_id,
            vector: emb.row(i).to_vec(),
            source: kind,
        })
        .collect())
}

fn train_mask(cohort: &Cohort, split: &CohortSplit) -> Vec<bool> {
    let train: HashMap<&str, ()> = split.train.iter().map(|id| (id.as_str(), ())).collect();
    cohort.admissions.iter().map(|a| train.contains_key(a.admission_id.as_str())).collect()
}

fn execute(stage: Stage, cfg: &PipelineConfig, st: &State) -> Result<Files> {
    let exec = cfg.execution;
    match stage {
        Stage::Ingest => {
            let cohort = match &cfg.source {
                InputSource::Synthetic(s) => generate_synthetic_cohort(s, cfg.seeds.synthetic)?,
                InputSource::Journeys { journeys, durations } => {
                    read_cohort(journeys, durations.as_deref(), VocabMode::Build)?
                }
            };
            let split = split_cohort(&cohort.admissions, cfg.train_fraction, cfg.seeds.split)?;
            Ok(vec![
                ("cohort.journeys", write_journeys(&cohort)),
                ("cohort.durations", write_durations(&cohort)),
                ("split.txt", write_split(&split, cfg.train_fraction)),
            ])
        }
        Stage::Cooccurrence => {
            let c = st.cohort()?;
            let g = build_cooccurrence(&c.admissions, c.vocab.len(), cfg.window_minutes, exec)?;
            Ok(vec![("graph.txt", g.to_edge_list())])
        }
        Stage::Walks => {
            let g = st.graph.as_ref().ok_or_else(|| missing("graph"))?;
            let t = build_transitions(g, cfg.walk_p, cfg.walk_q)?;
            let walks = generate_walks(&t, &cfg.walks, exec)?;
            Ok(vec![("walks.txt", write_walks(&walks))])
        }
        Stage::Sgns => {
            let walks = st.walks.as_ref().ok_or_else(|| missing("walk corpus"))?;
            let c = st.cohort()?;
            let out = train_sgns(walks, c.vocab.len(), &cfg.sgns)?;
            Ok(vec![("services.emb", write_embeddings(&out.embedding, &c.vocab.names())?)])
        }
        Stage::SegmentInit => {
            let c = st.cohort()?;
            let svc = st.services.as_ref().ok_or_else(|| missing("service embeddings"))?;
            let sets = c
                .admissions
                .iter()
                .map(|a| init_segment_embeddings(&segment_admission(a), svc))
                .collect::<Result<Vec<_>>>()?;
            Ok(vec![("segments_init.emb", write_segment_sets(&sets)?)])
        }
        Stage::SegmentRefine => {
            let c = st.cohort()?;
            let sets = st.segments_init.as_ref().ok_or_else(|| missing("initial segments"))?;
            let mask = train_mask(c, st.split()?);
            let train: Vec<SegmentEmbeddingSet> = sets
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(s, _)| s.clone())
                .collect();
            let r = train_segment_refiner(&train, c.vocab.len(), &cfg.segment, cfg.seeds.segment, exec)?;
            let refined = refine_segments(&r.model, sets, exec)?;
            let (bc, bn) = (r.current.bias_matrix(), r.next.bias_matrix());
            let ckpt = write_checkpoint(
                &r.model,
                &[("current.w", &r.current.w), ("current.bias", &bc), ("next.w", &r.next.w), ("next.bias", &bn)],
            )?;
            Ok(vec![("segment_gat.ckpt", ckpt), ("segments.emb", write_segment_sets(&refined)?)])
        }
        Stage::VisitPool => {
            let sets = st.segments.as_ref().ok_or_else(|| missing("refined segments"))?;
            let visits = sets.iter().map(pool_visit).collect::<Result<Vec<_>>>()?;
            Ok(vec![("visits_pooled.emb", write_visits(&visits)?)])
        }
        Stage::VisitRefine => {
            let c = st.cohort()?;
            let pooled = st.pooled.as_ref().ok_or_else(|| missing("pooled visits"))?;
            let targets: Vec<Vec<usize>> = c.admissions.iter().map(|a| a.distinct_codes()).collect();
            let mask = train_mask(c, st.split()?);
            let r = train_visit_refiner(pooled, &targets, Some(&mask), c.vocab.len(), &cfg.visit, cfg.seeds.visit)?;
            let bias = r.decoder.bias_matrix();
            let ckpt = write_checkpoint(&r.model, &[("decoder.w", &r.decoder.w), ("decoder.bias", &bias)])?;
            Ok(vec![("visit_gat.ckpt", ckpt), ("visits.emb", write_visits(&r.refined)?)])
        }
        Stage::Eval => {
            let c = st.cohort()?;
            let visits = match cfg.eval_source {
                EvalSource::Refined => st.visits.as_ref(),
                EvalSource::Pooled => st.pooled.as_ref(),
            }
            .ok_or_else(|| missing("visit embeddings"))?;
            let mask = train_mask(c, st.split()?);
            let pick = |want: bool| -> Result<LabeledSet> {
                let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i] == want).collect();
                let rows: Vec<Vec<f64>> = idx.iter().map(|&i| visits[i].vector.clone()).collect();
                Ok(LabeledSet {
                    vectors: Matrix::from_rows(&rows)?,
                    labels: idx.iter().map(|&i| c.admissions[i].labels.clone()).collect(),
                })
            };
            let report = run_task_suite(&pick(true)?, &pick(false)?, &cfg.tasks, &cfg.suite, exec)?;
            Ok(vec![("report.csv", report.to_csv()?)])
        }
    }
}

fn find<'a>(files: &'a [(&str, String)], name: &str) -> Result<&'a str> {
    files
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| t.as_str())
        .ok_or_else(|| missing(name))
}

/// Parses a stage's artifacts into `st`. Fresh runs and resumed runs both go
/// through here, so downstream stages always see the persisted values.
fn absorb(stage: Stage, files: &[(&str, String)], st: &mut State) -> Result<()> {
    match stage {
        Stage::Ingest => {
            let cohort = parse_cohort(
                (find(files, "cohort.journeys")?, "cohort.journeys"),
                Some((find(files, "cohort.durations")?, "cohort.durations")),
                VocabMode::Build,
            )?;
            st.split = Some(parse_split(find(files, "split.txt")?, &cohort)?);
            st.cohort = Some(cohort);
        }
        Stage::Cooccurrence => st.graph = Some(parse_edge_list(find(files, "graph.txt")?, "graph.txt")?),
        Stage::Walks => st.walks = Some(parse_walks(find(files, "walks.txt")?)?),
        Stage::Sgns => {
            let (emb, names) = parse_embeddings(find(files, "services.emb")?, "services.emb")?;
            if names != st.cohort()?.vocab.names() {
                return Err(Error::invalid("services.emb rows do not match the vocabulary"));
            }
            st.services = Some(emb);
        }
        Stage::SegmentInit => {
            st.segments_init = Some(parse_segment_sets(
                find(files, "segments_init.emb")?,
                "segments_init.emb",
                st.cohort()?,
            )?)
        }
        Stage::SegmentRefine => {
            parse_checkpoint(find(files, "segment_gat.ckpt")?, "segment_gat.ckpt")?;
            st.segments = Some(parse_segment_sets(find(files, "segments.emb")?, "segments.emb", st.cohort()?)?)
        }
        Stage::VisitPool => {
            st.pooled = Some(parse_visits(
                find(files, "visits_pooled.emb")?,
                "visits_pooled.emb",
                st.cohort()?,
                VisitSource::MeanPooled,
            )?)
        }
        Stage::VisitRefine => {
            parse_checkpoint(find(files, "visit_gat.ckpt")?, "visit_gat.ckpt")?;
            st.visits = Some(parse_visits(
                find(files, "visits.emb")?,
                "visits.emb",
                st.cohort()?,
                VisitSource::Refined,
            )?)
        }
        Stage::Eval => {}
    }
    Ok(())
}

fn read_artifacts(dir: &Path, record: &StageRecord) -> Result<Files> {
    let stage: Stage = record.name.parse()?;
    let mut files = Vec::new();
    for &name in stage.artifacts() {
        let expected = record
            .artifacts
            .iter()
            .find(|a| a.file == name)
            .ok_or_else(|| Error::Manifest(format!("stage {stage} lists no `{name}`")))?;
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if ArtifactRecord::of(name, &bytes) != *expected {
            return Err(Error::Manifest(format!("{name} does not match its recorded hash")));
        }
        let text = String::from_utf8(bytes).map_err(|_| Error::Manifest(format!("{name} is not UTF-8")))?;
        files.push((name, text));
    }
    Ok(files)
}

/// Runs stages `from..` in order. Earlier stages are loaded from the artifacts
/// already in the output directory, which must carry a MANIFEST written with
/// the same configuration.
pub fn run_pipeline(cfg: &PipelineConfig, from: Stage) -> Result<Manifest, PipelineError> {
    let dir = cfg.output_dir.as_path();
    let mut st = State::default();
    let mut manifest = Manifest {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: cfg.hash.clone(),
        seeds: cfg.seeds.named().iter().map(|&(n, v)| (n.to_string(), v)).collect(),
        stages: Vec::new(),
    };

    if from != Stage::Ingest {
        let previous = Manifest::read(dir).map_err(PipelineError::Validation)?;
        if previous.config_hash != cfg.hash {
            return Err(PipelineError::Validation(Error::Manifest(
                "existing artifacts were produced by a different configuration".into(),
            )));
        }
        for stage in Stage::ALL.into_iter().take_while(|&s| s < from) {
            let record = previous
                .stage(stage.name())
                .filter(|r| r.status == StageStatus::Complete)
                .ok_or_else(|| {
                    PipelineError::Validation(Error::Manifest(format!("stage {stage} is not complete")))
                })?;
            let files = read_artifacts(dir, record).map_err(PipelineError::Validation)?;
            absorb(stage, &files, &mut st).map_err(PipelineError::Validation)?;
            manifest.stages.push(record.clone());
        }
    }

    fs::create_dir_all(dir).map_err(|e| PipelineError::Stage {
        stage: from,
        source: Error::io(dir, e),
    })?;

    for stage in Stage::ALL.into_iter().filter(|&s| s >= from) {
        let outcome = execute(stage, cfg, &st).and_then(|files| {
            let mut records = Vec::new();
            for (name, text) in &files {
                let path = dir.join(name);
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                records.push(ArtifactRecord::of(name, text.as_bytes()));
            }
            absorb(stage, &files, &mut st)?;
            Ok(records)
        });
        match outcome {
            Ok(artifacts) => {
                manifest.stages.push(StageRecord {
                    name: stage.name().to_string(),
                    status: StageStatus::Complete,
                    artifacts,
                });
                manifest
                    .write(dir)
                    .map_err(|source| PipelineError::Stage { stage, source })?;
            }
            Err(source) => {
                manifest.stages.push(StageRecord {
                    name: stage.name().to_string(),
                    status: StageStatus::Failed(source.to_string()),
                    artifacts: Vec::new(),
                });
                // the stage error is the one worth reporting
                let _ = manifest.write(dir);
                return Err(PipelineError::Stage { stage, source });
            }
        }
    }
    Ok(manifest)
}
