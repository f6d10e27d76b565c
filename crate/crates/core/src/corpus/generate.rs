use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{FamilyCount, ParameterPolicy, ScenarioSpec, SitePolicy};
use super::split::{split_records, SplitAssignment};
use crate::extremes::{dependence_tensor, rank_transform_frechet, DependenceTensor, UniformScores};
use crate::nn::LabeledTensor;
use crate::rng::{lanes, StreamKey};
use crate::sim::{simulate, CorrelationModel, DependenceClass, Family, MaxStableKind, ProcessSpec, SiteSet};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TENSORS_FILE: &str = "tensors.bin";
const CHECKPOINT_FILE: &str = "checkpoint.json";
const PARTIAL_RECORDS_FILE: &str = "records.partial.jsonl";
pub const CORPUS_FORMAT: &str = "xdep-corpus/1";

/// Datasets simulated per parallel round; also the checkpoint granularity.
const CHUNK: usize = 64;

/// Which part of the corpus a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    /// Training, validation and testing pool.
    Main,
    DifferentLocations,
    DifferentScale,
    DifferentSmooth,
}

impl Group {
    pub const EVALUATION: [Group; 3] = [Group::DifferentLocations, Group::DifferentScale, Group::DifferentSmooth];

    pub fn name(self) -> &'static str {
        match self {
            Group::Main => "main",
            Group::DifferentLocations => "different-locations",
            Group::DifferentScale => "different-scale",
            Group::DifferentSmooth => "different-smooth",
        }
    }
}

mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let text = String::deserialize(d)?;
        u64::from_str_radix(&text, 16).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub index: usize,
    pub group: Group,
    pub family: Family,
    pub scale: f64,
    /// `None` for Smith, whose dependence has no smoothness parameter.
    pub smoothness: Option<f64>,
    pub mixing: Option<f64>,
    /// AD and AI component families of a max-mixture.
    pub components: Option<[Family; 2]>,
    pub label: DependenceClass,
    #[serde(with = "hex_u64")]
    pub site_hash: u64,
    /// Byte offset of the dataset's tensor record in `tensors.bin`.
    pub offset: u64,
    pub approximate_reps: usize,
    pub corrected_cells: usize,
    pub undefined_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: String,
    pub scenario: u8,
    pub seed: u64,
    pub classes: usize,
    pub sites: usize,
    pub n_reps: usize,
    pub threshold: f64,
    pub spec: ScenarioSpec,
    /// The shared site set when the site policy is fixed.
    pub fixed_sites: Option<Vec<[f64; 2]>>,
    pub records: Vec<DatasetRecord>,
    pub split: SplitAssignment,
    pub warnings: Vec<String>,
}

impl CorpusManifest {
    pub fn label_histogram(&self) -> Vec<(DependenceClass, usize)> {
        DependenceClass::ALL[..self.classes]
            .iter()
            .map(|&c| (c, self.records.iter().filter(|r| r.group == Group::Main && r.label == c).count()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Planned {
    index: usize,
    group: Group,
    family: Family,
    /// Position of the dataset among the datasets of its family in its group.
    k: usize,
}

fn plan(spec: &ScenarioSpec) -> Vec<Planned> {
    let mut out = Vec::new();
    let mut push = |group: Group, counts: &[FamilyCount]| {
        for c in counts {
            for k in 0..c.count {
                out.push(Planned {
                    index: 0,
                    group,
                    family: c.family,
                    k,
                });
            }
        }
    };
    push(Group::Main, &spec.counts);
    if spec.evaluation.datasets_per_group > 0 {
        let counts = spec.evaluation_counts(spec.evaluation.datasets_per_group);
        for g in Group::EVALUATION {
            push(g, &counts);
        }
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.index = i;
    }
    out
}

/// Uniform draw on `(lo, hi]`.
fn uniform_left_open(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    r[0] + (r[1] - r[0]) * (1.0 - rng.random::<f64>())
}

struct Drawn {
    scale: f64,
    smoothness: f64,
    mixing: f64,
}

fn draw_parameters(spec: &ScenarioSpec, p: &Planned, rng: &mut ChaCha8Rng) -> Drawn {
    let mixture = p.family == Family::MaxMixture;
    let no_smoothness = p.family == Family::Smith;
    let mut d = match &spec.parameters {
        ParameterPolicy::Random { scale, smoothness, mixing } => Drawn {
            scale: uniform_left_open(rng, *scale),
            smoothness: uniform_left_open(rng, *smoothness),
            mixing: uniform_left_open(rng, *mixing),
        },
        ParameterPolicy::Grid { scale, smoothness, mixing } => {
            let n_s = if no_smoothness { 1 } else { smoothness.len() };
            let n_m = if mixture { mixing.len() } else { 1 };
            let idx = p.k % (scale.len() * n_s * n_m);
            Drawn {
                scale: scale[idx / (n_s * n_m)],
                smoothness: smoothness[(idx / n_m) % n_s],
                mixing: mixing[idx % n_m],
            }
        }
    };
    let eval = &spec.evaluation;
    match p.group {
        Group::DifferentScale => d.scale = eval.scales[p.k % eval.scales.len()],
        Group::DifferentSmooth => d.smoothness = eval.smoothness[p.k % eval.smoothness.len()],
        Group::Main | Group::DifferentLocations => {}
    }
    d
}

const AI_FAMILIES: [Family; 5] = [
    Family::InvSmith,
    Family::InvSchlather,
    Family::InvBrownResnick,
    Family::InvExtremalT,
    Family::ExtremeGaussian,
];

fn kind_of(family: Family) -> Option<MaxStableKind> {
    MaxStableKind::ALL
        .into_iter()
        .find(|&k| Family::max_stable(k) == family || Family::inverted(k) == family)
}

fn process_for(family: Family, model: CorrelationModel) -> ProcessSpec {
    match (family, kind_of(family)) {
        (Family::ExtremeGaussian, _) => ProcessSpec::ExtremeGaussian { model },
        (f, Some(kind)) if f.is_inverted() => ProcessSpec::Inverted { kind, model },
        (_, Some(kind)) => ProcessSpec::MaxStable { kind, model },
        (f, None) => unreachable!("{f:?} has no single-process spec"),
    }
}

struct Generated {
    record: DatasetRecord,
    bytes: Vec<u8>,
}

fn generate_one(spec: &ScenarioSpec, seed: u64, fixed: Option<&SiteSet>, p: &Planned) -> Result<Generated> {
    let key = StreamKey::new(seed, p.index as u64);
    let fresh_sites;
    let sites = match (fixed, p.group) {
        (Some(s), g) if g != Group::DifferentLocations => s,
        _ => {
            fresh_sites = SiteSet::uniform(spec.sites.count(), &mut key.with_lane(lanes::SITES).stream(0))?;
            &fresh_sites
        }
    };
    let mut rng = key.with_lane(lanes::PARAMS).stream(0);
    let drawn = draw_parameters(spec, p, &mut rng);
    let model = CorrelationModel::new(drawn.scale, drawn.smoothness)?;
    let (process, components) = if p.family == Family::MaxMixture {
        let ad = Family::max_stable(MaxStableKind::ALL[rng.random_range(0..4)]);
        let ai = AI_FAMILIES[rng.random_range(0..AI_FAMILIES.len())];
        (
            ProcessSpec::mixture(drawn.mixing, process_for(ad, model), process_for(ai, model))?,
            Some([ad, ai]),
        )
    } else {
        (process_for(p.family, model), None)
    };
    let sample = simulate(&process, sites, spec.n_reps, key.with_lane(lanes::FIELD))?;
    let scores = UniformScores::from_frechet(&rank_transform_frechet(&sample.values)?);
    let (tensor, quality) = dependence_tensor(&scores, spec.threshold)?;
    let uses_smoothness = p.family != Family::Smith;
    Ok(Generated {
        record: DatasetRecord {
            index: p.index,
            group: p.group,
            family: p.family,
            scale: drawn.scale,
            smoothness: uses_smoothness.then_some(drawn.smoothness),
            mixing: components.map(|_| drawn.mixing),
            components,
            label: process.label(),
            site_hash: sample.site_hash,
            offset: 0,
            approximate_reps: sample.approximate_reps,
            corrected_cells: quality.corrected.len(),
            undefined_cells: quality.undefined.len(),
        },
        bytes: tensor.to_bytes(),
    })
}

fn resolve_fixed_sites(spec: &ScenarioSpec, seed: u64) -> Result<Option<SiteSet>> {
    match &spec.sites {
        SitePolicy::Fixed { coords: Some(c), .. } => Ok(Some(SiteSet::new(c.clone())?)),
        SitePolicy::Fixed { count, coords: None } => {
            let key = StreamKey::new(seed, u64::MAX).with_lane(lanes::SITES);
            Ok(Some(SiteSet::uniform(*count, &mut key.stream(0))?))
        }
        SitePolicy::RandomPerDataset { .. } => Ok(None),
    }
}

#[derive(Serialize, Deserialize, PartialEq)]
struct Checkpoint {
    spec: ScenarioSpec,
    seed: u64,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Records completed by an interrupted run of the same `(spec, seed)`.
fn completed_records(dir: &Path, checkpoint: &Checkpoint, record_len: u64) -> Result<Vec<DatasetRecord>> {
    let Ok(text) = fs::read_to_string(dir.join(CHECKPOINT_FILE)) else {
        return Ok(Vec::new());
    };
    if serde_json::from_str::<Checkpoint>(&text).ok().as_ref() != Some(checkpoint) {
        return Ok(Vec::new());
    }
    let Ok(file) = File::open(dir.join(PARTIAL_RECORDS_FILE)) else {
        return Ok(Vec::new());
    };
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        // A torn final line is simply regenerated.
        match serde_json::from_str::<DatasetRecord>(&line?) {
            Ok(r) if r.index == records.len() && r.offset == records.len() as u64 * record_len => records.push(r),
            _ => break,
        }
    }
    let on_disk = fs::metadata(dir.join(TENSORS_FILE)).map(|m| m.len()).unwrap_or(0);
    let keep = (on_disk / record_len.max(1)) as usize;
    records.truncate(keep);
    Ok(records)
}

/// Generates a corpus into `out` (created if needed).
///
/// Dataset `i` draws everything from `StreamKey(seed, i)`, so the files are
/// identical for any thread count. Progress is checkpointed every chunk; an
/// interrupted run with the same spec and seed resumes where it stopped.
pub fn generate_corpus(spec: &ScenarioSpec, seed: u64, out: &Path) -> Result<CorpusManifest> {
    spec.validate()?;
    fs::create_dir_all(out)?;
    let fixed = resolve_fixed_sites(spec, seed)?;
    let d = spec.sites.count();
    let record_len = DependenceTensor::encoded_len(d) as u64;
    let planned = plan(spec);
    let checkpoint = Checkpoint { spec: spec.clone(), seed };
    let mut records = completed_records(out, &checkpoint, record_len)?;
    if !records.is_empty() {
        log::info!("resuming corpus generation at dataset {}/{}", records.len(), planned.len());
    }
    write_atomic(&out.join(CHECKPOINT_FILE), serde_json::to_string(&checkpoint)?.as_bytes())?;
    let tensors = OpenOptions::new().create(true).write(true).truncate(false).open(out.join(TENSORS_FILE))?;
    tensors.set_len(records.len() as u64 * record_len)?;
    let mut tensors = BufWriter::new(tensors);
    std::io::Seek::seek(&mut tensors, std::io::SeekFrom::End(0))?;
    let mut partial = {
        let path = out.join(PARTIAL_RECORDS_FILE);
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        fs::write(&path, text)?;
        BufWriter::new(OpenOptions::new().append(true).open(path)?)
    };
    for chunk in planned[records.len()..].chunks(CHUNK) {
        let generated: Vec<Result<Generated>> = chunk
            .par_iter()
            .map(|p| generate_one(spec, seed, fixed.as_ref(), p))
            .collect();
        for g in generated {
            let Generated { mut record, bytes } = g?;
            record.offset = records.len() as u64 * record_len;
            if record.approximate_reps > 0 {
                log::warn!("dataset {}: {} replications hit the storm budget", record.index, record.approximate_reps);
            }
            tensors.write_all(&bytes)?;
            records.push(record);
        }
        tensors.flush()?;
        for r in &records[records.len() - chunk.len()..] {
            writeln!(partial, "{}", serde_json::to_string(r)?)?;
        }
        partial.flush()?;
    }
    drop(partial);
    tensors.into_inner().map_err(|e| Error::Io(e.into_error()))?.sync_all()?;
    let (split, warnings) = split_records(&records, seed);
    for w in &warnings {
        log::warn!("{w}");
    }
    let manifest = CorpusManifest {
        format: CORPUS_FORMAT.into(),
        scenario: spec.scenario,
        seed,
        classes: spec.classes,
        sites: d,
        n_reps: spec.n_reps,
        threshold: spec.threshold,
        spec: spec.clone(),
        fixed_sites: fixed.map(|s| s.coords().to_vec()),
        records,
        split,
        warnings,
    };
    write_atomic(&out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    fs::remove_file(out.join(PARTIAL_RECORDS_FILE))?;
    fs::remove_file(out.join(CHECKPOINT_FILE))?;
    Ok(manifest)
}

/// A generated corpus loaded into memory.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: CorpusManifest,
    data: Vec<u8>,
}

impl Corpus {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest: CorpusManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        if manifest.format != CORPUS_FORMAT {
            return Err(Error::Format(format!("unsupported corpus format {:?}", manifest.format)));
        }
        let data = fs::read(dir.join(TENSORS_FILE))?;
        let need = manifest.records.len() * DependenceTensor::encoded_len(manifest.sites);
        if data.len() != need {
            return Err(Error::Format(format!("{TENSORS_FILE} holds {} bytes, manifest expects {need}", data.len())));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            data,
        })
    }

    pub fn tensor(&self, index: usize) -> Result<DependenceTensor> {
        let record = self
            .manifest
            .records
            .get(index)
            .ok_or_else(|| Error::Config(format!("dataset {index} is not in the corpus")))?;
        let start = record.offset as usize;
        let end = start + DependenceTensor::encoded_len(self.manifest.sites);
        let bytes = self
            .data
            .get(start..end)
            .ok_or_else(|| Error::Format(format!("dataset {index} lies outside {TENSORS_FILE}")))?;
        DependenceTensor::from_bytes(bytes)
    }

    /// Network inputs and class indices for the given datasets.
    pub fn labeled(&self, indices: &[usize]) -> Result<Vec<LabeledTensor>> {
        indices
            .par_iter()
            .map(|&i| {
                Ok(LabeledTensor {
                    input: self.tensor(i)?.to_input(),
                    label: self.manifest.records[i].label.index(),
                })
            })
            .collect()
    }
}
