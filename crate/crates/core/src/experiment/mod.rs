//! The train/test modality matrix: pretrain eigenmouths, extract features,
//! fit replicate models, score every test condition with ABX, and write
//! reports plus a manifest from which the run can be repeated exactly.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.json          configuration, its digest, seeds, software version
//! timing.json            wall-clock timestamps and stage durations
//! battery.csv            the ABX triples
//! eigenmouths.aveb       pretrained basis (visual runs only)
//! models/<T>_rNN.avdp    fitted model per train modality and replicate
//! models/<T>_rNN_trace.csv
//! reports/<T>-<C>_rNN.json
//! scores.csv             one row per condition and replicate
//! summary.csv, summary.json
//! ```

mod config;
mod pipeline;
mod report;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    AbxParams, Condition, ConditionSpec, ExperimentConfig, FeatureParams, PriorParams, SamplerParams,
    TestCondition, TrainModality,
};
pub use pipeline::{load_split, pretrain_basis, UtteranceData};
pub use report::{compare_runs, Comparison, ConditionSummary};

use crate::abx::{
    aggregate_battery, build_battery, score_battery, token_posteriors, AbxBattery, BatteryOptions,
    PhoneToken, PosteriorToken, ScoreReport,
};
use crate::container::write_atomic;
use crate::corpus::Corpus;
use crate::dpgmm::{fit, DpgmmModel, NiwPrior};
use crate::error::{Error, Result};
use crate::fusion::{FeatureSequence, Modality, Standardizer};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub software_version: String,
    pub config: ExperimentConfig,
    /// SHA-256 of the configuration in canonical TOML form.
    pub config_sha256: String,
    pub replicate_seeds: Vec<u64>,
    pub noise_seed: u64,
    pub battery_sha256: String,
    pub conditions: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "{}: manifest schema {} is not supported",
                path.display(),
                m.schema_version
            )));
        }
        if config_digest(&m.config) != m.config_sha256 {
            return Err(Error::Config(format!(
                "{}: configuration does not match its recorded digest",
                path.display()
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize)]
struct BatteryStats {
    tokens: usize,
    excluded_tokens: usize,
    triples: usize,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct SummaryFile<'a> {
    schema_version: u32,
    ci_method: &'static str,
    battery: &'a BatteryStats,
    conditions: &'a [ConditionSummary],
}

/// Results of one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: PathBuf,
    pub reports: BTreeMap<Condition, Vec<ScoreReport>>,
    pub summaries: Vec<ConditionSummary>,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn reports(&self, condition: &str) -> Result<&[ScoreReport]> {
        let c: Condition = condition.parse()?;
        self.reports
            .get(&c)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("condition {c} was not part of this run")))
    }
}

pub fn config_digest(config: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml().as_bytes()))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn make_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Dimensions of a `train`-layout model observed under `test`.
fn observed_dims(train: &FeatureSequence, test: TestCondition) -> Vec<usize> {
    let l = &train.layout;
    let mut dims: Vec<usize> = Vec::new();
    if test.audio() {
        dims.extend(l.range(Modality::Audio));
    }
    if test.visual() {
        dims.extend(l.range(Modality::Visual));
    }
    dims
}

fn build_prior(seqs: &[FeatureSequence], p: &PriorParams) -> Result<NiwPrior> {
    let d = seqs[0].dims();
    let base = NiwPrior::from_data(seqs.iter().flat_map(|s| s.vectors.iter().map(|v| &v[..])), d)?;
    NiwPrior::new(base.mean0, p.kappa0, d as f64 + p.nu0_offset, base.psi0 * p.psi_scale)
}

struct TrainedModality {
    models: Vec<DpgmmModel>,
    standardizer: Option<Standardizer>,
    template: FeatureSequence,
}

fn train_modality(
    config: &ExperimentConfig,
    train: &[UtteranceData],
    modality: TrainModality,
    output: &Path,
) -> Result<TrainedModality> {
    let mut seqs = train
        .iter()
        .map(|u| u.train_input(modality).map_err(|e| Error::stage("assemble", &u.id, e)))
        .collect::<Result<Vec<_>>>()?;
    let standardizer = if config.features.standardize {
        let s = Standardizer::fit(&seqs)?;
        let all: Vec<usize> = (0..seqs[0].dims()).collect();
        seqs = seqs.iter().map(|q| s.apply(q, &all)).collect::<Result<_>>()?;
        Some(s)
    } else {
        None
    };
    let prior = build_prior(&seqs, &config.prior).map_err(|e| Error::stage("prior", modality.to_string(), e))?;
    log::info!(
        "fitting {} x {modality} models on {} windows of {} dims",
        config.replicates,
        seqs.iter().map(FeatureSequence::len).sum::<usize>(),
        prior.dims()
    );
    let models = config
        .seeds()
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| {
            fit(&seqs, &prior, &config.dpgmm.with_seed(seed))
                .map_err(|e| Error::stage("fit", format!("{modality} replicate {r}"), e))
        })
        .collect::<Result<Vec<_>>>()?;
    for (r, m) in models.iter().enumerate() {
        log::info!("{modality} replicate {r}: {} clusters", m.n_clusters());
        let stem = output.join("models").join(format!("{modality}_r{r:02}"));
        m.save(&stem.with_extension("avdp"))?;
        write_atomic(
            &stem.with_file_name(format!("{modality}_r{r:02}_trace.csv")),
            m.trace_csv().as_bytes(),
        )?;
    }
    Ok(TrainedModality {
        models,
        standardizer,
        template: seqs.swap_remove(0),
    })
}

fn evaluate(
    config: &ExperimentConfig,
    trained: &TrainedModality,
    test: &[UtteranceData],
    condition: Condition,
    battery: &AbxBattery,
    battery_id: &str,
    corpus: &Corpus,
) -> Result<Vec<ScoreReport>> {
    let dims = observed_dims(&trained.template, condition.test);
    let full = dims.len() == trained.template.dims();
    let seqs = test
        .iter()
        .map(|u| {
            let s = u.test_input(condition.test)?;
            match &trained.standardizer {
                Some(st) => st.apply(&s, &dims),
                None => Ok(s),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let utt_index: HashMap<&str, usize> = test.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();
    trained
        .models
        .par_iter()
        .map(|model| {
            let mixture = if full {
                model.mixture.clone()
            } else {
                model.mixture.marginal(&dims)?
            };
            let per_utt = test
                .iter()
                .zip(&seqs)
                .map(|(u, s)| token_posteriors(&mixture, s, &u.tokens))
                .collect::<Result<Vec<_>>>()?;
            let posteriors: Vec<PosteriorToken> = battery
                .tokens
                .iter()
                .map(|t| {
                    per_utt[utt_index[t.utterance.as_str()]][t.position]
                        .clone()
                        .ok_or_else(|| Error::Data(format!("token {} covers no window", t.id())))
                })
                .collect::<Result<_>>()?;
            let scores = score_battery(battery, &posteriors)?;
            let mut report = aggregate_battery(battery, &scores, config.abx.weighting, Some(&corpus.classes))?;
            report.battery = Some(battery_id.to_string());
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::stage("evaluate", condition.to_string(), e))
}

/// Runs the configured experiment, writing all artifacts under `output`.
pub fn run_experiment(config: &ExperimentConfig, output: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let started = unix_now();
    let clock = Instant::now();
    let mut stages: Vec<(&str, f64)> = Vec::new();
    let mut lap = {
        let mut last = Instant::now();
        move |name: &'static str, stages: &mut Vec<(&str, f64)>| {
            stages.push((name, last.elapsed().as_secs_f64()));
            last = Instant::now();
        }
    };

    let corpus = Corpus::open(&config.corpus)
        .map_err(|e| Error::stage("corpus", config.corpus.display().to_string(), e))?;
    make_dir(output)?;
    make_dir(&output.join("models"))?;
    make_dir(&output.join("reports"))?;

    let basis = if config.uses_visual() && corpus.meta.emission == crate::corpus::Emission::Waveform {
        let b = pretrain_basis(&corpus, &config.features)?;
        b.save(&output.join("eigenmouths.aveb"))?;
        Some(b)
    } else {
        None
    };
    lap("pretrain", &mut stages);

    let splits = &corpus.meta.splits;
    let train = load_split(&corpus, &splits.train, &config.features, basis.as_ref(), false)?;
    let test = load_split(&corpus, &splits.test, &config.features, basis.as_ref(), config.uses_noise())?;
    lap("extract", &mut stages);

    let mut kept: Vec<PhoneToken> = Vec::new();
    let mut excluded = 0;
    for u in &test {
        for t in &u.tokens {
            if u.audio.grid.windows_within(t.start, t.end).is_empty() {
                excluded += 1;
            } else {
                kept.push(t.clone());
            }
        }
    }
    if excluded > 0 {
        log::info!("{excluded} test tokens cover no window center and are excluded");
    }
    let options = BatteryOptions {
        cross_speaker: config.abx.cross_speaker,
    };
    let battery = build_battery(&kept, &corpus.classes, options)?;
    if battery.is_empty() {
        return Err(Error::Data("the test split yields no ABX triples".into()));
    }
    let battery_csv = battery.to_csv();
    let battery_id = hex::encode(Sha256::digest(battery_csv.as_bytes()));
    write_atomic(&output.join("battery.csv"), battery_csv.as_bytes())?;
    let battery_stats = BatteryStats {
        tokens: kept.len(),
        excluded_tokens: excluded,
        triples: battery.len(),
        sha256: battery_id.clone(),
    };
    log::info!("ABX battery: {} triples over {} tokens", battery.len(), kept.len());

    let mut reports: BTreeMap<Condition, Vec<ScoreReport>> = BTreeMap::new();
    let mut order = Vec::new();
    for spec in &config.conditions {
        let trained = train_modality(config, &train, spec.train, output)?;
        for &test_condition in &spec.test {
            let condition = Condition {
                train: spec.train,
                test: test_condition,
            };
            let rs = evaluate(config, &trained, &test, condition, &battery, &battery_id, &corpus)?;
            for (r, rep) in rs.iter().enumerate() {
                write_atomic(
                    &output.join("reports").join(format!("{condition}_r{r:02}.json")),
                    &json_bytes(rep),
                )?;
            }
            log::info!(
                "{condition}: mean overall {:.4}",
                rs.iter().map(|r| r.overall).sum::<f64>() / rs.len() as f64
            );
            order.push(condition);
            reports.insert(condition, rs);
        }
    }
    lap("fit+evaluate", &mut stages);

    let seeds = config.seeds();
    let mut scores_csv = String::from("condition,train,test,replicate,seed,overall,triples,contrasts\n");
    let mut summaries = Vec::new();
    for c in &order {
        let rs = &reports[c];
        for (r, rep) in rs.iter().enumerate() {
            scores_csv.push_str(&format!(
                "{c},{},{},{r},{},{},{},{}\n",
                c.train,
                c.test,
                seeds[r],
                rep.overall,
                rep.triples,
                rep.contrasts.len()
            ));
        }
        let overall: Vec<f64> = rs.iter().map(|r| r.overall).collect();
        summaries.push(ConditionSummary::from_scores(&c.to_string(), &overall)?);
    }
    write_atomic(&output.join("scores.csv"), scores_csv.as_bytes())?;
    let mut summary_csv = String::from("condition,replicates,mean,std,ci_low,ci_high\n");
    for s in &summaries {
        summary_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.condition, s.replicates, s.mean, s.std, s.ci_low, s.ci_high
        ));
    }
    write_atomic(&output.join("summary.csv"), summary_csv.as_bytes())?;
    write_atomic(
        &output.join("summary.json"),
        &json_bytes(&SummaryFile {
            schema_version: SUMMARY_SCHEMA_VERSION,
            ci_method: "normal approximation: mean +/- 1.96 * sd / sqrt(replicates)",
            battery: &battery_stats,
            conditions: &summaries,
        }),
    )?;

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        software_version: crate::VERSION.to_string(),
        config: config.clone(),
        config_sha256: config_digest(config),
        replicate_seeds: seeds,
        noise_seed: config.features.noise_seed,
        battery_sha256: battery_id,
        conditions: order.iter().map(|c| c.to_string()).collect(),
    };
    write_atomic(&output.join(MANIFEST_FILE), &json_bytes(&manifest))?;
    lap("write", &mut stages);

    let timing = serde_json::json!({
        "started_unix": started,
        "finished_unix": unix_now(),
        "elapsed_s": clock.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
        "stages": stages.iter().map(|(n, s)| serde_json::json!({"stage": n, "seconds": s})).collect::<Vec<_>>(),
    });
    write_atomic(&output.join("timing.json"), &json_bytes(&timing))?;

    Ok(RunOutcome {
        output: output.to_path_buf(),
        reports,
        summaries,
        manifest,
    })
}

/// Repeats the run recorded in `manifest_path`, writing to `output`.
pub fn rerun_from_manifest(manifest_path: &Path, output: &Path) -> Result<RunOutcome> {
    let m = RunManifest::read(manifest_path)?;
    if m.software_version != crate::VERSION {
        log::warn!(
            "manifest was written by version {}, running {}",
            m.software_version,
            crate::VERSION
        );
    }
    run_experiment(&m.config, output)
}

/// Reads the replicate reports of `condition` from a finished run directory.
pub fn load_reports(run_dir: &Path, condition: &str) -> Result<Vec<ScoreReport>> {
    let c: Condition = condition.parse()?;
    let manifest = RunManifest::read(&run_dir.join(MANIFEST_FILE))?;
    if !manifest.conditions.contains(&c.to_string()) {
        return Err(Error::Config(format!(
            "{}: condition {c} was not part of this run",
            run_dir.display()
        )));
    }
    (0..manifest.replicate_seeds.len())
        .map(|r| {
            let p = run_dir.join("reports").join(format!("{c}_r{r:02}.json"));
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            ScoreReport::from_json(&text)
        })
        .collect()
}
