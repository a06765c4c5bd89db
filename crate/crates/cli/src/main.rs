//! Command-line front end for the audiovisual phone-learning pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use avphone::abx::{
    aggregate_battery, build_battery, score_battery, token_posteriors, BatteryOptions, ClassMap,
    PhoneToken, PosteriorToken, Weighting,
};
use avphone::audio::{extract_audio_features, AudioSignal, NoiseConfig, DEFAULT_HOP, DEFAULT_WINDOW_LEN};
use avphone::container::{features_to_csv, read_features, write_atomic, write_features};
use avphone::dpgmm::{fit, DpgmmConfig, DpgmmModel, NiwPrior};
use avphone::experiment::{
    compare_runs, load_reports, rerun_from_manifest, run_experiment, Condition, ExperimentConfig,
};
use avphone::fusion::FeatureSequence;
use avphone::synth::{generate, SynthSpec};
use avphone::visual::{
    extract_visual_features, EigenBasis, MouthBox, VideoClip, DEFAULT_COMPONENTS, MOUTH_HEIGHT, MOUTH_WIDTH,
};
use avphone::{Error, Modality, Result};

#[derive(Parser)]
#[command(name = "avphone", version, about = "Unsupervised audiovisual phonetic category learning")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded execution.
    #[arg(long, global = true)]
    sequential: bool,
    /// SNR in dB for injected test noise.
    #[arg(long = "snr-db", global = true, allow_negative_numbers = true)]
    snr_db: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// MFCC + delta features for one WAV file.
    ExtractAudio {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV dump next to the container.
        #[arg(long)]
        csv: bool,
    },
    /// Eigenmouth features for one clip on the window grid of its audio.
    ExtractVideo {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        basis: PathBuf,
        /// Mouth box corner as `x,y`.
        #[arg(long, value_parser = parse_corner)]
        mouth: (usize, usize),
        #[arg(long, default_value_t = 60.0)]
        fps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the eigenmouth basis on frame directories.
    FitPca {
        #[arg(long, required = true, num_args = 1..)]
        frames: Vec<PathBuf>,
        #[arg(long, value_parser = parse_corner)]
        mouth: (usize, usize),
        #[arg(long, default_value_t = 60.0)]
        fps: f64,
        #[arg(short, long, default_value_t = DEFAULT_COMPONENTS)]
        k: usize,
        #[arg(long, default_value_t = 600)]
        max_frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a DPGMM on feature containers.
    Train {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1500)]
        iterations: usize,
        #[arg(long, default_value_t = 10)]
        init_clusters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on an ABX battery built from alignments.
    EvalAbx {
        #[arg(long)]
        model: PathBuf,
        /// Feature containers; each is matched to `<alignments>/<utterance>.tsv`.
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        alignments: PathBuf,
        #[arg(long)]
        class_map: PathBuf,
        /// Modalities present in the features: A, V or AV.
        #[arg(long, default_value = "AV")]
        test: String,
        #[arg(long)]
        cross_speaker: bool,
        #[arg(long)]
        triple_weighted: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the configured experiment (or repeat one from its manifest).
    Run {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        manifest: Option<PathBuf>,
    },
    /// Compare two conditions across runs (Mann-Whitney U).
    Compare {
        #[arg(long)]
        run: PathBuf,
        /// Condition whose gain is measured, e.g. AV-AV.
        #[arg(long)]
        test: String,
        /// Baseline condition, e.g. A-A.
        #[arg(long)]
        baseline: String,
        /// Run holding the baseline (defaults to --run).
        #[arg(long)]
        baseline_run: Option<PathBuf>,
        /// Also write the comparison as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_corner(s: &str) -> std::result::Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    Ok((
        x.trim().parse().map_err(|e| format!("{e}"))?,
        y.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or(0);
    match cli.command {
        Command::Synth { spec, out } => {
            let mut spec = SynthSpec::read(&spec)?;
            if let Some(s) = g.seed {
                spec.seed = s;
            }
            let summary = generate(&spec, &out)?;
            println!(
                "wrote {} utterances ({:.1} s of audio) to {}",
                summary.utterances.len(),
                summary.seconds,
                out.display()
            );
        }
        Command::ExtractAudio { wav, out, csv } => {
            let signal = AudioSignal::read_wav(&wav)?;
            let noise = match g.snr_db {
                Some(snr) => NoiseConfig::at_snr(snr, seed),
                None => NoiseConfig::disabled(),
            };
            let id = wav.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let seq = extract_audio_features(&signal, DEFAULT_WINDOW_LEN, DEFAULT_HOP, &noise, &id)?;
            write_features(&out, &seq)?;
            if csv {
                write_atomic(&out.with_extension("csv"), features_to_csv(&seq).as_bytes())?;
            }
            println!("{}: {} windows x {} dims", out.display(), seq.len(), seq.dims());
        }
        Command::ExtractVideo {
            frames,
            wav,
            basis,
            mouth,
            fps,
            out,
        } => {
            let signal = AudioSignal::read_wav(&wav)?;
            let id = wav.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let audio = extract_audio_features(&signal, DEFAULT_WINDOW_LEN, DEFAULT_HOP, &NoiseConfig::disabled(), &id)?;
            let clip = VideoClip::load(&frames, fps, &MouthBox::at(mouth.0, mouth.1))?;
            let seq = extract_visual_features(&clip, &audio.grid, &EigenBasis::load(&basis)?, &id)?;
            write_features(&out, &seq)?;
            println!("{}: {} windows x {} dims", out.display(), seq.len(), seq.dims());
        }
        Command::FitPca {
            frames,
            mouth,
            fps,
            k,
            max_frames,
            out,
        } => {
            let mouth = MouthBox::at(mouth.0, mouth.1);
            let mut all = Vec::new();
            for dir in &frames {
                all.extend(VideoClip::load(dir, fps, &mouth)?.frames);
            }
            let stride = all.len().div_ceil(max_frames.max(1)).max(1);
            let samples: Vec<Vec<f64>> = all.iter().step_by(stride).map(|f| f.to_vector()).collect();
            let basis = EigenBasis::fit(&samples, k, MOUTH_HEIGHT, MOUTH_WIDTH)?;
            basis.save(&out)?;
            println!(
                "{}: k = {} from {} frames, explained variance {:?}",
                out.display(),
                basis.k(),
                samples.len(),
                basis.explained_variance
            );
        }
        Command::Train {
            features,
            alpha,
            iterations,
            init_clusters,
            out,
        } => {
            let seqs = features
                .iter()
                .map(|p| read_features(p))
                .collect::<Result<Vec<FeatureSequence>>>()?;
            let d = seqs.first().ok_or(Error::Empty("feature files"))?.dims();
            let prior = NiwPrior::from_data(seqs.iter().flat_map(|s| s.vectors.iter().map(|v| &v[..])), d)?;
            let cfg = DpgmmConfig {
                alpha,
                iterations,
                init_clusters,
                seed,
            };
            let model = fit(&seqs, &prior, &cfg)?;
            model.save(&out)?;
            write_atomic(&out.with_extension("trace.csv"), model.trace_csv().as_bytes())?;
            println!("{}: {} clusters over {d} dims", out.display(), model.n_clusters());
        }
        Command::EvalAbx {
            model,
            features,
            alignments,
            class_map,
            test,
            cross_speaker,
            triple_weighted,
            out,
        } => {
            let model = DpgmmModel::load(&model)?;
            let classes = ClassMap::read(&class_map)?;
            let observed: Vec<usize> = match test.as_str() {
                "A" => model.layout.range(Modality::Audio).collect(),
                "V" => model.layout.range(Modality::Visual).collect(),
                "AV" => (0..model.dims()).collect(),
                other => return Err(Error::Config(format!("unknown test modality {other:?}"))),
            };
            let mixture = if observed.len() == model.dims() {
                model.mixture.clone()
            } else {
                model.mixture.marginal(&observed)?
            };
            let mut tokens: Vec<PhoneToken> = Vec::new();
            let mut posts: std::collections::HashMap<String, PosteriorToken> = Default::default();
            for f in &features {
                let seq = read_features(f)?;
                let rows = avphone::abx::read_alignment(&alignments.join(format!("{}.tsv", seq.utterance)))?;
                let toks = avphone::abx::tokens_from_alignment(&seq.utterance, &rows);
                for (t, p) in toks.iter().zip(token_posteriors(&mixture, &seq, &toks)?) {
                    if let Some(p) = p {
                        posts.insert(t.id(), p);
                        tokens.push(t.clone());
                    }
                }
            }
            let battery = build_battery(&tokens, &classes, BatteryOptions { cross_speaker })?;
            let posteriors: Vec<PosteriorToken> = battery.tokens.iter().map(|t| posts[&t.id()].clone()).collect();
            let scores = score_battery(&battery, &posteriors)?;
            let weighting = if triple_weighted { Weighting::Triple } else { Weighting::Contrast };
            let report = aggregate_battery(&battery, &scores, weighting, Some(&classes))?;
            write_atomic(&out, format!("{}\n", report.to_json()).as_bytes())?;
            println!("overall ABX {:.4} over {} triples", report.overall, report.triples);
        }
        Command::Run { output, manifest } => {
            let outcome = if let Some(m) = manifest {
                let output = output.ok_or_else(|| Error::Config("--output is required with --manifest".into()))?;
                rerun_from_manifest(&m, &output)?
            } else {
                let path = g
                    .config
                    .as_ref()
                    .ok_or_else(|| Error::Config("run needs --config or --manifest".into()))?;
                let mut cfg = ExperimentConfig::read(path)?;
                if let Some(s) = g.seed {
                    cfg.seed = s;
                }
                if let Some(snr) = g.snr_db {
                    cfg.features.snr_db = snr;
                }
                let output = output
                    .or_else(|| cfg.output.clone())
                    .ok_or_else(|| Error::Config("no output directory given".into()))?;
                run_experiment(&cfg, &output)?
            };
            for s in &outcome.summaries {
                println!(
                    "{:<6} mean {:.4}  95% CI [{:.4}, {:.4}]  n = {}",
                    s.condition, s.mean, s.ci_low, s.ci_high, s.replicates
                );
            }
        }
        Command::Compare {
            run,
            test,
            baseline,
            baseline_run,
            out,
        } => {
            test.parse::<Condition>()?;
            baseline.parse::<Condition>()?;
            let set_1 = load_reports(&run, &test)?;
            let set_2 = load_reports(baseline_run.as_deref().unwrap_or(&run), &baseline)?;
            let c = compare_runs(&set_1, &set_2)?;
            let json = serde_json::to_string_pretty(&c).expect("serializable");
            if let Some(out) = out {
                write_atomic(&out, format!("{json}\n").as_bytes())?;
            }
            println!("{json}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = if cli.global.sequential { Some(1) } else { cli.global.threads };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure the thread pool: {e}");
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
