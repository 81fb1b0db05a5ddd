//! The subcommands. Each reads its prerequisites from the run directory,
//! writes its artifacts once, and appends a manifest line.

use anyhow::{bail, Context, Result};
use hyst_core::candidates::{candidate_records, global_value_set, reachability_report, ReachabilityReport};
use hyst_core::corpus::{in_subsample, load_splits, Dialogue, Split, SplitCorpora};
use hyst_core::eval::{evaluate, ReportBundle};
use hyst_core::hybrid::{combine, ensemble_vote, select_methods, HybridAssignment, Run, SlotAccuracyTable};
use hyst_core::jsonl::{read_jsonl, to_jsonl_string};
use hyst_core::jst::{JstConfig, JstModel, JstSpec};
use hyst_core::nn::train::{train, EpochStats};
use hyst_core::ontology::build_ontology;
use hyst_core::ov::{OvConfig, OvModel, OvSpec};
use hyst_core::predictions::{PredictionRecord, Predictions};
use hyst_core::slots::NUM_SLOTS;
use hyst_core::stats::{corpus_stats, slot_stats};
use serde::{Deserialize, Serialize};

use crate::artifacts::{sha256_hex, RunDir};
use crate::config::RunConfig;
use crate::report::{render_stats, StatsArtifact};

pub const INGEST_FILE: &str = "ingest.json";
pub const STATS_JSON: &str = "stats.json";
pub const STATS_TXT: &str = "stats.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tracker {
    Ov,
    Jst,
}

impl Tracker {
    pub fn name(self) -> &'static str {
        match self {
            Tracker::Ov => "ov",
            Tracker::Jst => "jst",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Tracker::Ov => "OV",
            Tracker::Jst => "JST",
        }
    }

    fn train_command(self) -> &'static str {
        match self {
            Tracker::Ov => "train-ov",
            Tracker::Jst => "train-jst",
        }
    }
}

pub fn checkpoint_path(tracker: Tracker, seed: u64) -> String {
    format!("checkpoints/{}-seed{seed}.ckpt", tracker.name())
}

pub fn training_log_path(tracker: Tracker, seed: u64) -> String {
    format!("logs/{}-seed{seed}.csv", tracker.name())
}

pub fn predictions_path(system: &str, split: Split) -> String {
    format!("predictions/{system}-{split}.jsonl")
}

pub fn candidates_path(split: Split) -> String {
    format!("candidates/{split}.jsonl")
}

pub fn reachability_path(split: Split) -> String {
    format!("candidates/reachability-{split}.json")
}

pub fn assignment_path(tag: &str) -> String {
    format!("hybrid/assignment-{tag}.json")
}

pub fn report_dir(split: Split) -> String {
    format!("reports/{split}")
}

fn seed_tag(seed: u64) -> String {
    format!("seed{seed}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub subsample: f64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s.into_bytes()
}

fn prediction_bytes(p: &Predictions) -> Vec<u8> {
    to_jsonl_string(&p.records()).into_bytes()
}

/// Shared state of one invocation: the resolved config, its run directory
/// and the corpus, loaded on first use.
pub struct Pipeline {
    pub config: RunConfig,
    pub run: RunDir,
    corpora: Option<SplitCorpora>,
    quiet: bool,
}

impl Pipeline {
    /// Validates the config and opens its run directory; nothing heavier
    /// happens until a subcommand runs.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let run = RunDir::open(&config)?;
        Ok(Self {
            config,
            run,
            corpora: None,
            quiet: false,
        })
    }

    pub fn quiet(mut self, quiet: bool) -> Self {
        self.quiet = quiet;
        self
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn corpora(&mut self) -> Result<&SplitCorpora> {
        if self.corpora.is_none() {
            let dir = &self.config.data_dir;
            let frac = self.config.subsample;
            let all = load_splits(dir).with_context(|| format!("cannot load corpus from {}", dir.display()))?;
            self.corpora = Some(all.filter(|d| in_subsample(&d.id, frac)));
        }
        Ok(self.corpora.as_ref().expect("loaded"))
    }

    fn split(&mut self, split: Split) -> Result<Vec<Dialogue>> {
        Ok(self.corpora()?.get(split).to_vec())
    }

    /// Splits that get predictions: dev for hybrid selection, plus the
    /// evaluation split.
    fn prediction_splits(&self) -> Vec<Split> {
        let mut s = vec![Split::Dev];
        if self.config.split != Split::Dev {
            s.push(self.config.split);
        }
        s
    }

    fn require_ingest(&mut self) -> Result<()> {
        self.run.read_input(INGEST_FILE, "ingest")?;
        Ok(())
    }

    /// The configured seeds, or just `seed` when one is given.
    pub fn seeds(&self, seed: Option<u64>) -> Result<Vec<u64>> {
        match seed {
            None => Ok(self.config.seeds.clone()),
            Some(s) if self.config.seeds.contains(&s) => Ok(vec![s]),
            Some(s) => bail!("seed {s} is not among the configured seeds {:?}; add it to `seeds` in the config", self.config.seeds),
        }
    }

    pub fn ingest(&mut self) -> Result<IngestSummary> {
        let subsample = self.config.subsample;
        let c = self.corpora()?;
        let ids = |d: &[Dialogue]| d.iter().map(|d| d.id.clone()).collect::<Vec<_>>();
        let summary = IngestSummary {
            subsample,
            train: ids(&c.train),
            dev: ids(&c.dev),
            test: ids(&c.test),
        };
        self.run.write_once(INGEST_FILE, &json_bytes(&summary))?;
        self.log(format!(
            "ingested {} train, {} dev, {} test dialogues",
            summary.train.len(),
            summary.dev.len(),
            summary.test.len()
        ));
        self.run.finish("ingest", &[])?;
        Ok(summary)
    }

    pub fn stats(&mut self) -> Result<String> {
        self.require_ingest()?;
        let c = self.corpora()?;
        let ontology = build_ontology(&c.train);
        let artifact = StatsArtifact {
            corpus: Split::ALL.iter().map(|&s| (s, corpus_stats(c.get(s)))).collect(),
            slots: slot_stats(&c.train, &c.dev, &ontology),
        };
        let text = render_stats(&artifact);
        self.run.write_once(STATS_JSON, &json_bytes(&artifact))?;
        self.run.write_once(STATS_TXT, text.as_bytes())?;
        self.run.finish("stats", &[])?;
        Ok(text)
    }

    pub fn candidates(&mut self) -> Result<ReachabilityReport> {
        self.require_ingest()?;
        let max_n = self.config.max_ngram;
        let eval_split = self.config.split;
        let c = self.corpora()?.clone();
        let values = global_value_set(&c.train);
        let ontology = build_ontology(&c.train);
        for split in Split::ALL {
            let records = candidate_records(c.get(split), &values, max_n);
            self.run.write_once(&candidates_path(split), to_jsonl_string(&records).as_bytes())?;
        }
        let mut dev_report = None;
        for split in [Split::Dev, eval_split] {
            let report = reachability_report(c.get(split), &values, &ontology, max_n);
            self.run.write_once(&reachability_path(split), &json_bytes(&report))?;
            dev_report.get_or_insert(report);
        }
        let r = dev_report.expect("dev report");
        self.log(format!(
            "dev reachability: OV unreachable {:.2}% (ceiling {:.2}%), JST unreachable {:.2}% (ceiling {:.2}%)",
            r.ov_unreachable_rate, r.ov_ceiling, r.jst_unreachable_rate, r.jst_ceiling
        ));
        self.run.finish("candidates", &[])?;
        Ok(r)
    }

    /// Trains one tracker per seed, skipping seeds whose checkpoint exists.
    pub fn train(&mut self, tracker: Tracker, seed: Option<u64>) -> Result<()> {
        self.require_ingest()?;
        if tracker == Tracker::Ov {
            self.run.read_input(&candidates_path(Split::Train), "candidates")?;
        }
        let seeds = self.seeds(seed)?;
        let train_set = self.split(Split::Train)?;
        let dev_set = self.split(Split::Dev)?;
        for &s in &seeds {
            let ckpt = checkpoint_path(tracker, s);
            if self.run.exists(&ckpt) {
                self.log(format!("{ckpt} exists, skipping training"));
                let bytes = std::fs::read(self.run.path(&ckpt))?;
                self.run.record_input(&ckpt, &bytes);
                continue;
            }
            let tc = self.config.train_config(s);
            let quiet = self.quiet;
            let name = tracker.label();
            let on_epoch = |e: &EpochStats| {
                if !quiet {
                    let dev = e.dev_loss.map(|d| format!(", dev loss {d:.4}")).unwrap_or_default();
                    eprintln!("{name} seed {s} epoch {}: train loss {:.4}{dev}", e.epoch, e.train_loss);
                }
            };
            let (bytes, report) = match tracker {
                Tracker::Ov => {
                    let cfg = OvConfig {
                        encoder: self.config.ov.clone(),
                        max_ngram: self.config.max_ngram,
                        threshold: self.config.threshold,
                    };
                    let mut model = OvModel::new(OvSpec::from_train(&train_set, cfg, s));
                    let train_ex = model.examples(&train_set);
                    let dev_ex = model.examples(&dev_set);
                    model.init_output_prior(&train_ex);
                    let report = train(&mut model, &train_ex, &dev_ex, &tc, on_epoch)?;
                    (model.to_bytes()?, report)
                }
                Tracker::Jst => {
                    let cfg = JstConfig {
                        encoder: self.config.jst.clone(),
                    };
                    let mut model = JstModel::new(JstSpec::from_train(&train_set, cfg, s));
                    let train_ex = model.examples(&train_set);
                    let dev_ex = model.examples(&dev_set);
                    model.init_output_prior(&train_set);
                    let report = train(&mut model, &train_ex, &dev_ex, &tc, on_epoch)?;
                    (model.to_bytes()?, report)
                }
            };
            self.run.write_once(&training_log_path(tracker, s), report.to_csv().as_bytes())?;
            self.run.write_once(&ckpt, &bytes)?;
            self.log(format!("{name} seed {s}: kept epoch {}", report.best_epoch));
        }
        self.run.finish(tracker.train_command(), &seeds)?;
        Ok(())
    }

    /// Runs both trackers of each seed over dev and the evaluation split.
    pub fn predict(&mut self, seed: Option<u64>) -> Result<()> {
        self.require_ingest()?;
        let seeds = self.seeds(seed)?;
        let splits = self.prediction_splits();
        for &s in &seeds {
            for tracker in [Tracker::Jst, Tracker::Ov] {
                let bytes = self.run.read_input(&checkpoint_path(tracker, s), tracker.train_command())?;
                let predict: Box<dyn Fn(&[Dialogue]) -> Predictions> = match tracker {
                    Tracker::Ov => {
                        let m = OvModel::from_bytes(&bytes)?;
                        Box::new(move |c| m.predict(c))
                    }
                    Tracker::Jst => {
                        let m = JstModel::from_bytes(&bytes)?;
                        Box::new(move |c| m.predict(c))
                    }
                };
                for &split in &splits {
                    let preds = predict(&self.split(split)?);
                    let system = format!("{}-{}", tracker.name(), seed_tag(s));
                    self.run.write_once(&predictions_path(&system, split), &prediction_bytes(&preds))?;
                }
            }
            self.log(format!("predicted seed {s}"));
        }
        self.run.finish("predict", &seeds)?;
        Ok(())
    }

    fn load_predictions(&mut self, system: &str, split: Split, producer: &str) -> Result<Predictions> {
        let rel = predictions_path(system, split);
        let bytes = self.run.read_input(&rel, producer)?;
        let records: Vec<PredictionRecord> = bytes
            .split(|&b| b == b'\n')
            .filter(|l| !l.iter().all(u8::is_ascii_whitespace))
            .map(serde_json::from_slice)
            .collect::<Result<_, _>>()
            .with_context(|| format!("malformed predictions in {rel}"))?;
        Ok(Predictions::from_records(records))
    }

    /// Learns the per-slot assignment on dev and writes stitched predictions.
    fn hybridize(&mut self, tag: &str, producer: &str) -> Result<HybridAssignment> {
        let dev = self.split(Split::Dev)?;
        let jst_dev = self.load_predictions(&format!("jst-{tag}"), Split::Dev, producer)?;
        let ov_dev = self.load_predictions(&format!("ov-{tag}"), Split::Dev, producer)?;
        let table = SlotAccuracyTable::compute(&jst_dev, &ov_dev, &dev)?;
        let assignment = select_methods(&table);
        self.run.write_once(&assignment_path(tag), &json_bytes(&assignment))?;
        for split in self.prediction_splits() {
            let j = self.load_predictions(&format!("jst-{tag}"), split, producer)?;
            let o = self.load_predictions(&format!("ov-{tag}"), split, producer)?;
            let h = combine(&j, &o, &assignment)?;
            self.run.write_once(&predictions_path(&format!("hyst-{tag}"), split), &prediction_bytes(&h))?;
        }
        self.log(format!(
            "{tag}: {} of {NUM_SLOTS} slots use the open-vocabulary tracker",
            assignment.ovst_slots().len()
        ));
        Ok(assignment)
    }

    pub fn select_hybrid(&mut self, seed: Option<u64>) -> Result<()> {
        self.require_ingest()?;
        let seeds = self.seeds(seed)?;
        for &s in &seeds {
            self.hybridize(&seed_tag(s), "predict")?;
        }
        self.run.finish("select-hybrid", &seeds)?;
        Ok(())
    }

    /// Votes each tracker over all seeds, then learns the hybrid assignment
    /// on the ensembled dev predictions.
    pub fn ensemble(&mut self) -> Result<()> {
        self.require_ingest()?;
        let seeds = self.config.seeds.clone();
        let dev = self.split(Split::Dev)?;
        for tracker in [Tracker::Jst, Tracker::Ov] {
            let mut dev_acc = Vec::new();
            for &s in &seeds {
                let p = self.load_predictions(&format!("{}-{}", tracker.name(), seed_tag(s)), Split::Dev, "predict")?;
                dev_acc.push(evaluate("", &p, &dev)?.overall_joint_accuracy);
            }
            for split in self.prediction_splits() {
                let preds = seeds
                    .iter()
                    .map(|&s| self.load_predictions(&format!("{}-{}", tracker.name(), seed_tag(s)), split, "predict"))
                    .collect::<Result<Vec<_>>>()?;
                let runs: Vec<Run> = preds
                    .iter()
                    .zip(&dev_acc)
                    .map(|(p, &a)| Run {
                        predictions: p,
                        dev_accuracy: a,
                    })
                    .collect();
                let voted = ensemble_vote(&runs)?;
                self.run.write_once(
                    &predictions_path(&format!("{}-ensemble", tracker.name()), split),
                    &prediction_bytes(&voted),
                )?;
            }
        }
        self.hybridize("ensemble", "ensemble")?;
        self.run.finish("ensemble", &seeds)?;
        Ok(())
    }

    /// Scores every system present in the run directory on the evaluation
    /// split and writes the report.
    pub fn evaluate_run(&mut self) -> Result<ReportBundle> {
        self.require_ingest()?;
        let split = self.config.split;
        let gold = self.split(split)?;
        let mut bundle = ReportBundle::new(split.as_str());
        bundle.systems.push(evaluate("majority (all none)", &Predictions::all_none(&gold), &gold)?);

        let mut tags: Vec<(String, String)> = self
            .config
            .seeds
            .iter()
            .map(|&s| (seed_tag(s), format!("seed {s}")))
            .collect();
        tags.push(("ensemble".to_string(), "ensemble".to_string()));
        let mut found = 0;
        for (tag, label) in &tags {
            for (system, name) in [("jst", "JST"), ("ov", "OV"), ("hyst", "HyST")] {
                let rel = predictions_path(&format!("{system}-{tag}"), split);
                if !self.run.exists(&rel) {
                    continue;
                }
                let p = self.load_predictions(&format!("{system}-{tag}"), split, "predict")?;
                bundle.systems.push(evaluate(&format!("{name} {label}"), &p, &gold)?);
                found += 1;
            }
        }
        if found == 0 {
            bail!("no predictions for the {split} split in {}; run `hyst predict` first", self.run.root().display());
        }
        for tag in ["ensemble".to_string(), seed_tag(self.config.seeds[0])] {
            if self.run.exists(&assignment_path(&tag)) {
                let bytes = self.run.read_input(&assignment_path(&tag), "select-hybrid")?;
                bundle.hybrid_assignment = Some(serde_json::from_slice(&bytes)?);
                break;
            }
        }
        if self.run.exists(&reachability_path(split)) {
            let bytes = self.run.read_input(&reachability_path(split), "candidates")?;
            bundle.reachability = Some(serde_json::from_slice(&bytes)?);
        }
        self.write_report(&report_dir(split), &bundle)?;
        self.run.finish("evaluate", &self.config.seeds.clone())?;
        Ok(bundle)
    }

    /// Scores external prediction files against the evaluation split.
    pub fn evaluate_files(&mut self, paths: &[std::path::PathBuf]) -> Result<ReportBundle> {
        let split = self.config.split;
        let gold = self.split(split)?;
        let mut bundle = ReportBundle::new(split.as_str());
        let mut key = String::new();
        for path in paths {
            let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            key.push_str(&sha256_hex(&bytes));
            let records: Vec<PredictionRecord> =
                read_jsonl(path).with_context(|| format!("malformed predictions in {}", path.display()))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            let preds = Predictions::from_records(records);
            bundle.systems.push(
                evaluate(&name, &preds, &gold).with_context(|| format!("cannot score {}", path.display()))?,
            );
        }
        let dir = format!("reports/{split}-files-{}", &sha256_hex(key.as_bytes())[..12]);
        self.write_report(&dir, &bundle)?;
        self.run.finish("evaluate", &[])?;
        Ok(bundle)
    }

    fn write_report(&mut self, dir: &str, bundle: &ReportBundle) -> Result<()> {
        self.run.write_once(&format!("{dir}/report.json"), bundle.to_json().as_bytes())?;
        self.run.write_once(&format!("{dir}/report.txt"), bundle.to_text().as_bytes())?;
        self.log(format!("report written to {}", self.run.path(dir).display()));
        Ok(())
    }

    /// Runs every stage in order and writes a summary combining the corpus
    /// statistics with the evaluation tables.
    pub fn reproduce(&mut self) -> Result<String> {
        self.ingest()?;
        let stats = self.stats()?;
        self.candidates()?;
        self.train(Tracker::Jst, None)?;
        self.train(Tracker::Ov, None)?;
        self.predict(None)?;
        self.select_hybrid(None)?;
        self.ensemble()?;
        let bundle = self.evaluate_run()?;
        let mut summary = stats;
        summary.push('\n');
        summary.push_str(&bundle.to_text());
        let rel = format!("{}/summary.txt", report_dir(self.config.split));
        self.run.write_once(&rel, summary.as_bytes())?;
        self.run.finish("reproduce", &self.config.seeds.clone())?;
        Ok(summary)
    }
}
