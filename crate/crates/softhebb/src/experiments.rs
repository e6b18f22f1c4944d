//! Experiment drivers. [`run`] executes one experiment for every configured
//! seed and writes everything under `<run.out>/<experiment>/`:
//!
//! ```text
//! config.toml          resolved config, reruns the batch
//! manifest.json        see manifest::RunManifest
//! summary.csv          metric, mean, std, n
//! seed-<s>/metrics.csv per-seed metrics
//! seed-<s>/...         checkpoints, CSVs, images, SVG plots
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use softhebb_core::adversarial::{
    generate_interpolations, pgd_attack, robustness_curve, MlpPipeline, Pipeline, SoftHebbOneLayer, SoftHebbTwoLayer,
};
use softhebb_core::dataset::{preprocess, BlankFramePolicy, LabeledDataset, NormalizedView};
use softhebb_core::eval::{
    assign_neuron_labels, evaluate_1layer, evaluate_readout, mlp_loss_trace, noise_robustness, non_increasing,
    pipeline_accuracy, posthoc_cross_entropy, train_softhebb, window_means, NeuronLabelMap, PosthocConfig,
    SoftHebbConfig,
};
use softhebb_core::layer::{BiasMode, LearningRateSchedule};
use softhebb_core::math::ActivationKind;
use softhebb_core::oracle::{self, MixtureSpec};
use softhebb_core::readout::{train_mlp, train_readout, LinearClassifier, Mlp2};
use softhebb_core::rng::{self, derive_seed};
use softhebb_core::WtaLayer;

use crate::checkpoint;
use crate::config::{Experiment, RunConfig, Target};
use crate::error::{Error, Result};
use crate::idx::{load_idx, sha256_file, Compression};
use crate::image::{export_image, tile, ImageFormat};
use crate::manifest::{self, InputDigest, RunManifest, SeedRecord, METRICS_FILE};
use crate::mixture;
use crate::plot;
use crate::tables::{self, MetricRow};

/// Seed streams for the parts of a run that are not the layer itself.
const READOUT_STREAM: u64 = u64::MAX;
const MLP_INIT_STREAM: u64 = 2;
const MLP_ORDER_STREAM: u64 = 3;
const ATTACK_STREAM: u64 = 4;
const NOISE_STREAM: u64 = 5;

/// Tolerance on the tenth-of-epoch test-loss means.
pub const TRACE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct Data {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub train_view: NormalizedView,
    pub test_view: NormalizedView,
    pub classes: usize,
}

impl Data {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let d = &cfg.data;
        let limit = |ds: LabeledDataset, n: usize| if n > 0 { ds.head(n) } else { ds };
        let train = limit(load_idx(&d.train_images, &d.train_labels, Compression::Detect)?, d.train_limit);
        let test = limit(load_idx(&d.test_images, &d.test_labels, Compression::Detect)?, d.test_limit);
        Self::from_datasets(train, test)
    }

    pub fn from_datasets(train: LabeledDataset, test: LabeledDataset) -> Result<Self> {
        if train.dim() != test.dim() {
            return Err(softhebb_core::Error::DimensionMismatch {
                expected: train.dim(),
                found: test.dim(),
            }
            .into());
        }
        let train_view = preprocess(&train, BlankFramePolicy::Skip)?;
        let test_view = preprocess(&test, BlankFramePolicy::Skip)?;
        let classes = train.classes().max(test.classes());
        Ok(Self {
            train,
            test,
            train_view,
            test_view,
            classes,
        })
    }
}

pub fn activation_name(a: ActivationKind) -> String {
    match a {
        ActivationKind::NaturalExp => "natural-exp".into(),
        ActivationKind::BaseExp(b) => format!("base-exp-{b}"),
        ActivationKind::TemperatureExp(t) => format!("temperature-exp-{t}"),
        ActivationKind::Relu => "relu".into(),
        ActivationKind::RectifiedPoly(p) => format!("rectified-poly-{p}"),
    }
}

struct SeedRun<'a> {
    cfg: &'a RunConfig,
    data: Option<&'a Data>,
    seed: u64,
    dir: PathBuf,
    rel: PathBuf,
    outputs: Vec<PathBuf>,
    metrics: Vec<MetricRow>,
}

impl<'a> SeedRun<'a> {
    /// Absolute path of a new output, recorded for the manifest.
    fn output(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.outputs.push(self.rel.join(name));
        Ok(path)
    }

    fn metric(&mut self, name: impl Into<String>, value: f64, n_samples: usize) {
        self.metrics.push(MetricRow {
            seed: self.seed,
            metric: name.into(),
            value,
            n_samples,
        });
    }

    fn data(&self) -> &'a Data {
        self.data.expect("dataset loaded for image experiments")
    }

    fn train_layer(&mut self, cfg: &SoftHebbConfig) -> Result<WtaLayer> {
        let view = &self.data().train_view;
        eprintln!("seed {}: training K = {} for {} epoch(s) on {} samples", self.seed, cfg.neurons, cfg.epochs, view.len());
        let (layer, record) = train_softhebb(cfg, view, self.seed, None)?;
        checkpoint::save_layer(&self.output("layer.shwl")?, &layer)?;
        let replay = self.output("replay.json")?;
        fs::write(&replay, serde_json::to_vec(&record)?).map_err(|e| Error::io(&replay, e))?;
        self.export_weights(&layer)?;
        Ok(layer)
    }

    fn layer(&mut self) -> Result<WtaLayer> {
        match &self.cfg.input_layer {
            Some(p) => checkpoint::load_layer(p),
            None => {
                let cfg = self.cfg.model.softhebb(self.data().train_view.len());
                self.train_layer(&cfg)
            }
        }
    }

    /// The first 100 weight rows as a tile grid, when inputs are images.
    fn export_weights(&mut self, layer: &WtaLayer) -> Result<()> {
        let (rows, cols) = (self.data().train.rows(), self.data().train.cols());
        if rows * cols != layer.inputs() || rows < 2 {
            return Ok(());
        }
        let shown: Vec<&[f64]> = (0..layer.neurons().min(100)).map(|k| layer.row(k)).collect();
        let (h, w, pixels) = tile(&shown, rows, cols, 10);
        export_image(&pixels, h, w, &self.output("weights.png")?, ImageFormat::Png)
    }

    fn labels(&mut self, layer: &WtaLayer) -> Result<NeuronLabelMap> {
        let map = assign_neuron_labels(layer, &self.data().train_view, self.data().classes)?;
        tables::write_label_map(&self.output("labels.csv")?, &map)?;
        Ok(map)
    }

    fn readout(&mut self, layer: &WtaLayer) -> Result<LinearClassifier> {
        if let Some(p) = &self.cfg.input_readout {
            return checkpoint::load_readout(p);
        }
        let d = self.data();
        let model = train_readout(layer, &d.train_view, d.classes, &self.cfg.readout, derive_seed(self.seed, READOUT_STREAM))?;
        checkpoint::save_readout(&self.output("readout.shrc")?, &model)?;
        Ok(model)
    }

    fn mlp(&mut self) -> Result<Mlp2> {
        if let Some(p) = &self.cfg.input_mlp {
            return checkpoint::load_mlp(p);
        }
        let mut train = self.data().train.clone();
        train.shuffle(derive_seed(self.seed, MLP_ORDER_STREAM));
        let model = train_mlp(&train, self.cfg.mlp_hidden, &self.cfg.mlp, derive_seed(self.seed, MLP_INIT_STREAM))?;
        checkpoint::save_mlp(&self.output("mlp.shml")?, &model)?;
        Ok(model)
    }

    fn pipeline(&mut self, target: Target) -> Result<Box<dyn Pipeline>> {
        Ok(match target {
            Target::Softhebb2Layer => {
                let wta = self.layer()?;
                let readout = self.readout(&wta)?;
                Box::new(SoftHebbTwoLayer { wta, readout })
            }
            Target::Softhebb1Layer => {
                let wta = self.layer()?;
                let labels = self.labels(&wta)?;
                Box::new(SoftHebbOneLayer { wta, labels })
            }
            Target::Mlp => Box::new(MlpPipeline { mlp: self.mlp()? }),
        })
    }

    fn one_layer_metrics(&mut self, layer: &WtaLayer) -> Result<()> {
        let labels = self.labels(layer)?;
        let n = self.data().test_view.len();
        let acc = evaluate_1layer(layer, &labels, &self.data().test_view)?;
        self.metric("valid_neurons", labels.valid_neurons() as f64, 0);
        self.metric("one_layer_accuracy", acc, n);
        Ok(())
    }

    fn run(&mut self, experiment: Experiment) -> Result<()> {
        match experiment {
            Experiment::TrainSofthebb => {
                let cfg = self.cfg.model.softhebb(self.data().train_view.len());
                let layer = self.train_layer(&cfg)?;
                self.one_layer_metrics(&layer)
            }
            Experiment::TrainHardwta => {
                let cfg = self.cfg.model.hard_wta(self.data().train_view.len());
                let layer = self.train_layer(&cfg)?;
                self.one_layer_metrics(&layer)
            }
            Experiment::LabelNeurons => {
                let layer = self.layer()?;
                self.one_layer_metrics(&layer)
            }
            Experiment::TrainMlp => {
                let mlp = self.mlp()?;
                let acc = pipeline_accuracy(&MlpPipeline { mlp }, &self.data().test);
                self.metric("mlp_accuracy", acc, self.data().test.len());
                Ok(())
            }
            Experiment::TrainReadout => {
                let layer = self.layer()?;
                let readout = self.readout(&layer)?;
                let acc = evaluate_readout(&layer, &readout, &self.data().test_view)?;
                self.metric("two_layer_accuracy", acc, self.data().test_view.len());
                Ok(())
            }
            Experiment::Eval => {
                let layer = self.layer()?;
                self.one_layer_metrics(&layer)?;
                let readout = self.readout(&layer)?;
                let acc = evaluate_readout(&layer, &readout, &self.data().test_view)?;
                self.metric("two_layer_accuracy", acc, self.data().test_view.len());
                if self.cfg.input_mlp.is_some() {
                    let mlp = self.mlp()?;
                    let acc = pipeline_accuracy(&MlpPipeline { mlp }, &self.data().test);
                    self.metric("mlp_accuracy", acc, self.data().test.len());
                }
                Ok(())
            }
            Experiment::PosthocXent => self.posthoc(),
            Experiment::Attack => self.attack(),
            Experiment::NoiseEval => {
                let p = self.pipeline(self.cfg.noise_target)?;
                let test = limited(&self.data().test, self.cfg.noise_samples);
                let points = noise_robustness(p.as_ref(), &test, &self.cfg.noise_sigmas, derive_seed(self.seed, NOISE_STREAM))?;
                tables::write_noise(&self.output("noise.csv")?, &points, self.seed)?;
                for pt in &points {
                    self.metric(format!("accuracy_sigma_{}", pt.sigma), pt.accuracy, pt.samples);
                }
                Ok(())
            }
            Experiment::Interpolate => self.interpolate(),
            Experiment::VerifyTheory => self.theory(),
        }
    }

    fn posthoc(&mut self) -> Result<()> {
        let d = self.data();
        let pc = PosthocConfig {
            softhebb: self.cfg.model.softhebb(d.train_view.len()),
            readout: self.cfg.readout,
            test_interval: self.cfg.test_interval,
        };
        eprintln!("seed {}: post-hoc cross-entropy, three phases", self.seed);
        let run = posthoc_cross_entropy(&pc, &d.train_view, &d.test_view, d.classes, self.seed)?;
        let test_len = d.test_view.len();
        let acc = evaluate_readout(&run.layer, &run.readout, &d.test_view)?;
        checkpoint::save_layer(&self.output("layer.shwl")?, &run.layer)?;
        checkpoint::save_readout(&self.output("readout.shrc")?, &run.readout)?;
        tables::write_loss_trace(&self.output("loss_trace.csv")?, &run.trace, self.seed)?;
        let tenths = window_means(&run.trace.test_loss, 10);
        self.metric("replay_verified", 1.0, 0);
        self.metric("test_loss_initial", run.trace.test_loss[0], test_len);
        self.metric("test_loss_final", *run.trace.test_loss.last().expect("initial point"), test_len);
        self.metric("test_loss_tenths_non_increasing", non_increasing(&tenths, TRACE_TOLERANCE) as u8 as f64, 0);
        self.metric("two_layer_accuracy", acc, test_len);
        if self.cfg.compare_mlp {
            let mut train = self.data().train.clone();
            train.shuffle(derive_seed(self.seed, MLP_ORDER_STREAM));
            let mut mlp = Mlp2::new(
                train.dim(),
                self.cfg.mlp_hidden,
                self.data().classes,
                &mut rng::seeded(derive_seed(self.seed, MLP_INIT_STREAM)),
            );
            let trace = mlp_loss_trace(
                &mut mlp,
                &train,
                &self.data().test,
                &self.cfg.mlp,
                derive_seed(self.seed, MLP_INIT_STREAM),
                self.cfg.test_interval,
            )?;
            tables::write_loss_trace(&self.output("mlp_loss_trace.csv")?, &trace, self.seed)?;
            let final_loss = *trace.test_loss.last().expect("initial point");
            self.metric("mlp_test_loss_final", final_loss, self.data().test.len());
        }
        Ok(())
    }

    fn attack(&mut self) -> Result<()> {
        let p = self.pipeline(self.cfg.attack.target)?;
        let test = limited(&self.data().test, self.cfg.attack.samples);
        let a = &self.cfg.attack;
        let seed = derive_seed(self.seed, ATTACK_STREAM);
        eprintln!("seed {}: PGD on {} samples at {} radii", self.seed, test.len(), a.epsilons.len());
        let curve = robustness_curve(p.as_ref(), &test, &a.epsilons, &a.pgd, seed)?;
        tables::write_robustness(&self.output("robustness.csv")?, &curve, self.seed)?;
        for pt in &curve {
            self.metric(format!("accuracy_eps_{:.4}", pt.epsilon), pt.accuracy, pt.samples);
        }
        // a few perturbed inputs per radius, same streams as the curve
        let (rows, cols) = (test.rows(), test.cols());
        for i in 0..a.images.min(test.len()) {
            for &eps in &a.epsilons {
                let res = pgd_attack(p.as_ref(), test.sample(i), test.label(i), &a.pgd.with_epsilon(eps), derive_seed(seed, i as u64))?;
                let name = format!("attack/sample-{i}-eps-{:.4}-pred-{}.png", eps, res.predicted_label);
                export_image(&res.perturbed, rows, cols, &self.output(&name)?, ImageFormat::Png)?;
            }
        }
        Ok(())
    }

    fn interpolate(&mut self) -> Result<()> {
        let p = self.pipeline(self.cfg.interpolate_target)?;
        let test = &self.data().test;
        let i = self.cfg.interpolate_sample;
        if i >= test.len() {
            return Err(Error::config("interpolate.sample", format!("index {i} outside a test set of {}", test.len())));
        }
        let (x, label, rows, cols) = (test.sample(i).to_vec(), test.label(i), test.rows(), test.cols());
        let grid = self.cfg.interpolate_epsilons.clone();
        let results = generate_interpolations(p.as_ref(), &x, label, &grid, &self.cfg.attack.pgd, derive_seed(self.seed, ATTACK_STREAM))?;
        let path = self.output("interpolation.csv")?;
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["epsilon", "label", "predicted_label", "loss_before", "loss_after", "seed"])?;
        for (eps, r) in grid.iter().zip(&results) {
            w.write_record([
                eps.to_string(),
                r.original_label.to_string(),
                r.predicted_label.to_string(),
                r.loss_before.to_string(),
                r.loss_after.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let frames: Vec<&[f64]> = results.iter().map(|r| r.perturbed.as_slice()).collect();
        let (h, wd, strip) = tile_raw(&frames, rows, cols);
        export_image(&strip, h, wd, &self.output("interpolation.png")?, ImageFormat::Png)?;
        let flip = grid.iter().zip(&results).find(|(_, r)| r.predicted_label != label);
        self.metric("flipped", flip.is_some() as u8 as f64, 1);
        if let Some((eps, _)) = flip {
            self.metric("first_flip_epsilon", *eps, 1);
        }
        if let Some(r) = results.last() {
            self.metric("loss_after_max_epsilon", r.loss_after, 1);
        }
        Ok(())
    }

    fn theory(&mut self) -> Result<()> {
        let t = &self.cfg.theory;
        let spec = match &t.spec {
            Some(p) => mixture::load(p)?,
            None => MixtureSpec::random(t.n, t.priors.clone(), t.concentration, t.min_angle_deg, t.spec_seed)?,
        };
        mixture::save(&self.output("spec.json")?, &spec)?;
        let path = self.output("theory.csv")?;
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["activation", "bias_mode", "matched", "max_angle_error", "max_prior_error", "max_norm_error", "seed"])?;
        for &(activation, bias_mode) in &t.activations {
            let mut cfg = oracle::theory_config(&spec, activation, bias_mode, t.samples);
            cfg.init = t.init;
            cfg.train.schedule = LearningRateSchedule::Linear {
                start: t.eta_start,
                end: 0.0,
                total_steps: t.samples as u64,
            };
            let name = activation_name(activation);
            eprintln!("seed {}: equilibrium run, {name}", self.seed);
            let bias = match bias_mode {
                BiasMode::AdditiveLog => "additive-log",
                BiasMode::MultiplicativePrior => "multiplicative",
                BiasMode::Disabled => "disabled",
            };
            match oracle::train_on_mixture(&spec, &cfg, t.samples, self.seed) {
                Ok((_, report)) => {
                    let cells = [report.max_centroid_angle_error, report.max_prior_abs_error, report.max_norm_error];
                    w.write_record([name.clone(), bias.into(), "1".into()].into_iter().chain(cells.iter().map(f64::to_string)).chain([self.seed.to_string()]))?;
                    self.metric(format!("{name}.matched"), 1.0, t.samples);
                    self.metric(format!("{name}.max_angle_error"), cells[0], t.samples);
                    self.metric(format!("{name}.max_prior_error"), cells[1], t.samples);
                    self.metric(format!("{name}.max_norm_error"), cells[2], t.samples);
                }
                // two neurons on one component is an outcome, not a failure
                Err(softhebb_core::Error::UnmatchedNeuron { .. }) => {
                    w.write_record([name.as_str(), bias, "0", "", "", "", &self.seed.to_string()])?;
                    self.metric(format!("{name}.matched"), 0.0, t.samples);
                }
                Err(e) => return Err(e.into()),
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }
}

fn limited(ds: &LabeledDataset, n: usize) -> LabeledDataset {
    if n > 0 && n < ds.len() {
        ds.head(n)
    } else {
        ds.clone()
    }
}

/// Images side by side without rescaling, separated by one black column.
fn tile_raw(images: &[&[f64]], rows: usize, cols: usize) -> (usize, usize, Vec<f64>) {
    let w = images.len() * (cols + 1);
    let mut out = vec![0.0; rows * w];
    for (i, img) in images.iter().enumerate() {
        for r in 0..rows {
            let dst = r * w + i * (cols + 1);
            out[dst..dst + cols].copy_from_slice(&img[r * cols..(r + 1) * cols]);
        }
    }
    (rows, w, out)
}

/// SVG plots for the plottable CSVs among `outputs` (relative to `run_dir`).
fn plot_outputs(run_dir: &Path, outputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut made = Vec::new();
    for rel in outputs {
        let name = rel.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let (title, x, ys): (&str, &str, &[&str]) = match name {
            "loss_trace.csv" => ("SoftHebb readout cross-entropy", "step", &["running_loss_smoothed", "test_loss"]),
            "mlp_loss_trace.csv" => ("MLP cross-entropy", "step", &["running_loss_smoothed", "test_loss"]),
            "robustness.csv" => ("PGD robustness", "epsilon", &["accuracy"]),
            "noise.csv" => ("Gaussian noise robustness", "sigma", &["accuracy"]),
            _ => continue,
        };
        let p = plot::plot_csv(&run_dir.join(rel), title, x, ys)?;
        let svg = rel.with_extension("svg");
        let abs = run_dir.join(&svg);
        fs::write(&abs, plot::render_svg(&p)?).map_err(|e| Error::io(&abs, e))?;
        made.push(svg);
    }
    Ok(made)
}

/// Renders every loss trace, robustness curve and noise curve a manifest
/// references. `run_dir` is the directory holding the manifest.
pub fn emit_plots(manifest: &RunManifest, run_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut all = Vec::new();
    for s in &manifest.seeds {
        all.extend(plot_outputs(run_dir, &s.outputs)?);
    }
    if all.is_empty() {
        return Err(Error::MissingSeries(format!("{} references no plottable CSV", manifest.experiment)));
    }
    Ok(all)
}

pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join(cfg.experiment.name())
}

/// Runs one experiment for every seed. A failing seed is recorded in the
/// manifest and does not stop the others; check
/// [`RunManifest::failed_seeds`].
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    let started = Instant::now();
    cfg.check_inputs_exist()?;
    let dir = run_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let config_file = PathBuf::from("config.toml");
    manifest::write_atomic(&dir.join(&config_file), cfg.map.to_toml().as_bytes())?;

    let mut inputs = Vec::new();
    for (key, path) in cfg.required_inputs() {
        inputs.push(InputDigest {
            key: key.to_string(),
            sha256: sha256_file(&path)?,
            path,
        });
    }
    let data = match cfg.experiment {
        Experiment::VerifyTheory => None,
        _ => Some(Data::load(cfg)?),
    };

    let mut seeds = Vec::new();
    for &seed in &cfg.seeds {
        let t0 = Instant::now();
        let rel = PathBuf::from(format!("seed-{seed}"));
        let mut s = SeedRun {
            cfg,
            data: data.as_ref(),
            seed,
            dir: dir.join(&rel),
            rel,
            outputs: Vec::new(),
            metrics: Vec::new(),
        };
        let outcome = fs::create_dir_all(&s.dir)
            .map_err(|e| Error::io(&s.dir, e))
            .and_then(|_| s.run(cfg.experiment))
            .and_then(|_| {
                let path = s.output(METRICS_FILE)?;
                tables::write_metrics(&path, &s.metrics)
            })
            .and_then(|_| plot_outputs(&dir, &s.outputs));
        let error = match outcome {
            Ok(svgs) => {
                s.outputs.extend(svgs);
                None
            }
            Err(e) => {
                eprintln!("seed {seed} failed: {e}");
                Some(e.to_string())
            }
        };
        // JSON has no NaN; non-finite values stay in metrics.csv only
        let metrics: BTreeMap<String, f64> =
            s.metrics.iter().filter(|m| m.value.is_finite()).map(|m| (m.metric.clone(), m.value)).collect();
        seeds.push(SeedRecord {
            seed,
            outputs: s.outputs,
            metrics,
            error,
            wall_clock_s: t0.elapsed().as_secs_f64(),
        });
    }

    let summary = manifest::summarize(&seeds);
    write_summary(&dir.join("summary.csv"), &summary)?;
    let m = RunManifest {
        experiment: cfg.experiment.name().to_string(),
        code_version: manifest::code_version(),
        config: manifest::config_entries(cfg.map.snapshot()),
        config_file,
        inputs,
        seeds,
        summary,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    m.save(&dir)?;
    Ok(m)
}

fn write_summary(path: &Path, summary: &BTreeMap<String, manifest::Summary>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "mean", "std", "n"])?;
    for (k, s) in summary {
        w.write_record([k.clone(), s.mean.to_string(), s.std.to_string(), s.n.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
