//! The seven pipeline commands. Each one reads the config and its input
//! files, writes everything under `workdir/<run stamp>/` and returns that
//! directory. Outputs depend only on the config, the inputs and the seed.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use ultrasynth_core::hpo::{evaluate_config, regularized_evolution, AuditRow, Field};
use ultrasynth_core::nn::{guided_gradcam, mask_coverage, CnnConfig, Samples, INPUT_SIDE};
use ultrasynth_core::noise::{
    decompose_bscan, fit_ascan_model, fit_invgauss, invgauss_pdf, make_dataset, noisy_clean_images,
    prepare_clean_volume, prepare_defect_volumes, AScanNoiseModel, DefectSource, DefectVolume,
    InvGaussParams, NoiseMethod, NoiseSource, RejectionPolicy, SynthOutcome,
};
use ultrasynth_core::phantom::{clean_volume, parametric_study};
use ultrasynth_core::sigproc::extract_cscans;
use ultrasynth_core::{CScanImage, Dataset, Label, Provenance, Rng, VolumeScan};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::PipelineConfig;
use crate::dataset_io::{load_dataset, save_dataset, write_json};
use crate::error::{self, Error, Result};
use crate::parallel::repeated_eval;
use crate::png_io::{bar_chart_png, histogram_png, triptych};
use crate::report::{bar_series, metrics_table, ExperimentReport, TrainEvalReport};
use crate::volume_io::{load_volume, save_volume};

/// Random stream ids under the config seed.
pub mod streams {
    pub const STUDY: u64 = 1;
    pub const ANALOG_DEFECT: u64 = 2;
    pub const ANALOG_CLEAN_TRAIN: u64 = 3;
    pub const ANALOG_CLEAN_TEST: u64 = 4;
    pub const SYNTH: u64 = 5;
    pub const HPO: u64 = 6;
    pub const EVAL: u64 = 7;
}

pub const COMMANDS: [&str; 7] = [
    "generate",
    "fit-noise",
    "synth",
    "hpo",
    "train-eval",
    "explain",
    "golden",
];

pub const NOISE_MODEL_FILE: &str = "noise-model.json";
pub const BEST_FILE: &str = "best.json";
const VOLUME_EXT: &str = "usv";

/// Written by `fit-noise`, read by `synth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelFile {
    pub format: String,
    pub ascan: Option<AScanNoiseModel>,
    pub invgauss: Option<InvGaussParams>,
    pub volumes: Vec<PathBuf>,
    pub clean_datasets: Vec<PathBuf>,
}

/// Written by `hpo`, read by `train-eval` through `eval.cnn_file`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestFile {
    pub config: CnnConfig,
    pub fitness: f64,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub stamp: String,
    pub seed: u64,
    pub outputs: Vec<String>,
}

struct Run {
    dir: PathBuf,
    record: RunRecord,
}

impl Run {
    fn start(cfg: &PipelineConfig, command: &str) -> Result<Self> {
        if !cfg.workdir.is_dir() {
            return Err(Error::Config(format!(
                "workdir {} does not exist or is not a directory",
                cfg.workdir.display()
            )));
        }
        let stamp = cfg.run_stamp(command);
        let dir = cfg.workdir.join(&stamp);
        error::create_dir(&dir)?;
        write_json(&dir.join("config.json"), cfg)?;
        Ok(Self {
            dir,
            record: RunRecord {
                command: command.into(),
                stamp,
                seed: cfg.seed,
                outputs: Vec::new(),
            },
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.record.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.record.outputs.sort();
        write_json(&self.dir.join("run.json"), &self.record)?;
        Ok(self.dir)
    }
}

pub fn run_command(command: &str, cfg: &PipelineConfig) -> Result<PathBuf> {
    match command {
        "generate" => generate(cfg),
        "fit-noise" => fit_noise(cfg),
        "synth" => synth(cfg),
        "hpo" => hpo(cfg),
        "train-eval" => train_eval(cfg),
        "explain" => explain(cfg),
        "golden" => golden(cfg),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

fn require_path(p: &Path, what: &str) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", p.display())))
    }
}

/// Gated, normalized defect volumes of the configured parametric study.
pub fn defect_volumes(cfg: &PipelineConfig) -> Result<Vec<DefectVolume>> {
    let p = &cfg.phantom;
    let study = parametric_study(
        &p.diameters_mm,
        &p.depths_mm,
        &p.pulse,
        &p.dims,
        &mut Rng::stream(cfg.seed, streams::STUDY),
    )?;
    Ok(prepare_defect_volumes(study, &p.dims.gate, p.defect_min_fraction)?)
}

fn defect_images(volumes: &[DefectVolume]) -> Result<Vec<CScanImage>> {
    let mut out = Vec::new();
    for dv in volumes {
        out.extend(dv.images()?);
    }
    Ok(out)
}

fn as_clean(images: Vec<CScanImage>) -> Vec<CScanImage> {
    images
        .into_iter()
        .map(|mut im| {
            im.label = Label::Clean;
            im
        })
        .collect()
}

fn outcome_lineage(o: &SynthOutcome) -> serde_json::Value {
    json!({
        "kept": o.kept,
        "rejected": o.rejected,
        "rejected_origins": o.rejected_origins,
    })
}

/// Phantom study, its C-scans, and the experimental analog: the same
/// defects and defect-free volumes with reference A-scan noise.
pub fn generate(cfg: &PipelineConfig) -> Result<PathBuf> {
    let mut run = Run::start(cfg, "generate")?;
    let p = &cfg.phantom;
    let gate = p.dims.gate;
    let dvs = defect_volumes(cfg)?;
    let base = json!({ "command": "generate", "phantom": p });

    let sim = Dataset::new(defect_images(&dvs)?, Provenance::Simulated, cfg.seed)?;
    let mut lineage = base.clone();
    lineage["stream"] = json!(streams::STUDY);
    save_dataset(&sim, &run.path("sim-defect"), lineage)?;

    let clean = prepare_clean_volume(&clean_volume(&p.pulse, &p.dims)?, &gate)?;
    let sim_clean = Dataset::new(
        as_clean(extract_cscans(&clean, &gate)?),
        Provenance::Simulated,
        cfg.seed,
    )?;
    save_dataset(&sim_clean, &run.path("sim-clean"), base.clone())?;

    if cfg.analog.enabled {
        let a = &cfg.analog;
        let model = AScanNoiseModel::reference(clean.n_time()).scaled(a.noise_scale);
        let policy = RejectionPolicy::with_margin(cfg.noise.rejection_margin)?;
        let mut outcome = make_dataset(
            DefectSource::Volumes(&dvs),
            &NoiseSource::AScan(model.clone()),
            &policy,
            &mut Rng::stream(cfg.seed, streams::ANALOG_DEFECT),
        )?;
        outcome.dataset.provenance = Provenance::ExperimentalAnalog;
        let mut lineage = base.clone();
        lineage["analog"] = json!(a);
        lineage["noise_model"] = json!({ "sigma_s": model.structural_dev_sigma, "sigma_r": model.random_sigma });
        lineage["synthesis"] = outcome_lineage(&outcome);
        save_dataset(&outcome.dataset, &run.path("exp-defect"), lineage)?;

        for (name, stream) in [
            ("exp-clean-train", streams::ANALOG_CLEAN_TRAIN),
            ("exp-clean-test", streams::ANALOG_CLEAN_TEST),
        ] {
            let noisy = noisy_clean_images(
                &clean,
                &gate,
                &model,
                a.clean_volumes,
                Some(a.windows_per_volume),
                &mut Rng::stream(cfg.seed, stream),
            )?;
            let ds = Dataset::new(noisy.images, Provenance::ExperimentalAnalog, cfg.seed)?;
            let mut lineage = base.clone();
            lineage["analog"] = json!(a);
            lineage["stream"] = json!(stream);
            save_dataset(&ds, &run.path(name), lineage)?;
            if stream == streams::ANALOG_CLEAN_TRAIN {
                let dir = run.path("noise-volumes");
                error::create_dir(&dir)?;
                for (i, v) in noisy.volumes.iter().enumerate() {
                    save_volume(v, &dir.join(format!("volume-{i:03}.{VOLUME_EXT}")))?;
                }
            }
        }
    }
    run.finish()
}

fn list_volumes(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == VOLUME_EXT))
        .collect();
    out.sort();
    Ok(out)
}

fn load_images(dirs: &[PathBuf]) -> Result<Vec<CScanImage>> {
    let mut out = Vec::new();
    for d in dirs {
        require_path(d, "dataset")?;
        out.extend(load_dataset(d)?.0.images);
    }
    Ok(out)
}

/// Fits the A-scan model to defect-free volumes and the inverse Gaussian
/// to the pixels of defect-free datasets.
pub fn fit_noise(cfg: &PipelineConfig) -> Result<PathBuf> {
    let n = &cfg.noise;
    if n.volumes.is_none() && n.clean_datasets.is_empty() {
        return Err(Error::Config(
            "fit-noise needs noise.volumes and/or noise.clean_datasets".into(),
        ));
    }
    let mut run = Run::start(cfg, "fit-noise")?;
    let mut file = NoiseModelFile {
        format: "ultrasynth-noise-model".into(),
        ascan: None,
        invgauss: None,
        volumes: Vec::new(),
        clean_datasets: n.clean_datasets.clone(),
    };
    if let Some(dir) = &n.volumes {
        require_path(dir, "volume directory")?;
        file.volumes = list_volumes(dir)?;
        let vols: Vec<VolumeScan> = file
            .volumes
            .iter()
            .map(|p| load_volume(p))
            .collect::<Result<_>>()?;
        let model = fit_ascan_model(&vols, n.savgol)?;
        let (_, residuals) = decompose_bscan(vols[0].bscan(0), vols[0].n_time())?;
        let sigma = model.random_sigma;
        let normal = move |x: f64| {
            let z = x / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let density: Option<&dyn Fn(f64) -> f64> = (sigma > 0.0).then_some(&normal as _);
        error::write(&run.path("ascan-residuals.png"), histogram_png(&residuals, 60, density)?)?;
        file.ascan = Some(model);
    }
    if !n.clean_datasets.is_empty() {
        let pixels: Vec<f64> = load_images(&n.clean_datasets)?
            .iter()
            .flat_map(|im| im.pixels.iter().map(|&p| p as f64))
            .collect();
        let params = fit_invgauss(&pixels)?;
        let pdf = move |x: f64| invgauss_pdf(x, &params);
        error::write(
            &run.path("invgauss-histogram.png"),
            histogram_png(&pixels, 60, Some(&pdf))?,
        )?;
        file.invgauss = Some(params);
    }
    write_json(&run.path(NOISE_MODEL_FILE), &file)?;
    run.finish()
}

fn zero_noise(like: &CScanImage) -> CScanImage {
    CScanImage::filled(like.width, like.height, 0.0, Label::Clean)
}

/// Adds the configured noise to the simulated defect images of the
/// configured study.
pub fn synth(cfg: &PipelineConfig) -> Result<PathBuf> {
    let n = &cfg.noise;
    let model_file: Option<NoiseModelFile> = match &n.model {
        Some(p) => {
            require_path(p, "noise model")?;
            Some(crate::dataset_io::read_json(p)?)
        }
        None => None,
    };
    let dvs = defect_volumes(cfg)?;
    let mut lineage = json!({
        "command": "synth",
        "method": n.method,
        "scale": n.scale,
        "rejection_margin": n.rejection_margin,
        "model_file": n.model,
        "phantom": cfg.phantom,
    });
    // Zero-amplitude image noise is applied as an all-zero image so the
    // method's parameters need not be valid at scale 0.
    let source = match n.method {
        NoiseMethod::AscanNoise => {
            let m = model_file
                .as_ref()
                .and_then(|f| f.ascan.clone())
                .ok_or_else(|| {
                    Error::Config("ascan-noise needs noise.model with a fitted A-scan model".into())
                })?;
            lineage["noise_model"] = json!({ "sigma_s": m.structural_dev_sigma, "sigma_r": m.random_sigma, "savgol": m.savgol });
            NoiseSource::AScan(m.scaled(n.scale))
        }
        NoiseMethod::CscanNoise => {
            let p = n
                .invgauss
                .or_else(|| model_file.as_ref().and_then(|f| f.invgauss))
                .ok_or_else(|| {
                    Error::Config("cscan-noise needs noise.invgauss or a model file with one".into())
                })?;
            lineage["noise_model"] = json!(p);
            if n.scale == 0.0 {
                NoiseSource::Real(Vec::new())
            } else {
                NoiseSource::CScan(p.scaled(n.scale))
            }
        }
        NoiseMethod::RealNoise => {
            if n.clean_datasets.is_empty() {
                return Err(Error::Config("real-noise needs noise.clean_datasets".into()));
            }
            let pool: Vec<CScanImage> = load_images(&n.clean_datasets)?
                .into_iter()
                .map(|mut im| {
                    for p in im.pixels.iter_mut() {
                        *p = (*p as f64 * n.scale) as f32;
                    }
                    im
                })
                .collect();
            lineage["clean_datasets"] = json!(n.clean_datasets);
            NoiseSource::Real(pool)
        }
    };
    let source = match source {
        NoiseSource::Real(pool) if pool.is_empty() => {
            let like = dvs
                .first()
                .map(|d| d.images())
                .transpose()?
                .and_then(|v| v.into_iter().next())
                .ok_or_else(|| Error::Data("study produced no defect images".into()))?;
            NoiseSource::Real(vec![zero_noise(&like)])
        }
        s => s,
    };
    let mut run = Run::start(cfg, "synth")?;
    let policy = RejectionPolicy::with_margin(n.rejection_margin)?;
    let mut outcome = make_dataset(
        DefectSource::Volumes(&dvs),
        &source,
        &policy,
        &mut Rng::stream(cfg.seed, streams::SYNTH),
    )?;
    outcome.dataset.provenance = n.method.provenance();
    lineage["synthesis"] = outcome_lineage(&outcome);
    let name = format!("synth-{}", n.method.provenance().as_str());
    save_dataset(&outcome.dataset, &run.path(&name), lineage)?;
    run.finish()
}

fn load_samples(dirs: &[PathBuf], what: &str) -> Result<Samples> {
    if dirs.is_empty() {
        return Err(Error::Config(format!("{what}: no datasets given")));
    }
    Ok(Samples::from_images(&load_images(dirs)?)?)
}

fn audit_csv(rows: &[AuditRow]) -> Result<Vec<u8>> {
    let to_err = |e: csv::Error| Error::Data(format!("audit csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index", "parent", "mutated"];
    header.extend(Field::ALL.iter().map(|f| f.name()));
    header.extend(["fitness", "best_so_far"]);
    w.write_record(&header).map_err(to_err)?;
    for r in rows {
        let mut rec = vec![
            r.index.to_string(),
            r.parent.map(|p| p.to_string()).unwrap_or_default(),
            r.mutated.map(|f| f.name().to_string()).unwrap_or_default(),
        ];
        rec.extend(Field::ALL.iter().map(|f| f.get(&r.config).to_string()));
        rec.extend([r.fitness.to_string(), r.best_so_far.to_string()]);
        w.write_record(&rec).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("audit csv: {e}")))
}

/// Regularized evolution over CNN hyperparameters; fitness is the mean F1
/// over stratified splits of the configured data.
pub fn hpo(cfg: &PipelineConfig) -> Result<PathBuf> {
    let h = &cfg.hpo;
    let data = load_samples(&h.data, "hpo.data")?;
    if !data.has_both_classes() {
        return Err(Error::Data("hpo data must contain both classes".into()));
    }
    h.space.validate().map_err(|e| Error::Config(e.to_string()))?;
    h.params().validate().map_err(|e| Error::Config(e.to_string()))?;
    let mut run = Run::start(cfg, "hpo")?;
    let k = h.k_splits;
    let result = regularized_evolution(
        &h.space,
        |c, r| evaluate_config(c, &data, k, r).map_or(0.0, |f| f.value),
        h.params(),
        &mut Rng::stream(cfg.seed, streams::HPO),
    )?;
    let best = BestFile {
        config: result.best.config,
        fitness: result.best.fitness,
        index: result.best.age,
    };
    write_json(&run.path(BEST_FILE), &best)?;
    error::write(&run.path("audit.csv"), audit_csv(&result.history)?)?;
    write_json(
        &run.path("summary.json"),
        &json!({
            "params": h.params(),
            "k_splits": k,
            "space": h.space,
            "n_evaluations": result.history.len(),
            "best": best,
            "population": result.population,
        }),
    )?;
    run.finish()
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Repeated training from fresh initializations for each experiment,
/// scored on the shared test set.
pub fn train_eval(cfg: &PipelineConfig) -> Result<PathBuf> {
    let e = &cfg.eval;
    if e.experiments.is_empty() {
        return Err(Error::Config("eval.experiments is empty".into()));
    }
    let cnn = match &e.cnn_file {
        Some(p) => {
            require_path(p, "cnn file")?;
            let b: BestFile = crate::dataset_io::read_json(p)?;
            b.config
        }
        None => cfg.cnn,
    };
    cnn.validate_trainable(INPUT_SIDE)
        .map_err(|err| Error::Config(err.to_string()))?;
    let test = load_samples(&e.test, "eval.test")?;
    let mut trains = Vec::with_capacity(e.experiments.len());
    for x in &e.experiments {
        trains.push(load_samples(&x.train, &format!("experiment {}", x.name))?);
    }
    let mut run = Run::start(cfg, "train-eval")?;
    let mut rng = Rng::stream(cfg.seed, streams::EVAL);
    let mut reports = Vec::with_capacity(trains.len());
    for (x, train) in e.experiments.iter().zip(&trains) {
        let out = repeated_eval(train, &test, &cnn, e.n_runs, &mut rng)?;
        save_checkpoint(
            &out.first_model,
            out.first_seed,
            &run.path(&format!("model-{}.ckpt", file_safe(&x.name))),
        )?;
        reports.push(ExperimentReport {
            name: x.name.clone(),
            train: x.train.clone(),
            n_train: train.len(),
            report: out.report,
        });
    }
    let report = TrainEvalReport {
        format: "ultrasynth-eval".into(),
        seed: cfg.seed,
        cnn,
        n_runs: e.n_runs,
        test: e.test.clone(),
        n_test: test.len(),
        experiments: reports,
    };
    write_json(&run.path("report.json"), &report)?;
    error::write(&run.path("table.txt"), metrics_table(&report.experiments))?;
    error::write(&run.path("metrics.png"), bar_chart_png(&bar_series(&report.experiments))?)?;
    run.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub index: usize,
    pub label: Label,
    pub probability: f64,
    /// Heatmap mass inside the defect mask; absent without a mask.
    pub mask_coverage: Option<f64>,
}

/// Grad-CAM triptychs (input, heatmap, guided Grad-CAM over input) for
/// every image of a dataset.
pub fn explain(cfg: &PipelineConfig) -> Result<PathBuf> {
    let x = &cfg.explain;
    let ckpt = x
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("explain.checkpoint is required".into()))?;
    let ds_dir = x
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("explain.dataset is required".into()))?;
    require_path(ckpt, "checkpoint")?;
    require_path(ds_dir, "dataset")?;
    let (model, _) = load_checkpoint(ckpt)?;
    let (ds, _) = load_dataset(ds_dir)?;
    let n = x.max_images.map_or(ds.len(), |m| m.min(ds.len()));
    let images = &ds.images[..n];
    if let Some(im) = images.iter().find(|im| im.width != model.input_side() || im.height != model.input_side()) {
        return Err(Error::Data(format!(
            "image is {}x{}, model expects {}x{}",
            im.width,
            im.height,
            model.input_side(),
            model.input_side()
        )));
    }
    let mut run = Run::start(cfg, "explain")?;
    let results: Vec<(Vec<u8>, Coverage)> = images
        .par_iter()
        .enumerate()
        .map(|(i, im)| {
            let input = im.to_f64();
            let ex = guided_gradcam(&model, &input)?;
            let png = triptych(ex.side, [&input, &ex.heatmap, &ex.mixed])?;
            let cov = Coverage {
                index: i,
                label: im.label,
                probability: model.predict(&input)?,
                mask_coverage: im.defect_mask.as_ref().map(|m| mask_coverage(&ex.heatmap, m)),
            };
            Ok((png, cov))
        })
        .collect::<Result<_>>()?;
    let mut coverage = Vec::with_capacity(results.len());
    for (i, (png, cov)) in results.into_iter().enumerate() {
        error::write(&run.path(&format!("explain-{i:04}.png")), png)?;
        coverage.push(cov);
    }
    let masked: Vec<f64> = coverage.iter().filter_map(|c| c.mask_coverage).collect();
    let mean = (!masked.is_empty()).then(|| masked.iter().sum::<f64>() / masked.len() as f64);
    write_json(
        &run.path("coverage.json"),
        &json!({ "images": coverage, "mean_mask_coverage": mean }),
    )?;
    run.finish()
}

/// Golden loss vectors for other implementations of the GAN losses.
pub fn golden(cfg: &PipelineConfig) -> Result<PathBuf> {
    let mut run = Run::start(cfg, "golden")?;
    crate::golden::emit_golden_vectors(&run.path("golden.json"), cfg.golden.n_random, cfg.seed)?;
    run.finish()
}
