//! Experiment commands. Every command is a pure function of its
//! [`RunConfig`]: reruns write byte-identical CSV files.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{DataSplit, RunConfig};
use crate::corruption::{recovery_weight, CorruptionSpec, Corruptor};
use crate::data::{contact_sheet, read_fdnf, save_fdds, write_fdnf, write_pgm, Dataset};
use crate::denoiser::{init_model, train, Denoiser, TrainConfig};
use crate::diffusion::FrequencyDiffusion;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Classifier, ClassifierArch, Extractor, FeatureExtractor, MetricReport};
use crate::spectral::{band_power, item_rng, radial_power_spectrum, Band, FrequencyGrid, SpectralWeight, TwoBand};

/// Version of the CSV column layout below.
pub const RESULTS_SCHEMA: u32 = 1;

/// One results CSV row: a single run, or the aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema: u32,
    pub row_kind: String,
    pub run_id: String,
    pub gamma_l: Option<f64>,
    pub a_c: Option<f64>,
    pub b_c: Option<f64>,
    pub model: String,
    pub seed: Option<u64>,
    pub n: usize,
    pub fid: Option<f64>,
    pub fid_se: Option<f64>,
    pub fid_sd: Option<f64>,
    pub kid: Option<f64>,
    pub kid_se: Option<f64>,
    pub kid_sd: Option<f64>,
    pub spectral_fid: Option<f64>,
    pub spectral_fid_se: Option<f64>,
    pub spectral_fid_sd: Option<f64>,
    pub band_power: Option<f64>,
    pub clean_band_power: Option<f64>,
    pub status: String,
}

impl ResultRow {
    fn run(run_id: String, model: &str, seed: u64) -> Self {
        Self {
            schema: RESULTS_SCHEMA,
            row_kind: "run".into(),
            run_id,
            gamma_l: None,
            a_c: None,
            b_c: None,
            model: model.into(),
            seed: Some(seed),
            n: 1,
            fid: None,
            fid_se: None,
            fid_sd: None,
            kid: None,
            kid_se: None,
            kid_sd: None,
            spectral_fid: None,
            spectral_fid_se: None,
            spectral_fid_sd: None,
            band_power: None,
            clean_band_power: None,
            status: "ok".into(),
        }
    }

    fn with_report(mut self, r: &MetricReport) -> Self {
        self.fid = Some(r.fid);
        self.kid = Some(r.kid);
        self.kid_se = Some(r.kid_stderr);
        self.spectral_fid = Some(r.spectral_fid);
        self
    }

    fn failed(mut self, e: &Error) -> Self {
        self.status = format!("error: {e}");
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Mean, standard error and standard deviation.
fn summarize(values: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None, None);
    }
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (Some(mean), Some(sd / n.sqrt()), Some(sd))
}

/// Aggregate row over the successful rows of one group.
fn aggregate(run_id: String, template: &ResultRow, rows: &[&ResultRow]) -> ResultRow {
    let ok: Vec<&&ResultRow> = rows.iter().filter(|r| r.is_ok()).collect();
    let col = |f: fn(&ResultRow) -> Option<f64>| summarize(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    let (fid, fid_se, fid_sd) = col(|r| r.fid);
    let (kid, kid_se, kid_sd) = col(|r| r.kid);
    let (sf, sf_se, sf_sd) = col(|r| r.spectral_fid);
    ResultRow {
        row_kind: "aggregate".into(),
        run_id,
        seed: None,
        n: ok.len(),
        fid,
        fid_se,
        fid_sd,
        kid,
        kid_se,
        kid_sd,
        spectral_fid: sf,
        spectral_fid_se: sf_se,
        spectral_fid_sd: sf_sd,
        band_power: col(|r| r.band_power).0,
        clean_band_power: col(|r| r.clean_band_power).0,
        status: if ok.len() == rows.len() {
            "ok".into()
        } else {
            format!("{} of {} runs failed", rows.len() - ok.len(), rows.len())
        },
        ..template.clone()
    }
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SpectrumRow {
    t: usize,
    bin: usize,
    center: f64,
    power: f64,
    count: usize,
}

/// Loaded data, grid and resolved paths shared by the commands.
pub struct Experiment {
    pub config: RunConfig,
    pub data: DataSplit,
    pub grid: FrequencyGrid,
}

fn sample_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x5A3B_0000_0000)
}

impl Experiment {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let data = config.dataset.load(&config.base_dir)?;
        let grid = FrequencyGrid::new(data.train.height(), data.train.width())?;
        Ok(Self { config, data, grid })
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out_dir
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(self.out_dir())?;
        fs::write(self.out_dir().join("config.toml"), self.config.to_toml()?)?;
        Ok(())
    }

    fn path(&self, name: impl AsRef<str>) -> PathBuf {
        self.out_dir().join(name.as_ref())
    }

    pub fn diffusion(&self, weight: SpectralWeight) -> Result<FrequencyDiffusion> {
        Ok(FrequencyDiffusion::new(self.config.schedule.build()?, weight, &self.grid)?
            .with_reverse_noise(self.config.reverse_noise))
    }

    /// Train a fresh model on `images` with initialization and minibatch
    /// draws keyed by `seed`.
    pub fn train_model(&self, images: &[Vec<f64>], weight: SpectralWeight, seed: u64) -> Result<(Denoiser, Vec<f64>)> {
        let arch = self.config.arch.at(self.grid.height(), self.grid.width());
        let model = init_model(&arch, &mut item_rng(seed, 0))?;
        let cfg = TrainConfig {
            seed,
            ..self.config.train.clone()
        };
        train(model, images, &self.diffusion(weight)?, &cfg)
    }

    pub fn generate(&self, model: &Denoiser, weight: SpectralWeight, seed: u64) -> Result<Vec<Vec<f64>>> {
        let s = &self.config.sample;
        self.diffusion(weight)?.sample(model, s.count, sample_seed(seed), s.stride)
    }

    /// The configured feature extractor. A missing classifier checkpoint is
    /// trained on the labelled training split and saved first.
    pub fn extractor(&self) -> Result<Extractor> {
        let pixels = self.grid.len();
        match &self.config.eval.extractor {
            FeatureExtractor::TrainedClassifier { checkpoint } => {
                let path = if checkpoint.is_absolute() {
                    checkpoint.clone()
                } else {
                    self.out_dir().join(checkpoint)
                };
                if !path.exists() {
                    let labels = self.data.train.labels().ok_or_else(|| {
                        Error::Config("trained_classifier extractor needs a labelled dataset".into())
                    })?;
                    let classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
                    let arch = ClassifierArch::small(self.grid.height(), self.grid.width(), classes);
                    let cfg = TrainConfig {
                        epochs: 3,
                        batch_size: 32,
                        learning_rate: 2e-3,
                        ..TrainConfig::default()
                    };
                    let (clf, _) = Classifier::train(&arch, &self.data.train, &cfg)?;
                    if let Some(dir) = path.parent() {
                        fs::create_dir_all(dir)?;
                    }
                    clf.save(&path)?;
                }
                FeatureExtractor::TrainedClassifier { checkpoint: path }.build(pixels)
            }
            other => other.build(pixels),
        }
    }

    fn reference(&self) -> Result<Vec<Vec<f64>>> {
        if self.data.reference.len() < 2 {
            return Err(Error::Config("evaluation needs dataset.n_reference >= 2".into()));
        }
        Ok(self.data.reference.to_f64())
    }

    pub fn evaluate(&self, extractor: &Extractor, generated: &[Vec<f64>], seed: u64) -> Result<MetricReport> {
        let mut options = self.config.eval.options.clone();
        options.seed = options.seed.wrapping_add(seed);
        evaluate(&self.reference()?, generated, extractor, &self.grid, &options)
    }

    pub fn cmd_train(&self) -> Result<()> {
        self.prepare_out()?;
        let images = self.data.train.to_f64();
        for &seed in &self.config.seeds {
            let (model, losses) = self.train_model(&images, self.config.weight, seed)?;
            model.save(self.path(format!("checkpoint_s{seed}.fdck")))?;
            let rows: Vec<LossRow> = losses
                .iter()
                .enumerate()
                .map(|(e, &loss)| LossRow { epoch: e + 1, loss })
                .collect();
            write_csv(self.path(format!("loss_s{seed}.csv")), &rows)?;
        }
        Ok(())
    }

    pub fn cmd_sample(&self) -> Result<()> {
        self.prepare_out()?;
        let arch = self.config.arch.at(self.grid.height(), self.grid.width());
        for &seed in &self.config.seeds {
            let model = Denoiser::load_expecting(self.path(format!("checkpoint_s{seed}.fdck")), &arch)?;
            let samples = self.generate(&model, self.config.weight, seed)?;
            self.write_samples(&format!("samples_s{seed}"), &samples)?;
        }
        Ok(())
    }

    fn write_samples(&self, stem: &str, samples: &[Vec<f64>]) -> Result<()> {
        let (h, w) = (self.grid.height(), self.grid.width());
        let fields: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
        let mut f = BufWriter::new(File::create(self.path(format!("{stem}.fdnf")))?);
        write_fdnf(&mut f, h, w, &fields)?;
        f.flush()?;
        let shown = &samples[..samples.len().min(64)];
        let (sh, sw, px) = contact_sheet(shown, h, w, 8, 1)?;
        let mut f = BufWriter::new(File::create(self.path(format!("{stem}.pgm")))?);
        write_pgm(&mut f, sh, sw, &px)?;
        f.flush()?;
        Ok(())
    }

    fn read_samples(&self, seed: u64) -> Result<Vec<Vec<f64>>> {
        let path = self.path(format!("samples_s{seed}.fdnf"));
        let (h, w, fields) = read_fdnf(&mut std::io::BufReader::new(File::open(&path)?))?;
        if (h, w) != (self.grid.height(), self.grid.width()) {
            return Err(Error::Format(format!("{}: {h}x{w} samples do not match the dataset", path.display())));
        }
        Ok(fields
            .into_iter()
            .map(|f| f.into_iter().map(f64::from).collect())
            .collect())
    }

    /// Evaluate stored samples; appends one record per seed to
    /// `results.toml` and writes `metrics.csv`.
    pub fn cmd_eval(&self) -> Result<Vec<ResultRow>> {
        self.prepare_out()?;
        let extractor = self.extractor()?;
        let mut rows = Vec::new();
        let mut records = String::new();
        for &seed in &self.config.seeds {
            let report = self.evaluate(&extractor, &self.read_samples(seed)?, seed)?;
            records.push_str(&report.to_record()?);
            records.push('\n');
            rows.push(ResultRow::run(format!("{}/s{seed}", self.config.name), self.config.weight.name(), seed).with_report(&report));
        }
        let template = rows[0].clone();
        let refs: Vec<&ResultRow> = rows.iter().collect();
        rows.push(aggregate(self.config.name.clone(), &template, &refs));
        write_csv(self.path("metrics.csv"), &rows)?;
        let mut f = OpenOptions::new().create(true).append(true).open(self.path("results.toml"))?;
        f.write_all(records.as_bytes())?;
        Ok(rows)
    }

    fn sweep_entry(&self, extractor: &Extractor, images: &[Vec<f64>], gamma_l: f64, seed: u64) -> Result<MetricReport> {
        let weight = SpectralWeight::TwoBand(TwoBand::standard_split(gamma_l));
        let (model, _) = self.train_model(images, weight, seed)?;
        let samples = self.generate(&model, weight, seed)?;
        self.evaluate(extractor, &samples, seed)
    }

    /// One model per `(gamma_l, seed)` with the standard split at radius 0.5,
    /// plus one aggregate row per `gamma_l`. Writes `sweep_gamma.csv`.
    pub fn cmd_sweep_gamma(&self) -> Result<Vec<ResultRow>> {
        self.prepare_out()?;
        let extractor = self.extractor()?;
        let images = self.data.train.to_f64();
        let mut rows = Vec::new();
        for &g in &self.config.sweep.gammas {
            let mut group = Vec::new();
            for &seed in &self.config.seeds {
                let mut row = ResultRow::run(format!("{}/g{g:.2}/s{seed}", self.config.name), "two_band", seed);
                row.gamma_l = Some(g);
                row = match self.sweep_entry(&extractor, &images, g, seed) {
                    Ok(r) => row.with_report(&r),
                    Err(e) => row.failed(&e),
                };
                group.push(row);
            }
            let refs: Vec<&ResultRow> = group.iter().collect();
            let agg = aggregate(format!("{}/g{g:.2}", self.config.name), &group[0], &refs);
            rows.extend(group);
            rows.push(agg);
        }
        write_csv(self.path("sweep_gamma.csv"), &rows)?;
        Ok(rows)
    }

    fn recover_entry(
        &self,
        extractor: &Extractor,
        corrupted: &[Vec<f64>],
        weight: SpectralWeight,
        spec: &CorruptionSpec,
        seed: u64,
    ) -> Result<(MetricReport, f64)> {
        let (model, _) = self.train_model(corrupted, weight, seed)?;
        let samples = self.generate(&model, weight, seed)?;
        let report = self.evaluate(extractor, &samples, seed)?;
        let mask = Band::closed(spec.a_c, spec.b_c).mask(&self.grid);
        let power = band_power(samples.iter().map(Vec::as_slice), &self.grid, &mask)?;
        Ok((report, power))
    }

    /// For every corruption spec and seed: corrupt the training split, train
    /// a Flat baseline and a recovery-weight model, and score both against
    /// the clean reference split. Writes `corrupt_recover.csv`.
    pub fn cmd_corrupt_recover(&self) -> Result<Vec<ResultRow>> {
        self.prepare_out()?;
        let extractor = self.extractor()?;
        let reference = self.reference()?;
        let rc = &self.config.recover;
        let mut rows = Vec::new();
        for spec in &rc.grid {
            let mask = Band::closed(spec.a_c, spec.b_c).mask(&self.grid);
            let clean_power = band_power(reference.iter().map(Vec::as_slice), &self.grid, &mask)?;
            let tag = format!("{}/c{:.2}-{:.2}", self.config.name, spec.a_c, spec.b_c);
            let models = [
                ("baseline", Ok(SpectralWeight::Flat)),
                ("frequency", recovery_weight(spec, rc.gamma_l, rc.gamma_h)),
            ];
            let mut groups: Vec<Vec<ResultRow>> = vec![Vec::new(), Vec::new()];
            for &seed in &self.config.seeds {
                let corrupted = corrupted_dataset(&self.data.train, spec, seed).and_then(|d| {
                    save_fdds(self.path(format!("corrupted_s{seed}_c{:.2}-{:.2}.fdds", spec.a_c, spec.b_c)), &d)?;
                    Ok(d.to_f64())
                });
                for (k, (name, weight)) in models.iter().enumerate() {
                    let mut row = ResultRow::run(format!("{tag}/{name}/s{seed}"), name, seed);
                    row.a_c = Some(spec.a_c);
                    row.b_c = Some(spec.b_c);
                    row.clean_band_power = Some(clean_power);
                    let outcome = match (&corrupted, weight) {
                        (Ok(data), Ok(w)) => self.recover_entry(&extractor, data, *w, spec, seed),
                        (Err(e), _) | (_, Err(e)) => Err(Error::Config(e.to_string())),
                    };
                    row = match outcome {
                        Ok((report, power)) => {
                            let mut r = row.with_report(&report);
                            r.band_power = Some(power);
                            r
                        }
                        Err(e) => row.failed(&e),
                    };
                    groups[k].push(row);
                }
            }
            for (k, (name, _)) in models.iter().enumerate() {
                let refs: Vec<&ResultRow> = groups[k].iter().collect();
                let agg = aggregate(format!("{tag}/{name}"), &groups[k][0], &refs);
                rows.append(&mut groups[k]);
                rows.push(agg);
            }
        }
        write_csv(self.path("corrupt_recover.csv"), &rows)?;
        Ok(rows)
    }

    /// Radial power spectra of the training split under the forward marginal
    /// at each configured step index; `t = 0` is the clean data itself.
    /// Writes `spectrum.csv`.
    pub fn cmd_spectrum(&self) -> Result<Vec<(usize, Vec<f64>)>> {
        self.prepare_out()?;
        let spec = &self.config.spectrum;
        let diffusion = self.diffusion(self.config.weight)?;
        let steps = diffusion.schedule().steps();
        let images = self.data.train.take(spec.count.max(1))?.to_f64();
        let mut rows = Vec::new();
        let mut out = Vec::new();
        for &t in &spec.timesteps {
            if t >= steps {
                return Err(Error::InvalidStep { t, steps });
            }
            let noised: Vec<Vec<f64>> = if t == 0 {
                images.clone()
            } else {
                images
                    .iter()
                    .enumerate()
                    .map(|(i, x)| Ok(diffusion.forward_jump(x, t, &mut item_rng(t as u64, i as u64))?.x_t))
                    .collect::<Result<_>>()?
            };
            let bins = radial_power_spectrum(noised.iter().map(Vec::as_slice), &self.grid, spec.n_bins)?;
            for (k, b) in bins.iter().enumerate() {
                rows.push(SpectrumRow {
                    t,
                    bin: k,
                    center: b.center,
                    power: b.power,
                    count: b.count,
                });
            }
            out.push((t, bins.iter().map(|b| b.power).collect()));
        }
        write_csv(self.path("spectrum.csv"), &rows)?;
        Ok(out)
    }
}

/// Training split after corruption. Values are not clipped back into
/// `[-1, 1]`; the metadata records this.
pub fn corrupted_dataset(data: &Dataset, spec: &CorruptionSpec, seed: u64) -> Result<Dataset> {
    let grid = FrequencyGrid::new(data.height(), data.width())?;
    let images = Corruptor::new(*spec, &grid)?.corrupt_all(&data.to_f64(), seed)?;
    let meta = data
        .meta()
        .clone()
        .with_param("corruption", format!("gamma_c={} band=[{}, {}]", spec.gamma_c, spec.a_c, spec.b_c))
        .with_param("clipped", "false");
    Dataset::from_f64(meta, data.height(), data.width(), &images)
}
