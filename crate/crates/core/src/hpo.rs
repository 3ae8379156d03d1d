//! Regularized evolution over CNN hyperparameters.
//!
//! A population of `P` random configurations is evaluated. Each iteration
//! samples `S` members without replacement, mutates a single field of the
//! fittest one, evaluates the child, appends it and drops the oldest member.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::metrics::{f1, ConfusionMatrix};
use crate::nn::{self, CnnConfig, Samples, BATCH_SIZES};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    NFcLayers,
    NConvLayers,
    ChannelRatio,
    BatchSize,
    EarlyStop,
    LearningRate,
    Momentum,
    Epochs,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::NFcLayers,
        Field::NConvLayers,
        Field::ChannelRatio,
        Field::BatchSize,
        Field::EarlyStop,
        Field::LearningRate,
        Field::Momentum,
        Field::Epochs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::NFcLayers => "n_fc_layers",
            Field::NConvLayers => "n_conv_layers",
            Field::ChannelRatio => "channel_ratio",
            Field::BatchSize => "batch_size",
            Field::EarlyStop => "early_stop",
            Field::LearningRate => "learning_rate",
            Field::Momentum => "momentum",
            Field::Epochs => "epochs",
        }
    }

    pub fn get(self, c: &CnnConfig) -> f64 {
        match self {
            Field::NFcLayers => c.n_fc_layers as f64,
            Field::NConvLayers => c.n_conv_layers as f64,
            Field::ChannelRatio => c.channel_ratio as f64,
            Field::BatchSize => c.batch_size as f64,
            Field::EarlyStop => c.early_stop as f64,
            Field::LearningRate => c.learning_rate,
            Field::Momentum => c.momentum,
            Field::Epochs => c.epochs as f64,
        }
    }

    pub fn set(self, c: &mut CnnConfig, v: f64) {
        match self {
            Field::NFcLayers => c.n_fc_layers = v as u32,
            Field::NConvLayers => c.n_conv_layers = v as u32,
            Field::ChannelRatio => c.channel_ratio = v as u32,
            Field::BatchSize => c.batch_size = v as u32,
            Field::EarlyStop => c.early_stop = v as u32,
            Field::LearningRate => c.learning_rate = v,
            Field::Momentum => c.momentum = v,
            Field::Epochs => c.epochs = v as u32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    IntRange { lo: i64, hi: i64 },
    Categorical { values: Vec<f64> },
    Continuous { lo: f64, hi: f64, log: bool },
}

impl Domain {
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Domain::IntRange { lo, hi } => (lo + rng.below((hi - lo + 1) as usize) as i64) as f64,
            Domain::Categorical { values } => values[rng.below(values.len())],
            Domain::Continuous { lo, hi, log: false } => rng.uniform_in(*lo, *hi),
            Domain::Continuous { lo, hi, log: true } => {
                libm::pow(10.0, rng.uniform_in(libm::log10(*lo), libm::log10(*hi)))
            }
        }
    }

    fn cardinality_above_one(&self) -> bool {
        match self {
            Domain::IntRange { lo, hi } => hi > lo,
            Domain::Categorical { values } => values.len() > 1,
            Domain::Continuous { lo, hi, .. } => hi > lo,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub domains: Vec<(Field, Domain)>,
}

impl SearchSpace {
    /// The HPO ranges used for the classifier.
    pub fn paper() -> Self {
        let int = |lo, hi| Domain::IntRange { lo, hi };
        Self {
            domains: alloc::vec![
                (Field::NFcLayers, int(1, 6)),
                (Field::NConvLayers, int(1, 6)),
                (Field::ChannelRatio, int(1, 3)),
                (
                    Field::BatchSize,
                    Domain::Categorical {
                        values: BATCH_SIZES.iter().map(|&b| b as f64).collect(),
                    },
                ),
                (Field::EarlyStop, int(0, 5)),
                (
                    Field::LearningRate,
                    Domain::Continuous {
                        lo: 1e-5,
                        hi: 0.5,
                        log: true,
                    },
                ),
                (
                    Field::Momentum,
                    Domain::Continuous {
                        lo: 0.0,
                        hi: 1.0,
                        log: false,
                    },
                ),
                (Field::Epochs, int(100, 500)),
            ],
        }
    }

    /// Every field covered exactly once, each domain non-empty, at least
    /// one domain with two or more values.
    pub fn validate(&self) -> Result<()> {
        for f in Field::ALL {
            let n = self.domains.iter().filter(|(g, _)| *g == f).count();
            if n != 1 {
                return Err(Error::invalid(alloc::format!(
                    "field {} covered {n} times",
                    f.name()
                )));
            }
        }
        for (f, d) in &self.domains {
            let ok = match d {
                Domain::IntRange { lo, hi } => lo <= hi,
                Domain::Categorical { values } => !values.is_empty(),
                Domain::Continuous { lo, hi, log } => lo <= hi && (!log || *lo > 0.0),
            };
            if !ok {
                return Err(Error::invalid(alloc::format!("empty domain for {}", f.name())));
            }
        }
        if !self.domains.iter().any(|(_, d)| d.cardinality_above_one()) {
            return Err(Error::invalid("every domain holds a single value; nothing to mutate"));
        }
        Ok(())
    }

    fn domain(&self, f: Field) -> &Domain {
        &self
            .domains
            .iter()
            .find(|(g, _)| *g == f)
            .expect("validated space covers every field")
            .1
    }
}

pub fn random_config(space: &SearchSpace, rng: &mut Rng) -> CnnConfig {
    let mut c = CnnConfig::optimal();
    for f in Field::ALL {
        let v = space.domain(f).sample(rng);
        f.set(&mut c, v);
    }
    c
}

/// Resample one uniformly chosen field until it differs from the parent.
/// Fields whose domain holds a single value are never chosen.
pub fn mutate(cfg: &CnnConfig, space: &SearchSpace, rng: &mut Rng) -> (CnnConfig, Field) {
    let open: Vec<Field> = Field::ALL
        .into_iter()
        .filter(|&f| space.domain(f).cardinality_above_one())
        .collect();
    let f = open[rng.below(open.len())];
    let d = space.domain(f);
    let old = f.get(cfg);
    let mut child = *cfg;
    loop {
        let v = d.sample(rng);
        f.set(&mut child, v);
        if f.get(&child) != old {
            return (child, f);
        }
    }
}

pub fn hamming(a: &CnnConfig, b: &CnnConfig) -> usize {
    Field::ALL.iter().filter(|f| f.get(a) != f.get(b)).count()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    /// Mean F1 over the splits; 0 for splits that failed to train.
    pub value: f64,
    pub split_f1: Vec<f64>,
    pub failures: Vec<String>,
}

/// Mean test F1 over `k_splits` stratified 80/20 splits, each trained from
/// a fresh initialization.
pub fn evaluate_config(cfg: &CnnConfig, data: &Samples, k_splits: usize, rng: &mut Rng) -> Result<Fitness> {
    if k_splits == 0 {
        return Err(Error::invalid("k_splits must be >= 1"));
    }
    if !data.has_both_classes() {
        return Err(Error::Insufficient("evaluation data must contain both classes".into()));
    }
    let base = rng.fork().seed();
    let mut out = Fitness::default();
    for k in 0..k_splits {
        let mut r = Rng::stream(base, k as u64);
        let (tr, te) = data.stratified_split(0.2, &mut r);
        let score = split_f1(cfg, &data.subset(&tr), &data.subset(&te), &mut r);
        match score {
            Ok(v) => out.split_f1.push(v),
            Err(e) => {
                out.failures.push(alloc::format!("split {k}: {e}"));
                out.split_f1.push(0.0);
            }
        }
    }
    out.value = out.split_f1.iter().sum::<f64>() / k_splits as f64;
    Ok(out)
}

fn split_f1(cfg: &CnnConfig, train: &Samples, test: &Samples, rng: &mut Rng) -> Result<f64> {
    let (model, _) = nn::fit(cfg, train, rng)?;
    let cm: ConfusionMatrix = nn::confusion(&model, test)?;
    Ok(f1(&cm))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntry {
    pub config: CnnConfig,
    pub fitness: f64,
    /// Insertion counter; smaller is older.
    pub age: usize,
}

/// One evaluated configuration, in evaluation order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub index: usize,
    pub parent: Option<usize>,
    pub mutated: Option<Field>,
    pub config: CnnConfig,
    pub fitness: f64,
    pub best_so_far: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub best: PopulationEntry,
    pub history: Vec<AuditRow>,
    /// Population after the last iteration, oldest first.
    pub population: Vec<PopulationEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub population: usize,
    pub sample_size: usize,
    pub iterations: usize,
}

impl EvolutionParams {
    pub fn paper() -> Self {
        Self {
            population: 128,
            sample_size: 5,
            iterations: 512,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 2 || self.population < self.sample_size {
            return Err(Error::invalid("need population >= sample_size >= 2"));
        }
        Ok(())
    }
}

/// Run the search. `eval_fn` receives a dedicated random stream per
/// evaluation; non-finite fitness counts as 0.
pub fn regularized_evolution<F>(
    space: &SearchSpace,
    mut eval_fn: F,
    params: EvolutionParams,
    rng: &mut Rng,
) -> Result<EvolutionResult>
where
    F: FnMut(&CnnConfig, &mut Rng) -> f64,
{
    space.validate()?;
    params.validate()?;
    let eval_base = rng.fork().seed();
    let mut history: Vec<AuditRow> = Vec::with_capacity(params.population + params.iterations);
    let mut population: VecDeque<PopulationEntry> = VecDeque::with_capacity(params.population);
    let mut best: Option<PopulationEntry> = None;

    let mut record = |config: CnnConfig,
                      parent: Option<usize>,
                      mutated: Option<Field>,
                      history: &mut Vec<AuditRow>,
                      best: &mut Option<PopulationEntry>|
     -> PopulationEntry {
        let index = history.len();
        let mut f = eval_fn(&config, &mut Rng::stream(eval_base, index as u64));
        if !f.is_finite() {
            f = 0.0;
        }
        let entry = PopulationEntry {
            config,
            fitness: f,
            age: index,
        };
        if best.as_ref().map_or(true, |b| f > b.fitness) {
            *best = Some(entry.clone());
        }
        history.push(AuditRow {
            index,
            parent,
            mutated,
            config,
            fitness: f,
            best_so_far: best.as_ref().map_or(f, |b| b.fitness),
        });
        entry
    };

    for _ in 0..params.population {
        let c = random_config(space, rng);
        let e = record(c, None, None, &mut history, &mut best);
        population.push_back(e);
    }
    let mut picks: Vec<usize> = (0..params.population).collect();
    for _ in 0..params.iterations {
        // Partial Fisher-Yates for a sample without replacement.
        for i in 0..params.sample_size {
            let j = i + rng.below(params.population - i);
            picks.swap(i, j);
        }
        let parent = picks[..params.sample_size]
            .iter()
            .map(|&i| &population[i])
            .fold(None::<&PopulationEntry>, |acc, e| match acc {
                Some(a) if a.fitness >= e.fitness => Some(a),
                _ => Some(e),
            })
            .expect("sample is non-empty")
            .clone();
        let (child, field) = mutate(&parent.config, space, rng);
        let e = record(child, Some(parent.age), Some(field), &mut history, &mut best);
        population.pop_front();
        population.push_back(e);
    }
    Ok(EvolutionResult {
        best: best.expect("population is non-empty"),
        history,
        population: population.into(),
    })
}

/// Analytic test surface peaking at `lr = 1e-2`, `momentum = 0.5`.
pub fn surrogate_fitness(cfg: &CnnConfig) -> f64 {
    let a = libm::log10(cfg.learning_rate) + 2.0;
    let b = cfg.momentum - 0.5;
    -(a * a) - b * b
}
