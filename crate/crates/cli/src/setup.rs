use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use stress_explain::corpus::{filter_corpus, load_corpus, Corpus, LoadOptions, Split};
use stress_explain::explain::{Constraints, Direction, RewardConfig};
use stress_explain::mcts::SearchConfig;
use stress_explain::models::{
    load_model, open_scorer, train_mlp, train_nb, MlpConfig, NbVariant, ProbModel, ScorerEndpoint, ScorerOptions,
    Target,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Bnb,
    Mnb,
    Mlp,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetChoice {
    Stress,
    Context,
}

impl From<TargetChoice> for Target {
    fn from(t: TargetChoice) -> Self {
        match t {
            TargetChoice::Stress => Target::Stress,
            TargetChoice::Context => Target::Context,
        }
    }
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, default_value = "text")]
    pub text_col: String,
    #[arg(long, default_value = "label")]
    pub stress_col: String,
    #[arg(long, default_value = "subreddit")]
    pub context_col: String,
    /// Context labels kept for context classification and explanation.
    #[arg(long, value_delimiter = ',', default_value = "anxiety,assistance,relationships")]
    pub contexts: Vec<String>,
}

impl CorpusArgs {
    pub fn load(&self, path: &Path, split: Split) -> Result<Corpus> {
        let opts = LoadOptions {
            text_col: self.text_col.clone(),
            stress_col: self.stress_col.clone(),
            context_col: self.context_col.clone(),
            ..LoadOptions::default()
        }
        .with_split(split);
        load_corpus(path, &opts).with_context(|| format!("loading {}", path.display()))
    }

    /// Documents in the configured contexts, optionally only one stress label.
    pub fn in_contexts(&self, corpus: &Corpus, stress: Option<u8>) -> Result<Corpus> {
        Ok(filter_corpus(corpus, &self.contexts, stress)?)
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "mnb")]
    pub model: ModelChoice,
    /// Training CSV; models are fit on it unless saved models or scorers are given.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Saved stress model (from `train`).
    #[arg(long)]
    pub stress_model: Option<PathBuf>,
    /// Saved context model (from `train`).
    #[arg(long)]
    pub context_model: Option<PathBuf>,
    /// Shell command of the external stress scorer.
    #[arg(long)]
    pub scorer_cmd: Option<String>,
    /// Shell command of the external context scorer.
    #[arg(long)]
    pub context_scorer_cmd: Option<String>,
    /// Seconds to wait for an external scorer reply.
    #[arg(long, default_value_t = 30.0)]
    pub scorer_timeout: f64,
    /// Naive Bayes additive smoothing.
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    /// MLP hidden layer sizes.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Seed for MLP initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    pub model_seed: u64,
    #[command(flatten)]
    pub corpus: CorpusArgs,
}

pub struct ModelPair {
    pub stress: Arc<ProbModel>,
    pub context: Arc<ProbModel>,
    pub description: String,
}

impl ModelArgs {
    fn mlp_config(&self) -> MlpConfig {
        MlpConfig {
            hidden: self.hidden.clone(),
            learning_rate: self.learning_rate,
            max_epochs: self.epochs,
            seed: self.model_seed,
            ..MlpConfig::default()
        }
    }

    /// Fits one in-process model on `corpus`.
    pub fn fit(&self, corpus: &Corpus, target: Target) -> Result<ProbModel> {
        let model = match self.model {
            ModelChoice::Bnb => ProbModel::NaiveBayes(train_nb(corpus, target, NbVariant::Bernoulli, self.smoothing)?),
            ModelChoice::Mnb => {
                ProbModel::NaiveBayes(train_nb(corpus, target, NbVariant::Multinomial, self.smoothing)?)
            }
            ModelChoice::Mlp => ProbModel::Mlp(train_mlp(corpus, target, &self.mlp_config())?),
            ModelChoice::External => bail!("external models are not trained here; pass --scorer-cmd"),
        };
        Ok(model)
    }

    fn scorer(&self, cmd: &str, labels: &[String]) -> Result<ProbModel> {
        let opts = ScorerOptions {
            timeout: Duration::from_secs_f64(self.scorer_timeout),
            ..ScorerOptions::default()
        };
        let scorer = open_scorer(&ScorerEndpoint::Shell(cmd.to_string()), labels, opts)
            .with_context(|| format!("starting scorer `{cmd}`"))?;
        Ok(ProbModel::External(scorer))
    }

    /// Stress and context models from saved files, external scorers, or training.
    pub fn build(&self) -> Result<ModelPair> {
        if let (Some(s), Some(c)) = (&self.stress_model, &self.context_model) {
            let stress = load_model(s).with_context(|| format!("loading {}", s.display()))?;
            let context = load_model(c).with_context(|| format!("loading {}", c.display()))?;
            return Ok(ModelPair {
                description: format!("{:?}/{:?}", stress.kind(), context.kind()),
                stress: Arc::new(stress),
                context: Arc::new(context),
            });
        }
        if self.stress_model.is_some() || self.context_model.is_some() {
            bail!("--stress-model and --context-model must be given together");
        }
        if self.model == ModelChoice::External {
            let (Some(s), Some(c)) = (&self.scorer_cmd, &self.context_scorer_cmd) else {
                bail!("--model external needs --scorer-cmd and --context-scorer-cmd");
            };
            let stress = self.scorer(s, &["0".to_string(), "1".to_string()])?;
            let context = self.scorer(c, &self.corpus.contexts)?;
            return Ok(ModelPair {
                stress: Arc::new(stress),
                context: Arc::new(context),
                description: "external".into(),
            });
        }
        let Some(path) = &self.train else {
            bail!("pass --train, saved models, or --model external with scorer commands");
        };
        let train = self.corpus.load(path, Split::Train)?;
        log::info!("training {:?} models on {} documents", self.model, train.len());
        // The stress model sees every context; the context model only the configured ones.
        let stress = self.fit(&train, Target::Stress)?;
        let context = self.fit(&self.corpus.in_contexts(&train, None)?, Target::Context)?;
        Ok(ModelPair {
            stress: Arc::new(stress),
            context: Arc::new(context),
            description: format!("{:?}", self.model).to_lowercase(),
        })
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c_puct: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub n_phrases: usize,
    #[arg(long, default_value_t = 5)]
    pub n_length: usize,
    #[arg(long, default_value_t = 0.2)]
    pub r_min: f64,
    #[arg(long, default_value_t = 0.5)]
    pub r_max: f64,
    /// Use raw mean rewards in the selection rule instead of dividing by the reward range.
    #[arg(long)]
    pub raw_values: bool,
}

impl SearchArgs {
    pub fn config(&self, models: &ModelPair, alpha: f64) -> Result<SearchConfig> {
        let reward = RewardConfig::new(alpha, Direction::Dependent, models.stress.clone(), models.context.clone())?;
        let cfg = SearchConfig {
            iterations: self.iterations,
            c_puct: self.c_puct,
            seed: self.seed,
            normalize_values: !self.raw_values,
            constraints: Constraints::new(self.n_phrases, self.n_length, self.r_min, self.r_max)?,
            reward,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
