//! Per-commodity linear scorer with ε-greedy recommendation.
//!
//! Each commodity scores a state by a dot product of its weight vector
//! with the state's feature vector; a commodity without its own vector
//! falls back to the model's base weights. `observe` performs one SGD
//! step on squared error between the predicted score and the observed
//! reward. Deployed models are whole-model swaps behind a version
//! counter: a recommendation reads the model exactly once, so it never
//! sees a half-updated deployment.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::distill::TrainingSample;
use super::features::{CommodityInfo, FeatureConfig, FeatureExtractor, SessionEvents, SessionState};

/// Learning configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// SGD step size.
    pub learning_rate: f64,
    /// Exploration probability per recommendation slot.
    pub epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            learning_rate: 0.05,
            epsilon: 0.1,
        }
    }
}

/// An ordered recommendation of k distinct commodities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub recommended: Vec<i64>,
}

/// One deployable model version.
#[derive(Debug, Clone, Default)]
pub struct ScorerModel {
    version: u64,
    base: Vec<f64>,
    per_commodity: BTreeMap<i64, Vec<f64>>,
}

impl ScorerModel {
    pub fn new(dim: usize) -> ScorerModel {
        ScorerModel {
            version: 0,
            base: vec![0.0; dim],
            per_commodity: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn score(&self, commodity: i64, features: &[f64]) -> f64 {
        let w = self.per_commodity.get(&commodity).unwrap_or(&self.base);
        dot(w, features)
    }

    fn sgd_step(&mut self, commodity: i64, features: &[f64], reward: f64, lr: f64) {
        let w = self
            .per_commodity
            .entry(commodity)
            .or_insert_with(|| self.base.clone());
        let err = dot(w, features) - reward;
        for (wi, xi) in w.iter_mut().zip(features) {
            *wi -= lr * err * xi;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The online recommendation model: commodity catalog, current scorer
/// version, and a seeded exploration source.
pub struct Recommender {
    config: ModelConfig,
    extractor: FeatureExtractor,
    catalog: RwLock<BTreeMap<i64, CommodityInfo>>,
    model: RwLock<Arc<ScorerModel>>,
    rng: Mutex<ChaCha8Rng>,
}

impl Recommender {
    pub fn new(config: ModelConfig, features: FeatureConfig, seed: u64) -> Recommender {
        let dim = features.feature_len();
        Recommender {
            config,
            extractor: FeatureExtractor::new(features),
            catalog: RwLock::new(BTreeMap::new()),
            model: RwLock::new(Arc::new(ScorerModel::new(dim))),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn add_commodity(&self, info: CommodityInfo) {
        self.catalog.write().unwrap().insert(info.id, info);
    }

    pub fn catalog_len(&self) -> usize {
        self.catalog.read().unwrap().len()
    }

    /// Encodes raw session events against a cataloged commodity.
    pub fn extract_for(&self, events: &SessionEvents, commodity_id: i64) -> Result<SessionState> {
        let catalog = self.catalog.read().unwrap();
        let info = catalog
            .get(&commodity_id)
            .ok_or(Error::UnknownCommodity(commodity_id))?;
        self.extractor.extract(events, info)
    }

    pub fn model_version(&self) -> u64 {
        self.model.read().unwrap().version()
    }

    /// Current score of one commodity for a state.
    pub fn score(&self, state: &SessionState, commodity: i64) -> f64 {
        self.model
            .read()
            .unwrap()
            .score(commodity, &state.feature_vector)
    }

    /// Top-k by score, ties broken by ascending commodity id; each slot
    /// is replaced with a uniformly random commodity not already in the
    /// list with probability ε.
    pub fn recommend(&self, state: &SessionState, k: usize) -> Result<Action> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        // One read: this call scores against a single model version.
        let model = Arc::clone(&self.model.read().unwrap());
        let catalog = self.catalog.read().unwrap();
        if catalog.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        if k > catalog.len() {
            return Err(Error::CatalogTooSmall {
                requested: k,
                available: catalog.len(),
            });
        }
        let mut scored: Vec<(i64, f64)> = catalog
            .keys()
            .map(|&id| (id, model.score(id, &state.feature_vector)))
            .collect();
        scored.sort_by(|(id_a, s_a), (id_b, s_b)| {
            s_b.total_cmp(s_a).then_with(|| id_a.cmp(id_b))
        });
        let mut picked: Vec<i64> = scored.iter().take(k).map(|(id, _)| *id).collect();

        let mut rng = self.rng.lock().unwrap();
        for slot in 0..picked.len() {
            if rng.random::<f64>() >= self.config.epsilon {
                continue;
            }
            let unseen: Vec<i64> = catalog
                .keys()
                .copied()
                .filter(|id| !picked.contains(id))
                .collect();
            if unseen.is_empty() {
                continue;
            }
            picked[slot] = unseen[rng.random_range(0..unseen.len())];
        }
        Ok(Action { recommended: picked })
    }

    /// One online update toward `reward` for every commodity in the
    /// action. The model version does not change; deployments happen
    /// only through [`Recommender::install_model`].
    pub fn observe(&self, state: &SessionState, action: &Action, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::NonFiniteReward);
        }
        let mut guard = self.model.write().unwrap();
        let model = Arc::make_mut(&mut guard);
        for &commodity in &action.recommended {
            model.sgd_step(
                commodity,
                &state.feature_vector,
                reward,
                self.config.learning_rate,
            );
        }
        Ok(())
    }

    /// Fits a fresh base model from a training batch (one SGD pass per
    /// epoch over the samples, in order). Per-commodity corrections
    /// start empty and re-accumulate through `observe`.
    pub fn fit_base_model(&self, batch: &[TrainingSample]) -> ScorerModel {
        let dim = self.extractor.feature_len();
        let mut model = ScorerModel::new(dim);
        for _epoch in 0..2 {
            for sample in batch {
                if sample.features.len() != dim {
                    continue;
                }
                let err = dot(&model.base, &sample.features) - sample.label;
                for (wi, xi) in model.base.iter_mut().zip(&sample.features) {
                    *wi -= self.config.learning_rate * err * xi;
                }
            }
        }
        model
    }

    /// Atomically deploys a new model version; concurrent readers see
    /// either the old or the new model, never a mixture.
    pub fn install_model(&self, mut model: ScorerModel) -> u64 {
        let mut guard = self.model.write().unwrap();
        model.version = guard.version() + 1;
        let version = model.version;
        *guard = Arc::new(model);
        version
    }
}
