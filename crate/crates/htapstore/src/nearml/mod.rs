//! Near-data online learning: the state/action/reward loop running in
//! the same process as the store.
//!
//! A session's multi-dimension inputs (customer portrait, click
//! feedback, text/image queries, label filters, commodity information)
//! are encoded into a fixed-length feature vector; a per-commodity
//! linear scorer ranks the catalog with ε-greedy exploration; observed
//! rewards drive one online gradient step at a time. Change triggers on
//! the commit path fire retraining after every K committed writes, and
//! the data-distilling step reads training batches straight off a
//! snapshot — no serialization, no transfer out of the process.

pub mod trigger;

mod distill;
mod features;
mod model;
mod reward;

pub use distill::{distill, write_batch_csv, SessionRowMapping, TrainingSample};
pub use features::{
    ClickFeedback, CommodityInfo, FeatureConfig, FeatureExtractor, LabelFeedback, Portrait,
    SessionEvents, SessionState,
};
pub use model::{Action, ModelConfig, Recommender, ScorerModel};
pub use reward::{compute_reward, RewardComponents, RewardWeights};
pub use trigger::{TriggerCallback, TriggerFiring, TriggerHandle};

use std::sync::Arc;

use crate::storage::Table;

/// Builds a trigger callback that retrains `recommender` from the fired
/// snapshot of `table` and atomically deploys the new model.
pub fn retrain_callback(
    recommender: Arc<Recommender>,
    table: Arc<Table>,
    mapping: SessionRowMapping,
) -> TriggerCallback {
    Arc::new(move |firing: &TriggerFiring| {
        let batch = match distill(&table, &firing.snapshot, recommender.extractor(), &mapping) {
            Ok(batch) => batch,
            Err(_) => return,
        };
        let model = recommender.fit_base_model(&batch);
        recommender.install_model(model);
    })
}
