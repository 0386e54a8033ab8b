//! Multi-dimension feature extraction.
//!
//! Encoding rules: bools become 0/1; strings are hashed with a stable
//! 32-bit FNV-1a and one-hot encoded over a configured bucket count;
//! categorical indices expand to one-hots of their configured
//! cardinality; numeric fields normalize into [0, 1] by configured
//! ranges. Duration strings parse as seconds when numeric and hash like
//! any other string otherwise, so the slot layout reserves room for
//! both. Concatenation order is fixed: portrait, clicks, queries,
//! labels, item.

use crate::error::{Error, Result};

/// Stable 32-bit FNV-1a; must not vary across runs or platforms
/// because feature layouts are part of persisted training data.
pub(crate) fn stable_hash32(s: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in s.as_bytes() {
        h ^= u32::from(*b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Feature-space configuration; fixes the vector length.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Buckets for each hashed string feature.
    pub hash_buckets: usize,
    pub category_cardinality: usize,
    pub subcategory_cardinality: usize,
    /// Normalization range for price bounds.
    pub price_range: (f64, f64),
    /// Normalization range for inventory counts.
    pub inventory_range: (i64, i64),
    /// Normalization range for numeric durations, in seconds.
    pub duration_range: (f64, f64),
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            hash_buckets: 16,
            category_cardinality: 8,
            subcategory_cardinality: 16,
            price_range: (0.0, 10_000.0),
            inventory_range: (0, 100_000),
            duration_range: (0.0, 3_600.0),
        }
    }
}

impl FeatureConfig {
    /// Fixed feature-vector length for this configuration.
    pub fn feature_len(&self) -> usize {
        let portrait = 2 * self.hash_buckets; // time, location
        let clicks = 4 + 1 + self.hash_buckets; // pv/buy/cart/favorite, numeric duration, hashed duration
        let queries = 2 * self.hash_buckets; // text, image
        let labels = 3; // price lo, price hi, inventory
        let item = self.category_cardinality + self.subcategory_cardinality + self.hash_buckets;
        portrait + clicks + queries + labels + item
    }

    fn bucket(&self, s: &str) -> usize {
        stable_hash32(s) as usize % self.hash_buckets
    }

    fn normalize_f(&self, v: f64, (lo, hi): (f64, f64)) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

/// Customer portrait inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Portrait {
    pub time_of_day: String,
    pub location: String,
}

/// Click-feedback inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClickFeedback {
    pub page_view: bool,
    pub buy: bool,
    pub cart: bool,
    pub favorite: bool,
    /// Page-view duration; numeric strings are seconds.
    pub duration: String,
}

/// Label-filter inputs from real-time analytics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelFeedback {
    pub price_range: (f64, f64),
    pub inventory: i64,
}

/// Commodity attributes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommodityInfo {
    pub id: i64,
    pub category: usize,
    pub subcategory: usize,
    pub style: String,
}

/// Raw per-step session inputs, before encoding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionEvents {
    pub customer_id: i64,
    /// Step counter t.
    pub step: u64,
    pub portrait: Portrait,
    pub clicks: ClickFeedback,
    pub text_query: String,
    /// Opaque reference to an image query; hashed, never decoded.
    pub image_query: String,
    pub labels: LabelFeedback,
}

/// The encoded state: the session inputs, the commodity context, and
/// the derived fixed-length feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub customer_id: i64,
    pub step: u64,
    pub portrait: Portrait,
    pub clicks: ClickFeedback,
    pub text_query: String,
    pub image_query: String,
    pub labels: LabelFeedback,
    pub item: CommodityInfo,
    pub feature_vector: Vec<f64>,
}

/// Pure, deterministic encoder from raw events to a state vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureExtractor {
    config: FeatureConfig,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Self {
        FeatureExtractor { config }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn feature_len(&self) -> usize {
        self.config.feature_len()
    }

    /// Offset of the `buy` flag within the vector.
    pub fn buy_slot(&self) -> usize {
        2 * self.config.hash_buckets + 1
    }

    pub fn extract(&self, events: &SessionEvents, item: &CommodityInfo) -> Result<SessionState> {
        let cfg = &self.config;
        if item.category >= cfg.category_cardinality {
            return Err(Error::InvalidConfig(format!(
                "category index {} exceeds cardinality {}",
                item.category, cfg.category_cardinality
            )));
        }
        if item.subcategory >= cfg.subcategory_cardinality {
            return Err(Error::InvalidConfig(format!(
                "subcategory index {} exceeds cardinality {}",
                item.subcategory, cfg.subcategory_cardinality
            )));
        }

        let mut x = vec![0.0f64; cfg.feature_len()];
        let mut base = 0;

        // Portrait: hashed one-hots.
        x[base + cfg.bucket(&events.portrait.time_of_day)] = 1.0;
        base += cfg.hash_buckets;
        x[base + cfg.bucket(&events.portrait.location)] = 1.0;
        base += cfg.hash_buckets;

        // Clicks: flags, then duration (numeric slot or hashed).
        for (i, flag) in [
            events.clicks.page_view,
            events.clicks.buy,
            events.clicks.cart,
            events.clicks.favorite,
        ]
        .into_iter()
        .enumerate()
        {
            x[base + i] = f64::from(u8::from(flag));
        }
        base += 4;
        match events.clicks.duration.trim().parse::<f64>() {
            Ok(seconds) if seconds.is_finite() => {
                x[base] = cfg.normalize_f(seconds, cfg.duration_range);
            }
            _ if !events.clicks.duration.is_empty() => {
                x[base + 1 + cfg.bucket(&events.clicks.duration)] = 1.0;
            }
            _ => {}
        }
        base += 1 + cfg.hash_buckets;

        // Queries.
        if !events.text_query.is_empty() {
            x[base + cfg.bucket(&events.text_query)] = 1.0;
        }
        base += cfg.hash_buckets;
        if !events.image_query.is_empty() {
            x[base + cfg.bucket(&events.image_query)] = 1.0;
        }
        base += cfg.hash_buckets;

        // Labels.
        x[base] = cfg.normalize_f(events.labels.price_range.0, cfg.price_range);
        x[base + 1] = cfg.normalize_f(events.labels.price_range.1, cfg.price_range);
        let (inv_lo, inv_hi) = cfg.inventory_range;
        x[base + 2] = cfg.normalize_f(events.labels.inventory as f64, (inv_lo as f64, inv_hi as f64));
        base += 3;

        // Item context.
        x[base + item.category] = 1.0;
        base += cfg.category_cardinality;
        x[base + item.subcategory] = 1.0;
        base += cfg.subcategory_cardinality;
        if !item.style.is_empty() {
            x[base + cfg.bucket(&item.style)] = 1.0;
        }
        base += cfg.hash_buckets;
        debug_assert_eq!(base, cfg.feature_len());

        Ok(SessionState {
            customer_id: events.customer_id,
            step: events.step,
            portrait: events.portrait.clone(),
            clicks: events.clicks.clone(),
            text_query: events.text_query.clone(),
            image_query: events.image_query.clone(),
            labels: events.labels.clone(),
            item: item.clone(),
            feature_vector: x,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extractor() -> FeatureExtractor {
        FeatureExtractor::new(FeatureConfig::default())
    }

    fn base_events() -> SessionEvents {
        SessionEvents {
            customer_id: 7,
            step: 1,
            ..SessionEvents::default()
        }
    }

    #[test]
    fn buy_flag_sets_its_slot() {
        let ex = extractor();
        let mut events = base_events();
        events.clicks.buy = true;
        let state = ex.extract(&events, &CommodityInfo::default()).unwrap();
        assert_eq!(state.feature_vector[ex.buy_slot()], 1.0);
        assert_eq!(state.feature_vector.len(), ex.feature_len());
    }

    #[test]
    fn empty_session_has_zero_click_flags() {
        let ex = extractor();
        let state = ex
            .extract(&base_events(), &CommodityInfo::default())
            .unwrap();
        let click_base = 2 * ex.config().hash_buckets;
        for i in 0..5 {
            assert_eq!(state.feature_vector[click_base + i], 0.0, "slot {i}");
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let ex = extractor();
        let mut events = base_events();
        events.portrait.time_of_day = "evening".into();
        events.portrait.location = "shenzhen".into();
        events.text_query = "wool coat".into();
        events.clicks.duration = "37.5".into();
        let item = CommodityInfo {
            id: 3,
            category: 2,
            subcategory: 9,
            style: "casual".into(),
        };
        let a = ex.extract(&events, &item).unwrap();
        let b = ex.extract(&events, &item).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn numeric_duration_normalizes_and_text_duration_hashes() {
        let ex = extractor();
        let duration_base = 2 * ex.config().hash_buckets + 4;
        let mut events = base_events();
        events.clicks.duration = "1800".into();
        let state = ex.extract(&events, &CommodityInfo::default()).unwrap();
        assert!((state.feature_vector[duration_base] - 0.5).abs() < 1e-12);

        events.clicks.duration = "a while".into();
        let state = ex.extract(&events, &CommodityInfo::default()).unwrap();
        assert_eq!(state.feature_vector[duration_base], 0.0);
        let hashed: f64 = state.feature_vector
            [duration_base + 1..duration_base + 1 + ex.config().hash_buckets]
            .iter()
            .sum();
        assert_eq!(hashed, 1.0);
    }

    #[test]
    fn out_of_range_one_hot_is_rejected() {
        let ex = extractor();
        let item = CommodityInfo {
            id: 1,
            category: 99,
            subcategory: 0,
            style: String::new(),
        };
        assert!(ex.extract(&base_events(), &item).is_err());
    }

    #[test]
    fn hash_is_stable() {
        // FNV-1a reference values; the layout depends on them.
        assert_eq!(stable_hash32(""), 0x811c9dc5);
        assert_eq!(stable_hash32("a"), 0xe40c292c);
    }
}
