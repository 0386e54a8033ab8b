//! End-to-end near-data learning loop: session writes cross a change
//! threshold, the trigger distills a batch off the fired snapshot,
//! retrains, and deploys a new model version — all inside the process.

use std::sync::Arc;


use htapstore::bench::SchemaPreset;
use htapstore::nearml::{
    distill, retrain_callback, write_batch_csv, CommodityInfo, FeatureConfig, ModelConfig,
    Recommender, SessionEvents, SessionRowMapping,
};
use htapstore::txn::{Engine, EngineOptions, Statement};
use htapstore::value::Value;
use htapstore::wal::Durability;

fn buffered() -> EngineOptions {
    EngineOptions {
        durability: Durability::Buffered,
    }
}

fn session_insert(id: i64, buy: bool, commodity: i64) -> Statement {
    Statement::Insert {
        table: "sessions".into(),
        values: vec![
            Value::Int(id),
            Value::Int(id % 10),
            Value::Bool(buy),
            Value::Bool(false),
            Value::Str("evening".into()),
            Value::Str("hangzhou".into()),
            Value::Bool(true),
            Value::Bool(false),
            Value::Str("90".into()),
            Value::Str("wool coat".into()),
            Value::Str(String::new()),
            Value::Float(50.0),
            Value::Float(150.0),
            Value::Int(40),
            Value::Int(commodity),
            Value::Int((commodity % 8).max(0)),
            Value::Int((commodity % 16).max(0)),
            Value::Str("casual".into()),
        ],
    }
}

#[test]
fn threshold_retraining_deploys_new_model_versions() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::create_with(dir.path(), buffered()).unwrap();
    engine
        .create_table(SchemaPreset::Sessions.schema(), 3)
        .unwrap();
    let table = engine.table("sessions").unwrap();

    let recommender = Arc::new(Recommender::new(
        ModelConfig::default(),
        FeatureConfig::default(),
        7,
    ));
    for id in 0..6 {
        recommender.add_commodity(CommodityInfo {
            id,
            category: (id % 8) as usize,
            subcategory: (id % 16) as usize,
            style: "casual".into(),
        });
    }
    let handle = engine
        .register_trigger(
            "sessions",
            5,
            retrain_callback(
                Arc::clone(&recommender),
                Arc::clone(&table),
                SessionRowMapping::default(),
            ),
        )
        .unwrap();
    assert_eq!(recommender.model_version(), 0);

    // 12 committed session writes cross the threshold twice.
    for id in 0..12 {
        let mut txn = engine.begin();
        engine
            .exec_stmt(&mut txn, session_insert(id, id % 3 == 0, id % 6))
            .unwrap();
        engine.commit(&mut txn).unwrap();
    }
    engine.quiesce_triggers();
    assert_eq!(handle.fired_count(), 2);
    assert_eq!(recommender.model_version(), 2);

    // The deployed model serves recommendations and keeps learning.
    let events = SessionEvents {
        customer_id: 99,
        step: 0,
        text_query: "wool coat".into(),
        ..Default::default()
    };
    let state = recommender.extract_for(&events, 3).unwrap();
    let action = recommender.recommend(&state, 3).unwrap();
    assert_eq!(action.recommended.len(), 3);
    recommender.observe(&state, &action, 0.8).unwrap();
    assert_eq!(recommender.model_version(), 2, "observe never bumps versions");
}

#[test]
fn distill_touches_no_files_and_exports_csv_separately() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::create_with(dir.path(), buffered()).unwrap();
    engine
        .create_table(SchemaPreset::Sessions.schema(), 2)
        .unwrap();
    for id in 0..20 {
        let mut txn = engine.begin();
        engine
            .exec_stmt(&mut txn, session_insert(id, id % 2 == 0, id % 4))
            .unwrap();
        engine.commit(&mut txn).unwrap();
    }

    // Structural check: the engine directory is byte-stable across the
    // distill pass — the batch never leaves process memory.
    let dir_state = |p: &std::path::Path| -> Vec<(String, u64)> {
        let mut entries: Vec<(String, u64)> = std::fs::read_dir(p)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    e.metadata().unwrap().len(),
                )
            })
            .collect();
        entries.sort();
        entries
    };
    let before = dir_state(dir.path());

    let recommender = Recommender::new(ModelConfig::default(), FeatureConfig::default(), 1);
    let table = engine.table("sessions").unwrap();
    let batch = distill(
        &table,
        &engine.snapshot(),
        recommender.extractor(),
        &SessionRowMapping::default(),
    )
    .unwrap();
    assert_eq!(batch.len(), 20);
    let after = dir_state(dir.path());
    assert_eq!(before, after, "distill must not write to the store directory");

    // CSV export is a separate, explicit step for offline inspection.
    let csv_path = dir.path().join("batch.csv");
    let mut file = std::fs::File::create(&csv_path).unwrap();
    write_batch_csv(&batch, &mut file).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.starts_with("customer_id,t,f0,"));
}

#[test]
fn retrained_model_prefers_rewarded_sessions() {
    // Sessions where the "wool coat" query co-occurs with buys should
    // push the retrained base model toward that query's bucket.
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::create_with(dir.path(), buffered()).unwrap();
    engine
        .create_table(SchemaPreset::Sessions.schema(), 2)
        .unwrap();
    let table = engine.table("sessions").unwrap();
    let recommender = Arc::new(Recommender::new(
        ModelConfig::default(),
        FeatureConfig::default(),
        3,
    ));
    recommender.add_commodity(CommodityInfo::default());

    let mut txn = engine.begin();
    for id in 0..40 {
        engine
            .exec_stmt(&mut txn, session_insert(id, true, 0))
            .unwrap();
    }
    engine.commit(&mut txn).unwrap();

    let batch = distill(
        &table,
        &engine.snapshot(),
        recommender.extractor(),
        &SessionRowMapping::default(),
    )
    .unwrap();
    let model = recommender.fit_base_model(&batch);
    recommender.install_model(model);
    assert_eq!(recommender.model_version(), 1);

    let buyer_like = SessionEvents {
        customer_id: 1,
        step: 0,
        text_query: "wool coat".into(),
        ..Default::default()
    };
    let state = recommender.extract_for(&buyer_like, 0).unwrap();
    assert!(
        recommender.score(&state, 0) > 0.0,
        "retrained model should score buy-like sessions positively"
    );
}
