//! End-to-end benchmark pipeline: ingest or generate telemetry, split
//! 70:30, keep only normal rows for training, min-max scale on the training
//! range, fit the selected detectors, classify the evaluation rows, and
//! assemble metrics, resource measurements, and the comparison into a
//! report.
//!
//! The scaler is fitted on the normal-only training subset and applied
//! unchanged everywhere else, so nothing about the test rows can leak into
//! preprocessing. Model fitting and scoring are deterministic per config
//! seed; profiled regions run one at a time, single-threaded.

use crate::config::{EvalScope, InputConfig, RunConfig};
use crate::dataset::{
    apply_minmax, filter_normal, fit_minmax, generate_synthetic, load_csv, split_train_test,
    TelemetryFrame,
};
use crate::error::{Error, StageExt};
use crate::eval::{confusion, normalized_confusion, MetricsReport};
use crate::iforest::{fit_iforest, serialize_iforest};
use crate::matrix::Matrix;
use crate::ocsvm::{fit_ocsvm_detailed, serialize_ocsvm};
use crate::profile::{measure_peak_ram, time_inference, ResourceReport};
use crate::report::{
    compare_models, environment_capture, BenchmarkReport, DataSummary, ModelDetail, ModelReport,
    ModelResources, SCHEMA_VERSION,
};

/// Offset added to the master seed for the split stage; the input generator
/// uses the master seed itself.
const SPLIT_SEED_OFFSET: u64 = 1;

/// Runs the full pipeline described by `config` and returns the assembled
/// report. Deterministic per config and seed outside the report's
/// environment block.
pub fn run_pipeline(config: &RunConfig) -> Result<BenchmarkReport, Error> {
    config.validate()?;

    let frame: TelemetryFrame = match &config.input {
        InputConfig::Csv { path, schema } => load_csv(path, schema).stage("input")?,
        InputConfig::Synthetic { spec } => generate_synthetic(spec, config.seed).stage("input")?,
    };

    let (train_raw, test_raw) =
        split_train_test(&frame, config.split_ratio, config.seed.wrapping_add(SPLIT_SEED_OFFSET))
            .stage("split")?;
    let train_normal = filter_normal(&train_raw).stage("filter-normal")?;
    let scaler = fit_minmax(&train_normal).stage("scale")?;
    let train = apply_minmax(&train_normal, &scaler).stage("scale")?;
    let eval_raw = match config.eval_scope {
        EvalScope::Test => &test_raw,
        EvalScope::Full => &frame,
    };
    let eval_frame = apply_minmax(eval_raw, &scaler).stage("scale")?;

    let data = DataSummary {
        rows_total: frame.row_count(),
        anomalies_total: frame.anomaly_count(),
        train_rows: train_raw.row_count(),
        train_normal_rows: train_normal.row_count(),
        eval_rows: eval_frame.row_count(),
        eval_anomalies: eval_frame.anomaly_count(),
    };

    let mut models = Vec::new();
    let mut resources = Vec::new();

    if config.model.includes_iforest() {
        let model = fit_iforest(train.features(), &config.iforest).stage("fit-iforest")?;
        let predicted = model.classify(eval_frame.features()).stage("classify")?;
        let cm = confusion(eval_frame.labels(), &predicted).stage("evaluate")?;
        let bytes = serialize_iforest(&model);
        models.push(ModelReport {
            name: "iforest".into(),
            detail: ModelDetail::Iforest {
                threshold: model.threshold(),
                subsample_effective: model.subsample_effective(),
            },
            confusion: cm,
            metrics: MetricsReport::from_confusion(&cm).stage("evaluate")?,
            normalized: normalized_confusion(&cm),
            model_size_bytes: bytes.len(),
        });
        if config.profile.enabled {
            let scorer = |batch: &Matrix| {
                std::hint::black_box(model.scores(batch).expect("batch dims checked above"));
            };
            let (timing, probe) = measure_peak_ram(|| {
                time_inference(
                    scorer,
                    eval_frame.features(),
                    config.profile.repeats,
                    config.profile.warmup,
                )
            });
            resources.push(ModelResources {
                model: "iforest".into(),
                resource: ResourceReport {
                    model_size_bytes: bytes.len(),
                    peak_ram_mb: probe.peak_mb,
                    timing: timing.stage("profile")?,
                },
            });
        }
    }

    if config.model.includes_ocsvm() {
        let outcome = fit_ocsvm_detailed(train.features(), &config.ocsvm).stage("fit-ocsvm")?;
        let model = outcome.model;
        let predicted = model.predict(eval_frame.features()).stage("classify")?;
        let cm = confusion(eval_frame.labels(), &predicted).stage("evaluate")?;
        let bytes = serialize_ocsvm(&model);
        models.push(ModelReport {
            name: "ocsvm".into(),
            detail: ModelDetail::Ocsvm {
                gamma: model.gamma(),
                support_vectors: model.support_vector_count(),
                rho: model.rho(),
                iterations: outcome.iterations,
                converged: outcome.converged,
            },
            confusion: cm,
            metrics: MetricsReport::from_confusion(&cm).stage("evaluate")?,
            normalized: normalized_confusion(&cm),
            model_size_bytes: bytes.len(),
        });
        if config.profile.enabled {
            let scorer = |batch: &Matrix| {
                std::hint::black_box(model.decision_values(batch).expect("batch dims checked above"));
            };
            let (timing, probe) = measure_peak_ram(|| {
                time_inference(
                    scorer,
                    eval_frame.features(),
                    config.profile.repeats,
                    config.profile.warmup,
                )
            });
            resources.push(ModelResources {
                model: "ocsvm".into(),
                resource: ResourceReport {
                    model_size_bytes: bytes.len(),
                    peak_ram_mb: probe.peak_mb,
                    timing: timing.stage("profile")?,
                },
            });
        }
    }

    let mut environment = environment_capture();
    environment.resources = resources;

    let mut report = BenchmarkReport {
        schema_version: SCHEMA_VERSION,
        run: config.clone(),
        data,
        models,
        comparison: None,
        environment,
    };
    if report.models.len() == 2 {
        let cmp = compare_models(&report)?;
        report.comparison = Some(cmp.metrics);
        report.environment.resource_comparison = cmp.resources;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelSelection;
    use crate::dataset::{ScalerParams, SyntheticSpec};

    fn small_config(seed: u64) -> RunConfig {
        let mut config = RunConfig::synthetic_defaults(seed);
        config.input = InputConfig::Synthetic {
            spec: SyntheticSpec {
                normal_count: 300,
                anomaly_count: 30,
                dim: 3,
                spread: 1.0,
                halfwidth: 10.0,
            },
        };
        config.ocsvm.nu = 0.1;
        config.profile.repeats = 3;
        config.profile.warmup = 1;
        config
    }

    #[test]
    fn both_models_produce_two_blocks_and_a_comparison() {
        let report = run_pipeline(&small_config(1)).unwrap();
        assert_eq!(report.models.len(), 2);
        assert_eq!(report.environment.resources.len(), 2);
        assert!(report.comparison.is_some());
        assert_eq!(report.data.rows_total, 330);
        assert_eq!(report.data.train_rows, 231);
        assert_eq!(report.data.eval_rows, 99);
    }

    #[test]
    fn single_model_selection_produces_one_block() {
        let mut config = small_config(2);
        config.model = ModelSelection::Iforest;
        let report = run_pipeline(&config).unwrap();
        assert_eq!(report.models.len(), 1);
        assert_eq!(report.models[0].name, "iforest");
        assert!(report.comparison.is_none());
    }

    #[test]
    fn report_body_is_deterministic_per_seed() {
        let config = small_config(3);
        let a = run_pipeline(&config).unwrap();
        let b = run_pipeline(&config).unwrap();
        assert_eq!(a.body_json().unwrap(), b.body_json().unwrap());
    }

    #[test]
    fn eval_scope_full_scores_every_row() {
        let mut config = small_config(4);
        config.eval_scope = EvalScope::Full;
        let report = run_pipeline(&config).unwrap();
        assert_eq!(report.data.eval_rows, 330);
        assert_eq!(report.data.eval_anomalies, 30);
    }

    #[test]
    fn profiling_can_be_disabled() {
        let mut config = small_config(5);
        config.profile.enabled = false;
        let report = run_pipeline(&config).unwrap();
        assert!(report.environment.resources.is_empty());
        assert!(report.models[0].model_size_bytes > 0);
    }

    #[test]
    fn scaler_never_sees_test_rows() {
        // leakage sentinel: making a test-side row extreme must not move
        // the fitted scaler, because it is fitted on training rows only
        let config = small_config(6);
        let spec = match &config.input {
            InputConfig::Synthetic { spec } => *spec,
            InputConfig::Csv { .. } => unreachable!(),
        };
        let frame = generate_synthetic(&spec, config.seed).unwrap();
        let split_seed = config.seed.wrapping_add(SPLIT_SEED_OFFSET);
        let (train_raw, _) = split_train_test(&frame, config.split_ratio, split_seed).unwrap();
        let baseline: ScalerParams = fit_minmax(&filter_normal(&train_raw).unwrap()).unwrap();

        // the shuffle depends only on the seed and row count, so overwrite
        // rows until we hit one that lands on the test side
        let mut hit_test_row = false;
        for victim in 0..frame.row_count() {
            let mut rows: Vec<Vec<f64>> =
                frame.features().iter_rows().map(<[f64]>::to_vec).collect();
            rows[victim] = vec![1e12; frame.dim()];
            let poisoned = TelemetryFrame::new(
                frame.feature_names().to_vec(),
                Matrix::from_rows(&rows).unwrap(),
                frame.labels().to_vec(),
            )
            .unwrap();
            let (train2, test2) =
                split_train_test(&poisoned, config.split_ratio, split_seed).unwrap();
            if train2 == train_raw {
                assert!(test2.features().as_slice().contains(&1e12));
                let refit = fit_minmax(&filter_normal(&train2).unwrap()).unwrap();
                assert_eq!(refit, baseline, "extreme test row changed the scaler");
                hit_test_row = true;
                break;
            }
        }
        assert!(hit_test_row, "no overwritten row landed in the test subset");
    }

    #[test]
    fn upstream_errors_carry_the_stage_name() {
        let mut config = small_config(7);
        config.input = InputConfig::Csv {
            path: "/nonexistent/telemetry.csv".into(),
            schema: Default::default(),
        };
        let err = run_pipeline(&config).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("input stage"));
    }
}
