//! Repeated stratified cross-validation of every selection method on a shared
//! pool per fold, with accuracy, cost and timing reports.

mod config;
mod report;
mod run;

pub use config::{
    DatasetSource, DatasetSpec, ExperimentConfig, KMeansSettings, Method, TimingConfig,
    DESK_SCALE_SAMPLES,
};
pub use report::{emit_report, folds_csv, render_table, summary_csv, timing_csv};
pub use run::{
    dataset_seed, mean_std, measure_inference, run_experiment, run_experiment_with, train_model,
    FoldRecord, FoldScore, InferenceStats, ResultRow, ResultTable, TimingRecord, TrainedModel,
};

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs_cfg(methods: Vec<Method>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::full(vec![DatasetSpec {
            name: "blobs".into(),
            source: DatasetSource::Blobs {
                per_class: 50,
                n_classes: 4,
                n_features: 5,
                spread: 2.5,
                seed: 3,
            },
        }]);
        cfg.methods = methods;
        cfg.timing.probes = 20;
        cfg
    }

    #[test]
    fn oracle_dominates_single_best() {
        let cfg = blobs_cfg(vec![Method::SingleBest, Method::Oracle]);
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.rows.len(), 2);
        let sb = t.row("blobs", Method::SingleBest, None).unwrap();
        let or = t.row("blobs", Method::Oracle, None).unwrap();
        assert_eq!((sb.n_folds, or.n_folds), (10, 10));
        assert!(or.mean_accuracy >= sb.mean_accuracy);
    }

    #[test]
    fn all_methods_share_one_pool_per_fold() {
        let t = run_experiment(&blobs_cfg(Method::ALL.to_vec())).unwrap();
        assert_eq!(t.rows.len(), 9);
        assert!(t.rows.iter().all(|r| r.failure.is_none()), "{:?}", t.rows);
        for r in 0..2 {
            for f in 0..5 {
                let fps: Vec<u32> = t
                    .folds
                    .iter()
                    .filter(|x| x.repeat == r && x.fold == f)
                    .map(|x| x.pool_fingerprint)
                    .collect();
                assert_eq!(fps.len(), 9);
                assert!(fps.iter().all(|&fp| fp == fps[0]));
                let acc = |m: Method, j: Option<usize>| {
                    t.folds
                        .iter()
                        .find(|x| x.repeat == r && x.fold == f && x.method == m && x.j == j)
                        .unwrap()
                        .outcome
                        .as_ref()
                        .unwrap()
                        .accuracy
                };
                let oracle = acc(Method::Oracle, None);
                for (m, j) in run::cells(&t.config) {
                    assert!(oracle >= acc(m, j));
                }
            }
        }
        // cost grows with J
        let costs: Vec<f64> = [5, 10, 15, 20]
            .iter()
            .map(|&j| {
                t.row("blobs", Method::DesClustering, Some(j))
                    .unwrap()
                    .mean_cost
            })
            .collect();
        assert!(costs.windows(2).all(|w| w[0] < w[1]), "{costs:?}");
    }

    #[test]
    fn summary_recomputes_from_folds() {
        let t = run_experiment(&blobs_cfg(vec![
            Method::SingleBest,
            Method::StaticSelection,
        ]))
        .unwrap();
        let csv = folds_csv(&t);
        for row in &t.rows {
            let accs: Vec<f64> = csv
                .lines()
                .skip(1)
                .map(|l| l.split(',').collect::<Vec<_>>())
                .filter(|c| c[1] == row.method.key())
                .map(|c| c[8].parse().unwrap())
                .collect();
            assert_eq!(mean_std(&accs), (row.mean_accuracy, row.std_accuracy));
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = blobs_cfg(vec![
            Method::SingleBest,
            Method::DesClustering,
            Method::Oracle,
        ]);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_report(&run_experiment(&cfg).unwrap(), a.path()).unwrap();
        emit_report(&run_experiment(&cfg).unwrap(), b.path()).unwrap();
        for name in ["folds.csv", "summary.csv", "table.txt", "config.toml"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
        let table = std::fs::read_to_string(a.path().join("table.txt")).unwrap();
        let order: Vec<usize> = [
            "Single Best",
            "DES-Clustering_5",
            "DES-Clustering_20",
            "Oracle",
        ]
        .iter()
        .map(|m| table.find(m).unwrap())
        .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
        let summary = std::fs::read_to_string(a.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + 6);
    }

    #[test]
    fn seed_isolation_across_dataset_lists() {
        let one = blobs_cfg(vec![Method::SingleBest]);
        let mut two = one.clone();
        two.datasets.insert(
            0,
            DatasetSpec {
                name: "other".into(),
                source: DatasetSource::Blobs {
                    per_class: 20,
                    n_classes: 2,
                    n_features: 3,
                    spread: 1.0,
                    seed: 9,
                },
            },
        );
        let a = run_experiment(&one).unwrap();
        let b = run_experiment(&two).unwrap();
        let pick = |t: &ResultTable| -> Vec<FoldRecord> {
            t.folds
                .iter()
                .filter(|f| f.dataset == "blobs")
                .cloned()
                .collect()
        };
        assert_eq!(pick(&a), pick(&b));
    }

    #[test]
    fn failed_method_is_recorded_and_run_continues() {
        let mut cfg = blobs_cfg(vec![Method::KnoraU, Method::Oracle]);
        cfg.k_neighbors = 10_000;
        let t = run_experiment(&cfg).unwrap();
        assert!(t
            .row("blobs", Method::KnoraU, None)
            .unwrap()
            .failure
            .is_some());
        assert!(t
            .row("blobs", Method::Oracle, None)
            .unwrap()
            .failure
            .is_none());
        assert!(render_table(&t).contains("Failures"));
    }

    #[test]
    fn measure_inference_costs_are_stable() {
        let sys = crate::tinyformat::tests::leaf_export(1);
        let mut engine = crate::tinyformat::load_tiny(&sys.bytes).unwrap();
        let probes = crate::synthetic::blobs(5, 2, 2, 1.0, 1);
        let s = measure_inference(&mut engine, &probes, 1, 3).unwrap();
        assert_eq!(s.mean_cost, 2.0);
        assert_eq!(s.n_probes, 10);
    }
}
