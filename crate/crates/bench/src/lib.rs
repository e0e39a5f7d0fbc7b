//! Shared fixtures for the criterion benches: an MNIST-shaped synthetic
//! workload with the default 45-tree pool and k = 5 clusters.

use tinydes::cluster::{fit_kmeans, KMeansModel, KMeansParams};
use tinydes::data::{fit_standardizer, stratified_split, Dataset, Standardizer};
use tinydes::selection::{build_competence_model, Dsel};
use tinydes::synthetic;
use tinydes::tinyformat::{export_tiny, load_tiny, TinyEngine};
use tinydes::trees::{generate_pool, ClassifierPool, PoolConfig};
use tinydes::CompetenceModel;

pub const J_VALUES: [usize; 4] = [5, 10, 15, 20];
pub const CLUSTERS: usize = 5;
pub const N_ACC: usize = 30;

pub struct Workload {
    /// Standardized pool-training split.
    pub train: Dataset,
    pub standardizer: Standardizer,
    pub pool: ClassifierPool,
    pub dsel: Dsel,
    pub kmeans: KMeansModel,
    /// Raw-space held-out probes.
    pub probes: Vec<Vec<f32>>,
}

/// 28x28 byte images, `per_class` of each of 10 classes, split in half between
/// pool training and DSEL.
pub fn workload(per_class: usize) -> Workload {
    let data = synthetic::byte_images(per_class, 10, 784, 0.35, 1);
    let (pool_train, dsel_raw) = stratified_split(&data, 0.5, 2).expect("split");
    let standardizer = fit_standardizer(&pool_train);
    let train = standardizer.transform(&pool_train).expect("transform");
    let pool = generate_pool(&train, &PoolConfig::default(), 3).expect("pool");
    let dsel = Dsel::from_pool(
        &pool,
        &standardizer.transform(&dsel_raw).expect("transform"),
    )
    .expect("dsel");
    let kmeans = fit_kmeans(dsel.samples(), &KMeansParams::new(CLUSTERS), 4).expect("kmeans");
    let probes = synthetic::byte_images(20, 10, 784, 0.35, 5)
        .features()
        .iter_rows()
        .map(<[f32]>::to_vec)
        .collect();
    Workload {
        train,
        standardizer,
        pool,
        dsel,
        kmeans,
        probes,
    }
}

impl Workload {
    pub fn competence(&self, j: usize) -> CompetenceModel {
        build_competence_model(&self.dsel, &self.kmeans, N_ACC, j).expect("competence model")
    }

    pub fn engine(&self, j: usize) -> TinyEngine {
        let export =
            export_tiny(&self.standardizer, &self.competence(j), &self.pool).expect("export");
        load_tiny(&export.bytes).expect("load")
    }
}
