#![allow(dead_code)]

use std::io::Write;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tinydes::cluster::{fit_kmeans, KMeansParams};
use tinydes::data::{fit_standardizer, Dataset, Standardizer};
use tinydes::selection::{build_competence_model, CompetenceModel, Dsel};
use tinydes::synthetic;
use tinydes::tinyformat::{export_tiny, TinyExport};
use tinydes::trees::{generate_pool, ClassifierPool, ForestConfig, PoolConfig};

pub struct System {
    pub standardizer: Standardizer,
    pub pool: ClassifierPool,
    pub cm: CompetenceModel,
    pub export: TinyExport,
    pub held: Dataset,
}

/// A randomly shaped DES-Clustering system on synthetic blobs.
pub fn random_system(seed: u64) -> System {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = rng.random_range(2..=16);
    let nc = rng.random_range(2..=6);
    let spread = rng.random_range(1.0f32..4.0);
    let train = synthetic::blobs(30, nc, nf, spread, rng.random());
    let held = synthetic::blobs(30, nc, nf, spread, rng.random());
    let config = PoolConfig {
        forests: vec![
            ForestConfig {
                n_trees: rng.random_range(1..=8),
                max_depth: rng.random_range(1..=8),
            },
            ForestConfig {
                n_trees: rng.random_range(1..=6),
                max_depth: rng.random_range(0..=4),
            },
        ],
        max_features: None,
    };
    let s = fit_standardizer(&train);
    let pool = generate_pool(&s.transform(&train).unwrap(), &config, rng.random()).unwrap();
    let dsel = Dsel::from_pool(&pool, &s.transform(&held).unwrap()).unwrap();
    let k = rng.random_range(1..=6);
    let km = fit_kmeans(dsel.samples(), &KMeansParams::new(k), rng.random()).unwrap();
    let n_acc = rng.random_range(1..=pool.len());
    let j = rng.random_range(1..=n_acc);
    let cm = build_competence_model(&dsel, &km, n_acc, j).unwrap();
    let export = export_tiny(&s, &cm, &pool).unwrap();
    System {
        standardizer: s,
        pool,
        cm,
        export,
        held,
    }
}

/// Raw-space probes: held-out samples, jittered samples and wide uniform noise.
pub fn probes(held: &Dataset, n: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = held.n_features();
    (0..n)
        .map(|i| match i % 3 {
            0 => held.sample(rng.random_range(0..held.n_samples())).to_vec(),
            1 => held
                .sample(rng.random_range(0..held.n_samples()))
                .iter()
                .map(|&v| v + rng.random_range(-1.0f32..1.0))
                .collect(),
            _ => (0..nf).map(|_| rng.random_range(-20.0f32..20.0)).collect(),
        })
        .collect()
}

pub const CC_FLAGS: &[&str] = &[
    "-std=c89",
    "-pedantic",
    "-Wall",
    "-Wextra",
    "-Werror",
    "-O2",
];

pub fn have_cc() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

const DRIVER: &str = r#"#include <stdio.h>
#include "model.c"

int main(int argc, char **argv)
{
    float x[TDES_N_FEATURES];
    FILE *f;
    if (argc != 2) {
        return 2;
    }
    f = fopen(argv[1], "rb");
    if (f == NULL) {
        return 3;
    }
    printf("rom %lu\n", (unsigned long)(sizeof tdes_mean + sizeof tdes_inv_std + sizeof tdes_centroids
        + sizeof tdes_ensembles + sizeof tdes_node_offset + sizeof tdes_node_count
        + sizeof tdes_feature + sizeof tdes_threshold + sizeof tdes_right_jump));
    while (fread(x, sizeof x[0], TDES_N_FEATURES, f) == TDES_N_FEATURES) {
        int label = tinydes_predict(x);
        printf("%d %lu\n", label, tinydes_last_cost());
    }
    fclose(f);
    return 0;
}
"#;

pub struct COutput {
    pub rom: u64,
    pub predictions: Vec<(u16, u64)>,
}

/// Compiles `source` with the strict flags and runs it over `probes`.
pub fn run_c(dir: &Path, source: &str, probes: &[Vec<f32>]) -> Result<COutput, String> {
    std::fs::write(dir.join("model.c"), source).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("driver.c"), DRIVER).map_err(|e| e.to_string())?;
    let mut f = std::fs::File::create(dir.join("probes.bin")).map_err(|e| e.to_string())?;
    for p in probes {
        for v in p {
            f.write_all(&v.to_ne_bytes()).map_err(|e| e.to_string())?;
        }
    }
    drop(f);
    // the model alone must also compile as its own translation unit
    let obj = Command::new("cc")
        .args(CC_FLAGS)
        .args(["-c", "model.c", "-o", "model.o"])
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !obj.status.success() {
        return Err(format!("model.c: {}", String::from_utf8_lossy(&obj.stderr)));
    }
    let build = Command::new("cc")
        .args(CC_FLAGS)
        .args(["driver.c", "-o", "driver"])
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !build.status.success() {
        return Err(format!(
            "driver.c: {}",
            String::from_utf8_lossy(&build.stderr)
        ));
    }
    let run = Command::new(dir.join("driver"))
        .arg(dir.join("probes.bin"))
        .output()
        .map_err(|e| e.to_string())?;
    if !run.status.success() {
        return Err(format!("driver exited with {}", run.status));
    }
    let text = String::from_utf8(run.stdout).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let rom = lines
        .next()
        .and_then(|l| l.strip_prefix("rom "))
        .and_then(|v| v.parse().ok())
        .ok_or("missing rom line")?;
    let predictions = lines
        .map(|l| {
            let (a, b) = l.split_once(' ').ok_or("bad line")?;
            Ok((
                a.parse().map_err(|_| "bad label")?,
                b.parse().map_err(|_| "bad cost")?,
            ))
        })
        .collect::<Result<_, &str>>()?;
    Ok(COutput { rom, predictions })
}

/// One mutated variant of a valid model image. Half of the mutations re-seal
/// the checksum so they reach the structural checks.
pub fn mutate(base: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut b = base.to_vec();
    match rng.random_range(0..7) {
        0 => b.truncate(rng.random_range(0..b.len())),
        1 => {
            for _ in 0..rng.random_range(1..4) {
                let i = rng.random_range(0..b.len());
                b[i] ^= 1 << rng.random_range(0..8);
            }
        }
        2 => {
            let i = rng.random_range(0..b.len());
            b[i] = rng.random();
        }
        3 => {
            let extra = rng.random_range(1..16);
            b.extend((0..extra).map(|_| rng.random::<u8>()));
        }
        4 => {
            let n = rng.random_range(0..96);
            b = (0..n).map(|_| rng.random()).collect();
            if n >= 4 && rng.random_bool(0.5) {
                b[..4].copy_from_slice(b"TDES");
            }
        }
        _ => {
            for _ in 0..rng.random_range(1..4) {
                let i = rng.random_range(0..b.len() - 4);
                b[i] = rng.random();
            }
            if rng.random_bool(0.3) {
                // header field at an aligned offset, keeping magic and version
                let i = rng.random_range(6..24);
                b[i] = rng.random();
            }
            reseal(&mut b);
        }
    }
    b
}

pub fn reseal(b: &mut [u8]) {
    if b.len() >= 4 {
        let body = b.len() - 4;
        let crc = crc32fast::hash(&b[..body]);
        b[body..].copy_from_slice(&crc.to_le_bytes());
    }
}
