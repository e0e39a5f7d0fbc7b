mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tinydes::selection::des_clustering_predict;
use tinydes::tinyformat::{load_tiny, TinyModel};
use tinydes::Error;

struct Counting;

thread_local! {
    static ALLOCS: Cell<usize> = const { Cell::new(0) };
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ALLOCS.with(|c| c.set(c.get() + 1));
        System.alloc(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        ALLOCS.with(|c| c.set(c.get() + 1));
        System.realloc(ptr, layout, new_size)
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

fn allocations() -> usize {
    ALLOCS.with(Cell::get)
}

#[test]
fn predict_does_not_allocate() {
    let sys = common::random_system(7);
    let probes = common::probes(&sys.held, 500, 1);
    let mut engine = load_tiny(&sys.export.bytes).unwrap();
    let before = allocations();
    let mut checksum = 0u64;
    for p in &probes {
        let (label, cost) = engine.predict(p).unwrap();
        checksum += label as u64 + cost;
    }
    assert_eq!(allocations(), before);
    assert!(checksum > 0);
}

#[test]
fn round_trip_matches_reference() {
    for seed in 0..20u64 {
        let sys = common::random_system(seed);
        let mut engine = load_tiny(&sys.export.bytes).unwrap();
        for p in common::probes(&sys.held, 500, seed) {
            let z = sys.standardizer.apply(&p).unwrap();
            let r = des_clustering_predict(&sys.cm, &sys.pool, &z).unwrap();
            assert_eq!(
                engine.predict(&p).unwrap(),
                (r.label, r.cost),
                "system {seed}"
            );
        }
    }
}

#[test]
fn export_is_byte_identical_and_reloads() {
    let a = common::random_system(3);
    let b = common::random_system(3);
    assert_eq!(a.export.bytes, b.export.bytes);
    let m = TinyModel::from_bytes(&a.export.bytes).unwrap();
    assert_eq!(m.to_bytes(), a.export.bytes);
}

#[test]
fn fuzzed_buffers_give_typed_errors() {
    let bases: Vec<Vec<u8>> = (0..4)
        .map(|s| common::random_system(100 + s).export.bytes)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let probe = vec![0.5f32; 64];
    for i in 0..20_000 {
        let base = &bases[i % bases.len()];
        let b = common::mutate(base, &mut rng);
        match load_tiny(&b) {
            Ok(mut e) => {
                let nf = e.model().n_features();
                let (label, _) = e.predict(&probe[..nf.min(64)]).unwrap_or((0, 0));
                assert!((label as usize) < e.model().n_classes().max(1));
            }
            Err(Error::Format(_) | Error::Checksum { .. } | Error::ModelCorrupt(_)) => {}
            Err(other) => panic!("case {i}: unexpected error kind {other}"),
        }
    }
}
