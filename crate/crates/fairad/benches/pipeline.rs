//! Criterion benchmarks of the data-parallel stages, comparing the rayon
//! path against single-threaded execution of the same code.
//!
//! With the default `parallel` feature the suite registers a
//! `single_thread` variant that runs inside a one-worker rayon pool, so one
//! `cargo bench` run reports both. Building with `--no-default-features`
//! benches the plain sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fairad::{
    build_algebraic_affinity, build_fairness_matrix, build_hierarchy, msbm_generate,
    relax_test_vectors, run_fairad, run_sc, solve_indicator, AnchorSet, AnchoredSystem,
    CoarseningConfig, FairadConfig, MsbmConfig, ScConfig,
};

struct Fixture {
    instance: fairad::MsbmInstance,
    fairness: fairad::FairnessMatrix,
    affinity: fairad::AlgebraicAffinity,
    anchors: AnchorSet,
    relaxation: fairad::RelaxationConfig,
}

fn fixture(n: usize) -> Fixture {
    let cfg = MsbmConfig::with_default_probabilities(n, 2, 4, 7);
    let instance = msbm_generate(&cfg).expect("generator");
    let fairness = build_fairness_matrix(&instance.groups).expect("fairness matrix");
    let relaxation = fairad::RelaxationConfig::for_graph(n, 7);
    let tv = relax_test_vectors(&instance.graph, &fairness, &relaxation).expect("test vectors");
    let affinity =
        build_algebraic_affinity(&instance.graph, &tv, relaxation.beta).expect("affinity");
    let hierarchy = build_hierarchy(affinity.graph(), &CoarseningConfig::default()).expect("hierarchy");
    // Anchor the planted truth at the coarsest usable level so the solve
    // benchmark is deterministic and independent of k-means.
    let level = fairad::select_coarse_level(&hierarchy, 30).expect("level");
    let ids = hierarchy.original_ids(level);
    let labels: Vec<usize> = ids.iter().map(|&i| instance.truth[i]).collect();
    let anchors = AnchorSet::new(n, cfg.k, ids, labels).expect("anchors");
    Fixture {
        instance,
        fairness,
        affinity,
        anchors,
        relaxation,
    }
}

/// Run `f` both on the ambient rayon pool and pinned to one worker.
fn bench_both<F: Fn() + Sync>(c: &mut Criterion, group: &str, param: usize, f: F) {
    let mut g = c.benchmark_group(group);
    #[cfg(feature = "parallel")]
    {
        g.bench_with_input(BenchmarkId::new("parallel", param), &param, |b, _| {
            b.iter(&f)
        });
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        g.bench_with_input(BenchmarkId::new("single_thread", param), &param, |b, _| {
            b.iter(|| pool.install(&f))
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        g.bench_with_input(BenchmarkId::new("sequential", param), &param, |b, _| {
            b.iter(&f)
        });
    }
    g.finish();
}

fn bench_test_vectors(c: &mut Criterion) {
    let n = 2000;
    let fx = fixture(n);
    bench_both(c, "test_vectors", n, || {
        relax_test_vectors(&fx.instance.graph, &fx.fairness, &fx.relaxation).expect("relaxation");
    });
}

fn bench_coarsening(c: &mut Criterion) {
    let n = 2000;
    let fx = fixture(n);
    bench_both(c, "coarsening", n, || {
        build_hierarchy(fx.affinity.graph(), &CoarseningConfig::default()).expect("hierarchy");
    });
}

fn bench_indicator_solves(c: &mut Criterion) {
    let n = 2000;
    let fx = fixture(n);
    let system = AnchoredSystem::new(fx.affinity.graph(), &fx.anchors, 1e9).expect("system");
    bench_both(c, "indicator_solves", n, || {
        for i in 0..fx.anchors.num_clusters() {
            solve_indicator(&system, i, 1e-8, 10 * n).expect("solve");
        }
    });
}

fn bench_end_to_end(c: &mut Criterion) {
    let n = 1000;
    let fx = fixture(n);
    let cfg = FairadConfig::for_graph(n, 7);
    bench_both(c, "fairad_end_to_end", n, || {
        run_fairad(&fx.instance.graph, &fx.instance.groups, 4, &cfg).expect("fairad");
    });
    let sc_cfg = ScConfig::new(4, 7);
    bench_both(c, "sc_end_to_end", n, || {
        run_sc(&fx.instance.graph, &sc_cfg).expect("sc");
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_test_vectors, bench_coarsening, bench_indicator_solves, bench_end_to_end
}
criterion_main!(benches);
