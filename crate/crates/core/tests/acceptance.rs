//! One PASS/FAIL line per acceptance criterion. Exits non-zero on any FAIL.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::{
    auc_oracle, f1_oracle, low_rank_view, max_relative_error, numeric_grad, random_grad_instance, random_graph,
    random_metric_instance, random_view, rmse_where, shared_views, Incidence,
};
use facetseg::concept::{
    barabasi_albert, build_embedding, concept_events, cond_prob, cosine_graph, gcca_fuse, jaccard, milne_witten,
    nmf_complete, pmi, principal_angles, ConceptConfig,
};
use facetseg::corpus::{
    build_vocabulary, clean_pages, select_urls, CleanPage, Facet, LabelSource, SiteCorpus, SiteDocument, TextChunk,
    DEFAULT_KEYWORDS,
};
use facetseg::eval::{auc, micro_f1, run_experiment_1, run_experiment_2, ExperimentConfig};
use facetseg::kg::{read_event_log, write_event_log, KnowledgeGraph, UpsertOutcome};
use facetseg::model::{grad, save_model, train, FacetSpec, ModelConfig};
use facetseg::synth::{LinkGraphConfig, SynthConcepts, SynthConfig, SynthWorld};
use nalgebra::DMatrix;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

fn relatedness() -> Check {
    let t = Instant::now();
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    };
    let mut compared = 0usize;
    for seed in 0..50 {
        let g = random_graph(30, 12, 0.05 + 0.01 * seed as f64, seed);
        let o = Incidence::of(&g);
        let ids = g.concepts();
        for a in &ids {
            for b in &ids {
                let got = [
                    milne_witten(a, b, &g).ok(),
                    jaccard(a, b, &g).ok(),
                    cond_prob(a, b, &g).ok(),
                    pmi(a, b, &g).ok(),
                    barabasi_albert(a, b, &g).ok(),
                ];
                let want =
                    [o.milne_witten(a, b), Some(o.jaccard(a, b)), o.cond_prob(a, b), o.pmi(a, b), o.barabasi_albert(a, b)];
                for (m, (x, y)) in got.iter().zip(want).enumerate() {
                    ensure(close(*x, y), || format!("graph {seed} measure {m} ({a},{b}): {x:?} vs {y:?}"))?;
                }
                for m in [milne_witten, jaccard, pmi, barabasi_albert] {
                    ensure(m(a, b, &g).ok() == m(b, a, &g).ok(), || format!("graph {seed}: asymmetric ({a},{b})"))?;
                }
                compared += 1;
            }
        }
    }
    within(t, Duration::from_secs(5))?;
    Ok(format!("{compared} pairs over 50 graphs in {:.2?}", t.elapsed()))
}

fn nmf() -> Check {
    let t = Instant::now();
    for seed in 0..20 {
        let view = random_view(20, 0.7, 0.0, 1.0, seed);
        let out = nmf_complete(&view, 4, 200, seed).map_err(|e| format!("view {seed}: {e}"))?;
        ensure(out.loss_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), || format!("view {seed}: loss rose"))?;
    }
    let lr = low_rank_view(20, 2, 0.2, 11);
    let out = nmf_complete(&lr.view, 2, 500, 7).map_err(|e| e.to_string())?;
    let fit = rmse_where(&out.completed, &lr.truth, &lr.view.mask, true);
    ensure(fit < 0.05, || format!("observed rmse {fit}"))?;
    within(t, Duration::from_secs(10))?;
    Ok(format!("20 views monotone, rank-2 rmse {fit:.2e} in {:.2?}", t.elapsed()))
}

fn gcca() -> Check {
    let t = Instant::now();
    let orth = |g: &DMatrix<f64>| (g.transpose() * g - DMatrix::identity(g.ncols(), g.ncols())).abs().max();
    let (g0, xs) = shared_views(40, 3, 3, 1e-3, 4);
    let emb = gcca_fuse(&xs, 3, 1e-6).map_err(|e| e.to_string())?;
    let err = orth(&emb.g);
    ensure(err < 1e-8, || format!("orthonormality {err:e}"))?;
    let angle = principal_angles(&emb.g, &g0).into_iter().fold(0.0, f64::max).to_degrees();
    ensure(angle < 5.0, || format!("max angle {angle}"))?;
    let x = common::random_matrix(12, 4, 1).qr().q();
    let single = gcca_fuse(std::slice::from_ref(&x), 4, 0.0).map_err(|e| e.to_string())?;
    let residual = single.residual(std::slice::from_ref(&x));
    ensure(residual < 1e-10, || format!("single-view residual {residual:e}"))?;
    within(t, Duration::from_secs(5))?;
    Ok(format!("orth {err:.1e}, angle {angle:.3} deg, residual {residual:.1e}"))
}

fn gradients() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let inst = random_grad_instance(seed);
        let analytic: Vec<f64> = grad(&inst.batch, &inst.params).map_err(|e| e.to_string())?.values().concat();
        let numeric = numeric_grad(&inst.params, &inst.batch, 1e-4);
        worst = worst.max(max_relative_error(&analytic, &numeric, 1e-7));
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("100 instances, max relative error {worst:.2e}"))
}

fn metrics() -> Check {
    for seed in 0..100 {
        let inst = random_metric_instance(seed, 200);
        let f1 = micro_f1(&inst.pred, &inst.gold).map_err(|e| e.to_string())?;
        let want = f1_oracle(&inst.pred, &inst.gold, &inst.labels);
        ensure(f1 == want, || format!("instance {seed}: f1 {f1} vs {want}"))?;
        match (auc(&inst.scores).ok(), auc_oracle(&inst.scores)) {
            (Some(x), Some(y)) => ensure((x - y).abs() <= 1e-12, || format!("instance {seed}: auc {x} vs {y}"))?,
            (None, None) => {}
            (x, y) => return Err(format!("instance {seed}: auc {x:?} vs {y:?}")),
        }
    }
    let set = |ls: &[&str]| ls.iter().map(|l| l.to_string()).collect::<BTreeSet<_>>();
    let gold: BTreeMap<String, _> = [("s1".into(), set(&["A"])), ("s2".into(), set(&["A", "B"]))].into();
    let pred: BTreeMap<String, _> = [("s1".into(), set(&["A", "B"])), ("s2".into(), set(&["A"]))].into();
    let hand = micro_f1(&pred, &gold).map_err(|e| e.to_string())?;
    ensure((hand - 0.666667).abs() < 1e-6, || format!("hand example {hand}"))?;
    Ok(format!("100 instances exact, hand example {hand:.6}"))
}

fn spec_for(corpus: &SiteCorpus, facet: Facet) -> FacetSpec {
    FacetSpec::new(facet, corpus.label_space(facet).to_vec()).expect("label space")
}

fn end_to_end() -> Check {
    let t = Instant::now();
    let mut config = SynthConfig { n_external: 150, ..Default::default() };
    config.randomized_external.insert("manufacturer".into());
    let world = SynthWorld::generate(&config);
    let internal = world.internal_corpus().map_err(|e| e.to_string())?;
    let external = world.external_corpus().map_err(|e| e.to_string())?;
    let ec = ExperimentConfig::default();
    let mut detail = Vec::new();
    for facet in [Facet::Industry, Facet::Role] {
        let spec = spec_for(&internal, facet);
        let r = run_experiment_1(&internal.sites, &external.sites, &spec, &world.table, &ec).map_err(|e| e.to_string())?;
        let (without, with) = (r.without_external.micro_f1, r.with_external.micro_f1);
        ensure(without >= 0.8, || format!("{facet}: held-out micro-F1 {without:.3}"))?;
        ensure(with >= without, || format!("{facet}: with-external {with:.3} < without {without:.3}"))?;
        detail.push(format!("{facet} {without:.3}->{with:.3}"));
    }
    let mut gap = |facet, class: &str| -> Result<f64, String> {
        let spec = spec_for(&internal, facet);
        let r = run_experiment_2(&internal.sites, &external.sites, &spec, class, &world.table, &ec)
            .map_err(|e| e.to_string())?;
        let g = r.class_f1_internal - r.class_f1_external;
        detail.push(format!("{class} gap {g:.3}"));
        Ok(g)
    };
    let agree = gap(Facet::Industry, "healthcare")?;
    ensure(agree < 0.05, || format!("agreeing-label gap {agree:.3}"))?;
    let random = gap(Facet::Role, "manufacturer")?;
    ensure(random > 0.10, || format!("randomized-label gap {random:.3}"))?;
    within(t, Duration::from_secs(120))?;
    Ok(format!("{} in {:.2?}", detail.join(", "), t.elapsed()))
}

fn determinism() -> Check {
    let world = SynthWorld::generate(&SynthConfig { n_internal: 80, ..Default::default() });
    let corpus = world.internal_corpus().map_err(|e| e.to_string())?;
    let spec = spec_for(&corpus, Facet::Role);
    let bytes = || -> Result<Vec<u8>, String> {
        let model = train(&corpus.sites, &spec, &world.table, &ModelConfig::default()).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        save_model(&model, &mut out).map_err(|e| e.to_string())?;
        Ok(out)
    };
    let (a, b) = (bytes()?, bytes()?);
    ensure(a == b, || "model files differ".into())?;

    let synth = SynthConcepts::generate(&LinkGraphConfig::default());
    let emb = build_embedding(&synth.graph, &synth.text_vectors, &ConceptConfig { k: 8, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let events = concept_events(&emb, &cosine_graph(&emb, 0.6), 1);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("events.log");
    write_event_log(&log, &events).map_err(|e| e.to_string())?;
    let replayed = read_event_log(&log).map_err(|e| e.to_string())?;
    let (g1, _) = KnowledgeGraph::replay(replayed.clone(), 1);
    let (g2, _) = KnowledgeGraph::replay(replayed.clone(), 4);
    ensure(g1.snapshot_bytes() == g2.snapshot_bytes(), || "snapshots differ".into())?;
    let outcomes: Vec<UpsertOutcome> = replayed.into_iter().map(|e| g1.upsert(e)).collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(outcomes.iter().all(|o| *o == UpsertOutcome::Unchanged), || "re-ingest changed the graph".into())?;
    Ok(format!("model {} bytes identical, {} events replayed, re-ingest unchanged", a.len(), events.len()))
}

fn corpus_rules() -> Check {
    let tokens = |t: &str, n: usize| vec![t.to_string(); n];
    let page = |toks: Vec<String>| {
        CleanPage::new(
            "https://x.com/",
            vec![TextChunk { tokens: toks, source_block: "p".into(), index_in_page: 0 }],
        )
    };
    let site = |toks: Vec<String>| SiteDocument {
        domain: "x.com".into(),
        pages: vec![page(toks)],
        labels: BTreeMap::new(),
        label_source: LabelSource::Internal,
    };
    let known: BTreeSet<String> = ["nine", "ten"].map(String::from).into();
    let mut toks = tokens("nine", 9);
    toks.extend(tokens("ten", 10));
    let vocab = build_vocabulary(&[site(toks)], &known, 10).map_err(|e| e.to_string())?;
    ensure(vocab.contains("ten") && !vocab.contains("nine"), || "frequency 9 vs 10 boundary".into())?;

    ensure(clean_pages(&[page(tokens("ten", 19))], &known, 20).is_empty(), || "19-token page kept".into())?;
    ensure(clean_pages(&[page(tokens("ten", 20))], &known, 20).len() == 1, || "20-token page dropped".into())?;

    let urls = ["https://x.com/", "https://x.com/about_us", "https://x.com/blog/cats", "https://x.com/products/a"];
    let selected = select_urls(&urls.map(String::from), &DEFAULT_KEYWORDS.map(String::from));
    let want = ["https://x.com/", "https://x.com/about_us", "https://x.com/products/a"];
    ensure(selected == want, || format!("selected {selected:?}"))?;
    Ok("frequency 9/10, page tokens 19/20, about_us selected".into())
}

fn main() {
    let checks: [(&str, fn() -> Check); 8] = [
        ("relatedness oracle", relatedness),
        ("nmf", nmf),
        ("gcca", gcca),
        ("gradients", gradients),
        ("metrics oracle", metrics),
        ("end-to-end synthetic", end_to_end),
        ("determinism", determinism),
        ("corpus rules", corpus_rules),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
