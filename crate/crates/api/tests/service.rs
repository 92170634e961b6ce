mod common;

use common::{domains_with, fixture, jsonl, pages_of, service_in};
use facetseg::concept::ClusterStatus;
use facetseg::Facet;
use facetseg_api::service::{read_decisions, Decision, LeadQuery};
use facetseg_api::{Assets, Config, Service};

#[test]
fn ingest_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service_in(dir.path());
    let picks = domains_with("healthcare");
    let body = jsonl(&pages_of(&[&picks[0], &picks[1]]));
    let first = svc.ingest_jsonl(&body).unwrap();
    assert_eq!((first.inserted, first.updated, first.unchanged), (2, 0, 0));
    let again = svc.ingest_jsonl(&body).unwrap();
    assert_eq!((again.inserted, again.unchanged), (0, 2));
}

#[test]
fn malformed_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service_in(dir.path());
    let picks = domains_with("retail");
    let mut body = jsonl(&pages_of(&[&picks[0]])).lines().take(2).map(|l| format!("{l}\n")).collect::<String>();
    body.push_str("{\"domain\": oops\n");
    let err = svc.ingest_jsonl(&body).unwrap_err();
    assert_eq!(err.status, 400);
    assert_eq!(err.line, Some(3));
}

#[test]
fn changed_content_updates_and_older_fetch_is_stale() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service_in(dir.path());
    let d = &domains_with("education")[0];
    let mut pages = pages_of(&[d]);
    svc.ingest_pages(&pages).unwrap();
    for p in &mut pages {
        p.fetched_at += 10;
    }
    pages[0].html = pages[1].html.clone();
    assert_eq!(svc.ingest_pages(&pages).unwrap().updated, 1);
    for p in &mut pages {
        p.fetched_at -= 20;
    }
    let err = svc.ingest_pages(&pages).unwrap_err();
    assert_eq!(err.status, 409);
    assert_eq!(err.report.unwrap().rejected.len(), 1);
}

#[test]
fn classify_finds_the_true_industry() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service_in(dir.path());
    let picks = domains_with("healthcare");
    svc.ingest_pages(&pages_of(&[&picks[0]])).unwrap();
    let out = svc.classify(&picks[0], "industry").unwrap();
    let top = out.probs.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert_eq!(top.0, "healthcare");
    assert_eq!(out.per_page.len(), 3);
    let detail = svc.company(&picks[0]).unwrap();
    assert_eq!(detail.probs[&Facet::Industry], out.probs);

    assert_eq!(svc.classify("nowhere.example", "industry").unwrap_err().status, 404);
    let err = svc.classify(&picks[0], "color").unwrap_err();
    assert_eq!(err.status, 400);
    assert!(err.message.contains("unknown facet"));
}

#[test]
fn classify_without_model_is_a_conflict() {
    let svc = Service::new(Config::default(), Assets { table: Some(fixture().world.table.clone()), ..Default::default() })
        .unwrap();
    let d = &domains_with("retail")[0];
    svc.ingest_pages(&pages_of(&[d])).unwrap();
    assert_eq!(svc.classify(d, "role").unwrap_err().status, 409);
}

#[test]
fn leads_rank_by_product_of_cached_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service_in(dir.path());
    let hc = domains_with("healthcare");
    let rt = domains_with("retail");
    let domains = [hc[0].as_str(), hc[1].as_str(), rt[0].as_str()];
    svc.ingest_pages(&pages_of(&domains)).unwrap();
    for d in domains {
        svc.classify(d, "industry").unwrap();
        svc.classify(d, "role").unwrap();
    }
    let query = LeadQuery {
        industries: ["healthcare".to_string()].into(),
        roles: ["manufacturer".to_string()].into(),
        min_prob: 0.0,
        limit: 10,
    };
    let leads = svc.leads(&query).unwrap();
    assert_eq!(leads.len(), 3);
    for l in &leads {
        let product = l.probs[&Facet::Industry]["healthcare"] * l.probs[&Facet::Role]["manufacturer"];
        assert_eq!(l.score, product);
    }
    assert!(leads.windows(2).all(|w| w[0].score >= w[1].score));
    assert!(leads.iter().take(2).all(|l| hc.contains(&l.domain)));

    assert!(svc.leads(&LeadQuery { min_prob: 1.0, ..query.clone() }).unwrap().is_empty());
    let err = svc.leads(&LeadQuery { roles: ["wholesaler".to_string()].into(), ..query.clone() }).unwrap_err();
    assert_eq!(err.status, 400);
    let err = svc.leads(&LeadQuery::default()).unwrap_err();
    assert_eq!((err.status, err.message.as_str()), (400, "empty query"));
}

#[test]
fn concept_graph_shrinks_with_theta() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service_in(dir.path());
    let low = svc.concept_graph(0.3).unwrap();
    let high = svc.concept_graph(0.9).unwrap();
    let key = |e: &facetseg::concept::ConceptEdge| (e.a.clone(), e.b.clone());
    let low_set: std::collections::BTreeSet<_> = low.edges.iter().map(key).collect();
    assert!(high.edges.iter().all(|e| low_set.contains(&key(e))));
    assert!(high.edges.len() <= low.edges.len());
    assert_eq!(svc.concept_graph(2.0).unwrap_err().status, 400);

    let some = &low.nodes[0];
    let n = svc.concept_neighbors(some, 0.0).unwrap();
    assert!(n.neighbors.windows(2).all(|w| w[0].weight >= w[1].weight));
    assert!(n.neighbors.iter().all(|x| x.weight >= 0.6));
    assert_eq!(svc.concept_neighbors("no-such-concept", 0.0).unwrap_err().status, 404);

    let bare = Service::new(Config::default(), Assets::default()).unwrap();
    let err = bare.concept_graph(0.6).unwrap_err();
    assert_eq!((err.status, err.message.as_str()), (409, "embedding not built"));
}

#[test]
fn cluster_decisions_persist_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service_in(dir.path());
    let clusters = svc.clusters();
    assert!(clusters.len() >= 2);
    assert!(clusters.iter().all(|c| c.cluster.status == ClusterStatus::Proposed));
    let (a, b, c) = (&clusters[0].cluster.id, &clusters[1].cluster.id, &clusters.last().unwrap().cluster.id);

    let approve = Decision { status: ClusterStatus::Approved, merge_into: None };
    let out = svc.decide(a, &approve, "ana").unwrap();
    assert_eq!(out.cluster.status, ClusterStatus::Approved);
    assert_eq!(out.decided_by.as_deref(), Some("ana"));
    assert_eq!(svc.decide(a, &approve, "ana").unwrap_err().status, 409);

    let merge = Decision { status: ClusterStatus::Merged, merge_into: None };
    assert_eq!(svc.decide(b, &merge, "ana").unwrap_err().status, 400);
    let merge = Decision { status: ClusterStatus::Merged, merge_into: Some(c.clone()) };
    assert_eq!(svc.decide(b, &merge, "ana").unwrap().merge_into.as_deref(), Some(c.as_str()));
    assert_eq!(svc.decide("cl-missing", &approve, "ana").unwrap_err().status, 404);
    drop(svc);

    let log = read_decisions(&dir.path().join("decisions.jsonl")).unwrap();
    assert_eq!(log.len(), 2);
    let restarted = service_in(dir.path());
    assert_eq!(restarted.cluster(a).unwrap().cluster.status, ClusterStatus::Approved);
    assert_eq!(restarted.cluster(b).unwrap().cluster.status, ClusterStatus::Merged);
    assert_eq!(restarted.cluster(c).unwrap().cluster.status, ClusterStatus::Proposed);
    assert_eq!(restarted.clusters().len(), clusters.len());
}

#[test]
fn ingested_companies_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let d = domains_with("transportation")[0].clone();
    let before = {
        let svc = service_in(dir.path());
        svc.ingest_pages(&pages_of(&[&d])).unwrap();
        svc.knowledge_graph().snapshot_bytes()
    };
    let svc = service_in(dir.path());
    assert_eq!(svc.knowledge_graph().snapshot_bytes(), before);
    assert_eq!(svc.ingest_pages(&pages_of(&[&d])).unwrap().unchanged, 1);
    assert!(svc.company(&d).unwrap().probs.is_empty());
}
