use concept_realm::analytics::{
    detect_leavers, evaluate_alignment, turnover_impact, AlignmentConfig, DEFAULT_LEAVER_RATIO,
};
use concept_realm::corpus::{
    group_by_project, vectorize, Document, PreparedDoc, Preprocessor, ProjectCorpus, Vocabulary, VocabularyOptions,
};
use concept_realm::realm::{
    absolute_frequency, build_realm, developer_acf, developer_frequencies, issue_frequency, ConceptRealm, Scope,
    Windowing,
};
use concept_realm::synth::{matched_cosine, planted_rows, planted_topics, synth_project, LeaverPlan, ProjectConfig, TopicsConfig};
use concept_realm::topicmodel::{infer_document, top_terms, train_lda, LdaModel, TrainConfig};

fn project(issues: Vec<concept_realm::corpus::RawIssue>, comments: Vec<concept_realm::corpus::RawComment>) -> ProjectCorpus {
    group_by_project(issues, comments).remove(0)
}

fn vectorized(prepared: &[PreparedDoc], no_below: usize) -> (Vec<Document>, Vocabulary) {
    let options = VocabularyOptions { no_below, ..Default::default() };
    let vocab = options.build(prepared).unwrap().vocabulary;
    let docs = prepared.iter().map(|d| vectorize(d, &vocab)).collect();
    (docs, vocab)
}

fn fast(k: usize, seed: u64) -> TrainConfig {
    TrainConfig { iterations: 300, burn_in: 100, ..TrainConfig::new(k, seed) }
}

fn realm_of(cfg: &ProjectConfig, k: usize) -> (ConceptRealm, LdaModel) {
    let p = synth_project(cfg).unwrap();
    let corpus = project(p.issues, p.comments);
    let prepared = Preprocessor::default().prepare(&corpus);
    let (docs, vocab) = vectorized(&prepared, 5);
    let model = train_lda(&docs, &vocab, &fast(k, cfg.seed)).unwrap();
    let (realm, rejected) = build_realm(&cfg.project_key, &docs, &model, Windowing::Yearly, 50).unwrap();
    assert!(rejected.is_empty());
    (realm, model)
}

#[test]
fn planted_topics_are_recovered() {
    let planted = planted_topics(&TopicsConfig::new(3, 11)).unwrap();
    let corpus = project(planted.issues.clone(), Vec::new());
    let (docs, vocab) = vectorized(&Preprocessor::default().prepare(&corpus), 15);
    assert_eq!(vocab.len(), 30);
    let model = train_lda(&docs, &vocab, &TrainConfig::new(3, 11)).unwrap();
    let score = matched_cosine(model.phi(), &planted_rows(&planted, vocab.terms()));
    assert!(score >= 0.9, "matched cosine {score}");
}

#[test]
fn planted_topics_drive_inference_and_top_terms() {
    let planted = planted_topics(&TopicsConfig::new(3, 4)).unwrap();
    let corpus = project(planted.issues.clone(), Vec::new());
    let prepared = Preprocessor::default().prepare(&corpus);
    let (docs, vocab) = vectorized(&prepared, 15);
    let model = train_lda(&docs, &vocab, &TrainConfig::new(3, 4)).unwrap();
    assert_eq!(train_lda(&docs, &vocab, &TrainConfig::new(3, 4)).unwrap().phi(), model.phi());
    let mut matched = Vec::new();
    for support in &planted.topic_terms {
        let mut doc = prepared[0].clone();
        doc.terms = support.iter().cycle().take(40).cloned().collect();
        let w = infer_document(&model, &vectorize(&doc, &vocab), 50, 4).unwrap().weights;
        let concept = (0..3).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
        let top = top_terms(&model, concept, 10).unwrap();
        let shared = top.terms.iter().filter(|(t, _)| support.contains(t)).count();
        assert!(shared > support.len() / 2, "concept {concept} shares {shared} terms");
        matched.push(concept);
    }
    matched.sort_unstable();
    matched.dedup();
    assert_eq!(matched.len(), 3, "planted topics map onto distinct concepts");
}

#[test]
fn frequencies_are_conserved_on_a_synthetic_project() {
    let (realm, _) = realm_of(&ProjectConfig::new("CONS", 5), 3);
    for w in realm.issues.values().map(|i| &i.weights).chain(realm.comments.values().map(|c| &c.weights)) {
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    for window in realm.windows_of(Windowing::Yearly).into_iter().chain(realm.windows_of(Windowing::Quarterly)) {
        let team = issue_frequency(&realm, window).unwrap();
        assert!((team.values.iter().sum::<f64>() - 3.0).abs() < 1e-9);
        for f in developer_frequencies(&realm, window).values() {
            assert!((f.values.iter().sum::<f64>() - 3.0).abs() < 1e-9);
        }
        let total = absolute_frequency(&realm, &Scope::Team, window).values;
        let per_dev = developer_acf(&realm, window);
        for c in 0..3 {
            let sum: f64 = per_dev.values().map(|v| v[c]).sum();
            assert!((sum - total[c]).abs() < 1e-6);
        }
    }
}

#[test]
fn owners_align_with_their_topics() {
    let cfg = ProjectConfig::new("ALIGN", 21);
    let p = synth_project(&cfg).unwrap();
    let corpus = project(p.issues, p.comments);
    let prepared = Preprocessor::default().prepare(&corpus);
    let mut acfg = AlignmentConfig::new(2011, fast(3, 21));
    acfg.vocabulary.no_below = 5;
    let r = evaluate_alignment("ALIGN", &prepared, &acfg).unwrap();
    assert_eq!(r.accuracy, 1.0, "{r:?}");
    assert!(r.mean_diff > 0.0);
    assert!(r.p_value < 0.05);
    assert!((r.mean_diff - (r.mean_assignee_score - r.mean_active_score)).abs() == 0.0);
}

#[test]
fn losing_a_sole_owner_drops_their_concept() {
    let mut cfg = ProjectConfig::new("TURN", 8);
    cfg.leaver = Some(LeaverPlan { topic: 1, departure_quarter: 8, successor: false });
    let (realm, _) = realm_of(&cfg, 3);
    let leavers = detect_leavers(&realm, DEFAULT_LEAVER_RATIO);
    assert_eq!(leavers.len(), 1, "{leavers:?}");
    assert_eq!(leavers[0].developer, cfg.owner(1));
    assert_eq!(leavers[0].departure_quarter, 2012 * 4);
    let impact = turnover_impact(&realm, &leavers[0]).unwrap();
    assert!(impact.diff_strongest < impact.median_diff, "{impact:?}");
}
