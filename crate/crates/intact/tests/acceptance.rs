//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! 1.  Selection semantics over all six attacker scripts, 100 spans, <5s.
//! 2.  Matching suite: the four derived cases plus 40 hand-labeled pairs.
//! 3.  Metric identities for TPS/RIC and the similarity clamp.
//! 4.  Strategy ordering of TPS on a 50-document synthetic corpus.
//! 5.  K-means++ exhaustive-search oracle and NMI identities.
//! 6.  Mask-schedule fidelity for N=2 and N=6 plus the min-token rule.
//! 7.  TRIR endpoints: separable corpus at 1.0, suppressed corpus at
//!     chance level within the exact binomial interval.
//! 8.  Date-ladder interval containment over 1,000 random dates.
//! 9.  Prompt golden files byte-match the templates.
//! 10. End-to-end smoke through the HTTP gateway against the bundled
//!     mock model server (plus an opt-in variant for external servers).

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use intact_core::document::{
    AnnotatedDocument, CandidateSource, EntityLabel, PiiSpan, RawSpan, SelectedRank, Strategy,
};
use intact_core::gateway::mock::{
    extract_bracketed_target, ConfiguredScorer, FnChat, HashEmbedder,
};
use intact_core::gateway::{ChatMessage, ChatModel, ChatRequest, Role};
use intact_core::generation::date::{date_ladder, denoted_interval, parse_date};
use intact_core::generation::{build_generation_prompt, render_candidates, PromptBundle};
use intact_core::metrics::{
    document_tps, kmeanspp_cluster, nmi, relative_information, segment_scoring_spans,
    similarity_from_cosine, span_probabilities, weighted_similarity, MaskScoringConfig,
};
use intact_core::pipeline::{generate_candidates, sanitize, sanitize_baseline, PipelineConfig};
use intact_core::risk::{
    train_attacker, trir, AttackerConfig, BackgroundCorpus, BackgroundEntry, ProtectedDocument,
};
use intact_core::text::{
    guess_matches, sentence_context, sentence_ranges, Lexicon, MatchConfig,
};

fn letter(i: usize) -> char {
    (b'a' + (i % 26) as u8) as char
}

/// Alphabetic fixture surface, unique per (doc, span), outside every
/// embedded word list.
fn surface(doc: usize, span: usize) -> String {
    format!("Zq{}{}{}", letter(doc / 26), letter(doc % 26), letter(span))
}

/// A fixture document with `per_doc` single-word spans of `label`.
fn fixture_doc(doc: usize, per_doc: usize, label: EntityLabel) -> AnnotatedDocument {
    let mut text = String::new();
    let mut raw = Vec::new();
    for s in 0..per_doc {
        let word = surface(doc, s);
        if !text.is_empty() {
            text.push_str("then ");
        }
        let start = text.chars().count();
        text.push_str(&word);
        raw.push(RawSpan { start, end: text.chars().count(), label, entity_id: None });
        text.push_str(" happened. ");
    }
    text.push_str("The end.");
    AnnotatedDocument::new(format!("doc{doc}"), text, raw).unwrap()
}

/// Mock model shared by several criteria: generation returns candidates
/// `cand<doc*100+span>x<rank>`; the attack on rank `r` of a span guesses
/// the surface back exactly when `r < match_below(span)`.
fn scripted_chat(match_below: impl Fn(&str) -> usize + Send + Sync) -> impl ChatModel {
    FnChat(move |req: &ChatRequest| {
        let last = &req.messages.last().unwrap().content;
        let target = extract_bracketed_target(&req.messages).unwrap().to_string();
        if last.contains("Sorted replacements for [[") {
            let lines: Vec<String> = (1..=5).map(|r| format!("- cand {target} rank{r}")).collect();
            Ok(lines.join("\n"))
        } else {
            // target = "cand <surface> rank<r>"
            let mut parts = target.split_whitespace();
            let _cand = parts.next().unwrap();
            let original = parts.next().unwrap().to_string();
            let rank: usize = parts.next().unwrap()["rank".len()..].parse().unwrap();
            if rank < match_below(&original) {
                Ok(format!("- {original}"))
            } else {
                Ok("- qxunrelatedxq".to_string())
            }
        }
    })
}

#[test]
fn acceptance_01_selection_semantics() {
    let started = Instant::now();
    let lexicon = Lexicon::builtin();
    let bundle = PromptBundle::builtin();
    let cfg = PipelineConfig::default();
    // 20 documents x 5 spans = 100 fixture spans.
    let docs: Vec<AnnotatedDocument> =
        (0..20).map(|d| fixture_doc(d, 5, EntityLabel::Loc)).collect();
    let total_spans: usize = docs.iter().map(|d| d.spans.len()).sum();
    assert_eq!(total_spans, 100);

    for script in 1..=6usize {
        let chat = scripted_chat(move |_| script);
        for doc in &docs {
            let out = sanitize(doc, &cfg, &chat, &bundle, &lexicon).unwrap();
            assert_eq!(out.records.len(), doc.spans.len());
            for record in &out.records {
                if script <= 5 {
                    assert_eq!(
                        record.selected_rank,
                        SelectedRank::Rank(script),
                        "script {script}, doc {}",
                        doc.doc_id
                    );
                } else {
                    assert_eq!(record.selected_rank, SelectedRank::Fallback);
                    assert!(record.selected.starts_with("LOC_"));
                }
                assert!(record.is_consistent());
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget is 5 s");
    println!(
        "ACCEPTANCE 1 PASS: ranks 1..=5 and FALLBACK selected exactly per script over 100 spans x 6 scripts in {elapsed:?}"
    );
}

fn span_for(surface: &str, label: EntityLabel) -> PiiSpan {
    PiiSpan {
        start: 0,
        end: surface.chars().count(),
        surface: surface.to_string(),
        label,
        entity_id: String::from("e"),
        mention_index: 0,
    }
}

#[test]
fn acceptance_02_matching_suite() {
    use EntityLabel::*;
    let lexicon = Lexicon::builtin();
    let cfg = MatchConfig::default();

    // The four derived cases.
    let derived: [(&str, EntityLabel, &str, bool); 5] = [
        ("Turkey", Loc, "Turkish", true),
        ("3 August 2003", Datetime, "August 2003", false),
        ("3 August 2003", Datetime, "3 August 2003", true),
        ("European Court of Human Rights", Org, "ECHR", true),
        ("dogs", Dem, "dog", true),
    ];
    // Forty hand-labeled pairs, each worked out against the matching
    // rules (lemma overlap after stopword/frequency exclusion with
    // coined acronyms; character 4-grams for named-entity labels;
    // all-lemma equality for dates).
    let pairs: [(&str, EntityLabel, &str, bool); 41] = [
        ("Catholic", Dem, "Protestant", false),
        ("Ankara", Loc, "Ankara", true),
        ("Ankara", Loc, "ANKARA", true),
        ("Istanbul", Loc, "Istanbuli residents", true),
        ("Oslo", Loc, "Bergen", false),
        ("thirteen", Quantity, "thirty", false),
        ("thirteen", Misc, "thirty", true),
        ("three children", Quantity, "three kids", false),
        ("Polish immigrants", Dem, "Poland", false),
        ("Polish village", Loc, "Poland", false),
        ("Poland", Loc, "Polish", false),
        ("the Supreme Court", Org, "a national court", true),
        ("Sunrise Psychiatric Hospital", Org, "a psychiatric unit", true),
        ("Sunrise Psychiatric Hospital", Org, "SPH", true),
        ("Sunrise Psychiatric Hospital", Org, "a mental health facility", false),
        ("John Smith", Person, "Jon Smyth", true),
        ("John Smith", Person, "a man from Leeds", false),
        ("X-4711", Code, "case 4711", true),
        ("X-4711", Code, "case 8822", false),
        ("March 1999", Datetime, "March 2000", false),
        ("March 1999", Datetime, "1999 March", true),
        ("the 1990s", Datetime, "1990s", false),
        ("spring 1999", Datetime, "Spring 1999", true),
        ("unemployed", Dem, "jobless", false),
        ("unemployed", Dem, "unemployed people", true),
        ("the United Kingdom", Loc, "UK", true),
        ("the United Kingdom", Loc, "Britain", false),
        ("World War I", Misc, "a global war", true),
        ("approximately 50 euros", Quantity, "about fifty euros", true),
        ("50 euros", Quantity, "60 dollars", false),
        ("Microsoft", Org, "a software giant", true),
        ("Muslim", Dem, "Islamic faith", false),
        ("Muslims", Dem, "Muslim community", true),
        ("Strasbourg", Loc, "a city in France", false),
        ("the European Commission", Org, "European Union", true),
        ("7.30 p.m.", Datetime, "7.30 p.m.", true),
        ("noon", Datetime, "midday", false),
        ("Turkey", Loc, "a country bordering Syria", false),
        ("Acme Ltd", Org, "Acme Limited", true),
        ("epikris", Misc, "a medical report", false),
        ("Widows Bereavement Allowance", Misc, "a specific allowance for widows", true),
    ];

    for (original, label, guess, expected) in derived.iter().chain(pairs.iter()) {
        let got = guess_matches(&span_for(original, *label), guess, &cfg, &lexicon);
        assert_eq!(
            got, *expected,
            "match({original:?} [{label}], {guess:?}) = {got}, expected {expected}"
        );
    }
    println!(
        "ACCEPTANCE 2 PASS: 4 derived cases + {} hand-labeled pairs agree with the rules",
        pairs.len()
    );
}

#[test]
fn acceptance_03_metric_identities() {
    let lexicon = Lexicon::builtin();
    let scorer = ConfiguredScorer::new().with_probability("quiet", 0.05);
    let embedder = HashEmbedder::new(1, 32);
    let scoring = MaskScoringConfig { spacing: 2, ..Default::default() };

    let doc = AnnotatedDocument::new(
        "d",
        "Ankara stayed quiet during autumn storms.",
        vec![
            RawSpan { start: 0, end: 6, label: EntityLabel::Loc, entity_id: None },
            RawSpan { start: 27, end: 33, label: EntityLabel::Datetime, entity_id: None },
        ],
    )
    .unwrap();

    // TPS(D, D) = 1.
    let identity = sanitize_identity(&doc);
    let report =
        document_tps(&doc, &identity, &scorer, &embedder, &scoring, "embed", &lexicon).unwrap();
    assert!((report.tps - 1.0).abs() < 1e-9, "TPS identity: {}", report.tps);

    // Sum RIC = 1 per document.
    let ric_total: f64 = report.spans.iter().map(|s| s.ric).sum();
    assert!((ric_total - 1.0).abs() < 1e-9, "RIC sum: {ric_total}");

    // All spans suppressed (every scoring span is annotated) -> TPS 0.
    let tight = AnnotatedDocument::new(
        "t",
        "Ankara Bergen",
        vec![
            RawSpan { start: 0, end: 6, label: EntityLabel::Loc, entity_id: None },
            RawSpan { start: 7, end: 13, label: EntityLabel::Loc, entity_id: None },
        ],
    )
    .unwrap();
    let suppressed = sanitize_baseline(&tight, Strategy::Suppression, None).unwrap();
    let zero =
        document_tps(&tight, &suppressed, &scorer, &embedder, &scoring, "embed", &lexicon).unwrap();
    assert!(zero.tps.abs() < 1e-9, "TPS suppressed: {}", zero.tps);

    // Log-base invariance: rescaling every IC by 1/ln 2 leaves TPS as is.
    let ics_nat: Vec<f64> = report.spans.iter().map(|s| s.ric * 7.0 + 0.1).collect();
    let ics_log2: Vec<f64> = ics_nat.iter().map(|x| x / std::f64::consts::LN_2).collect();
    let sims: Vec<f64> = (0..ics_nat.len()).map(|i| (i % 3) as f64 / 2.0).collect();
    let tps_nat = weighted_similarity(&relative_information(&ics_nat), &sims);
    let tps_log2 = weighted_similarity(&relative_information(&ics_log2), &sims);
    assert!((tps_nat - tps_log2).abs() < 1e-9);

    // Similarity clamp.
    assert_eq!(similarity_from_cosine(-0.3), 0.0);

    println!("ACCEPTANCE 3 PASS: TPS(D,D)=1, sum RIC=1, suppressed TPS=0, base-invariant, clamp(-0.3)=0");
}

fn sanitize_identity(doc: &AnnotatedDocument) -> intact_core::document::SanitizedDocument {
    let records = doc
        .spans
        .iter()
        .enumerate()
        .map(|(i, span)| intact_core::document::ReplacementRecord {
            span: intact_core::document::SpanRef::of(doc, i),
            candidate_list: intact_core::document::CandidateList {
                span_index: i,
                candidates: vec![span.surface.clone()],
                source: CandidateSource::Llm,
            },
            guess_sets: vec![],
            selected: span.surface.clone(),
            selected_rank: SelectedRank::Rank(1),
            fallback_label: None,
        })
        .collect();
    intact_core::document::apply_replacements(doc, records, Strategy::Intact).unwrap()
}

#[test]
fn acceptance_04_strategy_ordering() {
    let lexicon = Lexicon::builtin();
    let bundle = PromptBundle::builtin();
    let docs_n = 50usize;
    let labels = [EntityLabel::Org, EntityLabel::Loc, EntityLabel::Dem];

    // One axis pair per span: surfaces on even dimensions, an orthogonal
    // partner for candidate vectors on odd ones; label vectors spread
    // evenly over their surfaces.
    let total_spans = docs_n * labels.len();
    let dim = 2 * total_spans;
    let mut embedder = HashEmbedder::new(9, dim);
    let axis = |i: usize| -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let span_id = |d: usize, s: usize| d * labels.len() + s;
    let mut label_vectors: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut docs = Vec::with_capacity(docs_n);
    for d in 0..docs_n {
        let mut text = String::new();
        let mut raw = Vec::new();
        for (s, label) in labels.iter().enumerate() {
            let word = surface(d, s);
            text.push_str(&format!("Filler{}{} mentions ", letter(d % 26), letter(s)));
            let start = text.chars().count();
            text.push_str(&word);
            raw.push(RawSpan { start, end: text.chars().count(), label: *label, entity_id: None });
            text.push_str(". ");

            let i = span_id(d, s);
            embedder.set_override(&word, axis(2 * i));
            // Candidate rank r: cosine 0.95 - 0.1 (r - 1) with the surface.
            for r in 1..=5usize {
                let cos = 0.95 - 0.1 * (r as f64 - 1.0);
                let sin = (1.0 - cos * cos).sqrt();
                let mut v = vec![0.0; dim];
                v[2 * i] = cos;
                v[2 * i + 1] = sin;
                embedder.set_override(&format!("cand {word} rank{r}"), v);
            }
            let entry = label_vectors.entry(label.as_str()).or_insert_with(|| vec![0.0; dim]);
            entry[2 * i] = 1.0;
        }
        text.push_str("Nothing else.");
        docs.push(AnnotatedDocument::new(format!("doc{d}"), text, raw).unwrap());
    }
    for (label, vector) in label_vectors {
        embedder.set_override(label, vector);
    }

    // Attack script: the target rank cycles over 1..=5, never falling
    // back, so the entity label never outranks a selected candidate.
    let chat = scripted_chat(move |original: &str| {
        let bytes = original.as_bytes();
        let key = (bytes[bytes.len() - 2] as usize) * 3 + bytes[bytes.len() - 1] as usize;
        key % 5 + 1
    });

    let cfg = PipelineConfig::default();
    let scorer = ConfiguredScorer::new();
    let scoring = MaskScoringConfig { spacing: 2, ..Default::default() };

    let mut tps = BTreeMap::new();
    for strategy in
        [Strategy::Suppression, Strategy::EntityType, Strategy::Intact, Strategy::MostSpecific]
    {
        let mut total = 0.0;
        for doc in &docs {
            let sanitized = match strategy {
                Strategy::Intact => sanitize(doc, &cfg, &chat, &bundle, &lexicon).unwrap(),
                Strategy::Suppression | Strategy::EntityType => {
                    sanitize_baseline(doc, strategy, None).unwrap()
                }
                _ => {
                    let outcome =
                        generate_candidates(doc, &cfg, &chat, &bundle, &lexicon).unwrap();
                    sanitize_baseline(doc, strategy, Some(&outcome.lists)).unwrap()
                }
            };
            let report =
                document_tps(doc, &sanitized, &scorer, &embedder, &scoring, "embed", &lexicon)
                    .unwrap();
            total += report.tps;
        }
        tps.insert(strategy, total / docs_n as f64);
    }

    let sup = tps[&Strategy::Suppression];
    let ent = tps[&Strategy::EntityType];
    let int = tps[&Strategy::Intact];
    let most = tps[&Strategy::MostSpecific];
    assert!(sup < ent, "suppression {sup} !< entity {ent}");
    assert!(ent <= int, "entity {ent} !<= intact {int}");
    assert!(int <= most, "intact {int} !<= most-specific {most}");
    assert!(int < most, "outer inequality must be strict: {int} vs {most}");
    println!(
        "ACCEPTANCE 4 PASS: TPS ordering over 50 docs: suppression {sup:.4} < entity {ent:.4} <= intact {int:.4} < most-specific {most:.4}"
    );
}

/// Exhaustive minimum inertia over every assignment of `n` points to `k`
/// clusters.
fn brute_force_inertia(vectors: &[Vec<f64>], k: usize) -> f64 {
    let n = vectors.len();
    let dim = vectors[0].len();
    let mut best = f64::INFINITY;
    for code in 0..k.pow(n as u32) {
        let mut assignment = vec![0usize; n];
        let mut c = code;
        for slot in assignment.iter_mut() {
            *slot = c % k;
            c /= k;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assignment) {
            counts[a] += 1;
            for (acc, x) in sums[a].iter_mut().zip(v) {
                *acc += x;
            }
        }
        let inertia: f64 = vectors
            .iter()
            .zip(&assignment)
            .map(|(v, &a)| {
                v.iter()
                    .zip(&sums[a])
                    .map(|(x, s)| {
                        let m = s / counts[a] as f64;
                        (x - m) * (x - m)
                    })
                    .sum::<f64>()
            })
            .sum();
        if inertia < best {
            best = inertia;
        }
    }
    best
}

#[test]
fn acceptance_05_kmeans_and_nmi_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut instances = 0usize;
    while instances < 30 {
        let n = rng.random_range(4..=8usize);
        let k = rng.random_range(1..=3usize.min(n));
        // Loosely clustered points around k anchors.
        let anchors: Vec<(f64, f64)> =
            (0..k).map(|_| (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0))).collect();
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let (ax, ay) = anchors[i % k];
                vec![ax + rng.random_range(-1.0..1.0), ay + rng.random_range(-1.0..1.0)]
            })
            .collect();
        let outcome = kmeanspp_cluster(&vectors, k, 50, 300, rng.random()).unwrap();
        let oracle = brute_force_inertia(&vectors, k);
        assert!(
            (outcome.inertia - oracle).abs() < 1e-9,
            "instance {instances}: inertia {} vs exhaustive optimum {oracle}",
            outcome.inertia
        );
        // Best-of-restarts never loses to any restart.
        assert_eq!(outcome.restart_inertias.len(), 50);
        for r in &outcome.restart_inertias {
            assert!(outcome.inertia <= r + 1e-12);
        }
        instances += 1;
    }

    assert_eq!(nmi(&[0, 1, 0, 1, 2], &[0, 1, 0, 1, 2]).unwrap(), 1.0);
    let crossing = nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
    assert!(crossing.abs() < 1e-12, "crossing NMI: {crossing}");
    println!(
        "ACCEPTANCE 5 PASS: 30 instances match the exhaustive optimum; NMI(identical)=1, NMI(crossing)=0; best-of-50 inertia minimal"
    );
}

#[test]
fn acceptance_06_mask_schedule_fidelity() {
    use std::cell::RefCell;
    use intact_core::gateway::{GatewayError, MaskScoreRequest, MaskScoreResponse, MaskScorer};

    struct Recording {
        inner: ConfiguredScorer,
        requests: RefCell<Vec<MaskScoreRequest>>,
    }
    impl MaskScorer for Recording {
        fn mask_score(&self, req: &MaskScoreRequest) -> Result<MaskScoreResponse, GatewayError> {
            self.requests.borrow_mut().push(req.clone());
            self.inner.mask_score(req)
        }
    }

    let lexicon = Lexicon::builtin();
    // Every scoring span is a single token, so candidates identify spans.
    let doc = AnnotatedDocument::new(
        "d",
        "Ankara hosted nine delegates during spring talks yearly",
        vec![RawSpan { start: 0, end: 6, label: EntityLabel::Loc, entity_id: None }],
    )
    .unwrap();
    let spans = segment_scoring_spans(&doc, &lexicon);
    assert!(spans.len() >= 6, "fixture needs at least N spans");

    for spacing in [2usize, 6] {
        let scorer = Recording { inner: ConfiguredScorer::new(), requests: RefCell::new(vec![]) };
        let cfg = MaskScoringConfig { spacing, ..Default::default() };
        span_probabilities(&doc, &spans, &scorer, &cfg).unwrap();
        let requests = scorer.requests.borrow();
        assert_eq!(requests.len(), spacing, "exactly {spacing} scoring passes");
        // Across all passes, every span's token is masked exactly once.
        let mut masked: Vec<String> = requests.iter().flat_map(|r| r.candidates.clone()).collect();
        masked.sort();
        let mut expected: Vec<String> = spans
            .iter()
            .map(|s| {
                doc.text
                    .chars()
                    .skip(s.start)
                    .take(s.end - s.start)
                    .collect::<String>()
            })
            .collect();
        expected.sort();
        assert_eq!(masked, expected, "N={spacing}: every span masked exactly once");
    }

    // Multi-token minimum rule on the (0.9, 0.2, 0.6) fixture.
    let multi = AnnotatedDocument::new(
        "m",
        "Alpha Beta Gamma ruled.",
        vec![RawSpan { start: 0, end: 16, label: EntityLabel::Org, entity_id: None }],
    )
    .unwrap();
    let scorer = ConfiguredScorer::new()
        .with_probability("Alpha", 0.9)
        .with_probability("Beta", 0.2)
        .with_probability("Gamma", 0.6);
    let spans = segment_scoring_spans(&multi, &lexicon);
    let cfg = MaskScoringConfig { spacing: 2, ..Default::default() };
    let probabilities = span_probabilities(&multi, &spans, &scorer, &cfg).unwrap();
    assert!((probabilities[0] - 0.2).abs() < 1e-12, "min rule: {}", probabilities[0]);

    println!("ACCEPTANCE 6 PASS: N=2 -> 2 passes, N=6 -> 6 passes, each span masked once; min-token rule gives 0.2");
}

/// Central exact-binomial interval: the smallest `[lo, hi]` around the
/// mode with at least `confidence` total probability mass.
fn binomial_interval(n: usize, p: f64, confidence: f64) -> (usize, usize) {
    let ln_fact = |m: usize| -> f64 { (1..=m).map(|i| (i as f64).ln()).sum() };
    let pmf = |k: usize| -> f64 {
        let ln = ln_fact(n) - ln_fact(k) - ln_fact(n - k)
            + k as f64 * p.ln()
            + (n - k) as f64 * (1.0 - p).ln();
        ln.exp()
    };
    let probabilities: Vec<f64> = (0..=n).map(pmf).collect();
    let mode = (0..=n).max_by(|&a, &b| probabilities[a].total_cmp(&probabilities[b])).unwrap();
    let (mut lo, mut hi) = (mode, mode);
    let mut mass = probabilities[mode];
    while mass < confidence && (lo > 0 || hi < n) {
        let left = if lo > 0 { probabilities[lo - 1] } else { -1.0 };
        let right = if hi < n { probabilities[hi + 1] } else { -1.0 };
        if left >= right {
            lo -= 1;
            mass += probabilities[lo];
        } else {
            hi += 1;
            mass += probabilities[hi];
        }
    }
    (lo, hi)
}

#[test]
fn acceptance_07_trir_endpoints() {
    let population = 20usize;
    // Orthogonal embeddings, one axis per individual.
    let mut embedder = HashEmbedder::new(70, population);
    for i in 0..population {
        let mut axis = vec![0.0; population];
        axis[i] = 1.0;
        embedder.set_override(&format!("zperson{}", letter(i)), axis);
    }
    let background = BackgroundCorpus::new(
        (0..population)
            .map(|i| BackgroundEntry {
                individual_id: format!("id{i:02}"),
                text: format!("zperson{}", letter(i)),
            })
            .collect(),
    )
    .unwrap();
    let cfg = AttackerConfig { embed_model_id: "embed".into(), ..Default::default() };
    let attacker = train_attacker(&background, &embedder, &cfg).unwrap();

    // Separable corpus: identical texts re-identify perfectly.
    let docs: Vec<ProtectedDocument> = (0..population)
        .map(|i| ProtectedDocument {
            doc_id: format!("d{i}"),
            text: format!("zperson{}", letter(i)),
            individual_id: format!("id{i:02}"),
        })
        .collect();
    let separable = trir(&docs, &attacker, &embedder).unwrap();
    assert_eq!(separable.trir, 1.0, "separable corpus must re-identify fully");

    // Fully suppressed corpus: 200 documents, 10 per individual, all
    // reduced to the same empty text.
    let suppressed_docs: Vec<ProtectedDocument> = (0..200)
        .map(|j| ProtectedDocument {
            doc_id: format!("s{j}"),
            text: String::new(),
            individual_id: format!("id{:02}", j % population),
        })
        .collect();
    let suppressed = trir(&suppressed_docs, &attacker, &embedder).unwrap();
    let hits = (suppressed.trir * 200.0).round() as usize;
    let (lo, hi) = binomial_interval(200, 1.0 / population as f64, 0.95);
    assert!(
        (lo..=hi).contains(&hits),
        "suppressed TRIR {} ({hits}/200) outside exact binomial 95% interval [{lo}, {hi}] around 1/P",
        suppressed.trir
    );

    // Deterministic across reruns.
    let attacker2 = train_attacker(&background, &embedder, &cfg).unwrap();
    let rerun = trir(&suppressed_docs, &attacker2, &embedder).unwrap();
    assert_eq!(rerun.trir, suppressed.trir);
    assert_eq!(attacker, attacker2);

    println!(
        "ACCEPTANCE 7 PASS: separable TRIR=1.0; suppressed TRIR {:.4} within binomial 95% [{:.3}, {:.3}]; deterministic",
        suppressed.trir,
        lo as f64 / 200.0,
        hi as f64 / 200.0
    );
}

#[test]
fn acceptance_08_date_ladder() {
    // Fixture: the first two rungs verbatim.
    let fixture = parse_date("March 12, 1999").unwrap();
    let rungs = date_ladder(&fixture, 5).unwrap();
    assert_eq!(rungs[0].text, "March 1999");
    assert_eq!(rungs[1].text, "spring 1999");

    // Interval containment over 1,000 random valid dates in every
    // accepted format.
    let months = [
        "January", "February", "March", "April", "May", "June", "July", "August", "September",
        "October", "November", "December",
    ];
    let days_in = |y: i32, m: usize| -> u8 {
        match m {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            _ => {
                if y % 4 == 0 && (y % 100 != 0 || y % 400 == 0) {
                    29
                } else {
                    28
                }
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for trial in 0..1000 {
        let y = rng.random_range(1000..=2999);
        let m = rng.random_range(1..=12usize);
        let d = rng.random_range(1..=days_in(y, m) as u32) as u8;
        let text = match trial % 6 {
            0 => format!("{d} {} {y}", months[m - 1]),
            1 => format!("{} {d}, {y}", months[m - 1]),
            2 => format!("{} {y}", months[m - 1]),
            3 => format!("{y}-{m:02}-{d:02}"),
            4 => format!("{d:02}/{m:02}/{y}"),
            _ => format!("{y}"),
        };
        let parsed = parse_date(&text).unwrap_or_else(|| panic!("{text} must parse"));
        let rungs = date_ladder(&parsed, 5).unwrap();
        assert_eq!(rungs.len(), 5);
        let mut previous = denoted_interval(&parsed);
        for rung in &rungs {
            assert!(
                rung.interval.contains(&previous),
                "{text}: rung `{}` does not contain the previous interval",
                rung.text
            );
            previous = rung.interval;
        }
    }
    println!("ACCEPTANCE 8 PASS: ladder is interval-coarsening on 1,000 random dates; Table fixture rungs verbatim");
}

fn parse_golden(raw: &str) -> Vec<(Role, String)> {
    let mut messages: Vec<(Role, String)> = Vec::new();
    let mut current: Option<(Role, String)> = None;
    for line in raw.lines() {
        let role = match line {
            "<<<user>>>" => Some(Role::User),
            "<<<assistant>>>" => Some(Role::Assistant),
            "<<<system>>>" => Some(Role::System),
            _ => None,
        };
        match role {
            Some(role) => {
                if let Some((r, mut content)) = current.take() {
                    content.truncate(content.len().saturating_sub(1));
                    messages.push((r, content));
                }
                current = Some((role, String::new()));
            }
            None => {
                if let Some((_, content)) = current.as_mut() {
                    content.push_str(line);
                    content.push('\n');
                }
            }
        }
    }
    if let Some((r, mut content)) = current.take() {
        content.truncate(content.len().saturating_sub(1));
        messages.push((r, content));
    }
    messages
}

fn assert_matches_golden(messages: &[ChatMessage], golden_raw: &str, what: &str) {
    let golden = parse_golden(golden_raw);
    assert_eq!(messages.len(), golden.len(), "{what}: message count");
    for (i, (message, (role, content))) in messages.iter().zip(&golden).enumerate() {
        assert_eq!(message.role, *role, "{what}: role of message {i}");
        assert_eq!(&message.content, content, "{what}: byte content of message {i}");
    }
}

#[test]
fn acceptance_09_prompt_golden_files() {
    let lexicon = Lexicon::builtin();
    let bundle = PromptBundle::builtin();
    let generation = intact_core::generation::GenerationConfig::default();

    // DEM generation prompt.
    let doc = AnnotatedDocument::new(
        "g1",
        "He is a Catholic priest.",
        vec![RawSpan { start: 8, end: 16, label: EntityLabel::Dem, entity_id: None }],
    )
    .unwrap();
    let ranges = sentence_ranges(&doc.text, &doc.spans, &lexicon);
    let ctx = sentence_context(&doc, 0, &ranges);
    let messages = build_generation_prompt(&doc.spans[0], &ctx, &bundle, &generation).unwrap();
    assert_matches_golden(
        &messages,
        include_str!("golden/generation_prompt_dem.txt"),
        "DEM generation prompt",
    );

    // LOC generation prompt.
    let doc = AnnotatedDocument::new(
        "g2",
        "She moved to Ankara last year.",
        vec![RawSpan { start: 13, end: 19, label: EntityLabel::Loc, entity_id: None }],
    )
    .unwrap();
    let ranges = sentence_ranges(&doc.text, &doc.spans, &lexicon);
    let ctx = sentence_context(&doc, 0, &ranges);
    let messages = build_generation_prompt(&doc.spans[0], &ctx, &bundle, &generation).unwrap();
    assert_matches_golden(
        &messages,
        include_str!("golden/generation_prompt_loc.txt"),
        "LOC generation prompt",
    );

    // Attack prompt with the fixed one-shot block.
    let attack_cfg = intact_core::attack::AttackConfig::default();
    let messages = intact_core::attack::build_attack_prompt(
        "PERSON_1 visited [[a European city]] in 1999.",
        "a European city",
        &attack_cfg,
    );
    assert_matches_golden(&messages, include_str!("golden/attack_prompt.txt"), "attack prompt");

    // One-shot blocks for every label.
    for (label, golden) in [
        (EntityLabel::Org, include_str!("golden/oneshot_org.txt")),
        (EntityLabel::Datetime, include_str!("golden/oneshot_datetime.txt")),
        (EntityLabel::Loc, include_str!("golden/oneshot_loc.txt")),
        (EntityLabel::Quantity, include_str!("golden/oneshot_quantity.txt")),
        (EntityLabel::Dem, include_str!("golden/oneshot_dem.txt")),
        (EntityLabel::Misc, include_str!("golden/oneshot_misc.txt")),
    ] {
        let example = bundle.example_for(label).unwrap();
        let rendered = render_candidates(&example.replacements);
        assert_eq!(rendered, golden.trim_end_matches('\n'), "one-shot block for {label}");
    }

    println!("ACCEPTANCE 9 PASS: generation and attack prompts byte-match the golden templates incl. all one-shot blocks");
}

#[test]
fn acceptance_10_end_to_end_smoke_against_http_server() {
    use intact::mock_server::MockModelServer;
    use std::process::Command;

    let server = MockModelServer::start("127.0.0.1:0", 7, 32).expect("bind mock server");
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let config_path = dir.path().join("config.toml");
    let out_path = dir.path().join("sanitized.jsonl");

    let corpus = [
        r#"{"doc_id":"s1","text":"John Smith visited Geneva on 3 August 2003.","annotations":[{"start":0,"end":10,"label":"PERSON"},{"start":19,"end":25,"label":"LOC"},{"start":29,"end":42,"label":"DATETIME"}]}"#,
        r#"{"doc_id":"s2","text":"The witness was a Catholic teacher.","annotations":[{"start":18,"end":26,"label":"DEM"}]}"#,
        r#"{"doc_id":"s3","text":"Helios Clinic admitted nine patients.","annotations":[{"start":0,"end":13,"label":"ORG"},{"start":23,"end":27,"label":"QUANTITY"}]}"#,
    ];
    std::fs::write(&corpus_path, corpus.join("\n")).unwrap();

    let config = format!(
        "[gateway]\nbackend = \"http\"\nchat_url = \"{base}/v1/chat/completions\"\nembed_url = \"{base}/v1/embeddings\"\nscore_url = \"{base}/v1/mask_score\"\n",
        base = server.base_url()
    );
    std::fs::write(&config_path, config).unwrap();

    let status = Command::new(env!("CARGO_BIN_EXE_intact"))
        .args(["sanitize", "--corpus"])
        .arg(&corpus_path)
        .args(["--config"])
        .arg(&config_path)
        .args(["--strategy", "intact", "--out"])
        .arg(&out_path)
        .status()
        .expect("spawn intact binary");
    assert!(status.success(), "sanitize exited with {status}");

    // Structural postconditions: valid output, five candidates per
    // model-generated span, manifest emitted.
    let sanitized = intact::corpus::read_sanitized(&out_path).unwrap();
    assert_eq!(sanitized.len(), 3);
    let mut llm_spans = 0;
    for record in &sanitized {
        for (annotation, replacement) in record.annotations.iter().zip(&record.records) {
            match annotation.label.as_str() {
                "PERSON" | "CODE" => {
                    assert!(replacement.selected.contains('_'));
                }
                "DATETIME" => {
                    // Parseable date: rule ladder with five rungs.
                    assert_eq!(replacement.candidates.len(), 5);
                }
                _ => {
                    assert_eq!(replacement.candidates.len(), 5, "five candidates per LLM span");
                    llm_spans += 1;
                }
            }
            assert!(!replacement.selected.is_empty());
        }
    }
    assert!(llm_spans >= 4);
    let manifest_path = dir.path().join("sanitized.jsonl.manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sanitize");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);

    println!("ACCEPTANCE 10 PASS: end-to-end sanitize over HTTP against the bundled mock server, structural postconditions hold");
}

/// Environment-dependent variant of the smoke test for real
/// OpenAI-compatible servers: set INTACT_SMOKE_CHAT_URL (and optionally
/// the embed/score URLs) and run with `--ignored`.
#[test]
#[ignore = "requires a live OpenAI-compatible server; set INTACT_SMOKE_CHAT_URL"]
fn acceptance_10b_smoke_against_external_server() {
    let chat_url = std::env::var("INTACT_SMOKE_CHAT_URL").expect("INTACT_SMOKE_CHAT_URL");
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus.jsonl");
    let config_path = dir.path().join("config.toml");
    let out_path = dir.path().join("sanitized.jsonl");
    std::fs::write(
        &corpus_path,
        r#"{"doc_id":"x1","text":"The witness was a Catholic teacher.","annotations":[{"start":18,"end":26,"label":"DEM"}]}"#,
    )
    .unwrap();
    // Embedding and scoring stay on the mock backend unless overridden.
    let embed = std::env::var("INTACT_SMOKE_EMBED_URL").unwrap_or_default();
    let score = std::env::var("INTACT_SMOKE_SCORE_URL").unwrap_or_default();
    let (backend, extra) = if embed.is_empty() || score.is_empty() {
        ("mock", String::new())
    } else {
        ("http", format!("embed_url = \"{embed}\"\nscore_url = \"{score}\"\n"))
    };
    let model = std::env::var("INTACT_SMOKE_MODEL").unwrap_or_else(|_| "default".into());
    std::fs::write(
        &config_path,
        format!(
            "[generation]\nmodel_id = \"{model}\"\n[attack]\nmodel_id = \"{model}\"\n[gateway]\nbackend = \"{backend}\"\nchat_url = \"{chat_url}\"\n{extra}"
        ),
    )
    .unwrap();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_intact"))
        .args(["sanitize", "--corpus"])
        .arg(&corpus_path)
        .args(["--config"])
        .arg(&config_path)
        .args(["--strategy", "intact", "--out"])
        .arg(&out_path)
        .status()
        .expect("spawn intact binary");
    assert!(status.success());
    let sanitized = intact::corpus::read_sanitized(&out_path).unwrap();
    assert_eq!(sanitized.len(), 1);
}
