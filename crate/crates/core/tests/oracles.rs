mod common;

use proptest::prelude::*;

use typegraph::metrics::{MetricTable, NtpDenominator};
use typegraph::report::{TypeMatrix, DEFAULT_FILTER};
use typegraph::stats::{Verdict, SENTENCE_TYPE_HYPOTHESES};
use typegraph::*;

fn small_corpus() -> impl Strategy<Value = common::RandomCorpus> {
    (any::<u64>(), 12usize..60, 2usize..8, 1usize..6, 1usize..6, any::<bool>()).prop_map(
        |(seed, n, lemmas, dim, k, lattice)| {
            common::random_corpus(seed, n.max(lemmas * 2), lemmas, dim, k, lattice)
        },
    )
}

fn neighbor_lists(g: &NeighborGraph) -> Vec<Vec<(String, f64)>> {
    (0..g.len())
        .map(|i| {
            g.neighbors(i)
                .iter()
                .map(|n| (g.id(n.node).to_string(), n.score))
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_matches_exhaustive_reference(c in small_corpus()) {
        let corpus = align(&c.bundle, &c.dataset).unwrap();
        let g = match build_graph(&corpus, c.k) {
            Ok(g) => g,
            Err(Error::InsufficientCandidates { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        for (i, got) in neighbor_lists(&g).into_iter().enumerate() {
            let lemma = corpus.lemma(i);
            prop_assert!(got.iter().all(|(id, _)| c.dataset.get(id).unwrap().lemma != lemma));
            prop_assert_eq!(got, exhaustive_neighbors(&corpus, g.id(i), c.k).unwrap());
        }
    }

    #[test]
    fn graph_ignores_vector_length(c in small_corpus(), shifts in prop::collection::vec(-20i32..20, 60)) {
        let corpus = align(&c.bundle, &c.dataset).unwrap();
        let Ok(g) = build_graph(&corpus, c.k) else { return Ok(()) };

        // powers of two keep every product exact, so scores are bit-identical
        let dim = c.bundle.dim();
        let mut data = c.bundle.as_slice().to_vec();
        for (r, row) in data.chunks_mut(dim).enumerate() {
            let s = 2f32.powi(shifts[r % shifts.len()]);
            row.iter_mut().for_each(|x| *x *= s);
        }
        let scaled = EmbeddingBundleF32::new(
            c.bundle.variant().clone(), dim, c.bundle.ids().to_vec(), data,
        ).unwrap();
        let corpus2 = align(&scaled, &c.dataset).unwrap();
        let g2 = build_graph(&corpus2, c.k).unwrap();
        prop_assert_eq!(neighbor_lists(&g), neighbor_lists(&g2));
    }

    #[test]
    fn ntp_equals_naive_recount(c in small_corpus()) {
        let corpus = align(&c.bundle, &c.dataset).unwrap();
        let Ok(g) = build_graph(&corpus, c.k) else { return Ok(()) };
        for i in 0..g.len() {
            let mut counts = [0usize; 10];
            for n in g.neighbors(i) {
                counts[c.dataset.get(g.id(n.node)).unwrap().lexical_type.index()] += 1;
            }
            let d: TypeDistributionF64 = ntp(&g, &c.dataset, g.id(i)).unwrap();
            for t in SemanticType::ALL {
                prop_assert_eq!(d.get(t), counts[t.index()] as f64 / c.k as f64);
            }
        }
    }

    #[test]
    fn neighbor_words_equal_edge_recount(c in small_corpus(), pick in 0usize..8) {
        let corpus = align(&c.bundle, &c.dataset).unwrap();
        let Ok(g) = build_graph(&corpus, c.k) else { return Ok(()) };
        let lemmas: Vec<&str> = c.dataset.lemmas().collect();
        let lemma = lemmas[pick % lemmas.len()];
        let peer = lemmas[(pick + 1) % lemmas.len()];
        let focus = [SemanticType::Food, SemanticType::Info];
        let dist = neighbor_word_distribution(&g, &c.dataset, lemma, &[peer], &focus).unwrap();

        let mut edges = 0usize;
        let mut to_peer = 0usize;
        let mut by_type = [0usize; 10];
        for (src, n) in g.edges() {
            if c.dataset.get(g.id(src)).unwrap().lemma != lemma {
                continue;
            }
            edges += 1;
            let dst = c.dataset.get(g.id(n.node)).unwrap();
            if dst.lemma == peer {
                to_peer += 1;
            } else {
                by_type[dst.lexical_type.index()] += 1;
            }
        }
        prop_assert_eq!(dist.edges, edges);
        prop_assert!((dist.peer_share(peer).unwrap() - to_peer as f64 / edges as f64).abs() < 1e-12);
        for t in SemanticType::ALL {
            prop_assert!((dist.type_share(t) - by_type[t.index()] as f64 / edges as f64).abs() < 1e-12);
        }
        let focus_sum: f64 = focus.iter().map(|&t| dist.type_share(t)).sum();
        prop_assert!((dist.peer_share(peer).unwrap() + focus_sum + dist.other - 1.0).abs() < 1e-12);
        prop_assert!((dist.total() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn graph_is_independent_of_thread_count() {
    let c = common::random_corpus(7, 400, 30, 16, 10, true);
    let corpus = align(&c.bundle, &c.dataset).unwrap();
    let reference = neighbor_lists(&build_graph(&corpus, c.k).unwrap());
    for threads in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let g = pool.install(|| build_graph(&corpus, c.k).unwrap());
        assert_eq!(neighbor_lists(&g), reference, "{threads} threads");
        let t1: MetricTableF64 = pool.install(|| compute_metrics(&g, &c.dataset).unwrap());
        let t2: MetricTableF64 = compute_metrics(&g, &c.dataset).unwrap();
        assert_eq!(t1, t2);
    }
}

/// P(U <= u) and P(U >= u) by enumerating every assignment of ranks to the
/// first sample. Only valid without ties.
fn enumerate_tails(n1: usize, n2: usize, u1: f64) -> (f64, f64) {
    let n = n1 + n2;
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        let u = rank_sum as f64 - (n1 * (n1 + 1) / 2) as f64;
        total += 1;
        le += (u <= u1) as u64;
        ge += (u >= u1) as u64;
    }
    (le as f64 / total as f64, ge as f64 / total as f64)
}

fn distinct_samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..9, 1usize..9)
        .prop_flat_map(|(n1, n2)| {
            (
                Just(n1),
                prop::sample::subsequence((0..200).collect::<Vec<i32>>(), n1 + n2),
                Just(n2),
            )
        })
        .prop_flat_map(|(n1, values, _)| {
            Just(values).prop_shuffle().prop_map(move |v| {
                let v: Vec<f64> = v.into_iter().map(f64::from).collect();
                (v[..n1].to_vec(), v[n1..].to_vec())
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_p_matches_enumeration((a, b) in distinct_samples()) {
        let u1 = a.iter().map(|x| b.iter().filter(|y| x > y).count()).sum::<usize>() as f64;
        let (le, ge) = enumerate_tails(a.len(), b.len(), u1);
        let less = mann_whitney_u(&a, &b, Alternative::Less).unwrap();
        let greater = mann_whitney_u(&a, &b, Alternative::Greater).unwrap();
        let two = mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap();
        prop_assert_eq!(less.method, Method::Exact);
        prop_assert_eq!(less.u_statistic, u1);
        prop_assert!((less.p_value - le).abs() < 1e-12);
        prop_assert!((greater.p_value - ge).abs() < 1e-12);
        prop_assert!((two.p_value - (2.0 * le.min(ge)).min(1.0)).abs() < 1e-12);
    }

    #[test]
    fn swapping_samples_mirrors_the_alternative(
        a in prop::collection::vec(0i32..15, 1..40),
        b in prop::collection::vec(0i32..15, 1..40),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = mann_whitney_u(&a, &b, Alternative::Less).unwrap();
        let ba = mann_whitney_u(&b, &a, Alternative::Greater).unwrap();
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
        let t1 = mann_whitney_u(&a, &b, Alternative::TwoSided).unwrap();
        let t2 = mann_whitney_u(&b, &a, Alternative::TwoSided).unwrap();
        prop_assert_eq!(t1.p_value, t2.p_value);
    }

    #[test]
    fn p_is_invariant_under_monotone_maps(
        a in prop::collection::vec(0i32..15, 1..40),
        b in prop::collection::vec(0i32..15, 1..40),
        shift in -1000i32..1000,
        scale in 0i32..8,
    ) {
        let map = |v: &[i32]| -> Vec<f64> {
            v.iter().map(|&x| f64::from(x) * 2f64.powi(scale) + f64::from(shift)).collect()
        };
        let plain: Vec<f64> = a.iter().map(|&x| f64::from(x)).collect();
        let other: Vec<f64> = b.iter().map(|&x| f64::from(x)).collect();
        for alt in [Alternative::Less, Alternative::Greater, Alternative::TwoSided] {
            let r1 = mann_whitney_u(&plain, &other, alt).unwrap();
            let r2 = mann_whitney_u(&map(&a), &map(&b), alt).unwrap();
            prop_assert_eq!(r1, r2);
        }
    }

    #[test]
    fn normal_approximation_tracks_exact(
        a in prop::collection::vec(0.0f64..1.0, 8..=12),
        b in prop::collection::vec(0.0f64..1.0, 8..=12),
        offset in 0.0f64..0.5,
    ) {
        let b: Vec<f64> = b.into_iter().map(|x| x + offset).collect();
        let mut pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        pooled.sort_by(f64::total_cmp);
        pooled.dedup();
        prop_assume!(pooled.len() == a.len() + b.len());
        for alt in [Alternative::Less, Alternative::Greater, Alternative::TwoSided] {
            let e = mann_whitney_u_using(&a, &b, alt, Method::Exact).unwrap().p_value;
            let z = mann_whitney_u_using(&a, &b, alt, Method::NormalApprox).unwrap().p_value;
            prop_assert!((e - z).abs() <= 0.02, "{alt:?}: exact {e} normal {z}");
        }
    }
}

fn random_type_matrix() -> impl Strategy<Value = [[f64; 10]; 10]> {
    prop::array::uniform10(prop::array::uniform10(0.001f64..1.0)).prop_map(|mut m| {
        for row in &mut m {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hierarchy_commutes_with_relabeling(
        m in random_type_matrix(),
        perm in Just((0..10).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let mut p = [[0.0; 10]; 10];
        for i in 0..10 {
            for j in 0..10 {
                p[perm[i]][perm[j]] = m[i][j];
            }
        }
        let d1 = induce_hierarchy(&TypeMatrix::new(m).unwrap()).unwrap();
        let d2 = induce_hierarchy(&TypeMatrix::new(p).unwrap()).unwrap();

        let relabel = |t: SemanticType| SemanticType::from_index(perm[t.index()]).unwrap();
        for (x, y) in d1.merges().iter().zip(d2.merges()) {
            prop_assert!((x.similarity - y.similarity).abs() < 1e-12);
            prop_assert_eq!(x.size, y.size);
        }
        for n in 1..=10 {
            let mut mapped: Vec<Vec<SemanticType>> = d1
                .cut(n)
                .into_iter()
                .map(|c| {
                    let mut c: Vec<_> = c.into_iter().map(relabel).collect();
                    c.sort();
                    c
                })
                .collect();
            mapped.sort();
            prop_assert_eq!(mapped, d2.cut(n));
        }
    }

    #[test]
    fn merge_similarities_never_increase(m in random_type_matrix()) {
        let d = induce_hierarchy(&TypeMatrix::new(m).unwrap()).unwrap();
        let merges = d.merges();
        prop_assert_eq!(merges.len(), 9);
        for w in merges.windows(2) {
            prop_assert!(w[1].similarity <= w[0].similarity + 1e-12);
        }
        prop_assert_eq!(merges.last().unwrap().size, 10);
    }

    #[test]
    fn annotation_round_trip(
        recs in prop::collection::vec(
            (
                "\\PC{0,12}", "[a-zé]{1,8}", "\\PC{0,12}",
                0usize..10, 0usize..4, 0usize..10, any::<bool>(),
            ),
            1..30,
        )
    ) {
        let mut lemma_types = std::collections::HashMap::new();
        let mut records = Vec::new();
        for (i, (pre, lemma, post, lt, label, ct, upper)) in recs.into_iter().enumerate() {
            let lt = *lemma_types.entry(lemma.clone()).or_insert(SemanticType::from_index(lt).unwrap());
            let label = SentenceLabel::ALL[label];
            let ct = SemanticType::from_index(ct).unwrap();
            let ct = match label {
                SentenceLabel::Matching if upper => Some(lt),
                SentenceLabel::Matching | SentenceLabel::Unrestricted => None,
                _ if ct == lt => Some(SemanticType::from_index((ct.index() + 1) % 10).unwrap()),
                _ => Some(ct),
            };
            let surface = if upper { lemma.to_uppercase() } else { lemma.clone() };
            let start = pre.chars().count();
            let span = (start, start + surface.chars().count());
            let sentence = format!("{pre}{surface}{post}");
            records.push(
                InstanceRecord::new(format!("r{i}"), lemma, sentence, span, lt, label, ct).unwrap(),
            );
        }
        let d = Dataset::new(records).unwrap();
        let mut buf = Vec::new();
        d.write_jsonl(&mut buf).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &d);
        let mut again = Vec::new();
        back.write_jsonl(&mut again).unwrap();
        prop_assert_eq!(again, buf);
    }
}

#[test]
fn synthetic_degenerate_geometry_is_pure() {
    let cfg = SynthConfig {
        within_type_sigma: 1e-9,
        coercion_fraction: 0.0,
        ..SynthConfig::default()
    };
    let out = generate::<f32>(&cfg).unwrap();
    let corpus = align(&out.plain, &out.dataset).unwrap();
    let g = build_graph(&corpus, 10).unwrap();
    let t: MetricTableF64 = compute_metrics(&g, &out.dataset).unwrap();
    let matching = t.nte_sample(SentenceLabel::Matching);
    assert!(!matching.is_empty());
    assert_eq!(matching.iter().sum::<f64>() / matching.len() as f64, 0.0);
    assert!(t.nte_sample(SentenceLabel::Coercion).is_empty());

    let heat = heatmap_by_lexical_type(&t.rows, &DEFAULT_FILTER).unwrap();
    for (i, d) in heat.diagonal().iter().enumerate() {
        assert_eq!(*d, 1.0, "row {i}");
    }
}

#[test]
fn synthetic_generation_is_reproducible() {
    let cfg = SynthConfig::default();
    let a = generate::<f32>(&cfg).unwrap();
    let b = generate::<f32>(&cfg).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.plain.vector_bytes(), b.plain.vector_bytes());
    assert_eq!(a.masked.vector_bytes(), b.masked.vector_bytes());
    let c = generate::<f32>(&SynthConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a.plain.vector_bytes(), c.plain.vector_bytes());
}

fn fixed_table(label_nte: &[(SentenceLabel, Vec<usize>)]) -> MetricTable<f64> {
    // NTE of each row is set by how many types share its neighbors equally
    let mut rows = Vec::new();
    for (label, spreads) in label_nte {
        for (i, &spread) in spreads.iter().enumerate() {
            let mut counts = [0usize; 10];
            for c in counts.iter_mut().take(spread) {
                *c = 10 / spread;
            }
            let lt = SemanticType::Animal;
            let ct = match label {
                SentenceLabel::Matching => Some(lt),
                SentenceLabel::Unrestricted => None,
                _ => Some(SemanticType::Food),
            };
            rows.push(metrics::MetricRow::from_distribution(
                format!("{label}-{i}"),
                *label,
                lt,
                ct,
                TypeDistributionF64::from_counts(&counts, 10),
            ));
        }
    }
    MetricTable { k: 10, denominator: NtpDenominator::K, rows }
}

#[test]
fn comparison_on_fixed_entropies() {
    let table = fixed_table(&[
        (SentenceLabel::Matching, vec![1; 12]),
        (SentenceLabel::Coercion, vec![2; 12]),
        (SentenceLabel::OtherMismatch, vec![2; 12]),
    ]);
    let report = compare_sentence_types(&[("g", &table)]).unwrap();

    let m = report.mean("g", SentenceLabel::Matching).unwrap();
    let c = report.mean("g", SentenceLabel::Coercion).unwrap();
    assert_eq!(m, 0.0);
    assert!((c - 2f64.ln()).abs() < 1e-15);
    assert_eq!(report.mean("g", SentenceLabel::Unrestricted), None);

    let [mat_coer, mat_unres, coer_unres, coer_other] = SENTENCE_TYPE_HYPOTHESES;
    let r = report.test("g", &mat_coer).unwrap();
    assert_eq!(r.verdict, Verdict::Confirmed("***"));
    assert_eq!(r.result.unwrap().u_statistic, 0.0);
    assert_eq!(report.test("g", &coer_other).unwrap().verdict, Verdict::NotConfirmed);
    assert_eq!(report.test("g", &coer_unres).unwrap().verdict, Verdict::Untestable);
    assert_eq!(report.test("g", &mat_unres).unwrap().verdict, Verdict::Untestable);
    assert_eq!(coer_other.name(), "coercion!=other_mismatch");
}
