use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scbow_core::analysis::{benchmark_pairs, nearest_neighbors, norm_ranking};
use scbow_core::corpus::Vocabulary;
use scbow_core::eval::SentencePair;
use scbow_core::model::{cosine, norm, EmbeddingMatrix};

fn random_table(v: usize, d: usize, seed: u64) -> (EmbeddingMatrix, Vocabulary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // coarse values so ties in norm actually happen
    let values = (0..v * d).map(|_| rng.random_range(-3..=3) as f64).collect();
    (
        EmbeddingMatrix::from_values(v, d, values).unwrap(),
        Vocabulary::from_tokens((0..v).map(|i| format!("w{i:05}"))).unwrap(),
    )
}

#[test]
fn norm_ranking_matches_full_sort() {
    for (v, seed) in [(1, 1), (17, 2), (500, 3), (10_000, 4)] {
        let (m, vocab) = random_table(v, 3, seed);
        let mut brute: Vec<(String, f64)> = (0..v).map(|i| (vocab.tokens()[i].clone(), norm(m.row(i)))).collect();
        brute.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let k = v.min(10);
        let (low, high) = norm_ranking(&m, &vocab, k).unwrap();
        assert_eq!(low.entries, brute[..k]);
        let mut top: Vec<_> = brute[v - k..].to_vec();
        top.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        assert_eq!(high.entries, top);
    }
}

#[test]
fn zero_row_ranks_lowest() {
    let (mut m, vocab) = random_table(50, 4, 9);
    m.row_mut(31).fill(0.0);
    let (low, _) = norm_ranking(&m, &vocab, 1).unwrap();
    assert_eq!(low.entries[0].0, "w00031");
}

#[test]
fn neighbours_match_exhaustive_scan() {
    let (mut m, vocab) = random_table(300, 5, 5);
    let dup = m.row(7).to_vec();
    m.row_mut(8).copy_from_slice(&dup);
    for threshold in [-1.0, 0.0, 0.6] {
        let hits = nearest_neighbors(&m, &vocab, "w00007", threshold).unwrap();
        let expected = (0..300)
            .filter(|&i| i != 7)
            .filter(|&i| cosine(m.row(7), m.row(i)).is_ok_and(|c| c >= threshold))
            .count();
        assert_eq!(hits.len(), expected);
        assert!(hits.windows(2).all(|w| w[0].1 >= w[1].1));
        assert_eq!(hits[0].0, "w00008");
        assert!((hits[0].1 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn benchmark_scales_roughly_linearly() {
    let (m, vocab) = random_table(2000, 300, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sentence = |rng: &mut ChaCha8Rng| {
        (0..12).map(|_| format!("w{:05}", rng.random_range(0..2000))).collect::<Vec<_>>().join(" ")
    };
    let pairs: Vec<SentencePair> = (0..4000)
        .map(|_| SentencePair { left: sentence(&mut rng), right: sentence(&mut rng), gold: None })
        .collect();
    let doubled: Vec<SentencePair> = pairs.iter().chain(&pairs).cloned().collect();
    // best of several runs to damp scheduler noise
    let best = |p: &[SentencePair]| {
        (0..5)
            .map(|_| benchmark_pairs(&m, &vocab, p).total_seconds)
            .fold(f64::INFINITY, f64::min)
    };
    let ratio = best(&doubled) / best(&pairs);
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    let report = benchmark_pairs(&m, &vocab, &pairs);
    assert_eq!(report.scored, 4000);
    assert!(report.seconds_per_pair > 0.0);
}
