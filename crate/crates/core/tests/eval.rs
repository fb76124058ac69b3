use proptest::prelude::*;
use scbow_core::corpus::Vocabulary;
use scbow_core::eval::{self, SentencePair};
use scbow_core::model::EmbeddingMatrix;

fn paired(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|len| {
        (
            prop::collection::vec(-100.0f64..100.0, len),
            prop::collection::vec(-100.0f64..100.0, len),
        )
    })
}

proptest! {
    #[test]
    fn correlations_symmetric_and_bounded((x, y) in paired(3..60)) {
        let p = eval::pearson(&x, &y).unwrap();
        let s = eval::spearman(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&p) && (-1.0..=1.0).contains(&s));
        prop_assert!((p - eval::pearson(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((s - eval::spearman(&y, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pearson_affine_invariant((x, y) in paired(3..60), a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((eval::pearson(&x, &y).unwrap() - eval::pearson(&moved, &y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn spearman_monotone_invariant((x, y) in paired(3..60)) {
        let moved: Vec<f64> = x.iter().map(|v| (v / 50.0).exp() * 3.0 - 1.0).collect();
        prop_assert!((eval::spearman(&x, &y).unwrap() - eval::spearman(&moved, &y).unwrap()).abs() < 1e-12);
        prop_assert!((eval::spearman(&x, &moved).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_p_in_unit_interval((a, b) in paired(1..80)) {
        if let Ok(r) = eval::wilcoxon_signed_rank(&a, &b) {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert_eq!(r.exact, r.n_effective <= eval::WILCOXON_EXACT_MAX_N);
            prop_assert_eq!(r.significant, r.p_value < 1e-4);
        }
    }
}

#[test]
fn exact_p_close_to_normal_approximation_at_switch() {
    use statrs::distribution::{ContinuousCDF, Normal};
    let a: Vec<f64> = (1..=25).map(|i| i as f64 * if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
    let exact = eval::wilcoxon_signed_rank(&a, &[0.0; 25]).unwrap();
    assert!(exact.exact);
    assert_eq!(exact.statistic, (3..=24).step_by(3).sum::<i32>() as f64);
    let (n, w) = (25.0f64, exact.statistic);
    let mean = n * (n + 1.0) / 4.0;
    let sd = (n * (n + 1.0) * (2.0 * n + 1.0) / 24.0).sqrt();
    let z = ((w - mean).abs() - 0.5) / sd;
    let approx = 2.0 * Normal::new(0.0, 1.0).unwrap().sf(z);
    assert!((exact.p_value - approx).abs() < 0.01, "{} vs {approx}", exact.p_value);
}

#[test]
fn evaluate_is_pure_and_counts_skips() {
    let vocab = Vocabulary::from_tokens(["a", "b", "c"]).unwrap();
    let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.2], vec![0.1, 1.0], vec![0.7, 0.7]]).unwrap();
    let pairs = eval::parse_pairs("a\tb\t1.0\na b\tc\t3.5\nc\ta\t4\nq\ta\t2\nb\tc\n").unwrap();
    let r1 = eval::evaluate(&m, &vocab, &pairs).unwrap();
    let r2 = eval::evaluate(&m, &vocab, &pairs).unwrap();
    assert_eq!(r1, r2);
    assert_eq!((r1.n_scored, r1.n_skipped), (3, 2));
    assert_eq!(r1.system_scores.len(), 5);
    assert!(r1.system_scores[3].is_none());
    // gold-less pair is scored by the system but excluded from correlation
    assert!(r1.system_scores[4].is_some());
}

#[test]
fn system_equal_to_gold_correlates_perfectly() {
    let vocab = Vocabulary::from_tokens(["x", "y"]).unwrap();
    let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let raw = [("x", "x"), ("x", "y"), ("x y", "x"), ("x y y", "y")];
    let pairs: Vec<SentencePair> = raw
        .iter()
        .map(|(l, r)| {
            let mut p = SentencePair { left: l.to_string(), right: r.to_string(), gold: None };
            p.gold = eval::pair_similarity(&m, &vocab, &p);
            p
        })
        .collect();
    let report = eval::evaluate(&m, &vocab, &pairs).unwrap();
    assert!((report.pearson - 1.0).abs() < 1e-12);
    assert!((report.spearman - 1.0).abs() < 1e-12);
}
