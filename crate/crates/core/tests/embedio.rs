use proptest::prelude::*;
use scbow_core::corpus::Vocabulary;
use scbow_core::embedio::{self, Checkpoint, EmbeddingTable};
use scbow_core::model::{EmbeddingMatrix, TrainState};

fn arb_table() -> impl Strategy<Value = EmbeddingTable> {
    (1usize..12, 1usize..6, any::<bool>()).prop_flat_map(|(v, d, with_counts)| {
        (
            prop::collection::vec(any::<f64>(), v * d),
            prop::collection::vec(5u64..1000, v),
        )
            .prop_map(move |(values, counts)| {
                let tokens: Vec<String> = (0..v).map(|i| format!("t{i}")).collect();
                let vocab = if with_counts {
                    Vocabulary::from_parts(tokens, Some(counts), 5).unwrap()
                } else {
                    Vocabulary::from_tokens(tokens).unwrap()
                };
                EmbeddingTable::new(vocab, EmbeddingMatrix::from_values(v, d, values).unwrap()).unwrap()
            })
    })
}

fn bit_equal(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> bool {
    a.dim() == b.dim() && a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits())
}

proptest! {
    #[test]
    fn checkpoint_round_trip(table in arb_table(), state in proptest::option::of(any::<[u64; 4]>())) {
        let ckpt = Checkpoint {
            table,
            state: state.map(|s| TrainState { seed: s[0], epochs_done: s[1], batches_done: s[2], total_batches: s[3] }),
        };
        let back = embedio::decode_checkpoint(&embedio::encode_checkpoint(&ckpt)).unwrap();
        prop_assert_eq!(&back.table.vocab, &ckpt.table.vocab);
        prop_assert_eq!(back.state, ckpt.state);
        prop_assert!(bit_equal(&back.table.matrix, &ckpt.table.matrix));
    }

    #[test]
    fn text_round_trip(table in arb_table()) {
        let mut buf = Vec::new();
        embedio::write_text(&table, &mut buf).unwrap();
        let back = embedio::read_text(buf.as_slice()).unwrap();
        prop_assert_eq!(back.vocab.tokens(), table.vocab.tokens());
        // NaN payloads are not preserved by decimal text
        let same = table.matrix.values().iter().zip(back.matrix.values())
            .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        prop_assert!(same);
    }
}

#[test]
fn load_table_detects_format() {
    let dir = tempfile::tempdir().unwrap();
    let table = EmbeddingTable::new(
        Vocabulary::from_tokens(["a", "b"]).unwrap(),
        EmbeddingMatrix::from_rows(&[vec![0.25, -1.5], vec![3.0, 1e-7]]).unwrap(),
    )
    .unwrap();
    let text = dir.path().join("t.txt");
    let bin = dir.path().join("t.ckpt");
    embedio::export_text(&table, &text).unwrap();
    embedio::save_checkpoint(&Checkpoint { table: table.clone(), state: None }, &bin).unwrap();
    assert_eq!(embedio::load_table(&text).unwrap(), table);
    assert_eq!(embedio::load_table(&bin).unwrap(), table);
    assert_eq!(std::fs::read(&bin).unwrap()[..4], *b"SCBW");
}

#[test]
fn unwritable_path_is_io_error() {
    let table = EmbeddingTable::new(
        Vocabulary::from_tokens(["a"]).unwrap(),
        EmbeddingMatrix::from_rows(&[vec![1.0]]).unwrap(),
    )
    .unwrap();
    let r = embedio::export_text(&table, std::path::Path::new("/nonexistent-dir/x/y.txt"));
    assert!(matches!(r, Err(scbow_core::Error::Io(_))));
}
