use std::fs::File;
use std::io::{BufReader, BufWriter};

use latent_ilp::cluster::{hard_assign_all, init_centroids, EmbeddingSource, EmbeddingTable};
use latent_ilp::datasets::{gen_kandinsky, gen_mnist_sequence, read_sidecar, write_sidecar, EmbeddingRecord, KandinskyPattern, Parity};
use latent_ilp::pipeline::InstanceData;
use latent_ilp::Error;

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("sidecar-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn file_round_trip_preserves_every_bit() {
    let task = gen_mnist_sequence(12, Parity::OddIndex, 3).unwrap();
    let (train, _) = task.embedding_records();
    let path = tmp("mnist.jsonl");
    write_sidecar(BufWriter::new(File::create(&path).unwrap()), &train).unwrap();
    let back = read_sidecar(BufReader::new(File::open(&path).unwrap())).unwrap();
    assert_eq!(back.len(), 12);
    for (a, b) in train.iter().zip(&back) {
        assert_eq!(a.id, b.id);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.vector), bits(&b.vector));
    }
}

#[test]
fn sequence_ingestion_replaces_embeddings_by_id() {
    let task = gen_mnist_sequence(12, Parity::OddIndex, 3).unwrap();
    let (mut train, test) = task.embedding_records();
    // Lines in any order; the vectors become label one-hots without noise.
    train.reverse();
    for r in &mut train {
        let i: usize = r.id.trim_start_matches("img").parse().unwrap();
        r.vector = (0..10).map(|k| if k == task.train_labels[i - 1] { 1.0 } else { 0.0 }).collect();
    }
    let task = task.with_embeddings(&train, &test).unwrap();
    for (row, &label) in task.train_embeddings.iter().zip(&task.train_labels) {
        assert_eq!(row.iter().position(|&x| x == 1.0), Some(label));
    }
    let table = EmbeddingTable::from_rows(&task.train_embeddings, EmbeddingSource::ExternalFile).unwrap();
    let c = init_centroids(&table, table.len().min(7), 1.0, 0).unwrap();
    assert_eq!(hard_assign_all(&table, &c).len(), 12);
}

#[test]
fn missing_or_ragged_records_are_rejected() {
    let task = gen_mnist_sequence(12, Parity::OddIndex, 3).unwrap();
    let (train, test) = task.embedding_records();
    let short = &train[1..];
    assert!(matches!(task.clone().with_embeddings(short, &test), Err(Error::MissingEmbedding(_))));
    let wide: Vec<EmbeddingRecord> =
        test.iter().map(|r| EmbeddingRecord { id: r.id.clone(), vector: vec![0.0; 3] }).collect();
    assert!(matches!(task.with_embeddings(&train, &wide), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn instance_ingestion_round_trips() {
    let set = gen_kandinsky(KandinskyPattern::OneRed, 5, 5, 1);
    let data = InstanceData::from_set(&set, 0.02, 1);
    let recs = data.embedding_records();
    let n_objects: usize = set.train.iter().chain(&set.test).map(|i| i.objects.len()).sum();
    assert_eq!(recs.len(), n_objects);

    let path = tmp("kandinsky.jsonl");
    write_sidecar(BufWriter::new(File::create(&path).unwrap()), &recs).unwrap();
    let back = read_sidecar(BufReader::new(File::open(&path).unwrap())).unwrap();
    let fresh = InstanceData::from_set(&set, 0.5, 99).with_embeddings(&back).unwrap();
    assert_eq!(fresh.train, data.train);
    assert_eq!(fresh.test, data.test);

    assert!(matches!(
        InstanceData::from_set(&set, 0.0, 0).with_embeddings(&back[1..]),
        Err(Error::MissingEmbedding(_))
    ));
}

#[test]
fn malformed_lines_are_reported() {
    assert!(matches!(read_sidecar("{\"id\":\"a\"}\n".as_bytes()), Err(Error::Format(_))));
    assert!(matches!(read_sidecar("not json\n".as_bytes()), Err(Error::Format(_))));
    assert!(read_sidecar("{\"id\":\"a\",\"vector\":[]}\n".as_bytes()).is_err());
    assert!(read_sidecar("\n\n".as_bytes()).unwrap().is_empty());
}
