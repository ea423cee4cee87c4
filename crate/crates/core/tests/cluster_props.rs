mod common;

use common::props::{self, random_points};

use latent_ilp::cluster::{
    cluster_loss, descend, g_weights, hard_assign, hard_assign_all, init_centroids,
    CentroidSet, EmbeddingSource, EmbeddingTable,
};
use latent_ilp::datasets::{gen_kandinsky, FeatureEncoder, KandinskyPattern};
use latent_ilp::par::ExecMode;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[test]
fn large_alpha_is_hard_assignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    while checked < 100 {
        let k = rng.gen_range(2..=5);
        let cs = random_points(&mut rng, k, 3, 1.0);
        let e = random_points(&mut rng, 1, 3, 1.0).remove(0);
        let mut d: Vec<f64> = cs.iter().map(|c| c.iter().zip(&e).map(|(a, b)| (a - b).powi(2)).sum()).collect();
        let argmin = (0..k).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        d.sort_by(f64::total_cmp);
        // Needs a gap of 0.02 so that exp(-1e3 * gap) is below 1e-6.
        if d[1] - d[0] < 0.02 {
            continue;
        }
        let c = CentroidSet::new(Array2::from_shape_vec((k, 3), cs.concat()).unwrap(), 1e3).unwrap();
        let view = ndarray::ArrayView1::from(&e[..]);
        let w = g_weights(view, &c).unwrap();
        assert!(w[argmin] >= 1.0 - 1e-6);
        assert_eq!(hard_assign(view, &c), argmin);
        checked += 1;
    }
}

#[test]
fn loss_is_nonnegative_and_zero_on_centroids() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..50 {
        let es = random_points(&mut rng, 8, 3, 1.0);
        let t = EmbeddingTable::from_rows(&es, EmbeddingSource::ToyEncoder).unwrap();
        let cs = random_points(&mut rng, 3, 3, 1.0);
        let c = CentroidSet::new(Array2::from_shape_vec((3, 3), cs.concat()).unwrap(), 2.0).unwrap();
        assert!(cluster_loss(&t, &c) >= 0.0);
    }
    // Every point on its own centre with large alpha.
    let es = random_points(&mut rng, 4, 2, 5.0);
    let t = EmbeddingTable::from_rows(&es, EmbeddingSource::ToyEncoder).unwrap();
    let c = CentroidSet::new(Array2::from_shape_vec((4, 2), es.concat()).unwrap(), 50.0).unwrap();
    assert!(cluster_loss(&t, &c) < 1e-12);
}

fn blobs(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let centres = [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
    let mut out = Vec::new();
    for c in &centres {
        for _ in 0..20 {
            out.push(vec![c[0] + rng.gen_range(-0.4..0.4), c[1] + rng.gen_range(-0.4..0.4)]);
        }
    }
    out
}

#[test]
fn descent_lowers_the_loss_towards_the_kmeans_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let es = blobs(&mut rng);
    let table = EmbeddingTable::from_rows(&es, EmbeddingSource::ToyEncoder).unwrap();
    let mut c = init_centroids(&table, 3, 4.0, 7).unwrap();
    let trace = descend(&table, &mut c, 0.1, 300, ExecMode::Sequential);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "loss rose from {} to {}", w[0], w[1]);
    }

    // Best of several Lloyd restarts from random data points.
    let mut best = f64::INFINITY;
    for s in 0..20 {
        let mut r = ChaCha8Rng::seed_from_u64(s);
        let start: Vec<Vec<f64>> = (0..3).map(|_| es[r.gen_range(0..es.len())].clone()).collect();
        let (cs, _) = common::kmeans(&es, &start);
        best = best.min(common::kmeans_cost(&es, &cs));
    }
    let ours = common::kmeans_cost(&es, &rows(&c.centers));
    assert!(ours <= 1.05 * best, "{ours} vs optimum {best}");
}

#[test]
fn noise_free_kandinsky_objects_cluster_by_feature() {
    let set = gen_kandinsky(KandinskyPattern::TwoPair, 30, 30, 3);
    let enc = FeatureEncoder::new(0.0);
    let objects: Vec<_> = set.train.iter().flat_map(|i| i.objects.iter().copied()).collect();
    let es: Vec<Vec<f64>> = objects.iter().map(|o| enc.encode(o, 0)).collect();
    let kinds: Vec<usize> = objects.iter().map(|o| o.shape as usize * 3 + o.color as usize).collect();
    let mut present: Vec<usize> = kinds.clone();
    present.sort();
    present.dedup();
    assert_eq!(present.len(), 9);

    // Oracle: Lloyd started from one object of each kind.
    let start: Vec<Vec<f64>> = present.iter().map(|k| es[kinds.iter().position(|x| x == k).unwrap()].clone()).collect();
    let (_, oracle) = common::kmeans(&es, &start);
    assert!(common::same_partition(&oracle, &kinds));

    let table = EmbeddingTable::from_rows(&es, EmbeddingSource::ToyEncoder).unwrap();
    let mut c = init_centroids(&table, 9, 10.0, 1).unwrap();
    descend(&table, &mut c, 0.1, 200, ExecMode::Parallel);
    assert!(common::same_partition(&hard_assign_all(&table, &c), &oracle));
}

#[test]
fn too_many_centroids_is_an_error() {
    let t = EmbeddingTable::identity(3);
    assert!(init_centroids(&t, 4, 1.0, 0).is_err());
    assert!(init_centroids(&t, 0, 1.0, 0).is_err());
    assert!(CentroidSet::new(Array2::zeros((2, 3)), 0.0).is_err());
    let c = CentroidSet::new(Array2::zeros((2, 3)), 1.0).unwrap();
    assert!(g_weights(ndarray::ArrayView1::from(&[1.0, 2.0][..]), &c).is_err());
    assert!(g_weights(ndarray::ArrayView1::from(&[1.0, f64::NAN, 0.0][..]), &c).is_err());
}

#[test]
fn loss_and_gradient_match_reference() {
    props::cluster_gradients();
}

#[test]
fn weights_are_a_distribution_and_follow_centroid_order() {
    props::assignment_rows_sum_to_one();
}
