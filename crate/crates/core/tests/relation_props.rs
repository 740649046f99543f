use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relnet::autodiff::{Graph, Matrix, NodeId, ParamStore};
use relnet::corpus::{EmbeddingTable, EncodedDoc};
use relnet::model::{Example, ModelConfig, RnModel, Variant};
use relnet::relation::{attend_pool, attention, Channel, ChannelParams};

struct Pooled {
    alpha: Matrix<f64>,
    pooled: Matrix<f64>,
    relations: Vec<Option<Matrix<f64>>>,
    lengths: Vec<usize>,
}

fn pool(seed: u64, b: usize, l: usize, k: usize, spread: f64) -> Pooled {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lengths: Vec<usize> = (0..b).map(|_| rng.gen_range(1..=l)).collect();
    let longest = *lengths.iter().max().unwrap();
    let channel = ChannelParams::new(Channel::Topic, 2, 1, k, l, false);
    let mut store = ParamStore::new();
    channel.init(&mut store, &mut rng).unwrap();
    *store.value_mut("rel_v.att.b").unwrap() = Matrix::from_fn(1, l, |_, _| rng.gen_range(-spread..spread));
    let relations: Vec<Option<Matrix<f64>>> = (0..l)
        .map(|t| (t < longest).then(|| Matrix::from_fn(b, k, |_, _| rng.gen_range(-spread..spread))))
        .collect();
    let mut g = Graph::new();
    let nodes = channel.bind(&mut g, &store).unwrap();
    let ids: Vec<Option<NodeId>> = relations.iter().map(|r| r.clone().map(|m| g.constant(m))).collect();
    let alpha = attention(&mut g, &ids, &lengths, &nodes).unwrap();
    let pooled = attend_pool(&mut g, alpha, &ids).unwrap();
    Pooled {
        alpha: g.value(alpha).clone(),
        pooled: g.value(pooled).clone(),
        relations,
        lengths,
    }
}

proptest! {
    #[test]
    fn attention_is_a_distribution_over_real_positions(
        seed in any::<u64>(), b in 1usize..5, l in 1usize..12, k in 1usize..6, spread in 0.1f64..50.0
    ) {
        let p = pool(seed, b, l, k, spread);
        for (row, &len) in p.lengths.iter().enumerate() {
            let a = p.alpha.row(row);
            prop_assert!(a.iter().all(|&x| x >= 0.0));
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            prop_assert!(a[len..].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn pooled_vector_lies_in_the_hull_of_real_rows(
        seed in any::<u64>(), b in 1usize..5, l in 1usize..12, k in 1usize..6, spread in 0.1f64..50.0
    ) {
        let p = pool(seed, b, l, k, spread);
        for (row, &len) in p.lengths.iter().enumerate() {
            for j in 0..k {
                let vals: Vec<f64> = p.relations[..len].iter().map(|r| r.as_ref().unwrap()[(row, j)]).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
                let x = p.pooled[(row, j)];
                prop_assert!(x >= lo - slack && x <= hi + slack, "{} not in [{}, {}]", x, lo, hi);
            }
        }
    }
}

fn example(ids: &[usize], l: usize, sentiment: Vec<f64>) -> Example {
    let mut padded = ids.to_vec();
    padded.resize(l, 0);
    Example {
        id: "x".into(),
        doc: EncodedDoc {
            ids: padded,
            mask: (0..l).map(|i| i < ids.len()).collect(),
            label: Some(0),
        },
        sentiment,
        topics: vec![0.5, 0.3, 0.2],
        label: Some(0),
    }
}

#[test]
fn indicator_values_at_padded_positions_are_ignored() {
    let l = 7;
    let config = ModelConfig {
        variant: Variant::Full,
        max_len: l,
        embed_dim: 6,
        hidden: 4,
        num_topics: 3,
        relation_dim: 5,
        head_dim: 5,
        num_classes: 3,
        shared_attention: false,
    };
    let model = RnModel::<f64>::build(config, EmbeddingTable::random(10, 6, 1, true), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let len = rng.gen_range(1..l);
        let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(2..10)).collect();
        let clean: Vec<f64> = (0..l).map(|i| if i < len { rng.gen_range(-2.0..2.0) } else { 0.0 }).collect();
        let mut noisy = clean.clone();
        for s in &mut noisy[len..] {
            *s = rng.gen_range(-50.0..50.0);
        }
        // a full-length neighbour keeps every position live in the batch
        let other = example(&[3; 7], l, vec![1.0; l]);
        let a = model.predict(&[&example(&ids, l, clean), &other]).unwrap();
        let b = model.predict(&[&example(&ids, l, noisy), &other]).unwrap();
        assert_eq!(a, b);
    }
}
