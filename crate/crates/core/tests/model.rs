mod common;

use std::rc::Rc;

use common::*;
use litkg::ingest::AttributeVectors;
use litkg::kg::{EntityId, RelationKind, Triple};
use litkg::model::{
    aggregate_neighborhood, apply_aggregator, attention_scores, final_representation, forward, fuse_literals, names,
    propagate_layer, represent, residual_identity, Aggregator, AggregatorVars, Bound, GateVars, ModelParams,
    NormalizedAdjacency, PropagationGraph,
};
use litkg::numerics::{Tape, Tensor};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn m(rows: &[&[f64]]) -> Tensor {
    Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn zero_gate_halves_embedding() {
    let tape = Tape::new();
    let e = m(&[&[0.4, -1.2, 3.0], &[2.0, 0.0, -0.5]]);
    let z = |r, c| tape.constant(Tensor::zeros(&[r, c]));
    let g = GateVars { w_e: z(3, 3), w_n: z(2, 3), w_t: z(4, 3), b: tape.constant(Tensor::zeros(&[3])), v_e: z(3, 3), v_n: z(2, 3), v_t: z(4, 3) };
    let out = fuse_literals(&tape, tape.constant(e.clone()), z(2, 2), z(2, 4), &g).unwrap();
    for (o, x) in tape.value(out).data().iter().zip(e.data()) {
        assert_eq!(*o, 0.5 * x);
    }
}

#[test]
fn gate_matches_scalar_oracle() {
    // e, n, t each 2-wide; hand-set blocks
    let (e, n, t) = ([0.5, -1.0], [0.2, 0.8], [1.0, 0.0]);
    let w_e = [[0.1, 0.2], [0.3, -0.4]];
    let w_n = [[1.0, 0.0], [0.0, 1.0]];
    let w_t = [[0.5, 0.5], [-0.5, 0.5]];
    let b = [0.1, -0.1];
    let v_e = [[0.2, 0.0], [0.0, 0.2]];
    let v_n = [[-1.0, 0.5], [0.5, -1.0]];
    let v_t = [[0.3, 0.3], [0.3, 0.3]];
    let mut expect = [0.0; 2];
    for j in 0..2 {
        let mut pm: f64 = b[j];
        let mut pn: f64 = 0.0;
        for i in 0..2 {
            pm += e[i] * w_e[i][j] + n[i] * w_n[i][j] + t[i] * w_t[i][j];
            pn += e[i] * v_e[i][j] + n[i] * v_n[i][j] + t[i] * v_t[i][j];
        }
        let mu = 1.0 / (1.0 + (-pm).exp());
        expect[j] = mu * pn.tanh() + (1.0 - mu) * e[j];
    }
    let tape = Tape::new();
    let c = |r: [[f64; 2]; 2]| tape.constant(m(&[&r[0], &r[1]]));
    let g = GateVars { w_e: c(w_e), w_n: c(w_n), w_t: c(w_t), b: tape.constant(Tensor::vector(b.to_vec())), v_e: c(v_e), v_n: c(v_n), v_t: c(v_t) };
    let row = |v: [f64; 2]| tape.constant(m(&[&v]));
    let out = fuse_literals(&tape, row(e), row(n), row(t), &g).unwrap();
    for (o, x) in tape.value(out).data().iter().zip(expect) {
        assert!((o - x).abs() < 1e-12);
    }
}

#[test]
fn attention_random_case() {
    let fx = Fixture::new(2, 1, &config(Aggregator::Gcn, 1, false, 3), 3);
    let w = fx.p(names::ATTENTION);
    let (h, r, t) = ([0.3, -0.7, 1.1], [0.05, 0.2, -0.4], [-0.6, 0.9, 0.25]);
    let key: Vec<f64> = add(&vecmat(&h, &w), &r).iter().map(|x| x.tanh()).collect();
    let expect = dot(&vecmat(&t, &w), &key);
    let tape = Tape::new();
    let row = |v: [f64; 3]| tape.constant(m(&[&v]));
    let s = attention_scores(&tape, row(h), row(r), row(t), tape.constant(fx.params.get(names::ATTENTION).unwrap().clone())).unwrap();
    assert!((tape.value(s).data()[0] - expect).abs() < 1e-12);
}

#[test]
fn softmax_closed_forms() {
    let tape = Tape::new();
    let s = tape.constant(Tensor::vector(vec![2f64.ln(), 0.0, 1.7, 0.3, 0.3]));
    let out = tape.segment_softmax(s, Rc::from(vec![0, 2, 3, 5])).unwrap();
    let v = tape.value(out);
    let expect = [2.0 / 3.0, 1.0 / 3.0, 1.0, 0.5, 0.5];
    for (a, b) in v.data().iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn aggregation_cases() {
    // entity 0 has neighbors 1 and 2 carrying v and -v, entity 3 has neighbor 1 only
    let t = |h, tl| Triple::new(EntityId(h), RelationKind::RecordSymptom, EntityId(tl));
    let g = PropagationGraph::new(4, &[t(0, 1), t(0, 2), t(3, 1)]).unwrap();
    let tape = Tape::new();
    let h = tape.constant(m(&[&[9.0, 9.0], &[1.0, -2.0], &[-1.0, 2.0], &[5.0, 5.0]]));
    let mut w = vec![0.0; g.num_edges()];
    for i in 0..4 {
        let r = g.edges_of(i);
        for e in r.clone() {
            w[e] = 1.0 / r.len() as f64;
        }
    }
    let out = aggregate_neighborhood(&tape, h, tape.constant(Tensor::vector(w)), &g).unwrap();
    let v = tape.value(out);
    assert_eq!(v.row(0), &[0.0, 0.0]);
    assert_eq!(v.row(3), &[1.0, -2.0]);
}

#[test]
fn bi_interaction_scalar_oracle() {
    let (h, hn) = ([0.5, -1.0], [2.0, 0.25]);
    let w1 = [[1.0, -0.5], [0.25, 0.75]];
    let w2 = [[-2.0, 1.0], [0.5, 0.5]];
    let lr = |x: f64| if x > 0.0 { x } else { 0.01 * x };
    let mut expect = [0.0; 2];
    for j in 0..2 {
        let s: f64 = (0..2).map(|i| (h[i] + hn[i]) * w1[i][j]).sum();
        let p: f64 = (0..2).map(|i| (h[i] * hn[i]) * w2[i][j]).sum();
        expect[j] = lr(s) + lr(p);
    }
    let tape = Tape::new();
    let c = |r: [[f64; 2]; 2]| tape.constant(m(&[&r[0], &r[1]]));
    let layer = AggregatorVars::BiInteraction { w1: c(w1), w2: c(w2) };
    let out = apply_aggregator(&tape, tape.constant(m(&[&h])), tape.constant(m(&[&hn])), &layer).unwrap();
    for (o, x) in tape.value(out).data().iter().zip(expect) {
        assert!((o - x).abs() < 1e-12);
    }
}

#[test]
fn residual_clamped_beta_case() {
    // α = 0.1, λ = 1, l = 1: β = ln(1/2) clamps to 0, so the output is σ(0.9·M + 0.1·H0)
    let cfg = litkg::model::ModelConfig { lambda_rc: 1.0, ..Default::default() };
    let beta = cfg.beta(1);
    assert_eq!(beta, 0.0);
    let tape = Tape::new();
    let mm = m(&[&[1.0, -2.0]]);
    let h0 = m(&[&[3.0, 4.0]]);
    let w = tape.constant(m(&[&[7.0, 1.0], &[1.0, 7.0]]));
    let out = residual_identity(&tape, tape.constant(mm), tape.constant(h0), 0.1, beta, w).unwrap();
    let expect = leaky(&[0.9 + 0.3, -1.8 + 0.4]);
    for (o, x) in tape.value(out).data().iter().zip(expect) {
        assert!((o - x).abs() < 1e-12);
    }
}

#[test]
fn head_two_layers_scalar_oracle() {
    let (h1, h2) = ([0.5, -1.0], [1.5, 0.25]);
    let w = [[0.1, 0.2], [0.3, 0.4], [-0.5, 0.6], [0.7, -0.8]];
    let b = [0.05, -0.05];
    let cat = [h1[0], h1[1], h2[0], h2[1]];
    let expect: Vec<f64> = (0..2).map(|j| (0..4).map(|i| cat[i] * w[i][j]).sum::<f64>() + b[j]).collect();
    let tape = Tape::new();
    let wt = tape.constant(m(&[&w[0], &w[1], &w[2], &w[3]]));
    let out = final_representation(
        &tape,
        &[tape.constant(m(&[&h1])), tape.constant(m(&[&h2]))],
        wt,
        tape.constant(Tensor::vector(b.to_vec())),
    )
    .unwrap();
    assert_eq!(tape.value(out).shape(), &[1, 2]);
    for (o, x) in tape.value(out).data().iter().zip(leaky(&expect)) {
        assert!((o - x).abs() < 1e-12);
    }
}

#[test]
fn one_layer_matches_per_triple_loop_for_every_aggregator() {
    for agg in Aggregator::ALL {
        for residual in [false, true] {
            for seed in 0..20u64 {
                let cfg = config(agg, 2, residual, 3);
                let n = 3 + (seed as usize % 8);
                let fx = Fixture::new(n, n + seed as usize % 5, &cfg, seed);
                let tape = Tape::new();
                let bound = Bound::bind(&tape, &fx.params);
                let h0 = litkg::model::initial_representation(&tape, &bound, &fx.attrs).unwrap();
                let h1 = propagate_layer(&tape, &bound, &cfg, &fx.graph, h0, h0, 0).unwrap();
                let naive0 = naive_fuse(&fx);
                assert!(max_abs_diff(&tape.value(h0), &naive0) < 1e-12);
                let naive1 = naive_layer(&fx, &cfg, &naive0, &naive0, 0);
                let err = max_abs_diff(&tape.value(h1), &naive1);
                assert!(err < 1e-10, "{agg} residual={residual} seed {seed}: {err}");
            }
        }
    }
}

#[test]
fn full_forward_on_chain_matches_loop() {
    let t = |h, r, tl| Triple::new(EntityId(h), r, EntityId(tl));
    let triples = vec![t(0, RelationKind::RecordAnimal, 1), t(1, RelationKind::AnimalSpecies, 2)];
    for agg in Aggregator::ALL {
        let cfg = config(agg, 2, true, 2);
        let fx = Fixture::with_triples(3, triples.clone(), &cfg, 11);
        let out = represent(&fx.params, &fx.graph, &fx.attrs).unwrap();
        assert!(max_abs_diff(&out, &naive_forward(&fx, &cfg)) < 1e-10, "{agg}");
    }
}

#[test]
fn isolated_entity_uses_self_path() {
    let cfg = config(Aggregator::Gcn, 1, false, 3);
    let fx = Fixture::with_triples(1, vec![], &cfg, 5);
    let out = represent(&fx.params, &fx.graph, &fx.attrs).unwrap();
    assert!(max_abs_diff(&out, &naive_forward(&fx, &cfg)) < 1e-12);
    assert!(out.is_finite());
}

#[test]
fn attention_weights_sum_to_one() {
    let cfg = config(Aggregator::Gcn, 1, false, 4);
    let fx = Fixture::new(10, 18, &cfg, 2);
    let tape = Tape::new();
    let bound = Bound::bind(&tape, &fx.params);
    let h = litkg::model::initial_representation(&tape, &bound, &fx.attrs).unwrap();
    let r = tape.gather_rows(bound.get(names::RELATION).unwrap(), fx.graph.relations()).unwrap();
    let w = bound.get(names::ATTENTION).unwrap();
    let s = attention_scores(
        &tape,
        tape.gather_rows(h, fx.graph.centers()).unwrap(),
        r,
        tape.gather_rows(h, fx.graph.neighbors()).unwrap(),
        w,
    )
    .unwrap();
    let p = litkg::model::normalize_attention(&tape, s, &fx.graph).unwrap();
    let v = tape.value(p);
    for i in 0..10 {
        let range = fx.graph.edges_of(i);
        if !range.is_empty() {
            let sum: f64 = v.data()[range].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn forward_is_deterministic_without_dropout() {
    let cfg = config(Aggregator::BiInteraction, 2, true, 4);
    let fx = Fixture::new(8, 12, &cfg, 9);
    let a = represent(&fx.params, &fx.graph, &fx.attrs).unwrap();
    let b = represent(&fx.params, &fx.graph, &fx.attrs).unwrap();
    assert_eq!(a, b);
}

#[test]
fn default_width_is_300() {
    let p = ModelParams::init(&Default::default(), litkg::model::Dims { entities: 2, numeric: 8, text: 300 }, 0).unwrap();
    assert_eq!(p.get(names::ENTITY).unwrap().shape(), &[2, 300]);
    assert_eq!(p.get(names::GATE_VT).unwrap().shape(), &[300, 300]);
}

#[test]
fn permuting_entities_permutes_rows() {
    for agg in Aggregator::ALL {
        let cfg = config(agg, 2, true, 3);
        let n = 7;
        let fx = Fixture::new(n, 11, &cfg, 21);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        // old entity i becomes new entity perm[i]
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let triples: Vec<Triple> =
            fx.triples.iter().map(|t| Triple::new(EntityId(perm[t.head.index()]), t.relation, EntityId(perm[t.tail.index()]))).collect();
        let graph = PropagationGraph::new(n, &triples).unwrap();
        let attrs: AttributeVectors = fx.attrs.permuted(&inverse);
        let mut params = fx.params.clone();
        let e = params.get(names::ENTITY).unwrap();
        let rows: Vec<Vec<f64>> = inverse.iter().map(|&i| e.row(i).to_vec()).collect();
        params.set(names::ENTITY, Tensor::from_rows(&rows).unwrap()).unwrap();

        let before = represent(&fx.params, &fx.graph, &fx.attrs).unwrap();
        let after = represent(&params, &graph, &attrs).unwrap();
        for i in 0..n {
            for (a, b) in before.row(i).iter().zip(after.row(perm[i])) {
                assert!((a - b).abs() < 1e-12, "{agg}");
            }
        }
    }
}

/// Symmetry, the row sums `Σ_j (A+I)_ij / sqrt(d_i d_j)` and the spectral
/// bound. Rows can sum past 1 when a node's neighbors have smaller degree
/// (a star center), so only regular graphs get the `≤ 1` check.
fn check_adjacency(n: usize, triples: &[Triple]) {
    let p = NormalizedAdjacency::new(n, triples).unwrap().matrix;
    let dm = nalgebra::DMatrix::from_row_slice(n, n, p.data());
    assert!((&dm - dm.transpose()).abs().max() < 1e-15);

    let mut adj = vec![vec![false; n]; n];
    for t in triples {
        adj[t.head.index()][t.tail.index()] = true;
        adj[t.tail.index()][t.head.index()] = true;
    }
    let deg: Vec<f64> = (0..n).map(|i| 1.0 + adj[i].iter().filter(|&&x| x).count() as f64).collect();
    for i in 0..n {
        let expect: f64 = (0..n).filter(|&j| j == i || adj[i][j]).map(|j| 1.0 / (deg[i] * deg[j]).sqrt()).sum();
        assert!((dm.row(i).sum() - expect).abs() < 1e-12);
        if deg.iter().all(|&d| d == deg[0]) {
            assert!(dm.row(i).sum() <= 1.0 + 1e-9);
        }
    }
    let eig = nalgebra::SymmetricEigen::new(dm);
    for l in eig.eigenvalues.iter() {
        assert!(l.abs() <= 1.0 + 1e-6, "eigenvalue {l}");
    }
}

#[test]
fn adjacency_of_triangle_and_star() {
    let t = |h, tl| Triple::new(EntityId(h), RelationKind::RecordAnimal, EntityId(tl));
    check_adjacency(3, &[t(0, 1), t(1, 2), t(2, 0)]);
    let star: Vec<Triple> = (1..6).map(|i| t(0, i)).collect();
    check_adjacency(6, &star);
    let p = NormalizedAdjacency::new(6, &star).unwrap().matrix;
    // 1/6 from the self loop plus five 1/sqrt(6·2) edges: about 1.61
    let center: f64 = p.row(0).iter().sum();
    assert!((center - (1.0 / 6.0 + 5.0 / 12f64.sqrt())).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_adjacency_is_a_contraction(n in 2usize..9, m in 0usize..14, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = m.min(n * (n - 1));
        let triples = random_triples(&mut rng, n, m);
        check_adjacency(n, &triples);
    }

    #[test]
    fn forward_matches_loop_on_random_graphs(n in 1usize..8, m in 0usize..10, layers in 1usize..3, residual in any::<bool>(), agg in 0usize..4, seed in any::<u64>()) {
        let m = m.min(n * (n - 1));
        let cfg = config(Aggregator::ALL[agg], layers, residual, 3);
        let fx = Fixture::new(n, m, &cfg, seed);
        let tape = Tape::new();
        let bound = Bound::bind(&tape, &fx.params);
        let out = forward(&tape, &bound, &cfg, &fx.graph, &fx.attrs, None).unwrap();
        prop_assert!(max_abs_diff(&tape.value(out), &naive_forward(&fx, &cfg)) < 1e-10);
    }
}
