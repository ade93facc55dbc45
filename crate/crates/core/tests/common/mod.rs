//! Shared fixtures and a plain-loop reference implementation of the model.
#![allow(dead_code)]

use litkg::ingest::AttributeVectors;
use litkg::kg::{EntityId, RelationKind, Triple};
use litkg::model::{names, Aggregator, Dims, GinEpsilon, ModelConfig, ModelParams, PropagationGraph};
use litkg::numerics::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(t: &Tensor) -> Mat {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

pub fn vecmat(x: &[f64], w: &Mat) -> Vec<f64> {
    let cols = w.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (xi, row) in x.iter().zip(w) {
        for (o, wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn leaky(a: &[f64]) -> Vec<f64> {
    a.iter().map(|&x| if x > 0.0 { x } else { 0.01 * x }).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub const NUMERIC: usize = 2;
pub const TEXT: usize = 3;

/// A small random graph with literals and freshly initialized parameters
/// (biases and relation rows randomized too, so no term is trivially zero).
pub struct Fixture {
    pub triples: Vec<Triple>,
    pub graph: PropagationGraph,
    pub attrs: AttributeVectors,
    pub params: ModelParams,
}

pub fn random_triples(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Triple> {
    let mut out: Vec<Triple> = Vec::new();
    while out.len() < m {
        let h = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        let r = RelationKind::ALL[rng.gen_range(0..RelationKind::ALL.len())];
        let tr = Triple::new(EntityId(h), r, EntityId(t));
        if h != t && !out.contains(&tr) {
            out.push(tr);
        }
    }
    out
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], a: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-a..a)).collect()).unwrap()
}

pub fn config(aggregator: Aggregator, layers: usize, residual: bool, dim: usize) -> ModelConfig {
    ModelConfig {
        aggregator,
        layers,
        dim,
        dropout: 0.0,
        residual_identity: residual,
        alpha: 0.3,
        lambda_rc: 5.0,
        gin_epsilon: GinEpsilon::Learnable(0.2),
        classifier_hidden: 4,
    }
}

impl Fixture {
    pub fn new(n: usize, m: usize, cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let triples = random_triples(&mut rng, n, m);
        Self::with_triples(n, triples, cfg, seed)
    }

    pub fn with_triples(n: usize, triples: Vec<Triple>, cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        let graph = PropagationGraph::new(n, &triples).unwrap();
        let attrs = AttributeVectors {
            numeric: random_tensor(&mut rng, &[n, NUMERIC], 1.0),
            text: random_tensor(&mut rng, &[n, TEXT], 1.0),
        };
        let mut params = ModelParams::init(cfg, Dims { entities: n, numeric: NUMERIC, text: TEXT }, seed).unwrap();
        let names: Vec<String> = params.store.iter().map(|(k, _)| k.clone()).collect();
        for name in names {
            let shape = params.get(&name).unwrap().shape().to_vec();
            // keep the text gain of the init from dominating the fixture
            params.set(&name, random_tensor(&mut rng, &shape, 0.8)).unwrap();
        }
        Self { triples, graph, attrs, params }
    }

    pub fn p(&self, name: &str) -> Mat {
        let t = self.params.get(name).unwrap();
        if t.shape().len() == 1 {
            vec![t.data().to_vec()]
        } else {
            to_mat(t)
        }
    }

    pub fn row(&self, name: &str) -> Vec<f64> {
        self.params.get(name).unwrap().data().to_vec()
    }
}

/// Edges of entity `i` as (neighbor, directed relation index), one per
/// triple direction, straight from the triple list.
pub fn naive_edges(triples: &[Triple], i: usize) -> Vec<(usize, usize)> {
    let n_rel = RelationKind::ALL.len();
    let mut out = Vec::new();
    for t in triples {
        if t.head.index() == i {
            out.push((t.tail.index(), t.relation.index()));
        }
        if t.tail.index() == i {
            out.push((t.head.index(), n_rel + t.relation.index()));
        }
    }
    out
}

pub fn naive_fuse(fx: &Fixture) -> Mat {
    let e = fx.p(names::ENTITY);
    let n = to_mat(&fx.attrs.numeric);
    let t = to_mat(&fx.attrs.text);
    let b = fx.row(names::GATE_B);
    (0..e.len())
        .map(|i| {
            let pre_mu = add(
                &add(&add(&vecmat(&e[i], &fx.p(names::GATE_E)), &vecmat(&n[i], &fx.p(names::GATE_N))), &vecmat(&t[i], &fx.p(names::GATE_T))),
                &b,
            );
            let pre_nu = add(&add(&vecmat(&e[i], &fx.p(names::GATE_VE)), &vecmat(&n[i], &fx.p(names::GATE_VN))), &vecmat(&t[i], &fx.p(names::GATE_VT)));
            (0..e[i].len())
                .map(|j| {
                    let mu = sigmoid(pre_mu[j]);
                    mu * pre_nu[j].tanh() + (1.0 - mu) * e[i][j]
                })
                .collect()
        })
        .collect()
}

/// One propagation layer computed entity by entity, edge by edge.
pub fn naive_layer(fx: &Fixture, cfg: &ModelConfig, h: &Mat, h0: &Mat, l: usize) -> Mat {
    let w_att = fx.p(names::ATTENTION);
    let rel = fx.p(names::RELATION);
    let p = |n: &str| fx.p(&names::layer(l, n));
    let d = h[0].len();
    (0..h.len())
        .map(|i| {
            let edges = naive_edges(&fx.triples, i);
            let wh = vecmat(&h[i], &w_att);
            let scores: Vec<f64> = edges
                .iter()
                .map(|&(j, r)| {
                    let key: Vec<f64> = add(&wh, &rel[r]).iter().map(|x| x.tanh()).collect();
                    dot(&vecmat(&h[j], &w_att), &key)
                })
                .collect();
            let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
            let mut h_n = vec![0.0; d];
            for (&(j, _), s) in edges.iter().zip(&scores) {
                h_n = add(&h_n, &scale(&h[j], (s - mx).exp() / z));
            }
            let m = match cfg.aggregator {
                Aggregator::Gcn => leaky(&vecmat(&add(&h[i], &h_n), &p("w"))),
                Aggregator::GraphSage => {
                    let cat: Vec<f64> = h[i].iter().chain(&h_n).cloned().collect();
                    leaky(&vecmat(&cat, &p("w")))
                }
                Aggregator::BiInteraction => {
                    let prod: Vec<f64> = h[i].iter().zip(&h_n).map(|(a, b)| a * b).collect();
                    add(&leaky(&vecmat(&add(&h[i], &h_n), &p("w1"))), &leaky(&vecmat(&prod, &p("w2"))))
                }
                Aggregator::Gin => {
                    let eps = match cfg.gin_epsilon {
                        GinEpsilon::Fixed(e) => e,
                        GinEpsilon::Learnable(_) => fx.row(&names::layer(l, "eps"))[0],
                    };
                    let x = add(&scale(&h[i], 1.0 + eps), &h_n);
                    let hidden = leaky(&add(&vecmat(&x, &p("fc1.w")), &p("fc1.b")[0]));
                    leaky(&add(&vecmat(&hidden, &p("fc2.w")), &p("fc2.b")[0]))
                }
            };
            if cfg.residual_identity {
                let beta = (cfg.lambda_rc / (l as f64 + 2.0)).ln().clamp(0.0, 1.0);
                let mix = add(&scale(&m, 1.0 - cfg.alpha), &scale(&h0[i], cfg.alpha));
                leaky(&add(&scale(&mix, 1.0 - beta), &scale(&vecmat(&mix, &p("res.w")), beta)))
            } else {
                m
            }
        })
        .collect()
}

/// Fusion, every layer and the output head, without dropout.
pub fn naive_forward(fx: &Fixture, cfg: &ModelConfig) -> Mat {
    let h0 = naive_fuse(fx);
    let mut h = h0.clone();
    let mut outs = Vec::new();
    for l in 0..cfg.layers {
        h = naive_layer(fx, cfg, &h, &h0, l);
        outs.push(h.clone());
    }
    let w = fx.p(names::HEAD_W);
    let b = fx.row(names::HEAD_B);
    (0..h.len())
        .map(|i| {
            let cat: Vec<f64> = outs.iter().flat_map(|o| o[i].clone()).collect();
            leaky(&add(&vecmat(&cat, &w), &b))
        })
        .collect()
}

pub fn max_abs_diff(a: &Tensor, b: &Mat) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (x, y) in a.row(i).iter().zip(row) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}
