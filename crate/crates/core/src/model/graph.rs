use std::rc::Rc;

use crate::error::{Error, Result};
use crate::kg::{DirectedRelation, Direction, KnowledgeGraph, Triple};
use crate::numerics::Tensor;

/// Message-passing view of a triple set: every triple yields one edge in
/// each direction, grouped by the receiving entity.
///
/// Edge `e` carries a message from `neighbor[e]` to `center[e]` under the
/// directed relation `relation[e]`. Edges of entity `i` occupy
/// `offsets[i]..offsets[i + 1]`, so the slices line up with a segmented
/// softmax.
#[derive(Clone, Debug)]
pub struct PropagationGraph {
    num_entities: usize,
    center: Rc<[usize]>,
    neighbor: Rc<[usize]>,
    relation: Rc<[usize]>,
    offsets: Rc<[usize]>,
}

impl PropagationGraph {
    pub fn new<'a>(num_entities: usize, triples: impl IntoIterator<Item = &'a Triple>) -> Result<Self> {
        let mut edges = Vec::new();
        for t in triples {
            let (h, tl) = (t.head.index(), t.tail.index());
            if h >= num_entities || tl >= num_entities {
                return Err(Error::Shape(format!("triple {t:?} outside {num_entities} entities")));
            }
            let fwd = DirectedRelation { relation: t.relation, direction: Direction::Forward };
            let inv = DirectedRelation { relation: t.relation, direction: Direction::Inverse };
            edges.push((h, tl, fwd.index()));
            edges.push((tl, h, inv.index()));
        }
        // stable: edges of one center keep triple order
        edges.sort_by_key(|e| e.0);
        let mut offsets = vec![0usize; num_entities + 1];
        for &(c, _, _) in &edges {
            offsets[c + 1] += 1;
        }
        for i in 0..num_entities {
            offsets[i + 1] += offsets[i];
        }
        Ok(Self {
            num_entities,
            center: edges.iter().map(|e| e.0).collect(),
            neighbor: edges.iter().map(|e| e.1).collect(),
            relation: edges.iter().map(|e| e.2).collect(),
            offsets: offsets.into(),
        })
    }

    pub fn from_kg(kg: &KnowledgeGraph) -> Result<Self> {
        Self::new(kg.num_entities(), kg.triples())
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_edges(&self) -> usize {
        self.center.len()
    }

    pub fn centers(&self) -> Rc<[usize]> {
        self.center.clone()
    }

    pub fn neighbors(&self) -> Rc<[usize]> {
        self.neighbor.clone()
    }

    pub fn relations(&self) -> Rc<[usize]> {
        self.relation.clone()
    }

    pub fn offsets(&self) -> Rc<[usize]> {
        self.offsets.clone()
    }

    /// Edge index range of the neighborhood of entity `i`.
    pub fn edges_of(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// The symmetric graph-convolution matrix `(D + I)^-1/2 (A + I) (D + I)^-1/2`
/// over the undirected, unweighted incidence `A` of a triple set.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    pub matrix: Tensor,
}

impl NormalizedAdjacency {
    pub fn new<'a>(num_entities: usize, triples: impl IntoIterator<Item = &'a Triple>) -> Result<Self> {
        let n = num_entities;
        let mut a = vec![0.0; n * n];
        for t in triples {
            let (h, tl) = (t.head.index(), t.tail.index());
            if h >= n || tl >= n {
                return Err(Error::Shape(format!("triple {t:?} outside {n} entities")));
            }
            a[h * n + tl] = 1.0;
            a[tl * n + h] = 1.0;
        }
        let degree: Vec<f64> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum()).collect();
        let scale: Vec<f64> = degree.iter().map(|d| 1.0 / (d + 1.0).sqrt()).collect();
        for i in 0..n {
            a[i * n + i] += 1.0;
            for j in 0..n {
                a[i * n + j] *= scale[i] * scale[j];
            }
        }
        Ok(Self { matrix: Tensor::matrix(n, n, a)? })
    }

    pub fn from_kg(kg: &KnowledgeGraph) -> Result<Self> {
        Self::new(kg.num_entities(), kg.triples())
    }
}
