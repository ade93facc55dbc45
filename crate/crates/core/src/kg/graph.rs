use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schema::{AttributePayload, EntityKind, RelationKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub usize);

impl EntityId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationKind,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationKind, tail: EntityId) -> Self {
        Self { head, relation, tail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    pub payload: AttributePayload,
}

/// Typed entity store with a deduplicated triple set and a per-entity
/// index of incident triples.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    lookup: HashMap<(EntityKind, String), EntityId>,
    by_kind: Vec<Vec<EntityId>>,
    triples: Vec<Triple>,
    triple_set: HashSet<Triple>,
    neighborhoods: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphDocument {
    entities: Vec<Entity>,
    triples: Vec<Triple>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self { by_kind: vec![Vec::new(); EntityKind::ALL.len()], ..Default::default() }
    }

    /// Adds an entity, or returns the id of the existing `(kind, name)` entity.
    pub fn add_entity(&mut self, kind: EntityKind, name: &str, payload: AttributePayload) -> Result<EntityId> {
        if name.is_empty() {
            return Err(Error::Schema(format!("{kind} entity with an empty name")));
        }
        match &payload {
            AttributePayload::None => {}
            AttributePayload::Text(_) if kind.carries_text() => {}
            AttributePayload::Numeric(v) if kind.carries_numeric() => {
                if !v.is_finite() {
                    return Err(Error::Schema(format!("{kind} `{name}` has non-finite value {v}")));
                }
            }
            other => {
                return Err(Error::Schema(format!("{kind} entities cannot carry a {other:?} payload")));
            }
        }
        if let Some(&id) = self.lookup.get(&(kind, name.to_string())) {
            return Ok(id);
        }
        let id = EntityId(self.entities.len());
        self.entities.push(Entity { id, kind, name: name.to_string(), payload });
        self.lookup.insert((kind, name.to_string()), id);
        self.by_kind[kind.index()].push(id);
        self.neighborhoods.push(Vec::new());
        Ok(id)
    }

    /// Inserts a triple after checking it against the relation signature.
    /// Returns `false` when the triple was already present.
    pub fn add_triple(&mut self, head: EntityId, relation: RelationKind, tail: EntityId) -> Result<bool> {
        let (hk, tk) = relation.signature();
        let (h, t) = (self.entity_checked(head)?, self.entity_checked(tail)?);
        if h.kind != hk || t.kind != tk {
            return Err(Error::Schema(format!(
                "{relation} expects {hk} -> {tk}, got {} -> {}",
                h.kind, t.kind
            )));
        }
        if head == tail {
            return Err(Error::Schema(format!("self-loop on entity {}", head.0)));
        }
        let triple = Triple::new(head, relation, tail);
        if !self.triple_set.insert(triple) {
            return Ok(false);
        }
        let idx = self.triples.len();
        self.triples.push(triple);
        self.neighborhoods[head.0].push(idx);
        self.neighborhoods[tail.0].push(idx);
        Ok(true)
    }

    fn entity_checked(&self, id: EntityId) -> Result<&Entity> {
        self.entities.get(id.0).ok_or_else(|| Error::Schema(format!("unknown entity id {}", id.0)))
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.0]
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn find(&self, kind: EntityKind, name: &str) -> Option<EntityId> {
        self.lookup.get(&(kind, name.to_string())).copied()
    }

    pub fn entities_of(&self, kind: EntityKind) -> &[EntityId] {
        &self.by_kind[kind.index()]
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.triple_set.contains(triple)
    }

    pub fn triples_of(&self, relation: RelationKind) -> impl Iterator<Item = &Triple> {
        self.triples.iter().filter(move |t| t.relation == relation)
    }

    /// Indices (into [`triples`](Self::triples)) of triples touching `id`.
    pub fn neighborhood(&self, id: EntityId) -> &[usize] {
        &self.neighborhoods[id.0]
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.neighborhoods
    }

    /// Recomputes the neighborhood index from the triple list alone.
    pub fn rebuild_neighborhoods(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.entities.len()];
        for (i, t) in self.triples.iter().enumerate() {
            out[t.head.0].push(i);
            out[t.tail.0].push(i);
        }
        out
    }

    /// Checks every stored triple against its relation signature.
    pub fn validate(&self) -> Result<()> {
        for t in &self.triples {
            let (hk, tk) = t.relation.signature();
            if self.entity(t.head).kind != hk || self.entity(t.tail).kind != tk {
                return Err(Error::Schema(format!("triple {t:?} violates {}", t.relation)));
            }
        }
        if self.rebuild_neighborhoods() != self.neighborhoods {
            return Err(Error::Schema("neighborhood index out of sync".into()));
        }
        Ok(())
    }

    /// Tails `t'` with `(head, relation, t')` in the graph.
    pub fn linked_tails(&self, head: EntityId, relation: RelationKind) -> HashSet<EntityId> {
        self.neighborhoods[head.0]
            .iter()
            .map(|&i| self.triples[i])
            .filter(|t| t.head == head && t.relation == relation)
            .map(|t| t.tail)
            .collect()
    }

    /// How many entities could serve as a corrupted tail for `(head, relation)`.
    pub fn num_unlinked_tails(&self, head: EntityId, relation: RelationKind) -> usize {
        let excluded = self.linked_tails(head, relation);
        self.entities_of(relation.signature().1).iter().filter(|t| !excluded.contains(t)).count()
    }

    /// Draws `k` distinct corrupted-tail triples for `positive`.
    ///
    /// Candidates are the entities of the relation's tail kind that do not
    /// form a known triple with `(head, relation)`; draws are uniform
    /// without replacement.
    pub fn sample_negatives<R: Rng + ?Sized>(&self, positive: &Triple, k: usize, rng: &mut R) -> Result<Vec<Triple>> {
        let tails = self.sample_unlinked_tails(positive.head, positive.relation, k, rng)?;
        Ok(tails.into_iter().map(|t| Triple::new(positive.head, positive.relation, t)).collect())
    }

    pub(crate) fn sample_unlinked_tails<R: Rng + ?Sized>(
        &self,
        head: EntityId,
        relation: RelationKind,
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<EntityId>> {
        if k == 0 {
            return Err(Error::Sampling("requested zero negatives".into()));
        }
        let pool = self.entities_of(relation.signature().1);
        let excluded = self.linked_tails(head, relation);
        let available = pool.len() - pool.iter().filter(|t| excluded.contains(t)).count();
        if available < k {
            return Err(Error::Sampling(format!(
                "{relation} from entity {} has {available} candidate tails, {k} requested",
                head.0
            )));
        }
        if available <= 4 * k || pool.len() <= 256 {
            let candidates: Vec<EntityId> = pool.iter().copied().filter(|t| !excluded.contains(t)).collect();
            return Ok(index::sample(rng, candidates.len(), k).into_iter().map(|i| candidates[i]).collect());
        }
        // Pool is large relative to k: rejection sampling is uniform without replacement too.
        let mut chosen = Vec::with_capacity(k);
        while chosen.len() < k {
            let t = pool[rng.gen_range(0..pool.len())];
            if !excluded.contains(&t) && !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        Ok(chosen)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GraphDocument { entities: self.entities.clone(), triples: self.triples.clone() };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rebuilds a graph from its JSON form, re-validating every entity and triple.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        let mut kg = Self::new();
        for (i, e) in doc.entities.into_iter().enumerate() {
            if e.id.0 != i {
                return Err(Error::Schema(format!("entity ids must be dense, found {} at position {i}", e.id.0)));
            }
            let id = kg.add_entity(e.kind, &e.name, e.payload)?;
            if id.0 != i {
                return Err(Error::Schema(format!("duplicate entity ({}, {})", e.kind, e.name)));
            }
        }
        for t in doc.triples {
            kg.add_triple(t.head, t.relation, t.tail)?;
        }
        Ok(kg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Shuffles `items` with `rng` and cuts it into train/valid/test parts.
pub fn split_three<T: Clone, R: Rng + ?Sized>(items: &[T], ratios: [f64; 3], rng: &mut R) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::Contract("cannot split an empty list".into()));
    }
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("split ratios {ratios:?} must be in [0, 1] and sum to 1")));
    }
    let n = items.len();
    let order = index::sample(rng, n, n).into_vec();
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_valid = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    let pick = |range: std::ops::Range<usize>| order[range].iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((pick(0..n_train), pick(n_train..n_train + n_valid), pick(n_train + n_valid..n)))
}
