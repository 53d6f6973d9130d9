use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// Disjoint sets over document ids, tracking each set's smallest id.
#[derive(Debug, Clone)]
pub struct ClusterSet {
    ids: Vec<u64>,
    index: HashMap<u64, usize>,
    parent: Vec<usize>,
    size: Vec<usize>,
    min_id: Vec<u64>,
}

impl ClusterSet {
    pub fn new(ids: impl IntoIterator<Item = u64>) -> Result<Self> {
        let ids: Vec<u64> = ids.into_iter().collect();
        let mut index = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(Error::invalid(format!("duplicate doc id {id}")));
            }
        }
        let n = ids.len();
        Ok(ClusterSet {
            min_id: ids.clone(),
            ids,
            index,
            parent: (0..n).collect(),
            size: vec![1; n],
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn root(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Root slot of `id`'s set, or None for an unknown id.
    pub fn find(&mut self, id: u64) -> Option<usize> {
        let i = *self.index.get(&id)?;
        Some(self.root(i))
    }

    /// Smallest id in `id`'s set.
    pub fn representative(&mut self, id: u64) -> Option<u64> {
        self.find(id).map(|r| self.min_id[r])
    }

    /// Merges the sets holding `a` and `b`; false if either id is unknown.
    pub fn union(&mut self, a: u64, b: u64) -> bool {
        let (Some(ra), Some(rb)) = (self.find(a), self.find(b)) else {
            return false;
        };
        self.union_slots(ra, rb);
        true
    }

    pub(crate) fn union_slots(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.root(a), self.root(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.min_id[ra] = self.min_id[ra].min(self.min_id[rb]);
    }

    pub fn same_cluster(&mut self, a: u64, b: u64) -> bool {
        matches!((self.find(a), self.find(b)), (Some(x), Some(y)) if x == y)
    }

    /// Clusters with at least two members, each sorted, ordered by smallest id.
    pub fn clusters(&mut self) -> Vec<Vec<u64>> {
        let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for i in 0..self.ids.len() {
            let r = self.root(i);
            if self.size[r] > 1 {
                groups.entry(self.min_id[r]).or_default().push(self.ids[i]);
            }
        }
        groups
            .into_values()
            .map(|mut g| {
                g.sort_unstable();
                g
            })
            .collect()
    }
}
