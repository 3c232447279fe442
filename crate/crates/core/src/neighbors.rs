use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::sparse::SparseAdjacency;

/// Per-point ordered neighbor lists.
///
/// Every list is nonempty, contains its own point index, has no duplicates and
/// holds at most `max_size` entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborList {
    lists: Vec<Vec<usize>>,
    max_size: usize,
}

impl NeighborList {
    pub fn new(lists: Vec<Vec<usize>>, max_size: usize) -> Result<Self> {
        let n = lists.len();
        let mut seen = HashSet::new();
        for (i, list) in lists.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::Invariant(format!("neighbor list {i} is empty")));
            }
            if list.len() > max_size {
                return Err(Error::Invariant(format!(
                    "neighbor list {i} has {} entries, limit is {max_size}",
                    list.len()
                )));
            }
            if !list.contains(&i) {
                return Err(Error::Invariant(format!(
                    "neighbor list {i} does not contain its own point"
                )));
            }
            seen.clear();
            for &j in list {
                if j >= n {
                    return Err(Error::out_of_range(
                        "neighbor index",
                        format!("list {i} references {j}, n = {n}"),
                    ));
                }
                if !seen.insert(j) {
                    return Err(Error::Invariant(format!(
                        "neighbor list {i} repeats index {j}"
                    )));
                }
            }
        }
        Ok(Self { lists, max_size })
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.lists.iter().map(Vec::as_slice)
    }

    /// Number of lists each point appears in (its own list included).
    pub fn in_selection_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.lists.len()];
        for list in &self.lists {
            for &j in list {
                counts[j] += 1;
            }
        }
        counts
    }

    /// Binary adjacency with `a_ij = 1` iff `j` is in list `i`.
    pub fn to_adjacency(&self) -> SparseAdjacency {
        let n = self.lists.len();
        let rows = self
            .lists
            .iter()
            .map(|list| {
                let mut row: Vec<(usize, f64)> = list.iter().map(|&j| (j, 1.0)).collect();
                row.sort_unstable_by_key(|&(j, _)| j);
                row
            })
            .collect();
        SparseAdjacency::from_rows(n, rows, false).expect("validated lists form a valid adjacency")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enforces_invariants() {
        NeighborList::new(vec![vec![0, 1], vec![1]], 2).unwrap();
        assert!(NeighborList::new(vec![vec![], vec![1]], 2).is_err());
        assert!(NeighborList::new(vec![vec![1], vec![1]], 2).is_err());
        assert!(NeighborList::new(vec![vec![0, 0], vec![1]], 2).is_err());
        assert!(NeighborList::new(vec![vec![0, 1], vec![1]], 1).is_err());
        assert!(NeighborList::new(vec![vec![0, 5], vec![1]], 3).is_err());
    }

    #[test]
    fn selection_counts_and_adjacency() {
        let nl = NeighborList::new(vec![vec![0, 2], vec![1, 0], vec![2, 0]], 2).unwrap();
        assert_eq!(nl.in_selection_counts(), vec![3, 1, 2]);
        let a = nl.to_adjacency();
        assert_eq!(a.column_counts(), vec![3, 1, 2]);
        assert_eq!(a.row(1).0, &[0, 1]);
    }
}
