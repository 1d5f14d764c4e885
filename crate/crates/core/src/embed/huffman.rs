use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary prefix code over `n` leaves with `n - 1` internal nodes.
///
/// For leaf `w`, `path(w)` lists `(internal node, bit)` from the root down.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HuffmanTree {
    paths: Vec<Vec<(usize, bool)>>,
}

impl HuffmanTree {
    pub fn n_leaves(&self) -> usize {
        self.paths.len()
    }

    pub fn n_internal(&self) -> usize {
        self.paths.len() - 1
    }

    pub fn path(&self, leaf: usize) -> &[(usize, bool)] {
        &self.paths[leaf]
    }

    pub fn code(&self, leaf: usize) -> Vec<bool> {
        self.paths[leaf].iter().map(|p| p.1).collect()
    }

    pub fn code_lengths(&self) -> Vec<usize> {
        self.paths.iter().map(Vec::len).collect()
    }
}

/// Optimal prefix code for `frequencies`. Merge ties are broken by
/// `(frequency, node index)`, leaves numbered before internal nodes.
pub fn build_huffman(frequencies: &[u64]) -> Result<HuffmanTree> {
    let n = frequencies.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a coding tree needs at least 2 entities, got {n}"
        )));
    }
    if frequencies.iter().all(|&f| f == 0) {
        return Err(Error::InvalidArgument("all frequencies are zero".into()));
    }
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        frequencies.iter().enumerate().map(|(i, &f)| Reverse((f, i))).collect();
    // parent[node] = (internal index, bit) for every non-root node.
    let mut parent = vec![(0usize, false); 2 * n - 1];
    for k in 0..n - 1 {
        let Reverse((fa, a)) = heap.pop().expect("two nodes remain");
        let Reverse((fb, b)) = heap.pop().expect("two nodes remain");
        parent[a] = (k, false);
        parent[b] = (k, true);
        heap.push(Reverse((fa + fb, n + k)));
    }
    let root = 2 * n - 2;
    let paths = (0..n)
        .map(|leaf| {
            let mut path = Vec::new();
            let mut node = leaf;
            while node != root {
                let (k, bit) = parent[node];
                path.push((k, bit));
                node = n + k;
            }
            path.reverse();
            path
        })
        .collect();
    Ok(HuffmanTree { paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_four_symbol_code() {
        assert_eq!(build_huffman(&[4, 2, 1, 1]).unwrap().code_lengths(), vec![1, 2, 3, 3]);
    }

    #[test]
    fn two_symbols() {
        assert_eq!(build_huffman(&[1, 1]).unwrap().code_lengths(), vec![1, 1]);
    }

    #[test]
    fn equal_frequencies_balance() {
        assert_eq!(build_huffman(&[1, 1, 1, 1]).unwrap().code_lengths(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn too_few_entities() {
        assert!(build_huffman(&[5]).is_err());
        assert!(build_huffman(&[0, 0]).is_err());
    }

    #[test]
    fn codes_are_unique_and_prefix_free() {
        let t = build_huffman(&[7, 0, 3, 3, 9, 1, 1, 2, 40]).unwrap();
        assert_eq!(t.n_internal(), 8);
        let codes: Vec<Vec<bool>> = (0..t.n_leaves()).map(|l| t.code(l)).collect();
        for (i, a) in codes.iter().enumerate() {
            for (j, b) in codes.iter().enumerate() {
                if i != j {
                    assert!(!b.starts_with(a), "{i} prefixes {j}");
                }
            }
        }
        // Root is the last internal node and starts every path.
        assert!((0..t.n_leaves()).all(|l| t.path(l)[0].0 == t.n_internal() - 1));
    }
}
