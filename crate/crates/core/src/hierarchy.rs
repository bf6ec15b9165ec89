//! Hierarchy trees and their summing matrices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub parent: Option<String>,
}

/// A tree given as `(node, parent)` links in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub nodes: Vec<NodeSpec>,
}

impl HierarchySpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(mut self, id: impl Into<String>, parent: Option<&str>) -> Self {
        self.nodes.push(NodeSpec {
            id: id.into(),
            parent: parent.map(str::to_owned),
        });
        self
    }

    /// A root with the given leaves directly below it.
    pub fn star<S: AsRef<str>>(root: &str, leaves: &[S]) -> Self {
        leaves
            .iter()
            .fold(Self::new().node(root, None), |h, l| h.node(l.as_ref(), Some(root)))
    }

    pub fn build(&self) -> Result<Hierarchy> {
        Hierarchy::from_spec(self)
    }
}

/// 0/1 matrix mapping bottom-level series to every series of the hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl SummingMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `S * bottom`.
    pub fn aggregate(&self, bottom: &[f64]) -> Vec<f64> {
        assert_eq!(bottom.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(bottom)
                    .filter(|(s, _)| **s == 1)
                    .map(|(_, b)| b)
                    .sum()
            })
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// A validated hierarchy with nodes in summing-matrix row order:
/// root, internal nodes in declaration order, then leaves in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    ids: Vec<String>,
    parents: Vec<Option<usize>>,
    n_leaves: usize,
    summing: SummingMatrix,
}

impl Hierarchy {
    pub fn from_spec(spec: &HierarchySpec) -> Result<Self> {
        let bad = |msg: String| Err(Error::Hierarchy(msg));
        if spec.nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut index = HashMap::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if n.id.trim().is_empty() {
                return bad(format!("node {} has an empty id", i + 1));
            }
            if index.insert(n.id.as_str(), i).is_some() {
                return bad(format!("duplicate node id {:?}", n.id));
            }
        }
        let roots: Vec<&str> = spec
            .nodes
            .iter()
            .filter(|n| n.parent.is_none())
            .map(|n| n.id.as_str())
            .collect();
        match roots.len() {
            0 => return bad("no root node (every node has a parent)".into()),
            1 => {}
            _ => return bad(format!("multiple roots: {}", roots.join(", "))),
        }

        let mut parent_of = vec![None; spec.nodes.len()];
        for (i, n) in spec.nodes.iter().enumerate() {
            if let Some(p) = &n.parent {
                let Some(&pi) = index.get(p.as_str()) else {
                    return bad(format!("node {:?} has unknown parent {:?}", n.id, p));
                };
                parent_of[i] = Some(pi);
            }
        }
        for start in 0..spec.nodes.len() {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parent_of[cur] {
                cur = p;
                steps += 1;
                if steps > spec.nodes.len() {
                    return bad(format!("cycle through node {:?}", spec.nodes[start].id));
                }
            }
        }

        let mut has_child = vec![false; spec.nodes.len()];
        for p in parent_of.iter().flatten() {
            has_child[*p] = true;
        }
        let root = parent_of.iter().position(Option::is_none).expect("one root");
        if !has_child[root] {
            return bad("empty leaf set: the root has no children".into());
        }
        let internal = (0..spec.nodes.len()).filter(|&i| i != root && has_child[i]);
        let leaves: Vec<usize> = (0..spec.nodes.len()).filter(|&i| !has_child[i]).collect();
        let order: Vec<usize> = std::iter::once(root)
            .chain(internal)
            .chain(leaves.iter().copied())
            .collect();
        let mut row_of = vec![0; spec.nodes.len()];
        for (row, &i) in order.iter().enumerate() {
            row_of[i] = row;
        }

        let m = leaves.len();
        let rows = order.len();
        let mut data = vec![0u8; rows * m];
        for (j, &leaf) in leaves.iter().enumerate() {
            let mut cur = Some(leaf);
            while let Some(c) = cur {
                data[row_of[c] * m + j] = 1;
                cur = parent_of[c];
            }
        }

        Ok(Self {
            ids: order.iter().map(|&i| spec.nodes[i].id.clone()).collect(),
            parents: order.iter().map(|&i| parent_of[i].map(|p| row_of[p])).collect(),
            n_leaves: m,
            summing: SummingMatrix { rows, cols: m, data },
        })
    }

    /// Node ids in row order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Row index of the first leaf; leaves occupy the last `n_leaves` rows.
    pub fn first_leaf(&self) -> usize {
        self.ids.len() - self.n_leaves
    }

    pub fn parent(&self, row: usize) -> Option<usize> {
        self.parents[row]
    }

    pub fn children(&self, row: usize) -> Vec<usize> {
        (0..self.len()).filter(|&r| self.parents[r] == Some(row)).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn summing_matrix(&self) -> &SummingMatrix {
        &self.summing
    }

    /// A `HierarchySpec` that rebuilds this hierarchy in row order.
    pub fn to_spec(&self) -> HierarchySpec {
        HierarchySpec {
            nodes: (0..self.len())
                .map(|r| NodeSpec {
                    id: self.ids[r].clone(),
                    parent: self.parents[r].map(|p| self.ids[p].clone()),
                })
                .collect(),
        }
    }
}

/// Builds the summing matrix of a hierarchy spec.
pub fn build_summing_matrix(spec: &HierarchySpec) -> Result<SummingMatrix> {
    Ok(Hierarchy::from_spec(spec)?.summing.clone())
}
