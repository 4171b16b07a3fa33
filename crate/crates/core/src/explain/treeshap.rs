//! Exact path-dependent TreeSHAP: Shapley values of the cover-weighted
//! value function, where features on the explained row's path condition the
//! walk and absent features are marginalized by child-cover proportions.
//! Polynomial-time path-extension recursion.

use crate::error::Result;
use crate::models::{Node, Tree};

#[derive(Debug, Clone)]
struct PathElement {
    /// Feature that split the path into this element; `None` for the root
    /// placeholder.
    feature: Option<usize>,
    /// Fraction of cover-weighted paths flowing through when the feature is
    /// absent from the coalition.
    zero_fraction: f64,
    /// One when the feature is present and the row follows this branch.
    one_fraction: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let old_len = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        weight: if old_len == 0 { 1.0 } else { 0.0 },
    });
    let l = (old_len + 1) as f64;
    for i in (0..old_len).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / l;
        path[i].weight = zero_fraction * path[i].weight * (old_len - i) as f64 / l;
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let l = path.len();
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut n = path[l - 1].weight;
    for j in (0..l - 1).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = n * l as f64 / ((j + 1) as f64 * one);
            n = t - path[j].weight * zero * (l - 1 - j) as f64 / l as f64;
        } else {
            path[j].weight = path[j].weight * l as f64 / (zero * (l - 1 - j) as f64);
        }
    }
    for j in index..l - 1 {
        path[j].feature = path[j + 1].feature;
        path[j].zero_fraction = path[j + 1].zero_fraction;
        path[j].one_fraction = path[j + 1].one_fraction;
    }
    path.pop();
}

/// Total weight the path would carry if the element at `index` were removed.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let l = path.len();
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let mut total = 0.0;
    if one != 0.0 {
        let mut n = path[l - 1].weight;
        for j in (0..l - 1).rev() {
            let t = n * l as f64 / ((j + 1) as f64 * one);
            total += t;
            n = path[j].weight - t * zero * (l - 1 - j) as f64 / l as f64;
        }
    } else {
        for j in (0..l - 1).rev() {
            total += path[j].weight * l as f64 / (zero * (l - 1 - j) as f64);
        }
    }
    total
}

struct ShapWalk<'a> {
    tree: &'a Tree,
    row: &'a [f64],
    output: usize,
    phi: Vec<f64>,
}

impl ShapWalk<'_> {
    fn recurse(
        &mut self,
        node_idx: usize,
        mut path: Vec<PathElement>,
        zero_fraction: f64,
        one_fraction: f64,
        feature: Option<usize>,
    ) {
        extend(&mut path, zero_fraction, one_fraction, feature);
        match &self.tree.nodes[node_idx] {
            Node::Leaf { value, .. } => {
                let leaf = value[self.output];
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let el = &path[i];
                    if let Some(f) = el.feature {
                        self.phi[f] += w * (el.one_fraction - el.zero_fraction) * leaf;
                    }
                }
            }
            Node::Internal {
                feature: split_feature,
                threshold,
                left,
                right,
                cover,
            } => {
                let (hot, cold) = if self.row[*split_feature] < *threshold {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                let hot_cover = self.tree.nodes[hot].cover();
                let cold_cover = self.tree.nodes[cold].cover();

                let mut incoming_zero = 1.0;
                let mut incoming_one = 1.0;
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(*split_feature))
                {
                    incoming_zero = path[k].zero_fraction;
                    incoming_one = path[k].one_fraction;
                    unwind(&mut path, k);
                }

                self.recurse(
                    hot,
                    path.clone(),
                    incoming_zero * hot_cover / cover,
                    incoming_one,
                    Some(*split_feature),
                );
                self.recurse(
                    cold,
                    path,
                    incoming_zero * cold_cover / cover,
                    0.0,
                    Some(*split_feature),
                );
            }
        }
    }
}

/// Exact Shapley contributions of one tree for one output dimension. The
/// attribution satisfies efficiency: expected value plus the contribution
/// sum equals the routed leaf value.
pub fn tree_shap(tree: &Tree, row: &[f64], n_features: usize, output: usize) -> Result<Vec<f64>> {
    tree.check_covers()?;
    let mut walk = ShapWalk {
        tree,
        row,
        output,
        phi: vec![0.0; n_features],
    };
    walk.recurse(0, Vec::new(), 1.0, 1.0, None);
    Ok(walk.phi)
}
