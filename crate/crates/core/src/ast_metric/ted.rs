//! Zhang–Shasha ordered tree edit distance with unit costs.

use super::NormalizedTree;

/// Kind of an elementary edit. Every kind costs exactly one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditOperation {
    Insert,
    Delete,
    Rename,
}

impl EditOperation {
    pub const fn cost(self) -> usize {
        1
    }
}

struct Postorder<'a> {
    labels: Vec<&'a str>,
    /// Leftmost leaf descendant of each node, as a post-order index.
    lmd: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(tree: &'a NormalizedTree) -> Self {
        let order = tree.postorder();
        let mut position = vec![0usize; tree.size()];
        for (i, &n) in order.iter().enumerate() {
            position[n] = i;
        }
        let labels = order.iter().map(|&n| tree.node(n).label.as_str()).collect();
        let mut lmd = vec![0usize; order.len()];
        for (i, &n) in order.iter().enumerate() {
            lmd[i] = match tree.node(n).children.first() {
                Some(&first) => lmd[position[first]],
                None => i,
            };
        }
        // A keyroot is the highest node sharing its leftmost leaf.
        let mut seen = vec![false; order.len()];
        let mut keyroots = Vec::new();
        for i in (0..order.len()).rev() {
            if !seen[lmd[i]] {
                seen[lmd[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.reverse();
        Postorder { labels, lmd, keyroots }
    }
}

/// Exact minimum number of unit-cost insert/delete/rename operations turning
/// `a` into `b`.
pub fn tree_edit_distance(a: &NormalizedTree, b: &NormalizedTree) -> usize {
    let pa = Postorder::new(a);
    let pb = Postorder::new(b);
    let (n, m) = (pa.labels.len(), pb.labels.len());
    let mut treedist = vec![0usize; n * m];
    let mut forest = vec![0usize; (n + 1) * (m + 1)];
    let del = EditOperation::Delete.cost();
    let ins = EditOperation::Insert.cost();
    let ren = EditOperation::Rename.cost();

    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            let (li, lj) = (pa.lmd[i], pb.lmd[j]);
            let rows = i - li + 2;
            let cols = j - lj + 2;
            let at = |r: usize, c: usize| r * cols + c;
            forest[at(0, 0)] = 0;
            for r in 1..rows {
                forest[at(r, 0)] = forest[at(r - 1, 0)] + del;
            }
            for c in 1..cols {
                forest[at(0, c)] = forest[at(0, c - 1)] + ins;
            }
            for x in li..=i {
                let r = x - li + 1;
                for y in lj..=j {
                    let c = y - lj + 1;
                    let delete = forest[at(r - 1, c)] + del;
                    let insert = forest[at(r, c - 1)] + ins;
                    if pa.lmd[x] == li && pb.lmd[y] == lj {
                        let rename = if pa.labels[x] == pb.labels[y] { 0 } else { ren };
                        let d = delete.min(insert).min(forest[at(r - 1, c - 1)] + rename);
                        forest[at(r, c)] = d;
                        treedist[x * m + y] = d;
                    } else {
                        let p = pa.lmd[x] - li;
                        let q = pb.lmd[y] - lj;
                        let d = delete
                            .min(insert)
                            .min(forest[at(p, q)] + treedist[x * m + y]);
                        forest[at(r, c)] = d;
                    }
                }
            }
        }
    }
    treedist[(n - 1) * m + (m - 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast_metric::TreeNode;

    fn node(label: &str, children: Vec<usize>) -> TreeNode {
        TreeNode { label: label.to_string(), children }
    }

    #[test]
    fn identity_is_zero() {
        let t = crate::ast_metric::normalize("def f(a):\n    return a * 2 + 1\n").unwrap();
        assert_eq!(tree_edit_distance(&t, &t), 0);
    }

    #[test]
    fn single_rename() {
        let a = NormalizedTree::leaf("A");
        let b = NormalizedTree::leaf("B");
        assert_eq!(tree_edit_distance(&a, &b), 1);
    }

    #[test]
    fn single_insert() {
        let a = NormalizedTree::leaf("A");
        let b = NormalizedTree::from_parts(vec![node("A", vec![1]), node("B", vec![])], 0).unwrap();
        assert_eq!(tree_edit_distance(&a, &b), 1);
        assert_eq!(tree_edit_distance(&b, &a), 1);
    }

    #[test]
    fn classic_zhang_shasha_example() {
        // f(d(a, c(b)), e) vs f(c(d(a, b)), e): distance 2.
        let t1 = NormalizedTree::from_parts(
            vec![
                node("f", vec![1, 5]),
                node("d", vec![2, 3]),
                node("a", vec![]),
                node("c", vec![4]),
                node("b", vec![]),
                node("e", vec![]),
            ],
            0,
        )
        .unwrap();
        let t2 = NormalizedTree::from_parts(
            vec![
                node("f", vec![1, 5]),
                node("c", vec![2]),
                node("d", vec![3, 4]),
                node("a", vec![]),
                node("b", vec![]),
                node("e", vec![]),
            ],
            0,
        )
        .unwrap();
        assert_eq!(tree_edit_distance(&t1, &t2), 2);
    }

    #[test]
    fn every_operation_costs_one() {
        for op in [EditOperation::Insert, EditOperation::Delete, EditOperation::Rename] {
            assert_eq!(op.cost(), 1);
        }
    }
}
