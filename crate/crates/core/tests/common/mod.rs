//! Exhaustive tree-edit-distance oracles shared by integration tests: enumeration
//! of every valid edit mapping, and breadth-first search over literal edit
//! scripts for very small trees.
#![allow(dead_code)]

pub mod programs;
pub mod scenario;

use std::collections::{HashSet, VecDeque};

use ahd_core::ast_metric::{NormalizedTree, TreeNode};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize, alphabet: &[&str]) -> NormalizedTree {
    let n = rng.random_range(1..=max_nodes);
    let mut nodes: Vec<TreeNode> = (0..n)
        .map(|_| TreeNode {
            label: alphabet[rng.random_range(0..alphabet.len())].to_string(),
            children: Vec::new(),
        })
        .collect();
    for i in 1..n {
        let parent = rng.random_range(0..i);
        nodes[parent].children.push(i);
    }
    NormalizedTree::from_parts(nodes, 0).unwrap()
}

struct Flat {
    labels: Vec<String>,
    /// ancestor[i][j]: i is a proper ancestor of j (preorder indices).
    ancestor: Vec<Vec<bool>>,
}

fn flatten(t: &NormalizedTree) -> Flat {
    let order = t.preorder();
    let mut pos = vec![0; t.size()];
    for (i, &n) in order.iter().enumerate() {
        pos[n] = i;
    }
    let mut ancestor = vec![vec![false; order.len()]; order.len()];
    fn mark(t: &NormalizedTree, n: usize, pos: &[usize], stack: &mut Vec<usize>, anc: &mut [Vec<bool>]) {
        for &a in stack.iter() {
            anc[pos[a]][pos[n]] = true;
        }
        stack.push(n);
        for &c in &t.node(n).children {
            mark(t, c, pos, stack, anc);
        }
        stack.pop();
    }
    mark(t, t.root(), &pos, &mut Vec::new(), &mut ancestor);
    Flat { labels: order.iter().map(|&n| t.node(n).label.clone()).collect(), ancestor }
}

/// Minimum cost over all Tai mappings: one-to-one, ancestor-preserving and
/// order-preserving node correspondences.
pub fn mapping_oracle(a: &NormalizedTree, b: &NormalizedTree) -> usize {
    let fa = flatten(a);
    let fb = flatten(b);
    let mut best = usize::MAX;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    fn search(x: usize, fa: &Flat, fb: &Flat, pairs: &mut Vec<(usize, usize)>, best: &mut usize) {
        if x == fa.labels.len() {
            let renames = pairs.iter().filter(|&&(i, j)| fa.labels[i] != fb.labels[j]).count();
            let cost = fa.labels.len() + fb.labels.len() - 2 * pairs.len() + renames;
            *best = (*best).min(cost);
            return;
        }
        search(x + 1, fa, fb, pairs, best);
        let start = pairs.last().map_or(0, |&(_, y)| y + 1);
        for y in start..fb.labels.len() {
            let ok = pairs.iter().all(|&(px, py)| fa.ancestor[px][x] == fb.ancestor[py][y]);
            if ok {
                pairs.push((x, y));
                search(x + 1, fa, fb, pairs, best);
                pairs.pop();
            }
        }
    }
    search(0, &fa, &fb, &mut pairs, &mut best);
    best
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
struct Node {
    label: String,
    children: Vec<Node>,
}

fn to_forest(t: &NormalizedTree) -> Vec<Node> {
    fn go(t: &NormalizedTree, n: usize) -> Node {
        Node {
            label: t.node(n).label.clone(),
            children: t.node(n).children.iter().map(|&c| go(t, c)).collect(),
        }
    }
    vec![go(t, t.root())]
}

fn forest_size(f: &[Node]) -> usize {
    f.iter().map(|n| 1 + forest_size(&n.children)).sum()
}

/// Every forest reachable by one insert, delete or rename.
fn neighbours(forest: &[Node], alphabet: &[String], out: &mut Vec<Vec<Node>>) {
    // Operations on this sibling list.
    for i in 0..forest.len() {
        // delete forest[i]: splice its children in its place
        let mut f = forest[..i].to_vec();
        f.extend(forest[i].children.iter().cloned());
        f.extend(forest[i + 1..].iter().cloned());
        out.push(f);
        for l in alphabet {
            if *l != forest[i].label {
                let mut f = forest.to_vec();
                f[i].label = l.clone();
                out.push(f);
            }
        }
    }
    // insert a new node adopting the contiguous range [i, j)
    for i in 0..=forest.len() {
        for j in i..=forest.len() {
            for l in alphabet {
                let mut f = forest[..i].to_vec();
                f.push(Node { label: l.clone(), children: forest[i..j].to_vec() });
                f.extend(forest[j..].iter().cloned());
                out.push(f);
            }
        }
    }
    // recurse into each child list
    for i in 0..forest.len() {
        let mut inner = Vec::new();
        neighbours(&forest[i].children, alphabet, &mut inner);
        for children in inner {
            let mut f = forest.to_vec();
            f[i].children = children;
            out.push(f);
        }
    }
}

pub fn script_oracle(a: &NormalizedTree, b: &NormalizedTree) -> usize {
    let start = to_forest(a);
    let goal = to_forest(b);
    let cap = forest_size(&start) + forest_size(&goal);
    let mut alphabet: Vec<String> = a
        .nodes()
        .iter()
        .chain(b.nodes())
        .map(|n| n.label.clone())
        .collect();
    alphabet.sort();
    alphabet.dedup();
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((f, d)) = queue.pop_front() {
        if f == goal {
            return d;
        }
        let mut next = Vec::new();
        neighbours(&f, &alphabet, &mut next);
        for g in next {
            if forest_size(&g) <= cap && seen.insert(g.clone()) {
                queue.push_back((g, d + 1));
            }
        }
    }
    unreachable!("goal is always reachable")
}

