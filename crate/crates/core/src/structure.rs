//! Nonnegative-matrix classification and reduction to primitive
//! subsystems.
//!
//! The verdict depends only on the zero pattern: a nonnegative matrix is
//! primitive when its adjacency digraph is strongly connected with cycle
//! gcd 1, irreducible imprimitive (period h) when strongly connected with
//! gcd h >= 2, and reducible otherwise, in which case the strongly
//! connected components give the block-triangular normal form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::MatrixSpec;

/// Entries below this fraction of the largest magnitude are structural
/// zeros: floating noise must not flip zero patterns.
const ZERO_PATTERN_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Classification {
    Primitive,
    IrreducibleImprimitive {
        h: usize,
        /// The h cyclic index classes, in cyclic order.
        cyclic_classes: Vec<Vec<usize>>,
    },
    Reducible {
        /// Simultaneous row/column order exposing the block form.
        permutation: Vec<usize>,
        /// Half-open index ranges of the diagonal blocks, in
        /// block-triangular order.
        blocks: Vec<(usize, usize)>,
    },
}

fn adjacency(a: &MatrixSpec) -> Result<Vec<Vec<usize>>> {
    let n = a.dim();
    let threshold = ZERO_PATTERN_TOL * a.max_abs();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            let x = a.entry(i, j);
            if x < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j });
            }
            if x > threshold {
                adj[i].push(j);
            }
        }
    }
    Ok(adj)
}

/// Tarjan strongly connected components, returned in topological order of
/// the condensation (sources first), so edges run from earlier components
/// to later ones.
fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0usize;
    let mut components = Vec::new();

    // Iterative Tarjan; frames hold (node, next child position).
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&(v, child)) = call.last() {
            if child == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if child < adj[v].len() {
                call.last_mut().unwrap().1 += 1;
                let w = adj[v][child];
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    // Tarjan emits components in reverse topological order.
    components.reverse();
    components
}

/// Period of a strongly connected digraph: gcd of closed-walk lengths,
/// via BFS level differences.
fn graph_period(adj: &[Vec<usize>], nodes: &[usize]) -> usize {
    let mut level = vec![usize::MAX; adj.len()];
    let start = nodes[0];
    level[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    let mut g: usize = 0;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            } else {
                // Closed-walk length difference: level[v] + 1 - level[w].
                let diff = (level[v] + 1).abs_diff(level[w]);
                g = gcd(g, diff);
            }
        }
    }
    if g == 0 {
        // Single node without a self-loop: no cycles at all.
        0
    } else {
        g
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Classifies a nonnegative matrix by its zero pattern.
pub fn classify(a: &MatrixSpec) -> Result<Classification> {
    let adj = adjacency(a)?;
    let n = a.dim();
    let components = strongly_connected_components(&adj);
    if components.len() > 1 || (n == 1 && adj[0].is_empty()) {
        // The 1x1 zero matrix counts as reducible: no power is positive.
        let mut permutation = Vec::with_capacity(n);
        let mut blocks = Vec::with_capacity(components.len());
        for comp in &components {
            let start = permutation.len();
            permutation.extend_from_slice(comp);
            blocks.push((start, start + comp.len()));
        }
        return Ok(Classification::Reducible { permutation, blocks });
    }
    let nodes: Vec<usize> = (0..n).collect();
    let h = graph_period(&adj, &nodes);
    match h {
        0 => Ok(Classification::Reducible {
            permutation: nodes,
            blocks: vec![(0, n)],
        }),
        1 => Ok(Classification::Primitive),
        h => {
            // Group indices by BFS level mod h, in cyclic order.
            let mut level = vec![usize::MAX; n];
            level[0] = 0;
            let mut queue = std::collections::VecDeque::from([0usize]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if level[w] == usize::MAX {
                        level[w] = level[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
            let mut cyclic_classes = vec![Vec::new(); h];
            for v in 0..n {
                cyclic_classes[level[v] % h].push(v);
            }
            Ok(Classification::IrreducibleImprimitive { h, cyclic_classes })
        }
    }
}

fn submatrix(a: &MatrixSpec, rows: &[usize]) -> MatrixSpec {
    let entries: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| rows.iter().map(|&j| a.entry(i, j)).collect())
        .collect();
    MatrixSpec::from_rows(&entries).expect("submatrix of a valid matrix")
}

fn matrix_power(a: &MatrixSpec, p: usize) -> MatrixSpec {
    let m = a.as_dmatrix();
    let mut out = m.clone();
    for _ in 1..p {
        out = &out * m;
    }
    MatrixSpec::from_dmatrix(out).expect("power of a valid matrix")
}

/// Reduces to a list of primitive diagonal blocks: reducible matrices by
/// recursing into their strongly connected blocks, imprimitive ones via
/// the h diagonal blocks of A^h on the cyclic classes. Blocks of size 1
/// terminate the recursion either way.
pub fn primitive_components(a: &MatrixSpec, cls: &Classification) -> Vec<MatrixSpec> {
    match cls {
        Classification::Primitive => vec![a.clone()],
        Classification::Reducible { permutation, blocks } => {
            let mut out = Vec::new();
            for &(start, end) in blocks {
                let idx: Vec<usize> = permutation[start..end].to_vec();
                let block = submatrix(a, &idx);
                if block.dim() == 1 {
                    out.push(block);
                } else if let Ok(sub_cls) = classify(&block) {
                    out.extend(primitive_components(&block, &sub_cls));
                }
            }
            out
        }
        Classification::IrreducibleImprimitive { h, cyclic_classes } => {
            let ah = matrix_power(a, *h);
            cyclic_classes.iter().map(|class| submatrix(&ah, class)).collect()
        }
    }
}

/// Smallest power p with A^p entrywise positive. Bounded above by
/// n^2 - 2n + 2 for primitive matrices.
pub fn index_of_primitivity(a: &MatrixSpec) -> Result<usize> {
    if classify(a)? != Classification::Primitive {
        return Err(Error::NotPrimitive);
    }
    let n = a.dim();
    let bound = n * n - 2 * n + 2;
    let threshold = ZERO_PATTERN_TOL * a.max_abs();
    // Boolean reachability powers keep entries bounded.
    let base: Vec<bool> = a
        .as_dmatrix()
        .iter()
        .map(|&x| x > threshold)
        .collect();
    let mut current = base.clone();
    let bool_mul = |x: &[bool], y: &[bool]| -> Vec<bool> {
        let mut out = vec![false; n * n];
        for i in 0..n {
            for k in 0..n {
                // Column-major storage from nalgebra's iterator.
                if x[k * n + i] {
                    for j in 0..n {
                        if y[j * n + k] {
                            out[j * n + i] = true;
                        }
                    }
                }
            }
        }
        out
    };
    for p in 1..=bound {
        if current.iter().all(|&b| b) {
            return Ok(p);
        }
        current = bool_mul(&current, &base);
    }
    if current.iter().all(|&b| b) {
        return Ok(bound);
    }
    Err(Error::NotPrimitive)
}
