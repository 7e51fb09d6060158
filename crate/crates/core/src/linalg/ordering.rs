//! Fill-reducing ordering by recursive graph bisection.
//!
//! Each subgraph is split along the middle level set of a breadth-first
//! search started at a pseudo-peripheral vertex. The level set is a vertex
//! separator; it is numbered after both halves.

use super::SparsityPattern;

const LEAF_SIZE: usize = 48;

fn neighbours<'a>(
    pattern: &'a SparsityPattern,
    tag: &'a [usize],
    t: usize,
    v: usize,
) -> impl Iterator<Item = usize> + 'a {
    pattern
        .row(v)
        .map(move |s| pattern.col_idx[s])
        .filter(move |&w| w != v && tag[w] == t)
}

/// Returns `perm` with `perm[new] = old`.
pub fn nested_dissection(pattern: &SparsityPattern) -> Vec<usize> {
    let n = pattern.n;
    let mut order = Vec::with_capacity(n);
    // membership tag per vertex: which pending subgraph it belongs to
    let mut tag = vec![0usize; n];
    let mut next_tag = 1usize;
    let mut level = vec![usize::MAX; n];
    let mut stack: Vec<(Vec<usize>, bool)> = vec![((0..n).collect(), false)];
    let mut out_stack: Vec<Vec<usize>> = Vec::new();

    // Work list: (nodes, separator_marker). Separators are emitted after the
    // subgraphs they split, so they are pushed first (processed last).
    while let Some((nodes, is_separator)) = stack.pop() {
        if is_separator || nodes.len() <= LEAF_SIZE {
            out_stack.push(nodes);
            continue;
        }
        let t = next_tag;
        next_tag += 1;
        for &v in &nodes {
            tag[v] = t;
        }
        let neighbours = |v: usize, tag: &[usize]| neighbours(pattern, tag, t, v).collect::<Vec<_>>();

        let bfs = |start: usize, level: &mut [usize], tag: &[usize]| -> Vec<Vec<usize>> {
            let mut levels = vec![vec![start]];
            level[start] = 0;
            loop {
                let mut next = Vec::new();
                for &v in levels.last().unwrap() {
                    for w in neighbours(v, tag) {
                        if level[w] == usize::MAX {
                            level[w] = levels.len();
                            next.push(w);
                        }
                    }
                }
                if next.is_empty() {
                    break;
                }
                next.sort_unstable();
                levels.push(next);
            }
            levels
        };
        let reset = |levels: &[Vec<usize>], level: &mut [usize]| {
            for l in levels {
                for &v in l {
                    level[v] = usize::MAX;
                }
            }
        };

        // pseudo-peripheral start
        let mut start = nodes[0];
        let mut levels = bfs(start, &mut level, &tag);
        for _ in 0..4 {
            let last = levels.last().unwrap();
            let cand = *last
                .iter()
                .min_by_key(|&&v| neighbours(v, &tag).len())
                .unwrap();
            reset(&levels, &mut level);
            let trial = bfs(cand, &mut level, &tag);
            if trial.len() > levels.len() {
                start = cand;
                reset(&trial, &mut level);
                levels = bfs(start, &mut level, &tag);
            } else {
                reset(&trial, &mut level);
                levels = bfs(start, &mut level, &tag);
                break;
            }
        }
        let reached: usize = levels.iter().map(Vec::len).sum();
        reset(&levels, &mut level);

        if reached < nodes.len() {
            // disconnected: peel off the component containing `start`
            let mut comp: Vec<usize> = levels.concat();
            comp.sort_unstable();
            let mut in_comp = vec![false; n];
            for &v in &comp {
                in_comp[v] = true;
            }
            let rest: Vec<usize> = nodes.iter().copied().filter(|&v| !in_comp[v]).collect();
            stack.push((rest, false));
            stack.push((comp, false));
            continue;
        }
        if levels.len() < 3 {
            out_stack.push(nodes);
            continue;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (i, l) in levels.iter().enumerate() {
            acc += l.len();
            if acc >= half {
                mid = i.clamp(1, levels.len() - 2);
                break;
            }
        }
        let lower: Vec<usize> = levels[..mid].concat();
        let upper: Vec<usize> = levels[mid + 1..].concat();
        let sep = levels[mid].clone();
        stack.push((sep, true));
        stack.push((upper, false));
        stack.push((lower, false));
    }
    // out_stack holds blocks in an order where every separator comes after the
    // blocks it separates
    for block in out_stack {
        order.extend(block);
    }
    order
}
