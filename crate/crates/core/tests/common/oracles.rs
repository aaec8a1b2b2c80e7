//! Brute-force threshold-sweep oracles for graph persistence.
//!
//! Nothing here shares code with the library's union-find or matrix
//! reduction: each oracle recomputes connectivity from scratch at every
//! threshold with a plain graph search.

use mst_core::topology::Graph;

pub type Pair = (f64, f64);

/// Vertices of the subgraph induced on `keep`, labelled by component
/// (`usize::MAX` for vertices outside `keep`).
fn components(g: &Graph, keep: &[bool]) -> Vec<usize> {
    let n = g.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in g.edges() {
        if keep[u] && keep[v] {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if !keep[s] || label[s] != usize::MAX {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([s]);
        label[s] = next;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if label[w] == usize::MAX {
                    label[w] = next;
                    queue.push_back(w);
                }
            }
        }
        next += 1;
    }
    label
}

fn distinct_sorted(f: &[f64]) -> Vec<f64> {
    let mut v = f.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn older(f: &[f64], a: usize, b: usize) -> bool {
    (f[a], a) < (f[b], b)
}

/// Sublevel 0-dim pairs by threshold sweep and the elder rule: the class
/// born at `v` dies at the first threshold where `v`'s component contains an
/// older vertex. Returns (finite pairs incl. zero-length, essential pairs
/// (birth, component max)).
pub fn ord0(g: &Graph, f: &[f64]) -> (Vec<Pair>, Vec<Pair>) {
    let n = g.vertex_count();
    let levels = distinct_sorted(f);
    let mut finite = Vec::new();
    let mut essential = Vec::new();
    for v in 0..n {
        let mut death = None;
        for &a in levels.iter().filter(|&&a| a >= f[v]) {
            let keep: Vec<bool> = f.iter().map(|&x| x <= a).collect();
            let label = components(g, &keep);
            if (0..n).any(|w| label[w] == label[v] && older(f, w, v)) {
                death = Some(a);
                break;
            }
        }
        match death {
            Some(d) => finite.push((f[v], d)),
            None => {
                let label = components(g, &vec![true; n]);
                let top = (0..n).filter(|&w| label[w] == label[v]).map(|w| f[w]).fold(f64::MIN, f64::max);
                essential.push((f[v], top));
            }
        }
    }
    (finite, essential)
}

/// Superlevel 0-dim pairs (sweep from the top), as (birth, death), birth ≥ death.
pub fn rel1(g: &Graph, f: &[f64]) -> Vec<Pair> {
    let neg: Vec<f64> = f.iter().map(|x| -x).collect();
    ord0(g, &neg).0.into_iter().map(|(b, d)| (-b, -d)).collect()
}

/// (min f, max f) per connected component.
pub fn ext0(g: &Graph, f: &[f64]) -> Vec<Pair> {
    let n = g.vertex_count();
    let label = components(g, &vec![true; n]);
    let count = label.iter().copied().max().map_or(0, |m| m + 1);
    (0..count)
        .map(|c| {
            let vals = (0..n).filter(|&v| label[v] == c).map(|v| f[v]);
            let lo = vals.clone().fold(f64::MAX, f64::min);
            let hi = vals.fold(f64::MIN, f64::max);
            (lo, hi)
        })
        .collect()
}

/// First Betti number of the subgraph induced on vertices with lo ≤ f ≤ hi.
fn cycle_rank_between(g: &Graph, f: &[f64], lo: f64, hi: f64) -> i64 {
    if lo > hi {
        return 0;
    }
    let keep: Vec<bool> = f.iter().map(|&x| lo <= x && x <= hi).collect();
    let label = components(g, &keep);
    let v = keep.iter().filter(|&&k| k).count() as i64;
    let e = g.edges().iter().filter(|&&(a, b)| keep[a] && keep[b]).count() as i64;
    let c = label.iter().filter(|&&l| l != usize::MAX).max().map_or(0, |m| m + 1) as i64;
    e - v + c
}

/// Extended 1-dim points (birth a, death b) with multiplicity obtained by
/// inclusion–exclusion over the rank function
/// `r(a, b) = β₁(G[b ≤ f ≤ a])`, the number of cycles born by `a` that die
/// no earlier than `b`.
pub fn ext1(g: &Graph, f: &[f64]) -> Vec<Pair> {
    let levels = distinct_sorted(f);
    let r = |ai: Option<usize>, bi: Option<usize>| match (ai, bi) {
        (Some(a), Some(b)) => cycle_rank_between(g, f, levels[b], levels[a]),
        _ => 0,
    };
    let mut out = Vec::new();
    for ai in 0..levels.len() {
        for bi in 0..=ai {
            let below_a = ai.checked_sub(1);
            let above_b = (bi + 1 < levels.len()).then_some(bi + 1);
            let mu = r(Some(ai), Some(bi)) - r(below_a, Some(bi)) - r(Some(ai), above_b) + r(below_a, above_b);
            assert!(mu >= 0, "negative multiplicity");
            for _ in 0..mu {
                out.push((levels[ai], levels[bi]));
            }
        }
    }
    out
}

pub fn sorted(mut v: Vec<Pair>) -> Vec<Pair> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

pub fn nonzero(v: Vec<Pair>) -> Vec<Pair> {
    v.into_iter().filter(|(b, d)| b != d).collect()
}
