//! Minimum-weight perfect matching on the detector graph of one stabilizer type.
//!
//! Exact subset dynamic programming on each independent cluster of defects up
//! to [`EXACT_LIMIT`] defects, greedy pairing with swap improvement above.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::layout::StabKind;

use super::dem::DetectorModel;

pub const EXACT_LIMIT: usize = 16;

/// All-pairs shortest paths over detectors of one type plus the boundary node.
#[derive(Clone, Debug)]
pub struct Matcher {
    /// Global detector index to local node index.
    local: Vec<Option<usize>>,
    n: usize,
    dist: Vec<f64>,
    parity: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decoded {
    pub flip: bool,
    pub weight: f64,
    pub greedy: bool,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl Matcher {
    pub fn new(model: &DetectorModel, kind: StabKind) -> Self {
        let mut local = vec![None; model.num_detectors];
        let mut n = 0;
        for (g, k) in model.detector_kind.iter().enumerate() {
            if *k == kind {
                local[g] = Some(n);
                n += 1;
            }
        }
        let boundary = n;
        let nodes = n + 1;
        let mut adj: Vec<Vec<(usize, f64, bool)>> = vec![Vec::new(); nodes];
        for e in model.edges_of(kind) {
            let u = local[e.u].expect("edge endpoint of the matched type");
            let v = e.v.map_or(boundary, |v| local[v].expect("edge endpoint of the matched type"));
            let w = e.weight().max(0.0);
            adj[u].push((v, w, e.observable));
            adj[v].push((u, w, e.observable));
        }
        let mut dist = vec![f64::INFINITY; nodes * nodes];
        let mut parity = vec![false; nodes * nodes];
        for s in 0..nodes {
            let row = s * nodes;
            dist[row + s] = 0.0;
            let mut heap = BinaryHeap::from([Item(0.0, s)]);
            while let Some(Item(d, u)) = heap.pop() {
                if d > dist[row + u] {
                    continue;
                }
                for &(v, w, obs) in &adj[u] {
                    let nd = d + w;
                    if nd < dist[row + v] {
                        dist[row + v] = nd;
                        parity[row + v] = parity[row + u] ^ obs;
                        heap.push(Item(nd, v));
                    }
                }
            }
        }
        Self { local, n: nodes, dist, parity }
    }

    pub fn boundary(&self) -> usize {
        self.n - 1
    }

    pub fn local_index(&self, detector: usize) -> Option<usize> {
        self.local[detector]
    }

    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n + b]
    }

    #[inline]
    pub fn path_parity(&self, a: usize, b: usize) -> bool {
        self.parity[a * self.n + b]
    }

    /// Cheapest way to neutralise the pair: direct path or both to the boundary.
    fn pair_cost(&self, a: usize, b: usize) -> (f64, bool) {
        let bd = self.boundary();
        let direct = self.distance(a, b);
        let via = self.distance(a, bd) + self.distance(b, bd);
        if direct <= via {
            (direct, self.path_parity(a, b))
        } else {
            (via, self.path_parity(a, bd) ^ self.path_parity(b, bd))
        }
    }

    /// Decode a set of fired detectors given as local node indices.
    pub fn decode_local(&self, defects: &[usize]) -> Decoded {
        let bd = self.boundary();
        let k = defects.len();
        // Clusters: defects joined when pairing beats sending both to the boundary.
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (defects[i], defects[j]);
                if self.distance(a, b) < self.distance(a, bd) + self.distance(b, bd) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
            }
        }
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        let mut root_slot = vec![usize::MAX; k];
        for i in 0..k {
            let r = find(&mut parent, i);
            if root_slot[r] == usize::MAX {
                root_slot[r] = clusters.len();
                clusters.push(Vec::new());
            }
            clusters[root_slot[r]].push(defects[i]);
        }
        let mut out = Decoded { flip: false, weight: 0.0, greedy: false };
        for c in clusters {
            let (w, f, g) = if c.len() <= EXACT_LIMIT { self.exact(&c) } else { self.greedy(&c) };
            out.weight += w;
            out.flip ^= f;
            out.greedy |= g;
        }
        out
    }

    /// Decode global detector indices (other types are ignored).
    pub fn decode(&self, fired: &[usize]) -> Decoded {
        let local: Vec<usize> = fired.iter().filter_map(|&d| self.local[d]).collect();
        self.decode_local(&local)
    }

    fn exact(&self, c: &[usize]) -> (f64, bool, bool) {
        let k = c.len();
        let bd = self.boundary();
        let full = (1usize << k) - 1;
        let mut best = vec![f64::INFINITY; full + 1];
        let mut flip = vec![false; full + 1];
        best[0] = 0.0;
        for mask in 1..=full {
            let i = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << i);
            let mut b = best[rest] + self.distance(c[i], bd);
            let mut f = flip[rest] ^ self.path_parity(c[i], bd);
            let mut others = rest;
            while others != 0 {
                let j = others.trailing_zeros() as usize;
                others &= others - 1;
                let sub = rest & !(1 << j);
                let (w, p) = self.pair_cost(c[i], c[j]);
                let cand = best[sub] + w;
                if cand < b {
                    b = cand;
                    f = flip[sub] ^ p;
                }
            }
            best[mask] = b;
            flip[mask] = f;
        }
        (best[full], flip[full], false)
    }

    fn greedy(&self, c: &[usize]) -> (f64, bool, bool) {
        let k = c.len();
        let bd = self.boundary();
        // partner[i] = Some(j) for a pair, None for the boundary.
        let mut partner: Vec<Option<Option<usize>>> = vec![None; k];
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..k {
            cands.push((self.distance(c[i], bd), i, usize::MAX));
            for j in i + 1..k {
                cands.push((self.pair_cost(c[i], c[j]).0, i, j));
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        for &(_, i, j) in &cands {
            if partner[i].is_some() {
                continue;
            }
            if j == usize::MAX {
                partner[i] = Some(None);
            } else if partner[j].is_none() {
                partner[i] = Some(Some(j));
                partner[j] = Some(Some(i));
            }
        }
        let cost = |i: usize, p: Option<usize>| match p {
            Some(j) => self.pair_cost(c[i], c[j]).0,
            None => self.distance(c[i], bd),
        };
        // Swap improvement between two units (pairs or boundary matches).
        let mut improved = true;
        let mut sweeps = 0;
        while improved && sweeps < 100 {
            improved = false;
            sweeps += 1;
            for i in 0..k {
                for j in i + 1..k {
                    let (pi, pj) = (partner[i].unwrap(), partner[j].unwrap());
                    if pi == Some(j) {
                        continue;
                    }
                    let before = cost(i, pi) + cost(j, pj);
                    let (a, b) = (pi, pj);
                    // Pair i with j; their former partners pair up or go to the boundary.
                    let rest = match (a, b) {
                        (Some(x), Some(y)) => self.pair_cost(c[x], c[y]).0,
                        (Some(x), None) => self.distance(c[x], bd),
                        (None, Some(y)) => self.distance(c[y], bd),
                        (None, None) => 0.0,
                    };
                    let after = self.pair_cost(c[i], c[j]).0 + rest;
                    if after + 1e-12 < before {
                        partner[i] = Some(Some(j));
                        partner[j] = Some(Some(i));
                        match (a, b) {
                            (Some(x), Some(y)) => {
                                partner[x] = Some(Some(y));
                                partner[y] = Some(Some(x));
                            }
                            (Some(x), None) => partner[x] = Some(None),
                            (None, Some(y)) => partner[y] = Some(None),
                            (None, None) => {}
                        }
                        improved = true;
                    }
                }
            }
        }
        let (mut w, mut f) = (0.0, false);
        for i in 0..k {
            match partner[i].unwrap() {
                Some(j) if j > i => {
                    let (cw, cf) = self.pair_cost(c[i], c[j]);
                    w += cw;
                    f ^= cf;
                }
                Some(_) => {}
                None => {
                    w += self.distance(c[i], bd);
                    f ^= self.path_parity(c[i], bd);
                }
            }
        }
        (w, f, true)
    }
}

/// Minimum matching weight by exhaustive recursion; each defect pairs with
/// another defect or with the boundary.
pub fn exhaustive_matching_weight(m: &Matcher, defects: &[usize]) -> f64 {
    fn rec(m: &Matcher, rest: &mut Vec<usize>) -> f64 {
        let Some(first) = rest.pop() else { return 0.0 };
        let mut best = m.distance(first, m.boundary()) + rec(m, rest);
        for idx in 0..rest.len() {
            let other = rest.remove(idx);
            let w = m.distance(first, other) + rec(m, rest);
            best = best.min(w);
            rest.insert(idx, other);
        }
        rest.push(first);
        best
    }
    rec(m, &mut defects.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qec::circuit::{apply_baseline_noise, build_memory_circuit, Basis};
    use crate::qec::dem::build_detector_model;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matcher(d: usize) -> Matcher {
        let c = apply_baseline_noise(&build_memory_circuit(d, d, Basis::Z).unwrap(), 0.001).unwrap();
        Matcher::new(&build_detector_model(&c, [0.0; 3]).unwrap(), StabKind::Z)
    }

    #[test]
    fn empty_syndrome() {
        let m = matcher(3);
        assert_eq!(m.decode_local(&[]), Decoded { flip: false, weight: 0.0, greedy: false });
    }

    #[test]
    fn dp_equals_exhaustive() {
        let m = matcher(3);
        let nodes: Vec<usize> = (0..m.boundary()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..500 {
            let k = t % 9;
            let mut defects = nodes.clone();
            defects.shuffle(&mut rng);
            defects.truncate(k);
            let dp = m.decode_local(&defects).weight;
            let brute = exhaustive_matching_weight(&m, &defects);
            assert!((dp - brute).abs() < 1e-9 * brute.max(1.0), "{defects:?}: {dp} vs {brute}");
        }
    }

    #[test]
    fn greedy_is_an_upper_bound() {
        let m = matcher(5);
        let nodes: Vec<usize> = (0..m.boundary()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut defects = nodes.clone();
            defects.shuffle(&mut rng);
            defects.truncate(10);
            let (g, _, flagged) = m.greedy(&defects);
            let (e, _, _) = m.exact(&defects);
            assert!(flagged && g + 1e-9 >= e);
        }
    }
}
