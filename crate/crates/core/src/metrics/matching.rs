//! Bipartite matching between areas (left) and ground-truth occurrences (right).

/// Maximum-cardinality matching; among all maximum matchings returns the
/// lexicographically smallest sorted list of `(left, right)` pairs.
///
/// `adj[l]` lists the right vertices adjacent to `l`.
pub fn lex_min_max_matching(adj: &[Vec<usize>], n_right: usize) -> Vec<(usize, usize)> {
    let n_left = adj.len();
    let strictly_sorted = |a: &Vec<usize>| a.windows(2).all(|w| w[0] < w[1]);
    let owned: Vec<Vec<usize>>;
    let adj: &[Vec<usize>] = if adj.iter().all(strictly_sorted) {
        adj
    } else {
        owned = adj
            .iter()
            .map(|a| {
                let mut a = a.clone();
                a.sort_unstable();
                a.dedup();
                a
            })
            .collect();
        &owned
    };

    // Components decompose the problem: the greedy below picks pairs in
    // increasing order and feasibility in one component ignores the others.
    let mut parent: Vec<usize> = (0..n_left + n_right).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (l, rights) in adj.iter().enumerate() {
        for &r in rights {
            let (a, b) = (find(&mut parent, l), find(&mut parent, n_left + r));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut slot_of_root = vec![usize::MAX; n_left + n_right];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for l in 0..n_left {
        if adj[l].is_empty() {
            continue;
        }
        let root = find(&mut parent, l);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot_of_root[root]].push(l);
    }

    let mut pairs = Vec::new();
    // components share no right vertex, so one scratch state serves all
    let mut used_right = vec![false; n_right];
    let mut kuhn = Kuhn::new(n_right);
    for lefts in comps {
        if lefts.len() == 1 {
            pairs.push((lefts[0], adj[lefts[0]][0]));
            continue;
        }
        let mut target = kuhn.max_matching_size(&adj, &lefts, &used_right);
        for (pos, &l) in lefts.iter().enumerate() {
            if target == 0 {
                break;
            }
            let rest = &lefts[pos + 1..];
            for &r in &adj[l] {
                if used_right[r] {
                    continue;
                }
                used_right[r] = true;
                if 1 + kuhn.max_matching_size(&adj, rest, &used_right) == target {
                    pairs.push((l, r));
                    target -= 1;
                    break;
                }
                used_right[r] = false;
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Kuhn's augmenting paths with reusable buffers; `visited` and `owner`
/// entries are valid only when their stamp matches the current round.
struct Kuhn {
    owner: Vec<(usize, usize)>,
    visited: Vec<usize>,
    call: usize,
    round: usize,
}

impl Kuhn {
    fn new(n_right: usize) -> Self {
        Self {
            owner: vec![(0, 0); n_right],
            visited: vec![0; n_right],
            call: 0,
            round: 0,
        }
    }

    /// Size of a maximum matching of `lefts` into right vertices not `blocked`.
    fn max_matching_size(&mut self, adj: &[Vec<usize>], lefts: &[usize], blocked: &[bool]) -> usize {
        self.call += 1;
        let mut size = 0;
        for &l in lefts {
            self.round += 1;
            if self.augment(l, adj, blocked) {
                size += 1;
            }
        }
        size
    }

    fn augment(&mut self, l: usize, adj: &[Vec<usize>], blocked: &[bool]) -> bool {
        for &r in &adj[l] {
            if blocked[r] || self.visited[r] == self.round {
                continue;
            }
            self.visited[r] = self.round;
            let (stamp, other) = self.owner[r];
            if stamp != self.call || self.augment(other, adj, blocked) {
                self.owner[r] = (self.call, l);
                return true;
            }
        }
        false
    }
}

/// Reference matcher: enumerates every assignment of left vertices to a
/// distinct adjacent right vertex (or none). Exponential; for small inputs only.
pub fn brute_force_max_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn go(l: usize, adj: &[Vec<usize>], used: &mut [bool]) -> usize {
        if l == adj.len() {
            return 0;
        }
        let mut best = go(l + 1, adj, used);
        for &r in &adj[l] {
            if !used[r] {
                used[r] = true;
                best = best.max(1 + go(l + 1, adj, used));
                used[r] = false;
            }
        }
        best
    }
    go(0, adj, &mut vec![false; n_right])
}
