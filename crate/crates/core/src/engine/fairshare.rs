// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Max-min fair rates by progressive filling.

/// Relative slack under which a link counts as saturated.
const SATURATION_EPS: f64 = 1e-12;

/// Max-min fair rate of every flow.
///
/// `paths[f]` lists the link indices flow `f` crosses; a flow without links
/// gets `f64::INFINITY`. Panics on an out-of-range link index.
pub fn fair_shares<P: AsRef<[usize]>>(capacities: &[f64], paths: &[P]) -> Vec<f64> {
    let weights = vec![1.0; paths.len()];
    weighted_fair_shares(capacities, paths, &weights)
}

/// Per-unit-weight rates where flow `f` stands for `weights[f]` identical
/// flows. Equivalent to expanding each weighted flow into that many copies.
pub fn weighted_fair_shares<P: AsRef<[usize]>>(capacities: &[f64], paths: &[P], weights: &[f64]) -> Vec<f64> {
    FairShareSolver::default().solve(capacities, paths, weights).to_vec()
}

/// Reusable working memory for repeated [`weighted_fair_shares`] calls.
#[derive(Debug, Default, Clone)]
pub struct FairShareSolver {
    remaining: Vec<f64>,
    load: Vec<f64>,
    // users of link l are users[start[l]..start[l + 1]]
    start: Vec<usize>,
    fill: Vec<usize>,
    users: Vec<usize>,
    rate: Vec<f64>,
    frozen: Vec<bool>,
    live: Vec<usize>,
    saturated: Vec<usize>,
}

impl FairShareSolver {
    /// Same contract as [`weighted_fair_shares`]; the slice is valid until
    /// the next call.
    pub fn solve<P: AsRef<[usize]>>(&mut self, capacities: &[f64], paths: &[P], weights: &[f64]) -> &[f64] {
        assert_eq!(paths.len(), weights.len());
        let n_links = capacities.len();
        let Self {
            remaining,
            load,
            start,
            fill,
            users,
            rate,
            frozen,
            live,
            saturated,
        } = self;
        remaining.clear();
        remaining.extend_from_slice(capacities);
        reset(load, n_links, 0.0);
        reset(start, n_links + 1, 0);
        for (f, path) in paths.iter().enumerate() {
            for &l in path.as_ref() {
                assert!(l < n_links, "flow {f} references unknown link {l}");
                load[l] += weights[f];
                start[l + 1] += 1;
            }
        }
        for l in 0..n_links {
            start[l + 1] += start[l];
        }
        fill.clear();
        fill.extend_from_slice(start);
        reset(users, start[n_links], 0);
        for (f, path) in paths.iter().enumerate() {
            for &l in path.as_ref() {
                users[fill[l]] = f;
                fill[l] += 1;
            }
        }

        reset(rate, paths.len(), 0.0);
        reset(frozen, paths.len(), false);
        let mut unfrozen = 0usize;
        for (f, path) in paths.iter().enumerate() {
            if path.as_ref().is_empty() || weights[f] <= 0.0 {
                frozen[f] = true;
                if path.as_ref().is_empty() {
                    rate[f] = f64::INFINITY;
                }
            } else {
                unfrozen += 1;
            }
        }
        live.clear();
        live.extend((0..n_links).filter(|&l| load[l] > 0.0));
        // every unfrozen flow sits at `level`
        let mut level = 0.0f64;

        while unfrozen > 0 {
            let mut delta = f64::INFINITY;
            live.retain(|&l| {
                if load[l] <= 0.0 {
                    load[l] = 0.0;
                    return false;
                }
                let r = remaining[l].max(0.0);
                // divide only when this link can beat the current minimum
                if r <= delta * load[l] * (1.0 + 1e-9) {
                    let d = r / load[l];
                    if d < delta {
                        delta = d;
                    }
                }
                true
            });
            level += delta;
            saturated.clear();
            for &l in live.iter() {
                remaining[l] -= delta * load[l];
                if remaining[l] <= SATURATION_EPS * capacities[l] {
                    saturated.push(l);
                }
            }
            for &l in saturated.iter() {
                for &f in &users[start[l]..start[l + 1]] {
                    if !frozen[f] {
                        frozen[f] = true;
                        rate[f] = level;
                        unfrozen -= 1;
                        for &m in paths[f].as_ref() {
                            load[m] -= weights[f];
                        }
                    }
                }
            }
        }
        rate
    }
}

fn reset<T: Copy>(v: &mut Vec<T>, n: usize, x: T) {
    v.clear();
    v.resize(n, x);
}
