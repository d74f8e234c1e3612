//! Shallow regression trees over a term's bin histogram.
//!
//! A term's bins form a grid of `rows x cols` cells (`cols == 1` for main
//! effects). Trees are grown best-first on gradient/hessian sums with
//! axis-aligned cuts, so every leaf is a rectangle of cells. For main
//! effects the row axis may be visited through a permutation, which lets
//! categorical bins be ordered by their gradient ratio before cutting.

/// Largest Newton step (before shrinkage) a leaf may take.
pub(crate) const MAX_LEAF_STEP: f64 = 5.0;
const MIN_HESSIAN: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Histogram {
    pub rows: usize,
    pub cols: usize,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub count: Vec<f64>,
}

impl Histogram {
    pub fn new(rows: usize, cols: usize) -> Self {
        let n = rows * cols;
        Histogram {
            rows,
            cols,
            grad: vec![0.0; n],
            hess: vec![0.0; n],
            count: vec![0.0; n],
        }
    }

    pub fn clear(&mut self) {
        self.grad.iter_mut().for_each(|v| *v = 0.0);
        self.hess.iter_mut().for_each(|v| *v = 0.0);
        self.count.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    pub fn add(&mut self, cell: usize, g: f64, h: f64, w: f64) {
        self.grad[cell] += w * g;
        self.hess[cell] += w * h;
        self.count[cell] += w;
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
    c: f64,
}

impl Stats {
    fn score(&self) -> f64 {
        self.g * self.g / self.h.max(MIN_HESSIAN)
    }

    fn sub(self, o: Stats) -> Stats {
        Stats {
            g: self.g - o.g,
            h: self.h - o.h,
            c: self.c - o.c,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cut {
    axis: u8,
    /// Leaf-relative position: rows/cols `[lo, at)` go left.
    at: usize,
    gain: f64,
}

#[derive(Debug, Clone)]
struct Leaf {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
    stats: Stats,
    cut: Option<Cut>,
}

/// Result of fitting one tree: a per-cell value table (unshrunk Newton
/// steps) and the total split gain.
#[derive(Debug, Clone)]
pub(crate) struct TreeFit {
    pub values: Vec<f64>,
    pub gain: f64,
}

pub(crate) struct TreeBuilder<'a> {
    hist: &'a Histogram,
    /// Visiting order of the row axis.
    order: Vec<usize>,
    min_leaf: f64,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(hist: &'a Histogram, min_samples_leaf: usize) -> Self {
        TreeBuilder {
            hist,
            order: (0..hist.rows).collect(),
            min_leaf: min_samples_leaf.max(1) as f64,
        }
    }

    /// Orders the row axis by gradient/hessian ratio (used for categorical
    /// main effects). Only valid for one-column histograms.
    pub fn order_rows_by_ratio(mut self) -> Self {
        debug_assert_eq!(self.hist.cols, 1);
        let ratio = |r: usize| self.hist.grad[r] / self.hist.hess[r].max(MIN_HESSIAN);
        self.order
            .sort_by(|&a, &b| ratio(a).partial_cmp(&ratio(b)).unwrap().then(a.cmp(&b)));
        self
    }

    #[inline]
    fn cell(&self, r: usize, c: usize) -> usize {
        self.order[r] * self.hist.cols + c
    }

    fn rect_stats(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Stats {
        let mut s = Stats::default();
        for r in r0..r1 {
            for c in c0..c1 {
                let k = self.cell(r, c);
                s.g += self.hist.grad[k];
                s.h += self.hist.hess[k];
                s.c += self.hist.count[k];
            }
        }
        s
    }

    fn best_cut(&self, leaf: &Leaf) -> Option<Cut> {
        let parent = leaf.stats.score();
        let mut best: Option<Cut> = None;
        let mut consider = |axis: u8, at: usize, left: Stats, total: Stats| {
            let right = total.sub(left);
            if left.c < self.min_leaf || right.c < self.min_leaf {
                return;
            }
            let gain = left.score() + right.score() - parent;
            if gain > 1e-15 && best.is_none_or(|b| gain > b.gain) {
                best = Some(Cut { axis, at, gain });
            }
        };
        // Cuts across the row axis.
        if leaf.r1 - leaf.r0 > 1 {
            let mut acc = Stats::default();
            for r in leaf.r0..leaf.r1 - 1 {
                for c in leaf.c0..leaf.c1 {
                    let k = self.cell(r, c);
                    acc.g += self.hist.grad[k];
                    acc.h += self.hist.hess[k];
                    acc.c += self.hist.count[k];
                }
                consider(0, r + 1, acc, leaf.stats);
            }
        }
        // Cuts across the column axis.
        if leaf.c1 - leaf.c0 > 1 {
            let mut acc = Stats::default();
            for c in leaf.c0..leaf.c1 - 1 {
                for r in leaf.r0..leaf.r1 {
                    let k = self.cell(r, c);
                    acc.g += self.hist.grad[k];
                    acc.h += self.hist.hess[k];
                    acc.c += self.hist.count[k];
                }
                consider(1, c + 1, acc, leaf.stats);
            }
        }
        best
    }

    fn make_leaf(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Leaf {
        let mut leaf = Leaf {
            r0,
            r1,
            c0,
            c1,
            stats: self.rect_stats(r0, r1, c0, c1),
            cut: None,
        };
        leaf.cut = self.best_cut(&leaf);
        leaf
    }

    /// Grows a tree with at most `max_leaves` leaves. Returns `None` when no
    /// admissible split exists.
    pub fn fit(&self, max_leaves: usize) -> Option<TreeFit> {
        let h = self.hist;
        let mut leaves = vec![self.make_leaf(0, h.rows, 0, h.cols)];
        let mut gain = 0.0;
        while leaves.len() < max_leaves.max(2) {
            let pick = leaves
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.cut.map(|c| (i, c.gain)))
                .fold(None, |acc: Option<(usize, f64)>, (i, g)| match acc {
                    Some((_, bg)) if bg >= g => acc,
                    _ => Some((i, g)),
                });
            let Some((i, _)) = pick else { break };
            let leaf = leaves.swap_remove(i);
            let cut = leaf.cut.unwrap();
            gain += cut.gain;
            let (a, b) = if cut.axis == 0 {
                (
                    self.make_leaf(leaf.r0, cut.at, leaf.c0, leaf.c1),
                    self.make_leaf(cut.at, leaf.r1, leaf.c0, leaf.c1),
                )
            } else {
                (
                    self.make_leaf(leaf.r0, leaf.r1, leaf.c0, cut.at),
                    self.make_leaf(leaf.r0, leaf.r1, cut.at, leaf.c1),
                )
            };
            leaves.push(a);
            leaves.push(b);
            if max_leaves < 2 {
                break;
            }
        }
        if leaves.len() < 2 {
            return None;
        }
        let mut values = vec![0.0; h.rows * h.cols];
        for leaf in &leaves {
            let v = if leaf.stats.h > MIN_HESSIAN {
                (-leaf.stats.g / leaf.stats.h).clamp(-MAX_LEAF_STEP, MAX_LEAF_STEP)
            } else {
                0.0
            };
            for r in leaf.r0..leaf.r1 {
                for c in leaf.c0..leaf.c1 {
                    values[self.cell(r, c)] = v;
                }
            }
        }
        Some(TreeFit { values, gain })
    }
}

/// Best 2-D cut pair (one threshold per axis, four quadrants) on a grid
/// histogram; returns the gain over the unsplit grid. Used for ranking
/// candidate interaction pairs.
pub(crate) fn best_quadrant_gain(hist: &Histogram) -> f64 {
    let (nr, nc) = (hist.rows, hist.cols);
    // Inclusive 2-D prefix sums with a zero border: p[(r)*(nc+1)+c] = sum over [0,r)x[0,c).
    let w = nc + 1;
    let mut pg = vec![0.0; (nr + 1) * w];
    let mut ph = vec![0.0; (nr + 1) * w];
    for r in 0..nr {
        let (mut rg, mut rh) = (0.0, 0.0);
        for c in 0..nc {
            rg += hist.grad[r * nc + c];
            rh += hist.hess[r * nc + c];
            pg[(r + 1) * w + c + 1] = pg[r * w + c + 1] + rg;
            ph[(r + 1) * w + c + 1] = ph[r * w + c + 1] + rh;
        }
    }
    let total_g = pg[nr * w + nc];
    let total_h = ph[nr * w + nc];
    let score = |g: f64, h: f64| if h > MIN_HESSIAN { g * g / h } else { 0.0 };
    let parent = score(total_g, total_h);
    let mut best = 0.0f64;
    for i in 1..nr {
        let row_g = pg[i * w + nc];
        let row_h = ph[i * w + nc];
        for j in 1..nc {
            let g00 = pg[i * w + j];
            let h00 = ph[i * w + j];
            let g01 = row_g - g00;
            let h01 = row_h - h00;
            let g10 = pg[nr * w + j] - g00;
            let h10 = ph[nr * w + j] - h00;
            let g11 = total_g - g00 - g01 - g10;
            let h11 = total_h - h00 - h01 - h10;
            let gain = score(g00, h00) + score(g01, h01) + score(g10, h10) + score(g11, h11) - parent;
            if gain > best {
                best = gain;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist_1d(g: &[f64], h: &[f64]) -> Histogram {
        let mut hist = Histogram::new(g.len(), 1);
        for (k, (&gi, &hi)) in g.iter().zip(h).enumerate() {
            hist.add(k, gi, hi, 1.0);
        }
        hist
    }

    #[test]
    fn single_split_separates_signs() {
        let hist = hist_1d(&[-1.0, -1.0, 1.0, 1.0], &[0.25; 4]);
        let fit = TreeBuilder::new(&hist, 1).fit(2).unwrap();
        assert_eq!(fit.values[0], fit.values[1]);
        assert!(fit.values[0] > 0.0 && fit.values[3] < 0.0);
        assert!(fit.gain > 0.0);
    }

    #[test]
    fn leaf_budget_is_respected() {
        let g: Vec<f64> = (0..16).map(|i| ((i * 5) % 7) as f64 - 3.0).collect();
        let hist = hist_1d(&g, &[1.0; 16]);
        for leaves in 2..8 {
            let fit = TreeBuilder::new(&hist, 1).fit(leaves).unwrap();
            let mut distinct = fit.values.clone();
            distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
            distinct.dedup();
            assert!(distinct.len() <= leaves);
        }
    }

    #[test]
    fn no_split_on_single_bin() {
        let hist = hist_1d(&[1.0], &[1.0]);
        assert!(TreeBuilder::new(&hist, 1).fit(3).is_none());
    }

    #[test]
    fn ratio_ordering_groups_like_bins() {
        // bins 0 and 2 push up, 1 and 3 push down: one ordered cut cannot
        // separate them, a ratio-ordered cut can.
        let hist = hist_1d(&[-1.0, 1.0, -1.0, 1.0], &[0.25; 4]);
        let fit = TreeBuilder::new(&hist, 1).order_rows_by_ratio().fit(2).unwrap();
        assert_eq!(fit.values[0], fit.values[2]);
        assert_eq!(fit.values[1], fit.values[3]);
        assert!(fit.values[0] > 0.0);
    }

    #[test]
    fn quadrant_gain_finds_xor() {
        let mut xor = Histogram::new(2, 2);
        let mut flat = Histogram::new(2, 2);
        for (k, g) in [-1.0, 1.0, 1.0, -1.0].iter().enumerate() {
            xor.add(k, *g, 0.25, 1.0);
            flat.add(k, 0.0, 0.25, 1.0);
        }
        assert!(best_quadrant_gain(&xor) > 1.0);
        assert_eq!(best_quadrant_gain(&flat), 0.0);
    }
}
