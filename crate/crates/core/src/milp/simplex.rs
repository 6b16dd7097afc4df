//! Dense bounded-variable simplex on the tableau `B^-1 [A | -I]`.
//!
//! Every row `i` owns a logical column `n + i` whose value is the row
//! activity `A_i x`, so row ranges become ordinary variable bounds and the
//! all-logical basis is always available as a starting point.

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const HARRIS_SLACK: f64 = 1e-9;
const REFACTOR_EVERY: usize = 200;

#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    pub col_lo: Vec<f64>,
    pub col_hi: Vec<f64>,
    pub cost: Vec<f64>,
}

impl LpData {
    pub fn m(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

pub(crate) struct Simplex {
    data: LpData,
    m: usize,
    nc: usize,
    tab: Vec<f64>,
    basic: Vec<usize>,
    row_of: Vec<usize>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    feas_tol: f64,
    pivots: usize,
    scratch: Vec<f64>,
    nz: Vec<usize>,
}

const NONBASIC: usize = usize::MAX;

impl Simplex {
    pub fn new(data: LpData, feas_tol: f64) -> Self {
        let m = data.m();
        let n = data.n;
        let nc = n + m;
        let mut lo = data.col_lo.clone();
        lo.extend_from_slice(&data.row_lo);
        let mut hi = data.col_hi.clone();
        hi.extend_from_slice(&data.row_hi);
        let mut cost = data.cost.clone();
        cost.resize(nc, 0.0);
        let mut s = Simplex {
            data,
            m,
            nc,
            tab: vec![0.0; m * nc],
            basic: (n..nc).collect(),
            row_of: vec![NONBASIC; nc],
            x: vec![0.0; nc],
            lo,
            hi,
            cost,
            d: vec![0.0; nc],
            feas_tol,
            pivots: 0,
            scratch: vec![0.0; nc],
            nz: Vec::with_capacity(nc),
        };
        for i in 0..m {
            s.row_of[n + i] = i;
        }
        for j in 0..n {
            s.x[j] = s.home_value(j, false);
        }
        s.slack_tableau();
        s.compute_basics();
        s.compute_duals();
        s
    }

    fn slack_tableau(&mut self) {
        let (n, nc) = (self.data.n, self.nc);
        self.tab.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.data.rows.iter().enumerate() {
            for &(j, a) in row {
                self.tab[i * nc + j] -= a;
            }
            self.tab[i * nc + n + i] = 1.0;
        }
    }

    fn home_value(&self, j: usize, prefer_upper: bool) -> f64 {
        let (l, u) = (self.lo[j], self.hi[j]);
        if prefer_upper && u.is_finite() {
            u
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.data.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.data.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn col_bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    /// Changes the bounds of a column, keeping the current basis.
    pub fn set_col_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        let was_upper = self.row_of[j] == NONBASIC && self.x[j] == self.hi[j] && self.hi[j] != self.lo[j];
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.row_of[j] == NONBASIC {
            // prefer the bound that keeps the reduced cost dual feasible
            let upper = if self.d[j] < -DUAL_TOL {
                true
            } else if self.d[j] > DUAL_TOL {
                false
            } else {
                was_upper
            };
            let new = self.home_value(j, upper);
            self.move_nonbasic(j, new);
        }
    }

    fn move_nonbasic(&mut self, j: usize, new: f64) {
        let delta = new - self.x[j];
        if delta == 0.0 {
            return;
        }
        self.x[j] = new;
        for i in 0..self.m {
            let t = self.tab[i * self.nc + j];
            if t != 0.0 {
                self.x[self.basic[i]] -= t * delta;
            }
        }
    }

    /// Recomputes basic values and reduced costs from the current tableau.
    pub fn recompute(&mut self) {
        self.compute_basics();
        self.compute_duals();
    }

    /// Rebuilds the tableau and recomputes values and reduced costs.
    pub fn refresh(&mut self) {
        self.refactor_or_reset();
    }

    fn refactor_or_reset(&mut self) {
        if !self.refactor() {
            let n = self.data.n;
            self.basic = (n..self.nc).collect();
            self.row_of.iter_mut().for_each(|r| *r = NONBASIC);
            for i in 0..self.m {
                self.row_of[n + i] = i;
            }
            self.slack_tableau();
        }
        for j in 0..self.nc {
            if self.row_of[j] == NONBASIC {
                let v = self.x[j].clamp(self.lo[j], self.hi[j]);
                self.x[j] = if v == self.lo[j] || v == self.hi[j] { v } else { self.home_value(j, false) };
            }
        }
        self.compute_basics();
        self.compute_duals();
    }

    /// Rebuilds the tableau for the current basis by Gauss-Jordan elimination.
    fn refactor(&mut self) -> bool {
        self.slack_tableau();
        let (m, nc, n) = (self.m, self.nc, self.data.n);
        let cols = self.basic.clone();
        let mut row_done = vec![false; m];
        let mut new_basic = vec![NONBASIC; m];
        // logicals first: their columns are unit vectors in the slack tableau
        let mut order: Vec<usize> = cols.iter().copied().filter(|&c| c >= n).collect();
        order.extend(cols.iter().copied().filter(|&c| c < n));
        for c in order {
            let mut best = NONBASIC;
            let mut best_abs = 1e-9;
            for r in 0..m {
                if !row_done[r] {
                    let v = self.tab[r * nc + c].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = r;
                    }
                }
            }
            if best == NONBASIC {
                return false;
            }
            self.eliminate(best, c);
            row_done[best] = true;
            new_basic[best] = c;
        }
        self.basic = new_basic;
        for (i, &c) in self.basic.iter().enumerate() {
            self.row_of[c] = i;
        }
        self.pivots = 0;
        true
    }

    /// Scales row `r` so column `q` is 1 and clears `q` from every other row.
    fn eliminate(&mut self, r: usize, q: usize) {
        let nc = self.nc;
        let piv = self.tab[r * nc + q];
        let inv = 1.0 / piv;
        self.nz.clear();
        for j in 0..nc {
            let v = &mut self.tab[r * nc + j];
            if *v != 0.0 {
                *v *= inv;
                if v.abs() < 1e-14 {
                    *v = 0.0;
                } else {
                    self.nz.push(j);
                }
            }
        }
        self.tab[r * nc + q] = 1.0;
        self.scratch[..nc].copy_from_slice(&self.tab[r * nc..(r + 1) * nc]);
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * nc..(i + 1) * nc];
            for &j in &self.nz {
                row[j] -= f * self.scratch[j];
            }
            row[q] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let leaving = self.basic[r];
        self.eliminate(r, q);
        let dq = self.d[q];
        if dq != 0.0 {
            for &j in &self.nz {
                self.d[j] -= dq * self.scratch[j];
            }
        }
        self.d[q] = 0.0;
        self.basic[r] = q;
        self.row_of[q] = r;
        self.row_of[leaving] = NONBASIC;
        self.pivots += 1;
        if self.pivots >= REFACTOR_EVERY {
            self.refactor_or_reset();
        }
    }

    fn compute_basics(&mut self) {
        let nc = self.nc;
        for i in 0..self.m {
            let row = &self.tab[i * nc..(i + 1) * nc];
            let mut acc = 0.0;
            for j in 0..nc {
                if self.row_of[j] == NONBASIC && row[j] != 0.0 {
                    acc -= row[j] * self.x[j];
                }
            }
            self.x[self.basic[i]] = acc;
        }
    }

    fn compute_duals(&mut self) {
        let nc = self.nc;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basic[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[i * nc..(i + 1) * nc];
            for j in 0..nc {
                self.d[j] -= cb * row[j];
            }
        }
        for &b in &self.basic {
            self.d[b] = 0.0;
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - self.feas_tol {
            self.lo[j] - v
        } else if v > self.hi[j] + self.feas_tol {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    fn primal_feasible(&self) -> bool {
        self.basic.iter().all(|&b| self.infeasibility(b) == 0.0)
    }

    /// Directions a nonbasic column may move in: (can increase, can decrease).
    fn room(&self, j: usize) -> (bool, bool) {
        let (l, u, v) = (self.lo[j], self.hi[j], self.x[j]);
        if l == u {
            return (false, false);
        }
        (v < u, v > l)
    }

    fn dual_feasible(&self) -> bool {
        (0..self.nc).all(|j| {
            if self.row_of[j] != NONBASIC {
                return true;
            }
            let (up, down) = self.room(j);
            !(up && self.d[j] < -DUAL_TOL) && !(down && self.d[j] > DUAL_TOL)
        })
    }

    /// Solves from whatever basis is loaded.
    pub fn solve(&mut self, iter_cap: usize) -> LpStatus {
        if !self.primal_feasible() && self.dual_feasible() {
            match self.dual(iter_cap) {
                LpStatus::Optimal => {}
                LpStatus::IterLimit => {}
                other => return other,
            }
        }
        if !self.primal_feasible() {
            match self.primal(true, iter_cap) {
                LpStatus::Optimal => {}
                other => return other,
            }
        }
        self.primal(false, iter_cap)
    }

    /// Primal simplex. Phase 1 minimizes the sum of bound violations of the
    /// basic variables; phase 2 minimizes the true cost from a feasible basis.
    fn primal(&mut self, phase1: bool, iter_cap: usize) -> LpStatus {
        let bland_after = 5 * (self.m + self.nc);
        let mut iters = 0usize;
        let mut d1 = vec![0.0; self.nc];
        if !phase1 {
            self.compute_duals();
        }
        loop {
            if iters >= iter_cap {
                return LpStatus::IterLimit;
            }
            let bland = iters >= bland_after;
            if phase1 {
                let nc = self.nc;
                d1.iter_mut().for_each(|v| *v = 0.0);
                let mut any = false;
                for i in 0..self.m {
                    let b = self.basic[i];
                    let w = if self.x[b] < self.lo[b] - self.feas_tol {
                        -1.0
                    } else if self.x[b] > self.hi[b] + self.feas_tol {
                        1.0
                    } else {
                        continue;
                    };
                    any = true;
                    let row = &self.tab[i * nc..(i + 1) * nc];
                    for j in 0..nc {
                        d1[j] -= w * row[j];
                    }
                }
                if !any {
                    return LpStatus::Optimal;
                }
            }
            let dj = |s: &Self, j: usize| if phase1 { d1[j] } else { s.d[j] };
            // pricing
            let mut q = NONBASIC;
            let mut dir = 0.0;
            let mut best = 0.0;
            for j in 0..self.nc {
                if self.row_of[j] != NONBASIC {
                    continue;
                }
                let (up, down) = self.room(j);
                let dv = dj(self, j);
                let (score, sdir) = if up && dv < -DUAL_TOL {
                    (-dv, 1.0)
                } else if down && dv > DUAL_TOL {
                    (dv, -1.0)
                } else {
                    continue;
                };
                if bland {
                    q = j;
                    dir = sdir;
                    break;
                }
                if score > best {
                    best = score;
                    q = j;
                    dir = sdir;
                }
            }
            if q == NONBASIC {
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            }
            // ratio test (Harris two-pass)
            let nc = self.nc;
            let mut limit = f64::INFINITY;
            for pass in 0..2 {
                let mut chosen = NONBASIC;
                let mut chosen_alpha = 0.0;
                let mut chosen_t = f64::INFINITY;
                for i in 0..self.m {
                    let alpha = -self.tab[i * nc + q] * dir;
                    if alpha.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let b = self.basic[i];
                    let (v, l, u) = (self.x[b], self.lo[b], self.hi[b]);
                    let slack = if pass == 0 { HARRIS_SLACK } else { 0.0 };
                    let t = if phase1 && v < l - self.feas_tol {
                        if alpha > 0.0 { (l - v + slack) / alpha } else { continue }
                    } else if phase1 && v > u + self.feas_tol {
                        if alpha < 0.0 { (v - u + slack) / -alpha } else { continue }
                    } else if alpha < 0.0 {
                        if l.is_finite() { (v - l + slack) / -alpha } else { continue }
                    } else if u.is_finite() {
                        (u - v + slack) / alpha
                    } else {
                        continue;
                    };
                    let t = t.max(0.0);
                    if pass == 0 {
                        limit = limit.min(t);
                    } else if t <= limit {
                        let better = if bland {
                            chosen == NONBASIC || b < self.basic[chosen]
                        } else {
                            alpha.abs() > chosen_alpha
                        };
                        if better {
                            chosen = i;
                            chosen_alpha = alpha.abs();
                            chosen_t = t;
                        }
                    }
                }
                if pass == 1 {
                    let flip = self.hi[q] - self.lo[q];
                    if flip.is_finite() && flip <= chosen_t.min(limit) {
                        let target = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                        self.move_nonbasic(q, target);
                        break;
                    }
                    if chosen == NONBASIC {
                        return if phase1 { LpStatus::Infeasible } else { LpStatus::Unbounded };
                    }
                    let r = chosen;
                    let b = self.basic[r];
                    let alpha = -self.tab[r * nc + q] * dir;
                    let (v, l, u) = (self.x[b], self.lo[b], self.hi[b]);
                    let to_upper = if phase1 && v < l - self.feas_tol {
                        false
                    } else if phase1 && v > u + self.feas_tol {
                        true
                    } else {
                        alpha > 0.0
                    };
                    let target = if to_upper { u } else { l };
                    let step = ((target - v) / alpha).max(0.0);
                    let old = self.x[q];
                    self.move_nonbasic(q, old + dir * step);
                    self.x[b] = target;
                    self.pivot(r, q);
                }
            }
            iters += 1;
        }
    }

    /// Dual simplex from a dual-feasible basis.
    fn dual(&mut self, iter_cap: usize) -> LpStatus {
        let bland_after = 5 * (self.m + self.nc);
        let nc = self.nc;
        let mut iters = 0usize;
        loop {
            if iters >= iter_cap {
                return LpStatus::IterLimit;
            }
            let bland = iters >= bland_after;
            let mut r = NONBASIC;
            let mut worst = 0.0;
            for i in 0..self.m {
                let b = self.basic[i];
                let inf = self.infeasibility(b);
                if inf > 0.0 {
                    if bland {
                        if r == NONBASIC || b < self.basic[r] {
                            r = i;
                        }
                    } else if inf > worst {
                        worst = inf;
                        r = i;
                    }
                }
            }
            if r == NONBASIC {
                return LpStatus::Optimal;
            }
            let b = self.basic[r];
            let below = self.x[b] < self.lo[b];
            let target = if below { self.lo[b] } else { self.hi[b] };
            // x_b changes by -T_rj per unit increase of x_j
            let mut limit = f64::INFINITY;
            let mut q = NONBASIC;
            for pass in 0..2 {
                let mut best_abs = 0.0;
                for j in 0..nc {
                    if self.row_of[j] != NONBASIC {
                        continue;
                    }
                    let t = self.tab[r * nc + j];
                    if t.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let (up, down) = self.room(j);
                    // increasing x_j helps iff -t has the sign we need
                    let helps_up = if below { t < 0.0 } else { t > 0.0 };
                    let ok = (up && helps_up) || (down && !helps_up);
                    if !ok {
                        continue;
                    }
                    let slack = if pass == 0 { DUAL_TOL } else { 0.0 };
                    let ratio = ((self.d[j].abs() + slack) / t.abs()).max(0.0);
                    if pass == 0 {
                        limit = limit.min(ratio);
                    } else if self.d[j].abs() / t.abs() <= limit {
                        let better = if bland { q == NONBASIC || j < q } else { t.abs() > best_abs };
                        if better {
                            best_abs = t.abs();
                            q = j;
                        }
                    }
                }
            }
            if q == NONBASIC {
                return LpStatus::Infeasible;
            }
            let t = self.tab[r * nc + q];
            let delta = (self.x[b] - target) / t;
            let old = self.x[q];
            self.move_nonbasic(q, old + delta);
            self.x[b] = target;
            self.pivot(r, q);
            iters += 1;
        }
    }
}
