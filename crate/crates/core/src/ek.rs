//! Nearest-integer traces of the power sums `sum_k eta_k theta_k^n`,
//! difference tables, reconstruction of the last expansion factor from
//! integer data, the rational one-step predictor, and a branching
//! enumeration that covers the bad parameter set at a finite horizon by
//! short intervals.

use rayon::prelude::*;
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use thiserror::Error;

use crate::fourier::dist_to_int;
use crate::ifs::ParameterBox;

/// Operational stand-in for the pre-asymptotic cutoff: table denominators
/// below this are refused.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

/// Exact-integer range of f64.
const MAGNITUDE_GUARD: f64 = 9007199254740992.0; // 2^53

/// Search-node budget for the covering enumeration.
const ENUMERATION_BUDGET: u64 = 200_000_000;

#[derive(Debug, Error)]
pub enum EkError {
    #[error("horizon too deep for double precision (power sum reaches 2^53 at n = {at})")]
    HorizonTooDeep { at: u32 },
    #[error("pre-asymptotic index, increase n (denominator {value:.3e} below floor)")]
    PreAsymptotic { value: f64 },
    #[error("combinatorial budget exceeded ({visited} nodes, {partial_count} sequences so far)")]
    BudgetExceeded { visited: u64, partial_count: u64 },
    #[error("{0}")]
    Invalid(String),
}

/// Nearest-integer decomposition `sum_k eta_k theta_k^n = K_n + eps_n`
/// for `n = 0..=len`, with `|eps_n| <= 1/2`. Ties round half to even so
/// traces are reproducible.
#[derive(Debug, Clone)]
pub struct EkTrace {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub k: Vec<i64>,
    pub eps: Vec<f64>,
}

impl EkTrace {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// Builds the trace for `n = 0..=n_max`. Fails once the power sum leaves
/// the exact-integer range of f64.
pub fn compute_trace(theta: &[f64], eta: &[f64], n_max: u32) -> Result<EkTrace, EkError> {
    assert_eq!(theta.len(), eta.len());
    assert!(!theta.is_empty());
    let mut powers = vec![1.0; theta.len()];
    let mut k = Vec::with_capacity(n_max as usize + 1);
    let mut eps = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let s: f64 = eta.iter().zip(&powers).map(|(e, p)| e * p).sum();
        if s.abs() >= MAGNITUDE_GUARD {
            return Err(EkError::HorizonTooDeep { at: n });
        }
        let nearest = s.round_ties_even();
        k.push(nearest as i64);
        eps.push(s - nearest);
        for (p, t) in powers.iter_mut().zip(theta) {
            *p *= t;
        }
    }
    Ok(EkTrace {
        theta: theta.to_vec(),
        eta: eta.to_vec(),
        k,
        eps,
    })
}

/// Difference table: row 0 is the source sequence, row `j` applies
/// `A_n^(j) = A_{n+1}^(j-1) - theta_j A_n^(j-1)` against the fixed prefix
/// `theta_1..theta_{d-1}`. Row `j` is one entry shorter than row `j-1`.
#[derive(Debug, Clone)]
pub struct DifferenceTable {
    pub rows: Vec<Vec<f64>>,
    pub theta_prefix: Vec<f64>,
}

impl DifferenceTable {
    pub fn from_sequence(source: Vec<f64>, theta_prefix: &[f64]) -> Self {
        let mut rows = vec![source];
        for t in theta_prefix {
            let prev = rows.last().unwrap();
            let row: Vec<f64> = prev
                .windows(2)
                .map(|w| w[1] - t * w[0])
                .collect();
            rows.push(row);
        }
        Self {
            rows,
            theta_prefix: theta_prefix.to_vec(),
        }
    }

    /// Deepest row, the one whose consecutive ratio recovers theta_d.
    pub fn last_row(&self) -> &[f64] {
        self.rows.last().unwrap()
    }
}

/// Both tables from one trace: the integer table (from `K_n`) and the exact
/// table (from `K_n + eps_n`). The trace must reach depth `d`.
pub fn build_tables(trace: &EkTrace) -> (DifferenceTable, DifferenceTable) {
    let d = trace.dim();
    assert!(trace.len() >= d, "trace shorter than the dimension");
    let prefix = &trace.theta[..d - 1];
    let from_k = DifferenceTable::from_sequence(
        trace.k.iter().map(|k| *k as f64).collect(),
        prefix,
    );
    let exact = DifferenceTable::from_sequence(
        trace
            .k
            .iter()
            .zip(&trace.eps)
            .map(|(k, e)| *k as f64 + e)
            .collect(),
        prefix,
    );
    (from_k, exact)
}

/// Closed form of the exact table:
/// `sum_{i > j} eta_i prod_{k <= j} (theta_i - theta_k) theta_i^n`
/// (1-based paper indices). Used as the independent route when testing the
/// recursion.
pub fn table_closed_form(theta: &[f64], eta: &[f64], j: usize, n: u32) -> f64 {
    (j..theta.len())
        .map(|i| {
            let gaps: f64 = (0..j).map(|k| theta[i] - theta[k]).product();
            eta[i] * gaps * theta[i].powi(n as i32)
        })
        .sum()
}

/// Sum of absolute term magnitudes of the closed form; the scale against
/// which a relative comparison of the two routes is meaningful.
pub fn table_closed_form_scale(theta: &[f64], eta: &[f64], j: usize, n: u32) -> f64 {
    (j..theta.len())
        .map(|i| {
            let gaps: f64 = (0..j).map(|k| (theta[i] - theta[k]).abs()).product();
            (eta[i] * gaps * theta[i].powi(n as i32)).abs()
        })
        .sum()
}

/// Ratio of consecutive deepest-row entries: an approximation of `theta_d`
/// whose error decays geometrically in `n`.
pub fn reconstruct_theta_d(table: &DifferenceTable, n: usize) -> Result<f64, EkError> {
    let row = table.last_row();
    assert!(n + 1 < row.len(), "index beyond table depth");
    let denom = row[n];
    if denom.abs() < DENOMINATOR_FLOOR {
        return Err(EkError::PreAsymptotic { value: denom });
    }
    Ok(row[n + 1] / denom)
}

/// The rational one-step predictor: from `K_n..K_{n+d}` (and the fixed
/// theta prefix) predicts the real location of `K_{n+d+1}` as
/// `[theta_1 K_{n+d} + theta_2 A_{n+d-1}^(1) + ... ] +
/// (A_{n+1}^(d-1))^2 / A_n^(d-1)`, every table value computed from the
/// window alone.
pub fn rational_predictor(window: &[i64], theta_prefix: &[f64]) -> Result<f64, EkError> {
    let d = theta_prefix.len() + 1;
    assert_eq!(window.len(), d + 1, "window must hold K_n..K_{{n+d}}");
    let table = DifferenceTable::from_sequence(
        window.iter().map(|k| *k as f64).collect(),
        theta_prefix,
    );
    let denom = table.last_row()[0];
    if denom.abs() < DENOMINATOR_FLOOR {
        return Err(EkError::PreAsymptotic { value: denom });
    }
    let bracket: f64 = theta_prefix
        .iter()
        .enumerate()
        .map(|(idx, t)| t * table.rows[idx].last().unwrap())
        .sum();
    let head = table.last_row()[1];
    Ok(bracket + head * head / denom)
}

/// Scan summary: the empirical branching constant, the calibrated
/// uniqueness threshold `rho_star` (largest rho such that a window with
/// all residuals below it predicted exactly), and exactness counts under
/// the requested `rho`.
#[derive(Debug, Clone)]
pub struct PredictorScan {
    pub branch_constant: i64,
    pub rho_star: f64,
    pub windows: usize,
    pub failures: usize,
    pub windows_below_rho: usize,
    pub exact_below_rho: usize,
    /// Largest `|K - round(R)|` among windows with residuals below rho.
    pub max_deviation_below_rho: i64,
}

/// Runs the predictor over every post-floor window of every `(theta, eta)`
/// pair and reports the constants.
pub fn predictor_consistency_scan(
    thetas: &[Vec<f64>],
    etas: &[Vec<f64>],
    n_max: u32,
    rho: f64,
) -> Result<PredictorScan, EkError> {
    let mut scan = PredictorScan {
        branch_constant: 0,
        rho_star: 0.5,
        windows: 0,
        failures: 0,
        windows_below_rho: 0,
        exact_below_rho: 0,
        max_deviation_below_rho: 0,
    };
    for theta in thetas {
        let d = theta.len();
        for eta in etas {
            assert_eq!(eta.len(), d);
            let trace = compute_trace(theta, eta, n_max)?;
            let len = trace.len();
            for n in 0..len.saturating_sub(d + 1) {
                let window = &trace.k[n..=n + d];
                let r = match rational_predictor(window, &theta[..d - 1]) {
                    Ok(r) => r,
                    Err(EkError::PreAsymptotic { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let actual = trace.k[n + d + 1];
                let deviation = (actual - r.round_ties_even() as i64).abs();
                let window_eps = trace.eps[n..=n + d + 1]
                    .iter()
                    .map(|e| e.abs())
                    .fold(0.0, f64::max);
                scan.windows += 1;
                if window_eps < rho {
                    scan.windows_below_rho += 1;
                    if deviation == 0 {
                        scan.exact_below_rho += 1;
                    }
                    scan.max_deviation_below_rho = scan.max_deviation_below_rho.max(deviation);
                }
                if deviation != 0 {
                    scan.failures += 1;
                    scan.rho_star = scan.rho_star.min(window_eps);
                }
                scan.branch_constant = scan.branch_constant.max(deviation);
            }
        }
    }
    Ok(scan)
}

/// A finite-horizon bad-set query: parameters in `boxx` with the given
/// fixed prefix, horizon `n_horizon`, density defect `delta`, and residual
/// threshold `rho`.
#[derive(Debug, Clone)]
pub struct BadSetQuery {
    pub boxx: ParameterBox,
    pub theta_prefix: Vec<f64>,
    pub n_horizon: u32,
    pub delta: f64,
    pub rho: f64,
}

impl BadSetQuery {
    pub fn new(
        boxx: ParameterBox,
        theta_prefix: Vec<f64>,
        n_horizon: u32,
        delta: f64,
        rho: f64,
    ) -> Result<Self, EkError> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(EkError::Invalid(format!(
                "delta must lie in (0, 1/2), got {delta}"
            )));
        }
        if !(rho > 0.0) {
            return Err(EkError::Invalid(format!("rho must be positive, got {rho}")));
        }
        if theta_prefix.len() + 1 != boxx.dim {
            return Err(EkError::Invalid(format!(
                "prefix of length {} with box dimension {}",
                theta_prefix.len(),
                boxx.dim
            )));
        }
        if boxx.dim > 2 {
            return Err(EkError::Invalid(
                "covering enumeration supports d <= 2".into(),
            ));
        }
        if n_horizon > 30 || n_horizon < 4 {
            return Err(EkError::Invalid(
                "horizon must lie in [4, 30] at desk scale".into(),
            ));
        }
        Ok(Self {
            boxx,
            theta_prefix,
            n_horizon,
            delta,
            rho,
        })
    }

    fn dim(&self) -> usize {
        self.boxx.dim
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Interval {
    pub center: f64,
    pub radius: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.center).abs() <= self.radius
    }
}

/// Cover of the finite-horizon bad set by intervals, with the empirical
/// constants the construction used.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CoverReport {
    pub intervals: Vec<Interval>,
    pub sequence_count: u64,
    /// `ln(sequence_count) / (delta ln(1/delta) N)`.
    pub growth_constant: f64,
    /// `exp(growth_constant * delta ln(1/delta) N)`.
    pub bound: f64,
    /// Max observed `|K_{n+d+1} - round(R)|` during calibration.
    pub branch_constant: i64,
    /// Max interval radius in units of `b1^{-N}`.
    pub radius_constant: f64,
    pub search_nodes: u64,
}

impl CoverReport {
    pub fn covers(&self, theta_d: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(theta_d))
    }
}

/// Direct membership test of the finite-horizon bad set over an `eta`
/// grid: is there a grid `eta` for which more than `(1-delta)N` of the
/// first `N` power sums sit within `rho` of an integer? Serves as the
/// sweep oracle that validates covers.
pub fn in_bad_set(theta: &[f64], q: &BadSetQuery, eta_grid: usize) -> bool {
    assert_eq!(theta.len(), q.dim());
    let n = q.n_horizon as usize;
    let need = ((1.0 - q.delta) * n as f64).floor() as usize + 1;
    for eta in eta_grid_points(q.dim(), q.boxx.b2, eta_grid) {
        let mut powers = theta.to_vec();
        let mut hits = 0;
        for _ in 0..n {
            let s: f64 = eta.iter().zip(&powers).map(|(e, p)| e * p).sum();
            if dist_to_int(s) < q.rho {
                hits += 1;
            }
            for (p, t) in powers.iter_mut().zip(theta) {
                *p *= t;
            }
        }
        if hits >= need {
            return true;
        }
    }
    false
}

/// Grid over the dominant-last normalization `1 <= eta_d <= b2`,
/// `|eta_k| <= eta_d`. Sign symmetry of the whole tuple is quotiented out.
pub fn eta_grid_points(dim: usize, b2: f64, grid: usize) -> Vec<Vec<f64>> {
    assert!(grid >= 2);
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (grid - 1) as f64;
    match dim {
        1 => (0..grid).map(|i| vec![lin(1.0, b2, i)]).collect(),
        2 => {
            let mut out = Vec::with_capacity(grid * grid);
            for i in 0..grid {
                let e2 = lin(1.0, b2, i);
                for j in 0..grid {
                    out.push(vec![lin(-e2, e2, j), e2]);
                }
            }
            out
        }
        _ => panic!("eta grids only built for d <= 2"),
    }
}

/// All subsets of `{1..=n}` of size at most `t`, as sorted index lists.
fn small_subsets(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..t {
        let mut next = Vec::new();
        for base in &frontier {
            let start = base.last().map_or(1, |l| l + 1);
            for i in start..=n {
                let mut s = base.clone();
                s.push(i);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

struct SearchContext<'a> {
    q: &'a BadSetQuery,
    last_index: usize,
    branch_width: i64,
    unique_width: i64,
    visited: &'a AtomicU64,
    over_budget: &'a AtomicBool,
}

impl SearchContext<'_> {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    /// Candidate range for the next entry given the partial sequence, from
    /// the geometric envelopes a realizable trace must obey.
    fn envelope(&self, seq: &[i64]) -> Option<(i64, i64)> {
        let b1 = self.q.boxx.b1;
        let b2 = self.q.boxx.b2;
        let c = seq.len();
        let d = self.dim();
        if c == 0 {
            let hi = (d as f64 * b2 + 0.5).floor() as i64;
            let lo = if d == 1 { 1 } else { -hi };
            return Some((lo, hi));
        }
        if d == 1 {
            // positive branch: eta in [1, b2], theta in [b1, b2]
            let prev = seq[c - 1] as f64;
            let lo = (b1 * (prev - 0.5) - 0.5).ceil() as i64;
            let hi = (b2 * (prev + 0.5) + 0.5).floor() as i64;
            Some((lo.max(1), hi))
        } else {
            // magnitude of the power sum itself
            let cap = 2.0 * b2.powi(c as i32 + 1) + 0.5;
            let cap = cap.min(MAGNITUDE_GUARD) as i64;
            Some((-cap, cap))
        }
    }

    /// Second-order prune for d = 2: the first differences
    /// `A^(1)_m = K_{m+1} - theta_1 K_m` follow a signed geometric envelope
    /// with ratio in `[b1, b2]`, up to the residual slack `(1+b2)/2`.
    fn passes_difference_envelope(&self, seq: &[i64], cand: i64) -> bool {
        if self.dim() != 2 || seq.len() < 2 {
            return true;
        }
        let t1 = self.q.theta_prefix[0];
        let b1 = self.q.boxx.b1;
        let b2 = self.q.boxx.b2;
        let slack = (1.0 + b2) * 0.5;
        let m = seq.len() - 2;
        let a_prev = seq[m + 1] as f64 - t1 * seq[m] as f64;
        let a_new = cand as f64 - t1 * seq[m + 1] as f64;
        let lo = a_prev - slack;
        let hi = a_prev + slack;
        if lo > 0.0 {
            a_new >= b1 * lo - slack && a_new <= b2 * hi + slack
        } else if hi < 0.0 {
            a_new >= b2 * lo - slack && a_new <= b1 * hi + slack
        } else {
            a_new.abs() <= b2 * hi.max(-lo) + slack
        }
        // realizable traces also keep |A^(1)| growing; enforced separately
    }

    /// Growth floor from the exact-row bound: for window base index m,
    /// `|A^(d-1)_m| >= c1^(d-1) b1^m - (1+b2)^(d-1)/2` once positive.
    fn growth_floor(&self, m: usize) -> f64 {
        let d = self.dim();
        let c1 = if d == 1 { 1.0 } else { self.q.boxx.c1 };
        let lower = c1.powi(d as i32 - 1) * self.q.boxx.b1.powi(m as i32)
            - 0.5 * (1.0 + self.q.boxx.b2).powi(d as i32 - 1);
        lower.max(DENOMINATOR_FLOOR)
    }

    fn search(&self, seq: &mut Vec<i64>, good: &[bool], found: &mut BTreeSet<Vec<i64>>) {
        if self.over_budget.load(Ordering::Relaxed) {
            return;
        }
        let c = seq.len();
        if c > self.last_index {
            found.insert(seq[1..].to_vec());
            return;
        }
        if self.visited.fetch_add(1, Ordering::Relaxed) >= ENUMERATION_BUDGET {
            self.over_budget.store(true, Ordering::Relaxed);
            return;
        }
        let d = self.dim();
        let Some((lo, hi)) = self.envelope(seq) else {
            return;
        };
        let push = |cand: i64, seq: &mut Vec<i64>, found: &mut BTreeSet<Vec<i64>>| {
            if cand < lo || cand > hi {
                return;
            }
            if !self.passes_difference_envelope(seq, cand) {
                return;
            }
            seq.push(cand);
            self.search(seq, good, found);
            seq.pop();
        };
        if c <= d {
            for cand in lo..=hi {
                push(cand, seq, found);
            }
            return;
        }
        let window = &seq[c - d - 1..];
        let base = c - d - 1;
        let denom = DifferenceTable::from_sequence(
            window.iter().map(|k| *k as f64).collect(),
            &self.q.theta_prefix,
        )
        .last_row()[0];
        if base >= 6 && denom.abs() < self.growth_floor(base) {
            // no realizable trace keeps the deep denominator this small
            return;
        }
        let prediction = if denom.abs() >= DENOMINATOR_FLOOR {
            rational_predictor(window, &self.q.theta_prefix).ok()
        } else {
            None
        };
        match prediction {
            Some(r) => {
                let center = r.round_ties_even() as i64;
                // window indices base..=c all inside J <=> unique continuation
                let unique = base >= 1 && (base..=c).all(|i| good[i]);
                let w = if unique {
                    self.unique_width
                } else {
                    self.branch_width
                };
                for cand in center - w..=center + w {
                    push(cand, seq, found);
                }
            }
            None => {
                for cand in lo..=hi {
                    push(cand, seq, found);
                }
            }
        }
    }
}

/// Enumerates the admissible nearest-integer sequences at horizon `N` and
/// converts each surviving sequence into the interval of `theta_d` values
/// consistent with it. The enumeration branches freely where prediction
/// windows step outside the good set `J` and follows the unique
/// continuation inside it; constants come from a calibration scan plus a
/// safety margin of 2.
pub fn enumerate_cover(q: &BadSetQuery) -> Result<CoverReport, EkError> {
    let d = q.dim();
    let n = q.n_horizon as usize;
    let b1 = q.boxx.b1;
    let b2 = q.boxx.b2;

    // calibration scan over a coarse grid of the box
    let mut thetas = Vec::new();
    for i in 0..21 {
        let td = b1 + (b2 - b1) * i as f64 / 20.0;
        let mut full = q.theta_prefix.clone();
        full.push(td);
        if q.boxx.contains(&full) {
            thetas.push(full);
        }
    }
    if thetas.is_empty() {
        return Err(EkError::Invalid(
            "no admissible theta_d in the box for the given prefix".into(),
        ));
    }
    let etas = eta_grid_points(d, b2, if d == 1 { 41 } else { 15 });
    let scan = predictor_consistency_scan(&thetas, &etas, q.n_horizon + d as u32 + 1, q.rho)?;
    let unique_width = scan.max_deviation_below_rho;
    let branch_width = scan.branch_constant + 2;

    let t_max = (q.delta * n as f64).floor() as usize;
    let subsets = small_subsets(n, t_max);

    let visited = AtomicU64::new(0);
    let over_budget = AtomicBool::new(false);
    let ctx = SearchContext {
        q,
        last_index: n,
        branch_width,
        unique_width,
        visited: &visited,
        over_budget: &over_budget,
    };

    let per_subset: Vec<BTreeSet<Vec<i64>>> = subsets
        .par_iter()
        .map(|excluded| {
            let mut good = vec![true; n + 1];
            good[0] = false;
            for i in excluded {
                good[*i] = false;
            }
            let mut found = BTreeSet::new();
            ctx.search(&mut Vec::new(), &good, &mut found);
            found
        })
        .collect();

    let mut sequences: BTreeSet<Vec<i64>> = BTreeSet::new();
    for s in per_subset {
        sequences.extend(s);
    }

    if over_budget.load(Ordering::Relaxed) {
        return Err(EkError::BudgetExceeded {
            visited: visited.load(Ordering::Relaxed),
            partial_count: sequences.len() as u64,
        });
    }

    // convert sequences to intervals of consistent theta_d
    let scale = b1.powi(-(n as i32));
    let mut intervals = Vec::new();
    let mut radius_constant = 0.0_f64;
    for seq in &sequences {
        let table = DifferenceTable::from_sequence(
            seq.iter().map(|k| *k as f64).collect(),
            &q.theta_prefix,
        );
        let row = table.last_row();
        let denom = row[row.len() - 2];
        if denom.abs() < DENOMINATOR_FLOOR {
            continue;
        }
        let center = row[row.len() - 1] / denom;
        let radius = (2.0 * (1.0 + b2).powi(d as i32) / denom.abs()).max(scale);
        if center + radius < b1 || center - radius > b2 {
            continue;
        }
        radius_constant = radius_constant.max(radius / scale);
        intervals.push(Interval { center, radius });
    }
    intervals.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
    intervals.dedup();

    let count = sequences.len().max(1) as u64;
    let growth_constant =
        (count as f64).ln() / (q.delta * (1.0 / q.delta).ln() * n as f64);
    let bound = (growth_constant * q.delta * (1.0 / q.delta).ln() * n as f64).exp();

    Ok(CoverReport {
        intervals,
        sequence_count: sequences.len() as u64,
        growth_constant,
        bound,
        branch_constant: scan.branch_constant,
        radius_constant,
        search_nodes: visited.load(Ordering::Relaxed),
    })
}
