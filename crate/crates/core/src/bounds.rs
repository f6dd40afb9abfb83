//! DoF outer bounds under a per-user perfect-CSIT fraction `lambda`.
//!
//! The outer bound is the polytope cut out by the `K` cyclic inequalities
//!
//! ```text
//! c d_k + sum_{j != k} d_j <= c + (min(M,K) - 1) * lambda,   k = 1..K
//! ```
//!
//! with `c = M`, or with `c = min(M,K)` in tightened mode (tightened mode also
//! replaces the leading `M` on the right-hand side). Nonnegativity is always
//! added, and the unit box `d_k <= 1` optionally.
//!
//! Weighted maxima are exact LP optima computed by vertex enumeration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feasibility slack for vertex candidates.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Pivot-ratio estimate above which a constraint basis is skipped.
pub const BASIS_COND_LIMIT: f64 = 1e10;
/// Slack used when deciding whether a bound reaches `min(M,K)`.
pub const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Inequality {
    pub fn lhs(&self, d: &[f64]) -> f64 {
        self.a.iter().zip(d).map(|(a, x)| a * x).sum()
    }
}

/// Options for [`build_polytope`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub tightened: bool,
    #[serde(rename = "box")]
    pub boxed: bool,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            tightened: false,
            boxed: true,
        }
    }
}

/// Linear inequalities `a . d <= b` over `(d_1, ..., d_K)`.
///
/// Serializes to `{K, inequalities: [{a, b}], box, tightened}` plus the
/// generating `M` and `lambda` when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofPolytope {
    #[serde(rename = "K")]
    pub users: usize,
    pub inequalities: Vec<Inequality>,
    #[serde(rename = "box")]
    pub boxed: bool,
    pub tightened: bool,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub antennas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl DofPolytope {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("polytope serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        if p.users == 0 {
            return Err(Error::Config("polytope needs K >= 1".into()));
        }
        if p.inequalities.iter().any(|q| q.a.len() != p.users) {
            return Err(Error::Config(format!(
                "every inequality needs {} coefficients",
                p.users
            )));
        }
        Ok(p)
    }

    /// `a . d <= b + tol` for every inequality.
    pub fn contains(&self, d: &[f64], tol: f64) -> bool {
        self.inequalities.iter().all(|q| q.lhs(d) <= q.b + tol)
    }

    /// `min(M,K)` when the generating antenna count is known.
    pub fn sum_dof_cap(&self) -> Option<f64> {
        self.antennas.map(|m| m.min(self.users) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub raw_max_sum: f64,
    /// `min(raw_max_sum, min(M,K))`; equal to the raw value when `M` is
    /// unknown.
    pub capped_max_sum: f64,
    pub argmax_point: Vec<f64>,
    /// Indices of inequalities tight at the argmax.
    pub tight_constraints: Vec<usize>,
}

/// Builds the outer-bound polytope.
///
/// Inequalities are ordered: `K` cyclic bounds, then `d_k >= 0` (stored as
/// `-d_k <= 0`), then `d_k <= 1` if boxed.
pub fn build_polytope(
    antennas: usize,
    users: usize,
    lambda: f64,
    options: BoundOptions,
) -> Result<DofPolytope> {
    if antennas == 0 || users == 0 {
        return Err(Error::Config("M and K must be positive".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("lambda {lambda} outside [0, 1]")));
    }
    let min_mk = antennas.min(users);
    let lead = if options.tightened { min_mk } else { antennas } as f64;
    let rhs = lead + (min_mk as f64 - 1.0) * lambda;

    let mut inequalities = Vec::with_capacity(3 * users);
    for k in 0..users {
        let mut a = vec![1.0; users];
        a[k] = lead;
        inequalities.push(Inequality { a, b: rhs });
    }
    for k in 0..users {
        let mut a = vec![0.0; users];
        a[k] = -1.0;
        inequalities.push(Inequality { a, b: 0.0 });
    }
    if options.boxed {
        for k in 0..users {
            let mut a = vec![0.0; users];
            a[k] = 1.0;
            inequalities.push(Inequality { a, b: 1.0 });
        }
    }
    Ok(DofPolytope {
        users,
        inequalities,
        boxed: options.boxed,
        tightened: options.tightened,
        antennas: Some(antennas),
        lambda: Some(lambda),
    })
}

/// Feasible vertex `(value, point)`.
type Candidate = (f64, Vec<f64>);

/// Maximizes `weights . d` over the polytope by visiting every basis of `K`
/// inequalities, solving it with equality, and keeping feasible solutions.
///
/// Ties (within `1e-12`) go to the lexicographically smallest point.
pub fn max_weighted(poly: &DofPolytope, weights: &[f64]) -> Result<BoundReport> {
    let k = poly.users;
    if weights.len() != k {
        return Err(Error::InvalidWeights(format!(
            "{} weights for K = {k}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidWeights(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidWeights("weights are all zero".into()));
    }
    let n = poly.inequalities.len();
    if n < k {
        return Err(Error::Infeasible);
    }

    // Split the enumeration on the first basis index; each branch is reduced
    // serially and branches are merged in index order.
    let branches: Vec<Option<Candidate>> = (0..=n - k)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<Candidate> = None;
            let mut basis: Vec<usize> = (first..first + k).collect();
            loop {
                if let Some(d) = solve_basis(poly, &basis) {
                    if poly.contains(&d, FEASIBILITY_TOL) {
                        let value = dot(weights, &d);
                        merge(&mut best, (value, d));
                    }
                }
                if !next_combination(&mut basis[1..], n) {
                    break;
                }
            }
            best
        })
        .collect();

    let mut best: Option<Candidate> = None;
    for c in branches.into_iter().flatten() {
        merge(&mut best, c);
    }
    let (raw, point) = best.ok_or(Error::Infeasible)?;
    let tight_constraints = poly
        .inequalities
        .iter()
        .enumerate()
        .filter(|(_, q)| (q.lhs(&point) - q.b).abs() <= FEASIBILITY_TOL)
        .map(|(i, _)| i)
        .collect();
    let capped = poly.sum_dof_cap().map_or(raw, |cap| raw.min(cap));
    Ok(BoundReport {
        raw_max_sum: raw,
        capped_max_sum: capped,
        argmax_point: point,
        tight_constraints,
    })
}

fn merge(best: &mut Option<Candidate>, cand: Candidate) {
    match best {
        None => *best = Some(cand),
        Some((value, point)) => {
            let better = cand.0 > *value + 1e-12;
            let tie_first = (cand.0 - *value).abs() <= 1e-12 && lex_less(&cand.1, point);
            if better || tie_first {
                *best = Some(cand);
            }
        }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-12 {
            return x < y;
        }
    }
    false
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Advances `tail` (strictly increasing indices in `(head, n)`) to the next
/// combination in lexicographic order. Returns `false` when exhausted.
fn next_combination(tail: &mut [usize], n: usize) -> bool {
    let r = tail.len();
    if r == 0 {
        return false;
    }
    let mut i = r;
    while i > 0 {
        i -= 1;
        if tail[i] < n - r + i {
            tail[i] += 1;
            for j in i + 1..r {
                tail[j] = tail[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Solves the selected inequalities with equality by LU with partial
/// pivoting. `None` when the basis is singular or its pivot ratio exceeds
/// [`BASIS_COND_LIMIT`].
fn solve_basis(poly: &DofPolytope, basis: &[usize]) -> Option<Vec<f64>> {
    let k = basis.len();
    let mut a: Vec<f64> = Vec::with_capacity(k * k);
    let mut b: Vec<f64> = Vec::with_capacity(k);
    for &i in basis {
        a.extend_from_slice(&poly.inequalities[i].a);
        b.push(poly.inequalities[i].b);
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut min_pivot = f64::INFINITY;
    for col in 0..k {
        let (piv, pmag) = (col..k)
            .map(|r| (r, a[r * k + col].abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmag == 0.0 {
            return None;
        }
        min_pivot = min_pivot.min(pmag);
        if piv != col {
            for j in 0..k {
                a.swap(piv * k + j, col * k + j);
            }
            b.swap(piv, col);
        }
        for r in col + 1..k {
            let f = a[r * k + col] / a[col * k + col];
            if f != 0.0 {
                for j in col..k {
                    a[r * k + j] -= f * a[col * k + j];
                }
                b[r] -= f * b[col];
            }
        }
    }
    if scale / min_pivot > BASIS_COND_LIMIT {
        return None;
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|j| a[r * k + j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r * k + r];
    }
    Some(x)
}

/// Right-hand side of the summed cyclic bound,
/// `K (M + (min(M,K) - 1) lambda) / (M + K - 1)`.
pub fn summed_bound(antennas: usize, users: usize, lambda: f64) -> f64 {
    let (m, k) = (antennas as f64, users as f64);
    let min_mk = antennas.min(users) as f64;
    k * (m + (min_mk - 1.0) * lambda) / (m + k - 1.0)
}

/// Minimum per-user perfect-CSIT fraction for sum DoF `min(M,K)`:
/// zero when `min(M,K) = 1`, otherwise `min(M,K) / K`.
pub fn lambda_star(antennas: usize, users: usize) -> f64 {
    let min_mk = antennas.min(users);
    if min_mk <= 1 {
        0.0
    } else {
        min_mk as f64 / users as f64
    }
}

/// Smallest `lambda` at which the summed bound reaches `min(M,K)`, found by
/// bisection on `[0, 1]` down to width `tol`.
pub fn lambda_star_via_lp(antennas: usize, users: usize, tol: f64) -> f64 {
    assert!(tol > 0.0, "bisection tolerance must be positive");
    let target = antennas.min(users) as f64 - THRESHOLD_SLACK;
    let reaches = |lambda: f64| summed_bound(antennas, users, lambda) >= target;
    if reaches(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(k: usize) -> Vec<f64> {
        vec![1.0; k]
    }

    #[test]
    fn lemma_inequalities_for_two_antennas_three_users() {
        let p = build_polytope(2, 3, 2.0 / 3.0, BoundOptions::default()).unwrap();
        assert_eq!(p.inequalities.len(), 9);
        assert_eq!(p.inequalities[0].a, vec![2.0, 1.0, 1.0]);
        assert_eq!(p.inequalities[1].a, vec![1.0, 2.0, 1.0]);
        assert_eq!(p.inequalities[2].a, vec![1.0, 1.0, 2.0]);
        for q in &p.inequalities[..3] {
            assert!((q.b - 8.0 / 3.0).abs() < 1e-15);
        }
        let t = build_polytope(
            2,
            3,
            2.0 / 3.0,
            BoundOptions {
                tightened: true,
                boxed: true,
            },
        )
        .unwrap();
        assert_eq!(t.inequalities, p.inequalities);
        assert!(p.contains(&[0.0; 3], 0.0));
    }

    #[test]
    fn tightened_differs_when_antennas_exceed_users() {
        let loose = build_polytope(4, 2, 1.0, BoundOptions::default()).unwrap();
        let tight = build_polytope(
            4,
            2,
            1.0,
            BoundOptions {
                tightened: true,
                boxed: true,
            },
        )
        .unwrap();
        assert_eq!(
            loose.inequalities[0],
            Inequality {
                a: vec![4.0, 1.0],
                b: 5.0
            }
        );
        assert_eq!(
            tight.inequalities[0],
            Inequality {
                a: vec![2.0, 1.0],
                b: 3.0
            }
        );
    }

    #[test]
    fn unboxed_has_only_cyclic_and_sign_constraints() {
        let p = build_polytope(
            3,
            4,
            0.5,
            BoundOptions {
                tightened: false,
                boxed: false,
            },
        )
        .unwrap();
        assert_eq!(p.inequalities.len(), 8);
        assert!(build_polytope(3, 4, 1.5, BoundOptions::default()).is_err());
    }

    #[test]
    fn weighted_max_examples() {
        let p = build_polytope(2, 3, 2.0 / 3.0, BoundOptions::default()).unwrap();
        let r = max_weighted(&p, &ones(3)).unwrap();
        assert!((r.raw_max_sum - 2.0).abs() < 1e-12);
        for d in &r.argmax_point {
            assert!((d - 2.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(r.tight_constraints, vec![0, 1, 2]);

        let p = build_polytope(2, 3, 0.0, BoundOptions::default()).unwrap();
        let r = max_weighted(&p, &ones(3)).unwrap();
        assert!((r.raw_max_sum - 1.5).abs() < 1e-12);
        assert!(r.argmax_point.iter().all(|d| (d - 0.5).abs() < 1e-12));

        let p = build_polytope(2, 3, 1.0, BoundOptions::default()).unwrap();
        let r = max_weighted(&p, &ones(3)).unwrap();
        assert!((r.raw_max_sum - 2.25).abs() < 1e-12);
        assert_eq!(r.capped_max_sum, 2.0);
        assert!(r.argmax_point.iter().all(|d| (d - 0.75).abs() < 1e-12));
    }

    #[test]
    fn single_user_weight_hits_box() {
        // d_1 alone: min(rhs/M, 1) = min((2 + 2/3)/2, 1) = 1
        let p = build_polytope(2, 3, 2.0 / 3.0, BoundOptions::default()).unwrap();
        let r = max_weighted(&p, &[1.0, 0.0, 0.0]).unwrap();
        assert!((r.raw_max_sum - 1.0).abs() < 1e-12);
        // without the box: 4/3
        let p = build_polytope(
            2,
            3,
            2.0 / 3.0,
            BoundOptions {
                tightened: false,
                boxed: false,
            },
        )
        .unwrap();
        let r = max_weighted(&p, &[1.0, 0.0, 0.0]).unwrap();
        assert!((r.raw_max_sum - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bad_weights() {
        let p = build_polytope(2, 2, 1.0, BoundOptions::default()).unwrap();
        assert!(matches!(
            max_weighted(&p, &[0.0, 0.0]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            max_weighted(&p, &[1.0]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            max_weighted(&p, &[-1.0, 1.0]),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn infeasible_file_polytope() {
        let p = DofPolytope::from_json(
            r#"{"K": 1, "inequalities": [{"a": [1.0], "b": -1.0}, {"a": [-1.0], "b": 0.0}], "box": false, "tightened": false}"#,
        )
        .unwrap();
        assert_eq!(max_weighted(&p, &[1.0]), Err(Error::Infeasible));
    }

    #[test]
    fn json_schema() {
        let p = build_polytope(2, 2, 1.0, BoundOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["K"], 2);
        assert_eq!(v["box"], true);
        assert_eq!(v["tightened"], false);
        assert_eq!(v["inequalities"][0]["a"], serde_json::json!([2.0, 1.0]));
        assert_eq!(v["inequalities"][0]["b"], 3.0);
        assert_eq!(DofPolytope::from_json(&p.to_json()).unwrap(), p);
        assert!(DofPolytope::from_json(r#"{"K": 2, "inequalities": [{"a": [1.0], "b": 1.0}], "box": false, "tightened": false}"#).is_err());
    }

    #[test]
    fn summed_bound_values() {
        assert_eq!(summed_bound(2, 3, 2.0 / 3.0), 2.0);
        assert_eq!(summed_bound(2, 2, 1.0), 2.0);
        assert!((summed_bound(3, 3, 0.5) - 2.4).abs() < 1e-15);
    }

    #[test]
    fn lambda_star_values() {
        assert_eq!(lambda_star(2, 3), 2.0 / 3.0);
        assert_eq!(lambda_star(1, 5), 0.0);
        assert_eq!(lambda_star(3, 3), 1.0);
        assert_eq!(lambda_star(4, 2), 1.0);
        assert!((lambda_star_via_lp(2, 3, 1e-9) - 2.0 / 3.0).abs() <= 1e-9);
        assert!((lambda_star_via_lp(4, 2, 1e-9) - 1.0).abs() <= 1e-9);
        assert_eq!(lambda_star_via_lp(1, 4, 1e-9), 0.0);
    }

    #[test]
    fn combinations_are_exhaustive() {
        // C(6, 3) = 20 bases, 4 first indices
        let n = 6;
        let mut count = 0;
        for first in 0..=n - 3 {
            let mut basis: Vec<usize> = (first..first + 3).collect();
            loop {
                count += 1;
                assert!(basis.windows(2).all(|w| w[0] < w[1]));
                if !next_combination(&mut basis[1..], n) {
                    break;
                }
            }
        }
        assert_eq!(count, 20);
    }
}
