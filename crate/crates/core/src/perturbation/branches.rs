use faer::c64;
use rayon::prelude::*;
use serde::Serialize;

use super::PerturbationError;
use crate::discretize::{self, Discretization, DiscretizedOperator};
use crate::eigensolve::{self, Reality};
use crate::linalg::{self, ShiftedSolver};
use crate::potentials::OperatorFamily;

/// Roundoff floor on eigenvalue errors, in units of `ε_mach·‖H‖_F`.
pub const ROUNDOFF_FACTOR: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct TrackOptions {
    /// Coarser resolution used for a per-node convergence-gap error estimate.
    pub coarse: Option<Discretization>,
    /// Maximum number of step halvings inserted below any original grid step.
    pub max_refine: usize,
    /// Overrides the pairing tolerance (otherwise `max(1e-8·scale, 10·error)`).
    pub pairing_tol: Option<f64>,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions { coarse: None, max_refine: 6, pairing_tol: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BranchFlags {
    pub collision: bool,
    pub left_window: bool,
    pub undecided: bool,
}

impl BranchFlags {
    fn merge(&mut self, o: BranchFlags) {
        self.collision |= o.collision;
        self.left_window |= o.left_window;
        self.undecided |= o.undecided;
    }

    /// `collision|left_window|undecided` subset, or empty.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.collision {
            parts.push("collision");
        }
        if self.left_window {
            parts.push("left_window");
        }
        if self.undecided {
            parts.push("undecided");
        }
        parts.join("|")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Branch {
    pub id: usize,
    /// Nodes this branch was tracked through (a prefix of the report grid).
    pub epsilon_grid: Vec<f64>,
    pub values: Vec<c64>,
    /// `‖Hv − λv‖` for a unit vector from inverse iteration at the value.
    pub residuals: Vec<f64>,
    pub verdicts: Vec<Reality>,
    /// `1 − d_best/d_second` of the matching step into each node (1 at the start).
    pub match_confidence: Vec<f64>,
    pub node_flags: Vec<BranchFlags>,
    pub flags: BranchFlags,
    /// Largest grid ε up to which every verdict is real.
    pub reality_window: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowEvent {
    pub epsilon: f64,
    pub value: c64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackReport {
    /// Input grid plus any refinement nodes.
    pub epsilon_grid: Vec<f64>,
    pub branches: Vec<Branch>,
    /// Untracked eigenvalues found among the `k` lowest at a node.
    pub entrants: Vec<WindowEvent>,
    /// Combined error bound per node: the larger of the roundoff floor and the
    /// cross-resolution gap of the `k` lowest eigenvalues.
    pub error_bounds: Vec<f64>,
    /// Largest distance from a conjugated branch value to the node spectrum.
    pub closure_defects: Vec<f64>,
    pub pairing_tolerances: Vec<f64>,
}

struct Node {
    eps: f64,
    depth: usize,
    values: Vec<c64>,
    residuals: Vec<f64>,
    error: f64,
}

fn solve_node(
    family: &OperatorFamily,
    disc: Option<&Discretization>,
    coarse: Option<&Discretization>,
    eps: f64,
    depth: usize,
    k: usize,
) -> Result<Node, PerturbationError> {
    let op = discretize::build(family, eps, disc)?;
    let values = eigensolve::eigenvalues(&op)?;
    let roundoff = ROUNDOFF_FACTOR * f64::EPSILON * op.matrix.norm_l2();
    let mut error = roundoff;
    if let (Some(c), Some(_)) = (coarse, disc) {
        let coarse_op = discretize::build(family, eps, Some(c))?;
        let cv = eigensolve::eigenvalues(&coarse_op)?;
        let gap = discretize::pair_lowest(&values, &cv, k, op.clone());
        error = error.max(gap.error_scale);
    }
    let m = values.len().min(2 * k + 4);
    let residuals = values.iter().take(m).map(|&lam| inverse_iteration_residual(&op, lam)).collect();
    Ok(Node { eps, depth, values, residuals, error })
}

/// Residual of the unit vector produced by two inverse-iteration steps at `λ`.
pub(crate) fn inverse_iteration_vector(op: &DiscretizedOperator, lambda: c64) -> (Vec<c64>, f64) {
    let h = op.matrix.as_ref();
    let n = h.nrows();
    let scale = h.norm_l2().max(1.0);
    let shift = lambda + c64::new(1e-10 * scale, 1e-10 * scale);
    let solver = ShiftedSolver::new(h, op.tridiagonal.as_ref(), shift);
    let mut v: Vec<c64> = (0..n).map(|i| c64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05)).collect();
    linalg::normalize(&mut v);
    for _ in 0..3 {
        let mut next = solver.solve_vec(&v);
        if !next.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || linalg::normalize(&mut next) == 0.0 {
            break;
        }
        v = next;
    }
    let hv = match &op.tridiagonal {
        Some(t) => t.matvec(&v),
        None => linalg::matvec(h, &v),
    };
    let r = hv.iter().zip(&v).map(|(a, b)| (a - lambda * b).norm_sqr()).sum::<f64>().sqrt();
    (v, r)
}

fn inverse_iteration_residual(op: &DiscretizedOperator, lambda: c64) -> f64 {
    inverse_iteration_vector(op, lambda).1
}

struct StepOutcome {
    assign: Vec<Option<usize>>,
    confidence: Vec<f64>,
    /// Ambiguity with an untracked eigenvalue.
    ambiguous_outside: Vec<bool>,
    /// Ambiguity between two tracked branches.
    ambiguous_tracked: Vec<bool>,
}

fn match_step(predictions: &[Option<c64>], previous: &[Option<c64>], cand: &[c64], tol: f64) -> StepOutcome {
    let nb = predictions.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    let mut best2 = vec![(f64::INFINITY, f64::INFINITY, usize::MAX, usize::MAX); nb];
    for (b, p) in predictions.iter().enumerate() {
        let Some(p) = p else { continue };
        for (c, &z) in cand.iter().enumerate() {
            let d = (z - p).norm();
            let e = &mut best2[b];
            if d < e.0 {
                *e = (d, e.0, c, e.2);
            } else if d < e.1 {
                e.1 = d;
                e.3 = c;
            }
            pairs.push((d, b, c));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assign = vec![None; nb];
    let mut taken = vec![false; cand.len()];
    for (_, b, c) in pairs {
        if assign[b].is_none() && !taken[c] {
            assign[b] = Some(c);
            taken[c] = true;
        }
    }
    let mut confidence = vec![0.0; nb];
    let mut ambiguous_outside = vec![false; nb];
    let mut ambiguous_tracked = vec![false; nb];
    for b in 0..nb {
        let Some(c) = assign[b] else { continue };
        let (d1, d2, c1, c2) = best2[b];
        confidence[b] = if d2.is_finite() && d2 > 0.0 { 1.0 - d1 / d2 } else if d2.is_infinite() { 1.0 } else { 0.0 };
        let d_assigned = (cand[c] - predictions[b].unwrap()).norm();
        let ambiguous = d2 <= 2.0 * d1 + tol || d_assigned > d1 + tol;
        if !ambiguous {
            continue;
        }
        // The contender is whichever of the two nearest candidates this branch did not get.
        let contender = if c == c1 { c2 } else { c1 };
        let contender_tracked = (0..nb).any(|o| o != b && assign[o] == Some(contender));
        let prev_close = (0..nb).any(|o| {
            o != b
                && match (previous[o], previous[b]) {
                    (Some(a), Some(z)) => (a - z).norm() <= tol,
                    _ => false,
                }
        });
        let coincide = contender != usize::MAX && (cand[contender] - cand[c]).norm() <= tol;
        if contender_tracked || prev_close || coincide {
            ambiguous_tracked[b] = true;
        } else {
            ambiguous_outside[b] = true;
        }
    }
    StepOutcome { assign, confidence, ambiguous_outside, ambiguous_tracked }
}

fn validate_grid(grid: &[f64]) -> Result<(), PerturbationError> {
    if grid.len() < 2 {
        return Err(PerturbationError::BadGrid("at least two ε nodes are required".into()));
    }
    if grid[0] != 0.0 {
        return Err(PerturbationError::BadGrid("the ε grid must start at 0".into()));
    }
    if grid.iter().any(|e| !e.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PerturbationError::BadGrid("the ε grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Uniform grid `0, max/steps, …, max`.
pub fn uniform_grid(max: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| max * i as f64 / steps as f64).collect()
}

/// Follows the `k` lowest eigenvalues of `H(0)` along the ε grid.
///
/// Matching extrapolates linearly from the previous two nodes and assigns
/// greedily by distance. Steps whose best and second-best candidates are not
/// separated are halved up to `max_refine` times. Remaining ambiguity between
/// two tracked branches is a collision, flagged on both. Ambiguity with an
/// untracked eigenvalue truncates the branch with the `undecided` flag.
pub fn track_branches(
    family: &OperatorFamily,
    epsilon_grid: &[f64],
    disc: Option<&Discretization>,
    k: usize,
    opts: &TrackOptions,
) -> Result<TrackReport, PerturbationError> {
    validate_grid(epsilon_grid)?;
    if k == 0 {
        return Err(PerturbationError::BadParameter("k must be positive".into()));
    }
    let coarse = opts.coarse.as_ref();
    let mut nodes: Vec<Node> = epsilon_grid
        .par_iter()
        .map(|&e| solve_node(family, disc, coarse, e, 0, k))
        .collect::<Result<_, _>>()?;
    let k = k.min(nodes[0].values.len());

    let tol_at = |node: &Node| -> f64 {
        let scale = node.values.iter().take(k).map(|z| z.norm()).fold(1.0, f64::max);
        opts.pairing_tol.unwrap_or((1e-8 * scale).max(10.0 * node.error))
    };

    // current[b]: index into nodes[j].values, per branch; None once truncated.
    let mut history: Vec<Vec<Option<usize>>> = vec![(0..k).map(Some).collect()];
    let mut confidences: Vec<Vec<f64>> = vec![vec![1.0; k]];
    let mut step_flags: Vec<Vec<BranchFlags>> = vec![vec![BranchFlags::default(); k]];
    let mut j = 0;
    while j + 1 < nodes.len() {
        let value_at = |node: usize, idx: Option<usize>| idx.map(|i| nodes[node].values[i]);
        let prev: Vec<Option<c64>> = history[j].iter().map(|&i| value_at(j, i)).collect();
        let predictions: Vec<Option<c64>> = (0..k)
            .map(|b| {
                let p1 = prev[b]?;
                if j == 0 {
                    return Some(p1);
                }
                match value_at(j - 1, history[j - 1][b]) {
                    Some(p0) => {
                        let t = (nodes[j + 1].eps - nodes[j].eps) / (nodes[j].eps - nodes[j - 1].eps);
                        Some(p1 + (p1 - p0) * t)
                    }
                    None => Some(p1),
                }
            })
            .collect();
        let tol = tol_at(&nodes[j + 1]);
        let out = match_step(&predictions, &prev, &nodes[j + 1].values, tol);
        let needs_refine = out.ambiguous_outside.iter().any(|&a| a)
            || (0..k).any(|b| out.ambiguous_tracked[b] && !prev_collision(&prev, b, tol_at(&nodes[j])));
        let depth = nodes[j].depth.max(nodes[j + 1].depth) + 1;
        if needs_refine && depth <= opts.max_refine {
            let mid = 0.5 * (nodes[j].eps + nodes[j + 1].eps);
            let node = solve_node(family, disc, coarse, mid, depth, k)?;
            nodes.insert(j + 1, node);
            continue;
        }
        let mut flags = vec![BranchFlags::default(); k];
        let mut next = out.assign.clone();
        for b in 0..k {
            if prev[b].is_none() {
                next[b] = None;
                continue;
            }
            if out.ambiguous_tracked[b] {
                flags[b].collision = true;
            }
            if out.ambiguous_outside[b] {
                flags[b].undecided = true;
                next[b] = None;
            }
        }
        history.push(next);
        confidences.push(out.confidence);
        step_flags.push(flags);
        j += 1;
    }

    let grid: Vec<f64> = nodes.iter().map(|n| n.eps).collect();
    let tolerances: Vec<f64> = nodes.iter().map(|n| tol_at(n)).collect();
    let mut entrants = Vec::new();
    let mut closure = Vec::with_capacity(nodes.len());
    let mut verdicts_at: Vec<Vec<Reality>> = Vec::with_capacity(nodes.len());
    for (j, node) in nodes.iter().enumerate() {
        let assigned: Vec<usize> = history[j].iter().flatten().copied().collect();
        let tracked_alive = assigned.len();
        for (i, &z) in node.values.iter().enumerate().take(tracked_alive) {
            if !assigned.contains(&i) {
                entrants.push(WindowEvent { epsilon: node.eps, value: z });
            }
        }
        for b in 0..k {
            if let Some(i) = history[j][b] {
                if i >= tracked_alive {
                    step_flags[j][b].left_window = true;
                }
            }
        }
        // Two branches sitting on one another at this node.
        for a in 0..k {
            for b in a + 1..k {
                if let (Some(ia), Some(ib)) = (history[j][a], history[j][b]) {
                    if (node.values[ia] - node.values[ib]).norm() <= tolerances[j] {
                        step_flags[j][a].collision = true;
                        step_flags[j][b].collision = true;
                    }
                }
            }
        }
        let report = eigensolve::reality_verdict_values(&node.values, node.error);
        verdicts_at.push(report.verdicts);
        let defect = assigned
            .iter()
            .map(|&i| {
                let t = node.values[i].conj();
                node.values.iter().map(|z| (z - t).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        closure.push(defect);
    }

    let branches = (0..k)
        .map(|b| {
            let mut br = Branch {
                id: b,
                epsilon_grid: Vec::new(),
                values: Vec::new(),
                residuals: Vec::new(),
                verdicts: Vec::new(),
                match_confidence: Vec::new(),
                node_flags: Vec::new(),
                flags: BranchFlags::default(),
                reality_window: None,
            };
            let mut real_run = true;
            for (j, node) in nodes.iter().enumerate() {
                let Some(i) = history[j][b] else {
                    if j > 0 {
                        br.flags.merge(step_flags[j][b]);
                    }
                    break;
                };
                let verdict = verdicts_at[j][i];
                br.epsilon_grid.push(node.eps);
                br.values.push(node.values[i]);
                br.residuals.push(node.residuals.get(i).copied().unwrap_or(f64::NAN));
                br.verdicts.push(verdict);
                br.match_confidence.push(confidences[j][b]);
                br.node_flags.push(step_flags[j][b]);
                br.flags.merge(step_flags[j][b]);
                real_run &= verdict == Reality::Real;
                if real_run {
                    br.reality_window = Some(node.eps);
                }
            }
            br
        })
        .collect();

    Ok(TrackReport {
        epsilon_grid: grid,
        branches,
        entrants,
        error_bounds: nodes.iter().map(|n| n.error).collect(),
        closure_defects: closure,
        pairing_tolerances: tolerances,
    })
}

fn prev_collision(prev: &[Option<c64>], b: usize, tol: f64) -> bool {
    let Some(z) = prev[b] else { return false };
    prev.iter().enumerate().any(|(o, p)| o != b && p.is_some_and(|p| (p - z).norm() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::BasisSpec;
    use crate::potentials::catalog;

    #[test]
    fn jordan_branches_follow_closed_form() {
        let fam = catalog("jordan2x2").unwrap();
        let grid = uniform_grid(1.0, 100);
        let rep = track_branches(&fam, &grid, None, 2, &TrackOptions::default()).unwrap();
        assert_eq!(rep.branches.len(), 2);
        for br in &rep.branches {
            assert_eq!(br.values.len(), rep.epsilon_grid.len());
            for (e, v) in br.epsilon_grid.iter().zip(&br.values) {
                let r = (e * (e + 2.0)).sqrt();
                assert!((v.re).abs() < 1e-10 && (v.im.abs() - r).abs() < 1e-10, "ε={e} {v}");
            }
        }
        assert!(rep.branches[0].flags.collision);
        // One branch per half-plane after the split.
        let last = rep.epsilon_grid.len() - 1;
        assert!(rep.branches[0].values[last].im * rep.branches[1].values[last].im < 0.0);
        assert!(rep.closure_defects.iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn gap_branches_turn_complex_after_one() {
        let fam = catalog("gap2x2").unwrap();
        let grid = uniform_grid(2.0, 200);
        let rep = track_branches(&fam, &grid, None, 2, &TrackOptions::default()).unwrap();
        for br in &rep.branches {
            let w = br.reality_window.unwrap();
            assert!(w > 0.99 && w <= 1.0 + 1e-12, "window {w}");
            assert_eq!(br.epsilon_grid.len(), rep.epsilon_grid.len());
            assert_eq!(*br.verdicts.last().unwrap(), Reality::ConjugatePair);
        }
    }

    #[test]
    fn harmonic_quartic_branches_increase() {
        let fam = catalog("harmonic_quartic").unwrap();
        let disc = Discretization::Basis(BasisSpec::new(60, 1.0).unwrap());
        let grid = uniform_grid(0.2, 20);
        let rep = track_branches(&fam, &grid, Some(&disc), 3, &TrackOptions::default()).unwrap();
        for (b, br) in rep.branches.iter().enumerate() {
            assert!(br.values[0].re - (2 * b + 1) as f64 <= 1e-10);
            assert!(br.verdicts.iter().all(|v| *v == Reality::Real));
            assert!(br.values.windows(2).all(|w| w[1].re > w[0].re));
            assert!(!br.flags.collision && !br.flags.undecided);
        }
    }

    #[test]
    fn grid_must_start_at_zero() {
        let fam = catalog("gap2x2").unwrap();
        let e = track_branches(&fam, &[0.1, 0.2], None, 2, &TrackOptions::default());
        assert!(matches!(e, Err(PerturbationError::BadGrid(_))));
    }
}
