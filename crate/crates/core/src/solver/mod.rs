//! Steady-state energy balance of a thermal network.
//!
//! For every diffusion node `i` the residual is
//! `R_i = Q_i + sum_j flow_ij(T) + sigma sum_j GR_ij (T_j^4 - T_i^4)`,
//! where `flow_ij` is the conductive heat flow into `i` from `j`. The solver
//! drives `max |R_i|` below a tolerance with damped Newton steps and falls
//! back to nonlinear Gauss-Seidel if Newton stalls.

mod linalg;
mod report;

pub use linalg::DenseMatrix;
pub use report::{flux_report, write_solve_csv, FluxReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NodeKind, ThermalNetwork};
use crate::num::{pow4, sigma, Real};

/// Lowest temperature an iterate may take, K.
pub const TEMPERATURE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Mean of the boundary temperatures.
    BoundaryMean,
    /// The same temperature everywhere, K.
    Uniform(f64),
    /// A previous solution, one entry per node.
    Warm(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Convergence threshold on `max |R_i|`, W.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial Newton damping factor in (0, 1].
    pub damping: f64,
    pub initial: InitialGuess,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-9,
            max_iterations: 200,
            damping: 0.5,
            initial: InitialGuess::BoundaryMean,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |s: &str| Err(SolveError::Options(s.into()));
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        match &self.initial {
            InitialGuess::Uniform(t) if !(*t > 0.0) => bad("initial temperature must be > 0"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Newton,
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<R: Real> {
    /// One entry per network node; boundary entries equal their fixed value.
    pub temperatures: Vec<R>,
    pub iterations: usize,
    /// Final `max |R_i|` over diffusion nodes, W.
    pub residual_norm: R,
    /// Per-node residual for diffusion nodes, net heat absorbed for boundary
    /// nodes, W.
    pub flux_balance: Vec<R>,
    pub converged: bool,
    pub method: Method,
    /// `max |R_i|` after every accepted iteration, starting with the guess.
    pub history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("initial guess has {got} entries for {expected} nodes")]
    GuessLength { got: usize, expected: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e} W)")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
        history: Vec<f64>,
    },
    #[error("singular Jacobian at node {node:?}")]
    Singular { node: String },
}

/// Raw per-node sum of heat inflows plus dissipation. Boundary entries are
/// the heat they absorb from the network, W.
fn balance<R: Real>(net: &ThermalNetwork<R>, t: &[R]) -> Vec<R> {
    let mut r: Vec<R> = net.nodes().iter().map(|n| n.dissipation()).collect();
    for c in net.conductors() {
        let f = c.flow(t[c.a.0], t[c.b.0]);
        r[c.a.0] = r[c.a.0] + f;
        r[c.b.0] = r[c.b.0] - f;
    }
    let s = sigma::<R>();
    for e in net.radiation() {
        let f = s * e.gr * (pow4(t[e.b.0]) - pow4(t[e.a.0]));
        r[e.a.0] = r[e.a.0] + f;
        r[e.b.0] = r[e.b.0] - f;
    }
    r
}

/// Residual per node, W. Boundary nodes have none and report zero.
pub fn residual<R: Real>(net: &ThermalNetwork<R>, t: &[R]) -> Vec<R> {
    let mut r = balance(net, t);
    for (i, n) in net.nodes().iter().enumerate() {
        if n.is_boundary() {
            r[i] = R::zero();
        }
    }
    r
}

fn max_abs<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |m, x| m.max(x.abs()))
}

/// Positions of the diffusion nodes and the inverse map.
fn unknowns<R: Real>(net: &ThermalNetwork<R>) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut free = Vec::new();
    let mut index = vec![None; net.len()];
    for (i, n) in net.nodes().iter().enumerate() {
        if !n.is_boundary() {
            index[i] = Some(free.len());
            free.push(i);
        }
    }
    (free, index)
}

/// Analytic Jacobian `dR_i/dT_j` over the diffusion nodes, in network order.
///
/// Conductor terms use the exact derivative of the conductivity integral,
/// so geometric conductors contribute `(A/d) kappa(T)` at each end.
pub fn jacobian<R: Real>(net: &ThermalNetwork<R>, t: &[R]) -> DenseMatrix<R> {
    let (free, index) = unknowns(net);
    let mut j = DenseMatrix::zeros(free.len());
    let mut stamp = |a: usize, b: usize, da: R, db: R| {
        // Flow into a is f(Ta, Tb) with df/dTa = -da, df/dTb = db; b sees -f.
        if let Some(ia) = index[a] {
            j.add(ia, ia, -da);
            if let Some(ib) = index[b] {
                j.add(ia, ib, db);
            }
        }
        if let Some(ib) = index[b] {
            j.add(ib, ib, -db);
            if let Some(ia) = index[a] {
                j.add(ib, ia, da);
            }
        }
    };
    for c in net.conductors() {
        let (a, b) = (c.a.0, c.b.0);
        stamp(a, b, c.dflow(t[a]), c.dflow(t[b]));
    }
    let four_sigma = R::lit(4.0) * sigma::<R>();
    for e in net.radiation() {
        let (a, b) = (e.a.0, e.b.0);
        let g = four_sigma * e.gr;
        stamp(a, b, g * t[a] * t[a] * t[a], g * t[b] * t[b] * t[b]);
    }
    j
}

/// Largest row-wise relative difference between the analytic Jacobian and
/// central finite differences of the residual with step `h` (K). Each row's
/// error is scaled by that row's largest analytic entry.
pub fn jacobian_fd_error<R: Real>(net: &ThermalNetwork<R>, t: &[R], h: R) -> R {
    let (free, _) = unknowns(net);
    let ja = jacobian(net, t);
    let n = free.len();
    let mut fd = vec![vec![R::zero(); n]; n];
    let mut tt = t.to_vec();
    for (col, &node) in free.iter().enumerate() {
        tt[node] = t[node] + h;
        let rp = residual(net, &tt);
        tt[node] = t[node] - h;
        let rm = residual(net, &tt);
        tt[node] = t[node];
        for (row, &rnode) in free.iter().enumerate() {
            fd[row][col] = (rp[rnode] - rm[rnode]) / (h + h);
        }
    }
    let mut worst = R::zero();
    for row in 0..n {
        let scale = max_abs(ja.row(row));
        if scale == R::zero() {
            continue;
        }
        let err = (0..n).fold(R::zero(), |m, col| {
            m.max((ja.get(row, col) - fd[row][col]).abs())
        });
        worst = worst.max(err / scale);
    }
    worst
}

fn initial_guess<R: Real>(
    net: &ThermalNetwork<R>,
    opts: &SolveOptions,
) -> Result<Vec<R>, SolveError> {
    let boundary: Vec<R> = net
        .nodes()
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::Boundary { t } => Some(t),
            NodeKind::Diffusion { .. } => None,
        })
        .collect();
    let fill = match &opts.initial {
        InitialGuess::BoundaryMean => {
            if boundary.is_empty() {
                R::lit(300.0)
            } else {
                boundary.iter().copied().sum::<R>() / R::lit(boundary.len() as f64)
            }
        }
        InitialGuess::Uniform(t) => R::lit(*t),
        InitialGuess::Warm(w) => {
            if w.len() != net.len() {
                return Err(SolveError::GuessLength {
                    got: w.len(),
                    expected: net.len(),
                });
            }
            R::zero()
        }
    };
    let floor = R::lit(TEMPERATURE_FLOOR);
    Ok(net
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| match (n.kind, &opts.initial) {
            (NodeKind::Boundary { t }, _) => t,
            (_, InitialGuess::Warm(w)) => R::lit(w[i]).max(floor),
            _ => fill,
        })
        .collect())
}

fn finish<R: Real>(
    net: &ThermalNetwork<R>,
    t: Vec<R>,
    iterations: usize,
    method: Method,
    history: Vec<f64>,
) -> SolveResult<R> {
    let flux = balance(net, &t);
    let r = residual(net, &t);
    SolveResult {
        residual_norm: max_abs(&r),
        temperatures: t,
        iterations,
        flux_balance: flux,
        converged: true,
        method,
        history,
    }
}

/// Solves the steady state. Deterministic for fixed inputs and options.
pub fn solve_steady_state<R: Real>(
    net: &ThermalNetwork<R>,
    opts: &SolveOptions,
) -> Result<SolveResult<R>, SolveError> {
    opts.validate()?;
    let tol = R::lit(opts.tolerance);
    let mut t = initial_guess(net, opts)?;
    match newton(net, opts, &mut t)? {
        Outcome::Converged {
            iterations,
            history,
        } => Ok(finish(net, t, iterations, Method::Newton, history)),
        Outcome::Stalled {
            iterations,
            mut history,
        } => {
            log::debug!("Newton stalled after {iterations} iterations; switching to Gauss-Seidel");
            let (sweeps, ok) = gauss_seidel(net, opts, &mut t, &mut history);
            let iterations = iterations + sweeps;
            let r = max_abs(&residual(net, &t));
            if ok && r < tol {
                Ok(finish(net, t, iterations, Method::GaussSeidel, history))
            } else {
                Err(SolveError::NotConverged {
                    iterations,
                    residual: r.to_f64_lossy(),
                    last_iterate: t.iter().map(|x| x.to_f64_lossy()).collect(),
                    history,
                })
            }
        }
    }
}

enum Outcome {
    Converged {
        iterations: usize,
        history: Vec<f64>,
    },
    Stalled {
        iterations: usize,
        history: Vec<f64>,
    },
}

fn newton<R: Real>(
    net: &ThermalNetwork<R>,
    opts: &SolveOptions,
    t: &mut [R],
) -> Result<Outcome, SolveError> {
    let (free, _) = unknowns(net);
    let tol = R::lit(opts.tolerance);
    let floor = R::lit(TEMPERATURE_FLOOR);
    let min_damping = R::lit(1e-6);
    let mut r = residual(net, t);
    let mut norm = max_abs(&r);
    let mut history = vec![norm.to_f64_lossy()];
    let mut lambda = R::lit(opts.damping);
    let mut iterations = 0;
    let mut trial = t.to_vec();
    while norm >= tol {
        if iterations >= opts.max_iterations {
            return Ok(Outcome::Stalled {
                iterations,
                history,
            });
        }
        let j = jacobian(net, t);
        let mut step: Vec<R> = free.iter().map(|&i| -r[i]).collect();
        if let Err(k) = j.solve(&mut step) {
            return Err(SolveError::Singular {
                node: net.nodes()[free[k]].label.clone(),
            });
        }
        // Backtrack until the residual drops; each trial counts as an iteration.
        loop {
            iterations += 1;
            trial.copy_from_slice(t);
            for (k, &i) in free.iter().enumerate() {
                trial[i] = (t[i] + lambda * step[k]).max(floor);
            }
            let rt = residual(net, &trial);
            let nt = max_abs(&rt);
            if nt < norm {
                t.copy_from_slice(&trial);
                r = rt;
                norm = nt;
                history.push(norm.to_f64_lossy());
                lambda = (lambda + lambda).min(R::one());
                break;
            }
            lambda = lambda * R::lit(0.5);
            if lambda < min_damping || iterations >= opts.max_iterations {
                return Ok(Outcome::Stalled {
                    iterations,
                    history,
                });
            }
        }
    }
    Ok(Outcome::Converged {
        iterations,
        history,
    })
}

/// Temperature of node `i` that zeroes its own residual with all other
/// temperatures held; the residual is strictly decreasing in `T_i`.
fn local_solve<R: Real>(
    net: &ThermalNetwork<R>,
    t: &mut [R],
    i: usize,
    adjacency: &[Vec<usize>],
) -> R {
    let floor = R::lit(TEMPERATURE_FLOOR);
    let own = |t: &[R]| -> R {
        let q = net.nodes()[i].dissipation();
        let s = sigma::<R>();
        let mut acc = q;
        for &k in &adjacency[i] {
            if k < net.conductors().len() {
                let c = &net.conductors()[k];
                let f = c.flow(t[c.a.0], t[c.b.0]);
                acc = acc + if c.a.0 == i { f } else { -f };
            } else {
                let e = &net.radiation()[k - net.conductors().len()];
                let f = s * e.gr * (pow4(t[e.b.0]) - pow4(t[e.a.0]));
                acc = acc + if e.a.0 == i { f } else { -f };
            }
        }
        acc
    };
    let original = t[i];
    let mut lo = floor;
    let mut hi = original.max(floor);
    t[i] = hi;
    while own(t) > R::zero() {
        lo = hi;
        hi = hi + hi;
        t[i] = hi;
        if !hi.is_finite() {
            break;
        }
    }
    for _ in 0..200 {
        let mid = R::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        t[i] = mid;
        if own(t) > R::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t[i] = original;
    R::lit(0.5) * (lo + hi)
}

fn gauss_seidel<R: Real>(
    net: &ThermalNetwork<R>,
    opts: &SolveOptions,
    t: &mut [R],
    history: &mut Vec<f64>,
) -> (usize, bool) {
    let (free, _) = unknowns(net);
    let mut adjacency = vec![Vec::new(); net.len()];
    for (k, c) in net.conductors().iter().enumerate() {
        adjacency[c.a.0].push(k);
        adjacency[c.b.0].push(k);
    }
    let offset = net.conductors().len();
    for (k, e) in net.radiation().iter().enumerate() {
        adjacency[e.a.0].push(offset + k);
        adjacency[e.b.0].push(offset + k);
    }
    let tol = R::lit(opts.tolerance);
    let omega = R::lit(0.8);
    let max_sweeps = opts.max_iterations * 50;
    for sweep in 1..=max_sweeps {
        for &i in &free {
            let target = local_solve(net, t, i, &adjacency);
            t[i] = t[i] + omega * (target - t[i]);
        }
        let norm = max_abs(&residual(net, t));
        history.push(norm.to_f64_lossy());
        if norm < tol {
            return (sweep, true);
        }
    }
    (max_sweeps, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Conductor, Node, NodeId, RadExchange};

    fn radiator(q: f64) -> ThermalNetwork<f64> {
        ThermalNetwork::new(
            vec![Node::boundary("space", 3.0), Node::diffusion("plate", q)],
            vec![],
            vec![RadExchange {
                a: NodeId(1),
                b: NodeId(0),
                gr: 0.01,
            }],
        )
        .unwrap()
    }

    fn closed_form(q: f64, gr: f64, ts: f64) -> f64 {
        (q / (crate::num::STEFAN_BOLTZMANN * gr) + ts.powi(4)).powf(0.25)
    }

    #[test]
    fn isothermal_residual_is_exactly_zero() {
        let net = radiator(0.0).with_boundary("space", 40.0).unwrap();
        assert_eq!(residual(&net, &[40.0, 40.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn two_node_conduction_residual() {
        let net: ThermalNetwork<f64> = ThermalNetwork::new(
            vec![
                Node::diffusion("a", 0.0),
                Node::diffusion("b", 0.0),
                Node::boundary("c", 1.0),
            ],
            vec![
                Conductor::direct(NodeId(0), NodeId(1), 0.05),
                Conductor::direct(NodeId(1), NodeId(2), 1.0),
            ],
            vec![],
        )
        .unwrap();
        let r = residual(&net, &[20.0, 10.0, 10.0]);
        assert!((r[0] + 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn radiator_residual_at_closed_form_temperature() {
        let net = radiator(1.0);
        let t = closed_form(1.0, 0.01, 3.0);
        assert!((t - 204.926).abs() < 1e-3);
        assert!(residual(&net, &[3.0, t])[1].abs() < 1e-6);
    }

    #[test]
    fn radiator_solves_to_closed_form() {
        let res = solve_steady_state(&radiator(1.0), &SolveOptions::default()).unwrap();
        assert!((res.temperatures[1] - closed_form(1.0, 0.01, 3.0)).abs() < 1e-6);
        assert_eq!(res.temperatures[0], 3.0);
        assert!(res.residual_norm < 1e-9);
    }

    #[test]
    fn conduction_fixture_gives_q_over_gl() {
        let net: ThermalNetwork<f64> = ThermalNetwork::new(
            vec![Node::boundary("wall", 300.0), Node::diffusion("n", 0.5)],
            vec![Conductor::direct(NodeId(0), NodeId(1), 0.05)],
            vec![],
        )
        .unwrap();
        let res = solve_steady_state(&net, &SolveOptions::default()).unwrap();
        assert!((res.temperatures[1] - 310.0).abs() < 1e-9);
    }

    #[test]
    fn f32_network_solves() {
        let net: ThermalNetwork<f32> = radiator(1.0).cast();
        let opts = SolveOptions {
            tolerance: 1e-4,
            ..Default::default()
        };
        let res = solve_steady_state(&net, &opts).unwrap();
        assert!((res.temperatures[1] as f64 - closed_form(1.0, 0.01, 3.0)).abs() < 1e-2);
    }

    #[test]
    fn exhausted_iterations_report_last_iterate() {
        let opts = SolveOptions {
            max_iterations: 1,
            tolerance: 1e-30,
            ..Default::default()
        };
        match solve_steady_state(&radiator(1.0), &opts) {
            Err(SolveError::NotConverged {
                last_iterate,
                history,
                ..
            }) => {
                assert_eq!(last_iterate.len(), 2);
                assert!(!history.is_empty());
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn gauss_seidel_fallback_converges() {
        let net = radiator(1.0);
        let opts = SolveOptions::default();
        let mut t = vec![3.0, 50.0];
        let mut h = Vec::new();
        let (_, ok) = gauss_seidel(&net, &opts, &mut t, &mut h);
        assert!(ok);
        assert!((t[1] - closed_form(1.0, 0.01, 3.0)).abs() < 1e-6);
    }

    #[test]
    fn options_are_validated() {
        for o in [
            SolveOptions {
                tolerance: 0.0,
                ..Default::default()
            },
            SolveOptions {
                max_iterations: 0,
                ..Default::default()
            },
            SolveOptions {
                damping: 1.5,
                ..Default::default()
            },
            SolveOptions {
                initial: InitialGuess::Uniform(-1.0),
                ..Default::default()
            },
        ] {
            assert!(o.validate().is_err());
        }
        let warm = SolveOptions {
            initial: InitialGuess::Warm(vec![1.0]),
            ..Default::default()
        };
        assert!(matches!(
            solve_steady_state(&radiator(1.0), &warm),
            Err(SolveError::GuessLength { .. })
        ));
    }
}
