//! Independent reference implementations shared by the integration tests.
//!
//! Everything here works on full `2^n × 2^n` matrices built from Kronecker
//! products, with no code shared with the library's in-place kernels.

#![allow(dead_code)]

use num_complex::Complex;
use qkge::params::Owner;
use qkge::sim::{Circuit, Condition, Gate, GateKind, ParamSlot, RotParams};
use rand::Rng;

pub type C = Complex<f64>;
pub type Matrix = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let mut out = vec![vec![c(0.0, 0.0); m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            let aik = a[i][k];
            if aik == c(0.0, 0.0) {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![c(0.0, 0.0); ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn hadamard() -> Matrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![c(s, 0.0), c(s, 0.0)], vec![c(s, 0.0), c(-s, 0.0)]]
}

pub fn rz(a: f64) -> Matrix {
    vec![
        vec![Complex::from_polar(1.0, -a / 2.0), c(0.0, 0.0)],
        vec![c(0.0, 0.0), Complex::from_polar(1.0, a / 2.0)],
    ]
}

pub fn ry(t: f64) -> Matrix {
    let (s, co) = (t / 2.0).sin_cos();
    vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
}

/// `RZ(ω)·RY(θ)·RZ(φ)`.
pub fn rot(phi: f64, theta: f64, omega: f64) -> Matrix {
    matmul(&rz(omega), &matmul(&ry(theta), &rz(phi)))
}

/// `u` on `target` of an `n`-qubit register; qubit 0 is the leftmost factor.
pub fn embed(u: &Matrix, target: usize, n: usize) -> Matrix {
    let id = identity(2);
    let mut m = identity(1);
    for q in 0..n {
        m = kron(&m, if q == target { u } else { &id });
    }
    m
}

fn bit_of(index: usize, q: usize, n: usize) -> bool {
    (index >> (n - 1 - q)) & 1 == 1
}

pub fn cnot(control: usize, target: usize, n: usize) -> Matrix {
    let dim = 1 << n;
    let image = |j: usize| if bit_of(j, control, n) { j ^ (1 << (n - 1 - target)) } else { j };
    (0..dim)
        .map(|i| (0..dim).map(|j| if image(j) == i { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

/// Acts with `m` on basis states satisfying the condition and as identity
/// elsewhere.
pub fn conditioned(m: &Matrix, cond: &Condition, n: usize) -> Matrix {
    let holds = |k: usize| cond.terms().iter().all(|&(q, b)| bit_of(k, q, n) == b);
    let dim = m.len();
    let mut out = identity(dim);
    for i in 0..dim {
        for j in 0..dim {
            if holds(j) {
                out[i][j] = m[i][j];
            }
        }
    }
    out
}

fn slot(s: ParamSlot, params: &[f64]) -> f64 {
    if s.negated {
        -params[s.index]
    } else {
        params[s.index]
    }
}

pub fn gate_matrix(g: &Gate, n: usize, params: &[f64]) -> Matrix {
    let m = match &g.kind {
        GateKind::H(t) => embed(&hadamard(), *t, n),
        GateKind::Rot { target, params: p } => {
            let [a, b, w] = match p {
                RotParams::Fixed(a) => *a,
                RotParams::Bound(s) => [slot(s[0], params), slot(s[1], params), slot(s[2], params)],
            };
            embed(&rot(a, b, w), *target, n)
        }
        GateKind::Cnot { control, target } => cnot(*control, *target, n),
    };
    match &g.condition {
        Some(cond) => conditioned(&m, cond, n),
        None => m,
    }
}

/// Product of gate matrices, last gate leftmost.
pub fn circuit_unitary(circuit: &Circuit, params: &[f64]) -> Matrix {
    let n = circuit.n_qubits();
    circuit
        .gates()
        .iter()
        .fold(identity(1 << n), |acc, g| matmul(&gate_matrix(g, n, params), &acc))
}

pub fn apply(m: &Matrix, v: &[C]) -> Vec<C> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn zero_vector(n: usize) -> Vec<C> {
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(1.0, 0.0);
    v
}

pub fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Random circuit on `n` qubits with `n_params` bound angles, a few fixed
/// rotations and, when `n ≥ 3`, some gates conditioned on other qubits.
pub fn random_circuit<R: Rng>(rng: &mut R, n: usize, n_params: usize, n_gates: usize, conditioned: bool) -> Circuit {
    let mut circuit = Circuit::new(n).unwrap();
    if n_params > 0 {
        circuit.bind(Owner::Entity(0), n_params).unwrap();
    }
    let mut pushed = 0;
    while pushed < n_gates {
        let t = rng.random_range(0..n);
        let gate = match rng.random_range(0..4) {
            0 => Gate::h(t),
            1 if n > 1 => {
                let mut ctl = rng.random_range(0..n - 1);
                if ctl >= t {
                    ctl += 1;
                }
                Gate::cnot(ctl, t)
            }
            2 => Gate::rot(t, rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)),
            _ if n_params > 0 => {
                let mut s = || ParamSlot {
                    index: rng.random_range(0..n_params),
                    negated: rng.random_bool(0.3),
                };
                Gate::rot_bound(t, [s(), s(), s()])
            }
            _ => continue,
        };
        let gate = if conditioned && n >= 3 && rng.random_bool(0.4) {
            let used: Vec<usize> = match gate.kind {
                GateKind::H(q) | GateKind::Rot { target: q, .. } => vec![q],
                GateKind::Cnot { control, target } => vec![control, target],
            };
            let free: Vec<usize> = (0..n).filter(|q| !used.contains(q)).collect();
            let k = rng.random_range(1..=free.len().min(2));
            let terms = free[..k].iter().map(|&q| (q, rng.random_bool(0.5))).collect();
            gate.when(Some(Condition::new(terms).unwrap()))
        } else {
            gate
        };
        circuit.push(gate).unwrap();
        pushed += 1;
    }
    circuit
}

/// Closed-form MRR and Hits@k.
pub fn oracle_metrics(ranks: &[usize]) -> (f64, f64, f64) {
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    (mrr, hits(1), hits(10))
}

/// Filtered tail rank by direct enumeration: 1 + number of other entities
/// that are not known facts and score at least as high (strictly higher when
/// `optimistic`).
pub fn brute_force_rank(
    scores: &[f64],
    head: usize,
    relation: usize,
    tail: usize,
    known: &[(usize, usize, usize)],
    optimistic: bool,
) -> usize {
    let mut rank = 1;
    for (e, &s) in scores.iter().enumerate() {
        if e == tail || known.contains(&(head, relation, e)) {
            continue;
        }
        let beats = if optimistic { s > scores[tail] } else { s >= scores[tail] };
        if beats {
            rank += 1;
        }
    }
    rank
}

/// Gate-by-gate matrix-vector evaluation from `|0...0>`.
pub fn oracle_run(circuit: &Circuit, params: &[f64]) -> Vec<C> {
    let n = circuit.n_qubits();
    circuit
        .gates()
        .iter()
        .fold(zero_vector(n), |v, g| apply(&gate_matrix(g, n, params), &v))
}
