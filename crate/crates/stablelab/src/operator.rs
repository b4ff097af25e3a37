//! Composable lattice operators.
//!
//! An [`Operator`] is an immutable tree of Fourier multipliers, pointwise
//! multiplications, compositions, affine combinations and Neumann-series
//! inverses. Application tracks whether the working array is in physical or
//! Fourier space so consecutive multipliers share one transform.

use crate::error::{param, Error, Result};
use crate::grid::{fft_nd, Field, TorusGrid};
use num_complex::Complex64;
use std::sync::Arc;

/// Spec-facing name for [`Operator`].
pub type LinearOperatorHandle = Operator;

#[derive(Clone)]
pub struct Operator {
    grid: TorusGrid,
    node: Arc<Node>,
}

enum Node {
    Identity,
    Multiplier { symbol: Arc<Vec<Complex64>>, real: bool, label: String },
    Pointwise { values: Arc<Vec<Complex64>>, real: bool, label: String },
    /// Applied left to right.
    Compose(Vec<Operator>),
    Sum(Vec<(Complex64, Operator)>),
    /// `(1 + K)^{-1}` by the Neumann series.
    Neumann { inner: Operator, tol: f64, max_terms: usize },
}

enum State {
    Phys(Vec<Complex64>),
    Spec(Vec<Complex64>),
}

impl State {
    fn into_phys(self, g: &TorusGrid) -> Vec<Complex64> {
        match self {
            State::Phys(v) => v,
            State::Spec(mut v) => {
                fft_nd(g, &mut v, true);
                v
            }
        }
    }

    fn into_spec(self, g: &TorusGrid) -> Vec<Complex64> {
        match self {
            State::Spec(v) => v,
            State::Phys(mut v) => {
                fft_nd(g, &mut v, false);
                v
            }
        }
    }
}

/// Outcome of a Neumann-series solve.
#[derive(Clone, Debug)]
pub struct NeumannStats {
    pub term_norms: Vec<f64>,
}

impl Operator {
    pub fn identity(grid: &TorusGrid) -> Self {
        Self { grid: *grid, node: Arc::new(Node::Identity) }
    }

    /// Fourier multiplier with precomputed symbol values on the FFT bins.
    /// `real` asserts `m(-k) = conj m(k)`, so real fields stay real.
    pub fn multiplier(grid: &TorusGrid, symbol: Vec<Complex64>, real: bool, label: impl Into<String>) -> Result<Self> {
        if symbol.len() != grid.len() {
            return param("multiplier length does not match grid");
        }
        Ok(Self {
            grid: *grid,
            node: Arc::new(Node::Multiplier { symbol: Arc::new(symbol), real, label: label.into() }),
        })
    }

    /// Pointwise multiplication by a lattice field.
    pub fn pointwise(field: &Field, label: impl Into<String>) -> Self {
        Self {
            grid: field.grid,
            node: Arc::new(Node::Pointwise {
                values: Arc::new(field.data.clone()),
                real: field.real,
                label: label.into(),
            }),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Operator) -> Operator {
        Operator::compose(&[self.clone(), next.clone()])
    }

    /// Composition applying `ops[0]` first. Nested compositions are flattened
    /// and adjacent multipliers fused.
    pub fn compose(ops: &[Operator]) -> Operator {
        let grid = ops.first().map(|o| o.grid).expect("empty composition");
        let mut flat: Vec<Operator> = Vec::new();
        fn push(flat: &mut Vec<Operator>, op: &Operator) {
            match &*op.node {
                Node::Compose(v) => v.iter().for_each(|o| push(flat, o)),
                Node::Identity => {}
                Node::Multiplier { symbol, real, label } => {
                    if let Some(last) = flat.last() {
                        if let Node::Multiplier { symbol: s0, real: r0, label: l0 } = &*last.node {
                            let fused: Vec<Complex64> = s0.iter().zip(symbol.iter()).map(|(a, b)| a * b).collect();
                            let op2 = Operator {
                                grid: op.grid,
                                node: Arc::new(Node::Multiplier {
                                    symbol: Arc::new(fused),
                                    real: *r0 && *real,
                                    label: format!("{label}·{l0}"),
                                }),
                            };
                            flat.pop();
                            flat.push(op2);
                            return;
                        }
                    }
                    flat.push(op.clone());
                }
                _ => flat.push(op.clone()),
            }
        }
        ops.iter().for_each(|o| push(&mut flat, o));
        match flat.len() {
            0 => Operator::identity(&grid),
            1 => flat.pop().unwrap(),
            _ => Operator { grid, node: Arc::new(Node::Compose(flat)) },
        }
    }

    /// Affine combination `Σ c_i T_i`.
    pub fn sum(terms: Vec<(Complex64, Operator)>) -> Operator {
        let grid = terms.first().map(|t| t.1.grid).expect("empty sum");
        Operator { grid, node: Arc::new(Node::Sum(terms)) }
    }

    pub fn plus(&self, other: &Operator) -> Operator {
        Operator::sum(vec![(Complex64::new(1.0, 0.0), self.clone()), (Complex64::new(1.0, 0.0), other.clone())])
    }

    pub fn minus(&self, other: &Operator) -> Operator {
        Operator::sum(vec![(Complex64::new(1.0, 0.0), self.clone()), (Complex64::new(-1.0, 0.0), other.clone())])
    }

    pub fn scaled(&self, c: Complex64) -> Operator {
        Operator::sum(vec![(c, self.clone())])
    }

    /// `(1 + self)^{-1}` via the Neumann series, truncated once a term's norm
    /// falls below `tol·‖f‖₂`.
    pub fn neumann_inverse(&self, tol: f64, max_terms: usize) -> Operator {
        Operator { grid: self.grid, node: Arc::new(Node::Neumann { inner: self.clone(), tol, max_terms }) }
    }

    /// True when the operator maps real fields to real fields.
    pub fn preserves_real(&self) -> bool {
        match &*self.node {
            Node::Identity => true,
            Node::Multiplier { real, .. } | Node::Pointwise { real, .. } => *real,
            Node::Compose(v) => v.iter().all(|o| o.preserves_real()),
            Node::Sum(v) => v.iter().all(|(c, o)| c.im == 0.0 && o.preserves_real()),
            Node::Neumann { inner, .. } => inner.preserves_real(),
        }
    }

    /// `L²` adjoint; `adjoint(adjoint(T))` rebuilds `T` exactly.
    pub fn adjoint(&self) -> Operator {
        let node = match &*self.node {
            Node::Identity => Node::Identity,
            Node::Multiplier { symbol, real, label } => Node::Multiplier {
                symbol: Arc::new(symbol.iter().map(|c| c.conj()).collect()),
                real: *real,
                label: adj_label(label),
            },
            Node::Pointwise { values, real, label } => Node::Pointwise {
                values: Arc::new(values.iter().map(|c| c.conj()).collect()),
                real: *real,
                label: adj_label(label),
            },
            Node::Compose(v) => Node::Compose(v.iter().rev().map(|o| o.adjoint()).collect()),
            Node::Sum(v) => Node::Sum(v.iter().map(|(c, o)| (c.conj(), o.adjoint())).collect()),
            Node::Neumann { inner, tol, max_terms } => {
                Node::Neumann { inner: inner.adjoint(), tol: *tol, max_terms: *max_terms }
            }
        };
        Operator { grid: self.grid, node: Arc::new(node) }
    }

    /// Human-readable expression tree.
    pub fn describe(&self) -> String {
        match &*self.node {
            Node::Identity => "I".into(),
            Node::Multiplier { label, .. } => format!("F[{label}]"),
            Node::Pointwise { label, .. } => format!("M[{label}]"),
            Node::Compose(v) => v.iter().rev().map(|o| o.describe()).collect::<Vec<_>>().join("∘"),
            Node::Sum(v) => format!(
                "({})",
                v.iter().map(|(c, o)| format!("{c}·{}", o.describe())).collect::<Vec<_>>().join(" + ")
            ),
            Node::Neumann { inner, .. } => format!("(1+{})^-1", inner.describe()),
        }
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid != self.grid {
            return param("field grid does not match operator grid");
        }
        let out = self.run(State::Phys(f.data.clone()))?.into_phys(&self.grid);
        let real = f.real && self.preserves_real();
        Ok(Field { grid: self.grid, data: out, real }.realify())
    }

    fn run(&self, st: State) -> Result<State> {
        let g = &self.grid;
        Ok(match &*self.node {
            Node::Identity => st,
            Node::Multiplier { symbol, .. } => {
                let mut v = st.into_spec(g);
                v.iter_mut().zip(symbol.iter()).for_each(|(x, m)| *x *= m);
                State::Spec(v)
            }
            Node::Pointwise { values, .. } => {
                let mut v = st.into_phys(g);
                v.iter_mut().zip(values.iter()).for_each(|(x, m)| *x *= m);
                State::Phys(v)
            }
            Node::Compose(ops) => {
                let mut s = st;
                for o in ops {
                    s = o.run(s)?;
                }
                s
            }
            Node::Sum(terms) => {
                let spec_in = matches!(st, State::Spec(_));
                let base = match st {
                    State::Phys(v) | State::Spec(v) => v,
                };
                let mut outs = Vec::with_capacity(terms.len());
                for (c, o) in terms {
                    let s = if spec_in { State::Spec(base.clone()) } else { State::Phys(base.clone()) };
                    outs.push((*c, o.run(s)?));
                }
                let all_spec = outs.iter().all(|(_, s)| matches!(s, State::Spec(_)));
                let mut acc = vec![Complex64::new(0.0, 0.0); base.len()];
                for (c, s) in outs {
                    let v = if all_spec { s.into_spec(g) } else { s.into_phys(g) };
                    acc.iter_mut().zip(v).for_each(|(a, x)| *a += c * x);
                }
                if all_spec {
                    State::Spec(acc)
                } else {
                    State::Phys(acc)
                }
            }
            Node::Neumann { inner, tol, max_terms } => {
                let f = Field { grid: *g, data: st.into_phys(g), real: false };
                let (x, _) = neumann_solve(inner, &f, *tol, *max_terms)?;
                State::Phys(x.data)
            }
        })
    }
}

fn adj_label(l: &str) -> String {
    match l.strip_suffix('*') {
        Some(s) => s.to_string(),
        None => format!("{l}*"),
    }
}

/// Solves `(1 + K) x = f` by `x = Σ (−K)^j f`, stopping when
/// `‖(−K)^j f‖₂ < tol·‖f‖₂`. Growth of the terms over eight consecutive steps
/// is reported as divergence.
pub fn neumann_solve(k: &Operator, f: &Field, tol: f64, max_terms: usize) -> Result<(Field, NeumannStats)> {
    let f0 = f.norm2();
    let mut x = f.clone();
    let mut term = f.clone();
    let mut norms = vec![f0];
    if f0 == 0.0 {
        return Ok((x, NeumannStats { term_norms: norms }));
    }
    let mut growth = 0;
    for j in 1..=max_terms {
        term = k.apply(&term)?.scale(-1.0);
        let tn = term.norm2();
        x = x.add(&term);
        let prev = norms[j - 1];
        norms.push(tn);
        if !tn.is_finite() {
            return Err(Error::Divergence { estimate: f64::INFINITY });
        }
        if tn < tol * f0 {
            return Ok((x, NeumannStats { term_norms: norms }));
        }
        if tn >= prev {
            growth += 1;
            if growth >= 8 {
                let rate = (tn / norms[j - 8]).powf(1.0 / 8.0);
                return Err(Error::Divergence { estimate: rate });
            }
        } else {
            growth = 0;
        }
    }
    Err(Error::Convergence {
        msg: "Neumann series truncated".into(),
        iterations: max_terms,
        last: *norms.last().unwrap() / f0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::new(2, 3.0, 8).unwrap()
    }

    #[test]
    fn fused_multipliers_and_adjoint() {
        let g = grid();
        let a = Operator::multiplier(&g, g.symbol(|k| Complex64::new(1.0 + k[0] * k[0], k[1])), false, "a").unwrap();
        let w = Operator::pointwise(&g.sample(|x| 1.0 + x[0].cos()), "w");
        let t = Operator::compose(&[a.clone(), a.clone(), w.clone(), a.clone()]);
        let f = g.sample(|x| (x[0] - x[1]).sin());
        let gg = g.sample(|x| x[0] * x[1]);
        let lhs = t.apply(&f).unwrap().inner(&gg);
        let rhs = f.inner(&t.adjoint().apply(&gg).unwrap());
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
        let tt = t.adjoint().adjoint();
        assert_eq!(tt.apply(&f).unwrap(), t.apply(&f).unwrap());
    }

    #[test]
    fn neumann_inverts_small_perturbation() {
        let g = grid();
        let k = Operator::pointwise(&g.sample(|x| 0.3 * x[0].sin()), "k");
        let inv = k.neumann_inverse(1e-14, 500);
        let f = g.sample(|x| 1.0 + x[1]);
        let x = inv.apply(&f).unwrap();
        let back = x.add(&k.apply(&x).unwrap());
        assert!(back.rel_diff(&f) < 1e-12);
    }

    #[test]
    fn neumann_reports_divergence() {
        let g = grid();
        let k = Operator::pointwise(&Field::constant(&g, 1.5), "k");
        let f = Field::constant(&g, 1.0);
        assert!(matches!(k.neumann_inverse(1e-12, 100).apply(&f), Err(Error::Divergence { .. })));
    }
}
