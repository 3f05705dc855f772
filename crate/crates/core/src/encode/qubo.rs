use std::collections::BTreeMap;

use crate::error::EncodeError;
use crate::scalar::Real;

use super::encoding::Encoding;

/// Affine form `constant + sum_i coeff_i q_i` over qubits, built in `f64`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub constant: f64,
    pub terms: BTreeMap<usize, f64>,
}

impl LinearExpr {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, qubit: usize, coeff: f64) {
        *self.terms.entry(qubit).or_insert(0.0) += coeff;
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &LinearExpr, scale: f64) {
        self.constant += scale * other.constant;
        for (&q, &c) in &other.terms {
            self.add_term(q, scale * c);
        }
    }

    pub fn scaled(&self, scale: f64) -> Self {
        let mut e = LinearExpr::default();
        e.add_scaled(self, scale);
        e
    }

    pub fn eval(&self, bits: &[bool]) -> f64 {
        self.constant + self.terms.iter().filter(|(q, _)| bits[**q]).map(|(_, c)| c).sum::<f64>()
    }

    /// Smallest and largest value over all bit assignments.
    pub fn range(&self) -> (f64, f64) {
        let lo = self.constant + self.terms.values().map(|c| c.min(0.0)).sum::<f64>();
        let hi = self.constant + self.terms.values().map(|c| c.max(0.0)).sum::<f64>();
        (lo, hi)
    }
}

/// `E(q) = sum_{i<j} Q_ij q_i q_j + sum_i (Q_ii + c_i) q_i + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem<T: Real> {
    /// Keys satisfy `i <= j`.
    pub quadratic: BTreeMap<(usize, usize), T>,
    pub linear: Vec<T>,
    pub constant: T,
    pub encoding: Encoding,
}

impl<T: Real> QuboProblem<T> {
    pub fn new(encoding: Encoding) -> Self {
        Self {
            quadratic: BTreeMap::new(),
            linear: vec![T::zero(); encoding.total_qubits],
            constant: T::zero(),
            encoding,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.linear.len()
    }

    /// Grows the coefficient vector after slack registers were appended to the encoding.
    pub fn sync_qubits(&mut self) {
        self.linear.resize(self.encoding.total_qubits, T::zero());
    }

    pub fn add_linear(&mut self, i: usize, c: T) {
        self.linear[i] += c;
    }

    pub fn add_quadratic(&mut self, i: usize, j: usize, c: T) {
        let key = if i <= j { (i, j) } else { (j, i) };
        *self.quadratic.entry(key).or_insert(T::zero()) += c;
    }

    /// Adds `weight * expr`.
    pub fn add_expr(&mut self, weight: f64, expr: &LinearExpr) {
        self.constant += T::of(weight * expr.constant);
        for (&q, &a) in &expr.terms {
            self.add_linear(q, T::of(weight * a));
        }
    }

    /// Adds `weight * expr^2`, using `q^2 = q`.
    pub fn add_squared(&mut self, weight: f64, expr: &LinearExpr) {
        if weight == 0.0 {
            return;
        }
        let c = expr.constant;
        self.constant += T::of(weight * c * c);
        let terms: Vec<(usize, f64)> = expr.terms.iter().map(|(&q, &a)| (q, a)).filter(|t| t.1 != 0.0).collect();
        for (k, &(qi, ai)) in terms.iter().enumerate() {
            self.add_linear(qi, T::of(weight * (ai * ai + 2.0 * c * ai)));
            for &(qj, aj) in &terms[k + 1..] {
                self.add_quadratic(qi, qj, T::of(2.0 * weight * ai * aj));
            }
        }
    }

    /// `self += scale * other`; both must share the qubit register.
    pub fn add_scaled(&mut self, other: &QuboProblem<T>, scale: T) {
        assert_eq!(self.num_qubits(), other.num_qubits(), "qubo blocks on different registers");
        self.constant += scale * other.constant;
        for (a, &b) in self.linear.iter_mut().zip(&other.linear) {
            *a += scale * b;
        }
        for (&(i, j), &v) in &other.quadratic {
            self.add_quadratic(i, j, scale * v);
        }
    }

    pub fn energy(&self, bits: &[bool]) -> Result<T, EncodeError> {
        if bits.len() != self.num_qubits() {
            return Err(EncodeError::LengthMismatch { expected: self.num_qubits(), found: bits.len() });
        }
        let mut e = self.constant;
        for (i, &c) in self.linear.iter().enumerate() {
            if bits[i] {
                e += c;
            }
        }
        for (&(i, j), &q) in &self.quadratic {
            if bits[i] && bits[j] {
                e += q;
            }
        }
        Ok(e)
    }

    /// True when every coefficient apart from the constant is zero.
    pub fn is_constant(&self) -> bool {
        self.linear.iter().all(|c| c.is_zero()) && self.quadratic.values().all(|c| c.is_zero())
    }

    /// One term per line: `c <value>`, `l <i> <value>`, `q <i> <j> <value>`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# qubo {} qubits\nc {:e}\n", self.num_qubits(), self.constant.to_f64_lossy());
        for (i, c) in self.linear.iter().enumerate() {
            if !c.is_zero() {
                out.push_str(&format!("l {i} {:e}\n", c.to_f64_lossy()));
            }
        }
        for (&(i, j), c) in &self.quadratic {
            if !c.is_zero() {
                out.push_str(&format!("q {i} {j} {:e}\n", c.to_f64_lossy()));
            }
        }
        out
    }
}
