use std::collections::BTreeMap;

use crate::error::EncodeError;
use crate::scalar::Real;

use super::encoding::{bits_to_index, Encoding};
use super::qubo::QuboProblem;

/// A diagonal Pauli term: `Z_i` (one qubit) or `Z_i Z_j` (two qubits).
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm<T: Real> {
    pub support: Vec<usize>,
    pub coeff: T,
}

impl<T: Real> PauliTerm<T> {
    /// Eigenvalue (+1 or -1) on basis state `index`; bit set means `z = -1`.
    #[inline]
    pub fn eigenvalue(&self, index: usize) -> T {
        let parity = self.support.iter().fold(0usize, |p, &q| p ^ ((index >> q) & 1));
        if parity == 0 {
            T::one()
        } else {
            -T::one()
        }
    }

    pub fn mask(&self) -> usize {
        self.support.iter().map(|&q| 1usize << q).sum()
    }
}

/// `H(z) = constant + sum_i h_i z_i + sum_{i<j} J_ij z_i z_j` with `q = (1 - z)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingHamiltonian<T: Real> {
    pub fields: Vec<T>,
    /// Keys satisfy `i < j`.
    pub couplings: BTreeMap<(usize, usize), T>,
    pub constant: T,
    pub encoding: Option<Encoding>,
}

impl<T: Real> IsingHamiltonian<T> {
    pub fn zero(n: usize) -> Self {
        Self { fields: vec![T::zero(); n], couplings: BTreeMap::new(), constant: T::zero(), encoding: None }
    }

    pub fn num_qubits(&self) -> usize {
        self.fields.len()
    }

    pub fn from_qubo(qubo: &QuboProblem<T>) -> Self {
        let half = T::of(0.5);
        let quarter = T::of(0.25);
        let mut h = Self::zero(qubo.num_qubits());
        h.constant = qubo.constant;
        for (i, &c) in qubo.linear.iter().enumerate() {
            h.constant += c * half;
            h.fields[i] -= c * half;
        }
        for (&(i, j), &q) in &qubo.quadratic {
            if i == j {
                h.constant += q * half;
                h.fields[i] -= q * half;
            } else {
                h.constant += q * quarter;
                h.fields[i] -= q * quarter;
                h.fields[j] -= q * quarter;
                *h.couplings.entry((i, j)).or_insert(T::zero()) += q * quarter;
            }
        }
        h.encoding = Some(qubo.encoding.clone());
        h
    }

    /// Non-zero terms, fields first (by qubit) then couplings (by pair).
    pub fn terms(&self) -> Vec<PauliTerm<T>> {
        let mut out: Vec<PauliTerm<T>> = self
            .fields
            .iter()
            .enumerate()
            .filter(|(_, h)| !h.is_zero())
            .map(|(i, &h)| PauliTerm { support: vec![i], coeff: h })
            .collect();
        out.extend(
            self.couplings
                .iter()
                .filter(|(_, j)| !j.is_zero())
                .map(|(&(a, b), &j)| PauliTerm { support: vec![a, b], coeff: j }),
        );
        out
    }

    /// Rebuilds a Hamiltonian from a term list on `n` qubits.
    pub fn from_terms(n: usize, constant: T, terms: &[PauliTerm<T>]) -> Self {
        let mut h = Self::zero(n);
        h.constant = constant;
        for term in terms {
            match term.support[..] {
                [i] => h.fields[i] += term.coeff,
                [i, j] => {
                    let key = if i < j { (i, j) } else { (j, i) };
                    *h.couplings.entry(key).or_insert(T::zero()) += term.coeff;
                }
                _ => panic!("only one- and two-qubit Z terms are supported"),
            }
        }
        h
    }

    /// Sum of absolute term coefficients.
    pub fn coefficient_l1(&self) -> T {
        self.fields.iter().map(|h| h.abs()).sum::<T>() + self.couplings.values().map(|j| j.abs()).sum::<T>()
    }

    /// Energy of basis state `index` (qubit `i` is bit `i`).
    pub fn energy_index(&self, index: usize) -> T {
        let z = |q: usize| if (index >> q) & 1 == 1 { -T::one() } else { T::one() };
        let mut e = self.constant;
        for (i, &h) in self.fields.iter().enumerate() {
            e += h * z(i);
        }
        for (&(i, j), &c) in &self.couplings {
            e += c * z(i) * z(j);
        }
        e
    }

    pub fn energy(&self, bits: &[bool]) -> Result<T, EncodeError> {
        if bits.len() != self.num_qubits() {
            return Err(EncodeError::LengthMismatch { expected: self.num_qubits(), found: bits.len() });
        }
        Ok(self.energy_index(bits_to_index(bits)))
    }

    /// Energies of all `2^N` basis states, built incrementally over the lowest set bit.
    pub fn energy_table(&self) -> Vec<T> {
        let n = self.num_qubits();
        let dim = 1usize << n;
        let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (&(i, j), &c) in &self.couplings {
            adj[i].push((j, c));
            adj[j].push((i, c));
        }
        let two = T::of(2.0);
        let mut table = vec![T::zero(); dim];
        table[0] = self.constant + self.fields.iter().copied().sum::<T>() + self.couplings.values().copied().sum::<T>();
        for s in 1..dim {
            let i = s.trailing_zeros() as usize;
            let prev = s & (s - 1);
            // flipping z_i from +1 to -1 on top of `prev`
            let mut local = self.fields[i];
            for &(j, c) in &adj[i] {
                local += if (prev >> j) & 1 == 1 { -c } else { c };
            }
            table[s] = table[prev] - two * local;
        }
        table
    }

    /// One term per line: `c <value>`, `h <i> <value>`, `J <i> <j> <value>`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# ising {} qubits\nc {:e}\n", self.num_qubits(), self.constant.to_f64_lossy());
        for (i, h) in self.fields.iter().enumerate() {
            if !h.is_zero() {
                out.push_str(&format!("h {i} {:e}\n", h.to_f64_lossy()));
            }
        }
        for (&(i, j), c) in &self.couplings {
            if !c.is_zero() {
                out.push_str(&format!("J {i} {j} {:e}\n", c.to_f64_lossy()));
            }
        }
        out
    }

    /// Parses [`IsingHamiltonian::to_text`] output.
    pub fn from_text(text: &str) -> Result<Self, String> {
        let mut n = None;
        let mut constant = T::zero();
        let mut terms = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{line}: {e}"));
            let idx = |s: &str| s.parse::<usize>().map_err(|e| format!("{line}: {e}"));
            match parts[..] {
                ["#", "ising", count, "qubits"] => n = Some(idx(count)?),
                ["c", v] => constant = T::of(num(v)?),
                ["h", i, v] => terms.push(PauliTerm { support: vec![idx(i)?], coeff: T::of(num(v)?) }),
                ["J", i, j, v] => terms.push(PauliTerm { support: vec![idx(i)?, idx(j)?], coeff: T::of(num(v)?) }),
                _ => return Err(format!("unrecognized line: {line}")),
            }
        }
        let n = n.ok_or("missing header line")?;
        Ok(Self::from_terms(n, constant, &terms))
    }
}
