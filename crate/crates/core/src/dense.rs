//! Dense ground-truth simulation: operators on up to [`DENSE_QUBIT_CAP`] qubits.
//!
//! Basis index bit `q` is the state of qubit `q` (qubit 0 least significant),
//! so `a.tensor(&b)` places `a` on the low qubits and `b` on the high ones.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::circuit::CliffordGate;
use crate::error::{check_rate, Error, Result};
use crate::pauli::{Pauli, PauliOperator};

/// Hard limit for dense simulation.
pub const DENSE_QUBIT_CAP: usize = 12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];

pub(crate) fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_QUBIT_CAP {
        return Err(Error::Capacity(format!(
            "{n} qubits exceeds the dense-oracle cap of {DENSE_QUBIT_CAP}"
        )));
    }
    Ok(())
}

pub fn t_matrix() -> Mat2 {
    [[ONE, ZERO], [ZERO, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]]
}

pub fn pauli_matrix(p: Pauli) -> Mat2 {
    let i = C64::new(0.0, 1.0);
    match p {
        Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
        Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
        Pauli::Y => [[ZERO, -i], [i, ZERO]],
        Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

/// Matrix of a single-qubit Clifford, or `None` for two-qubit gates.
pub fn single_qubit_matrix(g: &CliffordGate) -> Option<Mat2> {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, 1.0);
    Some(match g {
        CliffordGate::H(_) => [[h, h], [h, -h]],
        CliffordGate::S(_) => [[ONE, ZERO], [ZERO, i]],
        CliffordGate::Sdg(_) => [[ONE, ZERO], [ZERO, -i]],
        CliffordGate::X(_) => pauli_matrix(Pauli::X),
        CliffordGate::Y(_) => pauli_matrix(Pauli::Y),
        CliffordGate::Z(_) => pauli_matrix(Pauli::Z),
        _ => return None,
    })
}

/// 4×4 matrix in the basis `b_first + 2 b_second` for two-qubit gates.
pub fn two_qubit_matrix(g: &CliffordGate) -> Option<Mat4> {
    let mut m = [[ZERO; 4]; 4];
    match g {
        CliffordGate::Cnot(..) => {
            // control = first (bit 0), target = second (bit 1)
            m[0][0] = ONE;
            m[2][2] = ONE;
            m[3][1] = ONE;
            m[1][3] = ONE;
        }
        CliffordGate::Cz(..) => {
            m[0][0] = ONE;
            m[1][1] = ONE;
            m[2][2] = ONE;
            m[3][3] = -ONE;
        }
        _ => return None,
    }
    Some(m)
}

/// Sign pattern and flip mask for a Pauli string acting on basis states:
/// `P|j⟩ = phase · (-1)^{|j & z|} · i^{#Y} |j ⊕ x⟩`.
fn pauli_action(p: &PauliOperator) -> (usize, usize, C64) {
    let (x, z) = p.masks();
    let ny = (x & z).count_ones();
    let mut c = p.phase().to_complex();
    for _ in 0..ny {
        c *= C64::new(0.0, 1.0);
    }
    (x as usize, z as usize, c)
}

#[inline]
fn parity_sign(j: usize, z: usize) -> f64 {
    if (j & z).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// General (not necessarily positive) linear operator on n qubits, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    n: usize,
    dim: usize,
    data: Vec<C64>,
}

impl Operator {
    pub fn zeros(n: usize) -> Result<Self> {
        check_cap(n)?;
        let dim = 1usize << n;
        Ok(Operator {
            n,
            dim,
            data: vec![ZERO; dim * dim],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut o = Operator::zeros(n)?;
        for i in 0..o.dim {
            o.data[i * o.dim + i] = ONE;
        }
        Ok(o)
    }

    /// `|i⟩⟨j|`.
    pub fn basis_element(n: usize, i: usize, j: usize) -> Result<Self> {
        let mut o = Operator::zeros(n)?;
        o.data[i * o.dim + j] = ONE;
        Ok(o)
    }

    pub fn from_pure(amps: &[C64]) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() || dim == 0 {
            return Err(Error::param("state vector length must be a power of two"));
        }
        let n = dim.trailing_zeros() as usize;
        let mut o = Operator::zeros(n)?;
        for r in 0..dim {
            for c in 0..dim {
                o.data[r * dim + c] = amps[r] * amps[c].conj();
            }
        }
        Ok(o)
    }

    /// The Pauli operator itself as a matrix.
    pub fn from_pauli(p: &PauliOperator) -> Result<Self> {
        let mut o = Operator::zeros(p.num_qubits())?;
        let (x, z, c) = pauli_action(p);
        for k in 0..o.dim {
            o.data[(k ^ x) * o.dim + k] = c * parity_sign(k, z);
        }
        Ok(o)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale(s);
        self
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &Operator, s: f64) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
        Ok(())
    }

    fn same_shape(&self, other: &Operator) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Kronecker product with `self` on the low qubits.
    pub fn tensor(&self, high: &Operator) -> Result<Operator> {
        let n = self.n + high.n;
        let mut out = Operator::zeros(n)?;
        let dl = self.dim;
        for hr in 0..high.dim {
            for hc in 0..high.dim {
                let hv = high.data[hr * high.dim + hc];
                if hv == ZERO {
                    continue;
                }
                for lr in 0..dl {
                    for lc in 0..dl {
                        let r = lr + dl * hr;
                        let c = lc + dl * hc;
                        out.data[r * out.dim + c] = self.data[lr * dl + lc] * hv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        self.same_shape(other)?;
        let d = self.dim;
        let mut out = Operator::zeros(self.n)?;
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    out.data[r * d + c] += a * other.data[k * d + c];
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Operator {
        let d = self.dim;
        let mut out = self.clone();
        for r in 0..d {
            for c in 0..d {
                out.data[c * d + r] = self.data[r * d + c].conj();
            }
        }
        out
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        Ok(())
    }

    /// `ρ → U ρ U†` for a single-qubit unitary.
    pub fn conjugate_1q(&mut self, q: usize, u: &Mat2) -> Result<()> {
        self.check_qubit(q)?;
        let d = self.dim;
        let bit = 1usize << q;
        // left: rows
        for r0 in (0..d).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            for c in 0..d {
                let (a, b) = (self.data[r0 * d + c], self.data[r1 * d + c]);
                self.data[r0 * d + c] = u[0][0] * a + u[0][1] * b;
                self.data[r1 * d + c] = u[1][0] * a + u[1][1] * b;
            }
        }
        // right: columns, multiply by U†
        for r in 0..d {
            let row = &mut self.data[r * d..(r + 1) * d];
            for c0 in (0..d).filter(|c| c & bit == 0) {
                let c1 = c0 | bit;
                let (a, b) = (row[c0], row[c1]);
                row[c0] = u[0][0].conj() * a + u[0][1].conj() * b;
                row[c1] = u[1][0].conj() * a + u[1][1].conj() * b;
            }
        }
        Ok(())
    }

    /// `ρ → U ρ U†` for a two-qubit unitary in the basis `b_a + 2 b_b`.
    pub fn conjugate_2q(&mut self, a: usize, b: usize, u: &Mat4) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::param("two-qubit unitary on repeated qubit"));
        }
        let d = self.dim;
        let (ba, bb) = (1usize << a, 1usize << b);
        let idx = |base: usize| [base, base | ba, base | bb, base | ba | bb];
        let bases: Vec<usize> = (0..d).filter(|i| i & (ba | bb) == 0).collect();
        for &base in &bases {
            let rows = idx(base);
            for c in 0..d {
                let v: [C64; 4] = std::array::from_fn(|k| self.data[rows[k] * d + c]);
                for (k, &r) in rows.iter().enumerate() {
                    self.data[r * d + c] = (0..4).map(|m| u[k][m] * v[m]).sum();
                }
            }
        }
        for r in 0..d {
            let row = &mut self.data[r * d..(r + 1) * d];
            for &base in &bases {
                let cols = idx(base);
                let v: [C64; 4] = std::array::from_fn(|k| row[cols[k]]);
                for (k, &c) in cols.iter().enumerate() {
                    row[c] = (0..4).map(|m| u[k][m].conj() * v[m]).sum();
                }
            }
        }
        Ok(())
    }

    pub fn apply_clifford(&mut self, g: &CliffordGate) -> Result<()> {
        match *g {
            CliffordGate::Cnot(a, b) | CliffordGate::Cz(a, b) => {
                self.conjugate_2q(a, b, &two_qubit_matrix(g).expect("two-qubit gate"))
            }
            _ => self.conjugate_1q(g.qubits()[0], &single_qubit_matrix(g).expect("one-qubit gate")),
        }
    }

    pub fn apply_t(&mut self, q: usize) -> Result<()> {
        self.conjugate_1q(q, &t_matrix())
    }

    /// `ρ → P ρ P†` for a Pauli string (phase irrelevant).
    pub fn conjugate_pauli(&mut self, p: &PauliOperator) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        let (x, z, _) = pauli_action(p);
        let d = self.dim;
        let old = self.data.clone();
        for r in 0..d {
            for c in 0..d {
                let (rs, cs) = (r ^ x, c ^ x);
                self.data[r * d + c] = old[rs * d + cs] * (parity_sign(rs, z) * parity_sign(cs, z));
            }
        }
        Ok(())
    }

    /// `Tr(P ρ)`.
    pub fn expectation_complex(&self, p: &PauliOperator) -> Result<C64> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        let (x, z, c) = pauli_action(p);
        let d = self.dim;
        let mut acc = ZERO;
        for k in 0..d {
            acc += self.data[k * d + (k ^ x)] * parity_sign(k, z);
        }
        Ok(acc * c)
    }

    /// Real part of `Tr(P ρ)`; exact for Hermitian operators.
    pub fn expectation(&self, p: &PauliOperator) -> Result<f64> {
        Ok(self.expectation_complex(p)?.re)
    }

    /// Replaces the state of qubit `q` by `I/2` (`¼ Σ_P P ρ P`).
    pub fn fully_depolarize(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let d = self.dim;
        let bit = 1usize << q;
        let old = self.data.clone();
        for r in 0..d {
            for c in 0..d {
                self.data[r * d + c] = if (r ^ c) & bit != 0 {
                    ZERO
                } else {
                    0.5 * (old[r * d + c] + old[(r ^ bit) * d + (c ^ bit)])
                };
            }
        }
        Ok(())
    }

    /// `(1-δ) ρ + δ 𝒢(ρ)` with `𝒢` the full depolarizer on `qubits`.
    pub fn depolarize(&mut self, delta: f64, qubits: &[usize]) -> Result<()> {
        check_rate("depolarizing rate", delta)?;
        if delta == 0.0 {
            return Ok(());
        }
        let mut g = self.clone();
        for &q in qubits {
            g.fully_depolarize(q)?;
        }
        self.scale(1.0 - delta);
        self.add_scaled(&g, delta)
    }

    /// Removes off-diagonal elements in qubit `q`'s computational basis.
    pub fn dephase(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let d = self.dim;
        let bit = 1usize << q;
        for r in 0..d {
            for c in 0..d {
                if (r ^ c) & bit != 0 {
                    self.data[r * d + c] = ZERO;
                }
            }
        }
        Ok(())
    }

    /// Unnormalized branch `Π_b ρ Π_b` for Z outcome `±1` on qubit `q`.
    pub fn project_z(&self, q: usize, outcome: i8) -> Result<Operator> {
        self.check_qubit(q)?;
        let d = self.dim;
        let bit = 1usize << q;
        let want = if outcome == 1 { 0 } else { bit };
        let mut out = self.clone();
        for r in 0..d {
            for c in 0..d {
                if r & bit != want || c & bit != want {
                    out.data[r * d + c] = ZERO;
                }
            }
        }
        Ok(out)
    }

    /// Traces out the highest `k` qubits.
    pub fn trace_out_high(&self, k: usize) -> Result<Operator> {
        if k > self.n {
            return Err(Error::param("cannot trace out more qubits than present"));
        }
        let n = self.n - k;
        let mut out = Operator::zeros(n)?;
        let dl = out.dim;
        for h in 0..(1usize << k) {
            for r in 0..dl {
                for c in 0..dl {
                    out.data[r * dl + c] += self.data[(r + dl * h) * self.dim + (c + dl * h)];
                }
            }
        }
        Ok(out)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim;
        (0..d).all(|r| (r..d).all(|c| (self.data[r * d + c] - self.data[c * d + r].conj()).norm() <= tol))
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.data[r * self.dim + c])
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let m = self.to_nalgebra();
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Expectations `Tr(P ρ)` for every Pauli string, indexed as in [`PauliOperator::index`].
    pub fn pauli_coordinates(&self) -> Vec<f64> {
        (0..1usize << (2 * self.n))
            .map(|idx| {
                self.expectation(&PauliOperator::from_index(self.n, idx))
                    .expect("matching size")
            })
            .collect()
    }

    /// `Σ_P v_P P / 2^n`.
    pub fn from_pauli_coordinates(n: usize, coords: &[f64]) -> Result<Operator> {
        if coords.len() != 1usize << (2 * n) {
            return Err(Error::DimensionMismatch {
                expected: 1usize << (2 * n),
                found: coords.len(),
            });
        }
        let mut out = Operator::zeros(n)?;
        let norm = 1.0 / (1usize << n) as f64;
        for (idx, &v) in coords.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let p = PauliOperator::from_index(n, idx);
            let (x, z, c) = pauli_action(&p);
            for k in 0..out.dim {
                out.data[(k ^ x) * out.dim + k] += c * (parity_sign(k, z) * v * norm);
            }
        }
        Ok(out)
    }
}

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-12;
    pub const EIGEN_TOL: f64 = 1e-10;

    pub fn new(op: Operator) -> Result<Self> {
        if !op.is_hermitian(1e-10) {
            return Err(Error::Numerical("density matrix is not Hermitian".into()));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::Numerical(format!("density matrix trace {tr} ≠ 1")));
        }
        if let Some(&min) = op.hermitian_eigenvalues().first() {
            if min < -Self::EIGEN_TOL {
                return Err(Error::Numerical(format!("density matrix has eigenvalue {min}")));
            }
        }
        Ok(DensityMatrix(op))
    }

    /// Wraps without the eigenvalue check; used internally where positivity is structural.
    pub(crate) fn assume_valid(op: Operator) -> Self {
        DensityMatrix(op)
    }

    pub fn zero_state(n: usize) -> Result<Self> {
        Ok(DensityMatrix(Operator::basis_element(n, 0, 0)?))
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let id = Operator::identity(n)?;
        let d = id.dim() as f64;
        Ok(DensityMatrix(id.scaled(1.0 / d)))
    }

    pub fn from_pure(amps: &[C64]) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!("state vector norm² {norm} ≠ 1")));
        }
        Ok(DensityMatrix(Operator::from_pure(amps)?))
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn num_qubits(&self) -> usize {
        self.0.num_qubits()
    }

    pub fn tensor(&self, high: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix(self.0.tensor(&high.0)?))
    }

    pub fn purity(&self) -> f64 {
        self.0.data().iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn expectation(&self, p: &PauliOperator) -> Result<f64> {
        self.0.expectation(p)
    }

    /// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of a single-qubit state.
    pub fn bloch(&self) -> Result<[f64; 3]> {
        if self.num_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: self.num_qubits(),
            });
        }
        let e = |p| self.0.expectation(&PauliOperator::from_letters(&[p]));
        Ok([e(Pauli::X)?, e(Pauli::Y)?, e(Pauli::Z)?])
    }

    pub fn apply(&mut self, channel: &Channel) -> Result<()> {
        channel.apply(&mut self.0)
    }

    /// Spectral decomposition `(p_k, |v_k⟩)` with negligible weights dropped.
    pub fn spectral_mixture(&self) -> Vec<(f64, Vec<C64>)> {
        let m = self.0.to_nalgebra();
        let eig = m.symmetric_eigen();
        let mut out = Vec::new();
        for (k, &p) in eig.eigenvalues.iter().enumerate() {
            if p > 1e-14 {
                let v = eig.eigenvectors.column(k).iter().copied().collect();
                out.push((p, v));
            }
        }
        let total: f64 = out.iter().map(|(p, _)| p).sum();
        for (p, _) in &mut out {
            *p /= total;
        }
        out
    }
}

/// Dense channels used by the oracle and by channel-level mitigation checks.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Clifford(CliffordGate),
    T(usize),
    Pauli(PauliOperator),
    /// `(1-δ) ρ + δ 𝒢(ρ)` on the listed qubits.
    Depolarize { delta: f64, qubits: Vec<usize> },
    Dephase(usize),
    Sequence(Vec<Channel>),
}

impl Channel {
    pub fn apply(&self, op: &mut Operator) -> Result<()> {
        match self {
            Channel::Clifford(g) => op.apply_clifford(g),
            Channel::T(q) => op.apply_t(*q),
            Channel::Pauli(p) => op.conjugate_pauli(p),
            Channel::Depolarize { delta, qubits } => op.depolarize(*delta, qubits),
            Channel::Dephase(q) => op.dephase(*q),
            Channel::Sequence(cs) => cs.iter().try_for_each(|c| c.apply(op)),
        }
    }
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ E(|i⟩⟨j|)` of a linear map on `n` qubits.
/// The input copy occupies the low qubits.
pub fn choi_matrix(n: usize, map: impl Fn(&mut Operator) -> Result<()>) -> Result<Operator> {
    check_cap(2 * n)?;
    let d = 1usize << n;
    let mut out = Operator::zeros(2 * n)?;
    for i in 0..d {
        for j in 0..d {
            let mut e = Operator::basis_element(n, i, j)?;
            map(&mut e)?;
            let block = Operator::basis_element(n, i, j)?.tensor(&e)?;
            out.add_scaled(&block, 1.0)?;
        }
    }
    Ok(out)
}

/// Pure state vector used by trajectory sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero_state(n: usize) -> Result<Self> {
        check_cap(n)?;
        let mut amps = vec![ZERO; 1usize << n];
        amps[0] = ONE;
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::param("amplitude count must be a power of two"));
        }
        let n = amps.len().trailing_zeros() as usize;
        check_cap(n)?;
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        Ok(())
    }

    pub fn apply_1q(&mut self, q: usize, u: &Mat2) -> Result<()> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        for i0 in (0..self.amps.len()).filter(|i| i & bit == 0) {
            let i1 = i0 | bit;
            let (a, b) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = u[0][0] * a + u[0][1] * b;
            self.amps[i1] = u[1][0] * a + u[1][1] * b;
        }
        Ok(())
    }

    pub fn apply_clifford(&mut self, g: &CliffordGate) -> Result<()> {
        match *g {
            CliffordGate::Cnot(c, t) => {
                self.check_qubit(c)?;
                self.check_qubit(t)?;
                let (bc, bt) = (1usize << c, 1usize << t);
                for i in 0..self.amps.len() {
                    if i & bc != 0 && i & bt == 0 {
                        self.amps.swap(i, i | bt);
                    }
                }
                Ok(())
            }
            CliffordGate::Cz(a, b) => {
                self.check_qubit(a)?;
                self.check_qubit(b)?;
                let m = (1usize << a) | (1usize << b);
                for (i, v) in self.amps.iter_mut().enumerate() {
                    if i & m == m {
                        *v = -*v;
                    }
                }
                Ok(())
            }
            _ => self.apply_1q(g.qubits()[0], &single_qubit_matrix(g).expect("one-qubit gate")),
        }
    }

    pub fn apply_t(&mut self, q: usize) -> Result<()> {
        self.apply_1q(q, &t_matrix())
    }

    /// Applies a Pauli string (phase dropped).
    pub fn apply_pauli(&mut self, p: &PauliOperator) -> Result<()> {
        for q in p.support() {
            self.apply_1q(q, &pauli_matrix(p.letter(q)))?;
        }
        Ok(())
    }

    pub fn expectation(&self, p: &PauliOperator) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        let (x, z, c) = pauli_action(p);
        let mut acc = ZERO;
        for (k, a) in self.amps.iter().enumerate() {
            // ⟨ψ|P|ψ⟩ = Σ_k conj(ψ_{k⊕x}) c s(k) ψ_k
            acc += self.amps[k ^ x].conj() * a * parity_sign(k, z);
        }
        Ok((acc * c).re)
    }

    /// Projective Z measurement with collapse.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<i8> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        let p0: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let outcome: i8 = if rng.gen::<f64>() < p0 { 1 } else { -1 };
        let keep = if outcome == 1 { 0 } else { bit };
        let norm = if outcome == 1 { p0 } else { 1.0 - p0 }.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit == keep {
                *a /= norm;
            } else {
                *a = ZERO;
            }
        }
        Ok(outcome)
    }

    /// Samples a terminal Pauli measurement (no collapse needed afterwards).
    pub fn sample_pauli<R: Rng + ?Sized>(&self, p: &PauliOperator, rng: &mut R) -> Result<i8> {
        let e = self.expectation(p)?;
        let p_plus = (0.5 * (1.0 + e)).clamp(0.0, 1.0);
        Ok(if rng.gen::<f64>() < p_plus { 1 } else { -1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{tau, tau_delta};

    fn z1() -> PauliOperator {
        PauliOperator::from_letters(&[Pauli::Z])
    }

    fn x1() -> PauliOperator {
        PauliOperator::from_letters(&[Pauli::X])
    }

    #[test]
    fn expectation_of_z_on_zero() {
        let rho = DensityMatrix::zero_state(1).unwrap();
        assert!((rho.expectation(&z1()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_of_x_on_tau() {
        let t = tau();
        assert!((t.expectation(&x1()).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        let t = tau_delta(0.1).unwrap();
        assert!((t.expectation(&x1()).unwrap() - 0.9 * FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((0.9 * FRAC_1_SQRT_2 - 0.6364).abs() < 1e-4);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let rho = DensityMatrix::zero_state(2).unwrap();
        assert!(matches!(rho.expectation(&z1()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn full_depolarization_gives_maximally_mixed() {
        let mut rho = tau().into_operator();
        rho.depolarize(1.0, &[0]).unwrap();
        let mm = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(rho.max_abs_diff(mm.operator()).unwrap() < 1e-15);
        assert!(rho.depolarize(1.5, &[0]).is_err());
    }

    #[test]
    fn dephasing_tau_leaves_diagonal() {
        let mut rho = tau().into_operator();
        rho.dephase(0).unwrap();
        let mm = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(rho.max_abs_diff(mm.operator()).unwrap() < 1e-15);
    }

    #[test]
    fn depolarizing_composes() {
        let delta = 0.17;
        let start = tau().tensor(&tau_delta(0.3).unwrap()).unwrap().into_operator();
        let mut twice = start.clone();
        twice.depolarize(delta, &[0, 1]).unwrap();
        twice.depolarize(delta, &[0, 1]).unwrap();
        let mut once = start;
        once.depolarize(1.0 - (1.0 - delta) * (1.0 - delta), &[0, 1]).unwrap();
        assert!(twice.max_abs_diff(&once).unwrap() < 1e-15);
        assert!((twice.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_coordinate_roundtrip() {
        let rho = tau().tensor(&tau_delta(0.2).unwrap()).unwrap();
        let coords = rho.operator().pauli_coordinates();
        assert!((coords[0] - 1.0).abs() < 1e-15);
        let back = Operator::from_pauli_coordinates(2, &coords).unwrap();
        assert!(back.max_abs_diff(rho.operator()).unwrap() < 1e-14);
    }

    #[test]
    fn statevector_and_density_agree() {
        let gates = [CliffordGate::H(0), CliffordGate::Cnot(0, 1), CliffordGate::S(1), CliffordGate::Cz(1, 2), CliffordGate::H(2)];
        let mut sv = StateVector::zero_state(3).unwrap();
        let mut rho = DensityMatrix::zero_state(3).unwrap().into_operator();
        for g in &gates {
            sv.apply_clifford(g).unwrap();
            rho.apply_clifford(g).unwrap();
        }
        sv.apply_t(0).unwrap();
        rho.apply_t(0).unwrap();
        for idx in 0..64 {
            let p = PauliOperator::from_index(3, idx);
            assert!((sv.expectation(&p).unwrap() - rho.expectation(&p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(Operator::zeros(13), Err(Error::Capacity(_))));
        assert!(StateVector::zero_state(13).is_err());
    }

    #[test]
    fn choi_of_identity_is_unnormalized_bell() {
        let c = choi_matrix(1, |_| Ok(())).unwrap();
        // |Φ⟩ = |00⟩ + |11⟩ unnormalized
        assert_eq!(c.get(0, 0), ONE);
        assert_eq!(c.get(0, 3), ONE);
        assert_eq!(c.get(3, 3), ONE);
        assert_eq!(c.get(1, 1), ZERO);
    }

    #[test]
    fn invalid_density_rejected() {
        let mut op = Operator::zeros(1).unwrap();
        op.set(0, 0, C64::new(1.5, 0.0));
        op.set(1, 1, C64::new(-0.5, 0.0));
        assert!(DensityMatrix::new(op).is_err());
    }
}
