//! Pauli operators with phase, stored as packed x/z bit words.
//!
//! A `PauliOperator` is `phase · P_0 ⊗ P_1 ⊗ …` where each letter is one of
//! I, X, Y, Z and `(x, z) = (1, 1)` denotes the letter Y (not XZ).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::CliffordGate;
use crate::error::{Error, Result};

/// Fourth root of unity, stored as the exponent of `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Phase(u8);

impl Phase {
    pub const PLUS_ONE: Phase = Phase(0);
    pub const PLUS_I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: i64) -> Phase {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }

    /// `+1` or `-1` for real phases.
    pub fn sign(self) -> Option<i8> {
        match self.0 {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn negate(self) -> Phase {
        Phase((self.0 + 2) % 4)
    }

    pub fn to_complex(self) -> num_complex::Complex64 {
        use num_complex::Complex64 as C;
        match self.0 {
            0 => C::new(1.0, 0.0),
            1 => C::new(0.0, 1.0),
            2 => C::new(-1.0, 0.0),
            _ => C::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// Base-4 digit used by Pauli-vector indexing (I=0, X=1, Y=2, Z=3).
    pub fn code(self) -> usize {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    pub fn from_code(code: usize) -> Pauli {
        Pauli::ALL[code & 3]
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Exponent `e` with `P1 · P2 = i^e · P3` for single-qubit letters given as bits.
#[inline]
pub(crate) fn product_phase_exponent(x1: bool, z1: bool, x2: bool, z2: bool) -> i64 {
    let (x2, z2) = (x2 as i64, z2 as i64);
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 - x2,
        (true, false) => z2 * (2 * x2 - 1),
        (false, true) => x2 * (1 - 2 * z2),
    }
}

#[inline]
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

#[inline]
pub(crate) fn get_bit(words: &[u64], q: usize) -> bool {
    (words[q >> 6] >> (q & 63)) & 1 == 1
}

#[inline]
pub(crate) fn set_bit(words: &mut [u64], q: usize, value: bool) {
    let mask = 1u64 << (q & 63);
    if value {
        words[q >> 6] |= mask;
    } else {
        words[q >> 6] &= !mask;
    }
}

/// n-qubit Pauli operator with a phase in {±1, ±i}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: Phase,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        PauliOperator {
            n,
            x: vec![0; w],
            z: vec![0; w],
            phase: Phase::PLUS_ONE,
        }
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let mut p = PauliOperator::identity(letters.len());
        for (q, &l) in letters.iter().enumerate() {
            p.set_letter(q, l);
        }
        p
    }

    /// Builds a Pauli from `(qubit, letter)` pairs; unlisted qubits are identity.
    pub fn from_sparse(n: usize, terms: &[(usize, Pauli)]) -> Result<Self> {
        let mut p = PauliOperator::identity(n);
        for &(q, l) in terms {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n });
            }
            if p.letter(q) != Pauli::I {
                return Err(Error::param(format!("qubit {q} listed twice in Pauli")));
            }
            p.set_letter(q, l);
        }
        Ok(p)
    }

    /// Single-letter Pauli on qubit `q`.
    pub fn single(n: usize, q: usize, letter: Pauli) -> Result<Self> {
        PauliOperator::from_sparse(n, &[(q, letter)])
    }

    /// Inverse of [`PauliOperator::index`].
    pub fn from_index(n: usize, mut index: usize) -> Self {
        let mut p = PauliOperator::identity(n);
        for q in 0..n {
            p.set_letter(q, Pauli::from_code(index & 3));
            index >>= 2;
        }
        p
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    pub fn x_bit(&self, q: usize) -> bool {
        get_bit(&self.x, q)
    }

    pub fn z_bit(&self, q: usize) -> bool {
        get_bit(&self.z, q)
    }

    pub fn letter(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x_bit(q), self.z_bit(q))
    }

    pub fn set_letter(&mut self, q: usize, letter: Pauli) {
        let (x, z) = letter.bits();
        set_bit(&mut self.x, q, x);
        set_bit(&mut self.z, q, z);
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    pub fn is_identity_string(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    /// Qubits on which the operator acts non-trivially.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.letter(q) != Pauli::I).collect()
    }

    /// Pauli-vector index: `Σ_q code(P_q) · 4^q`. Phase is ignored.
    pub fn index(&self) -> usize {
        debug_assert!(self.n <= 31);
        (0..self.n)
            .map(|q| self.letter(q).code() << (2 * q))
            .sum()
    }

    /// Bitmasks `(x, z)` as plain integers; only valid for `n <= 64`.
    pub fn masks(&self) -> (u64, u64) {
        debug_assert!(self.n <= 64);
        (self.x[0], self.z[0])
    }

    pub fn commutes_with(&self, other: &PauliOperator) -> bool {
        let mut parity = 0u32;
        for w in 0..self.x.len() {
            parity ^= ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones() & 1;
        }
        parity == 0
    }

    /// Operator product `self · other`, tracking the phase.
    pub fn mul(&self, other: &PauliOperator) -> Result<PauliOperator> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut e: i64 = self.phase.exponent() as i64 + other.phase.exponent() as i64;
        for q in 0..self.n {
            e += product_phase_exponent(self.x_bit(q), self.z_bit(q), other.x_bit(q), other.z_bit(q));
        }
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect();
        let z = self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect();
        Ok(PauliOperator {
            n: self.n,
            x,
            z,
            phase: Phase::from_exponent(e),
        })
    }

    /// Heisenberg-picture conjugation `U P U†` by a Clifford gate.
    pub fn conjugate_by(&mut self, gate: &CliffordGate) {
        let flip = |p: &mut PauliOperator, cond: bool| {
            if cond {
                p.phase = p.phase.negate();
            }
        };
        match *gate {
            CliffordGate::H(a) => {
                let (x, z) = (self.x_bit(a), self.z_bit(a));
                flip(self, x && z);
                set_bit(&mut self.x, a, z);
                set_bit(&mut self.z, a, x);
            }
            CliffordGate::S(a) => {
                let (x, z) = (self.x_bit(a), self.z_bit(a));
                flip(self, x && z);
                set_bit(&mut self.z, a, z ^ x);
            }
            CliffordGate::Sdg(a) => {
                let (x, z) = (self.x_bit(a), self.z_bit(a));
                flip(self, x && !z);
                set_bit(&mut self.z, a, z ^ x);
            }
            CliffordGate::X(a) => {
                let z = self.z_bit(a);
                flip(self, z);
            }
            CliffordGate::Y(a) => {
                let (x, z) = (self.x_bit(a), self.z_bit(a));
                flip(self, x ^ z);
            }
            CliffordGate::Z(a) => {
                let x = self.x_bit(a);
                flip(self, x);
            }
            CliffordGate::Cnot(c, t) => {
                let (xc, zc, xt, zt) = (self.x_bit(c), self.z_bit(c), self.x_bit(t), self.z_bit(t));
                flip(self, xc && zt && !(xt ^ zc));
                set_bit(&mut self.x, t, xt ^ xc);
                set_bit(&mut self.z, c, zc ^ zt);
            }
            CliffordGate::Cz(a, b) => {
                self.conjugate_by(&CliffordGate::H(b));
                self.conjugate_by(&CliffordGate::Cnot(a, b));
                self.conjugate_by(&CliffordGate::H(b));
            }
        }
    }

    /// Compact letter string with sign prefix, e.g. `-XIZ` (qubit 0 first).
    pub fn to_letter_string(&self) -> String {
        let mut s = String::with_capacity(self.n + 2);
        s.push_str(match self.phase.exponent() {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        });
        for q in 0..self.n {
            s.push(self.letter(q).as_char());
        }
        s
    }

    /// Sparse form used by the circuit text format, e.g. `Z0 X2`.
    /// A negative sign is written as a leading `-`.
    pub fn to_sparse_string(&self) -> String {
        let mut parts: Vec<String> = (0..self.n)
            .filter(|&q| self.letter(q) != Pauli::I)
            .map(|q| format!("{}{}", self.letter(q).as_char(), q))
            .collect();
        if parts.is_empty() {
            parts.push("I".into());
        }
        let body = parts.join(" ");
        match self.phase.exponent() {
            0 => body,
            2 => format!("-{body}"),
            1 => format!("i{body}"),
            _ => format!("-i{body}"),
        }
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_letter_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliOperator {
        PauliOperator::from_letters(&s.chars().map(|c| Pauli::from_char(c).unwrap()).collect::<Vec<_>>())
    }

    #[test]
    fn single_qubit_products() {
        // XY = iZ, YZ = iX, ZX = iY
        let xy = p("X").mul(&p("Y")).unwrap();
        assert_eq!(xy.letter(0), Pauli::Z);
        assert_eq!(xy.phase(), Phase::PLUS_I);
        let yz = p("Y").mul(&p("Z")).unwrap();
        assert_eq!(yz.letter(0), Pauli::X);
        assert_eq!(yz.phase(), Phase::PLUS_I);
        let zx = p("Z").mul(&p("X")).unwrap();
        assert_eq!(zx.letter(0), Pauli::Y);
        assert_eq!(zx.phase(), Phase::PLUS_I);
        let yx = p("Y").mul(&p("X")).unwrap();
        assert_eq!(yx.phase(), Phase::MINUS_I);
    }

    #[test]
    fn commutation() {
        assert!(p("XX").commutes_with(&p("ZZ")));
        assert!(!p("XI").commutes_with(&p("ZI")));
        assert!(p("XY").commutes_with(&p("YX")));
    }

    #[test]
    fn index_roundtrip() {
        for idx in 0..64 {
            assert_eq!(PauliOperator::from_index(3, idx).index(), idx);
        }
        assert_eq!(p("IZ").index(), 3 << 2);
    }

    #[test]
    fn gate_conjugation_rules() {
        let mut x = p("X");
        x.conjugate_by(&CliffordGate::S(0));
        assert_eq!(x, p("Y"));
        let mut y = p("Y");
        y.conjugate_by(&CliffordGate::S(0));
        assert_eq!(y, p("X").with_phase(Phase::MINUS_ONE));
        let mut x = p("X");
        x.conjugate_by(&CliffordGate::Sdg(0));
        assert_eq!(x, p("Y").with_phase(Phase::MINUS_ONE));
        let mut y = p("Y");
        y.conjugate_by(&CliffordGate::H(0));
        assert_eq!(y, p("Y").with_phase(Phase::MINUS_ONE));
        let mut xi = p("XI");
        xi.conjugate_by(&CliffordGate::Cnot(0, 1));
        assert_eq!(xi, p("XX"));
        let mut iz = p("IZ");
        iz.conjugate_by(&CliffordGate::Cnot(0, 1));
        assert_eq!(iz, p("ZZ"));
        let mut xi = p("XI");
        xi.conjugate_by(&CliffordGate::Cz(0, 1));
        assert_eq!(xi, p("XZ"));
    }

    #[test]
    fn sparse_format() {
        let op = PauliOperator::from_sparse(3, &[(0, Pauli::Z), (2, Pauli::X)]).unwrap();
        assert_eq!(op.to_sparse_string(), "Z0 X2");
        assert!(PauliOperator::from_sparse(2, &[(2, Pauli::Z)]).is_err());
    }
}
