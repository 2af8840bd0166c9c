//! Destabilizer/stabilizer tableau (Aaronson–Gottesman layout).
//!
//! Rows `0..n` are destabilizers, rows `n..2n` stabilizers, row `2n` is
//! scratch space. Each row packs its x and z bits into 64-bit words.

use rand::Rng;

use crate::circuit::CliffordGate;
use crate::error::{Error, Result};
use crate::pauli::{get_bit, set_bit, words_for, Pauli, PauliOperator, Phase};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StabilizerTableau {
    n: usize,
    words: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<bool>,
}

/// Result of a Pauli measurement on a tableau.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measurement {
    pub outcome: i8,
    pub deterministic: bool,
}

impl StabilizerTableau {
    /// `|0…0⟩`: destabilizers `X_i`, stabilizers `Z_i`.
    pub fn new(n: usize) -> Self {
        let words = words_for(n);
        let rows = 2 * n + 1;
        let mut t = StabilizerTableau {
            n,
            words,
            x: vec![0; rows * words],
            z: vec![0; rows * words],
            r: vec![false; rows],
        };
        for i in 0..n {
            set_bit(t.row_x_mut(i), i, true);
            set_bit(t.row_z_mut(i + n), i, true);
        }
        t
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn row_x(&self, i: usize) -> &[u64] {
        &self.x[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    fn row_z(&self, i: usize) -> &[u64] {
        &self.z[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    fn row_x_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.x[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    fn row_z_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.z[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    fn xb(&self, i: usize, q: usize) -> bool {
        get_bit(self.row_x(i), q)
    }

    #[inline]
    fn zb(&self, i: usize, q: usize) -> bool {
        get_bit(self.row_z(i), q)
    }

    fn row_pauli(&self, i: usize) -> PauliOperator {
        let mut p = PauliOperator::identity(self.n);
        for q in 0..self.n {
            p.set_letter(q, Pauli::from_bits(self.xb(i, q), self.zb(i, q)));
        }
        p.with_phase(if self.r[i] { Phase::MINUS_ONE } else { Phase::PLUS_ONE })
    }

    pub fn stabilizer(&self, i: usize) -> PauliOperator {
        self.row_pauli(self.n + i)
    }

    pub fn destabilizer(&self, i: usize) -> PauliOperator {
        self.row_pauli(i)
    }

    pub fn stabilizers(&self) -> Vec<PauliOperator> {
        (0..self.n).map(|i| self.stabilizer(i)).collect()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        Ok(())
    }

    /// Conjugates every row by `gate`.
    pub fn apply_gate(&mut self, gate: &CliffordGate) -> Result<()> {
        gate.check(self.n)?;
        let rows = 2 * self.n;
        let wx = |q: usize| (q >> 6, 1u64 << (q & 63));
        match *gate {
            CliffordGate::H(a) => {
                let (w, m) = (a >> 6, 1u64 << (a & 63));
                for i in 0..rows {
                    let k = i * self.words + w;
                    let (x, z) = (self.x[k] & m, self.z[k] & m);
                    if x != 0 && z != 0 {
                        self.r[i] ^= true;
                    }
                    self.x[k] = (self.x[k] & !m) | z;
                    self.z[k] = (self.z[k] & !m) | x;
                }
            }
            CliffordGate::S(a) => {
                let (w, m) = (a >> 6, 1u64 << (a & 63));
                for i in 0..rows {
                    let k = i * self.words + w;
                    let (x, z) = (self.x[k] & m, self.z[k] & m);
                    if x != 0 && z != 0 {
                        self.r[i] ^= true;
                    }
                    self.z[k] ^= x;
                }
            }
            CliffordGate::Sdg(a) => {
                let (w, m) = (a >> 6, 1u64 << (a & 63));
                for i in 0..rows {
                    let k = i * self.words + w;
                    let (x, z) = (self.x[k] & m, self.z[k] & m);
                    if x != 0 && z == 0 {
                        self.r[i] ^= true;
                    }
                    self.z[k] ^= x;
                }
            }
            CliffordGate::X(a) | CliffordGate::Y(a) | CliffordGate::Z(a) => {
                let (w, m) = (a >> 6, 1u64 << (a & 63));
                for i in 0..rows {
                    let k = i * self.words + w;
                    let (x, z) = (self.x[k] & m != 0, self.z[k] & m != 0);
                    let flip = match gate {
                        CliffordGate::X(_) => z,
                        CliffordGate::Z(_) => x,
                        _ => x ^ z,
                    };
                    self.r[i] ^= flip;
                }
            }
            CliffordGate::Cnot(c, t) => {
                let ((wc, mc), (wt, mt)) = (wx(c), wx(t));
                for i in 0..rows {
                    let base = i * self.words;
                    let xc = self.x[base + wc] & mc != 0;
                    let zc = self.z[base + wc] & mc != 0;
                    let xt = self.x[base + wt] & mt != 0;
                    let zt = self.z[base + wt] & mt != 0;
                    if xc && zt && !(xt ^ zc) {
                        self.r[i] ^= true;
                    }
                    if xc {
                        self.x[base + wt] ^= mt;
                    }
                    if zt {
                        self.z[base + wc] ^= mc;
                    }
                }
            }
            CliffordGate::Cz(a, b) => {
                self.apply_gate(&CliffordGate::H(b))?;
                self.apply_gate(&CliffordGate::Cnot(a, b))?;
                self.apply_gate(&CliffordGate::H(b))?;
                return Ok(());
            }
        }
        #[cfg(debug_assertions)]
        if self.n <= 16 {
            debug_assert!(self.is_symplectic(), "tableau lost symplectic structure after {gate:?}");
        }
        Ok(())
    }

    /// Consuming variant of [`apply_gate`](Self::apply_gate).
    pub fn applied(mut self, gate: &CliffordGate) -> Result<Self> {
        self.apply_gate(gate)?;
        Ok(self)
    }

    /// Sets row `h` to `row_i · row_h`, with the sign given by the phase sum.
    fn rowsum(&mut self, h: usize, i: usize) {
        let mut plus = 0i64;
        let mut minus = 0i64;
        for w in 0..self.words {
            let (x1, z1) = (self.x[i * self.words + w], self.z[i * self.words + w]);
            let (x2, z2) = (self.x[h * self.words + w], self.z[h * self.words + w]);
            let p = (x1 & z1 & !x2 & z2) | (x1 & !z1 & x2 & z2) | (!x1 & z1 & x2 & !z2);
            let m = (x1 & z1 & x2 & !z2) | (x1 & !z1 & !x2 & z2) | (!x1 & z1 & x2 & z2);
            plus += p.count_ones() as i64;
            minus += m.count_ones() as i64;
        }
        let e = 2 * self.r[h] as i64 + 2 * self.r[i] as i64 + plus - minus;
        self.r[h] = e.rem_euclid(4) >= 2;
        for w in 0..self.words {
            self.x[h * self.words + w] ^= self.x[i * self.words + w];
            self.z[h * self.words + w] ^= self.z[i * self.words + w];
        }
    }

    fn row_anticommutes(&self, i: usize, p: &PauliOperator) -> bool {
        let mut parity = 0u32;
        for (w, (px, pz)) in p.x_words().iter().zip(p.z_words()).enumerate() {
            let (x, z) = (self.x[i * self.words + w], self.z[i * self.words + w]);
            parity ^= ((x & pz) ^ (z & px)).count_ones() & 1;
        }
        parity == 1
    }

    fn check_pauli(&self, pauli: &PauliOperator) -> Result<()> {
        if pauli.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: pauli.num_qubits(),
            });
        }
        if !pauli.is_hermitian() {
            return Err(Error::param("measured Pauli must be Hermitian"));
        }
        Ok(())
    }

    /// Outcome of measuring `pauli` if it is determined by the state.
    pub fn deterministic_outcome(&self, pauli: &PauliOperator) -> Result<Option<i8>> {
        self.check_pauli(pauli)?;
        if (self.n..2 * self.n).any(|i| self.row_anticommutes(i, pauli)) {
            return Ok(None);
        }
        Ok(Some(self.group_sign(pauli)))
    }

    /// Sign with which `pauli` (known to be in the stabilizer group up to sign) appears.
    fn group_sign(&self, pauli: &PauliOperator) -> i8 {
        let mut scratch = self.clone();
        let s = 2 * self.n;
        scratch.x[s * self.words..(s + 1) * self.words].fill(0);
        scratch.z[s * self.words..(s + 1) * self.words].fill(0);
        scratch.r[s] = false;
        for i in 0..self.n {
            if self.row_anticommutes(i, pauli) {
                scratch.rowsum(s, i + self.n);
            }
        }
        let stab_sign: i8 = if scratch.r[s] { -1 } else { 1 };
        stab_sign * pauli.phase().sign().unwrap_or(1)
    }

    /// Measures a Hermitian Pauli, collapsing the state when the outcome is random.
    pub fn measure_pauli<R: Rng + ?Sized>(&mut self, pauli: &PauliOperator, rng: &mut R) -> Result<Measurement> {
        self.check_pauli(pauli)?;
        let n = self.n;
        let Some(p) = (n..2 * n).find(|&i| self.row_anticommutes(i, pauli)) else {
            return Ok(Measurement {
                outcome: self.group_sign(pauli),
                deterministic: true,
            });
        };
        for i in 0..2 * n {
            if i != p && self.row_anticommutes(i, pauli) {
                self.rowsum(i, p);
            }
        }
        let d = p - n;
        for w in 0..self.words {
            self.x[d * self.words + w] = self.x[p * self.words + w];
            self.z[d * self.words + w] = self.z[p * self.words + w];
        }
        self.r[d] = self.r[p];
        let outcome: i8 = if rng.gen::<bool>() { 1 } else { -1 };
        let pauli_sign = pauli.phase().sign().unwrap_or(1);
        for w in 0..self.words {
            self.x[p * self.words + w] = pauli.x_words()[w];
            self.z[p * self.words + w] = pauli.z_words()[w];
        }
        self.r[p] = outcome * pauli_sign == -1;
        Ok(Measurement {
            outcome,
            deterministic: false,
        })
    }

    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<Measurement> {
        self.check_qubit(q)?;
        let z = PauliOperator::single(self.n, q, Pauli::Z)?;
        self.measure_pauli(&z, rng)
    }

    /// All `2^n` signed elements of the stabilizer group (small n only).
    pub fn stabilizer_group(&self) -> Vec<PauliOperator> {
        assert!(self.n <= 16, "stabilizer group enumeration is exponential in n");
        let gens = self.stabilizers();
        let mut out = Vec::with_capacity(1 << self.n);
        for mask in 0usize..(1 << self.n) {
            let mut acc = PauliOperator::identity(self.n);
            for (j, g) in gens.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    acc = acc.mul(g).expect("same size");
                }
            }
            out.push(acc);
        }
        out
    }

    /// Symplectic check: destabilizer i anticommutes only with stabilizer i,
    /// all other row pairs commute. Implies the 2n rows have full GF(2) rank.
    pub fn is_symplectic(&self) -> bool {
        let n = self.n;
        let anticommute = |a: usize, b: usize| {
            let mut parity = 0u32;
            for w in 0..self.words {
                let (xa, za) = (self.x[a * self.words + w], self.z[a * self.words + w]);
                let (xb, zb) = (self.x[b * self.words + w], self.z[b * self.words + w]);
                parity ^= ((xa & zb) ^ (za & xb)).count_ones() & 1;
            }
            parity == 1
        };
        for a in 0..2 * n {
            for b in (a + 1)..2 * n {
                let expected = b == a + n && a < n;
                if anticommute(a, b) != expected {
                    return false;
                }
            }
        }
        true
    }

    /// Image `C P C†` of a Pauli under the Clifford this tableau encodes.
    ///
    /// Only meaningful for tableaus produced from [`StabilizerTableau::new`] by
    /// gates alone: then destabilizer j is `C X_j C†` and stabilizer j is `C Z_j C†`.
    pub fn conjugate_pauli(&self, pauli: &PauliOperator) -> PauliOperator {
        let n = self.n;
        let mut acc = PauliOperator::identity(n).with_phase(pauli.phase());
        let mut extra = 0i64;
        for q in 0..n {
            let (x, z) = (pauli.x_bit(q), pauli.z_bit(q));
            if x && z {
                // Y = i X Z
                extra += 1;
            }
            if x {
                acc = acc.mul(&self.row_pauli(q)).expect("same size");
            }
            if z {
                acc = acc.mul(&self.row_pauli(q + n)).expect("same size");
            }
        }
        let phase = acc.phase() * Phase::from_exponent(extra);
        acc.with_phase(phase)
    }

    /// Canonical key of all 2n rows with signs, used for Clifford deduplication.
    pub fn key(&self) -> Vec<u64> {
        let rows = 2 * self.n;
        let mut k = Vec::with_capacity(2 * rows * self.words + rows.div_ceil(64));
        k.extend_from_slice(&self.x[..rows * self.words]);
        k.extend_from_slice(&self.z[..rows * self.words]);
        let mut signs = vec![0u64; rows.div_ceil(64).max(1)];
        for (i, &b) in self.r[..rows].iter().enumerate() {
            set_bit(&mut signs, i, b);
        }
        k.extend(signs);
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli(s: &str) -> PauliOperator {
        let (sign, body) = match s.strip_prefix('-') {
            Some(rest) => (Phase::MINUS_ONE, rest),
            None => (Phase::PLUS_ONE, s.trim_start_matches('+')),
        };
        PauliOperator::from_letters(&body.chars().map(|c| Pauli::from_char(c).unwrap()).collect::<Vec<_>>()).with_phase(sign)
    }

    #[test]
    fn hadamard_on_zero_gives_plus() {
        let t = StabilizerTableau::new(1).applied(&CliffordGate::H(0)).unwrap();
        assert_eq!(t.stabilizer(0), pauli("X"));
    }

    #[test]
    fn s_maps_x_to_y() {
        let t = StabilizerTableau::new(1)
            .applied(&CliffordGate::H(0))
            .unwrap()
            .applied(&CliffordGate::S(0))
            .unwrap();
        assert_eq!(t.stabilizer(0), pauli("Y"));
    }

    #[test]
    fn cnot_maps_xi_iz_to_xx_zz() {
        let t = StabilizerTableau::new(2)
            .applied(&CliffordGate::H(0))
            .unwrap()
            .applied(&CliffordGate::Cnot(0, 1))
            .unwrap();
        assert_eq!(t.stabilizer(0), pauli("XX"));
        assert_eq!(t.stabilizer(1), pauli("ZZ"));
    }

    #[test]
    fn out_of_range_gate_is_error() {
        let mut t = StabilizerTableau::new(2);
        assert!(matches!(t.apply_gate(&CliffordGate::H(2)), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn z_on_zero_is_deterministic_plus() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = StabilizerTableau::new(1);
        let m = t.measure_pauli(&pauli("Z"), &mut rng).unwrap();
        assert_eq!(m, Measurement { outcome: 1, deterministic: true });
        let m = t.measure_pauli(&pauli("-Z"), &mut rng).unwrap();
        assert_eq!(m.outcome, -1);
    }

    #[test]
    fn x_on_plus_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = StabilizerTableau::new(1).applied(&CliffordGate::H(0)).unwrap();
        let m = t.measure_pauli(&pauli("X"), &mut rng).unwrap();
        assert_eq!(m, Measurement { outcome: 1, deterministic: true });
    }

    #[test]
    fn z_on_plus_is_unbiased() {
        // chi-squared with one degree of freedom, 99.9% quantile 10.83
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let shots = 10_000;
        let mut plus = 0;
        for _ in 0..shots {
            let mut t = StabilizerTableau::new(1).applied(&CliffordGate::H(0)).unwrap();
            let m = t.measure_pauli(&pauli("Z"), &mut rng).unwrap();
            assert!(!m.deterministic);
            if m.outcome == 1 {
                plus += 1;
            }
        }
        let expected = shots as f64 / 2.0;
        let chi2 = 2.0 * (plus as f64 - expected).powi(2) / expected;
        assert!(chi2 < 10.83, "chi2 = {chi2}");
    }

    #[test]
    fn repeated_measurement_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut t = StabilizerTableau::new(3);
            for g in [CliffordGate::H(0), CliffordGate::Cnot(0, 1), CliffordGate::H(2), CliffordGate::S(1)] {
                t.apply_gate(&g).unwrap();
            }
            let p = pauli("XYZ");
            let first = t.measure_pauli(&p, &mut rng).unwrap();
            let second = t.measure_pauli(&p, &mut rng).unwrap();
            assert!(second.deterministic);
            assert_eq!(first.outcome, second.outcome);
            assert!(t.is_symplectic());
        }
    }

    #[test]
    fn bell_pair_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = StabilizerTableau::new(2)
            .applied(&CliffordGate::H(0))
            .unwrap()
            .applied(&CliffordGate::Cnot(0, 1))
            .unwrap();
        assert_eq!(t.deterministic_outcome(&pauli("YY")).unwrap(), Some(-1));
        for _ in 0..20 {
            let mut u = t.clone();
            let a = u.measure_z(0, &mut rng).unwrap();
            let b = u.measure_z(1, &mut rng).unwrap();
            assert!(b.deterministic);
            assert_eq!(a.outcome, b.outcome);
        }
    }

    #[test]
    fn conjugation_matches_gate_rules() {
        let gates = [CliffordGate::H(0), CliffordGate::S(1), CliffordGate::Cnot(1, 0), CliffordGate::Sdg(0), CliffordGate::Cz(0, 1)];
        let mut t = StabilizerTableau::new(2);
        for g in &gates {
            t.apply_gate(g).unwrap();
        }
        for idx in 0..16 {
            let p = PauliOperator::from_index(2, idx);
            let mut expected = p.clone();
            for g in &gates {
                expected.conjugate_by(g);
            }
            assert_eq!(t.conjugate_pauli(&p), expected, "index {idx}");
        }
    }
}
