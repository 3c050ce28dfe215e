use crate::ring::{Context, Field, PrimeField, Ring};

/// Residue field of Q_p or of a quadratic extension: F_p, or
/// F_p[t]/(t² − d) with d a non-residue. Elements of F_{p²} are encoded
/// as `a + p·b` for `a + b·t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidueField {
    Prime(PrimeField),
    Quadratic { f: PrimeField, d: u64 },
}

impl ResidueField {
    pub fn prime(p: u64) -> Self {
        ResidueField::Prime(PrimeField::new(p))
    }

    pub fn quadratic(p: u64, d: u64) -> Self {
        let f = PrimeField::new(p);
        assert_eq!(f.legendre(d), -1, "{d} must be a non-residue mod {p}");
        ResidueField::Quadratic { f, d: d % p }
    }

    pub fn p(&self) -> u64 {
        match self {
            ResidueField::Prime(f) | ResidueField::Quadratic { f, .. } => f.p(),
        }
    }

    pub fn size(&self) -> u64 {
        match self {
            ResidueField::Prime(f) => f.p(),
            ResidueField::Quadratic { f, .. } => f.p() * f.p(),
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = u64> {
        0..self.size()
    }

    fn parts(&self, x: u64) -> (u64, u64) {
        let p = self.p();
        (x % p, x / p)
    }

    fn join(&self, a: u64, b: u64) -> u64 {
        a + self.p() * b
    }

    pub fn sqrt(&self, a: u64) -> Option<u64> {
        self.elements().find(|x| self.mul(x, x) == a)
    }
}

impl Ring for ResidueField {
    type Elem = u64;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1
    }
    fn from_int(&self, n: &num_bigint::BigInt) -> u64 {
        match self {
            ResidueField::Prime(f) | ResidueField::Quadratic { f, .. } => f.from_int(n),
        }
    }
    fn add(&self, x: &u64, y: &u64) -> u64 {
        match self {
            ResidueField::Prime(f) => f.add(x, y),
            ResidueField::Quadratic { f, .. } => {
                let (a, b) = self.parts(*x);
                let (c, e) = self.parts(*y);
                self.join(f.add(&a, &c), f.add(&b, &e))
            }
        }
    }
    fn neg(&self, x: &u64) -> u64 {
        match self {
            ResidueField::Prime(f) => f.neg(x),
            ResidueField::Quadratic { f, .. } => {
                let (a, b) = self.parts(*x);
                self.join(f.neg(&a), f.neg(&b))
            }
        }
    }
    fn mul(&self, x: &u64, y: &u64) -> u64 {
        match self {
            ResidueField::Prime(f) => f.mul(x, y),
            ResidueField::Quadratic { f, d } => {
                let (a, b) = self.parts(*x);
                let (c, e) = self.parts(*y);
                let re = f.add(&f.mul(&a, &c), &f.mul(d, &f.mul(&b, &e)));
                let im = f.add(&f.mul(&a, &e), &f.mul(&b, &c));
                self.join(re, im)
            }
        }
    }
    fn is_zero(&self, x: &u64) -> bool {
        *x == 0
    }
    fn characteristic(&self) -> u64 {
        self.p()
    }
    fn context(&self) -> Context {
        Context::ModP { p: self.p() }
    }
}

impl Field for ResidueField {
    fn inv(&self, x: &u64) -> Option<u64> {
        match self {
            ResidueField::Prime(f) => f.inv(x),
            ResidueField::Quadratic { f, d } => {
                let (a, b) = self.parts(*x);
                let norm = f.sub(&f.mul(&a, &a), &f.mul(d, &f.mul(&b, &b)));
                let ni = f.inv(&norm)?;
                Some(self.join(f.mul(&a, &ni), f.neg(&f.mul(&b, &ni))))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f25_is_a_field() {
        let k = ResidueField::quadratic(5, 2);
        assert_eq!(k.size(), 25);
        for x in 1..25 {
            assert_eq!(k.mul(&x, &k.inv(&x).unwrap()), 1);
        }
        // every element of F_p is a square in F_{p²}
        for a in 0..5 {
            assert!(k.sqrt(a).is_some());
        }
    }
}
