//! Truncated power-series algebra over [`HPC`](crate::hp::HPC) coefficients.
//!
//! A [`Series`] holds coefficients c\[0..=M\] of a polynomial truncation of a
//! power series at 0. All binary operations truncate to the shorter operand.
//! Reversion (compositional inverse) uses Newton iteration with order
//! doubling, so its cost is a handful of compositions.

use crate::hp::HPC;
use crate::{Error, Result};
use rug::Float;

#[derive(Clone, Debug)]
pub struct Series {
    pub c: Vec<HPC>,
}

impl Series {
    pub fn new(c: Vec<HPC>) -> Self {
        assert!(!c.is_empty());
        Series { c }
    }

    pub fn zero(prec: u32, len: usize) -> Self {
        Series {
            c: vec![HPC::zero(prec); len.max(1)],
        }
    }

    /// The identity series z, truncated to `len` coefficients.
    pub fn identity(prec: u32, len: usize) -> Self {
        let mut s = Series::zero(prec, len);
        if len > 1 {
            s.c[1] = HPC::one(prec);
        }
        s
    }

    pub fn prec(&self) -> u32 {
        self.c.iter().map(|x| x.prec()).max().unwrap()
    }

    /// Number of stored coefficients (truncation order + 1).
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn coeff(&self, k: usize) -> HPC {
        self.c
            .get(k)
            .cloned()
            .unwrap_or_else(|| HPC::zero(self.prec()))
    }

    /// Truncate or zero-extend to exactly `len` coefficients.
    pub fn resized(&self, len: usize) -> Series {
        let p = self.prec();
        let mut c = self.c.clone();
        c.resize(len.max(1), HPC::zero(p));
        Series { c }
    }

    pub fn add(&self, o: &Series) -> Series {
        let n = self.len().min(o.len());
        let c = (0..n).map(|k| &self.c[k] + &o.c[k]).collect();
        Series { c }
    }

    pub fn sub(&self, o: &Series) -> Series {
        let n = self.len().min(o.len());
        let c = (0..n).map(|k| &self.c[k] - &o.c[k]).collect();
        Series { c }
    }

    pub fn scale(&self, s: &HPC) -> Series {
        Series {
            c: self.c.iter().map(|x| x * s).collect(),
        }
    }

    pub fn scale_f(&self, s: &Float) -> Series {
        Series {
            c: self.c.iter().map(|x| x.scale_f(s)).collect(),
        }
    }

    pub fn neg(&self) -> Series {
        Series {
            c: self.c.iter().map(|x| -x).collect(),
        }
    }

    pub fn mul(&self, o: &Series) -> Series {
        let n = self.len().min(o.len());
        let p = self.prec().max(o.prec());
        let mut c = vec![HPC::zero(p); n];
        for i in 0..n {
            if self.c[i].is_zero() {
                continue;
            }
            for j in 0..n - i {
                let t = &self.c[i] * &o.c[j];
                c[i + j] = &c[i + j] + &t;
            }
        }
        Series { c }
    }

    /// Multiply by the monomial z^k (shifting coefficients up, truncating).
    pub fn mul_monomial(&self, k: usize) -> Series {
        let p = self.prec();
        let n = self.len();
        let mut c = vec![HPC::zero(p); n];
        for j in 0..n.saturating_sub(k) {
            c[j + k] = self.c[j].clone();
        }
        Series { c }
    }

    pub fn derivative(&self) -> Series {
        let p = self.prec();
        if self.len() == 1 {
            return Series::zero(p, 1);
        }
        let c = (1..self.len())
            .map(|k| self.c[k].scale(k as f64))
            .collect();
        Series { c }
    }

    /// Reciprocal; requires a nonzero constant term.
    pub fn recip(&self) -> Result<Series> {
        let p = self.prec();
        if self.c[0].abs() < 1e-300 {
            return Err(Error::Domain("series reciprocal: zero constant term".into()));
        }
        let n = self.len();
        let c0inv = self.c[0].recip();
        let mut r = vec![HPC::zero(p); n];
        r[0] = c0inv.clone();
        for m in 1..n {
            let mut s = HPC::zero(p);
            for j in 1..=m {
                let t = &self.coeff(j) * &r[m - j];
                s = &s + &t;
            }
            r[m] = &(-&s) * &c0inv;
        }
        Ok(Series { c: r })
    }

    pub fn div(&self, o: &Series) -> Result<Series> {
        Ok(self.mul(&o.recip()?))
    }

    /// Composition self ∘ inner; requires inner(0) = 0.
    pub fn compose(&self, inner: &Series) -> Result<Series> {
        if inner.c[0].abs() > 1e-30 {
            return Err(Error::Domain(
                "series composition: inner constant term must vanish".into(),
            ));
        }
        let n = self.len().min(inner.len());
        let p = self.prec().max(inner.prec());
        let inner = inner.resized(n);
        // Horner: ((c_{n-1} inner + c_{n-2}) inner + ...) + c_0
        let mut acc = Series::zero(p, n);
        for k in (0..n).rev() {
            acc = acc.mul(&inner);
            acc.c[0] = &acc.c[0] + &self.c[k];
        }
        Ok(acc)
    }

    /// Compositional inverse; requires c0 = 0 and c1 invertible.
    /// Newton iteration with order doubling: g ← g - (self∘g - z)/(self'∘g).
    pub fn revert(&self) -> Result<Series> {
        let p = self.prec();
        let n = self.len();
        if self.c[0].abs() > 1e-30 {
            return Err(Error::Domain("series reversion: constant term must vanish".into()));
        }
        if self.coeff(1).abs() < 1e-300 {
            return Err(Error::Domain("series reversion: zero linear term".into()));
        }
        let deriv = self.derivative().resized(n);
        let mut order = 2usize; // coefficients represented so far
        let mut g = Series::zero(p, order);
        g.c[1] = self.c[1].recip();
        while order < n {
            order = (order * 2).min(n);
            let gw = g.resized(order);
            let fw = self.resized(order);
            let dw = deriv.resized(order);
            let f_of_g = fw.compose(&gw)?;
            let mut num = f_of_g;
            num.c[1] = &num.c[1] - &HPC::one(p); // f∘g - z
            let den = dw.compose(&gw)?;
            let corr = num.mul(&den.recip()?);
            g = gw.sub(&corr);
        }
        Ok(g.resized(n))
    }

    /// Logarithm of a series with constant term 1 (result has constant term 0).
    pub fn ln_unit(&self) -> Result<Series> {
        let p = self.prec();
        let one = HPC::one(p);
        if (&self.c[0] - &one).abs() > 1e-30 {
            return Err(Error::Domain("series log: constant term must be 1".into()));
        }
        let n = self.len();
        let mut l = vec![HPC::zero(p); n];
        for m in 1..n {
            let mut s = HPC::zero(p);
            for j in 1..m {
                let t = &l[j].scale(j as f64) * &self.coeff(m - j);
                s = &s + &t;
            }
            l[m] = &self.coeff(m) - &s.unscale_u(m as u32);
        }
        Ok(Series { c: l })
    }

    /// Exponential of a series with zero constant term (result has constant term 1).
    pub fn exp_zero(&self) -> Result<Series> {
        let p = self.prec();
        if self.c[0].abs() > 1e-30 {
            return Err(Error::Domain("series exp: constant term must vanish".into()));
        }
        let n = self.len();
        let mut e = vec![HPC::zero(p); n];
        e[0] = HPC::one(p);
        for m in 1..n {
            let mut s = HPC::zero(p);
            for j in 1..=m {
                let t = &self.coeff(j).scale(j as f64) * &e[m - j];
                s = &s + &t;
            }
            e[m] = s.unscale_u(m as u32);
        }
        Ok(Series { c: e })
    }

    /// Real power of a series with constant term 1.
    pub fn pow_real(&self, t: &Float) -> Result<Series> {
        self.ln_unit()?.scale_f(t).exp_zero()
    }

    /// Horner evaluation at z.
    pub fn eval(&self, z: &HPC) -> HPC {
        let p = self.prec().max(z.prec());
        let mut acc = HPC::zero(p);
        for k in (0..self.len()).rev() {
            acc = &(&acc * z) + &self.c[k];
        }
        acc
    }

    /// Largest coefficient magnitude (for diagnostics and tolerances).
    pub fn max_coeff_abs(&self) -> f64 {
        self.c
            .iter()
            .map(|x| x.abs().to_f64())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp;

    const P: u32 = 133; // 40 digits

    fn rc(v: &[f64]) -> Series {
        Series::new(v.iter().map(|&x| HPC::from_f64(P, x, 0.0)).collect())
    }

    fn assert_coeffs(s: &Series, want: &[f64], tol: f64) {
        for (k, w) in want.iter().enumerate() {
            let got = s.coeff(k).to_f64_pair();
            assert!(
                (got.0 - w).abs() <= tol && got.1.abs() <= tol,
                "coeff {k}: got {got:?}, want {w}"
            );
        }
    }

    /// The model germ z/(1-z) = z + z^2 + z^3 + ... truncated to n coefficients.
    fn f0(n: usize) -> Series {
        let mut c = vec![HPC::zero(P); n];
        for k in 1..n {
            c[k] = HPC::one(P);
        }
        Series { c }
    }

    #[test]
    fn recip_of_one_minus_z_is_geometric() {
        let s = rc(&[1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        let r = s.recip().unwrap();
        assert_coeffs(&r, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1e-35);
    }

    #[test]
    fn compose_model_with_itself_gives_doubled_model() {
        // z/(1-z) ∘ z/(1-z) = z/(1-2z) = z + 2z^2 + 4z^3 + 8z^4 + ...
        let f = f0(8);
        let g = f.compose(&f).unwrap();
        assert_coeffs(&g, &[0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0], 1e-33);
    }

    #[test]
    fn revert_model_is_alternating_geometric() {
        // Inverse of z/(1-z) is z/(1+z) = z - z^2 + z^3 - ...
        let f = f0(10);
        let g = f.revert().unwrap();
        assert_coeffs(
            &g,
            &[0.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0],
            1e-32,
        );
        // Round trip both ways.
        let idl = f.compose(&g).unwrap();
        let idr = g.compose(&f).unwrap();
        let mut want = vec![0.0; 10];
        want[1] = 1.0;
        assert_coeffs(&idl, &want, 1e-30);
        assert_coeffs(&idr, &want, 1e-30);
    }

    #[test]
    fn exp_and_log_are_inverse() {
        let u = rc(&[0.0, 0.3, -0.1, 0.05, 0.2, -0.07]);
        let e = u.exp_zero().unwrap();
        let back = e.ln_unit().unwrap();
        for k in 0..6 {
            let d = &back.coeff(k) - &u.coeff(k);
            assert!(d.abs().to_f64() < 1e-33, "coeff {k}");
        }
        // 1 - e^{-z} = z - z^2/2 + z^3/6 - z^4/24
        let mz = rc(&[0.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        let mut one_minus = mz.exp_zero().unwrap().neg();
        one_minus.c[0] = &one_minus.c[0] + &HPC::one(P);
        assert_coeffs(
            &one_minus,
            &[0.0, 1.0, -0.5, 1.0 / 6.0, -1.0 / 24.0, 1.0 / 120.0],
            1e-34,
        );
    }

    #[test]
    fn pow_real_matches_squaring() {
        let s = rc(&[1.0, 0.4, -0.2, 0.1, 0.05, -0.02]);
        let sq = s.mul(&s);
        let p2 = s.pow_real(&hp::real(P, 2.0)).unwrap();
        for k in 0..6 {
            assert!((&sq.coeff(k) - &p2.coeff(k)).abs().to_f64() < 1e-32);
        }
        let back = sq.pow_real(&hp::real(P, 0.5)).unwrap();
        for k in 0..6 {
            assert!((&back.coeff(k) - &s.coeff(k)).abs().to_f64() < 1e-32);
        }
    }

    #[test]
    fn eval_matches_closed_form() {
        let f = f0(40);
        let z = HPC::from_f64(P, 0.05, 0.02);
        let v = f.eval(&z);
        let denom = &HPC::one(P) - &z;
        let want = &z / &denom;
        assert!((&v - &want).abs().to_f64() < 1e-40 / 1e-8); // |z|^40 tail ~ 1e-52
        assert!((&v - &want).abs().to_f64() < 1e-30);
    }

    #[test]
    fn mul_is_associative_and_commutative() {
        let a = rc(&[0.3, 1.0, -0.5, 0.2, 0.0, 0.7]);
        let b = rc(&[1.0, -0.2, 0.05, 0.4, -0.3, 0.1]);
        let c = rc(&[0.5, 0.5, 0.5, -1.0, 0.25, 0.0]);
        let left = a.mul(&b).mul(&c);
        let right = a.mul(&b.mul(&c));
        let flip = b.mul(&a).mul(&c);
        for k in 0..6 {
            assert!((&left.coeff(k) - &right.coeff(k)).abs().to_f64() < 1e-33);
            assert!((&left.coeff(k) - &flip.coeff(k)).abs().to_f64() < 1e-33);
        }
    }
}
