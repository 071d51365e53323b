//! Parabolic germs tangent to the identity: `f(z) = z + a1 z^2 + a2 z^3 + ...`.
//!
//! A [`Germ`] carries a truncated Taylor series (always) and, when available,
//! a closed-form expression tree evaluated exactly at full precision. Closed
//! forms matter because orbit computations walk thousands of iterates: a
//! truncated series has an O(|z|^{M+1}) evaluation error that would poison
//! downstream quantities, while the expression tree is exact to rounding.
//!
//! Functional inverses without a symbolic form are evaluated by damped Newton
//! iteration on the forward map. The fixture registry provides the standard
//! laboratory germs by name, including two constructions of the same germ
//! (`exp-family:*` and `conj-f0:*`) that serve as cross-checks.

use crate::hp::{self, HPC, LogBranch};
use crate::series::Series;
use crate::{Error, Result};

/// Default series truncation: coefficients of z^1..z^32 are retained.
pub const DEFAULT_ORDER: usize = 32;

/// Default petal radius, safely inside the Leau–Fatou petals of all fixtures.
pub const PETAL_RADIUS: f64 = 0.4;

/// Default petal angular opening: 3π/2 − 0.2.
pub fn petal_opening() -> f64 {
    1.5 * std::f64::consts::PI - 0.2
}

const NEWTON_MAX_ITERS: usize = 40;

/// Closed-form expression tree for germ evaluation.
#[derive(Clone, Debug)]
pub enum ClosedForm {
    /// z
    Identity,
    /// z/(1-z)
    F0,
    /// z/(1+z)
    F0Inv,
    /// 1 - e^{-z}
    OneMinusExpNeg,
    /// -log(1-z)
    NegLog1m,
    /// -log(2 - e^z)
    Log2Exp,
    /// log(2 - e^{-z})
    Log2ExpInv,
    /// z e^z
    ZExpZ,
    /// z ↦ e^z · φ(z)
    MulExpZ(Box<ClosedForm>),
    /// Polynomial with exactly-representable coefficients c0..cn.
    Poly(Vec<(f64, f64)>),
    /// outer ∘ inner
    Compose(Box<ClosedForm>, Box<ClosedForm>),
    Plus(Box<ClosedForm>, Box<ClosedForm>),
    Minus(Box<ClosedForm>, Box<ClosedForm>),
    /// Functional inverse of the wrapped map, by damped Newton iteration.
    NewtonInverse(Box<ClosedForm>),
}

impl ClosedForm {
    pub fn eval(&self, z: &HPC) -> Result<HPC> {
        let p = z.prec();
        let one = HPC::one(p);
        match self {
            ClosedForm::Identity => Ok(z.clone()),
            ClosedForm::F0 => {
                let d = &one - z;
                if d.abs() < 1e-30 {
                    return Err(Error::Domain("pole of z/(1-z)".into()));
                }
                Ok(z / &d)
            }
            ClosedForm::F0Inv => {
                let d = &one + z;
                if d.abs() < 1e-30 {
                    return Err(Error::Domain("pole of z/(1+z)".into()));
                }
                Ok(z / &d)
            }
            ClosedForm::OneMinusExpNeg => {
                let e = (-z).exp();
                Ok(&one - &e)
            }
            ClosedForm::NegLog1m => {
                let d = &one - z;
                if d.re <= 0u32 {
                    return Err(Error::Domain("-log(1-z) off its principal domain".into()));
                }
                Ok(-&d.ln(LogBranch::Principal))
            }
            ClosedForm::Log2Exp => {
                let d = &HPC::from_f64(p, 2.0, 0.0) - &z.exp();
                if d.re <= 0u32 {
                    return Err(Error::Domain("-log(2-e^z) off its principal domain".into()));
                }
                Ok(-&d.ln(LogBranch::Principal))
            }
            ClosedForm::Log2ExpInv => {
                let d = &HPC::from_f64(p, 2.0, 0.0) - &(-z).exp();
                if d.re <= 0u32 {
                    return Err(Error::Domain("log(2-e^{-z}) off its principal domain".into()));
                }
                Ok(d.ln(LogBranch::Principal))
            }
            ClosedForm::ZExpZ => Ok(&z.exp() * z),
            ClosedForm::MulExpZ(phi) => {
                let pv = phi.eval(z)?;
                Ok(&z.exp() * &pv)
            }
            ClosedForm::Poly(cs) => {
                let mut acc = HPC::zero(p);
                for &(re, im) in cs.iter().rev() {
                    acc = &(&acc * z) + &HPC::from_f64(p, re, im);
                }
                Ok(acc)
            }
            ClosedForm::Compose(outer, inner) => outer.eval(&inner.eval(z)?),
            ClosedForm::Plus(a, b) => Ok(&a.eval(z)? + &b.eval(z)?),
            ClosedForm::Minus(a, b) => Ok(&a.eval(z)? - &b.eval(z)?),
            ClosedForm::NewtonInverse(f) => newton_invert(f, z, z),
        }
    }

    pub fn deriv(&self, z: &HPC) -> Result<HPC> {
        let p = z.prec();
        let one = HPC::one(p);
        match self {
            ClosedForm::Identity => Ok(one),
            ClosedForm::F0 => {
                let d = &one - z;
                Ok((&d * &d).recip())
            }
            ClosedForm::F0Inv => {
                let d = &one + z;
                Ok((&d * &d).recip())
            }
            ClosedForm::OneMinusExpNeg => Ok((-z).exp()),
            ClosedForm::NegLog1m => Ok((&one - z).recip()),
            ClosedForm::Log2Exp => {
                let e = z.exp();
                let d = &HPC::from_f64(p, 2.0, 0.0) - &e;
                Ok(&e / &d)
            }
            ClosedForm::Log2ExpInv => {
                let e = (-z).exp();
                let d = &HPC::from_f64(p, 2.0, 0.0) - &e;
                Ok(&e / &d)
            }
            ClosedForm::ZExpZ => {
                let e = z.exp();
                Ok(&e * &(&one + z))
            }
            ClosedForm::MulExpZ(phi) => {
                let e = z.exp();
                let s = &phi.eval(z)? + &phi.deriv(z)?;
                Ok(&e * &s)
            }
            ClosedForm::Poly(cs) => {
                let mut acc = HPC::zero(p);
                let mut zpow = HPC::one(p);
                for (k, &(re, im)) in cs.iter().enumerate().skip(1) {
                    let term = &HPC::from_f64(p, re, im).scale(k as f64) * &zpow;
                    acc = &acc + &term;
                    zpow = &zpow * z;
                }
                Ok(acc)
            }
            ClosedForm::Compose(outer, inner) => {
                let iv = inner.eval(z)?;
                Ok(&outer.deriv(&iv)? * &inner.deriv(z)?)
            }
            ClosedForm::Plus(a, b) => Ok(&a.deriv(z)? + &b.deriv(z)?),
            ClosedForm::Minus(a, b) => Ok(&a.deriv(z)? - &b.deriv(z)?),
            ClosedForm::NewtonInverse(f) => {
                let w = newton_invert(f, z, z)?;
                let d = f.deriv(&w)?;
                if d.abs() < 1e-60 {
                    return Err(Error::Inversion("vanishing derivative at inverse point".into()));
                }
                Ok(d.recip())
            }
        }
    }

    /// Symbolic inverse when one is known; otherwise a Newton-inverse node.
    pub fn inverse(&self) -> ClosedForm {
        match self {
            ClosedForm::Identity => ClosedForm::Identity,
            ClosedForm::F0 => ClosedForm::F0Inv,
            ClosedForm::F0Inv => ClosedForm::F0,
            ClosedForm::OneMinusExpNeg => ClosedForm::NegLog1m,
            ClosedForm::NegLog1m => ClosedForm::OneMinusExpNeg,
            ClosedForm::Log2Exp => ClosedForm::Log2ExpInv,
            ClosedForm::Log2ExpInv => ClosedForm::Log2Exp,
            ClosedForm::Compose(a, b) => ClosedForm::Compose(
                Box::new(b.inverse()),
                Box::new(a.inverse()),
            ),
            ClosedForm::NewtonInverse(f) => (**f).clone(),
            other => ClosedForm::NewtonInverse(Box::new(other.clone())),
        }
    }
}

/// Solve f(w) = y by damped Newton iteration starting at `start`.
fn newton_invert(f: &ClosedForm, y: &HPC, start: &HPC) -> Result<HPC> {
    let p = y.prec();
    let scale = y.abs().to_f64().max(1e-3);
    let tol = scale * 2f64.powi(-((p as i32) - 8));
    let mut w = start.clone();
    let mut res = &f.eval(&w)? - y;
    let mut rnorm = res.abs().to_f64();
    for _ in 0..NEWTON_MAX_ITERS {
        if rnorm <= tol {
            return Ok(w);
        }
        let d = f.deriv(&w)?;
        if d.abs() < 1e-60 {
            return Err(Error::Inversion("vanishing derivative in Newton inversion".into()));
        }
        let full = &res / &d;
        // Damped line search: halve the step until the residual decreases.
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..12 {
            let cand = &w - &full.scale(lambda);
            match f.eval(&cand) {
                Ok(fv) => {
                    let r2 = &fv - y;
                    let n2 = r2.abs().to_f64();
                    if n2 < rnorm {
                        w = cand;
                        res = r2;
                        rnorm = n2;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::Inversion(format!(
                "Newton inversion stalled at residual {rnorm:.3e}"
            )));
        }
    }
    if rnorm <= tol * 16.0 {
        Ok(w)
    } else {
        Err(Error::Inversion(format!(
            "Newton inversion did not converge: residual {rnorm:.3e}, tol {tol:.3e}"
        )))
    }
}

/// Which sector of the fixed point a petal occupies.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PetalKind {
    /// Attracting petal V₊, bisected by the ray through -1.
    Plus,
    /// Repelling petal V₋, bisected by the ray through +1.
    Minus,
    /// Upper intersection V₊ ∩ V₋ ∩ {Im z > 0}.
    Up,
    /// Lower intersection V₊ ∩ V₋ ∩ {Im z < 0}.
    Low,
}

/// Sector-shaped petal specification with a membership test.
#[derive(Clone, Debug)]
pub struct PetalSpec {
    pub kind: PetalKind,
    pub radius: f64,
    pub opening: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a % two_pi;
    if x > std::f64::consts::PI {
        x -= two_pi;
    } else if x <= -std::f64::consts::PI {
        x += two_pi;
    }
    x
}

impl PetalSpec {
    pub fn new(kind: PetalKind) -> Self {
        PetalSpec {
            kind,
            radius: PETAL_RADIUS,
            opening: petal_opening(),
        }
    }

    /// Direction of the petal bisector as a unit complex number.
    pub fn bisector(&self) -> (f64, f64) {
        match self.kind {
            PetalKind::Plus => (-1.0, 0.0),
            PetalKind::Minus => (1.0, 0.0),
            PetalKind::Up => (0.0, 1.0),
            PetalKind::Low => (0.0, -1.0),
        }
    }

    pub fn contains(&self, z: &HPC) -> bool {
        let (re, im) = z.to_f64_pair();
        let r = (re * re + im * im).sqrt();
        if !(r > 0.0 && r < self.radius) {
            return false;
        }
        let arg = im.atan2(re);
        let half = self.opening / 2.0;
        let in_plus = wrap_angle(arg - std::f64::consts::PI).abs() < half;
        let in_minus = wrap_angle(arg).abs() < half;
        match self.kind {
            PetalKind::Plus => in_plus,
            PetalKind::Minus => in_minus,
            PetalKind::Up => in_plus && in_minus && im > 0.0,
            PetalKind::Low => in_plus && in_minus && im < 0.0,
        }
    }
}

/// Formal classification of a parabolic germ.
#[derive(Clone, Debug)]
pub struct FormalClassInfo {
    /// Number of attracting petals: f = z + a z^{k+1} + ...
    pub k: u32,
    /// Scale-invariant cubic ratio a_{2k+1}/a_{k+1}^2; equals 1 for the model class.
    pub rho: HPC,
    /// Whether the germ already has a_{k+1} = 1 and rho-term coefficient 1.
    pub prenormalized: bool,
}

/// A parabolic germ: truncated Taylor series plus optional closed form.
#[derive(Clone, Debug)]
pub struct Germ {
    pub label: String,
    /// Taylor coefficients; c\[0\] = 0, c\[1\] = linear part.
    pub series: Series,
    pub closed: Option<ClosedForm>,
    /// Fixture tag for JSON round trips when the closed form is registry-known.
    pub closed_tag: Option<String>,
    /// Safe evaluation radius for the closed form (and iterate escape cap).
    pub radius: f64,
}

impl Germ {
    pub fn from_series(label: &str, series: Series) -> Self {
        Germ {
            label: label.to_string(),
            series,
            closed: None,
            closed_tag: None,
            radius: 0.3,
        }
    }

    pub fn prec(&self) -> u32 {
        self.series.prec()
    }

    pub fn order(&self) -> usize {
        self.series.len().saturating_sub(1)
    }

    /// Evaluate the germ: closed form when present, series otherwise.
    pub fn eval(&self, z: &HPC) -> Result<HPC> {
        if !z.is_finite() {
            return Err(Error::Domain("non-finite evaluation point".into()));
        }
        if z.abs().to_f64() > self.radius {
            return Err(Error::Domain(format!(
                "evaluation point |z| = {:.3} outside validity radius {}",
                z.abs().to_f64(),
                self.radius
            )));
        }
        match &self.closed {
            Some(cf) => cf.eval(z),
            None => Ok(self.series.eval(z)),
        }
    }

    /// Derivative of the germ at z.
    pub fn deriv(&self, z: &HPC) -> Result<HPC> {
        match &self.closed {
            Some(cf) => cf.deriv(z),
            None => Ok(self.series.derivative().eval(z)),
        }
    }

    /// Taylor coefficients a_1..a_order of f(z) = a_1 z + a_2 z^2 + ...
    pub fn taylor(&self, order: usize) -> Result<Vec<HPC>> {
        if order + 1 > self.series.len() {
            return Err(Error::Precision(format!(
                "requested order {} exceeds stored truncation {}",
                order,
                self.order()
            )));
        }
        Ok((1..=order).map(|k| self.series.coeff(k)).collect())
    }

    /// Composition self ∘ other.
    pub fn compose(&self, other: &Germ) -> Result<Germ> {
        let series = self.series.compose(&other.series)?;
        let closed = match (&self.closed, &other.closed) {
            (Some(a), Some(b)) => Some(ClosedForm::Compose(
                Box::new(a.clone()),
                Box::new(b.clone()),
            )),
            _ => None,
        };
        Ok(Germ {
            label: format!("{}∘{}", self.label, other.label),
            series,
            closed,
            closed_tag: None,
            radius: self.radius.min(other.radius) * 0.8,
        })
    }

    /// Compositional inverse.
    pub fn invert(&self) -> Result<Germ> {
        let series = self.series.revert()?;
        let closed = self.closed.as_ref().map(|cf| cf.inverse());
        Ok(Germ {
            label: format!("{}⁻¹", self.label),
            series,
            closed,
            closed_tag: None,
            radius: self.radius,
        })
    }

    /// Conjugation φ⁻¹ ∘ self ∘ φ by a tangent-to-identity change of variable.
    pub fn conjugate(&self, phi: &Germ) -> Result<Germ> {
        let inner = self.series.compose(&phi.series)?;
        let series = phi.series.revert()?.compose(&inner)?;
        let closed = match (&self.closed, &phi.closed) {
            (Some(f), Some(p)) => Some(ClosedForm::Compose(
                Box::new(p.inverse()),
                Box::new(ClosedForm::Compose(Box::new(f.clone()), Box::new(p.clone()))),
            )),
            _ => None,
        };
        Ok(Germ {
            label: format!("{}^{}", self.label, phi.label),
            series,
            closed,
            closed_tag: None,
            radius: self.radius.min(phi.radius) * 0.8,
        })
    }

    /// n-fold iterate at z; negative n uses the compositional inverse.
    /// The model germ short-circuits to its closed iterate z/(1-nz).
    pub fn iterate(&self, z: &HPC, n: i64) -> Result<HPC> {
        let p = z.prec();
        match &self.closed {
            Some(ClosedForm::F0) => {
                let d = &HPC::one(p) - &z.scale(n as f64);
                if d.abs() < 1e-30 {
                    return Err(Error::Domain("iterate hits the pole of the model germ".into()));
                }
                return Ok(z / &d);
            }
            Some(ClosedForm::F0Inv) => {
                let d = &HPC::one(p) + &z.scale(n as f64);
                if d.abs() < 1e-30 {
                    return Err(Error::Domain("iterate hits the pole of the model germ".into()));
                }
                return Ok(z / &d);
            }
            _ => {}
        }
        let (g, steps) = if n >= 0 {
            (self.clone(), n as u64)
        } else {
            (self.invert()?, (-n) as u64)
        };
        let mut w = z.clone();
        for _ in 0..steps {
            w = g.eval(&w)?;
            if w.abs().to_f64() > g.radius {
                return Err(Error::Escape(format!(
                    "iterate reached |z| = {:.3} beyond radius {}",
                    w.abs().to_f64(),
                    g.radius
                )));
            }
        }
        Ok(w)
    }

    /// Formal class (k, rho) and prenormalization status.
    pub fn formal_class(&self) -> Result<FormalClassInfo> {
        let p = self.prec();
        let digits = (p as f64 / std::f64::consts::LOG2_10) as i32;
        let tol = 10f64.powi(-(digits - 6).max(4));
        let one = HPC::one(p);
        if (&self.series.coeff(1) - &one).abs().to_f64() > tol {
            return Err(Error::NotParabolic(format!(
                "linear part {} is not 1",
                self.series.coeff(1)
            )));
        }
        let mut k = None;
        for m in 2..self.series.len() {
            if self.series.coeff(m).abs().to_f64() > tol {
                k = Some(m - 1);
                break;
            }
        }
        let k = k.ok_or_else(|| {
            Error::NotParabolic("no nonzero higher-order term within stored truncation".into())
        })? as u32;
        let need = 2 * k as usize + 1;
        if need >= self.series.len() {
            return Err(Error::Precision(format!(
                "formal class needs coefficients through order {need}, have {}",
                self.order()
            )));
        }
        let a_lead = self.series.coeff(k as usize + 1);
        let a_next = self.series.coeff(need);
        let rho = &a_next / &(&a_lead * &a_lead);
        let prenormalized = k == 1
            && (&a_lead - &one).abs().to_f64() <= tol
            && (&a_next - &one).abs().to_f64() <= tol;
        Ok(FormalClassInfo {
            k,
            rho,
            prenormalized,
        })
    }

    /// Petal specification (germ-independent sector defaults).
    pub fn petal(kind: PetalKind) -> PetalSpec {
        PetalSpec::new(kind)
    }

    /// Serialize to JSON: label, decimal coefficient strings, closed-form tag.
    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        let coeffs: Vec<serde_json::Value> = (1..self.series.len())
            .map(|k| {
                let (r, i) = self.series.coeff(k).to_decimal_strings(digits);
                serde_json::json!([r, i])
            })
            .collect();
        serde_json::json!({
            "label": self.label,
            "coefficients": coeffs,
            "closed_form_tag": self.closed_tag,
        })
    }

    /// Deserialize from the JSON layout produced by [`Germ::to_json`].
    pub fn from_json(v: &serde_json::Value, prec: u32) -> Result<Germ> {
        let label = v["label"]
            .as_str()
            .ok_or_else(|| Error::Io("germ JSON: missing label".into()))?
            .to_string();
        let arr = v["coefficients"]
            .as_array()
            .ok_or_else(|| Error::Io("germ JSON: missing coefficients".into()))?;
        let mut c = vec![HPC::zero(prec)];
        for item in arr {
            let pair = item
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::Io("germ JSON: coefficient must be [re, im]".into()))?;
            let re = hp::parse_real(prec, pair[0].as_str().unwrap_or("0"))?;
            let im = hp::parse_real(prec, pair[1].as_str().unwrap_or("0"))?;
            c.push(HPC::new(re, im));
        }
        let tag = v["closed_form_tag"].as_str().map(|s| s.to_string());
        match &tag {
            Some(t) => {
                let mut g = fixture(t, prec, c.len() - 1)?;
                g.label = label;
                Ok(g)
            }
            None => {
                let mut g = Germ::from_series(&label, Series::new(c));
                g.closed_tag = None;
                Ok(g)
            }
        }
    }
}

fn f0_series(prec: u32, order: usize) -> Series {
    let mut c = vec![HPC::zero(prec); order + 1];
    for item in c.iter_mut().skip(1) {
        *item = HPC::one(prec);
    }
    Series::new(c)
}

fn one_minus_exp_neg_series(prec: u32, order: usize) -> Series {
    // 1 - e^{-z}: negate exp(-z) and add 1.
    let mz = Series::identity(prec, order + 1).neg();
    let mut s = mz.exp_zero().expect("exp of zero-constant series").neg();
    s.c[0] = &s.c[0] + &HPC::one(prec);
    s
}

/// Resolve a change-of-variable name used in fixture families.
fn phi_fixture(name: &str, prec: u32, order: usize) -> Result<(Series, ClosedForm)> {
    match name {
        "id" => Ok((Series::identity(prec, order + 1), ClosedForm::Identity)),
        "one-minus-exp-neg" => Ok((
            one_minus_exp_neg_series(prec, order),
            ClosedForm::OneMinusExpNeg,
        )),
        other => Err(Error::Precondition(format!(
            "unknown change-of-variable fixture {other:?} (known: id, one-minus-exp-neg)"
        ))),
    }
}

/// Construct a registry fixture by name at the given precision and order.
///
/// Known names: `f0`, `log2exp`, `zexpz`, `exp-family:<phi>`, `conj-f0:<phi>`
/// with `<phi>` in {`id`, `one-minus-exp-neg`}.
pub fn fixture(name: &str, prec: u32, order: usize) -> Result<Germ> {
    let order = order.max(4);
    match name {
        "f0" => Ok(Germ {
            label: "f0".into(),
            series: f0_series(prec, order),
            closed: Some(ClosedForm::F0),
            closed_tag: Some("f0".into()),
            radius: 0.85,
        }),
        "f0-inv" => Ok(Germ {
            label: "f0-inv".into(),
            series: f0_series(prec, order).revert()?,
            closed: Some(ClosedForm::F0Inv),
            closed_tag: Some("f0-inv".into()),
            radius: 0.85,
        }),
        "log2exp" => {
            // -log(2 - e^z) = -log(1 + (1 - e^z))
            let z = Series::identity(prec, order + 1);
            let mut u = z.exp_zero()?.neg(); // -e^z
            u.c[0] = &u.c[0] + &HPC::from_f64(prec, 2.0, 0.0); // 2 - e^z
            let series = u.ln_unit()?.neg();
            Ok(Germ {
                label: "log2exp".into(),
                series,
                closed: Some(ClosedForm::Log2Exp),
                closed_tag: Some("log2exp".into()),
                radius: 0.6,
            })
        }
        "zexpz" => {
            let series = Series::identity(prec, order + 1)
                .exp_zero()?
                .mul_monomial(1);
            Ok(Germ {
                label: "zexpz".into(),
                series,
                closed: Some(ClosedForm::ZExpZ),
                closed_tag: Some("zexpz".into()),
                radius: 0.6,
            })
        }
        _ => {
            if let Some(phi_name) = name.strip_prefix("exp-family:") {
                let (phi_s, phi_cf) = phi_fixture(phi_name, prec, order)?;
                // f = φ⁻¹(e^z φ(z))
                let ez = Series::identity(prec, order + 1).exp_zero()?;
                let inner = ez.mul(&phi_s);
                let series = phi_s.revert()?.compose(&inner)?;
                let closed = ClosedForm::Compose(
                    Box::new(phi_cf.inverse()),
                    Box::new(ClosedForm::MulExpZ(Box::new(phi_cf))),
                );
                Ok(Germ {
                    label: name.into(),
                    series,
                    closed: Some(closed),
                    closed_tag: Some(name.into()),
                    radius: 0.5,
                })
            } else if let Some(phi_name) = name.strip_prefix("conj-f0:") {
                let (phi_s, phi_cf) = phi_fixture(phi_name, prec, order)?;
                let inner = f0_series(prec, order).compose(&phi_s)?;
                let series = phi_s.revert()?.compose(&inner)?;
                let closed = ClosedForm::Compose(
                    Box::new(phi_cf.inverse()),
                    Box::new(ClosedForm::Compose(
                        Box::new(ClosedForm::F0),
                        Box::new(phi_cf),
                    )),
                );
                Ok(Germ {
                    label: name.into(),
                    series,
                    closed: Some(closed),
                    closed_tag: Some(name.into()),
                    radius: 0.5,
                })
            } else {
                Err(Error::Precondition(format!(
                    "unknown fixture {name:?} (known: f0, f0-inv, log2exp, zexpz, \
                     exp-family:<phi>, conj-f0:<phi>)"
                )))
            }
        }
    }
}

/// Parse a decimal complex number "re,im" or "re" at the given precision.
pub fn parse_point(prec: u32, s: &str) -> Result<HPC> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.len() {
        1 => Ok(HPC::from_re(hp::parse_real(prec, parts[0])?)),
        2 => Ok(HPC::new(
            hp::parse_real(prec, parts[0])?,
            hp::parse_real(prec, parts[1])?,
        )),
        _ => Err(Error::Io(format!("cannot parse complex point {s:?}"))),
    }
}
