//! Shared numeric kernels: complex least squares by Householder QR with
//! column equilibration, tanh–sinh quadrature on a finite segment, and a
//! digamma evaluator used as an independent reference for closed-form checks.

use crate::hp::{self, HPC, LogBranch};
use crate::{Error, Result};
use rug::Float;

/// Result of a least-squares solve.
#[derive(Clone, Debug)]
pub struct LsqFit {
    pub coeffs: Vec<HPC>,
    /// Euclidean norm of the residual b - A x.
    pub residual_norm: f64,
    /// Conditioning proxy: ratio of extreme |R_kk| of the equilibrated QR.
    pub condition: f64,
}

/// Solve min ‖A x - b‖₂ for complex A (m×n, m ≥ n) by Householder QR.
///
/// Columns are equilibrated to unit max-magnitude before factorization; the
/// reported condition proxy refers to the equilibrated matrix.
pub fn least_squares(a: &[Vec<HPC>], b: &[HPC]) -> Result<LsqFit> {
    let m = a.len();
    if m == 0 {
        return Err(Error::Precondition("least squares: empty system".into()));
    }
    let n = a[0].len();
    if n == 0 || m < n || b.len() != m {
        return Err(Error::Precondition(format!(
            "least squares: bad shape m={m}, n={n}, |b|={}",
            b.len()
        )));
    }
    let p = b
        .iter()
        .map(|x| x.prec())
        .chain(a.iter().flat_map(|r| r.iter().map(|x| x.prec())))
        .max()
        .unwrap();

    // Column equilibration.
    let mut scales = vec![0f64; n];
    for row in a {
        for (j, x) in row.iter().enumerate() {
            scales[j] = scales[j].max(x.abs().to_f64());
        }
    }
    for s in &mut scales {
        if *s == 0.0 || !s.is_finite() {
            return Err(Error::IllConditioned("least squares: zero or non-finite column".into()));
        }
    }

    // Working copies at common precision.
    let mut q: Vec<Vec<HPC>> = a
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, x)| x.with_prec(p).scale(1.0 / scales[j]))
                .collect()
        })
        .collect();
    let mut rhs: Vec<HPC> = b.iter().map(|x| x.with_prec(p)).collect();

    let mut diag = Vec::with_capacity(n);
    for k in 0..n {
        // Householder vector for column k, rows k..m.
        let mut norm2 = Float::new(p);
        for row in q.iter().skip(k) {
            norm2 += row[k].norm_sqr();
        }
        let norm = norm2.sqrt();
        let nf = norm.to_f64();
        diag.push(nf);
        if nf == 0.0 {
            return Err(Error::IllConditioned(format!(
                "least squares: rank deficiency at column {k}"
            )));
        }
        // alpha = -phase(x0) * norm, v = x - alpha e1
        let x0 = q[k][k].clone();
        let x0a = x0.abs();
        let phase = if x0a.to_f64() == 0.0 {
            HPC::one(p)
        } else {
            let inv = x0a.clone().recip();
            x0.scale_f(&inv)
        };
        let alpha = -&phase.scale_f(&norm);
        let mut v: Vec<HPC> = (k..m).map(|i| q[i][k].clone()).collect();
        v[0] = &v[0] - &alpha;
        let mut vnorm2 = Float::new(p);
        for t in &v {
            vnorm2 += t.norm_sqr();
        }
        if vnorm2.to_f64() > 0.0 {
            let beta = Float::with_val(p, 2) / &vnorm2;
            // Apply I - beta v v* to remaining columns and rhs.
            for j in k..n {
                let mut dot = HPC::zero(p); // v* . col_j
                for (i, t) in v.iter().enumerate() {
                    let prod = &t.conj() * &q[k + i][j];
                    dot = &dot + &prod;
                }
                let f = dot.scale_f(&beta);
                for (i, t) in v.iter().enumerate() {
                    let upd = t * &f;
                    q[k + i][j] = &q[k + i][j] - &upd;
                }
            }
            let mut dot = HPC::zero(p);
            for (i, t) in v.iter().enumerate() {
                let prod = &t.conj() * &rhs[k + i];
                dot = &dot + &prod;
            }
            let f = dot.scale_f(&beta);
            for (i, t) in v.iter().enumerate() {
                let upd = t * &f;
                rhs[k + i] = &rhs[k + i] - &upd;
            }
        }
    }

    let dmax = diag.iter().cloned().fold(0.0f64, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = dmax / dmin;

    // Back substitution R y = rhs[0..n].
    let mut y = vec![HPC::zero(p); n];
    for k in (0..n).rev() {
        let mut s = rhs[k].clone();
        for j in k + 1..n {
            let t = &q[k][j] * &y[j];
            s = &s - &t;
        }
        y[k] = &s / &q[k][k];
    }
    let coeffs = y
        .iter()
        .enumerate()
        .map(|(j, v)| v.scale(1.0 / scales[j]))
        .collect();

    let mut res2 = Float::new(p);
    for r in rhs.iter().skip(n) {
        res2 += r.norm_sqr();
    }
    Ok(LsqFit {
        coeffs,
        residual_norm: res2.sqrt().to_f64(),
        condition,
    })
}

/// tanh–sinh quadrature of `f` over the real segment \[0, L\].
///
/// Doubles the node density until successive levels agree to `tol`
/// (relative to the magnitude of the integral, with an absolute floor) or
/// `max_level` is reached. Returns the value and the last inter-level
/// difference as the error estimate.
pub fn tanh_sinh<F>(f: F, l: &Float, prec: u32, tol: f64, max_level: u32) -> Result<(HPC, f64)>
where
    F: Fn(&Float) -> Result<HPC>,
{
    let p = prec;
    let half_pi = hp::pi(p) / 2u32;
    let half_l = l.clone() / 2u32;
    // Node cutoff: weights decay like exp(-π/2 · e^{|u|}); beyond this they
    // vanish at working precision.
    let u_max = ((p as f64) * std::f64::consts::LN_2 / 1.5 + 10.0).ln() + 1.0;

    let eval_level = |h: f64, only_odd: bool| -> Result<HPC> {
        let mut acc = HPC::zero(p);
        let n_max = (u_max / h).ceil() as i64;
        let mut j = if only_odd { 1 } else { 0 };
        let step = if only_odd { 2 } else { 1 };
        while j <= n_max {
            for &sgn in if j == 0 { &[1i64][..] } else { &[1i64, -1][..] } {
                let u = Float::with_val(p, sgn * j) * h;
                let su = u.clone().sinh();
                let t = su * &half_pi;
                // x = L/2 (1 + tanh t), w = L/2 · (π/2) cosh u / cosh² t
                let tt = t.clone().tanh();
                let x = (Float::with_val(p, 1) + &tt) * &half_l;
                let cosh_t = t.cosh();
                let sech2 = Float::with_val(p, 1) / (cosh_t.clone() * &cosh_t);
                let w = Float::with_val(p, u.cosh_ref()) * &half_pi * &half_l * &sech2;
                if w.to_f64() == 0.0 {
                    break;
                }
                if x <= 0u32 || x >= *l {
                    continue;
                }
                let fv = f(&x)?;
                acc = &acc + &fv.scale_f(&w);
            }
            j += step;
        }
        Ok(acc)
    };

    let mut h = 1.0f64;
    let mut sum = eval_level(h, false)?; // Σ w f, trapezoid in u with step 1
    let mut value = sum.scale(h);
    let mut err = f64::INFINITY;
    for _level in 1..=max_level {
        h *= 0.5;
        let odd = eval_level(h, true)?;
        sum = &sum + &odd;
        let new_value = sum.scale(h);
        err = (&new_value - &value).abs().to_f64();
        value = new_value;
        let scale = value.abs().to_f64().max(1e-30);
        if err <= tol * scale.max(1.0) || err <= tol {
            return Ok((value, err));
        }
    }
    Err(Error::Quadrature(format!(
        "tanh-sinh did not reach tol {tol:.1e}: last inter-level difference {err:.3e}"
    )))
}

const BERNOULLI: [(i64, i64); 10] = [
    (1, 6),
    (-1, 30),
    (1, 42),
    (-1, 30),
    (5, 66),
    (-691, 2730),
    (7, 6),
    (-3617, 510),
    (43867, 798),
    (-174611, 330),
];

/// Digamma ψ(z) for complex z away from the non-positive integers.
///
/// Recurrence ψ(z) = ψ(z+1) − 1/z lifts the argument to Re ≥ 40, then the
/// asymptotic series ln w − 1/(2w) − Σ B_{2n}/(2n w^{2n}) through B₂₀ applies;
/// the first omitted term is below 1e-33 there.
pub fn digamma(z: &HPC, prec: u32) -> Result<HPC> {
    let p = prec;
    let mut w = z.with_prec(p);
    let mut shift = HPC::zero(p);
    let mut guard = 0;
    while w.re.to_f64() < 40.0 {
        if w.abs().to_f64() < 1e-25 {
            return Err(Error::Domain("digamma pole".into()));
        }
        shift = &shift + &w.recip();
        w = &w + &HPC::one(p);
        guard += 1;
        if guard > 100_000 {
            return Err(Error::Resource("digamma recurrence exceeded budget".into()));
        }
    }
    let ln_w = w.ln(LogBranch::Principal);
    let w_inv = w.recip();
    let w_inv2 = &w_inv * &w_inv;
    let mut acc = &ln_w - &w_inv.scale(0.5);
    let mut pw = w_inv2.clone();
    for (n, &(num, den)) in BERNOULLI.iter().enumerate() {
        let coeff = Float::with_val(p, num) / (den * (2 * (n as i64 + 1)));
        let term = pw.scale_f(&coeff);
        acc = &acc - &term;
        pw = &pw * &w_inv2;
    }
    Ok(&acc - &shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hp::{euler_gamma, real};

    const P: u32 = 133;

    #[test]
    fn least_squares_recovers_exact_polynomial() {
        // b_i = 2 - x_i + x_i²/2 sampled at 7 points, basis {1, x, x²};
        // samples and right-hand side are formed at working precision so the
        // data lies exactly in the column space.
        let xs: Vec<HPC> = (0..7)
            .map(|i| HPC::from_f64(P, 0.1 + 0.13 * i as f64, 0.0))
            .collect();
        let a: Vec<Vec<HPC>> = xs
            .iter()
            .map(|x| vec![HPC::one(P), x.clone(), x * x])
            .collect();
        let b: Vec<HPC> = xs
            .iter()
            .map(|x| {
                let sq = x * x;
                &(&HPC::from_f64(P, 2.0, 0.0) - x) + &sq.unscale_u(2)
            })
            .collect();
        let fit = least_squares(&a, &b).unwrap();
        let want = [2.0, -1.0, 0.5];
        for (c, w) in fit.coeffs.iter().zip(want) {
            assert!((c.to_f64_pair().0 - w).abs() < 1e-30);
            assert!(c.to_f64_pair().1.abs() < 1e-30);
        }
        assert!(fit.residual_norm < 1e-30);
        assert!(fit.condition < 1e3);
    }

    #[test]
    fn least_squares_complex_coefficients() {
        // y = (1+2i) + (0.5-i) s over complex sample points s_j.
        let ss: Vec<HPC> = (0..6)
            .map(|j| {
                let th = 0.9 * j as f64;
                HPC::from_f64(P, 0.3 * th.cos(), 0.3 * th.sin())
            })
            .collect();
        let a: Vec<Vec<HPC>> = ss.iter().map(|s| vec![HPC::one(P), s.clone()]).collect();
        let c0 = HPC::from_f64(P, 1.0, 2.0);
        let c1 = HPC::from_f64(P, 0.5, -1.0);
        let b: Vec<HPC> = ss.iter().map(|s| &c0 + &(&c1 * s)).collect();
        let fit = least_squares(&a, &b).unwrap();
        assert!((&fit.coeffs[0] - &c0).abs().to_f64() < 1e-30);
        assert!((&fit.coeffs[1] - &c1).abs().to_f64() < 1e-30);
    }

    #[test]
    fn tanh_sinh_integrates_decaying_exponential() {
        // ∫₀^60 e^{-t} dt = 1 - e^{-60}
        let l = real(P, 60.0);
        let (v, err) = tanh_sinh(
            |t| Ok(HPC::from_re((-t.clone()).exp())),
            &l,
            P,
            1e-35,
            12,
        )
        .unwrap();
        assert!((v.to_f64_pair().0 - 1.0).abs() < 1e-25, "got {v}");
        assert!(err < 1e-24);
        // Complex frequency: ∫₀^L e^{-tw} dt = (1 - e^{-Lw})/w at w = 2+3i.
        let w = HPC::from_f64(P, 2.0, 3.0);
        let (v2, _) = tanh_sinh(
            |t| {
                let arg = -&w.scale_f(t);
                Ok(arg.exp())
            },
            &real(P, 30.0),
            P,
            1e-35,
            12,
        )
        .unwrap();
        let want = w.recip();
        assert!((&v2 - &want).abs().to_f64() < 1e-25);
    }

    #[test]
    fn digamma_reference_values() {
        // ψ(1) = -γ
        let one = HPC::one(P);
        let d1 = digamma(&one, P).unwrap();
        let gamma = euler_gamma(P);
        assert!((d1.to_f64_pair().0 + gamma.to_f64()).abs() < 1e-30);
        assert!(d1.to_f64_pair().1.abs() < 1e-30);
        // ψ(1/2) = -γ - 2 ln 2
        let half = HPC::from_f64(P, 0.5, 0.0);
        let dh = digamma(&half, P).unwrap();
        let want = -gamma.to_f64() - 2.0 * std::f64::consts::LN_2;
        assert!((dh.to_f64_pair().0 - want).abs() < 1e-28);
        // Reflection-free spot check: ψ(2) = 1 - γ.
        let two = HPC::from_f64(P, 2.0, 0.0);
        let d2 = digamma(&two, P).unwrap();
        assert!((d2.to_f64_pair().0 - (1.0 - euler_gamma(P).to_f64())).abs() < 1e-28);
        // Complex argument: recurrence consistency ψ(z+1) = ψ(z) + 1/z.
        let z = HPC::from_f64(P, 0.3, 0.7);
        let zp1 = &z + &HPC::one(P);
        let lhs = digamma(&zp1, P).unwrap();
        let rhs = &digamma(&z, P).unwrap() + &z.recip();
        assert!((&lhs - &rhs).abs().to_f64() < 1e-30);
    }
}
