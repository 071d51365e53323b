//! ε-neighborhood geometry of attracted orbits: tail/nucleus decomposition of
//! the directed area, an independent grid-quadrature oracle, finite-difference
//! probes of the second-derivative blow-up at overlap thresholds, and
//! reconstruction of orbit data from the area function alone.

use crate::germ::Germ;
use crate::hp::{self, HPC};
use crate::numerics::least_squares;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rug::Float;

/// Stopping rule for orbit iteration.
#[derive(Clone, Copy, Debug)]
pub struct OrbitStop {
    /// Hard cap on the number of iterations.
    pub max_n: usize,
    /// Stop once |z_n| falls below this floor (0 disables the floor).
    pub min_abs: f64,
}

impl Default for OrbitStop {
    fn default() -> Self {
        OrbitStop {
            max_n: 200_000,
            min_abs: 1e-5,
        }
    }
}

/// An orbit z_n = f^{∘n}(z₀) attracted to the origin, with gap bookkeeping.
///
/// Immutable once handed out; the area driver extends its own private copy.
#[derive(Clone, Debug)]
pub struct Orbit {
    germ: Germ,
    points: Vec<HPC>,
    /// gaps\[n\] = |z_n − z_{n+1}|.
    gaps: Vec<Float>,
    monotone_from: usize,
    reached_min_abs: bool,
    /// Index from which consecutive displacement directions are aligned to
    /// within ~5e-4, so the linear part of the crescent sum may be telescoped
    /// with a frozen direction. 0 for orbits moving along a fixed ray.
    telescope_from: usize,
}

const DIRECTION_ALIGN_TOL: f64 = 5e-4;

fn direction_f64(a: &HPC, b: &HPC) -> (f64, f64) {
    let (ax, ay) = a.to_f64_pair();
    let (bx, by) = b.to_f64_pair();
    let (dx, dy) = (bx - ax, by - ay);
    let n = dx.hypot(dy);
    if n == 0.0 {
        (0.0, 0.0)
    } else {
        (dx / n, dy / n)
    }
}

impl Orbit {
    pub fn germ(&self) -> &Germ {
        &self.germ
    }

    pub fn label(&self) -> &str {
        &self.germ.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[HPC] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &HPC {
        &self.points[k]
    }

    pub fn gaps(&self) -> &[Float] {
        &self.gaps
    }

    /// Overlap threshold ε_n = gaps\[n\]/2, exactly.
    pub fn threshold(&self, n: usize) -> Float {
        self.gaps[n].clone() / 2u32
    }

    pub fn monotone_from(&self) -> usize {
        self.monotone_from
    }

    pub fn reached_min_abs(&self) -> bool {
        self.reached_min_abs
    }

    pub fn prec(&self) -> u32 {
        self.points[0].prec()
    }

    /// Append further iterates until the orbit holds `target_len` points.
    /// Stops early only if the map reaches an exact fixed point.
    pub fn extend_to(&mut self, target_len: usize) -> Result<()> {
        while self.points.len() < target_len {
            let z = self.points.last().unwrap().clone();
            let w = step(&self.germ, &z)?;
            let d = (&z - &w).abs();
            if d.is_zero() {
                break;
            }
            if let Some(prev) = self.gaps.last() {
                if self.gaps.len() > self.monotone_from && d >= *prev {
                    return Err(Error::NonMonotone(format!(
                        "gap grew again at index {} during extension",
                        self.gaps.len()
                    )));
                }
            }
            self.gaps.push(d);
            self.points.push(w);
        }
        Ok(())
    }

    /// JSON dump with decimal strings at the requested digit count.
    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        let pair = |z: &HPC| {
            let (r, i) = z.to_decimal_strings(digits);
            serde_json::json!([r, i])
        };
        let fstr = |x: &Float| {
            format!("{:.*e}", digits, x.to_f64())
        };
        serde_json::json!({
            "germ": self.germ.to_json(digits),
            "z0": pair(&self.points[0]),
            "points": self.points.iter().map(pair).collect::<Vec<_>>(),
            "gaps": self.gaps.iter().map(fstr).collect::<Vec<_>>(),
            "thresholds": (0..self.gaps.len())
                .map(|n| fstr(&self.threshold(n)))
                .collect::<Vec<_>>(),
        })
    }
}

fn step(f: &Germ, z: &HPC) -> Result<HPC> {
    let w = match f.eval(z) {
        Ok(w) => w,
        Err(Error::Domain(m)) => return Err(Error::Escape(m)),
        Err(e) => return Err(e),
    };
    if !w.is_finite() {
        return Err(Error::Escape("iterate left the finite plane".into()));
    }
    Ok(w)
}

/// Iterate `f` from `z0` until the stopping rule fires, recording gaps,
/// the monotone-gap onset, and the direction-stabilization index.
pub fn orbit(f: &Germ, z0: &HPC, stop: &OrbitStop) -> Result<Orbit> {
    if z0.is_zero() {
        return Err(Error::Precondition(
            "orbit from the fixed point itself is empty".into(),
        ));
    }
    let mut points = vec![z0.clone()];
    let mut gaps: Vec<Float> = Vec::new();
    let mut reached = z0.abs().to_f64() < stop.min_abs;
    while !reached && points.len() <= stop.max_n {
        let z = points.last().unwrap().clone();
        let w = step(f, &z)?;
        let d = (&z - &w).abs();
        if d.is_zero() {
            break;
        }
        let below = w.abs().to_f64() < stop.min_abs;
        gaps.push(d);
        points.push(w);
        if below {
            reached = true;
        }
    }

    let mut monotone_from = 0usize;
    for i in 1..gaps.len() {
        if gaps[i] >= gaps[i - 1] {
            monotone_from = i;
        }
    }
    if gaps.len() >= 8 && monotone_from + 4 > gaps.len() {
        return Err(Error::NonMonotone(format!(
            "gaps never settle into a decreasing run within {} iterations",
            points.len() - 1
        )));
    }

    let mut telescope_from = 0usize;
    if points.len() >= 3 {
        let mut prev = direction_f64(&points[0], &points[1]);
        for k in 1..points.len() - 1 {
            let cur = direction_f64(&points[k], &points[k + 1]);
            let drift = (cur.0 - prev.0).hypot(cur.1 - prev.1);
            if drift > DIRECTION_ALIGN_TOL {
                telescope_from = k;
            }
            prev = cur;
        }
    }

    Ok(Orbit {
        germ: f.clone(),
        points,
        gaps,
        monotone_from,
        reached_min_abs: reached,
        telescope_from,
    })
}

/// Which way the telescoping half-difference enters the crescent sum.
///
/// The two readings differ by whether 1/π multiplies the half-difference
/// telescope. `Plain` (half-difference unscaled) is the variant that matches
/// the quadrature oracle and the exact two-disc identity, and is the default;
/// `OverPi` is kept so the comparison that fixed the default stays testable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bracketing {
    Plain,
    OverPi,
}

/// Tuning for the nucleus crescent sum.
#[derive(Clone, Copy, Debug)]
pub struct AreaOptions {
    /// Relative truncation tolerance for the crescent remainder.
    pub tol_rel: f64,
    pub bracketing: Bracketing,
    /// Freeze the crescent cutoff at this absolute orbit index so truncation
    /// varies smoothly across a finite-difference stencil.
    pub fixed_stop: Option<usize>,
}

impl Default for AreaOptions {
    fn default() -> Self {
        AreaOptions {
            tol_rel: 1e-16,
            bracketing: Bracketing::Plain,
            fixed_stop: None,
        }
    }
}

impl AreaOptions {
    pub fn with_tol(tol_rel: f64) -> Self {
        AreaOptions {
            tol_rel,
            ..AreaOptions::default()
        }
    }
}

/// Directed area of the ε-neighborhood of an orbit, split into the disjoint
/// head discs (tail) and the overlapping remainder (nucleus).
#[derive(Clone, Debug)]
pub struct DirectedArea {
    pub value: HPC,
    pub tail: HPC,
    pub nucleus: HPC,
    /// value/(ε²π), kept as computed before the final scaling.
    pub scaled: HPC,
    /// Separation index; None when every consecutive disc pair overlaps.
    pub n_eps: Option<usize>,
    /// Last crescent index actually summed.
    pub stop_index: usize,
    /// Absolute estimate for the truncated crescent remainder of `value`.
    pub truncation: f64,
}

/// Crescent kernel t√(1−t²) + arcsin t on [0, 1].
fn crescent_kernel(t: &Float) -> Float {
    let p = t.prec();
    let one = Float::with_val(p, 1);
    let tc = if *t > one { one.clone() } else { t.clone() };
    let mut s = Float::with_val(p, 1) - Float::with_val(p, &tc * &tc);
    if s < 0u32 {
        s = Float::new(p);
    }
    let root = s.sqrt();
    Float::with_val(p, &tc * &root) + tc.asin()
}

/// Kernel minus its tangent line at 0: G(t) − 2t ∈ [−0.43·t³, 0].
fn crescent_kernel_excess(t: &Float) -> Float {
    let two_t = Float::with_val(t.prec(), t * 2u32);
    crescent_kernel(t) - two_t
}

/// First nucleus index for the point window, or an error when the separation
/// cannot be read off the computed gaps.
fn start_index(gaps: &[Float], monotone_from: usize, eps: &Float) -> Result<usize> {
    if gaps.is_empty() {
        return Ok(0);
    }
    let two_eps = Float::with_val(eps.prec(), eps * 2u32);
    if *gaps.last().unwrap() >= two_eps {
        return Err(Error::Truncation(
            "separation index lies beyond the computed orbit".into(),
        ));
    }
    let mono = &gaps[monotone_from..];
    let cnt = mono.partition_point(|g| *g >= two_eps);
    if cnt > 0 {
        return Ok(monotone_from + cnt);
    }
    if monotone_from == 0 {
        return Ok(0);
    }
    if gaps[..monotone_from].iter().all(|g| *g < two_eps) {
        return Ok(0);
    }
    Err(Error::Range(
        "separation index falls inside the non-monotone gap prefix".into(),
    ))
}

/// n_ε = max{n : gaps\[n\] ≥ 2ε}; tangency counts as disjoint.
pub fn separation_index(o: &Orbit, eps: &Float) -> Result<usize> {
    match start_index(&o.gaps, o.monotone_from, eps) {
        Ok(0) => Err(Error::Range(format!(
            "no disc pair is disjoint at eps = {:.3e}",
            eps.to_f64()
        ))),
        Ok(s) => Ok(s - 1),
        Err(Error::Truncation(m)) => Err(Error::Range(m)),
        Err(e) => Err(e),
    }
}

fn eps_sq_pi(eps: &Float, p: u32) -> Float {
    Float::with_val(p, eps * eps) * hp::pi(p)
}

/// ε²π · Σ_{l ≤ n_ε} z_l — the disjoint head discs.
pub fn tail_directed_area(o: &Orbit, eps: &Float) -> Result<HPC> {
    let p = o.prec().max(eps.prec());
    let s = start_index(&o.gaps, o.monotone_from, eps)?;
    let mut acc = HPC::zero(p);
    for z in &o.points[..s] {
        acc = &acc + z;
    }
    Ok(acc.scale_f(&eps_sq_pi(eps, p)))
}

struct CrescentSum {
    scaled: HPC,
    stop_index: usize,
    bound: f64,
}

/// Scaled nucleus over points\[start..\]: z_start/2 + (1/π)·Σ G(ε_k/ε)(z_k+z_{k+1}),
/// with the linear part of the kernel telescoped once displacement directions
/// are frozen and the cubic-order excess summed until its bound clears tol.
fn crescent_sum(
    points: &[HPC],
    gaps: &[Float],
    start: usize,
    telescope_from: usize,
    eps: &Float,
    opts: &AreaOptions,
    p: u32,
) -> Result<CrescentSum> {
    let n_pts = points.len();
    if start + 1 >= n_pts {
        return Err(Error::Truncation(
            "orbit exhausted before the crescent sum could start".into(),
        ));
    }
    let eps_f = eps.to_f64();
    let inv_eps = Float::with_val(p, 1) / eps;
    let m_star = telescope_from.max(start).min(n_pts - 2);

    // Explicit kernel terms while the displacement direction still turns.
    let mut acc = HPC::zero(p);
    for k in start..m_star {
        let t = Float::with_val(p, &gaps[k] / eps) / 2u32;
        let g = crescent_kernel(&t);
        let zsum = &points[k] + &points[k + 1];
        acc = &acc + &zsum.scale_f(&g);
    }

    // Telescoped linear part: Σ_{k≥m} (d_k/ε)(z_k+z_{k+1}) = −ū·z_m²/ε with
    // ū the conjugate unit displacement, exact on a fixed ray.
    let delta = &points[m_star + 1] - &points[m_star];
    let dn = delta.abs();
    if dn.is_zero() {
        return Err(Error::Truncation("orbit stalled at a fixed point".into()));
    }
    let unit = delta.scale_f(&(Float::with_val(p, 1) / &dn));
    let zm = &points[m_star] * &points[m_star];
    let tele = (&unit.conj() * &zm).scale_f(&inv_eps);
    acc = &acc - &tele;

    // Direction-drift contribution to the error estimate (zero on a ray).
    let u0 = direction_f64(&points[m_star], &points[m_star + 1]);
    let mid = (m_star + n_pts - 1) / 2;
    let drift = {
        let um = direction_f64(&points[mid.min(n_pts - 2)], &points[mid.min(n_pts - 2) + 1]);
        let ul = direction_f64(&points[n_pts - 2], &points[n_pts - 1]);
        let a = (u0.0 - um.0).hypot(u0.1 - um.1);
        let b = (u0.0 - ul.0).hypot(u0.1 - ul.1);
        2.0 * a.max(b)
    };
    let zm_abs = points[m_star].abs().to_f64();
    let drift_err = 2.4 * drift * zm_abs * zm_abs / eps_f;

    // Cubic-order excess, with a per-step remainder bound.
    let z_start_half = points[start].abs().to_f64() / 2.0;
    let cap = opts
        .fixed_stop
        .unwrap_or(usize::MAX)
        .min(n_pts.saturating_sub(2));
    let mut bound = f64::INFINITY;
    let mut k = m_star;
    let mut scale_est = z_start_half.max(1e-300);
    loop {
        if k > cap {
            if opts.fixed_stop.is_some() {
                k = cap;
                break;
            }
            return Err(Error::Truncation(format!(
                "crescent remainder bound {bound:.3e} has not cleared tol_rel {:.1e} at index {k}",
                opts.tol_rel
            )));
        }
        let t = Float::with_val(p, &gaps[k] / eps) / 2u32;
        let r = crescent_kernel_excess(&t);
        let zsum = &points[k] + &points[k + 1];
        acc = &acc + &zsum.scale_f(&r);

        let t_f = t.to_f64();
        let z_next = points[(k + 1).min(n_pts - 1)].abs().to_f64();
        bound = 0.86 * t_f * t_f * z_next * z_next / (std::f64::consts::PI * eps_f);
        if k % 16 == 0 {
            let (ar, ai) = acc.to_f64_pair();
            let cur = (ar.hypot(ai) / std::f64::consts::PI + z_start_half).abs();
            scale_est = cur.max(z_start_half).max(1e-300);
        }
        if opts.fixed_stop.is_none() && k >= m_star + 4 && bound <= opts.tol_rel * scale_est {
            break;
        }
        if opts.fixed_stop == Some(k) {
            break;
        }
        k += 1;
    }

    let inv_pi = Float::with_val(p, 1) / hp::pi(p);
    let half_start = points[start].unscale_u(2);
    let scaled = match opts.bracketing {
        Bracketing::Plain => &half_start + &acc.scale_f(&inv_pi),
        Bracketing::OverPi => {
            let inner = &acc - &half_start;
            &points[start] + &inner.scale_f(&inv_pi)
        }
    };
    Ok(CrescentSum {
        scaled,
        stop_index: k,
        bound: bound + drift_err,
    })
}

fn area_view(
    points: &[HPC],
    gaps: &[Float],
    monotone_from: usize,
    telescope_from: usize,
    eps: &Float,
    opts: &AreaOptions,
    p: u32,
) -> Result<DirectedArea> {
    let ep2 = eps_sq_pi(eps, p);
    if points.len() == 1 {
        let value = points[0].scale_f(&ep2);
        return Ok(DirectedArea {
            value: value.clone(),
            tail: value.clone(),
            nucleus: HPC::zero(p),
            scaled: points[0].with_prec(p),
            n_eps: Some(0),
            stop_index: 0,
            truncation: 0.0,
        });
    }
    let s = start_index(gaps, monotone_from, eps)?;
    let mut tail_scaled = HPC::zero(p);
    for z in &points[..s] {
        tail_scaled = &tail_scaled + z;
    }
    let cres = crescent_sum(points, gaps, s, telescope_from, eps, opts, p)?;
    let tail = tail_scaled.scale_f(&ep2);
    let nucleus = cres.scaled.scale_f(&ep2);
    let value = &tail + &nucleus;
    let scaled = &tail_scaled + &cres.scaled;
    Ok(DirectedArea {
        value,
        tail,
        nucleus,
        scaled,
        n_eps: if s == 0 { None } else { Some(s - 1) },
        stop_index: cres.stop_index,
        truncation: cres.bound * eps.to_f64().powi(2) * std::f64::consts::PI,
    })
}

/// Nucleus part alone: ε²π·(z_{n_ε+1}/2 + crescent sum).
pub fn nucleus_directed_area(o: &Orbit, eps: &Float, opts: &AreaOptions) -> Result<HPC> {
    let p = o.prec().max(eps.prec());
    Ok(area_view(
        &o.points,
        &o.gaps,
        o.monotone_from,
        o.telescope_from,
        eps,
        opts,
        p,
    )?
    .nucleus)
}

/// Full decomposition on an existing orbit.
pub fn directed_area_on(o: &Orbit, eps: &Float, opts: &AreaOptions) -> Result<DirectedArea> {
    let p = o.prec().max(eps.prec());
    area_view(
        &o.points,
        &o.gaps,
        o.monotone_from,
        o.telescope_from,
        eps,
        opts,
        p,
    )
}

const DRIVER_MAX_POINTS: usize = 2_000_000;

fn orbit_sized_for(f: &Germ, z0: &HPC, eps: &Float, opts: &AreaOptions) -> Result<(Orbit, DirectedArea)> {
    let mut o = orbit(
        f,
        z0,
        &OrbitStop {
            max_n: 4000,
            min_abs: 0.0,
        },
    )?;
    loop {
        match directed_area_on(&o, eps, opts) {
            Ok(a) => return Ok((o, a)),
            Err(Error::Truncation(m)) => {
                let len = o.len();
                if len >= DRIVER_MAX_POINTS {
                    return Err(Error::Truncation(m));
                }
                o.extend_to((len * 4).min(DRIVER_MAX_POINTS))?;
                if o.len() == len {
                    return Err(Error::Truncation(m));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Directed area of the ε-neighborhood of the orbit of `f` from `z0`,
/// growing the orbit as needed for the requested tolerance.
pub fn directed_area_with(f: &Germ, z0: &HPC, eps: &Float, opts: &AreaOptions) -> Result<DirectedArea> {
    Ok(orbit_sized_for(f, z0, eps, opts)?.1)
}

/// Directed area with default options.
pub fn directed_area(f: &Germ, z0: &HPC, eps: &Float) -> Result<DirectedArea> {
    directed_area_with(f, z0, eps, &AreaOptions::default())
}

/// Both areas of the shared orbit (from z₀ and from f(z₀)), extending the
/// orbit until both crescent sums clear the tolerance.
fn area_pair(f: &Germ, z: &HPC, eps: &Float, opts: &AreaOptions) -> Result<(DirectedArea, DirectedArea)> {
    let p = z.prec().max(eps.prec());
    let mut o = orbit(
        f,
        z,
        &OrbitStop {
            max_n: 4000,
            min_abs: 0.0,
        },
    )?;
    loop {
        let both = directed_area_on(&o, eps, opts).and_then(|az| {
            let afz = area_view(
                &o.points[1..],
                &o.gaps[1..],
                o.monotone_from.saturating_sub(1),
                o.telescope_from.saturating_sub(1),
                eps,
                opts,
                p,
            )?;
            Ok((az, afz))
        });
        match both {
            Ok(pair) => return Ok(pair),
            Err(Error::Truncation(m)) => {
                let len = o.len();
                if len >= DRIVER_MAX_POINTS {
                    return Err(Error::Truncation(m));
                }
                o.extend_to((len * 4).min(DRIVER_MAX_POINTS))?;
                if o.len() == len {
                    return Err(Error::Truncation(m));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// |A(z,ε) − A(f(z),ε) − z·ε²π| — the one-step pull-back identity, valid
/// while the disc around z stays disjoint from the rest of the neighborhood.
pub fn check_functional_equation(f: &Germ, z: &HPC, eps: &Float) -> Result<Float> {
    let p = z.prec().max(eps.prec());
    let fz = f.eval(z)?;
    let eps_z = (z - &fz).abs() / 2u32;
    if *eps > eps_z {
        return Err(Error::Range(format!(
            "eps = {:.3e} exceeds the disjointness threshold {:.3e} of this point",
            eps.to_f64(),
            eps_z.to_f64()
        )));
    }
    let (a_z, a_fz) = area_pair(f, z, eps, &AreaOptions::default())?;
    let shift = z.scale_f(&eps_sq_pi(eps, p));
    let res = &(&a_z.value - &a_fz.value) - &shift;
    Ok(res.abs())
}

/// Residual of the exact overlapping-disc relation
/// A(z,ε) − A(f z,ε) + (π/2)ε²(f z − z) − ε²(z + f z)·G(|z − f z|/2ε).
pub fn crescent_relation_residual(f: &Germ, z: &HPC, eps: &Float) -> Result<Float> {
    let p = z.prec().max(eps.prec());
    let fz = f.eval(z)?;
    let d0 = (z - &fz).abs();
    let two_eps = Float::with_val(eps.prec(), eps * 2u32);
    if d0 >= two_eps {
        return Err(Error::Range(format!(
            "points are 2ε-separated (|z − f z| = {:.3e} ≥ 2ε = {:.3e})",
            d0.to_f64(),
            two_eps.to_f64()
        )));
    }
    let (a_z, a_fz) = area_pair(f, z, eps, &AreaOptions::default())?;
    let eps2 = Float::with_val(p, eps * eps);
    let half_pi_eps2 = Float::with_val(p, &eps2 * &hp::pi(p)) / 2u32;
    let t = Float::with_val(p, &d0 / eps) / 2u32;
    let g = crescent_kernel(&t);
    let lhs = &a_z.value - &a_fz.value;
    let term1 = (&fz - z).scale_f(&half_pi_eps2);
    let term2 = (z + &fz).scale_f(&Float::with_val(p, &eps2 * &g));
    let res = &(&lhs + &term1) - &term2;
    Ok(res.abs())
}

// ---------------------------------------------------------------------------
// Quadrature oracle (f64 adaptive dyadic grid).
// ---------------------------------------------------------------------------

/// Tuning for the grid-quadrature oracle.
#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Finest grid cells per ε.
    pub resolution: u32,
    /// Seed for the grid-origin jitter.
    pub seed: u64,
    pub max_cells: u64,
    /// Index from which points are treated as a polyline capsule instead of
    /// individual discs; None picks the first index whose gap is ≤ ε/64.
    pub capsule_from: Option<usize>,
    /// Extend the capsule from the last point straight into the origin.
    pub close_origin: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            resolution: 256,
            seed: 0x6f72_6269_7467_656f,
            max_cells: 50_000_000,
            capsule_from: None,
            close_origin: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleArea {
    pub value: HPC,
    pub error: f64,
    pub cells: u64,
}

fn seg_dist(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let (apx, apy) = (px - a.0, py - a.1);
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * abx, a.1 + t * aby);
    (px - cx).hypot(py - cy)
}

struct DistanceField {
    centers: Vec<(f64, f64)>,
    segments: Vec<((f64, f64), (f64, f64))>,
    min_x: f64,
    min_y: f64,
    cell: f64,
    nx: i64,
    ny: i64,
    center_buckets: Vec<Vec<u32>>,
    segment_buckets: Vec<Vec<u32>>,
}

impl DistanceField {
    fn new(centers: Vec<(f64, f64)>, segments: Vec<((f64, f64), (f64, f64))>, eps: f64) -> Self {
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        let mut feed = |x: f64, y: f64| {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        };
        for &(x, y) in &centers {
            feed(x, y);
        }
        for &(a, b) in &segments {
            feed(a.0, a.1);
            feed(b.0, b.1);
        }
        let cell = eps;
        let nx = ((max_x - min_x) / cell).floor() as i64 + 1;
        let ny = ((max_y - min_y) / cell).floor() as i64 + 1;
        let mut field = DistanceField {
            centers,
            segments,
            min_x,
            min_y,
            cell,
            nx,
            ny,
            center_buckets: vec![Vec::new(); (nx * ny) as usize],
            segment_buckets: vec![Vec::new(); (nx * ny) as usize],
        };
        for i in 0..field.centers.len() {
            let (x, y) = field.centers[i];
            let b = field.bucket_of(x, y);
            field.center_buckets[b].push(i as u32);
        }
        for i in 0..field.segments.len() {
            let (a, b) = field.segments[i];
            for bx in field.col_of(a.0.min(b.0))..=field.col_of(a.0.max(b.0)) {
                for by in field.row_of(a.1.min(b.1))..=field.row_of(a.1.max(b.1)) {
                    field.segment_buckets[(by * field.nx + bx) as usize].push(i as u32);
                }
            }
        }
        field
    }

    fn col_of(&self, x: f64) -> i64 {
        (((x - self.min_x) / self.cell).floor() as i64).clamp(0, self.nx - 1)
    }

    fn row_of(&self, y: f64) -> i64 {
        (((y - self.min_y) / self.cell).floor() as i64).clamp(0, self.ny - 1)
    }

    fn bucket_of(&self, x: f64, y: f64) -> usize {
        (self.row_of(y) * self.nx + self.col_of(x)) as usize
    }

    /// Minimum distance to the union geometry among candidates within
    /// `radius`; anything farther reports at least `radius`.
    fn min_dist(&self, x: f64, y: f64, radius: f64) -> f64 {
        let r_cells = (radius / self.cell).ceil() as i64 + 1;
        let c0 = self.col_of(x);
        let r0 = self.row_of(y);
        let mut best = f64::INFINITY;
        for by in (r0 - r_cells).max(0)..=(r0 + r_cells).min(self.ny - 1) {
            for bx in (c0 - r_cells).max(0)..=(c0 + r_cells).min(self.nx - 1) {
                let b = (by * self.nx + bx) as usize;
                for &i in &self.center_buckets[b] {
                    let (cx, cy) = self.centers[i as usize];
                    best = best.min((x - cx).hypot(y - cy));
                }
                for &i in &self.segment_buckets[b] {
                    let (a, bb) = self.segments[i as usize];
                    best = best.min(seg_dist(x, y, a, bb));
                }
            }
        }
        best
    }
}

/// ∬ (x+iy) dA over the ε-neighborhood of the given points (plus an optional
/// polyline capsule for the dense tail), by adaptive dyadic grid counting with
/// one Richardson step across the two finest depths.
pub fn directed_area_oracle(points: &[HPC], eps: &Float, opts: &OracleOptions) -> Result<OracleArea> {
    if points.is_empty() {
        return Err(Error::Precondition("oracle needs at least one point".into()));
    }
    let e = eps.to_f64();
    if !(e > 0.0) {
        return Err(Error::Precondition("oracle needs a positive radius".into()));
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|z| z.to_f64_pair()).collect();

    let capsule_from = opts.capsule_from.unwrap_or_else(|| {
        (0..pts.len().saturating_sub(1))
            .find(|&k| {
                let d = (pts[k].0 - pts[k + 1].0).hypot(pts[k].1 - pts[k + 1].1);
                d <= e / 64.0
            })
            .unwrap_or(pts.len())
    });
    let mut centers: Vec<(f64, f64)> = pts[..capsule_from.min(pts.len())].to_vec();
    if centers.is_empty() {
        centers.push(pts[0]);
    }

    // The dense tail becomes a polyline, subsampled to chords of roughly ε/32
    // with the deviation of every dropped point from its chord measured and
    // charged to the error budget.
    let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();
    let mut capsule_len = 0.0f64;
    let mut max_capsule_gap = 0.0f64;
    let mut max_chord_dev = 0.0f64;
    if capsule_from < pts.len() {
        let target = e / 32.0;
        let mut i = capsule_from.saturating_sub(1);
        while i < pts.len() - 1 {
            let mut j = i + 1;
            while j < pts.len() - 1 {
                let d = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
                if d >= target {
                    break;
                }
                j += 1;
            }
            for k in i + 1..j {
                max_chord_dev = max_chord_dev.max(seg_dist(pts[k].0, pts[k].1, pts[i], pts[j]));
            }
            for k in i..j {
                let g = (pts[k].0 - pts[k + 1].0).hypot(pts[k].1 - pts[k + 1].1);
                max_capsule_gap = max_capsule_gap.max(g);
            }
            let seg = (pts[i], pts[j]);
            capsule_len += (seg.0 .0 - seg.1 .0).hypot(seg.0 .1 - seg.1 .1);
            segments.push(seg);
            i = j;
        }
    }
    if opts.close_origin {
        let last = *pts.last().unwrap();
        segments.push((last, (0.0, 0.0)));
        capsule_len += last.0.hypot(last.1);
        if let Some(w) = pts.len().checked_sub(2) {
            let lg = (pts[w].0 - pts[w + 1].0).hypot(pts[w].1 - pts[w + 1].1);
            max_capsule_gap = max_capsule_gap.max(lg);
        }
    }

    let field = DistanceField::new(centers, segments, e);

    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let jx: f64 = rng.gen();
    let jy: f64 = rng.gen();
    let base = e / 4.0;
    let depth = (opts.resolution as f64 / 4.0).log2().ceil().max(1.0) as u32;

    let origin_x = field.min_x - e - base * (1.0 + jx);
    let origin_y = field.min_y - e - base * (1.0 + jy);
    let span_x = (field.nx as f64) * field.cell + 2.0 * (e + base) + base;
    let span_y = (field.ny as f64) * field.cell + 2.0 * (e + base) + base;
    let cols = (span_x / base).ceil() as i64 + 1;
    let rows = (span_y / base).ceil() as i64 + 1;

    // classify: 1 inside, -1 outside, 0 straddling
    let classify = |cx: f64, cy: f64, half: f64| -> i8 {
        let hd = half * std::f64::consts::SQRT_2;
        let d = field.min_dist(cx, cy, e + hd + field.cell);
        if d <= e - hd {
            1
        } else if d >= e + hd {
            -1
        } else {
            0
        }
    };

    struct Walk<'a> {
        field: &'a DistanceField,
        eps: f64,
        cells: u64,
        /// Σ |center|² over undecided cells at the finest depth.
        boundary_weight: f64,
        boundary_cells: u64,
    }
    impl Walk<'_> {
        fn go(
            &mut self,
            x: f64,
            y: f64,
            size: f64,
            depth_left: u32,
            classify: &dyn Fn(f64, f64, f64) -> i8,
        ) -> (f64, f64) {
            self.cells += 1;
            let half = size / 2.0;
            let (cx, cy) = (x + half, y + half);
            match classify(cx, cy, half) {
                1 => (size * size * cx, size * size * cy),
                -1 => (0.0, 0.0),
                _ => {
                    if depth_left == 0 {
                        self.boundary_weight += cx * cx + cy * cy;
                        self.boundary_cells += 1;
                        let d = self.field.min_dist(cx, cy, self.eps + size);
                        if d <= self.eps {
                            (size * size * cx, size * size * cy)
                        } else {
                            (0.0, 0.0)
                        }
                    } else {
                        let h = size / 2.0;
                        let mut acc = (0.0, 0.0);
                        for (dx, dy) in [(0.0, 0.0), (h, 0.0), (0.0, h), (h, h)] {
                            let c = self.go(x + dx, y + dy, h, depth_left - 1, classify);
                            acc.0 += c.0;
                            acc.1 += c.1;
                        }
                        acc
                    }
                }
            }
        }
    }

    // (value, misclassification-band scale) at one depth.
    let run = |depth_limit: u32, used: &mut u64| -> Result<((f64, f64), f64)> {
        let mut w = Walk {
            field: &field,
            eps: e,
            cells: 0,
            boundary_weight: 0.0,
            boundary_cells: 0,
        };
        let mut acc = (0.0, 0.0);
        for r in 0..rows {
            for c in 0..cols {
                let x = origin_x + (c as f64) * base;
                let y = origin_y + (r as f64) * base;
                let v = w.go(x, y, base, depth_limit, &classify);
                acc.0 += v.0;
                acc.1 += v.1;
            }
            if *used + w.cells > opts.max_cells {
                return Err(Error::Resource(format!(
                    "oracle cell budget {} exhausted",
                    opts.max_cells
                )));
            }
        }
        *used += w.cells;
        let h_fine = base / 2f64.powi(depth_limit as i32);
        let band = 0.5 * h_fine * h_fine * w.boundary_weight.sqrt();
        Ok((acc, band))
    };

    let mut cells = 0u64;
    let (coarse2, _) = run(depth.saturating_sub(2).max(1), &mut cells)?;
    let (coarse, _) = run(depth.saturating_sub(1), &mut cells)?;
    let (fine, band) = run(depth, &mut cells)?;

    let (vx, vy) = fine;
    let d1 = (fine.0 - coarse.0).hypot(fine.1 - coarse.1);
    let d2 = (coarse.0 - coarse2.0).hypot(coarse.1 - coarse2.1);
    let diff = d1.max(0.5 * d2) + band;

    let scallop = max_capsule_gap * max_capsule_gap / (8.0 * e) + max_chord_dev;
    let reach = pts
        .iter()
        .map(|&(x, y)| x.hypot(y))
        .fold(0.0f64, f64::max);
    let capsule_err =
        2.0 * (capsule_len + std::f64::consts::PI * e) * scallop * (reach + e);

    let p = eps.prec().max(64);
    Ok(OracleArea {
        value: HPC::from_f64(p, vx, vy),
        error: diff + capsule_err,
        cells,
    })
}

/// Oracle applied to an orbit: dense tail as a capsule closed into the origin.
pub fn oracle_for_orbit(o: &Orbit, eps: &Float, resolution: u32) -> Result<OracleArea> {
    let opts = OracleOptions {
        resolution,
        close_origin: true,
        ..OracleOptions::default()
    };
    directed_area_oracle(&o.points, eps, &opts)
}

// ---------------------------------------------------------------------------
// Second-derivative probe.
// ---------------------------------------------------------------------------

/// Report of the finite-difference probe of d²/dε² [A(ε)/(ε²π)] at ε_n.
#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub left_limit: HPC,
    /// Relative change of the left value under halving the difference step.
    pub left_stability: f64,
    /// (offset δ, second derivative at ε_n + δ).
    pub right_samples: Vec<(Float, HPC)>,
    /// Slope of log|D2 − left| against log δ on the right side.
    pub fitted_exponent: f64,
    /// z_n + z_{n+1} recovered from the coefficient of the δ^{-1/2} blow-up.
    pub blowup_coefficient: HPC,
    pub precision_raised: bool,
}

/// Offsets spanning (gap/256, gap/16) of the spacing to the previous threshold.
pub fn default_probe_offsets(o: &Orbit, n: usize) -> Result<Vec<Float>> {
    if n == 0 || n >= o.gaps.len() {
        return Err(Error::Precondition(format!(
            "probe index {n} needs thresholds on both sides"
        )));
    }
    let gap = o.threshold(n - 1) - o.threshold(n);
    Ok([256u32, 128, 64, 32, 16]
        .iter()
        .map(|&d| gap.clone() / d)
        .collect())
}

fn five_point_d2<F>(f: &F, e0: &Float, h: &Float) -> Result<(HPC, f64)>
where
    F: Fn(&Float) -> Result<HPC>,
{
    let p = e0.prec();
    let at = |j: i32| -> Float {
        let off = Float::with_val(p, h * j);
        Float::with_val(p, e0 + &off)
    };
    let fm2 = f(&at(-2))?;
    let fm1 = f(&at(-1))?;
    let f0 = f(&at(0))?;
    let fp1 = f(&at(1))?;
    let fp2 = f(&at(2))?;
    let mut num = &fm1 + &fp1;
    num = num.scale(16.0);
    num = &num - &(&fm2 + &fp2);
    num = &num - &f0.scale(30.0);
    let cancel = num.abs().to_f64() / (30.0 * f0.abs().to_f64()).max(1e-300);
    let denom = Float::with_val(p, h * h) * 12u32;
    Ok((num.scale_f(&denom.recip()), cancel))
}

fn probe_pass(o: &Orbit, n: usize, offsets: &[Float]) -> Result<ProbeReport> {
    let p = o.prec();
    if n == 0 || n >= o.gaps.len() {
        return Err(Error::Precondition(format!(
            "probe index {n} needs thresholds on both sides"
        )));
    }
    let eps_n = o.threshold(n);
    let gap_prev = o.threshold(n - 1) - eps_n.clone();
    let quarter = Float::with_val(p, &gap_prev / 4u32);
    let mut max_off = Float::new(p);
    let mut min_off = Float::with_val(p, &gap_prev);
    for d in offsets {
        if *d <= 0u32 || *d > quarter {
            return Err(Error::Precondition(format!(
                "offset {:.3e} outside (0, {:.3e})",
                d.to_f64(),
                quarter.to_f64()
            )));
        }
        if *d > max_off {
            max_off = d.clone();
        }
        if *d < min_off {
            min_off = d.clone();
        }
    }
    if offsets.len() < 3 {
        return Err(Error::Precondition(
            "the blow-up fit needs at least three offsets".into(),
        ));
    }

    let digits = (p as f64 / std::f64::consts::LOG2_10).floor() as i32;
    let h_floor = 10f64.powi(-(digits - 6).max(4));
    let mut h = Float::with_val(p, &eps_n) * 1e-5f64;
    if h.to_f64() < h_floor {
        h = hp::real(p, h_floor);
    }

    // Freeze the crescent cutoff using the smallest ε the stencils will see.
    let eps_min = Float::with_val(p, &eps_n - &max_off) - Float::with_val(p, &h * 2u32);
    let base_opts = AreaOptions::with_tol(1e-13);
    let probe0 = directed_area_on(o, &eps_min, &base_opts)?;
    let opts = AreaOptions {
        fixed_stop: Some(probe0.stop_index + 16),
        ..base_opts
    };
    let f_scaled = |e: &Float| -> Result<HPC> { Ok(directed_area_on(o, e, &opts)?.scaled) };

    // Left limit and its step-refinement stability.
    let e_left = Float::with_val(p, &eps_n - &min_off);
    let (d2_left_h, c1) = five_point_d2(&f_scaled, &e_left, &h)?;
    let h_half = Float::with_val(p, &h / 2u32);
    let (d2_left, c2) = five_point_d2(&f_scaled, &e_left, &h_half)?;
    let left_stability =
        (&d2_left - &d2_left_h).abs().to_f64() / d2_left.abs().to_f64().max(1e-300);

    // Right samples.
    let mut right_samples = Vec::with_capacity(offsets.len());
    let mut worst_cancel = c1.min(c2);
    for d in offsets {
        let e_right = Float::with_val(p, &eps_n + d);
        let (d2, c) = five_point_d2(&f_scaled, &e_right, &h)?;
        worst_cancel = worst_cancel.min(c);
        right_samples.push((d.clone(), d2));
    }
    let cancel_floor = 1e5 * 2f64.powi(-(p as i32));
    if worst_cancel < cancel_floor {
        return Err(Error::Precision(format!(
            "finite differences cancel to {worst_cancel:.1e} of the function scale at {digits} digits"
        )));
    }

    // Exponent of the blow-up after removing the finite background.
    let logs: Vec<(f64, f64)> = right_samples
        .iter()
        .map(|(d, v)| {
            let y = (v - &d2_left).abs().to_f64();
            (d.to_f64().ln(), y.max(1e-300).ln())
        })
        .collect();
    let n_s = logs.len() as f64;
    let mx = logs.iter().map(|l| l.0).sum::<f64>() / n_s;
    let my = logs.iter().map(|l| l.1).sum::<f64>() / n_s;
    let sxx = logs.iter().map(|l| (l.0 - mx) * (l.0 - mx)).sum::<f64>();
    let sxy = logs.iter().map(|l| (l.0 - mx) * (l.1 - my)).sum::<f64>();
    let fitted_exponent = sxy / sxx;

    // Blow-up coefficient from the {δ^{-1/2}, 1, δ^{1/2}, δ} fit; the linear
    // column absorbs the drift of the smooth background across the offsets.
    let rows: Vec<Vec<HPC>> = right_samples
        .iter()
        .map(|(d, _)| {
            let s = d.clone().sqrt();
            vec![
                HPC::from_re(s.clone().recip()),
                HPC::one(p),
                HPC::from_re(s),
                HPC::from_re(d.clone()),
            ]
        })
        .collect();
    let rhs: Vec<HPC> = right_samples.iter().map(|(_, v)| v.clone()).collect();
    let fit = least_squares(&rows, &rhs)?;
    let c_hat = &fit.coeffs[0];
    let factor = {
        let sqrt2 = Float::with_val(p, 2).sqrt();
        Float::with_val(p, &eps_n * &eps_n.clone().sqrt()) * hp::pi(p) / sqrt2
    };
    let blowup_coefficient = -&c_hat.scale_f(&factor);

    Ok(ProbeReport {
        left_limit: d2_left,
        left_stability,
        right_samples,
        fitted_exponent,
        blowup_coefficient,
        precision_raised: false,
    })
}

/// Probe the ε_n threshold: left limit of the second derivative, right-side
/// samples, the fitted blow-up exponent, and the recovered z_n + z_{n+1}.
/// Raises the working precision to 32 digits once if the differences cancel.
pub fn second_derivative_probe(o: &Orbit, n: usize, offsets: &[Float]) -> Result<ProbeReport> {
    match probe_pass(o, n, offsets) {
        Err(Error::Precision(m)) => {
            let p32 = hp::bits(32);
            if o.prec() >= p32 {
                return Err(Error::Precision(m));
            }
            let z0 = o.points[0].with_prec(p32);
            let hi = orbit(
                &o.germ,
                &z0,
                &OrbitStop {
                    max_n: o.len().max(4000),
                    min_abs: 0.0,
                },
            )?;
            let offs: Vec<Float> = offsets
                .iter()
                .map(|d| Float::with_val(p32, d))
                .collect();
            let mut rep = probe_pass(&hi, n, &offs)?;
            rep.precision_raised = true;
            Ok(rep)
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Reconstruction of thresholds and midpoint sums from the area function.
// ---------------------------------------------------------------------------

/// Thresholds and midpoint sums recovered from a black-box area function.
#[derive(Clone, Debug)]
pub struct ReconstructionReport {
    /// Detected overlap thresholds, in decreasing order.
    pub thresholds: Vec<Float>,
    /// Recovered z_n + z_{n+1} at each threshold, aligned with `thresholds`.
    pub midpoint_sums: Vec<HPC>,
}

const SPIKE_FACTOR: f64 = 8.0;

/// Localize the square-root kinks of ε ↦ A(ε)/(ε²π) by scanning second
/// differences, refine each by sampled bisection, polish with a three-point
/// blow-up solve, and read the midpoint sums off the blow-up coefficients.
pub fn reconstruct_orbit_from_area<F>(
    area_fn: &F,
    lo: &Float,
    hi: &Float,
    scan_step: &Float,
) -> Result<ReconstructionReport>
where
    F: Fn(&Float) -> Result<HPC> + Sync,
{
    let p = lo.prec();
    if !(*lo > 0u32) || *hi <= *lo || !(*scan_step > 0u32) {
        return Err(Error::Precondition("need 0 < lo < hi and a positive step".into()));
    }
    let span = Float::with_val(p, hi - lo);
    let n_grid = (span / scan_step).to_f64().floor() as usize + 1;
    if n_grid < 8 {
        return Err(Error::Precondition("scan grid too coarse to detect anything".into()));
    }
    if n_grid > 100_000 {
        return Err(Error::Resource(format!("scan grid of {n_grid} points over budget")));
    }

    let f_scaled = |e: &Float| -> Result<HPC> {
        let a = area_fn(e)?;
        let denom = eps_sq_pi(e, p);
        Ok(a.scale_f(&denom.recip()))
    };

    let grid: Vec<Float> = (0..n_grid)
        .map(|i| {
            let off = Float::with_val(p, scan_step * (i as u32));
            Float::with_val(p, lo + &off)
        })
        .collect();
    let values: Vec<HPC> = grid
        .par_iter()
        .map(|e| f_scaled(e))
        .collect::<Result<Vec<_>>>()?;

    let mut d2 = vec![0.0f64; n_grid];
    for i in 1..n_grid - 1 {
        let s = &(&values[i + 1] + &values[i - 1]) - &values[i].scale(2.0);
        d2[i] = s.abs().to_f64();
    }

    // A kink moves the second-difference sequence by O(step^{3/2}) between
    // adjacent samples, while the background — whose own curvature peaks are
    // large but smooth — moves by O(step^3). Flag jumps that dwarf the slopes
    // on the quieter side of their own neighborhood; the quieter-side rule
    // keeps the post-kink ramp from masking the kink itself.
    let med_of = |buf: &mut Vec<f64>| -> f64 {
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        buf[buf.len() / 2]
    };
    let mut jump = vec![0.0f64; n_grid];
    for i in 2..n_grid - 1 {
        jump[i] = (d2[i] - d2[i - 1]).abs();
    }
    let value_scale = values
        .iter()
        .map(|v| v.abs().to_f64())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let floor = 1e-24 * value_scale;
    let mut spike = vec![false; n_grid];
    for i in 2..n_grid - 1 {
        let mut left: Vec<f64> = (i.saturating_sub(12).max(2)..=i.saturating_sub(3))
            .map(|j| jump[j])
            .collect();
        let mut right: Vec<f64> = (i + 3..=(i + 12).min(n_grid - 2))
            .map(|j| jump[j])
            .collect();
        let noise = match (left.is_empty(), right.is_empty()) {
            (true, true) => continue,
            (false, true) => med_of(&mut left),
            (true, false) => med_of(&mut right),
            (false, false) => med_of(&mut left).min(med_of(&mut right)),
        };
        spike[i] = jump[i] > SPIKE_FACTOR * noise.max(floor);
    }
    if !spike.iter().any(|&s| s) {
        return Err(Error::Detection(
            "no curvature spike clears the local noise threshold".into(),
        ));
    }

    // Cluster consecutive spike indices.
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut i = 1;
    while i < n_grid - 1 {
        if spike[i] {
            let s = i;
            while i < n_grid - 1 && spike[i] {
                i += 1;
            }
            clusters.push((s, i - 1));
        } else {
            i += 1;
        }
    }

    let mut thresholds: Vec<Float> = Vec::new();
    let mut sums: Vec<HPC> = Vec::new();
    for (s, t) in clusters {
        let mut a = grid[s.saturating_sub(1)].to_f64();
        let mut b = grid[(t + 1).min(n_grid - 1)].to_f64();

        // Shrink the bracket by rescanning jumps of the second difference at
        // ever finer node spacing: the kink's jump scales like w^{3/2}
        // against the background's w^3, so the largest jump pins the kink
        // more reliably as the spacing shrinks. The max-|Δ²| node, by
        // contrast, can sit on a background curvature peak.
        while b - a > (a + b) * 1e-5 {
            let w = (b - a) / 16.0;
            let mut vals = Vec::with_capacity(17);
            for j in 0..17 {
                vals.push(f_scaled(&hp::real(p, a + w * j as f64))?);
            }
            let mut dd = [0.0f64; 17];
            for j in 1..16 {
                let c = &(&vals[j + 1] + &vals[j - 1]) - &vals[j].scale(2.0);
                dd[j] = c.abs().to_f64();
            }
            let mut jbest = 2;
            let mut best = -1.0f64;
            for j in 2..16 {
                let m = (dd[j] - dd[j - 1]).abs();
                if m > best {
                    best = m;
                    jbest = j;
                }
            }
            let base = a;
            a = base + w * (jbest as f64 - 2.0);
            b = base + w * (jbest as f64 + 1.0);
        }
        let mut est = 0.5 * (a + b);
        let width = (b - a).max(est * 1e-12);

        // Polish by sliding the blow-up abscissa: sample the second
        // derivative on the right of the candidate, fit it against
        // {(ε−s)^{-1/2}, 1, (ε−s)^{1/2}, ε−s}, and take the s minimizing the
        // fit residual. The extra columns absorb the smooth background, whose
        // drift would bias any solve that models the singular part alone.
        let mut reach = 4.0 * width;
        let mut blowup = HPC::one(p);
        let mut round = 0;
        let mut widenings = 0;
        while round < 3 {
            let delta = (4.0 * reach).max(est * 2e-4);
            let h = hp::real(p, delta / 16.0);
            let mut es = [0.0f64; 5];
            let mut ys = Vec::with_capacity(5);
            for (j, m) in [1.0, 2.0, 4.0, 8.0, 16.0].iter().enumerate() {
                es[j] = est + delta * m;
                let (v, _) = five_point_d2(&f_scaled, &hp::real(p, es[j]), &h)?;
                ys.push(v);
            }
            let fit_at = |s: f64| -> Result<(f64, HPC)> {
                let mut rows = Vec::with_capacity(5);
                for &e in &es {
                    let d = hp::real(p, e - s);
                    let sq = d.clone().sqrt();
                    rows.push(vec![
                        HPC::from_re(sq.clone().recip()),
                        HPC::one(p),
                        HPC::from_re(sq),
                        HPC::from_re(d),
                    ]);
                }
                let fit = least_squares(&rows, &ys)?;
                Ok((fit.residual_norm, fit.coeffs[0].clone()))
            };
            let lo_b = est - reach;
            let hi_b = est + reach.min(0.5 * delta);
            let (mut x0, mut x1) = (lo_b, hi_b);
            for _ in 0..48 {
                let m1 = x0 + (x1 - x0) / 3.0;
                let m2 = x1 - (x1 - x0) / 3.0;
                if fit_at(m1)?.0 <= fit_at(m2)?.0 {
                    x1 = m2;
                } else {
                    x0 = m1;
                }
            }
            let smin = 0.5 * (x0 + x1);
            let margin = 0.02 * (hi_b - lo_b);
            est = smin;
            blowup = fit_at(smin)?.1;
            // A minimum pinned to either edge means the kink sits outside
            // the bracket: re-center and re-sample at a widened reach.
            if widenings < 3 && (smin - lo_b < margin || hi_b - smin < margin) {
                widenings += 1;
                reach *= 2.0;
                continue;
            }
            round += 1;
            reach /= 8.0;
        }
        let eps_hat = hp::real(p, est);
        let factor = {
            let sqrt2 = Float::with_val(p, 2).sqrt();
            Float::with_val(p, &eps_hat * &eps_hat.clone().sqrt()) * hp::pi(p) / sqrt2
        };
        let s_hat = -&blowup.scale_f(&factor);

        thresholds.push(eps_hat);
        sums.push(s_hat);
    }

    let mut order: Vec<usize> = (0..thresholds.len()).collect();
    order.sort_by(|&i, &j| thresholds[j].partial_cmp(&thresholds[i]).unwrap());
    Ok(ReconstructionReport {
        thresholds: order.iter().map(|&i| thresholds[i].clone()).collect(),
        midpoint_sums: order.iter().map(|&i| sums[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::germ::{fixture, Germ};
    use crate::series::Series;
    use proptest::prelude::*;

    const P: u32 = 133;

    fn c(re: f64, im: f64) -> HPC {
        HPC::from_f64(P, re, im)
    }

    fn model_orbit(len: usize) -> Orbit {
        let f0 = fixture("f0", P, 8).unwrap();
        orbit(
            &f0,
            &c(-0.5, 0.0),
            &OrbitStop {
                max_n: len,
                min_abs: 0.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn orbit_points_gaps_and_degenerate_inputs() {
        let o = model_orbit(5);
        assert_eq!(o.len(), 6);
        for (n, z) in o.points().iter().enumerate() {
            let want = -&HPC::one(P).unscale_u(n as u32 + 2);
            assert!((z - &want).abs().to_f64() < 1e-38, "point {n}");
        }
        let want_d0 = Float::with_val(P, 1) / 6u32;
        assert!((o.gaps()[0].clone() - &want_d0).to_f64().abs() < 1e-38);
        let want_e0 = Float::with_val(P, 1) / 12u32;
        assert!((o.threshold(0) - &want_e0).to_f64().abs() < 1e-38);
        assert_eq!(o.monotone_from(), 0);

        let f0 = fixture("f0", P, 8).unwrap();
        assert!(matches!(
            orbit(&f0, &HPC::zero(P), &OrbitStop::default()),
            Err(Error::Precondition(_))
        ));

        // The identity germ orbits are single points.
        let id = Germ::from_series("id", Series::identity(P, 4));
        let o1 = orbit(&id, &c(0.2, 0.1), &OrbitStop::default()).unwrap();
        assert_eq!(o1.len(), 1);
    }

    #[test]
    fn orbit_min_abs_floor_stops_early() {
        let f0 = fixture("f0", P, 8).unwrap();
        let o = orbit(
            &f0,
            &c(-0.5, 0.0),
            &OrbitStop {
                max_n: 100_000,
                min_abs: 1e-3,
            },
        )
        .unwrap();
        assert!(o.reached_min_abs());
        assert!(o.points().last().unwrap().abs().to_f64() < 1e-3);
        assert!(o.len() < 1100);
    }

    #[test]
    fn separation_index_examples_and_bounds() {
        let o = model_orbit(200);
        assert_eq!(separation_index(&o, &hp::real(P, 0.01)).unwrap(), 4);
        assert_eq!(separation_index(&o, &o.threshold(3)).unwrap(), 3);
        assert_eq!(separation_index(&o, &hp::real(P, 1e-4)).unwrap(), 68);
        // ε beyond every gap: error
        assert!(matches!(
            separation_index(&o, &hp::real(P, 0.2)),
            Err(Error::Range(_))
        ));
        // Orbit too short for a deep threshold.
        let short = model_orbit(10);
        assert!(matches!(
            separation_index(&short, &hp::real(P, 1e-6)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn tail_matches_harmonic_partial_sum() {
        let o = model_orbit(4000);
        let eps = hp::real(P, 0.01);
        let tail = tail_directed_area(&o, &eps).unwrap();
        // Σ_{l=0}^{4} z_l = −(1/2+…+1/6) = −87/60
        let want_mag = Float::with_val(P, 87) / 60u32;
        let want = HPC::from_re(-(want_mag * eps_sq_pi(&eps, P)));
        assert!((&tail - &want).abs().to_f64() < 1e-37);

        // n_ε = 0 band: single head disc.
        let eps2 = hp::real(P, 0.045);
        let tail2 = tail_directed_area(&o, &eps2).unwrap();
        let want2 = c(-0.5, 0.0).scale_f(&eps_sq_pi(&eps2, P));
        assert!((&tail2 - &want2).abs().to_f64() < 1e-37);
    }

    #[test]
    fn decomposition_is_additive_exactly() {
        let o = model_orbit(4000);
        let eps = hp::real(P, 0.01);
        let a = directed_area_on(&o, &eps, &AreaOptions::default()).unwrap();
        assert_eq!(a.n_eps, Some(4));
        let re_sum = &a.tail + &a.nucleus;
        assert!((&re_sum - &a.value).abs().to_f64() == 0.0);
        // Scaled view is the same quantity.
        let back = a.scaled.scale_f(&eps_sq_pi(&eps, P));
        assert!((&back - &a.value).abs().to_f64() < 1e-40);
    }

    #[test]
    fn telescoped_sum_matches_direct_kernel_sum() {
        let o = model_orbit(30_000);
        let eps = hp::real(P, 0.01);
        let s = start_index(o.gaps(), o.monotone_from(), &eps).unwrap();

        // Direct kernel sum truncated at K, with the telescoped closure of the
        // remainder applied at K: both represent the same infinite sum.
        let big_k = 20_000usize;
        let mut acc = HPC::zero(P);
        for k in s..big_k {
            let t = Float::with_val(P, &o.gaps()[k] / &eps) / 2u32;
            let g = crescent_kernel(&t);
            let zsum = o.point(k) + o.point(k + 1);
            acc = &acc + &zsum.scale_f(&g);
        }
        // remainder: linear part telescopes to −z_K²/ε (real ray), excess ~ 1e-21
        let zk = o.point(big_k);
        let rem = (zk * zk).scale_f(&(Float::with_val(P, 1) / &eps));
        acc = &acc - &rem;
        let inv_pi = Float::with_val(P, 1) / hp::pi(P);
        let direct = &o.point(s).unscale_u(2) + &acc.scale_f(&inv_pi);

        let fast = directed_area_on(&o, &eps, &AreaOptions::default()).unwrap();
        let nucleus_scaled = &fast.scaled
            - &{
                let mut t = HPC::zero(P);
                for z in &o.points()[..s] {
                    t = &t + z;
                }
                t
            };
        assert!(
            (&direct - &nucleus_scaled).abs().to_f64() < 1e-15,
            "telescoped vs direct diverge: {:.3e}",
            (&direct - &nucleus_scaled).abs().to_f64()
        );
    }

    #[test]
    fn nucleus_is_continuous_across_thresholds() {
        let o = model_orbit(60_000);
        let eps6 = o.threshold(6);
        let h = Float::with_val(P, &eps6) * 1e-11f64;
        let opts = AreaOptions::default();
        let above = directed_area_on(&o, &Float::with_val(P, &eps6 + &h), &opts).unwrap();
        let below = directed_area_on(&o, &Float::with_val(P, &eps6 - &h), &opts).unwrap();
        assert_eq!(above.n_eps, Some(5));
        assert_eq!(below.n_eps, Some(6));
        let jump = (&above.scaled - &below.scaled).abs().to_f64();
        assert!(jump < 1e-10, "C0 jump {jump:.3e}");

        // First differences from both sides approach a common limit like √δ.
        let slope = |delta: f64| {
            let d = Float::with_val(P, &eps6) * delta;
            let ep = Float::with_val(P, &eps6 + &d);
            let em = Float::with_val(P, &eps6 - &d);
            let fp = directed_area_on(&o, &ep, &opts).unwrap().scaled;
            let fm = directed_area_on(&o, &em, &opts).unwrap().scaled;
            (&fp - &fm).scale_f(&(Float::with_val(P, &d * 2u32)).recip())
        };
        let s1 = slope(1e-4);
        let s2 = slope(1e-5);
        let s3 = slope(1e-6);
        let d12 = (&s1 - &s2).abs().to_f64();
        let d23 = (&s2 - &s3).abs().to_f64();
        assert!(d23 < 0.6 * d12, "derivative not converging: {d12:.3e} then {d23:.3e}");
        assert!(d23 < 5e-2);
    }

    #[test]
    fn functional_equation_examples_and_range_error() {
        for name in ["f0", "log2exp"] {
            let f = fixture(name, P, 16).unwrap();
            let r = check_functional_equation(&f, &c(-0.3, 0.0), &hp::real(P, 0.005)).unwrap();
            assert!(r.to_f64() < 1e-12, "{name}: residual {:.3e}", r.to_f64());
        }
        let f0 = fixture("f0", P, 8).unwrap();
        let z = c(-0.3, 0.0);
        let fz = f0.eval(&z).unwrap();
        let eps_z = (&z - &fz).abs() / 2u32;
        let too_big = Float::with_val(P, &eps_z) * 1.2f64;
        assert!(matches!(
            check_functional_equation(&f0, &z, &too_big),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn crescent_relation_examples_and_range_error() {
        let f0 = fixture("f0", P, 8).unwrap();
        let r = crescent_relation_residual(&f0, &c(-0.05, 0.0), &hp::real(P, 0.01)).unwrap();
        assert!(r.to_f64() < 1e-12, "residual {:.3e}", r.to_f64());

        // Non-overlapping points are rejected.
        assert!(matches!(
            crescent_relation_residual(&f0, &c(-0.3, 0.0), &hp::real(P, 0.005)),
            Err(Error::Range(_))
        ));

        // Kernel boundary value G(1) = π/2.
        let g1 = crescent_kernel(&hp::real(P, 1.0));
        assert!((g1 - hp::pi(P) / 2u32).to_f64().abs() < 1e-35);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 20, .. ProptestConfig::default() })]

        #[test]
        fn functional_equation_random(r in 0.08f64..0.3, th in -0.8f64..0.8, u in 0.05f64..0.98) {
            let f0 = fixture("f0", P, 8).unwrap();
            let z = c(-r * th.cos(), -r * th.sin());
            let fz = f0.eval(&z).unwrap();
            let eps = Float::with_val(P, (&z - &fz).abs() / 2u32) * u;
            if eps.to_f64() > 1e-5 {
                let res = check_functional_equation(&f0, &z, &eps).unwrap();
                prop_assert!(res.to_f64() < 1e-12, "residual {:.3e}", res.to_f64());
            }
        }

        #[test]
        fn crescent_relation_random(r in 0.08f64..0.3, th in -0.8f64..0.8, u in 1.05f64..4.0) {
            let f = fixture("log2exp", P, 16).unwrap();
            let z = c(-r * th.cos(), -r * th.sin());
            let fz = f.eval(&z).unwrap();
            let eps = Float::with_val(P, (&z - &fz).abs() / 2u32) * u;
            let res = crescent_relation_residual(&f, &z, &eps).unwrap();
            prop_assert!(res.to_f64() < 1e-12, "residual {:.3e}", res.to_f64());
        }
    }

    #[test]
    fn oracle_reference_shapes() {
        let eps = hp::real(P, 0.1);
        let opts = OracleOptions::default();

        // Single disc: centroid at its center.
        let one = directed_area_oracle(&[c(1.0, 0.0)], &eps, &opts).unwrap();
        let want = std::f64::consts::PI * 0.01;
        assert!(one.error < 2e-4 * want.abs().max(1.0));
        assert!((one.value.to_f64_pair().0 - want).abs() <= 3.0 * one.error.max(1e-9));

        // Two symmetric discs cancel.
        let two = directed_area_oracle(&[c(1.0, 0.0), c(-1.0, 0.0)], &eps, &opts).unwrap();
        assert!(two.value.abs().to_f64() <= 3.0 * two.error.max(1e-9));

        // Overlapping pair against the closed two-disc form.
        let d = 0.12f64;
        let pair = directed_area_oracle(&[c(0.0, 0.0), c(d, 0.0)], &eps, &opts).unwrap();
        let e = 0.1f64;
        let lens = 2.0 * e * e * (d / (2.0 * e)).acos()
            - (d / 2.0) * (4.0 * e * e - d * d).sqrt();
        let want_pair = std::f64::consts::PI * e * e * d - lens * (d / 2.0);
        assert!(
            (pair.value.to_f64_pair().0 - want_pair).abs() <= 3.0 * pair.error,
            "oracle {} vs closed form {} (err {:.2e})",
            pair.value.to_f64_pair().0,
            want_pair,
            pair.error
        );
        assert!(pair.value.to_f64_pair().1.abs() <= 3.0 * pair.error);
    }

    #[test]
    fn oracle_budget_is_enforced() {
        let eps = hp::real(P, 0.1);
        let opts = OracleOptions {
            max_cells: 50,
            ..OracleOptions::default()
        };
        assert!(matches!(
            directed_area_oracle(&[c(1.0, 0.0)], &eps, &opts),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn formula_agrees_with_oracle_and_fixes_bracketing() {
        let o = model_orbit(60_000);
        let eps = hp::real(P, 0.02);
        let plain = directed_area_on(&o, &eps, &AreaOptions::default()).unwrap();
        let overpi = directed_area_on(
            &o,
            &eps,
            &AreaOptions {
                bracketing: Bracketing::OverPi,
                ..AreaOptions::default()
            },
        )
        .unwrap();
        let oracle = oracle_for_orbit(&o, &eps, 1024).unwrap();
        let d_plain = (&plain.value - &oracle.value).abs().to_f64();
        let d_overpi = (&overpi.value - &oracle.value).abs().to_f64();
        assert!(
            d_plain <= 3.0 * oracle.error,
            "plain variant off by {d_plain:.3e} vs oracle error {:.3e}",
            oracle.error
        );
        assert!(
            d_overpi > 10.0 * oracle.error,
            "the rejected bracketing is indistinguishable: {d_overpi:.3e} vs {:.3e}",
            oracle.error
        );
        // Relative agreement of the kept variant.
        assert!(d_plain <= 1e-3 * plain.value.abs().to_f64());
    }

    #[test]
    fn oracle_agreement_on_tail_and_other_starts() {
        let o = model_orbit(60_000);
        let eps = hp::real(P, 0.01);
        let n_eps = separation_index(&o, &eps).unwrap();

        // Tail discs only: disjoint union, no capsule.
        let head = &o.points()[..=n_eps];
        let opts = OracleOptions {
            capsule_from: Some(head.len()),
            ..OracleOptions::default()
        };
        let otail = directed_area_oracle(head, &eps, &opts).unwrap();
        let tail = tail_directed_area(&o, &eps).unwrap();
        let d = (&tail - &otail.value).abs().to_f64();
        assert!(d <= 3.0 * otail.error && d <= 1e-3 * tail.abs().to_f64());

        // Full area from a different starting point.
        let f0 = fixture("f0", P, 8).unwrap();
        let z = c(-0.3, 0.0);
        let eps2 = hp::real(P, 0.005);
        let (orb, area) = orbit_sized_for(&f0, &z, &eps2, &AreaOptions::default()).unwrap();
        let oracle = oracle_for_orbit(&orb, &eps2, 512).unwrap();
        let diff = (&area.value - &oracle.value).abs().to_f64();
        assert!(
            diff <= (3.0 * oracle.error).max(1e-3 * area.value.abs().to_f64()),
            "diff {diff:.3e}, oracle err {:.3e}",
            oracle.error
        );
    }

    #[test]
    fn driver_extends_where_fixed_orbit_truncates() {
        let short = model_orbit(200);
        let eps = hp::real(P, 1e-3);
        assert!(matches!(
            directed_area_on(&short, &eps, &AreaOptions::default()),
            Err(Error::Truncation(_))
        ));
        let f0 = fixture("f0", P, 8).unwrap();
        let a = directed_area(&f0, &c(-0.5, 0.0), &eps).unwrap();
        assert!(a.n_eps.unwrap() > 15);
        assert!(a.truncation < 1e-12 * a.value.abs().to_f64());
    }

    #[test]
    fn probe_recovers_blowup_at_n6() {
        let o = model_orbit(20_000);
        let offsets = default_probe_offsets(&o, 6).unwrap();
        let rep = second_derivative_probe(&o, 6, &offsets).unwrap();
        assert!(
            rep.fitted_exponent > -0.55 && rep.fitted_exponent < -0.45,
            "exponent {}",
            rep.fitted_exponent
        );
        let want = -(1.0 / 8.0 + 1.0 / 9.0);
        let got = rep.blowup_coefficient.to_f64_pair();
        assert!(
            (got.0 - want).abs() < 1e-3 && got.1.abs() < 1e-3,
            "recovered {got:?}, want {want}"
        );
        assert!(rep.left_stability < 1e-4);
        assert!(rep.left_limit.is_finite());
        assert!(!rep.precision_raised);
    }

    #[test]
    fn probe_raises_precision_when_digits_vanish() {
        let p_low = hp::bits(10);
        let f0 = fixture("f0", p_low, 8).unwrap();
        let o = orbit(
            &f0,
            &HPC::from_f64(p_low, -0.5, 0.0),
            &OrbitStop {
                max_n: 20_000,
                min_abs: 0.0,
            },
        )
        .unwrap();
        let offsets = default_probe_offsets(&o, 6).unwrap();
        let rep = second_derivative_probe(&o, 6, &offsets).unwrap();
        assert!(rep.precision_raised);
        let want = -(1.0 / 8.0 + 1.0 / 9.0);
        assert!((rep.blowup_coefficient.to_f64_pair().0 - want).abs() < 1e-3);
    }

    #[test]
    fn reconstruction_recovers_thresholds_and_sums() {
        let f0 = fixture("f0", P, 8).unwrap();
        let o = orbit(
            &f0,
            &c(-0.5, 0.0),
            &OrbitStop {
                max_n: 40_000,
                min_abs: 0.0,
            },
        )
        .unwrap();
        let opts = AreaOptions::with_tol(1e-12);
        let area_fn = |e: &Float| -> Result<HPC> { Ok(directed_area_on(&o, e, &opts)?.value) };
        let rep = reconstruct_orbit_from_area(
            &area_fn,
            &hp::real(P, 5e-3),
            &hp::real(P, 3e-2),
            &hp::real(P, 1e-4),
        )
        .unwrap();
        // Thresholds ε_2..ε_7 live in [5e-3, 3e-2].
        let expect: Vec<(usize, f64)> = (2..=7)
            .map(|n| (n, 0.5 / (((n + 2) * (n + 3)) as f64)))
            .collect();
        assert_eq!(rep.thresholds.len(), expect.len(), "{:?}", rep.thresholds);
        for ((n, want), (got, sum)) in expect
            .iter()
            .zip(rep.thresholds.iter().zip(rep.midpoint_sums.iter()))
        {
            assert!(
                (got.to_f64() - want).abs() < 1e-8,
                "threshold for n={n}: got {}, want {want}",
                got.to_f64()
            );
            let want_sum = -(1.0 / (*n as f64 + 2.0) + 1.0 / (*n as f64 + 3.0));
            let gs = sum.to_f64_pair();
            assert!(
                (gs.0 - want_sum).abs() < 1e-3 && gs.1.abs() < 1e-3,
                "sum for n={n}: got {gs:?}, want {want_sum}"
            );
        }

        // A featureless input yields a detection error.
        let flat = |e: &Float| -> Result<HPC> { Ok(HPC::from_re(Float::with_val(P, e * e))) };
        assert!(matches!(
            reconstruct_orbit_from_area(
                &flat,
                &hp::real(P, 5e-3),
                &hp::real(P, 3e-2),
                &hp::real(P, 1e-4)
            ),
            Err(Error::Detection(_))
        ));
    }

    #[test]
    fn orbit_json_dump_is_consistent() {
        let o = model_orbit(5);
        let v = o.to_json(20);
        assert_eq!(v["points"].as_array().unwrap().len(), 6);
        assert_eq!(v["gaps"].as_array().unwrap().len(), 5);
        assert_eq!(
            v["gaps"].as_array().unwrap().len(),
            v["thresholds"].as_array().unwrap().len()
        );
        assert!(v["germ"]["label"].as_str().is_some());
    }
}
